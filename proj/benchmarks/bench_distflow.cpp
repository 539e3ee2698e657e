#include <benchmark/benchmark.h>

#include "doe/distflow.hpp"
#include "doe/feeder.hpp"
#include "doe/topology.hpp"

#ifndef DOE_DATA_DIR
#define DOE_DATA_DIR "."
#endif

namespace {

const doe::Feeder& feeder33() {
  static doe::Feeder f = doe::load_feeder(std::string(DOE_DATA_DIR) + "/feeder33.json");
  return f;
}

void BM_DistflowSolve(benchmark::State& state) {
  const doe::Feeder& f = feeder33();
  doe::TopologyOrder topo = doe::validate_radial(f);
  doe::InjectionVector inj = doe::base_loads(f);
  for (auto _ : state) {
    benchmark::DoNotOptimize(doe::solve_distflow(f, topo, inj));
  }
}
BENCHMARK(BM_DistflowSolve);

void BM_ValidateRadial(benchmark::State& state) {
  const doe::Feeder& f = feeder33();
  for (auto _ : state) {
    benchmark::DoNotOptimize(doe::validate_radial(f));
  }
}
BENCHMARK(BM_ValidateRadial);

}  // namespace
