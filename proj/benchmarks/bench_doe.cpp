#include <benchmark/benchmark.h>

#include "doe/doe_problem.hpp"
#include "doe/lindistflow.hpp"
#include "doe/retrench.hpp"
#include "doe/scenario.hpp"
#include "doe/training.hpp"

#ifndef DOE_DATA_DIR
#define DOE_DATA_DIR "."
#endif

namespace {

const doe::Feeder& feeder33() {
  static doe::Feeder f = doe::load_feeder(std::string(DOE_DATA_DIR) + "/feeder33.json");
  return f;
}

// Random weights are enough for timing; solve paths do not depend on
// training quality.
const doe::SurrogateBundle& bundle() {
  static doe::SurrogateBundle b = [] {
    const doe::Feeder& f = feeder33();
    doe::SurrogateBundle s;
    s.plan = doe::retrench(f);
    auto mk = [&](doe::HeadKind head, std::uint64_t seed) {
      std::vector<int> ids = doe::head_output_ids(f, head, s.plan);
      doe::ReluNetwork net = doe::make_network(doe::NetKind::Icnn, head,
                                               2 * f.bus_count(), {32, 16},
                                               static_cast<int>(ids.size()), seed);
      net.output_ids = std::move(ids);
      net.layers[0].w_x *= 1e-3;
      for (std::size_t k = 1; k < net.layers.size(); ++k) {
        if (net.layers[k].w_x.size()) net.layers[k].w_x *= 1e-3;
      }
      doe::fold_normalization(net);
      return net;
    };
    s.loss_net = mk(doe::HeadKind::Loss, 1);
    s.v_net = mk(doe::HeadKind::Voltage, 2);
    s.ol_net = mk(doe::HeadKind::Overload, 3);
    s.rpf_net = mk(doe::HeadKind::ReverseFlow, 4);
    return s;
  }();
  return b;
}

void BM_BuildIcnnLp(benchmark::State& state) {
  const doe::Feeder& f = feeder33();
  doe::DoeRequest req = doe::make_snapshot_request(f, 0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(doe::build_icnn_lp(f, bundle(), req, 0));
  }
}
BENCHMARK(BM_BuildIcnnLp);

void BM_SolveB1(benchmark::State& state) {
  const doe::Feeder& f = feeder33();
  doe::DoeRequest req = doe::make_snapshot_request(f, 0.5);
  doe::SolveOptions opt;
  opt.icnn = &bundle();
  opt.verify = false;
  for (auto _ : state) {
    benchmark::DoNotOptimize(doe::solve_doe_interval(f, req, doe::Method::B1, 0, opt));
  }
}
BENCHMARK(BM_SolveB1)->Unit(benchmark::kMillisecond);

void BM_SolveB3(benchmark::State& state) {
  const doe::Feeder& f = feeder33();
  doe::DoeRequest req = doe::make_snapshot_request(f, 0.5);
  doe::SolveOptions opt;
  opt.verify = false;
  opt.pwl_segments = static_cast<int>(state.range(0));
  for (auto _ : state) {
    benchmark::DoNotOptimize(doe::solve_doe_interval(f, req, doe::Method::B3, 0, opt));
  }
}
BENCHMARK(BM_SolveB3)->Arg(8)->Arg(16)->Unit(benchmark::kMillisecond);

void BM_OracleVerify(benchmark::State& state) {
  const doe::Feeder& f = feeder33();
  doe::DoeRequest req = doe::make_snapshot_request(f, 0.5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(doe::evaluate_b0(f, req, 0));
  }
}
BENCHMARK(BM_OracleVerify);

}  // namespace
