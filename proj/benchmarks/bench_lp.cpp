#include <benchmark/benchmark.h>

#include "doe/icnn.hpp"
#include "doe/lp.hpp"
#include "doe/rng.hpp"

namespace {

void BM_IcnnForward(benchmark::State& state) {
  doe::ReluNetwork net = doe::make_network(doe::NetKind::Icnn, doe::HeadKind::Voltage,
                                           66, {48, 24}, 32, 7);
  Eigen::VectorXd x = Eigen::VectorXd::Random(66) * 100.0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(net.forward(x));
  }
}
BENCHMARK(BM_IcnnForward);

void BM_ExactInferenceLp(benchmark::State& state) {
  doe::ReluNetwork net = doe::make_network(doe::NetKind::Icnn, doe::HeadKind::Loss, 66,
                                           {static_cast<int>(state.range(0)),
                                            static_cast<int>(state.range(0)) / 2},
                                           1, 7);
  Eigen::VectorXd x = Eigen::VectorXd::Random(66);
  for (auto _ : state) {
    benchmark::DoNotOptimize(doe::exact_inference_lp(net, x));
  }
}
BENCHMARK(BM_ExactInferenceLp)->Arg(16)->Arg(32)->Arg(48);

void BM_RandomLpSolve(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  doe::LpProblem p;
  doe::Rng rng(11);
  for (int v = 0; v < n; ++v) {
    p.add_variable("x" + std::to_string(v), -5.0, 5.0, rng.uniform(-1.0, 1.0));
  }
  for (int r = 0; r < n; ++r) {
    doe::LpRow row;
    for (int v = 0; v < n; ++v) {
      if (rng.next_double() < 0.2) row.terms.push_back({v, rng.uniform(-1.0, 1.0)});
    }
    if (row.terms.empty()) row.terms.push_back({r, 1.0});
    row.rel = doe::Rel::LE;
    row.rhs = rng.uniform(0.5, 4.0);
    p.add_row(std::move(row));
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(doe::solve_lp(p));
  }
}
BENCHMARK(BM_RandomLpSolve)->Arg(50)->Arg(200);

}  // namespace
