#include <doctest.h>

#include <cmath>

#include "doe/errors.hpp"
#include "doe/milp.hpp"
#include "doe/rng.hpp"
#include "support/fixtures.hpp"

using namespace doe;

TEST_CASE("zero-width box reproduces the forward preactivations") {
  ReluNetwork net = make_network(NetKind::Icnn, HeadKind::Loss, 3, {5, 4}, 1, 10);
  Eigen::VectorXd x(3);
  x << 0.3, -1.2, 2.0;
  ActivationBounds b = bound_propagate(net, x, x);
  // Recompute preactivations directly.
  Eigen::VectorXd a0 = net.layers[0].w_x * x + net.layers[0].b;
  for (int i = 0; i < a0.size(); ++i) {
    CHECK(b.lo[0][i] == doctest::Approx(a0[i]).epsilon(1e-12));
    CHECK(b.hi[0][i] == doctest::Approx(a0[i]).epsilon(1e-12));
  }
  Eigen::VectorXd z1 = a0.cwiseMax(0.0);
  Eigen::VectorXd a1 = net.layers[1].w_z * z1 + net.layers[1].w_x * x + net.layers[1].b;
  for (int i = 0; i < a1.size(); ++i) {
    CHECK(b.lo[1][i] == doctest::Approx(a1[i]).epsilon(1e-10));
  }
}

TEST_CASE("single affine layer interval") {
  // W = [2], b = 1, x in [0, 1] -> preactivation in [1, 3].
  ReluNetwork net;
  net.kind = NetKind::Mlp;
  Layer h;
  h.w_x = Eigen::MatrixXd::Constant(1, 1, 2.0);
  h.b = Eigen::VectorXd::Constant(1, 1.0);
  Layer out;
  out.w_z = Eigen::MatrixXd::Constant(1, 1, 1.0);
  out.b = Eigen::VectorXd::Zero(1);
  net.layers = {h, out};
  Eigen::VectorXd lo(1), hi(1);
  lo << 0.0;
  hi << 1.0;
  ActivationBounds b = bound_propagate(net, lo, hi);
  CHECK(b.lo[0][0] == doctest::Approx(1.0));
  CHECK(b.hi[0][0] == doctest::Approx(3.0));
}

TEST_CASE("sampled activations stay inside propagated intervals") {
  ReluNetwork net = make_network(NetKind::Icnn, HeadKind::Voltage, 4, {8, 6}, 3, 55);
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(4, -2.0);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(4, 3.0);
  ActivationBounds bounds = bound_propagate(net, lo, hi);

  Rng rng(4);
  for (int s = 0; s < 1000; ++s) {
    Eigen::VectorXd x(4);
    for (int i = 0; i < 4; ++i) x[i] = rng.uniform(lo[i], hi[i]);
    Eigen::VectorXd a = net.layers[0].w_x * x + net.layers[0].b;
    for (int i = 0; i < a.size(); ++i) {
      CHECK(a[i] >= bounds.lo[0][i] - 1e-9);
      CHECK(a[i] <= bounds.hi[0][i] + 1e-9);
    }
    Eigen::VectorXd z = a.cwiseMax(0.0);
    Eigen::VectorXd a1 = net.layers[1].w_z * z + net.layers[1].w_x * x + net.layers[1].b;
    for (int i = 0; i < a1.size(); ++i) {
      CHECK(a1[i] >= bounds.lo[1][i] - 1e-9);
      CHECK(a1[i] <= bounds.hi[1][i] + 1e-9);
    }
    Eigen::VectorXd y = net.forward(x);
    for (int i = 0; i < y.size(); ++i) {
      CHECK(y[i] >= bounds.out_lo[i] - 1e-9);
      CHECK(y[i] <= bounds.out_hi[i] + 1e-9);
    }
  }
}

TEST_CASE("unbounded box is rejected") {
  ReluNetwork net = make_network(NetKind::Icnn, HeadKind::Loss, 2, {3}, 1, 1);
  Eigen::VectorXd lo = Eigen::VectorXd::Constant(2, -kInf);
  Eigen::VectorXd hi = Eigen::VectorXd::Constant(2, 1.0);
  CHECK_THROWS_AS(bound_propagate(net, lo, hi), UnboundedInput);
}

TEST_CASE("stable neurons are encoded without binaries") {
  LpProblem lp;
  std::vector<int> binaries;
  int x = lp.add_variable("x", 0.0, 1.0);

  SUBCASE("always active: z equals the preactivation") {
    int z = encode_relu_bigM(lp, binaries, {{x, 1.0}}, 2.0, 2.0, 3.0, "on");
    CHECK(binaries.empty());
    lp.set_cost(z, 1.0);
    LpSolution sol = solve_lp(lp);
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(sol.x[z] == doctest::Approx(2.0));  // x at 0 -> z = 2
  }
  SUBCASE("always inactive: z pinned to zero") {
    int z = encode_relu_bigM(lp, binaries, {{x, 1.0}}, -5.0, -5.0, -4.0, "off");
    CHECK(binaries.empty());
    CHECK(lp.lower()[z] == 0.0);
    CHECK(lp.upper()[z] == 0.0);
  }
  SUBCASE("crossing zero needs one binary") {
    encode_relu_bigM(lp, binaries, {{x, 1.0}}, -0.5, -0.5, 0.5, "mid");
    CHECK(binaries.size() == 1);
  }
}

TEST_CASE("milp minimum of a network over a box matches a dense grid") {
  ReluNetwork net = make_network(NetKind::Mlp, HeadKind::Loss, 1, {6, 4}, 1, 23);
  const double lo = -2.0, hi = 2.0;

  // Grid oracle.
  double grid_min = kInf;
  for (int i = 0; i <= 4000; ++i) {
    Eigen::VectorXd x(1);
    x << lo + (hi - lo) * i / 4000.0;
    grid_min = std::min(grid_min, net.forward(x)[0]);
  }

  LpProblem lp;
  std::vector<int> binaries;
  int xv = lp.add_variable("x", lo, hi);
  Eigen::VectorXd vlo(1), vhi(1);
  vlo << lo;
  vhi << hi;
  ActivationBounds bounds = bound_propagate(net, vlo, vhi);
  EncodedNetwork enc = encode_network_bigM(lp, binaries, net, {xv}, bounds, "net");
  const std::vector<int>& zk = enc.z_vars.back();
  int y = lp.add_variable("y", -kInf, kInf, 1.0);
  LpRow row;
  row.terms.push_back({y, 1.0});
  const Layer& out = net.layers.back();
  for (std::size_t j = 0; j < zk.size(); ++j) {
    if (out.w_z(0, j) != 0.0) row.terms.push_back({zk[j], -out.w_z(0, j)});
  }
  row.rel = Rel::EQ;
  row.rhs = out.b[0];
  lp.add_row(std::move(row));

  MilpProblem mp;
  mp.lp = lp;
  mp.binaries = binaries;
  MilpSolution sol = solve_milp(mp);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.objective == doctest::Approx(grid_min).epsilon(1e-5));
  CHECK(sol.bound <= sol.objective + 1e-9);
}

TEST_CASE("five-binary knapsack matches exhaustive enumeration") {
  Rng rng(88);
  for (int inst = 0; inst < 10; ++inst) {
    const int nb = 5;
    std::vector<double> value(nb), weight(nb);
    for (int i = 0; i < nb; ++i) {
      value[i] = rng.uniform(1.0, 10.0);
      weight[i] = rng.uniform(1.0, 6.0);
    }
    double cap = rng.uniform(5.0, 14.0);

    LpProblem lp;
    std::vector<int> binaries;
    LpRow row;
    for (int i = 0; i < nb; ++i) {
      int b = lp.add_variable("b" + std::to_string(i), 0.0, 1.0, -value[i]);
      binaries.push_back(b);
      row.terms.push_back({b, weight[i]});
    }
    row.rel = Rel::LE;
    row.rhs = cap;
    lp.add_row(std::move(row));

    double oracle = 0.0;
    for (int mask = 0; mask < 32; ++mask) {
      double v = 0.0, w = 0.0;
      for (int i = 0; i < nb; ++i) {
        if (mask & (1 << i)) {
          v += value[i];
          w += weight[i];
        }
      }
      if (w <= cap) oracle = std::max(oracle, v);
    }

    MilpProblem mp;
    mp.lp = lp;
    mp.binaries = binaries;
    MilpSolution sol = solve_milp(mp);
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(-sol.objective == doctest::Approx(oracle).epsilon(1e-9));
    CHECK(sol.bound <= sol.objective + 1e-9);
    // Incumbent binaries are exactly integral after the fixing resolve.
    for (int b : binaries) {
      CHECK(std::min(sol.x[b], 1.0 - sol.x[b]) <= 1e-9);
    }
  }
}

TEST_CASE("fixed-by-presolve instance solves at the root") {
  LpProblem lp;
  std::vector<int> binaries;
  int b = lp.add_variable("b", 1.0, 1.0, 2.0);  // binary already pinned
  binaries.push_back(b);
  int x = lp.add_variable("x", 0.0, 4.0, 1.0);
  lp.add_row({{{x, 1.0}, {b, 1.0}}, Rel::GE, 2.0, ""});
  MilpProblem mp;
  mp.lp = lp;
  mp.binaries = binaries;
  MilpSolution sol = solve_milp(mp);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.nodes == 1);
  CHECK(sol.gap == doctest::Approx(0.0));
  CHECK(sol.objective == doctest::Approx(3.0));
}

TEST_CASE("infeasible milp reports infeasible") {
  LpProblem lp;
  std::vector<int> binaries;
  int b = lp.add_variable("b", 0.0, 1.0, 1.0);
  binaries.push_back(b);
  lp.add_row({{{b, 1.0}}, Rel::GE, 2.0, ""});
  MilpProblem mp;
  mp.lp = lp;
  mp.binaries = binaries;
  MilpSolution sol = solve_milp(mp);
  CHECK(sol.status == LpStatus::Infeasible);
}

TEST_CASE("depth-first mode reaches the same optimum") {
  LpProblem lp;
  std::vector<int> binaries;
  LpRow row;
  Rng rng(3);
  for (int i = 0; i < 6; ++i) {
    int b = lp.add_variable("b" + std::to_string(i), 0.0, 1.0, rng.uniform(-5.0, -1.0));
    binaries.push_back(b);
    row.terms.push_back({b, rng.uniform(1.0, 3.0)});
  }
  row.rel = Rel::LE;
  row.rhs = 6.0;
  lp.add_row(std::move(row));
  MilpProblem mp;
  mp.lp = lp;
  mp.binaries = binaries;

  BnbConfig best_bound;
  BnbConfig depth_first;
  depth_first.node_selection = BnbConfig::NodeSelection::DepthFirst;
  MilpSolution a = solve_milp(mp, best_bound);
  MilpSolution d = solve_milp(mp, depth_first);
  REQUIRE(a.status == LpStatus::Optimal);
  REQUIRE(d.status == LpStatus::Optimal);
  CHECK(a.objective == doctest::Approx(d.objective).epsilon(1e-9));
}

TEST_CASE("limits before any incumbent raise NoIncumbentFound") {
  LpProblem lp;
  std::vector<int> binaries;
  LpRow row;
  Rng rng(12);
  for (int i = 0; i < 6; ++i) {
    int b = lp.add_variable("b" + std::to_string(i), 0.0, 1.0, rng.uniform(-3.0, -1.0));
    binaries.push_back(b);
    row.terms.push_back({b, 1.0});
  }
  row.rel = Rel::LE;
  row.rhs = 2.5;  // fractional root for sure
  lp.add_row(std::move(row));
  MilpProblem mp;
  mp.lp = lp;
  mp.binaries = binaries;
  BnbConfig cfg;
  cfg.time_limit_s = 1e-9;  // expires before the first node is processed
  CHECK_THROWS_AS(solve_milp(mp, cfg), NoIncumbentFound);
}
