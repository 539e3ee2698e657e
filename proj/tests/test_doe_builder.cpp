#include <doctest.h>

#include <cmath>

#include "doe/doe_problem.hpp"
#include "doe/errors.hpp"
#include "doe/lindistflow.hpp"
#include "doe/scenario.hpp"
#include "doe/training.hpp"
#include "support/fixtures.hpp"

using namespace doe;

namespace {

// Untrained but structurally valid bundle: random projected ICNNs, identity
// normalization folded in. Tightness and penalty-monotonicity properties
// hold for any valid weights, trained or not.
SurrogateBundle stub_bundle(const Feeder& feeder, const RetrenchPlan& plan,
                            NetKind kind, std::uint64_t seed) {
  SurrogateBundle b;
  b.plan = plan;
  const int in = 2 * feeder.bus_count();
  auto mk = [&](HeadKind head, std::uint64_t s) {
    std::vector<int> ids = head_output_ids(feeder, head, plan);
    ReluNetwork net = make_network(kind, head, in, {6, 4}, static_cast<int>(ids.size()), s);
    net.output_ids = std::move(ids);
    // Untrained nets on kW-scale inputs blow up; damp the input stage so the
    // LP coefficients stay sane.
    net.layers[0].w_x *= 1e-3;
    for (std::size_t k = 1; k < net.layers.size(); ++k) {
      if (net.layers[k].w_x.size()) net.layers[k].w_x *= 1e-3;
    }
    fold_normalization(net);
    return net;
  };
  b.loss_net = mk(HeadKind::Loss, seed + 1);
  b.v_net = mk(HeadKind::Voltage, seed + 2);
  b.ol_net = mk(HeadKind::Overload, seed + 3);
  b.rpf_net = mk(HeadKind::ReverseFlow, seed + 4);
  return b;
}

}  // namespace

TEST_CASE("zero penalty weights hand every DER its forecast limit") {
  Feeder f = testing::load_feeder33();
  SurrogateBundle bundle = stub_bundle(f, retrench(f), NetKind::Icnn, 10);
  DoeRequest req = make_snapshot_request(f, 0.5);
  req.weights.w_loss = req.weights.w_v = req.weights.w_ol = req.weights.w_rpf = 0.0;

  DoeInstance inst = build_icnn_lp(f, bundle, req, 0);
  LpSolution sol = solve_lp(inst.lp);
  REQUIRE(sol.status == LpStatus::Optimal);
  CHECK(sol.x[inst.der_vars[0]] == doctest::Approx(800.0));
  CHECK(sol.x[inst.der_vars[1]] == doctest::Approx(500.0));
}

TEST_CASE("relaxed and exact builds agree for any valid icnn") {
  Feeder f = testing::load_feeder33();
  SurrogateBundle bundle = stub_bundle(f, retrench(f), NetKind::Icnn, 77);
  DoeRequest req = make_snapshot_request(f, 0.4);

  DoeInstance lp_inst = build_icnn_lp(f, bundle, req, 0);
  LpSolution lp_sol = solve_lp(lp_inst.lp);
  REQUIRE(lp_sol.status == LpStatus::Optimal);

  DoeInstance milp_inst = build_icnn_milp(f, bundle, req, 0);
  CHECK(!milp_inst.binaries.empty());
  MilpProblem mp;
  mp.lp = milp_inst.lp;
  mp.binaries = milp_inst.binaries;
  MilpSolution milp_sol = solve_milp(mp);
  REQUIRE(milp_sol.status == LpStatus::Optimal);

  double a = lp_sol.objective + lp_inst.objective_offset;
  double b = milp_sol.objective + milp_inst.objective_offset;
  CHECK(std::abs(a - b) / std::max(1.0, std::abs(a)) <= 1e-4);
}

TEST_CASE("delta variables match a forward-pass recomputation at the optimum") {
  Feeder f = testing::load_feeder33();
  RetrenchPlan plan = retrench(f);
  SurrogateBundle bundle = stub_bundle(f, plan, NetKind::Icnn, 31);
  DoeRequest req = make_snapshot_request(f, 0.3);

  DoeInstance inst = build_icnn_lp(f, bundle, req, 0);
  LpSolution sol = solve_lp(inst.lp);
  REQUIRE(sol.status == LpStatus::Optimal);

  Eigen::VectorXd x(2 * f.bus_count());
  for (int i = 0; i < x.size(); ++i) x[i] = sol.x[inst.x_vars[i]];

  const HeadKind heads[4] = {HeadKind::Loss, HeadKind::Voltage, HeadKind::Overload,
                             HeadKind::ReverseFlow};
  for (int h = 0; h < 4; ++h) {
    const ReluNetwork& net = bundle.net(heads[h]);
    ViolationHead head = make_head(f, req.limits, plan, net);
    double recomputed = violation(head, net.forward(x));
    CHECK(std::abs(sol.x[inst.delta_var[h]] - recomputed) <= 1e-5);
  }
}

TEST_CASE("objective decomposition and envelope ordering") {
  Feeder f = testing::load_feeder33();
  SurrogateBundle bundle = stub_bundle(f, retrench(f), NetKind::Icnn, 5);
  SolveOptions opt;
  opt.icnn = &bundle;
  DoeRequest req = make_snapshot_request(f, 0.6);
  DoeResult res = solve_doe_interval(f, req, Method::B1, 0, opt);
  CHECK(res.j1 + res.j2 + res.j3 == doctest::Approx(res.objective()).epsilon(1e-12));
  const IntervalData& iv = req.intervals[0];
  for (std::size_t d = 0; d < res.envelope_kw.size(); ++d) {
    CHECK(res.envelope_kw[d] >= iv.der_p_min_kw[d] - 1e-9);
    CHECK(res.envelope_kw[d] <= iv.der_p_max_kw[d] + 1e-9);
  }
  CHECK(res.verified);
}

TEST_CASE("b0 exposes violations on a stress day and none without DERs") {
  Feeder f = testing::load_feeder33();
  DoeRequest day = make_stress_day(f, 24);

  SUBCASE("midday export breaks the reverse-flow floor") {
    double worst = 0.0;
    for (int t = 10; t <= 14; ++t) {
      DoeResult res = evaluate_b0(f, day, t);
      worst = std::max(worst, res.delta_rpf_true);
      CHECK(res.j1 == 0.0);
    }
    CHECK(worst > 0.0);
  }

  SUBCASE("a DER-free feeder sees no violations at base load") {
    Feeder bare = f;
    for (Bus& b : bare.buses) b.der.reset();
    DoeRequest req = make_snapshot_request(bare, 1.0);
    DoeResult res = evaluate_b0(bare, req, 0);
    CHECK(res.envelope_kw.empty());
    CHECK(res.j3 == doctest::Approx(0.0));
    // Verified quantities equal the plain base-case power flow.
    InjectionVector inj;
    for (const Bus& b : bare.buses) {
      inj.p_kw.push_back(b.base_load_p_kw);
      inj.q_kvar.push_back(b.base_load_q_kvar);
    }
    PowerFlowSolution pf = solve_distflow(bare, inj);
    CHECK(res.loss_true_kw == doctest::Approx(pf.loss_kw).epsilon(1e-9));
  }
}

TEST_CASE("lindistflow instance solves and respects the lossless reading") {
  Feeder f = testing::load_feeder33();
  DoeRequest req = make_snapshot_request(f, 0.8);
  DoeInstance inst = build_lindistflow(f, req, 0, 8);
  LpSolution sol = solve_lp(inst.lp);
  REQUIRE(sol.status == LpStatus::Optimal);

  SUBCASE("zero loss weight still solves") {
    DoeRequest r2 = req;
    r2.weights.w_loss = 0.0;
    DoeInstance i2 = build_lindistflow(f, r2, 0, 4);
    LpSolution s2 = solve_lp(i2.lp);
    CHECK(s2.status == LpStatus::Optimal);
  }
  SUBCASE("segment count must be positive") {
    CHECK_THROWS_AS(build_lindistflow(f, req, 0, 0), Error);
  }
}

TEST_CASE("pwl loss tangents approach the quadratic from below") {
  Feeder f = testing::two_bus(0.01, 0.02);
  f.buses[1].der = Der{4000.0, -4000.0, 0.0};
  const double base_kw = f.base_power_kw();
  const double p_max_kw = (500.0 / f.base_current_a()) * base_kw;
  const int segments = 64;
  const double h = 2.0 * p_max_kw / segments;

  for (double p_target : {-2000.0, -500.0, 0.0, 800.0, 2000.0}) {
    DoeRequest req = make_snapshot_request(f, 1.0);
    double injection = 1000.0 - p_target;  // line flow = load - der
    req.intervals[0].der_p_max_kw = {injection};
    req.intervals[0].der_p_min_kw = {injection};
    req.weights.w_v = req.weights.w_ol = req.weights.w_rpf = 0.0;

    DoeInstance inst = build_lindistflow(f, req, 0, segments);
    LpSolution sol = solve_lp(inst.lp);
    REQUIRE(sol.status == LpStatus::Optimal);

    double q_flow = 500.0;  // fixed reactive load
    double truth = (0.01 * p_target * p_target + 0.02 * q_flow * q_flow) / base_kw;
    double pwl = sol.x[inst.delta_var[0]];
    // Tangent cuts underestimate by at most coef*h^2/4 per term.
    double bound = (0.01 + 0.02) / base_kw * h * h / 4.0;
    CHECK(pwl <= truth + 1e-9);
    CHECK(truth - pwl <= bound + 1e-9);
  }
}

TEST_CASE("raising the reverse-flow weight never raises its predicted violation") {
  Feeder f = testing::load_feeder33();
  SurrogateBundle bundle = stub_bundle(f, retrench(f), NetKind::Icnn, 91);
  DoeRequest req = make_snapshot_request(f, 0.25);
  double last = kInf;
  for (double w : {10.0, 100.0, 1000.0, 10000.0}) {
    req.weights.w_rpf = w;
    DoeInstance inst = build_icnn_lp(f, bundle, req, 0);
    LpSolution sol = solve_lp(inst.lp);
    REQUIRE(sol.status == LpStatus::Optimal);
    double d = sol.x[inst.delta_var[3]];
    CHECK(d <= last + 1e-7);
    last = d;
  }
}

TEST_CASE("retrenched builds carry strictly fewer variables") {
  Feeder f = testing::load_feeder33();
  SurrogateBundle full = stub_bundle(f, full_plan(f), NetKind::Icnn, 55);
  SurrogateBundle slim = stub_bundle(f, retrench(f), NetKind::Icnn, 55);
  DoeRequest req = make_snapshot_request(f, 0.5);
  DoeInstance a = build_icnn_lp(f, full, req, 0);
  DoeInstance b = build_icnn_lp(f, slim, req, 0);
  CHECK(b.lp.variable_count() < a.lp.variable_count());
}

TEST_CASE("interval independence and error annotation") {
  Feeder f = testing::load_feeder33();
  DoeRequest day = make_stress_day(f, 4);
  SolveOptions opt;
  std::vector<DoeResult> rows = solve_doe(f, day, Method::B0, opt);
  REQUIRE(rows.size() == 4);
  // Single-interval request reproduces the same row.
  DoeRequest one;
  one.direction = day.direction;
  one.weights = day.weights;
  one.limits = day.limits;
  one.intervals = {day.intervals[2]};
  DoeResult lone = solve_doe(f, one, Method::B0, opt)[0];
  CHECK(lone.envelope_kw == rows[2].envelope_kw);
  CHECK(lone.j3 == doctest::Approx(rows[2].j3).epsilon(1e-12));

  SUBCASE("missing models are reported with the interval") {
    CHECK_THROWS_WITH_AS(solve_doe(f, day, Method::B1, opt),
                         doctest::Contains("interval 0"), Error);
  }
}

TEST_CASE("request json round trip") {
  Feeder f = testing::load_feeder33();
  DoeRequest req = make_stress_day(f, 6, Direction::Lower);
  std::string text = request_to_json(req, f);
  DoeRequest back = request_from_json(text, f);
  CHECK(back.direction == Direction::Lower);
  REQUIRE(back.intervals.size() == 6);
  CHECK(back.intervals[3].load_p_kw == req.intervals[3].load_p_kw);
  CHECK(back.weights.w_rpf == req.weights.w_rpf);
  CHECK(request_to_json(back, f) == text);
}

// Reverse flow weakens monotonically toward the root on this feeder (every
// intermediate bus consumes), so lines pruned from the reverse-flow outputs
// cannot violate their floor before the retained parent lines do. Checked
// empirically on oracle-verified solutions.
TEST_CASE("pruned quantities never violate before retained ones") {
  Feeder f = testing::load_feeder33();
  RetrenchPlan plan = retrench(f);
  SurrogateBundle bundle = stub_bundle(f, plan, NetKind::Icnn, 123);
  SolveOptions opt;
  opt.icnn = &bundle;
  DoeRequest day = make_stress_day(f, 6);
  Limits lim = f.default_limits();

  for (int t = 0; t < 6; ++t) {
    DoeResult res = solve_doe_interval(f, day, Method::B1, t, opt);
    const IntervalData& iv = day.intervals[t];
    InjectionVector inj;
    inj.p_kw = iv.load_p_kw;
    inj.q_kvar = iv.load_q_kvar;
    auto ders = der_list(f);
    for (std::size_t d = 0; d < ders.size(); ++d) {
      inj.p_kw[ders[d].first] -= res.envelope_kw[d];
      inj.q_kvar[ders[d].first] -= iv.der_q_kvar[d];
    }
    PowerFlowSolution pf = solve_distflow(f, inj);

    auto rpf_violation = [&](int l) {
      return std::max(lim.p_min_kw[l] - pf.p_flow_kw[l], 0.0);
    };
    double retained = 0.0, pruned = 0.0;
    for (int l = 0; l < f.line_count(); ++l) {
      bool kept = std::find(plan.rpf_lines.begin(), plan.rpf_lines.end(), l) !=
                  plan.rpf_lines.end();
      (kept ? retained : pruned) = std::max(kept ? retained : pruned, rpf_violation(l));
    }
    CHECK(pruned <= retained + 1e-6);

    double v_retained = 0.0, v_pruned = 0.0;
    for (int i = 0; i < f.bus_count(); ++i) {
      double viol = std::max(pf.v_pu[i] - lim.v_max_pu, 0.0) +
                    std::max(lim.v_min_pu - pf.v_pu[i], 0.0);
      bool kept = std::find(plan.v_buses.begin(), plan.v_buses.end(), i) !=
                  plan.v_buses.end();
      (kept ? v_retained : v_pruned) = std::max(kept ? v_retained : v_pruned, viol);
    }
    CHECK(v_pruned <= v_retained + 1e-6);
  }
}
