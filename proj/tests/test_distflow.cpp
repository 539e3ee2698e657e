#include <doctest.h>

#include <cmath>

#include "doe/distflow.hpp"
#include "doe/errors.hpp"
#include "doe/rng.hpp"
#include "support/fixtures.hpp"
#include "support/newton_pf.hpp"

using namespace doe;

TEST_CASE("zero injection fixes the no-flow point") {
  Feeder f = testing::load_feeder33();
  InjectionVector inj;
  inj.p_kw.assign(f.bus_count(), 0.0);
  inj.q_kvar.assign(f.bus_count(), 0.0);
  PowerFlowSolution sol = solve_distflow(f, inj);
  for (double v : sol.v_pu) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
  for (double i : sol.i_a) CHECK(i == doctest::Approx(0.0));
  CHECK(sol.loss_kw == doctest::Approx(0.0));
  DistflowResiduals r = residuals(f, sol, inj);
  CHECK(r.max() == doctest::Approx(0.0));
}

// Closed-form single-line check: with sending-end voltage fixed at 1, the
// squared current solves 0 = zz*l^2 - (1 - 2(r p + x q)) l + (p^2 + q^2)
// after eliminating the flows, and the receiving voltage follows from the
// drop equation.
TEST_CASE("two bus solution matches the closed-form quadratic") {
  const double r = 0.01, x = 0.01;
  const double p = 0.1, q = 0.05;  // p.u.
  Feeder f = testing::two_bus(r, x);
  const double base_kw = f.base_power_kw();

  InjectionVector inj;
  inj.p_kw = {0.0, p * base_kw};
  inj.q_kvar = {0.0, q * base_kw};
  PowerFlowSolution sol = solve_distflow(f, inj, 1e-12, 200);

  // l = (P^2+Q^2)/1 with P = p + r l, Q = q + x l:
  //   (r^2+x^2) l^2 - (1 - 2 r p - 2 x q) l + (p^2+q^2) = 0, small root.
  double a = r * r + x * x;
  double b = -(1.0 - 2.0 * r * p - 2.0 * x * q);
  double c = p * p + q * q;
  double l = (-b - std::sqrt(b * b - 4 * a * c)) / (2 * a);
  double p_flow = p + r * l;
  double q_flow = q + x * l;
  double v2_sq = 1.0 - 2.0 * (r * p_flow + x * q_flow) + a * l;

  CHECK(sol.v_pu[1] == doctest::Approx(std::sqrt(v2_sq)).epsilon(1e-10));
  CHECK(sol.p_flow_kw[0] == doctest::Approx(p_flow * base_kw).epsilon(1e-10));
  CHECK(sol.i_a[0] ==
        doctest::Approx(std::sqrt(l) * f.base_current_a()).epsilon(1e-10));
  CHECK(sol.loss_kw == doctest::Approx(r * l * base_kw).epsilon(1e-8));
}

TEST_CASE("bundled feeder agrees with the newton oracle at nominal load") {
  Feeder f = testing::load_feeder33();
  InjectionVector inj;
  for (const Bus& b : f.buses) {
    inj.p_kw.push_back(b.base_load_p_kw);
    inj.q_kvar.push_back(b.base_load_q_kvar);
  }
  PowerFlowSolution sweep = solve_distflow(f, inj);
  testing::NewtonSolution newton = testing::solve_newton(f, inj);
  for (int i = 0; i < f.bus_count(); ++i) {
    CHECK(sweep.v_pu[i] == doctest::Approx(newton.v_pu[i]).epsilon(1e-6));
  }
  // The known voltage sag of this feeder at nominal load.
  double vmin = *std::min_element(sweep.v_pu.begin(), sweep.v_pu.end());
  CHECK(vmin > 0.90);
  CHECK(vmin < 0.92);
  // Loss consistency: slack infeed equals load plus losses. The slack bus
  // feeds exactly one line in this feeder.
  double slack_in = sweep.p_flow_kw[0];
  double total_load = 0.0;
  for (double p : inj.p_kw) total_load += p;
  CHECK(sweep.loss_kw == doctest::Approx(slack_in - total_load).epsilon(1e-6));
}

TEST_CASE("oracle equivalence on random injections") {
  Feeder f = testing::load_feeder33();
  Rng rng(2024);
  for (int trial = 0; trial < 20; ++trial) {
    InjectionVector inj;
    for (const Bus& b : f.buses) {
      inj.p_kw.push_back(b.base_load_p_kw * rng.uniform(0.2, 1.3));
      inj.q_kvar.push_back(b.base_load_q_kvar * rng.uniform(0.2, 1.3));
    }
    // Random DER-style injections at the DER buses.
    inj.p_kw[f.bus_index(18)] -= rng.uniform(0.0, 800.0);
    inj.p_kw[f.bus_index(33)] -= rng.uniform(-500.0, 500.0);
    PowerFlowSolution sweep = solve_distflow(f, inj);
    testing::NewtonSolution newton = testing::solve_newton(f, inj);
    for (int i = 0; i < f.bus_count(); ++i) {
      CHECK(std::abs(sweep.v_pu[i] - newton.v_pu[i]) <= 1e-6);
    }
    for (int l = 0; l < f.line_count(); ++l) {
      CHECK(std::abs(sweep.i_a[l] - newton.i_a[l]) <= 1e-3 * f.base_current_a());
      CHECK(std::abs(sweep.p_flow_kw[l] - newton.p_flow_kw[l]) <= 0.05);
    }
  }
}

TEST_CASE("raising one load never raises any voltage") {
  Feeder f = testing::load_feeder33();
  InjectionVector base;
  for (const Bus& b : f.buses) {
    base.p_kw.push_back(b.base_load_p_kw);
    base.q_kvar.push_back(b.base_load_q_kvar);
  }
  PowerFlowSolution ref = solve_distflow(f, base);
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    InjectionVector inj = base;
    int bus = 1 + static_cast<int>(rng.next_below(f.bus_count() - 1));
    inj.p_kw[bus] += rng.uniform(1.0, 400.0);
    PowerFlowSolution sol = solve_distflow(f, inj);
    for (int i = 0; i < f.bus_count(); ++i) {
      CHECK(sol.v_pu[i] <= ref.v_pu[i] + 1e-9);
    }
  }
}

TEST_CASE("residuals flag a hand-perturbed flow") {
  Feeder f = testing::load_feeder33();
  InjectionVector inj;
  for (const Bus& b : f.buses) {
    inj.p_kw.push_back(b.base_load_p_kw);
    inj.q_kvar.push_back(b.base_load_q_kvar);
  }
  PowerFlowSolution sol = solve_distflow(f, inj);
  DistflowResiduals clean = residuals(f, sol, inj);
  CHECK(clean.max() <= 1e-8);

  sol.p_flow_kw[10] += 1.0;  // 1 kW
  DistflowResiduals dirty = residuals(f, sol, inj);
  // The active balance picks the perturbation up at 1 kW in per-unit.
  CHECK(dirty.active_balance ==
        doctest::Approx(1.0 / f.base_power_kw()).epsilon(1e-3));
}

TEST_CASE("violation terms evaluate the elementwise overshoot") {
  PowerFlowSolution sol;
  sol.v_pu = {1.12};
  sol.i_a = {100.0};
  sol.p_flow_kw = {-150.0};
  sol.q_flow_kvar = {0.0};
  Limits lim;
  lim.v_min_pu = 0.9;
  lim.v_max_pu = 1.1;
  lim.i_max_a = {500.0};
  lim.p_min_kw = {-125.0};
  ViolationTerms t = violation_terms(sol, lim);
  CHECK(t.dv_pu == doctest::Approx(0.02));
  CHECK(t.dol_a == doctest::Approx(0.0));
  CHECK(t.drpf_kw == doctest::Approx(25.0));

  SUBCASE("inside limits everything is zero") {
    sol.v_pu = {1.05};
    sol.p_flow_kw = {50.0};
    ViolationTerms z = violation_terms(sol, lim);
    CHECK(z.dv_pu == 0.0);
    CHECK(z.dol_a == 0.0);
    CHECK(z.drpf_kw == 0.0);
  }
  SUBCASE("dimension mismatch is rejected") {
    lim.i_max_a = {500.0, 400.0};
    CHECK_THROWS_AS(violation_terms(sol, lim), DimensionMismatch);
  }
}

TEST_CASE("extreme loading fails loudly") {
  Feeder f = testing::load_feeder33();
  InjectionVector inj;
  for (const Bus& b : f.buses) {
    inj.p_kw.push_back(b.base_load_p_kw * 500.0);
    inj.q_kvar.push_back(b.base_load_q_kvar * 500.0);
  }
  CHECK_THROWS_AS(solve_distflow(f, inj), Error);
}
