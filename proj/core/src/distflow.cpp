#include "doe/distflow.hpp"

#include <algorithm>
#include <cmath>

#include "doe/errors.hpp"

namespace doe {

double DistflowResiduals::max() const {
  return std::max(std::max(active_balance, reactive_balance),
                  std::max(voltage_drop, current_definition));
}

namespace {

struct PuState {
  std::vector<double> p;  // net bus load, p.u.
  std::vector<double> q;
  std::vector<double> v_sq;   // per bus
  std::vector<double> l_sq;   // |I|^2 per line
  std::vector<double> p_flow;  // per line
  std::vector<double> q_flow;
};

void check_dims(const Feeder& feeder, const InjectionVector& inj) {
  if (static_cast<int>(inj.p_kw.size()) != feeder.bus_count() ||
      static_cast<int>(inj.q_kvar.size()) != feeder.bus_count()) {
    throw DimensionMismatch("injection vector length does not match bus count");
  }
}

}  // namespace

PowerFlowSolution solve_distflow(const Feeder& feeder, const InjectionVector& inj,
                                 double tol_pu, int max_iter) {
  return solve_distflow(feeder, validate_radial(feeder), inj, tol_pu, max_iter);
}

PowerFlowSolution solve_distflow(const Feeder& feeder, const TopologyOrder& topo,
                                 const InjectionVector& inj, double tol_pu, int max_iter) {
  check_dims(feeder, inj);
  const int n = feeder.bus_count();
  const int m = feeder.line_count();
  const double base_kw = feeder.base_power_kw();
  const int root = feeder.slack_index();

  PuState st;
  st.p.resize(n);
  st.q.resize(n);
  for (int i = 0; i < n; ++i) {
    st.p[i] = inj.p_kw[i] / base_kw;
    st.q[i] = inj.q_kvar[i] / base_kw;
  }
  st.p[root] = 0.0;  // slack balances the feeder
  st.q[root] = 0.0;

  const double v0_sq = feeder.slack_voltage_pu * feeder.slack_voltage_pu;
  st.v_sq.assign(n, v0_sq);
  st.l_sq.assign(m, 0.0);
  st.p_flow.assign(m, 0.0);
  st.q_flow.assign(m, 0.0);

  double res = 0.0;
  int it = 0;
  for (it = 1; it <= max_iter; ++it) {
    // Backward sweep: sending-end flows from the leaves up, using the
    // current loss estimates r*l, x*l.
    for (auto bus_it = topo.order.rbegin(); bus_it != topo.order.rend(); ++bus_it) {
      int j = *bus_it;
      if (j == root) continue;
      int lj = topo.parent_line[j];
      double p_acc = st.p[j];
      double q_acc = st.q[j];
      for (int k : topo.children[j]) {
        int lk = topo.parent_line[k];
        p_acc += st.p_flow[lk];
        q_acc += st.q_flow[lk];
      }
      const Line& ln = feeder.lines[lj];
      st.p_flow[lj] = p_acc + ln.r_pu * st.l_sq[lj];
      st.q_flow[lj] = q_acc + ln.x_pu * st.l_sq[lj];
    }
    // Forward sweep: voltages from the slack down, then refresh the
    // squared-current estimates against the sending-end voltage.
    for (int j : topo.order) {
      if (j == root) continue;
      int i = topo.parent_bus[j];
      int lj = topo.parent_line[j];
      const Line& ln = feeder.lines[lj];
      double vj = st.v_sq[i] - 2.0 * (ln.r_pu * st.p_flow[lj] + ln.x_pu * st.q_flow[lj]) +
                  (ln.r_pu * ln.r_pu + ln.x_pu * ln.x_pu) * st.l_sq[lj];
      if (vj <= 0.0) {
        throw NegativeVoltageSquare("voltage collapse at bus " +
                                    std::to_string(feeder.buses[j].id));
      }
      st.v_sq[j] = vj;
      st.l_sq[lj] = (st.p_flow[lj] * st.p_flow[lj] + st.q_flow[lj] * st.q_flow[lj]) /
                    st.v_sq[i];
    }

    // Residuals of the four equations at the current iterate.
    res = 0.0;
    for (int j : topo.order) {
      if (j == root) continue;
      int i = topo.parent_bus[j];
      int lj = topo.parent_line[j];
      const Line& ln = feeder.lines[lj];
      double p_acc = st.p[j];
      double q_acc = st.q[j];
      for (int k : topo.children[j]) {
        p_acc += st.p_flow[topo.parent_line[k]];
        q_acc += st.q_flow[topo.parent_line[k]];
      }
      res = std::max(res, std::abs(st.p_flow[lj] - p_acc - ln.r_pu * st.l_sq[lj]));
      res = std::max(res, std::abs(st.q_flow[lj] - q_acc - ln.x_pu * st.l_sq[lj]));
      double v_rhs = st.v_sq[i] - 2.0 * (ln.r_pu * st.p_flow[lj] + ln.x_pu * st.q_flow[lj]) +
                     (ln.r_pu * ln.r_pu + ln.x_pu * ln.x_pu) * st.l_sq[lj];
      res = std::max(res, std::abs(st.v_sq[j] - v_rhs));
      double l_rhs = (st.p_flow[lj] * st.p_flow[lj] + st.q_flow[lj] * st.q_flow[lj]) /
                     st.v_sq[i];
      res = std::max(res, std::abs(st.l_sq[lj] - l_rhs));
    }
    if (res <= tol_pu) break;
  }
  if (res > tol_pu) {
    throw NonConvergence("distflow sweep did not converge", max_iter, res);
  }

  PowerFlowSolution sol;
  sol.v_pu.resize(n);
  for (int i = 0; i < n; ++i) sol.v_pu[i] = std::sqrt(st.v_sq[i]);
  sol.i_a.resize(m);
  sol.p_flow_kw.resize(m);
  sol.q_flow_kvar.resize(m);
  const double i_base = feeder.base_current_a();
  double loss_pu = 0.0;
  for (int l = 0; l < m; ++l) {
    sol.i_a[l] = std::sqrt(st.l_sq[l]) * i_base;
    sol.p_flow_kw[l] = st.p_flow[l] * base_kw;
    sol.q_flow_kvar[l] = st.q_flow[l] * base_kw;
    loss_pu += feeder.lines[l].r_pu * st.l_sq[l];
  }
  sol.loss_kw = loss_pu * base_kw;
  sol.iterations = std::min(it, max_iter);
  sol.residual = res;
  return sol;
}

DistflowResiduals residuals(const Feeder& feeder, const PowerFlowSolution& sol,
                            const InjectionVector& inj) {
  check_dims(feeder, inj);
  const int n = feeder.bus_count();
  const int m = feeder.line_count();
  if (static_cast<int>(sol.v_pu.size()) != n || static_cast<int>(sol.i_a.size()) != m ||
      static_cast<int>(sol.p_flow_kw.size()) != m ||
      static_cast<int>(sol.q_flow_kvar.size()) != m) {
    throw DimensionMismatch("solution dimensions do not match feeder");
  }
  TopologyOrder topo = validate_radial(feeder);
  const double base_kw = feeder.base_power_kw();
  const double i_base = feeder.base_current_a();
  const int root = feeder.slack_index();

  DistflowResiduals r;
  for (int j : topo.order) {
    if (j == root) continue;
    int i = topo.parent_bus[j];
    int lj = topo.parent_line[j];
    const Line& ln = feeder.lines[lj];
    double p_j = inj.p_kw[j] / base_kw;
    double q_j = inj.q_kvar[j] / base_kw;
    double p_ij = sol.p_flow_kw[lj] / base_kw;
    double q_ij = sol.q_flow_kvar[lj] / base_kw;
    double l_ij = (sol.i_a[lj] / i_base) * (sol.i_a[lj] / i_base);
    double vi_sq = sol.v_pu[i] * sol.v_pu[i];
    double vj_sq = sol.v_pu[j] * sol.v_pu[j];

    double p_down = 0.0, q_down = 0.0;
    for (int k : topo.children[j]) {
      p_down += sol.p_flow_kw[topo.parent_line[k]] / base_kw;
      q_down += sol.q_flow_kvar[topo.parent_line[k]] / base_kw;
    }
    r.active_balance =
        std::max(r.active_balance, std::abs(p_ij - p_down - p_j - ln.r_pu * l_ij));
    r.reactive_balance =
        std::max(r.reactive_balance, std::abs(q_ij - q_down - q_j - ln.x_pu * l_ij));
    double v_rhs = vi_sq - 2.0 * (ln.r_pu * p_ij + ln.x_pu * q_ij) +
                   (ln.r_pu * ln.r_pu + ln.x_pu * ln.x_pu) * l_ij;
    r.voltage_drop = std::max(r.voltage_drop, std::abs(vj_sq - v_rhs));
    r.current_definition =
        std::max(r.current_definition, std::abs(l_ij - (p_ij * p_ij + q_ij * q_ij) / vi_sq));
  }
  return r;
}

ViolationTerms violation_terms(const PowerFlowSolution& sol, const Limits& limits) {
  if (limits.i_max_a.size() != sol.i_a.size() ||
      limits.p_min_kw.size() != sol.p_flow_kw.size()) {
    throw DimensionMismatch("limit vector lengths do not match solution");
  }
  ViolationTerms t;
  for (double v : sol.v_pu) {
    t.dv_pu += std::max(v - limits.v_max_pu, 0.0) + std::max(limits.v_min_pu - v, 0.0);
  }
  for (std::size_t l = 0; l < sol.i_a.size(); ++l) {
    t.dol_a += std::max(sol.i_a[l] - limits.i_max_a[l], 0.0);
  }
  for (std::size_t l = 0; l < sol.p_flow_kw.size(); ++l) {
    t.drpf_kw += std::max(limits.p_min_kw[l] - sol.p_flow_kw[l], 0.0);
  }
  return t;
}

}  // namespace doe
