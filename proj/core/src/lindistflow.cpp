#include "doe/lindistflow.hpp"

#include <cmath>
#include <string>

#include "doe/errors.hpp"
#include "doe/topology.hpp"

namespace doe {

DoeInstance build_lindistflow(const Feeder& feeder, const DoeRequest& request, int t,
                              int pwl_segments) {
  if (pwl_segments < 1) throw Error("BadSegmentCount: pwl_segments must be >= 1");
  request.check(feeder);
  const TopologyOrder topo = validate_radial(feeder);
  const IntervalData& iv = request.intervals[t];
  const auto ders = der_list(feeder);
  const int nb = feeder.bus_count();
  const int nl = feeder.line_count();
  const int root = feeder.slack_index();
  const double base_kw = feeder.base_power_kw();
  const double i_base = feeder.base_current_a();
  const double amps_per_kw = i_base / base_kw;

  DoeInstance inst;
  LpProblem& lp = inst.lp;

  // Envelope variables and the J1 term, same convention as the surrogate
  // builds.
  for (std::size_t d = 0; d < ders.size(); ++d) {
    int v = lp.add_variable("p_der_" + std::to_string(feeder.buses[ders[d].first].id),
                            iv.der_p_min_kw[d], iv.der_p_max_kw[d]);
    inst.der_vars.push_back(v);
    if (request.direction == Direction::Upper) {
      lp.set_cost(v, -request.weights.w_doe);
      inst.objective_offset += request.weights.w_doe * iv.der_p_max_kw[d];
    } else {
      lp.set_cost(v, request.weights.w_doe);
      inst.objective_offset -= request.weights.w_doe * iv.der_p_min_kw[d];
    }
  }
  std::vector<int> der_at_bus(nb, -1);
  for (std::size_t d = 0; d < ders.size(); ++d) der_at_bus[ders[d].first] = static_cast<int>(d);

  // Lossless branch flows in kW / kVar and squared voltages in p.u.
  std::vector<int> p_vars(nl), q_vars(nl), v_vars(nb);
  for (int l = 0; l < nl; ++l) {
    p_vars[l] = lp.add_variable("P_" + std::to_string(l), -kInf, kInf);
    q_vars[l] = lp.add_variable("Q_" + std::to_string(l), -kInf, kInf);
  }
  const double v0_sq = feeder.slack_voltage_pu * feeder.slack_voltage_pu;
  for (int i = 0; i < nb; ++i) {
    if (i == root) {
      v_vars[i] = lp.add_variable("vsq_" + std::to_string(feeder.buses[i].id), v0_sq, v0_sq);
    } else {
      v_vars[i] = lp.add_variable("vsq_" + std::to_string(feeder.buses[i].id), 0.25, 2.25);
    }
  }

  // Flow balance at every non-slack bus j with parent line lj:
  //   P_lj - sum_child P_lk = p_j   (q analog with the reactive flows)
  for (int j = 0; j < nb; ++j) {
    if (j == root) continue;
    int lj = topo.parent_line[j];
    LpRow prow, qrow;
    prow.terms.push_back({p_vars[lj], 1.0});
    qrow.terms.push_back({q_vars[lj], 1.0});
    for (int k : topo.children[j]) {
      prow.terms.push_back({p_vars[topo.parent_line[k]], -1.0});
      qrow.terms.push_back({q_vars[topo.parent_line[k]], -1.0});
    }
    double q_j = iv.load_q_kvar[j];
    if (der_at_bus[j] >= 0) q_j -= iv.der_q_kvar[der_at_bus[j]];
    if (der_at_bus[j] >= 0) {
      prow.terms.push_back({inst.der_vars[der_at_bus[j]], 1.0});
    }
    prow.rel = Rel::EQ;
    prow.rhs = iv.load_p_kw[j];
    qrow.rel = Rel::EQ;
    qrow.rhs = q_j;
    lp.add_row(std::move(prow));
    lp.add_row(std::move(qrow));
  }

  // Linear voltage drop: v_j = v_i - 2(r P + x Q) with flows in p.u.
  for (int j = 0; j < nb; ++j) {
    if (j == root) continue;
    int i = topo.parent_bus[j];
    int lj = topo.parent_line[j];
    const Line& ln = feeder.lines[lj];
    LpRow row;
    row.terms.push_back({v_vars[j], 1.0});
    row.terms.push_back({v_vars[i], -1.0});
    row.terms.push_back({p_vars[lj], 2.0 * ln.r_pu / base_kw});
    row.terms.push_back({q_vars[lj], 2.0 * ln.x_pu / base_kw});
    row.rel = Rel::EQ;
    row.rhs = 0.0;
    lp.add_row(std::move(row));
  }

  // Convex piecewise-linear loss epigraph: tangent cuts of r P^2 + x Q^2 at
  // segment midpoints over each line's rated flow range. Tangents to a
  // convex function stay valid outside the range too.
  std::vector<int> t_vars;
  for (int l = 0; l < nl; ++l) {
    const Line& ln = feeder.lines[l];
    double p_max_kw = (request.limits.i_max_a[l] / i_base) * base_kw;
    for (int part = 0; part < 2; ++part) {
      double coef = (part == 0 ? ln.r_pu : ln.x_pu) / base_kw;  // kW loss per kW^2
      int flow = part == 0 ? p_vars[l] : q_vars[l];
      int tv = lp.add_variable((part == 0 ? "tp_" : "tq_") + std::to_string(l), 0.0, kInf);
      t_vars.push_back(tv);
      double h = 2.0 * p_max_kw / pwl_segments;
      for (int s = 0; s < pwl_segments; ++s) {
        double m = -p_max_kw + (s + 0.5) * h;
        LpRow row;  // t >= coef*(2 m flow - m^2)
        row.terms.push_back({tv, 1.0});
        row.terms.push_back({flow, -2.0 * coef * m});
        row.rel = Rel::GE;
        row.rhs = -coef * m * m;
        lp.add_row(std::move(row));
      }
    }
  }
  int delta_loss = lp.add_variable("loss_delta", 0.0, kInf, request.weights.w_loss);
  {
    LpRow row;  // delta_loss = sum t
    row.terms.push_back({delta_loss, 1.0});
    for (int tv : t_vars) row.terms.push_back({tv, -1.0});
    row.rel = Rel::EQ;
    row.rhs = 0.0;
    lp.add_row(std::move(row));
  }

  // Soft operating limits, matching the penalty structure of the surrogate
  // objective. Voltage violations are reported in approximate magnitude
  // units via d|V|/dv = 1/(2|V|) at the window edges.
  std::vector<int> nu_v;
  for (int i = 0; i < nb; ++i) {
    int nu = lp.add_variable("nuv_" + std::to_string(i), 0.0, kInf);
    nu_v.push_back(nu);
    double vmax_sq = request.limits.v_max_pu * request.limits.v_max_pu;
    double vmin_sq = request.limits.v_min_pu * request.limits.v_min_pu;
    double up = 0.5 / request.limits.v_max_pu;
    double dn = 0.5 / request.limits.v_min_pu;
    lp.add_row({{{nu, 1.0}, {v_vars[i], -up}}, Rel::GE, -up * vmax_sq, ""});
    lp.add_row({{{nu, 1.0}, {v_vars[i], dn}}, Rel::GE, dn * vmin_sq, ""});
  }
  int delta_v = lp.add_variable("v_delta", 0.0, kInf, request.weights.w_v);
  {
    LpRow row;
    row.terms.push_back({delta_v, 1.0});
    for (int nu : nu_v) row.terms.push_back({nu, -1.0});
    row.rel = Rel::GE;
    row.rhs = 0.0;
    lp.add_row(std::move(row));
  }

  // Thermal surrogate |P| <= P_max with P_max = I_max * V_nominal, reported
  // in ampere units.
  std::vector<int> nu_ol;
  for (int l = 0; l < nl; ++l) {
    double p_max_kw = (request.limits.i_max_a[l] / i_base) * base_kw;
    int nu = lp.add_variable("nuol_" + std::to_string(l), 0.0, kInf);
    nu_ol.push_back(nu);
    lp.add_row({{{nu, 1.0}, {p_vars[l], -amps_per_kw}}, Rel::GE, -amps_per_kw * p_max_kw, ""});
    lp.add_row({{{nu, 1.0}, {p_vars[l], amps_per_kw}}, Rel::GE, -amps_per_kw * p_max_kw, ""});
  }
  int delta_ol = lp.add_variable("ol_delta", 0.0, kInf, request.weights.w_ol);
  {
    LpRow row;
    row.terms.push_back({delta_ol, 1.0});
    for (int nu : nu_ol) row.terms.push_back({nu, -1.0});
    row.rel = Rel::GE;
    row.rhs = 0.0;
    lp.add_row(std::move(row));
  }

  // Reverse-flow floor in kW.
  std::vector<int> nu_rpf;
  for (int l = 0; l < nl; ++l) {
    int nu = lp.add_variable("nurpf_" + std::to_string(l), 0.0, kInf);
    nu_rpf.push_back(nu);
    lp.add_row({{{nu, 1.0}, {p_vars[l], 1.0}}, Rel::GE, request.limits.p_min_kw[l], ""});
  }
  int delta_rpf = lp.add_variable("rpf_delta", 0.0, kInf, request.weights.w_rpf);
  {
    LpRow row;
    row.terms.push_back({delta_rpf, 1.0});
    for (int nu : nu_rpf) row.terms.push_back({nu, -1.0});
    row.rel = Rel::GE;
    row.rhs = 0.0;
    lp.add_row(std::move(row));
  }

  inst.delta_var[0] = delta_loss;
  inst.delta_var[1] = delta_v;
  inst.delta_var[2] = delta_ol;
  inst.delta_var[3] = delta_rpf;

  // x_vars are not part of the physics here; keep the map for result
  // extraction symmetry.
  inst.x_vars.clear();
  return inst;
}

}  // namespace doe
