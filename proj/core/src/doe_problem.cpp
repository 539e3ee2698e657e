#include "doe/doe_problem.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "doe/errors.hpp"
#include "doe/lindistflow.hpp"

namespace doe {

using nlohmann::json;

const char* to_string(Method m) {
  switch (m) {
    case Method::B0: return "B0";
    case Method::B1: return "B1";
    case Method::B2: return "B2";
    case Method::B3: return "B3";
    case Method::B4: return "B4";
  }
  return "?";
}

const char* to_string(Direction d) { return d == Direction::Upper ? "upper" : "lower"; }

Method method_from_string(const std::string& s) {
  if (s == "B0" || s == "b0") return Method::B0;
  if (s == "B1" || s == "b1") return Method::B1;
  if (s == "B2" || s == "b2") return Method::B2;
  if (s == "B3" || s == "b3") return Method::B3;
  if (s == "B4" || s == "b4") return Method::B4;
  throw Error("unknown method: " + s);
}

void Weights::check() const {
  if (w_doe < 0 || w_loss < 0 || w_v < 0 || w_ol < 0 || w_rpf < 0) {
    throw Error("weights must be nonnegative");
  }
}

void DoeRequest::check(const Feeder& feeder) const {
  weights.check();
  if (intervals.empty()) throw Error("request has no intervals");
  const std::size_t nb = feeder.buses.size();
  const std::size_t nd = der_list(feeder).size();
  if (limits.i_max_a.size() != feeder.lines.size() ||
      limits.p_min_kw.size() != feeder.lines.size()) {
    throw DimensionMismatch("request limits do not match feeder lines");
  }
  for (const IntervalData& iv : intervals) {
    if (iv.load_p_kw.size() != nb || iv.load_q_kvar.size() != nb) {
      throw DimensionMismatch("interval loads do not match bus count");
    }
    if (iv.der_p_max_kw.size() != nd || iv.der_p_min_kw.size() != nd ||
        iv.der_q_kvar.size() != nd) {
      throw DimensionMismatch("interval DER forecasts do not match DER count");
    }
    for (std::size_t d = 0; d < nd; ++d) {
      if (iv.der_p_min_kw[d] > iv.der_p_max_kw[d]) {
        throw Error("interval DER forecast has p_min > p_max");
      }
    }
  }
}

const ReluNetwork& SurrogateBundle::net(HeadKind k) const {
  switch (k) {
    case HeadKind::Loss: return loss_net;
    case HeadKind::Voltage: return v_net;
    case HeadKind::Overload: return ol_net;
    case HeadKind::ReverseFlow: return rpf_net;
  }
  throw Error("unreachable head kind");
}

void SurrogateBundle::check_ready() const {
  for (HeadKind k : {HeadKind::Loss, HeadKind::Voltage, HeadKind::Overload,
                     HeadKind::ReverseFlow}) {
    const ReluNetwork& n = net(k);
    n.check_valid();
    if (!n.norm.folded) {
      throw BuildError(std::string("UnfoldedModel: ") + to_string(k) +
                       " head must be folded to physical units");
    }
    if (n.kind == NetKind::Icnn && !n.z_weights_nonnegative()) {
      throw BuildError("NegativeZWeight: ICNN feedforward weights must be nonnegative");
    }
  }
}

namespace {

constexpr HeadKind kHeads[4] = {HeadKind::Loss, HeadKind::Voltage, HeadKind::Overload,
                                HeadKind::ReverseFlow};

double head_weight(const Weights& w, HeadKind k) {
  switch (k) {
    case HeadKind::Loss: return w.w_loss;
    case HeadKind::Voltage: return w.w_v;
    case HeadKind::Overload: return w.w_ol;
    case HeadKind::ReverseFlow: return w.w_rpf;
  }
  return 0.0;
}

// Envelope and net-load variables shared by the surrogate builds: the DER
// variable per unit, x = [p; q] with p coupled to the DER variable at its
// bus and everything else pinned by the interval data.
void add_doe_core(DoeInstance& inst, const Feeder& feeder, const DoeRequest& req, int t) {
  const IntervalData& iv = req.intervals[t];
  const auto ders = der_list(feeder);
  LpProblem& lp = inst.lp;

  for (std::size_t d = 0; d < ders.size(); ++d) {
    int v = lp.add_variable("p_der_" + std::to_string(feeder.buses[ders[d].first].id),
                            iv.der_p_min_kw[d], iv.der_p_max_kw[d]);
    inst.der_vars.push_back(v);
    if (req.direction == Direction::Upper) {
      // |p_max - p| = p_max - p under the envelope bounds.
      lp.set_cost(v, -req.weights.w_doe);
      inst.objective_offset += req.weights.w_doe * iv.der_p_max_kw[d];
    } else {
      lp.set_cost(v, req.weights.w_doe);
      inst.objective_offset -= req.weights.w_doe * iv.der_p_min_kw[d];
    }
  }

  const int nb = feeder.bus_count();
  std::vector<int> der_at_bus(nb, -1);
  for (std::size_t d = 0; d < ders.size(); ++d) der_at_bus[ders[d].first] = static_cast<int>(d);

  for (int i = 0; i < nb; ++i) {
    double p0 = iv.load_p_kw[i];
    int d = der_at_bus[i];
    int xv;
    if (d >= 0) {
      xv = lp.add_variable("x_p_" + std::to_string(feeder.buses[i].id),
                           p0 - iv.der_p_max_kw[d], p0 - iv.der_p_min_kw[d]);
      lp.add_row({{{xv, 1.0}, {inst.der_vars[d], 1.0}}, Rel::EQ, p0, ""});
    } else {
      xv = lp.add_variable("x_p_" + std::to_string(feeder.buses[i].id), p0, p0);
    }
    inst.x_vars.push_back(xv);
  }
  for (int i = 0; i < nb; ++i) {
    double q = iv.load_q_kvar[i];
    int d = der_at_bus[i];
    if (d >= 0) q -= iv.der_q_kvar[d];
    inst.x_vars.push_back(
        lp.add_variable("x_q_" + std::to_string(feeder.buses[i].id), q, q));
  }
}

// Relaxed layer inequalities of one head, returning the delta variable.
int add_head_lp(DoeInstance& inst, const ReluNetwork& net, const ViolationHead& head,
                double weight, const std::string& tag) {
  LpProblem& lp = inst.lp;
  std::vector<std::vector<int>> z_vars(net.layers.size() - 1);
  for (std::size_t k = 0; k + 1 < net.layers.size(); ++k) {
    const int width = static_cast<int>(net.layers[k].b.size());
    for (int i = 0; i < width; ++i) {
      z_vars[k].push_back(lp.add_variable(
          tag + "_z" + std::to_string(k) + "_" + std::to_string(i), 0.0, kInf));
    }
    const Layer& L = net.layers[k];
    for (int i = 0; i < width; ++i) {
      LpRow row;
      row.terms.push_back({z_vars[k][i], 1.0});
      if (k > 0) {
        for (std::size_t j = 0; j < z_vars[k - 1].size(); ++j) {
          double w = L.w_z(i, j);
          if (w != 0.0) row.terms.push_back({z_vars[k - 1][j], -w});
        }
      }
      if (L.w_x.size()) {
        for (int j = 0; j < net.input_dim(); ++j) {
          double w = L.w_x(i, j);
          if (w != 0.0) row.terms.push_back({inst.x_vars[j], -w});
        }
      }
      row.rel = Rel::GE;
      row.rhs = L.b[i];
      lp.add_row(std::move(row));
    }
  }

  const Layer& out = net.layers.back();
  const auto& zk = z_vars.back();
  std::vector<int> nu_vars;
  for (int s = 0; s < head.stacked_dim(); ++s) {
    int nu = lp.add_variable(tag + "_nu_" + std::to_string(s), 0.0, kInf);
    nu_vars.push_back(nu);
    int r = head.row[s];
    double sg = head.sign[s];
    LpRow row;  // nu - sg*(w_z z + w_x x) >= sg*b + eps
    row.terms.push_back({nu, 1.0});
    for (std::size_t j = 0; j < zk.size(); ++j) {
      double w = out.w_z(r, j);
      if (w != 0.0) row.terms.push_back({zk[j], -sg * w});
    }
    if (out.w_x.size()) {
      for (int j = 0; j < net.input_dim(); ++j) {
        double w = out.w_x(r, j);
        if (w != 0.0) row.terms.push_back({inst.x_vars[j], -sg * w});
      }
    }
    row.rel = Rel::GE;
    row.rhs = sg * out.b[r] + head.eps[s];
    lp.add_row(std::move(row));
  }

  int delta = lp.add_variable(tag + "_delta", 0.0, kInf, weight);
  LpRow drow;  // delta - sum nu >= 0
  drow.terms.push_back({delta, 1.0});
  for (int nu : nu_vars) drow.terms.push_back({nu, -1.0});
  drow.rel = Rel::GE;
  drow.rhs = 0.0;
  inst.lp.add_row(std::move(drow));
  return delta;
}

// Everything needed to replay one encoded head's ReLU phases at a point.
struct HintPiece {
  ReluNetwork net;
  ViolationHead head;
  std::vector<std::vector<int>> beta_vars;  // hidden stages
  std::vector<int> nu_beta;                 // stacked outputs, -1 when stable
};

// Exact big-M counterpart of add_head_lp.
int add_head_milp(DoeInstance& inst, const Feeder& feeder, const ReluNetwork& net,
                  const ViolationHead& head, double weight, const DoeRequest& req, int t,
                  const std::string& tag, HintPiece& piece) {
  LpProblem& lp = inst.lp;
  const IntervalData& iv = req.intervals[t];
  const auto ders = der_list(feeder);
  const int nb = feeder.bus_count();

  // Input box from the envelope bounds and the pinned loads.
  Eigen::VectorXd x_lo(2 * nb), x_hi(2 * nb);
  std::vector<int> der_at_bus(nb, -1);
  for (std::size_t d = 0; d < ders.size(); ++d) der_at_bus[ders[d].first] = static_cast<int>(d);
  for (int i = 0; i < nb; ++i) {
    double p0 = iv.load_p_kw[i];
    if (der_at_bus[i] >= 0) {
      x_lo[i] = p0 - iv.der_p_max_kw[der_at_bus[i]];
      x_hi[i] = p0 - iv.der_p_min_kw[der_at_bus[i]];
    } else {
      x_lo[i] = x_hi[i] = p0;
    }
    double q = iv.load_q_kvar[i];
    if (der_at_bus[i] >= 0) q -= iv.der_q_kvar[der_at_bus[i]];
    x_lo[nb + i] = x_hi[nb + i] = q;
  }

  ActivationBounds bounds = bound_propagate(net, x_lo, x_hi);
  EncodedNetwork enc =
      encode_network_bigM(lp, inst.binaries, net, inst.x_vars, bounds, tag);
  const std::vector<int>& zk = enc.z_vars.back();

  const Layer& out = net.layers.back();
  std::vector<int> nu_vars;
  std::vector<int> nu_beta;
  for (int s = 0; s < head.stacked_dim(); ++s) {
    int r = head.row[s];
    double sg = head.sign[s];
    std::vector<std::pair<int, double>> terms;
    for (std::size_t j = 0; j < zk.size(); ++j) {
      double w = out.w_z(r, j);
      if (w != 0.0) terms.push_back({zk[j], sg * w});
    }
    if (out.w_x.size()) {
      for (int j = 0; j < net.input_dim(); ++j) {
        double w = out.w_x(r, j);
        if (w != 0.0) terms.push_back({inst.x_vars[j], sg * w});
      }
    }
    double g_const = sg * out.b[r] + head.eps[s];
    double g_lo = (sg > 0 ? bounds.out_lo[r] : -bounds.out_hi[r]) + head.eps[s];
    double g_hi = (sg > 0 ? bounds.out_hi[r] : -bounds.out_lo[r]) + head.eps[s];
    std::size_t before = inst.binaries.size();
    nu_vars.push_back(encode_relu_bigM(lp, inst.binaries, terms, g_const, g_lo, g_hi,
                                       tag + "_nu_" + std::to_string(s)));
    nu_beta.push_back(inst.binaries.size() > before ? inst.binaries.back() : -1);
  }

  int delta = lp.add_variable(tag + "_delta", 0.0, kInf, weight);
  LpRow drow;  // delta = sum nu, exactly
  drow.terms.push_back({delta, 1.0});
  for (int nu : nu_vars) drow.terms.push_back({nu, -1.0});
  drow.rel = Rel::EQ;
  drow.rhs = 0.0;
  lp.add_row(std::move(drow));

  piece.net = net;
  piece.head = head;
  piece.beta_vars = std::move(enc.beta_vars);
  piece.nu_beta = std::move(nu_beta);
  return delta;
}

}  // namespace

DoeInstance build_icnn_lp(const Feeder& feeder, const SurrogateBundle& models,
                          const DoeRequest& request, int t) {
  request.check(feeder);
  models.check_ready();
  DoeInstance inst;
  add_doe_core(inst, feeder, request, t);
  for (int h = 0; h < 4; ++h) {
    const ReluNetwork& net = models.net(kHeads[h]);
    ViolationHead head = make_head(feeder, request.limits, models.plan, net);
    inst.delta_var[h] = add_head_lp(inst, net, head, head_weight(request.weights, kHeads[h]),
                                    to_string(kHeads[h]));
  }
  return inst;
}

DoeInstance build_icnn_milp(const Feeder& feeder, const SurrogateBundle& models,
                            const DoeRequest& request, int t) {
  request.check(feeder);
  models.check_ready();
  DoeInstance inst;
  add_doe_core(inst, feeder, request, t);
  auto pieces = std::make_shared<std::vector<HintPiece>>(4);
  for (int h = 0; h < 4; ++h) {
    const ReluNetwork& net = models.net(kHeads[h]);
    ViolationHead head = make_head(feeder, request.limits, models.plan, net);
    inst.delta_var[h] = add_head_milp(inst, feeder, net, head,
                                      head_weight(request.weights, kHeads[h]), request, t,
                                      to_string(kHeads[h]), (*pieces)[h]);
  }

  // Phase completion: read the net loads off a relaxation point, replay each
  // head's forward pass and emit the implied binary assignment.
  std::vector<int> x_vars = inst.x_vars;
  inst.phase_hint = [pieces, x_vars](const std::vector<double>& sol) {
    std::vector<std::pair<int, int>> out;
    Eigen::VectorXd x(static_cast<Eigen::Index>(x_vars.size()));
    for (std::size_t i = 0; i < x_vars.size(); ++i) x[i] = sol[x_vars[i]];
    for (const HintPiece& pc : *pieces) {
      Eigen::VectorXd z;
      for (std::size_t k = 0; k + 1 < pc.net.layers.size(); ++k) {
        const Layer& L = pc.net.layers[k];
        Eigen::VectorXd a = L.b;
        if (k == 0) {
          a += L.w_x * x;
        } else {
          a += L.w_z * z;
          if (L.w_x.size()) a += L.w_x * x;
        }
        for (Eigen::Index i = 0; i < a.size(); ++i) {
          if (pc.beta_vars[k][i] >= 0) {
            out.push_back({pc.beta_vars[k][i], a[i] > 0.0 ? 1 : 0});
          }
        }
        z = a.cwiseMax(0.0);
      }
      const Layer& last = pc.net.layers.back();
      Eigen::VectorXd y = last.w_z * z + last.b;
      if (last.w_x.size()) y += last.w_x * x;
      Eigen::VectorXd g = pc.head.stack(y);
      for (int s = 0; s < pc.head.stacked_dim(); ++s) {
        if (pc.nu_beta[s] >= 0) out.push_back({pc.nu_beta[s], g[s] > 0.0 ? 1 : 0});
      }
    }
    return out;
  };
  return inst;
}

namespace {

DoeResult extract_result(const DoeInstance& inst, const std::vector<double>& x,
                         const Feeder& feeder, const DoeRequest& req, int t, Method method) {
  const IntervalData& iv = req.intervals[t];
  DoeResult res;
  res.interval = t;
  res.method = method;
  res.direction = req.direction;
  for (std::size_t d = 0; d < inst.der_vars.size(); ++d) {
    double p = x[inst.der_vars[d]];
    // Constraint (envelope within forecast bounds) makes clipping a no-op;
    // clamp anyway to strip solver round-off.
    p = std::clamp(p, iv.der_p_min_kw[d], iv.der_p_max_kw[d]);
    res.envelope_kw.push_back(p);
  }
  double j1 = 0.0;
  for (std::size_t d = 0; d < res.envelope_kw.size(); ++d) {
    j1 += req.direction == Direction::Upper ? iv.der_p_max_kw[d] - res.envelope_kw[d]
                                            : res.envelope_kw[d] - iv.der_p_min_kw[d];
  }
  res.j1 = req.weights.w_doe * j1;
  res.loss_pred_kw = x[inst.delta_var[0]];
  res.delta_v_pred = x[inst.delta_var[1]];
  res.delta_ol_pred = x[inst.delta_var[2]];
  res.delta_rpf_pred = x[inst.delta_var[3]];
  res.j2 = req.weights.w_loss * res.loss_pred_kw;
  res.j3 = req.weights.w_v * res.delta_v_pred + req.weights.w_ol * res.delta_ol_pred +
           req.weights.w_rpf * res.delta_rpf_pred;
  (void)feeder;
  return res;
}

}  // namespace

DoeResult evaluate_b0(const Feeder& feeder, const DoeRequest& request, int t) {
  request.check(feeder);
  const IntervalData& iv = request.intervals[t];
  DoeResult res;
  res.interval = t;
  res.method = Method::B0;
  res.direction = request.direction;
  res.envelope_kw = request.direction == Direction::Upper ? iv.der_p_max_kw : iv.der_p_min_kw;
  res.j1 = 0.0;
  res = verify_with_oracle(feeder, std::move(res), request, t);
  // No surrogate: report the oracle quantities on both sides.
  res.loss_pred_kw = res.loss_true_kw;
  res.delta_v_pred = res.delta_v_true;
  res.delta_ol_pred = res.delta_ol_true;
  res.delta_rpf_pred = res.delta_rpf_true;
  res.j2 = request.weights.w_loss * res.loss_true_kw;
  res.j3 = request.weights.w_v * res.delta_v_true + request.weights.w_ol * res.delta_ol_true +
           request.weights.w_rpf * res.delta_rpf_true;
  return res;
}

DoeResult verify_with_oracle(const Feeder& feeder, DoeResult result,
                             const DoeRequest& request, int t) {
  const IntervalData& iv = request.intervals[t];
  const auto ders = der_list(feeder);
  InjectionVector inj;
  inj.p_kw = iv.load_p_kw;
  inj.q_kvar = iv.load_q_kvar;
  for (std::size_t d = 0; d < ders.size(); ++d) {
    inj.p_kw[ders[d].first] -= result.envelope_kw[d];
    inj.q_kvar[ders[d].first] -= iv.der_q_kvar[d];
  }
  PowerFlowSolution sol = solve_distflow(feeder, inj, 1e-8, 200);
  ViolationTerms v = violation_terms(sol, request.limits);
  result.delta_v_true = v.dv_pu;
  result.delta_ol_true = v.dol_a;
  result.delta_rpf_true = v.drpf_kw;
  result.loss_true_kw = sol.loss_kw;
  result.verified = true;
  return result;
}

DoeResult solve_doe_interval(const Feeder& feeder, const DoeRequest& request,
                             Method method, int t, const SolveOptions& opt) {
  auto t0 = std::chrono::steady_clock::now();
  DoeResult res;
  switch (method) {
    case Method::B0: {
      res = evaluate_b0(feeder, request, t);
      break;
    }
    case Method::B1: {
      if (!opt.icnn) throw BuildError("B1 needs trained ICNN surrogates");
      DoeInstance inst = build_icnn_lp(feeder, *opt.icnn, request, t);
      LpSolution sol = solve_lp(inst.lp, opt.lp);
      if (sol.status != LpStatus::Optimal) {
        throw SolverFailure(std::string("B1 LP: ") + to_string(sol.status));
      }
      res = extract_result(inst, sol.x, feeder, request, t, Method::B1);
      break;
    }
    case Method::B2:
    case Method::B4: {
      const SurrogateBundle* bundle = method == Method::B2 ? opt.icnn : opt.mlp;
      if (!bundle) {
        throw BuildError(std::string(to_string(method)) + " needs trained surrogates");
      }
      DoeInstance inst = build_icnn_milp(feeder, *bundle, request, t);
      MilpProblem mp;
      mp.lp = inst.lp;
      mp.binaries = inst.binaries;
      BnbConfig bnb = opt.bnb;
      bnb.lp = opt.lp;
      bnb.phase_hint = inst.phase_hint;
      MilpSolution sol = solve_milp(mp, bnb);
      if (sol.status != LpStatus::Optimal && sol.status != LpStatus::IterLimit) {
        throw SolverFailure(std::string(to_string(method)) + " MILP: " +
                            to_string(sol.status));
      }
      res = extract_result(inst, sol.x, feeder, request, t, method);
      res.milp_gap = sol.gap;
      res.hit_limit = sol.hit_limit;
      break;
    }
    case Method::B3: {
      DoeInstance inst = build_lindistflow(feeder, request, t, opt.pwl_segments);
      LpSolution sol = solve_lp(inst.lp, opt.lp);
      if (sol.status != LpStatus::Optimal) {
        throw SolverFailure(std::string("B3 LP: ") + to_string(sol.status));
      }
      res = extract_result(inst, sol.x, feeder, request, t, Method::B3);
      break;
    }
  }
  if (opt.verify && method != Method::B0) {
    res = verify_with_oracle(feeder, std::move(res), request, t);
  }
  auto t1 = std::chrono::steady_clock::now();
  res.solve_time_s = std::chrono::duration<double>(t1 - t0).count();
  return res;
}

std::vector<DoeResult> solve_doe(const Feeder& feeder, const DoeRequest& request,
                                 Method method, const SolveOptions& opt) {
  request.check(feeder);
  std::vector<DoeResult> out;
  out.reserve(request.intervals.size());
  for (std::size_t t = 0; t < request.intervals.size(); ++t) {
    try {
      out.push_back(solve_doe_interval(feeder, request, method, static_cast<int>(t), opt));
    } catch (const Error& e) {
      throw Error("interval " + std::to_string(t) + ": " + e.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

json limits_to_json(const Limits& lim) {
  return {{"v_min_pu", lim.v_min_pu},
          {"v_max_pu", lim.v_max_pu},
          {"i_max_a", lim.i_max_a},
          {"p_min_kw", lim.p_min_kw}};
}

Limits limits_from_json(const json& j) {
  Limits lim;
  lim.v_min_pu = j.at("v_min_pu").get<double>();
  lim.v_max_pu = j.at("v_max_pu").get<double>();
  lim.i_max_a = j.at("i_max_a").get<std::vector<double>>();
  lim.p_min_kw = j.at("p_min_kw").get<std::vector<double>>();
  return lim;
}

}  // namespace

std::string request_to_json(const DoeRequest& request, const Feeder& feeder) {
  request.check(feeder);
  json j;
  j["schema_version"] = 1;
  j["direction"] = to_string(request.direction);
  j["weights"] = {{"w_doe", request.weights.w_doe},
                  {"w_loss", request.weights.w_loss},
                  {"w_v", request.weights.w_v},
                  {"w_ol", request.weights.w_ol},
                  {"w_rpf", request.weights.w_rpf}};
  j["limits"] = limits_to_json(request.limits);
  j["intervals"] = json::array();
  for (const IntervalData& iv : request.intervals) {
    j["intervals"].push_back({{"load_p_kw", iv.load_p_kw},
                              {"load_q_kvar", iv.load_q_kvar},
                              {"der_p_max_kw", iv.der_p_max_kw},
                              {"der_p_min_kw", iv.der_p_min_kw},
                              {"der_q_kvar", iv.der_q_kvar}});
  }
  return j.dump(2);
}

DoeRequest request_from_json(const std::string& text, const Feeder& feeder) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw MalformedFile(std::string("request parse error: ") + e.what());
  }
  DoeRequest req;
  try {
    req.direction = j.at("direction").get<std::string>() == "lower" ? Direction::Lower
                                                                    : Direction::Upper;
    const auto& jw = j.at("weights");
    req.weights.w_doe = jw.at("w_doe").get<double>();
    req.weights.w_loss = jw.at("w_loss").get<double>();
    req.weights.w_v = jw.at("w_v").get<double>();
    req.weights.w_ol = jw.at("w_ol").get<double>();
    req.weights.w_rpf = jw.at("w_rpf").get<double>();
    req.limits = limits_from_json(j.at("limits"));
    for (const auto& ji : j.at("intervals")) {
      IntervalData iv;
      iv.load_p_kw = ji.at("load_p_kw").get<std::vector<double>>();
      iv.load_q_kvar = ji.at("load_q_kvar").get<std::vector<double>>();
      iv.der_p_max_kw = ji.at("der_p_max_kw").get<std::vector<double>>();
      iv.der_p_min_kw = ji.at("der_p_min_kw").get<std::vector<double>>();
      iv.der_q_kvar = ji.at("der_q_kvar").get<std::vector<double>>();
      req.intervals.push_back(std::move(iv));
    }
  } catch (const json::exception& e) {
    throw MalformedFile(std::string("request structure error: ") + e.what());
  }
  req.check(feeder);
  return req;
}

std::string results_to_json(const std::vector<DoeResult>& results) {
  json arr = json::array();
  for (const DoeResult& r : results) {
    arr.push_back({{"interval", r.interval},
                   {"method", to_string(r.method)},
                   {"direction", to_string(r.direction)},
                   {"envelope_kw", r.envelope_kw},
                   {"j1", r.j1},
                   {"j2", r.j2},
                   {"j3", r.j3},
                   {"objective", r.objective()},
                   {"delta_v_pred", r.delta_v_pred},
                   {"delta_ol_pred", r.delta_ol_pred},
                   {"delta_rpf_pred", r.delta_rpf_pred},
                   {"loss_pred_kw", r.loss_pred_kw},
                   {"verified", r.verified},
                   {"delta_v_true", r.delta_v_true},
                   {"delta_ol_true", r.delta_ol_true},
                   {"delta_rpf_true", r.delta_rpf_true},
                   {"loss_true_kw", r.loss_true_kw},
                   {"solve_time_s", r.solve_time_s},
                   {"milp_gap", r.milp_gap},
                   {"hit_limit", r.hit_limit}});
  }
  return arr.dump(2);
}

std::vector<DoeResult> results_from_json(const std::string& text) {
  json arr;
  try {
    arr = json::parse(text);
  } catch (const json::exception& e) {
    throw MalformedFile(std::string("results parse error: ") + e.what());
  }
  std::vector<DoeResult> out;
  try {
    for (const auto& j : arr) {
      DoeResult r;
      r.interval = j.at("interval").get<int>();
      r.method = method_from_string(j.at("method").get<std::string>());
      r.direction = j.at("direction").get<std::string>() == "lower" ? Direction::Lower
                                                                    : Direction::Upper;
      r.envelope_kw = j.at("envelope_kw").get<std::vector<double>>();
      r.j1 = j.at("j1").get<double>();
      r.j2 = j.at("j2").get<double>();
      r.j3 = j.at("j3").get<double>();
      r.delta_v_pred = j.at("delta_v_pred").get<double>();
      r.delta_ol_pred = j.at("delta_ol_pred").get<double>();
      r.delta_rpf_pred = j.at("delta_rpf_pred").get<double>();
      r.loss_pred_kw = j.at("loss_pred_kw").get<double>();
      r.verified = j.at("verified").get<bool>();
      r.delta_v_true = j.at("delta_v_true").get<double>();
      r.delta_ol_true = j.at("delta_ol_true").get<double>();
      r.delta_rpf_true = j.at("delta_rpf_true").get<double>();
      r.loss_true_kw = j.at("loss_true_kw").get<double>();
      r.solve_time_s = j.at("solve_time_s").get<double>();
      r.milp_gap = j.value("milp_gap", 0.0);
      r.hit_limit = j.value("hit_limit", false);
      out.push_back(std::move(r));
    }
  } catch (const json::exception& e) {
    throw MalformedFile(std::string("results structure error: ") + e.what());
  }
  return out;
}

void save_bundle(const SurrogateBundle& bundle, const std::string& dir,
                 const std::string& prefix) {
  std::filesystem::create_directories(dir);
  save_network(bundle.loss_net, dir + "/" + prefix + "_loss.json");
  save_network(bundle.v_net, dir + "/" + prefix + "_v.json");
  save_network(bundle.ol_net, dir + "/" + prefix + "_ol.json");
  save_network(bundle.rpf_net, dir + "/" + prefix + "_rpf.json");
  json plan;
  plan["v_buses"] = bundle.plan.v_buses;
  plan["i_lines"] = bundle.plan.i_lines;
  plan["rpf_lines"] = bundle.plan.rpf_lines;
  plan["fingerprint"] = bundle.plan.fingerprint();
  std::ofstream out(dir + "/" + prefix + "_plan.json", std::ios::binary);
  if (!out) throw Error("cannot write plan file in " + dir);
  out << plan.dump(2) << "\n";
}

SurrogateBundle load_bundle(const std::string& dir, const std::string& prefix) {
  SurrogateBundle b;
  b.loss_net = load_network(dir + "/" + prefix + "_loss.json");
  b.v_net = load_network(dir + "/" + prefix + "_v.json");
  b.ol_net = load_network(dir + "/" + prefix + "_ol.json");
  b.rpf_net = load_network(dir + "/" + prefix + "_rpf.json");
  std::ifstream in(dir + "/" + prefix + "_plan.json", std::ios::binary);
  if (!in) throw MalformedFile("missing plan file in " + dir);
  json plan;
  try {
    in >> plan;
    b.plan.v_buses = plan.at("v_buses").get<std::vector<int>>();
    b.plan.i_lines = plan.at("i_lines").get<std::vector<int>>();
    b.plan.rpf_lines = plan.at("rpf_lines").get<std::vector<int>>();
  } catch (const json::exception& e) {
    throw MalformedFile(std::string("plan file error: ") + e.what());
  }
  for (const ReluNetwork* net : {&b.v_net, &b.ol_net, &b.rpf_net}) {
    if (net->retrench_fingerprint != 0 &&
        net->retrench_fingerprint != b.plan.fingerprint()) {
      throw FingerprintMismatch("model was trained against a different retrench plan");
    }
  }
  return b;
}

void write_results_csv(const std::vector<DoeResult>& results, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << "interval,method,direction,der,envelope_kw,j1,j2,j3,j,"
         "delta_v_pred,delta_ol_pred,delta_rpf_pred,loss_pred_kw,"
         "delta_v_true,delta_ol_true,delta_rpf_true,loss_true_kw,time_ms,gap,hit_limit\n";
  for (const DoeResult& r : results) {
    for (std::size_t d = 0; d < r.envelope_kw.size(); ++d) {
      out << r.interval << ',' << to_string(r.method) << ',' << to_string(r.direction)
          << ',' << d << ',' << r.envelope_kw[d] << ',' << r.j1 << ',' << r.j2 << ','
          << r.j3 << ',' << r.objective() << ',' << r.delta_v_pred << ','
          << r.delta_ol_pred << ',' << r.delta_rpf_pred << ',' << r.loss_pred_kw << ','
          << r.delta_v_true << ',' << r.delta_ol_true << ',' << r.delta_rpf_true << ','
          << r.loss_true_kw << ',' << r.solve_time_s * 1e3 << ',' << r.milp_gap << ','
          << (r.hit_limit ? 1 : 0) << "\n";
    }
  }
}

}  // namespace doe
