#include "doe/milp.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <queue>

#include "doe/errors.hpp"

namespace doe {

ActivationBounds bound_propagate(const ReluNetwork& net, const Eigen::VectorXd& x_lo,
                                 const Eigen::VectorXd& x_hi) {
  net.check_valid();
  if (x_lo.size() != net.input_dim() || x_hi.size() != net.input_dim()) {
    throw DimensionMismatch("input box does not match network input");
  }
  for (Eigen::Index i = 0; i < x_lo.size(); ++i) {
    if (!std::isfinite(x_lo[i]) || !std::isfinite(x_hi[i])) {
      throw UnboundedInput("bound propagation needs a finite input box");
    }
    if (x_lo[i] > x_hi[i]) throw Error("input box has lo > hi");
  }

  auto affine_interval = [](const Eigen::MatrixXd& w, const Eigen::VectorXd& lo,
                            const Eigen::VectorXd& hi, Eigen::VectorXd& out_lo,
                            Eigen::VectorXd& out_hi) {
    Eigen::MatrixXd pos = w.cwiseMax(0.0);
    Eigen::MatrixXd neg = w.cwiseMin(0.0);
    out_lo += pos * lo + neg * hi;
    out_hi += pos * hi + neg * lo;
  };

  ActivationBounds bounds;
  Eigen::VectorXd z_lo, z_hi;
  for (std::size_t k = 0; k + 1 < net.layers.size(); ++k) {
    const Layer& L = net.layers[k];
    Eigen::VectorXd a_lo = L.b;
    Eigen::VectorXd a_hi = L.b;
    if (k > 0) affine_interval(L.w_z, z_lo, z_hi, a_lo, a_hi);
    if (L.w_x.size()) affine_interval(L.w_x, x_lo, x_hi, a_lo, a_hi);
    bounds.lo.push_back(a_lo);
    bounds.hi.push_back(a_hi);
    z_lo = a_lo.cwiseMax(0.0);
    z_hi = a_hi.cwiseMax(0.0);
  }
  const Layer& out = net.layers.back();
  bounds.out_lo = out.b;
  bounds.out_hi = out.b;
  affine_interval(out.w_z, z_lo, z_hi, bounds.out_lo, bounds.out_hi);
  if (out.w_x.size()) affine_interval(out.w_x, x_lo, x_hi, bounds.out_lo, bounds.out_hi);
  return bounds;
}

int encode_relu_bigM(LpProblem& lp, std::vector<int>& binaries,
                     const std::vector<std::pair<int, double>>& a_terms, double a_const,
                     double lo, double hi, const std::string& name) {
  if (!std::isfinite(lo) || !std::isfinite(hi)) {
    throw Error("IntervalMissing: big-M encoding needs finite preactivation bounds");
  }
  if (hi <= 0.0) {
    // Always inactive: z fixed at zero.
    return lp.add_variable(name, 0.0, 0.0);
  }
  int z = lp.add_variable(name, 0.0, std::max(hi, 0.0));
  if (lo >= 0.0) {
    // Always active: z = a.
    LpRow row;
    row.terms.push_back({z, 1.0});
    for (auto [v, c] : a_terms) row.terms.push_back({v, -c});
    row.rel = Rel::EQ;
    row.rhs = a_const;
    lp.add_row(std::move(row));
    return z;
  }

  int beta = lp.add_variable(name + "_b", 0.0, 1.0);
  binaries.push_back(beta);
  {  // z >= a
    LpRow row;
    row.terms.push_back({z, 1.0});
    for (auto [v, c] : a_terms) row.terms.push_back({v, -c});
    row.rel = Rel::GE;
    row.rhs = a_const;
    lp.add_row(std::move(row));
  }
  {  // z <= a - lo*(1 - beta)  <=>  z - a - lo*beta <= -lo
    LpRow row;
    row.terms.push_back({z, 1.0});
    for (auto [v, c] : a_terms) row.terms.push_back({v, -c});
    row.terms.push_back({beta, -lo});
    row.rel = Rel::LE;
    row.rhs = a_const - lo;
    lp.add_row(std::move(row));
  }
  {  // z <= hi*beta
    LpRow row;
    row.terms.push_back({z, 1.0});
    row.terms.push_back({beta, -hi});
    row.rel = Rel::LE;
    row.rhs = 0.0;
    lp.add_row(std::move(row));
  }
  return z;
}

EncodedNetwork encode_network_bigM(LpProblem& lp, std::vector<int>& binaries,
                                   const ReluNetwork& net,
                                   const std::vector<int>& input_vars,
                                   const ActivationBounds& bounds,
                                   const std::string& tag) {
  if (static_cast<int>(input_vars.size()) != net.input_dim()) {
    throw DimensionMismatch("input variable list does not match network");
  }
  EncodedNetwork enc;
  std::vector<int> prev;
  for (std::size_t k = 0; k + 1 < net.layers.size(); ++k) {
    const Layer& L = net.layers[k];
    const int width = static_cast<int>(L.b.size());
    std::vector<int> z_vars(width);
    std::vector<int> b_vars(width, -1);
    for (int i = 0; i < width; ++i) {
      std::vector<std::pair<int, double>> terms;
      if (k > 0) {
        for (std::size_t j = 0; j < prev.size(); ++j) {
          double w = L.w_z(i, j);
          if (w != 0.0) terms.push_back({prev[j], w});
        }
      }
      if (L.w_x.size()) {
        for (int j = 0; j < net.input_dim(); ++j) {
          double w = L.w_x(i, j);
          if (w != 0.0) terms.push_back({input_vars[j], w});
        }
      }
      std::size_t before = binaries.size();
      z_vars[i] = encode_relu_bigM(lp, binaries, terms, L.b[i], bounds.lo[k][i],
                                   bounds.hi[k][i],
                                   tag + "_z" + std::to_string(k) + "_" + std::to_string(i));
      if (binaries.size() > before) b_vars[i] = binaries.back();
    }
    prev = z_vars;
    enc.z_vars.push_back(std::move(z_vars));
    enc.beta_vars.push_back(std::move(b_vars));
  }
  return enc;
}

namespace {

struct Node {
  double bound = 0.0;
  int depth = 0;
  long id = 0;
  std::vector<std::pair<int, int>> fixings;  // (binary var, 0/1)
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.bound != b.bound) return a.bound > b.bound;  // min-heap on bound
    if (a.depth != b.depth) return a.depth < b.depth;  // deeper first on ties
    return a.id > b.id;
  }
};

}  // namespace

MilpSolution solve_milp(const MilpProblem& p, const BnbConfig& cfg) {
  auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };
  const double int_tol = 1e-6;

  MilpSolution best;
  best.objective = kInf;
  bool have_incumbent = false;

  auto solve_with = [&](const std::vector<std::pair<int, int>>& fixings,
                        bool integral_round, const std::vector<double>& relax_x) {
    LpProblem lp = p.lp;
    for (auto [v, val] : fixings) lp.set_bounds(v, val, val);
    if (integral_round) {
      for (int b : p.binaries) {
        bool already = false;
        for (auto [v, val] : fixings) {
          if (v == b) { already = true; break; }
        }
        if (!already) {
          int val = relax_x[b] >= 0.5 ? 1 : 0;
          lp.set_bounds(b, val, val);
        }
      }
    }
    return solve_lp(lp, cfg.lp);
  };

  auto try_incumbent = [&](const std::vector<std::pair<int, int>>& fixings,
                           const std::vector<double>& relax_x) {
    LpSolution fixed = solve_with(fixings, true, relax_x);
    if (fixed.status == LpStatus::Optimal && fixed.objective < best.objective - 1e-12) {
      best.objective = fixed.objective;
      best.x = fixed.x;
      have_incumbent = true;
    }
  };

  // Primal heuristic. With a completion oracle: one consistent assignment
  // from the relaxation point, one LP solve, done. Without: LP diving that
  // rounds the most fractional binary per step, flipping once on
  // infeasibility.
  auto dive = [&](std::vector<std::pair<int, int>> fixings, LpSolution relax) {
    if (cfg.phase_hint) {
      std::vector<std::pair<int, int>> merged = cfg.phase_hint(relax.x);
      for (auto [v, val] : fixings) {
        bool found = false;
        for (auto& [mv, mval] : merged) {
          if (mv == v) {
            mval = val;  // node decisions win over the completion
            found = true;
            break;
          }
        }
        if (!found) merged.push_back({v, val});
      }
      LpSolution fixed = solve_with(merged, false, {});
      if (fixed.status == LpStatus::Optimal && fixed.objective < best.objective - 1e-12) {
        best.objective = fixed.objective;
        best.x = fixed.x;
        have_incumbent = true;
      }
      return;
    }
    for (std::size_t step = 0; step < p.binaries.size(); ++step) {
      int pick = -1;
      double worst = 1e-6;
      for (int b : p.binaries) {
        double frac = std::min(relax.x[b], 1.0 - relax.x[b]);
        if (frac > worst) {
          worst = frac;
          pick = b;
        }
      }
      if (pick < 0) {
        try_incumbent(fixings, relax.x);
        return;
      }
      int val = relax.x[pick] >= 0.5 ? 1 : 0;
      fixings.push_back({pick, val});
      LpSolution next = solve_with(fixings, false, {});
      if (next.status != LpStatus::Optimal) {
        fixings.back().second = 1 - val;
        next = solve_with(fixings, false, {});
        if (next.status != LpStatus::Optimal) return;  // dead end, give up
      }
      relax = std::move(next);
      if (have_incumbent && relax.objective >= best.objective - 1e-12) return;
    }
  };

  std::priority_queue<Node, std::vector<Node>, NodeOrder> heap;
  std::vector<Node> stack;  // depth-first mode
  long next_id = 0;
  const bool best_bound_mode = cfg.node_selection == BnbConfig::NodeSelection::BestBound;

  auto push = [&](Node n) {
    if (best_bound_mode) heap.push(std::move(n));
    else stack.push_back(std::move(n));
  };
  auto open_empty = [&] { return best_bound_mode ? heap.empty() : stack.empty(); };
  auto open_min_bound = [&] {
    if (best_bound_mode) return heap.empty() ? kInf : heap.top().bound;
    double lo = kInf;
    for (const Node& n : stack) lo = std::min(lo, n.bound);
    return lo;
  };

  // Root relaxation.
  {
    LpSolution root = solve_lp(p.lp, cfg.lp);
    if (root.status == LpStatus::Infeasible || root.status == LpStatus::Unbounded) {
      MilpSolution s;
      s.status = root.status;
      s.wall_time_s = elapsed();
      return s;
    }
    if (root.status != LpStatus::Optimal) {
      throw SolverFailure("root relaxation did not solve");
    }
    Node n;
    n.bound = root.objective;
    n.id = next_id++;
    push(std::move(n));
  }

  // In best-bound mode the popped bounds are nondecreasing, so the last
  // popped estimate is a valid global lower bound.
  double proven_lb = -kInf;
  long nodes = 0;
  bool hit_limit = false;

  auto gap_of = [&](double bound) {
    return (best.objective - bound) / std::max(1.0, std::abs(best.objective));
  };

  while (!open_empty()) {
    if (cfg.node_limit > 0 && nodes >= cfg.node_limit) { hit_limit = true; break; }
    if (cfg.time_limit_s > 0.0 && elapsed() >= cfg.time_limit_s) { hit_limit = true; break; }

    Node node;
    if (best_bound_mode) {
      node = heap.top();
      heap.pop();
      proven_lb = std::max(proven_lb, node.bound);
      if (have_incumbent &&
          (gap_of(proven_lb) <= cfg.rel_gap ||
           best.objective - proven_lb <= cfg.abs_gap)) {
        break;  // remaining nodes all have bound >= proven_lb
      }
    } else {
      node = stack.back();
      stack.pop_back();
    }
    ++nodes;

    // Pruning uses the exact incumbent so exhaustion proves optimality.
    if (have_incumbent && node.bound >= best.objective - 1e-12) continue;

    LpSolution relax = solve_with(node.fixings, false, {});
    if (relax.status == LpStatus::Infeasible) continue;
    if (relax.status != LpStatus::Optimal) {
      throw SolverFailure(std::string("node relaxation did not solve: ") +
                          to_string(relax.status));
    }
    node.bound = relax.objective;
    if (have_incumbent && node.bound >= best.objective - 1e-12) continue;

    // Most fractional branching candidate.
    int branch_var = -1;
    double worst_frac = int_tol;
    for (int b : p.binaries) {
      double v = relax.x[b];
      double frac = std::min(v, 1.0 - v);
      if (frac > worst_frac) {
        worst_frac = frac;
        branch_var = b;
      }
    }

    if (branch_var < 0) {
      // Integral relaxation: fix and resolve for an exactly feasible point.
      try_incumbent(node.fixings, relax.x);
      continue;
    }

    // Diving probe keeps the incumbent fresh; at the root it usually lands
    // the optimum outright when the relaxation is tight.
    if (nodes == 1 || nodes % 16 == 0) dive(node.fixings, relax);

    // Explore the LP-suggested side first: best-bound breaks bound ties by
    // insertion id, depth-first pops the last push.
    int lead = relax.x[branch_var] >= 0.5 ? 1 : 0;
    int first = best_bound_mode ? lead : 1 - lead;
    for (int val : {first, 1 - first}) {
      Node child;
      child.fixings = node.fixings;
      child.fixings.push_back({branch_var, val});
      child.bound = node.bound;
      child.depth = node.depth + 1;
      child.id = next_id++;
      push(std::move(child));
    }
  }

  if (!have_incumbent) {
    double open_bound = std::max(proven_lb, open_empty() ? -kInf : open_min_bound());
    if (hit_limit) {
      throw NoIncumbentFound("branch and bound stopped before finding a feasible point",
                             open_bound);
    }
    MilpSolution s;
    s.status = LpStatus::Infeasible;
    s.nodes = nodes;
    s.wall_time_s = elapsed();
    return s;
  }

  if (open_empty()) {
    best.bound = best.objective;  // tree exhausted with exact pruning
  } else if (hit_limit) {
    double lb = open_min_bound();
    best.bound = std::min(lb == kInf ? best.objective : lb, best.objective);
  } else {
    // Early stop on the gap target: the last popped best-bound estimate.
    best.bound = std::min(proven_lb == -kInf ? best.objective : proven_lb, best.objective);
  }
  best.gap = (best.objective - best.bound) / std::max(1.0, std::abs(best.objective));
  best.nodes = nodes;
  best.hit_limit = hit_limit;
  best.status = (best.gap <= cfg.rel_gap || best.objective - best.bound <= cfg.abs_gap)
                    ? LpStatus::Optimal
                    : LpStatus::IterLimit;
  best.wall_time_s = elapsed();
  return best;
}

}  // namespace doe
