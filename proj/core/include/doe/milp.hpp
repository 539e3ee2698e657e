#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "doe/icnn.hpp"
#include "doe/lp.hpp"

namespace doe {

// LP plus integrality marks on the ReLU indicator variables.
struct MilpProblem {
  LpProblem lp;
  std::vector<int> binaries;
};

struct BnbConfig {
  enum class NodeSelection : char { BestBound = 'b', DepthFirst = 'd' };
  NodeSelection node_selection = NodeSelection::BestBound;
  double abs_gap = 1e-9;
  double rel_gap = 1e-6;
  double time_limit_s = 0.0;  // 0 = unlimited
  long node_limit = 0;        // 0 = unlimited
  LpOptions lp;
  // Completion oracle: maps a relaxation point to a fully consistent binary
  // assignment (e.g. ReLU phases from a forward pass at the relaxed inputs).
  // Used as a primal heuristic; the search stays exact without it.
  std::function<std::vector<std::pair<int, int>>(const std::vector<double>&)> phase_hint;
};

struct MilpSolution {
  LpStatus status = LpStatus::IterLimit;  // Optimal when gap target met
  std::vector<double> x;
  double objective = 0.0;   // incumbent
  double bound = 0.0;       // best lower bound (minimization)
  double gap = 0.0;         // (incumbent - bound) / max(1, |incumbent|)
  long nodes = 0;
  bool hit_limit = false;   // node or time limit stopped the search
  double wall_time_s = 0.0;
};

// Per-neuron preactivation interval per hidden stage, from interval
// arithmetic through the network over the input box. Sound: contains the
// true preactivation for every x in [x_lo, x_hi].
struct ActivationBounds {
  std::vector<Eigen::VectorXd> lo;  // one vector per hidden stage
  std::vector<Eigen::VectorXd> hi;
  Eigen::VectorXd out_lo, out_hi;   // output stage (no activation)
};

ActivationBounds bound_propagate(const ReluNetwork& net, const Eigen::VectorXd& x_lo,
                                 const Eigen::VectorXd& x_hi);

// Exact big-M encoding of z = max(a, 0) given a's bounds [lo, hi]:
//   z >= a, z >= 0, z <= a - lo*(1-beta), z <= hi*beta, beta binary.
// Neurons with lo >= 0 collapse to z = a and hi <= 0 to z = 0 (no binary).
// `a_terms` is the affine preactivation minus its constant, `a_const` the
// constant. Returns the z variable index; appends any binary to `binaries`.
int encode_relu_bigM(LpProblem& lp, std::vector<int>& binaries,
                     const std::vector<std::pair<int, double>>& a_terms, double a_const,
                     double lo, double hi, const std::string& name);

// Exact ReLU constraints for the hidden stages of `net` over the given input
// variables, with the binary of each unstable neuron (-1 where a stable
// neuron needed none). Works for ICNN and MLP alike.
struct EncodedNetwork {
  std::vector<std::vector<int>> z_vars;     // per hidden stage
  std::vector<std::vector<int>> beta_vars;  // per hidden stage, -1 if stable
};
EncodedNetwork encode_network_bigM(LpProblem& lp, std::vector<int>& binaries,
                                   const ReluNetwork& net,
                                   const std::vector<int>& input_vars,
                                   const ActivationBounds& bounds,
                                   const std::string& tag);

// Branch-and-bound over lp-engine relaxations: most-fractional branching,
// best-bound or depth-first node selection. The incumbent is re-solved with
// binaries fixed before acceptance, so reported solutions are exactly
// feasible. Throws NoIncumbentFound if the search ends without one.
MilpSolution solve_milp(const MilpProblem& p, const BnbConfig& cfg = {});

}  // namespace doe
