#pragma once

#include <vector>

#include <Eigen/Core>

#include "doe/feeder.hpp"
#include "doe/icnn.hpp"
#include "doe/retrench.hpp"

namespace doe {

// Violation-regularization head: converts a network's physical outputs into
// the scalar penalty 1' max(y + eps, 0). The stacking rule per head kind:
//   voltage:      y = [V; -V],  eps = [-V_max; V_min]
//   overload:     y = I,        eps = -I_max
//   reverse flow: y = -P,       eps = P_min
//   loss:         y = P_loss,   eps = 0
struct ViolationHead {
  HeadKind kind = HeadKind::Loss;
  // Signed selection of model output rows: entry k of the stacked vector is
  // sign[k] * y_model[row[k]] with threshold eps[k].
  std::vector<int> row;
  std::vector<double> sign;
  Eigen::VectorXd eps;

  int stacked_dim() const { return static_cast<int>(row.size()); }

  // Stacked vector y + eps evaluated on raw model outputs.
  Eigen::VectorXd stack(const Eigen::VectorXd& model_output) const;
};

// Builds the head for a model whose output_ids follow `plan`, using the
// limit vectors of `limits` (indexed like feeder.lines).
ViolationHead make_head(const Feeder& feeder, const Limits& limits,
                        const RetrenchPlan& plan, const ReluNetwork& net);

// delta = 1' max(y + eps, 0) on a model output vector.
double violation(const ViolationHead& head, const Eigen::VectorXd& model_output);

}  // namespace doe
