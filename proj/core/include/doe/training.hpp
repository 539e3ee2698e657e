#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "doe/icnn.hpp"
#include "doe/retrench.hpp"
#include "doe/snapshot.hpp"

namespace doe {

enum class Optimizer : char { Sgd = 's', Adam = 'a' };

struct TrainConfig {
  int epochs = 400;
  int batch_size = 256;
  double learning_rate = 1e-3;
  Optimizer optimizer = Optimizer::Adam;
  std::uint64_t seed = 7;
  int patience = 20;           // early stop after this many non-improving epochs
  double validation_fraction = 0.1;

  void check() const;
};

struct TrainReport {
  std::vector<double> train_loss;  // per epoch, mean squared error
  std::vector<double> val_loss;
  int best_epoch = -1;
};

// Column selection for one head: inputs are always the full [p; q] block,
// targets depend on the head kind and the retrench plan.
Eigen::MatrixXd head_targets(const SnapshotSet& set, HeadKind head,
                             const RetrenchPlan& plan);

// Ids (bus or line ids) matching head_targets columns.
std::vector<int> head_output_ids(const Feeder& feeder, HeadKind head,
                                 const RetrenchPlan& plan);

// Trains in place on normalized data with mean squared error. For ICNNs,
// every optimizer step is followed by the nonnegativity projection, so
// stored weights are feasible at every checkpoint. Deterministic per seed.
// The returned network has normalization recorded but not folded.
TrainReport train(ReluNetwork& net, const Eigen::MatrixXd& train_x,
                  const Eigen::MatrixXd& train_y, const Eigen::MatrixXd& val_x,
                  const Eigen::MatrixXd& val_y, const TrainConfig& cfg);

// Mean absolute error over all output entries divided by the normalizer.
double nmae(const ReluNetwork& net, const Eigen::MatrixXd& x,
            const Eigen::MatrixXd& y, double normalizer);

// Mean squared error loss and its gradient w.r.t. all parameters, flattened
// in a fixed order; used by the optimizer and the finite-difference check.
double mse_loss(const ReluNetwork& net, const Eigen::MatrixXd& x_rows,
                const Eigen::MatrixXd& y_rows);
Eigen::VectorXd flatten_parameters(const ReluNetwork& net);
void unflatten_parameters(ReluNetwork& net, const Eigen::VectorXd& theta);
Eigen::VectorXd mse_gradient(const ReluNetwork& net, const Eigen::MatrixXd& x_rows,
                             const Eigen::MatrixXd& y_rows);

}  // namespace doe
