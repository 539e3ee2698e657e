#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "doe/lp.hpp"

namespace doe {

enum class HeadKind : char { Loss = 'l', Voltage = 'v', Overload = 'o', ReverseFlow = 'r' };

const char* to_string(HeadKind k);
HeadKind head_kind_from_string(const std::string& s);

enum class NetKind : char { Icnn = 'c', Mlp = 'm' };

// Input standardization and output scaling learned from the training set.
// Forward evaluation applies it on the fly until it is folded into the
// weights; `folded` records that the weights are already in physical units.
struct Normalization {
  Eigen::VectorXd input_mean, input_scale;   // x_norm = (x - mean) / scale
  Eigen::VectorXd output_mean, output_scale; // y = y_norm * scale + mean
  bool folded = false;
  bool identity() const;
};

// One weight stage of a ReLU feedforward net with input passthrough.
// Stage 0 has no feedforward matrix; the last stage has no activation.
struct Layer {
  Eigen::MatrixXd w_z;  // from previous hidden layer (empty for stage 0)
  Eigen::MatrixXd w_x;  // passthrough from the input (empty for MLP stages > 0)
  Eigen::VectorXd b;
};

// ReLU network covering both surrogate families: the input-convex variant
// carries passthrough links at every stage and nonnegative w_z, the plain
// MLP carries neither constraint. Outputs are physical quantities; the
// violation head stacking lives in heads.hpp.
class ReluNetwork {
 public:
  NetKind kind = NetKind::Icnn;
  HeadKind head = HeadKind::Loss;
  std::vector<Layer> layers;  // K hidden stages + output stage
  Normalization norm;
  // Ids of the buses/lines whose quantity each output row predicts (feeder
  // element ids, post-retrenchment).
  std::vector<int> output_ids;
  std::uint64_t train_fingerprint = 0;
  std::uint64_t retrench_fingerprint = 0;

  int input_dim() const;
  int output_dim() const;
  int hidden_stages() const { return static_cast<int>(layers.size()) - 1; }

  // Raises Error if dimensions do not chain or (for ICNN) any w_z entry is
  // negative.
  void check_valid() const;
  bool z_weights_nonnegative() const;

  Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& x_rows) const;
};

// Randomly initialized network: symmetric uniform fan-in for passthrough and
// biases, absolute value of the same rule for w_z so an ICNN starts inside
// the feasible weight set.
ReluNetwork make_network(NetKind kind, HeadKind head, int input_dim,
                         const std::vector<int>& hidden, int output_dim,
                         std::uint64_t seed);

// Clamps every negative w_z entry to zero; idempotent, other parameters
// untouched.
void project_nonnegative(ReluNetwork& net);

// Absorbs the normalization record into the weights so the network maps
// physical inputs to physical outputs directly. Output scales must be
// positive (w_z sign preservation); throws Error otherwise or if already
// folded.
void fold_normalization(ReluNetwork& net);

// Exact inference of an input-convex ReLU net as a linear program: minimize
// 1'y subject to the relaxed layer inequalities. At the optimum every output
// coordinate equals the feedforward value. Requires w_z >= 0.
Eigen::VectorXd exact_inference_lp(const ReluNetwork& net, const Eigen::VectorXd& x,
                                   const LpOptions& opt = {});

// Model file I/O (JSON, bit-exact round trip for finite doubles).
void save_network(const ReluNetwork& net, const std::string& path);
ReluNetwork load_network(const std::string& path);
std::string network_to_json(const ReluNetwork& net);
ReluNetwork network_from_json(const std::string& text);

}  // namespace doe
