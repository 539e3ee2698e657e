#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "doe/feeder.hpp"

namespace doe {

// How to randomize loads and DER injections when generating snapshots.
// Multiplier ranges apply to the base bus loads; DER active injections are
// drawn inside each DER's [p_min, p_max].
struct SamplingSpec {
  // One common scale per snapshot (feeders move together over a day) times
  // an independent per-bus multiplier. Without the common factor the
  // correlated load patterns the envelopes are solved on sit far outside the
  // sampled manifold and surrogate bias concentrates along that direction.
  double common_scale_lo = 0.25;
  double common_scale_hi = 1.2;
  double p_scale_lo = 0.8;
  double p_scale_hi = 1.2;
  double q_scale_lo = 0.8;
  double q_scale_hi = 1.2;
  // Per-DER injection range, indexed like der_list(feeder). Empty means the
  // full [p_min, p_max] interval of each DER.
  std::vector<std::pair<double, double>> der_p_range_kw;
  std::uint64_t seed = 1;

  void check() const;
};

// Labeled power-flow snapshots: inputs are net bus loads [p; q] in kW/kVar,
// targets are the oracle outputs. Row i of every block belongs to the same
// snapshot.
struct SnapshotSet {
  Eigen::MatrixXd inputs;      // n x 2|M|
  Eigen::VectorXd loss_kw;     // n
  Eigen::MatrixXd v_pu;        // n x |M|
  Eigen::MatrixXd i_a;         // n x |E|
  Eigen::MatrixXd p_flow_kw;   // n x |E|
  std::uint64_t feeder_fingerprint = 0;
  double oracle_tol = 1e-8;
  std::uint64_t seed = 0;
  SamplingSpec sampling;  // parameters the rows were drawn with
  long rejections = 0;
  std::vector<int> bus_ids;                      // CSV header order
  std::vector<std::pair<int, int>> line_ids;     // (from, to) per line

  int rows() const { return static_cast<int>(inputs.rows()); }
  int bus_count() const { return static_cast<int>(v_pu.cols()); }
  int line_count() const { return static_cast<int>(i_a.cols()); }
};

// Generates n converged snapshots; non-converging draws are rejected and
// resampled (each attempt is keyed by (seed, attempt) so the output does not
// depend on scheduling). Throws TooManyRejections past a 50% rejection rate.
SnapshotSet generate_snapshots(const Feeder& feeder, const SamplingSpec& spec, int n,
                               std::uint64_t feeder_fp = 0);

// Seed-deterministic disjoint shuffle split.
std::pair<SnapshotSet, SnapshotSet> split_snapshots(const SnapshotSet& set,
                                                    double train_fraction,
                                                    std::uint64_t seed);

// Directory layout: manifest.json plus one CSV per block.
void save_snapshots(const SnapshotSet& set, const std::string& dir);
SnapshotSet load_snapshots(const std::string& dir,
                           std::uint64_t expect_fingerprint = 0);

}  // namespace doe
