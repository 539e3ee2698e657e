#pragma once

#include <string>

#include <Eigen/Core>

#include "doe/feeder.hpp"

#ifndef DOE_DATA_DIR
#define DOE_DATA_DIR "."
#endif

namespace doe::testing {

inline std::string feeder33_path() { return std::string(DOE_DATA_DIR) + "/feeder33.json"; }

inline Feeder load_feeder33() { return load_feeder(feeder33_path()); }

// Two-bus feeder: slack plus one load bus over a single line, impedances in
// p.u. on a 10 MVA / 12.66 kV base.
inline Feeder two_bus(double r_pu = 0.01, double x_pu = 0.01) {
  Feeder f;
  f.name = "twobus";
  f.base_power_mva = 10.0;
  f.base_voltage_kv = 12.66;
  f.slack_bus = 1;
  f.buses.push_back({1, 0.0, 0.0, {}});
  f.buses.push_back({2, 1000.0, 500.0, {}});
  f.lines.push_back({1, 2, r_pu, x_pu, 500.0, -125.0});
  return f;
}

// Star of five buses matching the retrenchment discussion: loads at 1, 4, 5
// only; buses 2 and 3 transit.
inline Feeder five_bus_star() {
  Feeder f;
  f.name = "star5";
  f.base_power_mva = 10.0;
  f.base_voltage_kv = 12.66;
  f.slack_bus = 1;
  f.buses.push_back({1, 10.0, 5.0, {}});
  f.buses.push_back({2, 0.0, 0.0, {}});
  f.buses.push_back({3, 0.0, 0.0, {}});
  f.buses.push_back({4, 100.0, 40.0, {}});
  f.buses.push_back({5, 80.0, 30.0, {}});
  f.lines.push_back({1, 2, 0.01, 0.02, 400.0, -125.0});
  f.lines.push_back({2, 3, 0.01, 0.02, 400.0, -125.0});
  f.lines.push_back({3, 4, 0.01, 0.02, 400.0, -125.0});
  f.lines.push_back({3, 5, 0.01, 0.02, 400.0, -125.0});
  return f;
}

// Exact elementwise equality, dimensions included.
inline bool same(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         (a.rows() == 0 || (a.array() == b.array()).all());
}

}  // namespace doe::testing
