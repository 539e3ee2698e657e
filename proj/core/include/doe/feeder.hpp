#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace doe {

using BusId = int;

struct Der {
  double p_max_kw = 0.0;
  double p_min_kw = 0.0;
  double q_der_kvar = 0.0;  // fixed reactive setpoint
};

struct Bus {
  BusId id = 0;
  double base_load_p_kw = 0.0;
  double base_load_q_kvar = 0.0;
  std::optional<Der> der;
};

struct Line {
  BusId from_bus = 0;
  BusId to_bus = 0;
  double r_pu = 0.0;
  double x_pu = 0.0;
  double i_max_a = 0.0;        // thermal limit
  double p_min_reverse_kw = 0.0;  // reverse-flow floor (negative for export headroom)
};

// Operating limits used by the violation terms. Per-line vectors are indexed
// like Feeder::lines.
struct Limits {
  double v_min_pu = 0.9;
  double v_max_pu = 1.1;
  std::vector<double> i_max_a;
  std::vector<double> p_min_kw;
};

class Feeder {
 public:
  std::string name;
  std::vector<Bus> buses;
  std::vector<Line> lines;
  BusId slack_bus = 0;
  double slack_voltage_pu = 1.0;
  double base_power_mva = 0.0;
  double base_voltage_kv = 0.0;
  double v_min_pu = 0.9;
  double v_max_pu = 1.1;

  int bus_count() const { return static_cast<int>(buses.size()); }
  int line_count() const { return static_cast<int>(lines.size()); }

  int bus_index(BusId id) const;  // throws Error on unknown id
  int slack_index() const { return bus_index(slack_bus); }

  double base_power_kw() const { return base_power_mva * 1000.0; }
  // Ampere base for a balanced three-phase feeder described by its
  // single-phase equivalent: S = sqrt(3) V_LL I.
  double base_current_a() const;

  // Default Limits assembled from the per-line fields.
  Limits default_limits() const;

  // Raises TopologyError/Error subclasses if the feeder is not a valid
  // radial network with unique bus ids and nonnegative impedances.
  void validate() const;
};

// Net bus loads handed to the power-flow solver. Consumption is positive;
// values are in kW/kVar and indexed like Feeder::buses. The slack entry is
// ignored by the solver.
struct InjectionVector {
  std::vector<double> p_kw;
  std::vector<double> q_kvar;
};

// Base-case net loads: uncontrollable load minus fixed DER reactive setpoint,
// with DER active injection `der_p_kw[d]` (indexed like the feeder's DER
// list) subtracted at the DER's bus.
InjectionVector net_loads(const Feeder& feeder, const std::vector<double>& der_p_kw);
InjectionVector base_loads(const Feeder& feeder);

// Ordered list of (bus index, DER) pairs, in feeder file order.
std::vector<std::pair<int, Der>> der_list(const Feeder& feeder);

// JSON feeder file I/O. `load_feeder` also returns the file fingerprint
// (FNV-1a over the raw bytes) used to tie datasets and models to a feeder.
Feeder load_feeder(const std::string& path);
Feeder parse_feeder(const std::string& json_text);
void save_feeder(const Feeder& feeder, const std::string& path);
std::uint64_t feeder_fingerprint(const std::string& path);
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace doe
