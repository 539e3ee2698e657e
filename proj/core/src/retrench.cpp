#include "doe/retrench.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "doe/feeder.hpp"
#include "doe/topology.hpp"

namespace doe {

std::uint64_t RetrenchPlan::fingerprint() const {
  std::string bytes = "v:";
  for (int b : v_buses) bytes += std::to_string(b) + ",";
  bytes += "i:";
  for (int l : i_lines) bytes += std::to_string(l) + ",";
  bytes += "r:";
  for (int l : rpf_lines) bytes += std::to_string(l) + ",";
  return fnv1a64(bytes);
}

RetrenchPlan full_plan(const Feeder& feeder) {
  RetrenchPlan plan;
  for (int i = 0; i < feeder.bus_count(); ++i) plan.v_buses.push_back(i);
  for (int l = 0; l < feeder.line_count(); ++l) {
    plan.i_lines.push_back(l);
    plan.rpf_lines.push_back(l);
  }
  return plan;
}

RetrenchPlan retrench(const Feeder& feeder) {
  const TopologyOrder topo = validate_radial(feeder);
  RetrenchPlan plan;

  // Transit buses carry no load and no DER; their voltages sit between the
  // voltages of adjacent retained buses, so their limits cannot bind first.
  std::vector<bool> retained(feeder.bus_count(), false);
  for (int i = 0; i < feeder.bus_count(); ++i) {
    const Bus& b = feeder.buses[i];
    bool transit = b.base_load_p_kw == 0.0 && b.base_load_q_kvar == 0.0 && !b.der;
    retained[i] = !transit;
    if (retained[i]) plan.v_buses.push_back(i);
  }

  // Keep currents of lines touching at least one retained bus; interior
  // transit-to-transit lines shed current before their neighbors do.
  for (int l = 0; l < feeder.line_count(); ++l) {
    int a = feeder.bus_index(feeder.lines[l].from_bus);
    int b = feeder.bus_index(feeder.lines[l].to_bus);
    if (retained[a] || retained[b]) plan.i_lines.push_back(l);
  }

  // Reverse flow starts on the immediate upstream line of an injecting DER.
  std::set<int> rpf;
  for (const auto& entry : der_list(feeder)) {
    if (topo.parent_line[entry.first] >= 0) rpf.insert(topo.parent_line[entry.first]);
  }
  plan.rpf_lines.assign(rpf.begin(), rpf.end());
  return plan;
}

}  // namespace doe
