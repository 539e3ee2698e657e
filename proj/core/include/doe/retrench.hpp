#pragma once

#include <cstdint>
#include <vector>

#include "doe/feeder.hpp"

namespace doe {

// Which surrogate outputs to keep. Transit buses (zero base load, no DER)
// cannot bind their voltage limits before their neighbors do, interior
// transit lines cannot bind thermal limits first, and reverse flow can only
// start on the immediate upstream lines of DER buses.
struct RetrenchPlan {
  std::vector<int> v_buses;    // bus indices whose voltage is learned
  std::vector<int> i_lines;    // line indices whose current is learned
  std::vector<int> rpf_lines;  // line indices whose active power is learned

  std::uint64_t fingerprint() const;
};

// Prunes nothing: every bus and line retained, reverse-flow over all lines.
RetrenchPlan full_plan(const Feeder& feeder);

RetrenchPlan retrench(const Feeder& feeder);

}  // namespace doe
