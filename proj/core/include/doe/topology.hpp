#pragma once

#include <vector>

#include "doe/feeder.hpp"

namespace doe {

// Traversal order for backward/forward sweeps over a radial feeder.
// All vectors are indexed by bus index (position in Feeder::buses) except
// `order`, which lists bus indices from the slack outward.
struct TopologyOrder {
  std::vector<int> parent_bus;   // -1 for the slack
  std::vector<int> parent_line;  // line index feeding each bus, -1 for slack
  std::vector<std::vector<int>> children;  // direct downstream bus indices
  std::vector<int> order;        // breadth-first from slack; depth-sorted
  std::vector<int> depth;
};

// Checks |lines| == |buses|-1, connectivity and acyclicity, and returns the
// sweep order. Throws CycleDetected / DisconnectedBus / DuplicateEdge.
TopologyOrder validate_radial(const Feeder& feeder);

}  // namespace doe
