#include "doe/topology.hpp"

#include <algorithm>
#include <set>
#include <string>

#include "doe/errors.hpp"

namespace doe {

TopologyOrder validate_radial(const Feeder& feeder) {
  const int n = feeder.bus_count();
  const int m = feeder.line_count();
  if (n < 1) throw TopologyError("feeder has no buses");
  if (m != n - 1) {
    if (m >= n) throw CycleDetected("|lines| = " + std::to_string(m) + " >= |buses| = " +
                                    std::to_string(n) + ", tree needs |buses|-1 edges");
    throw DisconnectedBus("too few lines for a spanning tree");
  }

  std::set<std::pair<int, int>> edge_set;
  std::vector<std::vector<std::pair<int, int>>> adj(n);  // (neighbor bus idx, line idx)
  for (int l = 0; l < m; ++l) {
    int a = feeder.bus_index(feeder.lines[l].from_bus);
    int b = feeder.bus_index(feeder.lines[l].to_bus);
    if (a == b) throw CycleDetected("self-loop on bus " + std::to_string(feeder.lines[l].from_bus));
    auto key = std::minmax(a, b);
    if (!edge_set.insert({key.first, key.second}).second) {
      throw DuplicateEdge("duplicate line between buses " +
                          std::to_string(feeder.lines[l].from_bus) + " and " +
                          std::to_string(feeder.lines[l].to_bus));
    }
    adj[a].push_back({b, l});
    adj[b].push_back({a, l});
  }

  TopologyOrder topo;
  topo.parent_bus.assign(n, -1);
  topo.parent_line.assign(n, -1);
  topo.children.assign(n, {});
  topo.depth.assign(n, -1);

  const int root = feeder.slack_index();
  topo.depth[root] = 0;
  topo.order.push_back(root);
  // Breadth-first from the slack; queue order follows line file order, which
  // keeps the traversal deterministic for a given input.
  for (std::size_t head = 0; head < topo.order.size(); ++head) {
    int u = topo.order[head];
    for (auto [v, l] : adj[u]) {
      if (v == topo.parent_bus[u]) continue;
      if (topo.depth[v] >= 0) throw CycleDetected("cycle through bus " +
                                                  std::to_string(feeder.buses[v].id));
      topo.parent_bus[v] = u;
      topo.parent_line[v] = l;
      topo.depth[v] = topo.depth[u] + 1;
      topo.children[u].push_back(v);
      topo.order.push_back(v);
    }
  }
  if (static_cast<int>(topo.order.size()) != n) {
    for (int i = 0; i < n; ++i) {
      if (topo.depth[i] < 0) {
        throw DisconnectedBus("bus " + std::to_string(feeder.buses[i].id) +
                              " is not connected to the slack");
      }
    }
  }
  return topo;
}

}  // namespace doe
