#include <doctest.h>

#include "doe/retrench.hpp"
#include "support/fixtures.hpp"

using namespace doe;

TEST_CASE("transit buses and their interior line are pruned") {
  Feeder f = testing::five_bus_star();  // loads at buses 1, 4, 5 only
  RetrenchPlan plan = retrench(f);

  // Bus indices: 0..4 for ids 1..5. Buses 2 and 3 (idx 1, 2) are transit.
  CHECK(plan.v_buses == std::vector<int>{0, 3, 4});
  // Line (2,3) is index 1 and connects two transit buses.
  CHECK(plan.i_lines == std::vector<int>{0, 2, 3});
  // No DER anywhere: nothing can push reverse flow.
  CHECK(plan.rpf_lines.empty());
}

TEST_CASE("fully loaded feeder retains everything") {
  Feeder f = testing::five_bus_star();
  for (Bus& b : f.buses) b.base_load_p_kw = std::max(b.base_load_p_kw, 1.0);
  RetrenchPlan plan = retrench(f);
  CHECK(plan.v_buses.size() == 5);
  CHECK(plan.i_lines.size() == 4);
}

TEST_CASE("leaf DER keeps only its parent line for reverse flow") {
  Feeder f = testing::five_bus_star();
  f.buses[4].der = Der{300.0, 0.0, 0.0};  // bus id 5, child of bus 3
  RetrenchPlan plan = retrench(f);
  CHECK(plan.rpf_lines == std::vector<int>{3});  // line (3,5)
  // The DER bus itself is now retained.
  CHECK(std::find(plan.v_buses.begin(), plan.v_buses.end(), 4) != plan.v_buses.end());
}

TEST_CASE("bundled feeder prunes the unloaded slack and maps DER lines") {
  Feeder f = testing::load_feeder33();
  RetrenchPlan plan = retrench(f);
  // Only bus 1 (the slack, index 0) carries no load.
  CHECK(plan.v_buses.size() == 32);
  CHECK(std::find(plan.v_buses.begin(), plan.v_buses.end(), 0) == plan.v_buses.end());
  CHECK(plan.i_lines.size() == 32);  // every line touches a loaded bus
  // DERs at buses 18 and 33: parent lines (17,18) and (32,33).
  REQUIRE(plan.rpf_lines.size() == 2);

  RetrenchPlan full = full_plan(f);
  CHECK(full.v_buses.size() == 33);
  CHECK(full.rpf_lines.size() == 32);
  CHECK(full.fingerprint() != plan.fingerprint());
}
