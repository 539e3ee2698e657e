#include <doctest.h>

#include <filesystem>
#include <set>
#include <fstream>

#include "doe/distflow.hpp"
#include "doe/errors.hpp"
#include "doe/snapshot.hpp"
#include "support/fixtures.hpp"

using namespace doe;
namespace fs = std::filesystem;

TEST_CASE("degenerate ranges reproduce the base-load flow") {
  Feeder f = testing::load_feeder33();
  SamplingSpec spec;
  spec.common_scale_lo = spec.common_scale_hi = 1.0;
  spec.p_scale_lo = spec.p_scale_hi = 1.0;
  spec.q_scale_lo = spec.q_scale_hi = 1.0;
  spec.der_p_range_kw = {{0.0, 0.0}, {0.0, 0.0}};
  spec.seed = 11;
  SnapshotSet set = generate_snapshots(f, spec, 1);
  REQUIRE(set.rows() == 1);

  InjectionVector inj = net_loads(f, {0.0, 0.0});
  PowerFlowSolution sol = solve_distflow(f, inj);
  for (int i = 0; i < f.bus_count(); ++i) {
    CHECK(set.inputs(0, i) == doctest::Approx(inj.p_kw[i]));
    CHECK(set.inputs(0, f.bus_count() + i) == doctest::Approx(inj.q_kvar[i]));
    CHECK(set.v_pu(0, i) == doctest::Approx(sol.v_pu[i]).epsilon(1e-12));
  }
  CHECK(set.loss_kw(0) == doctest::Approx(sol.loss_kw).epsilon(1e-12));
}

TEST_CASE("generation is deterministic in the seed") {
  Feeder f = testing::load_feeder33();
  SamplingSpec spec;
  spec.seed = 77;
  SnapshotSet a = generate_snapshots(f, spec, 50);
  SnapshotSet b = generate_snapshots(f, spec, 50);
  CHECK(testing::same(a.inputs, b.inputs));
  CHECK(testing::same(a.v_pu, b.v_pu));
  CHECK(testing::same(a.loss_kw, b.loss_kw));

  spec.seed = 78;
  SnapshotSet c = generate_snapshots(f, spec, 50);
  CHECK(!testing::same(a.inputs, c.inputs));
}

TEST_CASE("every stored row re-verifies against the oracle") {
  Feeder f = testing::load_feeder33();
  SamplingSpec spec;
  spec.seed = 5;
  SnapshotSet set = generate_snapshots(f, spec, 200);
  const int nb = f.bus_count();
  for (int r = 0; r < set.rows(); ++r) {
    InjectionVector inj;
    for (int i = 0; i < nb; ++i) {
      inj.p_kw.push_back(set.inputs(r, i));
      inj.q_kvar.push_back(set.inputs(r, nb + i));
    }
    PowerFlowSolution sol = solve_distflow(f, inj);
    CHECK(std::abs(sol.loss_kw - set.loss_kw(r)) <= 1e-7 * f.base_power_kw());
    for (int i = 0; i < nb; ++i) {
      CHECK(std::abs(sol.v_pu[i] - set.v_pu(r, i)) <= 1e-7);
    }
    for (int l = 0; l < f.line_count(); ++l) {
      CHECK(std::abs(sol.p_flow_kw[l] - set.p_flow_kw(r, l)) <= 1e-6 * f.base_power_kw());
    }
  }
}

TEST_CASE("unreasonable sampling window fails loudly") {
  Feeder f = testing::load_feeder33();
  SamplingSpec spec;
  spec.p_scale_lo = 400.0;  // nothing converges up here
  spec.p_scale_hi = 500.0;
  spec.q_scale_lo = 400.0;
  spec.q_scale_hi = 500.0;
  CHECK_THROWS_AS(generate_snapshots(f, spec, 40), TooManyRejections);
}

TEST_CASE("split partitions deterministically") {
  Feeder f = testing::load_feeder33();
  SamplingSpec spec;
  spec.seed = 9;
  SnapshotSet set = generate_snapshots(f, spec, 10);

  auto [train, test] = split_snapshots(set, 0.8, 123);
  CHECK(train.rows() == 8);
  CHECK(test.rows() == 2);

  auto [train2, test2] = split_snapshots(set, 0.8, 123);
  CHECK(testing::same(train.inputs, train2.inputs));
  CHECK(testing::same(test.inputs, test2.inputs));

  // Union of the parts is the original multiset of rows.
  std::multiset<double> before, after;
  for (int r = 0; r < set.rows(); ++r) before.insert(set.loss_kw(r));
  for (int r = 0; r < train.rows(); ++r) after.insert(train.loss_kw(r));
  for (int r = 0; r < test.rows(); ++r) after.insert(test.loss_kw(r));
  CHECK(before == after);

  CHECK_THROWS_AS(split_snapshots(set, 0.999, 1), EmptySplit);
  CHECK_THROWS_AS(split_snapshots(set, 1.5, 1), Error);
}

TEST_CASE("save and load round trip bit-exactly") {
  Feeder f = testing::load_feeder33();
  SamplingSpec spec;
  spec.seed = 21;
  SnapshotSet set = generate_snapshots(f, spec, 25, feeder_fingerprint(testing::feeder33_path()));
  std::string dir = "snap_roundtrip";
  save_snapshots(set, dir);
  SnapshotSet back = load_snapshots(dir, set.feeder_fingerprint);
  CHECK(testing::same(back.inputs, set.inputs));
  CHECK(testing::same(back.v_pu, set.v_pu));
  CHECK(testing::same(back.i_a, set.i_a));
  CHECK(testing::same(back.p_flow_kw, set.p_flow_kw));
  CHECK(testing::same(back.loss_kw, set.loss_kw));
  CHECK(back.feeder_fingerprint == set.feeder_fingerprint);

  SUBCASE("wrong fingerprint is rejected") {
    CHECK_THROWS_AS(load_snapshots(dir, set.feeder_fingerprint + 1), FingerprintMismatch);
  }
  SUBCASE("truncated block is rejected") {
    // Chop the voltage block short.
    fs::copy_file(dir + "/target_v.csv", dir + "/target_v_full.csv",
                  fs::copy_options::overwrite_existing);
    std::ifstream in(dir + "/target_v.csv");
    std::string line, keep;
    for (int i = 0; i < 10 && std::getline(in, line); ++i) keep += line + "\n";
    in.close();
    std::ofstream out(dir + "/target_v.csv", std::ios::trunc);
    out << keep;
    out.close();
    CHECK_THROWS_AS(load_snapshots(dir, set.feeder_fingerprint), MalformedFile);
  }
  fs::remove_all(dir);
}

TEST_CASE("byte-identical dataset files for identical parameters") {
  Feeder f = testing::load_feeder33();
  SamplingSpec spec;
  spec.seed = 33;
  auto read = [](const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  SnapshotSet a = generate_snapshots(f, spec, 12);
  save_snapshots(a, "snap_a");
  SnapshotSet b = generate_snapshots(f, spec, 12);
  save_snapshots(b, "snap_b");
  CHECK(read("snap_a/inputs.csv") == read("snap_b/inputs.csv"));
  CHECK(read("snap_a/target_v.csv") == read("snap_b/target_v.csv"));
  CHECK(read("snap_a/manifest.json") == read("snap_b/manifest.json"));
  fs::remove_all("snap_a");
  fs::remove_all("snap_b");
}

TEST_CASE("manifest carries the sampling parameters") {
  Feeder f = testing::load_feeder33();
  SamplingSpec spec;
  spec.seed = 61;
  spec.p_scale_lo = 0.6;
  spec.der_p_range_kw = {{0.0, 400.0}, {-100.0, 100.0}};
  SnapshotSet set = generate_snapshots(f, spec, 5);
  save_snapshots(set, "snap_spec");
  SnapshotSet back = load_snapshots("snap_spec");
  CHECK(back.sampling.p_scale_lo == 0.6);
  CHECK(back.sampling.common_scale_hi == spec.common_scale_hi);
  REQUIRE(back.sampling.der_p_range_kw.size() == 2);
  CHECK(back.sampling.der_p_range_kw[1].first == -100.0);
  std::filesystem::remove_all("snap_spec");
}
