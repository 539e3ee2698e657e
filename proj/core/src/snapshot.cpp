#include "doe/snapshot.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "doe/distflow.hpp"
#include "doe/errors.hpp"
#include "doe/rng.hpp"
#include "doe/topology.hpp"

namespace doe {

namespace fs = std::filesystem;
using nlohmann::json;

void SamplingSpec::check() const {
  auto bad = [](double lo, double hi) {
    return !(std::isfinite(lo) && std::isfinite(hi)) || lo > hi;
  };
  if (bad(common_scale_lo, common_scale_hi) || bad(p_scale_lo, p_scale_hi) ||
      bad(q_scale_lo, q_scale_hi)) {
    throw Error("sampling ranges must be finite with lo <= hi");
  }
  for (auto [lo, hi] : der_p_range_kw) {
    if (bad(lo, hi)) throw Error("DER sampling range must be finite with lo <= hi");
  }
}

namespace {

InjectionVector draw_injection(const Feeder& feeder, const SamplingSpec& spec,
                               const std::vector<std::pair<int, Der>>& ders,
                               std::uint64_t attempt) {
  Rng rng = Rng::keyed(spec.seed, attempt);
  InjectionVector inj;
  const int n = feeder.bus_count();
  inj.p_kw.resize(n);
  inj.q_kvar.resize(n);
  const double common = rng.uniform(spec.common_scale_lo, spec.common_scale_hi);
  for (int i = 0; i < n; ++i) {
    inj.p_kw[i] = feeder.buses[i].base_load_p_kw * common *
                  rng.uniform(spec.p_scale_lo, spec.p_scale_hi);
    inj.q_kvar[i] = feeder.buses[i].base_load_q_kvar * common *
                    rng.uniform(spec.q_scale_lo, spec.q_scale_hi);
  }
  for (std::size_t d = 0; d < ders.size(); ++d) {
    auto [bus, der] = ders[d];
    double lo = der.p_min_kw, hi = der.p_max_kw;
    if (d < spec.der_p_range_kw.size()) {
      lo = std::max(lo, spec.der_p_range_kw[d].first);
      hi = std::min(hi, spec.der_p_range_kw[d].second);
    }
    inj.p_kw[bus] -= rng.uniform(lo, hi);
    inj.q_kvar[bus] -= der.q_der_kvar;
  }
  return inj;
}

std::string fmt(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{}) throw MalformedFile("bad number in CSV: " + std::string(s));
  return v;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const Eigen::MatrixXd& data) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  for (std::size_t c = 0; c < header.size(); ++c) {
    out << (c ? "," : "") << header[c];
  }
  out << "\n";
  for (Eigen::Index r = 0; r < data.rows(); ++r) {
    for (Eigen::Index c = 0; c < data.cols(); ++c) {
      out << (c ? "," : "") << fmt(data(r, c));
    }
    out << "\n";
  }
}

Eigen::MatrixXd read_csv(const std::string& path, int expect_cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedFile("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw MalformedFile("empty CSV: " + path);
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> row;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      std::size_t end = (comma == std::string::npos) ? line.size() : comma;
      row.push_back(parse_double(std::string_view(line).substr(pos, end - pos)));
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    if (expect_cols > 0 && static_cast<int>(row.size()) != expect_cols) {
      throw MalformedFile("row width mismatch in " + path);
    }
    rows.push_back(std::move(row));
  }
  Eigen::MatrixXd m(rows.size(), rows.empty() ? expect_cols : rows[0].size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  }
  return m;
}

}  // namespace

SnapshotSet generate_snapshots(const Feeder& feeder, const SamplingSpec& spec, int n,
                               std::uint64_t feeder_fp) {
  if (n < 1) throw Error("snapshot count must be >= 1");
  spec.check();
  feeder.validate();
  const TopologyOrder topo = validate_radial(feeder);
  const auto ders = der_list(feeder);
  const int nb = feeder.bus_count();
  const int nl = feeder.line_count();
  const double tol = 1e-8;

  SnapshotSet set;
  set.inputs.resize(n, 2 * nb);
  set.loss_kw.resize(n);
  set.v_pu.resize(n, nb);
  set.i_a.resize(n, nl);
  set.p_flow_kw.resize(n, nl);
  set.feeder_fingerprint = feeder_fp;
  set.oracle_tol = tol;
  set.seed = spec.seed;
  set.sampling = spec;
  for (const Bus& b : feeder.buses) set.bus_ids.push_back(b.id);
  for (const Line& l : feeder.lines) set.line_ids.push_back({l.from_bus, l.to_bus});

  int accepted = 0;
  std::uint64_t attempt = 0;
  while (accepted < n) {
    InjectionVector inj = draw_injection(feeder, spec, ders, attempt);
    ++attempt;
    try {
      PowerFlowSolution sol = solve_distflow(feeder, topo, inj, tol, 100);
      for (int i = 0; i < nb; ++i) {
        set.inputs(accepted, i) = inj.p_kw[i];
        set.inputs(accepted, nb + i) = inj.q_kvar[i];
        set.v_pu(accepted, i) = sol.v_pu[i];
      }
      for (int l = 0; l < nl; ++l) {
        set.i_a(accepted, l) = sol.i_a[l];
        set.p_flow_kw(accepted, l) = sol.p_flow_kw[l];
      }
      set.loss_kw(accepted) = sol.loss_kw;
      ++accepted;
    } catch (const NonConvergence&) {
      ++set.rejections;
    } catch (const NegativeVoltageSquare&) {
      ++set.rejections;
    }
    if (set.rejections > std::max<long>(16, n)) {
      throw TooManyRejections("more than half of sampled operating points diverge; "
                              "rejections=" + std::to_string(set.rejections));
    }
  }
  return set;
}

std::pair<SnapshotSet, SnapshotSet> split_snapshots(const SnapshotSet& set,
                                                    double train_fraction,
                                                    std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error("train_fraction must be in (0, 1)");
  }
  const int n = set.rows();
  int n_train = static_cast<int>(std::llround(train_fraction * n));
  if (n_train < 1 || n_train > n - 1) throw EmptySplit("split leaves an empty part");

  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  Rng rng(seed);
  rng.shuffle(idx);

  auto take = [&](int lo, int hi) {
    SnapshotSet out;
    out.feeder_fingerprint = set.feeder_fingerprint;
    out.oracle_tol = set.oracle_tol;
    out.seed = set.seed;
    out.sampling = set.sampling;
    out.bus_ids = set.bus_ids;
    out.line_ids = set.line_ids;
    const int k = hi - lo;
    out.inputs.resize(k, set.inputs.cols());
    out.loss_kw.resize(k);
    out.v_pu.resize(k, set.v_pu.cols());
    out.i_a.resize(k, set.i_a.cols());
    out.p_flow_kw.resize(k, set.p_flow_kw.cols());
    for (int r = 0; r < k; ++r) {
      int src = idx[lo + r];
      out.inputs.row(r) = set.inputs.row(src);
      out.loss_kw(r) = set.loss_kw(src);
      out.v_pu.row(r) = set.v_pu.row(src);
      out.i_a.row(r) = set.i_a.row(src);
      out.p_flow_kw.row(r) = set.p_flow_kw.row(src);
    }
    return out;
  };
  return {take(0, n_train), take(n_train, n)};
}

void save_snapshots(const SnapshotSet& set, const std::string& dir) {
  fs::create_directories(dir);
  json manifest;
  manifest["schema_version"] = 1;
  manifest["feeder_fingerprint"] = set.feeder_fingerprint;
  manifest["n"] = set.rows();
  manifest["seed"] = set.seed;
  manifest["oracle_tol"] = set.oracle_tol;
  manifest["rejections"] = set.rejections;
  json spec_json;
  spec_json["common_scale"] = {set.sampling.common_scale_lo, set.sampling.common_scale_hi};
  spec_json["p_scale"] = {set.sampling.p_scale_lo, set.sampling.p_scale_hi};
  spec_json["q_scale"] = {set.sampling.q_scale_lo, set.sampling.q_scale_hi};
  json der_ranges = json::array();
  for (auto [lo, hi] : set.sampling.der_p_range_kw) der_ranges.push_back({lo, hi});
  spec_json["der_p_range_kw"] = der_ranges;
  manifest["spec"] = std::move(spec_json);
  manifest["bus_ids"] = set.bus_ids;
  json lines = json::array();
  for (auto [a, b] : set.line_ids) lines.push_back({a, b});
  manifest["line_ids"] = lines;
  {
    std::ofstream out(dir + "/manifest.json", std::ios::binary);
    if (!out) throw Error("cannot write manifest in " + dir);
    out << manifest.dump(2) << "\n";
  }

  std::vector<std::string> in_hdr, v_hdr, i_hdr, p_hdr;
  for (int id : set.bus_ids) in_hdr.push_back("p_" + std::to_string(id));
  for (int id : set.bus_ids) in_hdr.push_back("q_" + std::to_string(id));
  for (int id : set.bus_ids) v_hdr.push_back("v_" + std::to_string(id));
  for (auto [a, b] : set.line_ids) {
    i_hdr.push_back("i_" + std::to_string(a) + "_" + std::to_string(b));
    p_hdr.push_back("p_" + std::to_string(a) + "_" + std::to_string(b));
  }
  write_csv(dir + "/inputs.csv", in_hdr, set.inputs);
  write_csv(dir + "/target_loss.csv", {"loss_kw"}, set.loss_kw);
  write_csv(dir + "/target_v.csv", v_hdr, set.v_pu);
  write_csv(dir + "/target_i.csv", i_hdr, set.i_a);
  write_csv(dir + "/target_pflow.csv", p_hdr, set.p_flow_kw);
}

SnapshotSet load_snapshots(const std::string& dir, std::uint64_t expect_fingerprint) {
  std::ifstream mf(dir + "/manifest.json", std::ios::binary);
  if (!mf) throw MalformedFile("missing manifest in " + dir);
  json manifest;
  try {
    mf >> manifest;
  } catch (const json::exception& e) {
    throw MalformedFile(std::string("manifest parse error: ") + e.what());
  }

  SnapshotSet set;
  try {
    set.feeder_fingerprint = manifest.at("feeder_fingerprint").get<std::uint64_t>();
    set.seed = manifest.at("seed").get<std::uint64_t>();
    set.oracle_tol = manifest.at("oracle_tol").get<double>();
    set.rejections = manifest.value("rejections", 0L);
    if (manifest.contains("spec")) {
      const auto& js = manifest["spec"];
      set.sampling.common_scale_lo = js.at("common_scale")[0].get<double>();
      set.sampling.common_scale_hi = js.at("common_scale")[1].get<double>();
      set.sampling.p_scale_lo = js.at("p_scale")[0].get<double>();
      set.sampling.p_scale_hi = js.at("p_scale")[1].get<double>();
      set.sampling.q_scale_lo = js.at("q_scale")[0].get<double>();
      set.sampling.q_scale_hi = js.at("q_scale")[1].get<double>();
      for (const auto& r : js.at("der_p_range_kw")) {
        set.sampling.der_p_range_kw.push_back({r[0].get<double>(), r[1].get<double>()});
      }
      set.sampling.seed = set.seed;
    }
    set.bus_ids = manifest.at("bus_ids").get<std::vector<int>>();
    for (const auto& l : manifest.at("line_ids")) {
      set.line_ids.push_back({l.at(0).get<int>(), l.at(1).get<int>()});
    }
  } catch (const json::exception& e) {
    throw MalformedFile(std::string("manifest structure error: ") + e.what());
  }
  if (expect_fingerprint != 0 && expect_fingerprint != set.feeder_fingerprint) {
    throw FingerprintMismatch("dataset was generated for a different feeder file");
  }

  const int nb = static_cast<int>(set.bus_ids.size());
  const int nl = static_cast<int>(set.line_ids.size());
  const int n = manifest.at("n").get<int>();
  set.inputs = read_csv(dir + "/inputs.csv", 2 * nb);
  set.loss_kw = read_csv(dir + "/target_loss.csv", 1);
  set.v_pu = read_csv(dir + "/target_v.csv", nb);
  set.i_a = read_csv(dir + "/target_i.csv", nl);
  set.p_flow_kw = read_csv(dir + "/target_pflow.csv", nl);
  if (set.inputs.rows() != n || set.loss_kw.rows() != n || set.v_pu.rows() != n ||
      set.i_a.rows() != n || set.p_flow_kw.rows() != n) {
    throw MalformedFile("snapshot block row counts disagree with manifest");
  }
  return set;
}

}  // namespace doe
