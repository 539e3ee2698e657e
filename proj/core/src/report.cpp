#include "doe/report.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "doe/errors.hpp"

namespace doe {

namespace fs = std::filesystem;

std::string environment_fingerprint() {
  std::ostringstream ss;
#if defined(__clang__)
  ss << "clang " << __clang_major__ << "." << __clang_minor__;
#elif defined(__GNUC__)
  ss << "gcc " << __GNUC__ << "." << __GNUC_MINOR__;
#else
  ss << "unknown-compiler";
#endif
  ss << ", eigen " << EIGEN_WORLD_VERSION << "." << EIGEN_MAJOR_VERSION << "."
     << EIGEN_MINOR_VERSION;
#if defined(__linux__)
  ss << ", linux";
#endif
  return ss.str();
}

std::vector<BenchmarkReport::MethodSummary> BenchmarkReport::summarize() const {
  std::map<char, MethodSummary> by_method;
  for (const DoeResult& r : rows) {
    MethodSummary& s = by_method[static_cast<char>(r.method)];
    s.method = r.method;
    s.intervals += 1;
    s.mean_j1 += r.j1;
    s.mean_j2 += r.j2;
    s.mean_j3 += r.j3;
    s.mean_j += r.objective();
    s.mean_time_s += r.solve_time_s;
    s.max_true_dv = std::max(s.max_true_dv, r.delta_v_true);
    s.max_true_dol = std::max(s.max_true_dol, r.delta_ol_true);
    s.max_true_drpf = std::max(s.max_true_drpf, r.delta_rpf_true);
    if (r.hit_limit) s.limited += 1;
  }
  std::vector<MethodSummary> out;
  for (auto& [key, s] : by_method) {
    double n = std::max(1, s.intervals);
    s.mean_j1 /= n;
    s.mean_j2 /= n;
    s.mean_j3 /= n;
    s.mean_j /= n;
    s.mean_time_s /= n;
    out.push_back(s);
  }
  return out;
}

void write_report_files(const BenchmarkReport& report, const std::string& out_dir) {
  fs::create_directories(out_dir);

  std::map<char, std::vector<DoeResult>> by_method;
  for (const DoeResult& r : report.rows) by_method[static_cast<char>(r.method)].push_back(r);

  for (const auto& [key, rows] : by_method) {
    write_results_csv(rows, out_dir + "/" + to_string(rows.front().method) + ".csv");
  }

  // Per-interval series, one column per method, aligned on interval index.
  auto series_file = [&](const std::string& name, auto field) {
    std::ofstream out(out_dir + "/" + name, std::ios::binary);
    if (!out) throw Error("cannot write series " + name);
    out << "interval";
    for (const auto& [key, rows] : by_method) out << "," << to_string(rows.front().method);
    out << "\n";
    std::size_t n = 0;
    for (const auto& [key, rows] : by_method) n = std::max(n, rows.size());
    for (std::size_t t = 0; t < n; ++t) {
      out << t;
      for (const auto& [key, rows] : by_method) {
        out << ",";
        if (t < rows.size()) out << field(rows[t]);
      }
      out << "\n";
    }
  };
  series_file("series_j1.csv", [](const DoeResult& r) { return r.j1; });
  series_file("series_j2.csv", [](const DoeResult& r) { return r.j2; });
  series_file("series_time_s.csv", [](const DoeResult& r) { return r.solve_time_s; });
}

void write_report_markdown(const BenchmarkReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << "# DOE benchmark report\n\n";
  out << "Environment: " << report.environment << "\n\n";
  out << "| method | intervals | mean J1 | mean J2 | mean J3 | mean J | mean time (s) |"
         " max true dV (pu) | max true dI (A) | max true dP (kW) | limited |\n";
  out << "|---|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& s : report.summarize()) {
    out << "| " << to_string(s.method) << " | " << s.intervals << " | " << s.mean_j1
        << " | " << s.mean_j2 << " | " << s.mean_j3 << " | " << s.mean_j << " | "
        << s.mean_time_s << " | " << s.max_true_dv << " | " << s.max_true_dol << " | "
        << s.max_true_drpf << " | " << s.limited << " |\n";
  }
  out << "\nPer-interval series: series_j1.csv, series_j2.csv, series_time_s.csv.\n";
}

void write_series_svg(const std::vector<std::string>& labels,
                      const std::vector<std::vector<double>>& series,
                      const std::string& title, const std::string& path) {
  if (labels.size() != series.size()) throw DimensionMismatch("labels/series mismatch");
  const double w = 640, h = 360, ml = 50, mr = 120, mt = 30, mb = 30;
  double lo = 0.0, hi = 1e-12;
  std::size_t n = 1;
  for (const auto& s : series) {
    for (double v : s) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    n = std::max(n, s.size());
  }
  const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd"};

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h
      << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
  out << "<text x='" << ml << "' y='18' font-size='14'>" << title << "</text>\n";
  auto sx = [&](std::size_t i) {
    return ml + (w - ml - mr) * (n > 1 ? static_cast<double>(i) / (n - 1) : 0.5);
  };
  auto sy = [&](double v) { return h - mb - (h - mt - mb) * (v - lo) / (hi - lo); };
  out << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr << "' y2='"
      << h - mb << "' stroke='black'/>\n";
  out << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << h - mb
      << "' stroke='black'/>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    out << "<polyline fill='none' stroke='" << palette[s % 5] << "' points='";
    for (std::size_t i = 0; i < series[s].size(); ++i) {
      out << sx(i) << "," << sy(series[s][i]) << " ";
    }
    out << "'/>\n";
    out << "<text x='" << w - mr + 8 << "' y='" << mt + 16 * s + 12 << "' fill='"
        << palette[s % 5] << "' font-size='12'>" << labels[s] << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace doe
