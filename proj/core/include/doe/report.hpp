#pragma once

#include <map>
#include <string>
#include <vector>

#include "doe/doe_problem.hpp"

namespace doe {

// Aggregate of one benchmark run: per-method per-interval result rows plus
// the environment fingerprint. Everything emitted is recomputable from the
// rows.
struct BenchmarkReport {
  std::vector<DoeResult> rows;  // |methods| x |intervals|
  std::string environment;

  struct MethodSummary {
    Method method;
    int intervals = 0;
    double mean_j1 = 0.0, mean_j2 = 0.0, mean_j3 = 0.0, mean_j = 0.0;
    double mean_time_s = 0.0;
    double max_true_dv = 0.0, max_true_dol = 0.0, max_true_drpf = 0.0;
    int limited = 0;  // solves stopped by a node/time limit
  };
  std::vector<MethodSummary> summarize() const;
};

std::string environment_fingerprint();

// results/<method>.csv per method plus series files (one column per method,
// one row per interval) for J1, J2 and solution time.
void write_report_files(const BenchmarkReport& report, const std::string& out_dir);

// Markdown summary table.
void write_report_markdown(const BenchmarkReport& report, const std::string& path);

// Minimal SVG polyline chart of one series per method; good enough to eyeball
// an envelope or timing series without a plotting stack.
void write_series_svg(const std::vector<std::string>& labels,
                      const std::vector<std::vector<double>>& series,
                      const std::string& title, const std::string& path);

}  // namespace doe
