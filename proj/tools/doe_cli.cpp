// Command-line front end: dataset generation, surrogate training, envelope
// solving, benchmark comparison and report emission.
//
// Exit codes: 0 success, 1 solver/runtime failure, 2 usage error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "doe/distflow.hpp"
#include "doe/doe_problem.hpp"
#include "doe/errors.hpp"
#include "doe/feeder.hpp"
#include "doe/lindistflow.hpp"
#include "doe/report.hpp"
#include "doe/retrench.hpp"
#include "doe/scenario.hpp"
#include "doe/snapshot.hpp"
#include "doe/training.hpp"

namespace fs = std::filesystem;
using namespace doe;

namespace {

// JSON config files: a flat object per subcommand keyed by option name,
// e.g. {"solve": {"feeder": "data/feeder33.json", "methods": ["B0","B1"]}}.
// Values given on the command line take precedence, as usual for CLI11
// config handling.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override {
    return "{}\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      input >> j;
    } catch (const nlohmann::json::exception& e) {
      throw CLI::FileError(std::string("config is not valid JSON: ") + e.what());
    }
    std::vector<CLI::ConfigItem> items;
    std::function<void(const nlohmann::json&, std::vector<std::string>)> walk =
        [&](const nlohmann::json& node, std::vector<std::string> parents) {
          for (const auto& [key, value] : node.items()) {
            if (value.is_object()) {
              auto deeper = parents;
              deeper.push_back(key);
              walk(value, deeper);
              continue;
            }
            CLI::ConfigItem item;
            item.parents = parents;
            item.name = key;
            if (value.is_array()) {
              for (const auto& entry : value) {
                item.inputs.push_back(entry.is_string() ? entry.get<std::string>()
                                                        : entry.dump());
              }
            } else {
              item.inputs.push_back(value.is_string() ? value.get<std::string>()
                                                      : value.dump());
            }
            items.push_back(std::move(item));
          }
        };
    walk(j, {});
    return items;
  }
};

struct GenerateArgs {
  std::string feeder_path;
  std::string out_dir;
  int n = 30000;
  std::uint64_t seed = 1;
  std::pair<double, double> common_range{0.25, 1.2};
  std::pair<double, double> p_range{0.8, 1.2};
  std::pair<double, double> q_range{0.8, 1.2};
};

struct TrainArgs {
  std::string feeder_path;
  std::string data_dir;
  std::string out_dir;
  std::string kind = "icnn";
  bool no_retrench = false;
  int epochs = 400;
  int batch_size = 256;
  double learning_rate = 1e-3;
  int patience = 20;
  double val_fraction = 0.1;
  double test_fraction = 0.2;
  std::uint64_t seed = 7;
  std::vector<std::string> arch;  // head=sizes, e.g. v=48,24
};

struct SolveArgs {
  std::string feeder_path;
  std::string models_dir;
  std::string out_dir;
  std::vector<std::string> methods{"B1"};
  std::string direction = "upper";
  std::string scenario = "stress-day";
  std::string request_path;
  int intervals = 24;
  double load_scale = 1.0;
  std::vector<std::string> weight_overrides;
  int pwl_segments = 5;
  double time_limit = 20.0;
  long node_limit = 20000;
  bool svg = false;
};

std::map<HeadKind, std::vector<int>> default_arch() {
  return {{HeadKind::Loss, {32, 16}},
          {HeadKind::Voltage, {64, 32}},
          {HeadKind::Overload, {64, 32}},
          {HeadKind::ReverseFlow, {48, 24}}};
}

std::vector<int> parse_sizes(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    out.push_back(std::stoi(tok));
  }
  if (out.empty()) throw CLI::ValidationError("empty hidden-layer list");
  return out;
}

void apply_weight_overrides(Weights& w, const std::vector<std::string>& kvs) {
  for (const std::string& kv : kvs) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw CLI::ValidationError("--weights expects name=value, got " + kv);
    }
    std::string key = kv.substr(0, eq);
    double val = std::stod(kv.substr(eq + 1));
    if (key == "w_doe") w.w_doe = val;
    else if (key == "w_loss") w.w_loss = val;
    else if (key == "w_v") w.w_v = val;
    else if (key == "w_ol") w.w_ol = val;
    else if (key == "w_rpf") w.w_rpf = val;
    else throw CLI::ValidationError("unknown weight: " + key);
  }
}

int run_generate(const GenerateArgs& args) {
  Feeder feeder = load_feeder(args.feeder_path);
  SamplingSpec spec;
  spec.common_scale_lo = args.common_range.first;
  spec.common_scale_hi = args.common_range.second;
  spec.p_scale_lo = args.p_range.first;
  spec.p_scale_hi = args.p_range.second;
  spec.q_scale_lo = args.q_range.first;
  spec.q_scale_hi = args.q_range.second;
  spec.seed = args.seed;
  SnapshotSet set =
      generate_snapshots(feeder, spec, args.n, feeder_fingerprint(args.feeder_path));
  save_snapshots(set, args.out_dir);
  std::cout << "wrote " << set.rows() << " snapshots to " << args.out_dir
            << " (rejections: " << set.rejections << ")\n";
  return 0;
}

double nmae_normalizer(const Feeder& feeder, const Limits& limits, HeadKind head) {
  switch (head) {
    case HeadKind::Voltage: return 1.0;  // nominal voltage, p.u.
    case HeadKind::Overload:
      return *std::max_element(limits.i_max_a.begin(), limits.i_max_a.end());
    case HeadKind::Loss:
    case HeadKind::ReverseFlow: return feeder.base_power_kw();
  }
  return 1.0;
}

int run_train(const TrainArgs& args) {
  Feeder feeder = load_feeder(args.feeder_path);
  SnapshotSet data = load_snapshots(args.data_dir, feeder_fingerprint(args.feeder_path));
  auto [train_set, test_set] = split_snapshots(data, 1.0 - args.test_fraction, args.seed);

  RetrenchPlan plan = args.no_retrench ? full_plan(feeder) : retrench(feeder);
  if (args.kind != "mlp" && args.kind != "icnn") {
    throw CLI::ValidationError("--kind must be icnn or mlp");
  }
  NetKind kind = args.kind == "mlp" ? NetKind::Mlp : NetKind::Icnn;

  auto arch = default_arch();
  for (const std::string& spec_text : args.arch) {
    auto eq = spec_text.find('=');
    if (eq == std::string::npos) {
      throw CLI::ValidationError("--arch expects head=sizes, got " + spec_text);
    }
    arch[head_kind_from_string(spec_text.substr(0, eq))] =
        parse_sizes(spec_text.substr(eq + 1));
  }

  TrainConfig cfg;
  cfg.epochs = args.epochs;
  cfg.batch_size = args.batch_size;
  cfg.learning_rate = args.learning_rate;
  cfg.patience = args.patience;
  cfg.validation_fraction = args.val_fraction;
  cfg.seed = args.seed;

  fs::create_directories(args.out_dir);
  std::ofstream report(args.out_dir + "/nmae_report.csv");
  report << "head,kind,nmae,normalizer,epochs_run,best_epoch\n";

  SurrogateBundle bundle;
  bundle.plan = plan;
  Limits limits = feeder.default_limits();
  for (HeadKind head : {HeadKind::Loss, HeadKind::Voltage, HeadKind::Overload,
                        HeadKind::ReverseFlow}) {
    std::vector<int> ids = head_output_ids(feeder, head, plan);
    ReluNetwork net = make_network(kind, head, 2 * feeder.bus_count(), arch[head],
                                   static_cast<int>(ids.size()),
                                   cfg.seed + static_cast<std::uint64_t>(head));
    net.output_ids = ids;
    net.retrench_fingerprint = plan.fingerprint();
    net.train_fingerprint = data.feeder_fingerprint ^ cfg.seed;

    Eigen::MatrixXd ty = head_targets(train_set, head, plan);
    TrainReport tr = train(net, train_set.inputs, ty, {}, {}, cfg);
    fold_normalization(net);

    Eigen::MatrixXd vy = head_targets(test_set, head, plan);
    double score = nmae(net, test_set.inputs, vy, nmae_normalizer(feeder, limits, head));
    report << to_string(head) << ',' << args.kind << ',' << score << ','
           << nmae_normalizer(feeder, limits, head) << ',' << tr.train_loss.size() << ','
           << tr.best_epoch << "\n";
    std::cout << "trained " << args.kind << " " << to_string(head)
              << " head: test NMAE " << score << "\n";

    switch (head) {
      case HeadKind::Loss: bundle.loss_net = std::move(net); break;
      case HeadKind::Voltage: bundle.v_net = std::move(net); break;
      case HeadKind::Overload: bundle.ol_net = std::move(net); break;
      case HeadKind::ReverseFlow: bundle.rpf_net = std::move(net); break;
    }
  }
  save_bundle(bundle, args.out_dir, args.kind);
  std::cout << "models written to " << args.out_dir << "\n";
  return 0;
}

DoeRequest build_request(const Feeder& feeder, const SolveArgs& args) {
  DoeRequest req;
  if (!args.request_path.empty()) {
    std::ifstream in(args.request_path, std::ios::binary);
    if (!in) throw MalformedFile("cannot open request " + args.request_path);
    std::ostringstream ss;
    ss << in.rdbuf();
    req = request_from_json(ss.str(), feeder);
  } else if (args.scenario == "stress-day") {
    req = make_stress_day(feeder, args.intervals);
  } else if (args.scenario == "snapshot") {
    req = make_snapshot_request(feeder, args.load_scale);
  } else {
    throw CLI::ValidationError("unknown scenario: " + args.scenario);
  }
  req.direction = args.direction == "lower" ? Direction::Lower : Direction::Upper;
  apply_weight_overrides(req.weights, args.weight_overrides);
  return req;
}

int run_solve(const SolveArgs& args, bool benchmark_mode) {
  Feeder feeder = load_feeder(args.feeder_path);
  DoeRequest req = build_request(feeder, args);

  std::vector<Method> methods;
  for (const std::string& m : args.methods) methods.push_back(method_from_string(m));

  SolveOptions opt;
  opt.pwl_segments = args.pwl_segments;
  opt.bnb.time_limit_s = args.time_limit;
  opt.bnb.node_limit = args.node_limit;
  std::optional<SurrogateBundle> icnn, mlp;
  for (Method m : methods) {
    if ((m == Method::B1 || m == Method::B2) && !icnn) {
      icnn = load_bundle(args.models_dir, "icnn");
      opt.icnn = &*icnn;
    }
    if (m == Method::B4 && !mlp) {
      mlp = load_bundle(args.models_dir, "mlp");
      opt.mlp = &*mlp;
    }
  }

  BenchmarkReport report;
  report.environment = environment_fingerprint();
  for (Method m : methods) {
    std::vector<DoeResult> rows = solve_doe(feeder, req, m, opt);
    double mean_time = 0.0;
    for (const DoeResult& r : rows) mean_time += r.solve_time_s;
    std::cout << to_string(m) << ": " << rows.size() << " intervals, mean "
              << mean_time / rows.size() << " s\n";
    report.rows.insert(report.rows.end(), rows.begin(), rows.end());
  }

  fs::create_directories(args.out_dir);
  {
    std::ofstream out(args.out_dir + "/results.json", std::ios::binary);
    out << results_to_json(report.rows) << "\n";
  }
  write_results_csv(report.rows, args.out_dir + "/results.csv");
  if (benchmark_mode) {
    write_report_files(report, args.out_dir);
    write_report_markdown(report, args.out_dir + "/report.md");
    if (args.svg) {
      std::map<char, std::vector<double>> j1, times;
      for (const DoeResult& r : report.rows) {
        j1[static_cast<char>(r.method)].push_back(r.j1);
        times[static_cast<char>(r.method)].push_back(r.solve_time_s);
      }
      std::vector<std::string> labels;
      std::vector<std::vector<double>> j1_series, time_series;
      for (auto& [key, series] : j1) {
        labels.push_back(to_string(static_cast<Method>(key)));
        j1_series.push_back(series);
        time_series.push_back(times[key]);
      }
      write_series_svg(labels, j1_series, "J1 per interval", args.out_dir + "/series_j1.svg");
      write_series_svg(labels, time_series, "solve time per interval (s)",
                       args.out_dir + "/series_time.svg");
    }
  }
  std::cout << "results written to " << args.out_dir << "\n";
  return 0;
}

int run_report(const std::string& results_path, const std::string& out_path) {
  std::ifstream in(results_path, std::ios::binary);
  if (!in) throw MalformedFile("cannot open " + results_path);
  std::ostringstream ss;
  ss << in.rdbuf();
  BenchmarkReport report;
  report.rows = results_from_json(ss.str());
  report.environment = environment_fingerprint();
  write_report_markdown(report, out_path);
  std::cout << "report written to " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic operating envelope optimization for radial feeders"};
  app.require_subcommand(1);
  app.fallthrough();  // lets `doe <cmd> --config file` reach the global option
  app.set_config("--config", "", "JSON config file; command-line flags win");
  app.config_formatter(std::make_shared<JsonConfig>());

  GenerateArgs gen;
  CLI::App* cmd_gen = app.add_subcommand("generate-data",
                                         "Sample labeled power-flow snapshots");
  cmd_gen->configurable(true);
  cmd_gen->add_option("--feeder", gen.feeder_path, "Feeder JSON file")->required();
  cmd_gen->add_option("--out", gen.out_dir, "Output dataset directory")->required();
  cmd_gen->add_option("--n", gen.n, "Snapshot count");
  cmd_gen->add_option("--seed", gen.seed, "Sampling seed");
  cmd_gen->add_option("--common-range", gen.common_range, "Per-snapshot common scale range");
  cmd_gen->add_option("--p-range", gen.p_range, "Active-load multiplier range");
  cmd_gen->add_option("--q-range", gen.q_range, "Reactive-load multiplier range");

  TrainArgs tr;
  CLI::App* cmd_train = app.add_subcommand("train", "Train surrogate models");
  cmd_train->configurable(true);
  cmd_train->add_option("--feeder", tr.feeder_path, "Feeder JSON file")->required();
  cmd_train->add_option("--data", tr.data_dir, "Dataset directory")->required();
  cmd_train->add_option("--out", tr.out_dir, "Model output directory")->required();
  cmd_train->add_option("--kind", tr.kind, "icnn or mlp");
  cmd_train->add_flag("--no-retrench", tr.no_retrench, "Keep every output");
  cmd_train->add_option("--epochs", tr.epochs);
  cmd_train->add_option("--batch", tr.batch_size);
  cmd_train->add_option("--lr", tr.learning_rate);
  cmd_train->add_option("--patience", tr.patience);
  cmd_train->add_option("--val-frac", tr.val_fraction);
  cmd_train->add_option("--test-frac", tr.test_fraction);
  cmd_train->add_option("--seed", tr.seed);
  cmd_train->add_option("--arch", tr.arch, "Override hidden sizes, e.g. v=48,24")
      ->take_all();

  SolveArgs sv;
  CLI::App* cmd_solve = app.add_subcommand("solve", "Optimize envelopes for one method");
  CLI::App* cmd_bench = app.add_subcommand("benchmark", "Compare methods side by side");
  cmd_solve->configurable(true);
  cmd_bench->configurable(true);
  for (CLI::App* c : {cmd_solve, cmd_bench}) {
    c->add_option("--feeder", sv.feeder_path, "Feeder JSON file")->required();
    c->add_option("--models", sv.models_dir, "Model directory (learned methods)");
    c->add_option("--out", sv.out_dir, "Output directory")->required();
    c->add_option("--direction", sv.direction, "upper or lower");
    c->add_option("--scenario", sv.scenario, "stress-day or snapshot");
    c->add_option("--request", sv.request_path, "Explicit request JSON");
    c->add_option("--intervals", sv.intervals, "Interval count for scenarios");
    c->add_option("--load-scale", sv.load_scale, "Snapshot scenario load scale");
    c->add_option("--weights", sv.weight_overrides, "Override, e.g. w_v=1000")->take_all();
    c->add_option("--pwl-segments", sv.pwl_segments, "LinDistFlow loss segments");
    c->add_option("--time-limit", sv.time_limit, "Per-interval MILP time limit (s)");
    c->add_option("--node-limit", sv.node_limit, "MILP node limit");
  }
  cmd_solve->add_option("--method", sv.methods, "B0..B4")->expected(1);
  cmd_bench->add_option("--methods", sv.methods, "Comma list of B0..B4")->delimiter(',');
  cmd_bench->add_flag("--svg", sv.svg, "Also emit SVG series charts");

  std::string report_results, report_out = "report.md";
  CLI::App* cmd_report = app.add_subcommand("report", "Render a markdown report");
  cmd_report->configurable(true);
  cmd_report->add_option("--results", report_results, "results.json from a run")->required();
  cmd_report->add_option("--out", report_out, "Report path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_exit_code() == 0 ? 0 : 2;
  }

  try {
    if (cmd_gen->parsed()) return run_generate(gen);
    if (cmd_train->parsed()) return run_train(tr);
    if (cmd_solve->parsed()) return run_solve(sv, false);
    if (cmd_bench->parsed()) return run_solve(sv, true);
    if (cmd_report->parsed()) return run_report(report_results, report_out);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const MalformedFile& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::string what = e.what();
    if (what.find("unknown method") != std::string::npos) {
      std::cerr << "usage error: " << what << "\n";
      return 2;
    }
    std::cerr << "error: " << what << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
