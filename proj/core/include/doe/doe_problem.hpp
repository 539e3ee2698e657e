#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "doe/distflow.hpp"
#include "doe/feeder.hpp"
#include "doe/heads.hpp"
#include "doe/icnn.hpp"
#include "doe/lp.hpp"
#include "doe/milp.hpp"
#include "doe/retrench.hpp"

namespace doe {

enum class Direction : char { Upper = '+', Lower = '-' };
enum class Method : char { B0 = '0', B1 = '1', B2 = '2', B3 = '3', B4 = '4' };

const char* to_string(Method m);
const char* to_string(Direction d);
Method method_from_string(const std::string& s);

struct Weights {
  double w_doe = 1.0;
  double w_loss = 1.0;
  double w_v = 1e3;
  double w_ol = 1e3;
  double w_rpf = 1e3;

  void check() const;
};

// One optimization interval: monitored loads plus the aggregator's forecast
// DER limits. Vectors indexed like feeder.buses / der_list(feeder).
struct IntervalData {
  std::vector<double> load_p_kw;
  std::vector<double> load_q_kvar;
  std::vector<double> der_p_max_kw;
  std::vector<double> der_p_min_kw;
  std::vector<double> der_q_kvar;
};

struct DoeRequest {
  Direction direction = Direction::Upper;
  Weights weights;
  Limits limits;
  std::vector<IntervalData> intervals;

  void check(const Feeder& feeder) const;
};

struct DoeResult {
  int interval = 0;
  Method method = Method::B0;
  Direction direction = Direction::Upper;
  std::vector<double> envelope_kw;  // one per DER

  // Objective split: J = J1 + J2 + J3.
  double j1 = 0.0;
  double j2 = 0.0;
  double j3 = 0.0;
  double objective() const { return j1 + j2 + j3; }

  // Surrogate-side predictions at the optimum.
  double delta_v_pred = 0.0;
  double delta_ol_pred = 0.0;
  double delta_rpf_pred = 0.0;
  double loss_pred_kw = 0.0;

  // Oracle verification (power flow at the envelope setpoint).
  bool verified = false;
  double delta_v_true = 0.0;
  double delta_ol_true = 0.0;
  double delta_rpf_true = 0.0;
  double loss_true_kw = 0.0;

  double solve_time_s = 0.0;
  double milp_gap = 0.0;
  bool hit_limit = false;
};

// Trained surrogates for one feeder/retrench plan, folded to physical units.
struct SurrogateBundle {
  ReluNetwork loss_net;
  ReluNetwork v_net;
  ReluNetwork ol_net;
  ReluNetwork rpf_net;
  RetrenchPlan plan;

  const ReluNetwork& net(HeadKind k) const;
  void check_ready() const;  // folded, dimensions, w_z sign for ICNNs
};

struct SolveOptions {
  const SurrogateBundle* icnn = nullptr;  // B1, B2
  const SurrogateBundle* mlp = nullptr;   // B4
  int pwl_segments = 5;                   // B3 loss linearization
  BnbConfig bnb;                          // B2, B4
  LpOptions lp;
  bool verify = true;
};

// Variable map of a built instance; exposed for tests and result assembly.
struct DoeInstance {
  LpProblem lp;
  std::vector<int> binaries;        // empty for pure LP builds
  double objective_offset = 0.0;    // constant term of J1
  std::vector<int> der_vars;        // envelope variable per DER
  std::vector<int> x_vars;          // [p; q] net-load variables, 2|M|
  int delta_var[4] = {-1, -1, -1, -1};  // indexed by head order loss, v, ol, rpf
  // MILP builds: completion oracle deriving every ReLU phase from the
  // forward pass at a relaxation point's net loads.
  std::function<std::vector<std::pair<int, int>>(const std::vector<double>&)> phase_hint;
};

DoeInstance build_icnn_lp(const Feeder& feeder, const SurrogateBundle& models,
                          const DoeRequest& request, int t);
DoeInstance build_icnn_milp(const Feeder& feeder, const SurrogateBundle& models,
                            const DoeRequest& request, int t);

DoeResult evaluate_b0(const Feeder& feeder, const DoeRequest& request, int t);

std::vector<DoeResult> solve_doe(const Feeder& feeder, const DoeRequest& request,
                                 Method method, const SolveOptions& opt);
DoeResult solve_doe_interval(const Feeder& feeder, const DoeRequest& request,
                             Method method, int t, const SolveOptions& opt);

// Applies the envelope as the DER setpoint, runs the exact power flow and
// records true violation terms next to the surrogate predictions.
DoeResult verify_with_oracle(const Feeder& feeder, DoeResult result,
                             const DoeRequest& request, int t);

// Serialization of requests and result rows.
DoeRequest request_from_json(const std::string& text, const Feeder& feeder);
std::string request_to_json(const DoeRequest& request, const Feeder& feeder);
std::string results_to_json(const std::vector<DoeResult>& results);
std::vector<DoeResult> results_from_json(const std::string& text);
void write_results_csv(const std::vector<DoeResult>& results, const std::string& path);

// Model directory layout: <prefix>_loss.json, <prefix>_v.json, <prefix>_ol.json,
// <prefix>_rpf.json plus <prefix>_plan.json holding the retrench plan.
void save_bundle(const SurrogateBundle& bundle, const std::string& dir,
                 const std::string& prefix);
SurrogateBundle load_bundle(const std::string& dir, const std::string& prefix);

}  // namespace doe
