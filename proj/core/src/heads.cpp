#include "doe/heads.hpp"

#include <algorithm>

#include "doe/errors.hpp"

namespace doe {

Eigen::VectorXd ViolationHead::stack(const Eigen::VectorXd& model_output) const {
  Eigen::VectorXd s(stacked_dim());
  for (int k = 0; k < stacked_dim(); ++k) {
    s[k] = sign[k] * model_output[row[k]] + eps[k];
  }
  return s;
}

ViolationHead make_head(const Feeder& feeder, const Limits& limits,
                        const RetrenchPlan& plan, const ReluNetwork& net) {
  if (limits.i_max_a.size() != feeder.lines.size() ||
      limits.p_min_kw.size() != feeder.lines.size()) {
    throw DimensionMismatch("limit vectors do not match feeder line count");
  }
  ViolationHead head;
  head.kind = net.head;

  auto expect_ids = [&](const std::vector<int>& ids) {
    if (net.output_ids != ids) {
      throw Error("HeadLimitMismatch: model outputs do not match retrench plan");
    }
  };

  switch (net.head) {
    case HeadKind::Loss: {
      if (net.output_dim() != 1) throw Error("loss head must have scalar output");
      head.row = {0};
      head.sign = {1.0};
      head.eps = Eigen::VectorXd::Zero(1);
      break;
    }
    case HeadKind::Voltage: {
      // Model outputs are already the stacked [V; -V].
      std::vector<int> ids = plan.v_buses;
      ids.insert(ids.end(), plan.v_buses.begin(), plan.v_buses.end());
      expect_ids(ids);
      const int n = static_cast<int>(plan.v_buses.size());
      head.eps.resize(2 * n);
      for (int k = 0; k < n; ++k) {  // upper block: V - V_max <= 0
        head.row.push_back(k);
        head.sign.push_back(1.0);
        head.eps[k] = -limits.v_max_pu;
      }
      for (int k = 0; k < n; ++k) {  // lower block: V_min - V <= 0
        head.row.push_back(n + k);
        head.sign.push_back(1.0);
        head.eps[n + k] = limits.v_min_pu;
      }
      break;
    }
    case HeadKind::Overload: {
      expect_ids(plan.i_lines);
      const int n = static_cast<int>(plan.i_lines.size());
      head.eps.resize(n);
      for (int k = 0; k < n; ++k) {
        head.row.push_back(k);
        head.sign.push_back(1.0);
        head.eps[k] = -limits.i_max_a[plan.i_lines[k]];
      }
      break;
    }
    case HeadKind::ReverseFlow: {
      // Model outputs are -P, so the threshold is P_min directly.
      expect_ids(plan.rpf_lines);
      const int n = static_cast<int>(plan.rpf_lines.size());
      head.eps.resize(n);
      for (int k = 0; k < n; ++k) {  // P_min - P <= 0
        head.row.push_back(k);
        head.sign.push_back(1.0);
        head.eps[k] = limits.p_min_kw[plan.rpf_lines[k]];
      }
      break;
    }
  }
  return head;
}

double violation(const ViolationHead& head, const Eigen::VectorXd& model_output) {
  for (int r : head.row) {
    if (r < 0 || r >= model_output.size()) {
      throw DimensionMismatch("head rows exceed model output length");
    }
  }
  Eigen::VectorXd s = head.stack(model_output);
  return s.cwiseMax(0.0).sum();
}

}  // namespace doe
