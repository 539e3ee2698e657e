#include "doe/icnn.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "doe/errors.hpp"
#include "doe/rng.hpp"

namespace doe {

using nlohmann::json;

const char* to_string(HeadKind k) {
  switch (k) {
    case HeadKind::Loss: return "loss";
    case HeadKind::Voltage: return "v";
    case HeadKind::Overload: return "ol";
    case HeadKind::ReverseFlow: return "rpf";
  }
  return "?";
}

HeadKind head_kind_from_string(const std::string& s) {
  if (s == "loss") return HeadKind::Loss;
  if (s == "v") return HeadKind::Voltage;
  if (s == "ol") return HeadKind::Overload;
  if (s == "rpf") return HeadKind::ReverseFlow;
  throw Error("unknown head kind: " + s);
}

bool Normalization::identity() const {
  auto all_equal = [](const Eigen::VectorXd& v, double val) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (v[i] != val) return false;
    }
    return true;
  };
  if (input_mean.size() == 0 && output_mean.size() == 0) return true;
  return all_equal(input_mean, 0.0) && all_equal(input_scale, 1.0) &&
         all_equal(output_mean, 0.0) && all_equal(output_scale, 1.0);
}

int ReluNetwork::input_dim() const {
  if (layers.empty()) return 0;
  return static_cast<int>(layers.front().w_x.cols());
}

int ReluNetwork::output_dim() const {
  if (layers.empty()) return 0;
  const Layer& out = layers.back();
  return static_cast<int>(out.w_z.size() ? out.w_z.rows() : out.w_x.rows());
}

bool ReluNetwork::z_weights_nonnegative() const {
  for (std::size_t k = 1; k < layers.size(); ++k) {
    if (layers[k].w_z.size() && layers[k].w_z.minCoeff() < 0.0) return false;
  }
  return true;
}

void ReluNetwork::check_valid() const {
  if (layers.size() < 2) throw Error("network needs at least one hidden stage");
  const int in = input_dim();
  Eigen::Index prev = layers.front().w_x.rows();
  if (layers.front().b.size() != prev) throw Error("stage 0 bias dimension mismatch");
  for (std::size_t k = 1; k < layers.size(); ++k) {
    const Layer& L = layers[k];
    if (L.w_z.size() == 0) throw Error("stage " + std::to_string(k) + " missing w_z");
    if (L.w_z.cols() != prev) throw Error("stage " + std::to_string(k) + " w_z cols mismatch");
    if (L.w_x.size() && L.w_x.cols() != in) {
      throw Error("stage " + std::to_string(k) + " passthrough cols mismatch");
    }
    if (L.w_x.size() && L.w_x.rows() != L.w_z.rows()) {
      throw Error("stage " + std::to_string(k) + " passthrough rows mismatch");
    }
    if (L.b.size() != L.w_z.rows()) throw Error("stage " + std::to_string(k) + " bias mismatch");
    prev = L.w_z.rows();
  }
  if (kind == NetKind::Icnn) {
    for (std::size_t k = 1; k < layers.size(); ++k) {
      if (layers[k].w_x.size() == 0) throw Error("ICNN stage missing passthrough");
    }
    if (!z_weights_nonnegative()) throw Error("ICNN has negative w_z entries");
  }
}

namespace {

Eigen::VectorXd propagate(const ReluNetwork& net, const Eigen::VectorXd& x) {
  Eigen::VectorXd z = (net.layers[0].w_x * x + net.layers[0].b).cwiseMax(0.0);
  for (std::size_t k = 1; k + 1 < net.layers.size(); ++k) {
    const Layer& L = net.layers[k];
    Eigen::VectorXd a = L.w_z * z + L.b;
    if (L.w_x.size()) a += L.w_x * x;
    z = a.cwiseMax(0.0);
  }
  const Layer& out = net.layers.back();
  Eigen::VectorXd y = out.w_z * z + out.b;
  if (out.w_x.size()) y += out.w_x * x;
  return y;
}

}  // namespace

Eigen::VectorXd ReluNetwork::forward(const Eigen::VectorXd& x) const {
  if (x.size() != input_dim()) throw DimensionMismatch("forward: input length mismatch");
  if (norm.folded || norm.identity()) return propagate(*this, x);
  Eigen::VectorXd xn =
      (x - norm.input_mean).cwiseQuotient(norm.input_scale);
  Eigen::VectorXd yn = propagate(*this, xn);
  return yn.cwiseProduct(norm.output_scale) + norm.output_mean;
}

Eigen::MatrixXd ReluNetwork::forward_batch(const Eigen::MatrixXd& x_rows) const {
  Eigen::MatrixXd out(x_rows.rows(), output_dim());
  for (Eigen::Index r = 0; r < x_rows.rows(); ++r) {
    out.row(r) = forward(x_rows.row(r).transpose()).transpose();
  }
  return out;
}

ReluNetwork make_network(NetKind kind, HeadKind head, int input_dim,
                         const std::vector<int>& hidden, int output_dim,
                         std::uint64_t seed) {
  if (input_dim < 1 || output_dim < 1 || hidden.empty()) {
    throw Error("network dimensions must be positive");
  }
  Rng rng(seed);
  ReluNetwork net;
  net.kind = kind;
  net.head = head;

  auto uniform_mat = [&](Eigen::Index rows, Eigen::Index cols, double limit) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(-limit, limit);
    }
    return m;
  };

  std::vector<int> widths = hidden;
  widths.push_back(output_dim);
  int prev = 0;
  for (std::size_t k = 0; k < widths.size(); ++k) {
    Layer L;
    const int rows = widths[k];
    const double x_limit = 1.0 / std::sqrt(static_cast<double>(input_dim));
    if (k == 0) {
      L.w_x = uniform_mat(rows, input_dim, x_limit);
    } else {
      const double z_limit = 1.0 / std::sqrt(static_cast<double>(prev));
      L.w_z = uniform_mat(rows, prev, z_limit);
      if (kind == NetKind::Icnn) {
        L.w_z = L.w_z.cwiseAbs();  // start inside the feasible weight set
        L.w_x = uniform_mat(rows, input_dim, x_limit);
      }
    }
    L.b = uniform_mat(rows, 1, x_limit);
    net.layers.push_back(std::move(L));
    prev = rows;
  }
  net.check_valid();
  return net;
}

void project_nonnegative(ReluNetwork& net) {
  for (std::size_t k = 1; k < net.layers.size(); ++k) {
    if (net.layers[k].w_z.size()) {
      net.layers[k].w_z = net.layers[k].w_z.cwiseMax(0.0);
    }
  }
}

void fold_normalization(ReluNetwork& net) {
  if (net.norm.folded) throw Error("normalization already folded");
  if (net.norm.identity()) {
    net.norm.folded = true;
    return;
  }
  const Eigen::VectorXd& im = net.norm.input_mean;
  const Eigen::VectorXd& is = net.norm.input_scale;
  const Eigen::VectorXd& om = net.norm.output_mean;
  const Eigen::VectorXd& os = net.norm.output_scale;
  if (im.size() != net.input_dim() || om.size() != net.output_dim()) {
    throw DimensionMismatch("normalization record does not match network");
  }
  if (os.minCoeff() <= 0.0) {
    throw Error("NegativeOutputScale: output scale must be positive to fold");
  }
  for (Layer& L : net.layers) {
    if (L.w_x.size() == 0) continue;
    for (Eigen::Index j = 0; j < L.w_x.cols(); ++j) L.w_x.col(j) /= is[j];
    L.b -= L.w_x * im;
  }
  Layer& out = net.layers.back();
  for (Eigen::Index i = 0; i < out.w_z.rows(); ++i) {
    out.w_z.row(i) *= os[i];
    if (out.w_x.size()) out.w_x.row(i) *= os[i];
  }
  out.b = out.b.cwiseProduct(os) + om;
  net.norm.folded = true;
}

Eigen::VectorXd exact_inference_lp(const ReluNetwork& net, const Eigen::VectorXd& x,
                                   const LpOptions& opt) {
  net.check_valid();
  if (!net.z_weights_nonnegative()) {
    throw BuildError("exact inference requires nonnegative w_z");
  }
  if (x.size() != net.input_dim()) throw DimensionMismatch("input length mismatch");

  const bool use_norm = !net.norm.folded && !net.norm.identity();
  Eigen::VectorXd xe = use_norm
                           ? ((x - net.norm.input_mean).cwiseQuotient(net.norm.input_scale))
                           : x;

  LpProblem lp;
  std::vector<std::vector<int>> z_vars(net.layers.size() - 1);
  for (std::size_t k = 0; k + 1 < net.layers.size(); ++k) {
    const int width = static_cast<int>(net.layers[k].b.size());
    for (int i = 0; i < width; ++i) {
      z_vars[k].push_back(
          lp.add_variable("z" + std::to_string(k) + "_" + std::to_string(i), 0.0, kInf));
    }
  }
  std::vector<int> y_vars;
  for (int i = 0; i < net.output_dim(); ++i) {
    y_vars.push_back(lp.add_variable("y" + std::to_string(i), -kInf, kInf, 1.0));
  }

  for (std::size_t k = 0; k + 1 < net.layers.size(); ++k) {
    const Layer& L = net.layers[k];
    Eigen::VectorXd rhs = L.b;
    if (L.w_x.size()) rhs += L.w_x * xe;
    for (std::size_t i = 0; i < z_vars[k].size(); ++i) {
      LpRow row;
      row.terms.push_back({z_vars[k][i], 1.0});
      if (k > 0) {
        for (std::size_t j = 0; j < z_vars[k - 1].size(); ++j) {
          double w = L.w_z(i, j);
          if (w != 0.0) row.terms.push_back({z_vars[k - 1][j], -w});
        }
      }
      row.rel = Rel::GE;
      row.rhs = rhs[i];
      lp.add_row(std::move(row));
    }
  }
  const Layer& out = net.layers.back();
  Eigen::VectorXd rhs = out.b;
  if (out.w_x.size()) rhs += out.w_x * xe;
  const auto& zk = z_vars.back();
  for (int i = 0; i < net.output_dim(); ++i) {
    LpRow row;
    row.terms.push_back({y_vars[i], 1.0});
    for (std::size_t j = 0; j < zk.size(); ++j) {
      double w = out.w_z(i, j);
      if (w != 0.0) row.terms.push_back({zk[j], -w});
    }
    row.rel = Rel::GE;
    row.rhs = rhs[i];
    lp.add_row(std::move(row));
  }

  LpSolution sol = solve_lp(lp, opt);
  if (sol.status != LpStatus::Optimal) {
    throw SolverFailure(std::string("exact inference LP: ") + to_string(sol.status));
  }
  Eigen::VectorXd y(net.output_dim());
  for (int i = 0; i < net.output_dim(); ++i) y[i] = sol.x[y_vars[i]];
  if (use_norm) {
    y = y.cwiseProduct(net.norm.output_scale) + net.norm.output_mean;
  }
  return y;
}

namespace {

json matrix_to_json(const Eigen::MatrixXd& m) {
  json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  j["data"] = data;
  return j;
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  Eigen::Index rows = j.at("rows").get<Eigen::Index>();
  Eigen::Index cols = j.at("cols").get<Eigen::Index>();
  const auto& data = j.at("data");
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw MalformedFile("matrix payload size mismatch");
  }
  Eigen::MatrixXd m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[k++].get<double>();
  }
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) {
  std::vector<double> data(v.data(), v.data() + v.size());
  return json(data);
}

Eigen::VectorXd vector_from_json(const json& j) {
  std::vector<double> data = j.get<std::vector<double>>();
  return Eigen::Map<Eigen::VectorXd>(data.data(), static_cast<Eigen::Index>(data.size()));
}

}  // namespace

std::string network_to_json(const ReluNetwork& net) {
  json j;
  j["schema_version"] = 1;
  j["kind"] = net.kind == NetKind::Icnn ? "icnn" : "mlp";
  j["head"] = to_string(net.head);
  j["output_ids"] = net.output_ids;
  j["train_fingerprint"] = net.train_fingerprint;
  j["retrench_fingerprint"] = net.retrench_fingerprint;
  json layers = json::array();
  for (const Layer& L : net.layers) {
    json jl;
    jl["w_z"] = matrix_to_json(L.w_z);
    jl["w_x"] = matrix_to_json(L.w_x);
    jl["b"] = vector_to_json(L.b);
    layers.push_back(std::move(jl));
  }
  j["layers"] = std::move(layers);
  json jn;
  jn["input_mean"] = vector_to_json(net.norm.input_mean);
  jn["input_scale"] = vector_to_json(net.norm.input_scale);
  jn["output_mean"] = vector_to_json(net.norm.output_mean);
  jn["output_scale"] = vector_to_json(net.norm.output_scale);
  jn["folded"] = net.norm.folded;
  j["normalization"] = std::move(jn);
  return j.dump(2);
}

ReluNetwork network_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw MalformedFile(std::string("model JSON parse error: ") + e.what());
  }
  ReluNetwork net;
  try {
    net.kind = j.at("kind").get<std::string>() == "icnn" ? NetKind::Icnn : NetKind::Mlp;
    net.head = head_kind_from_string(j.at("head").get<std::string>());
    net.output_ids = j.at("output_ids").get<std::vector<int>>();
    net.train_fingerprint = j.value("train_fingerprint", 0ULL);
    net.retrench_fingerprint = j.value("retrench_fingerprint", 0ULL);
    for (const auto& jl : j.at("layers")) {
      Layer L;
      L.w_z = matrix_from_json(jl.at("w_z"));
      L.w_x = matrix_from_json(jl.at("w_x"));
      L.b = vector_from_json(jl.at("b"));
      net.layers.push_back(std::move(L));
    }
    const auto& jn = j.at("normalization");
    net.norm.input_mean = vector_from_json(jn.at("input_mean"));
    net.norm.input_scale = vector_from_json(jn.at("input_scale"));
    net.norm.output_mean = vector_from_json(jn.at("output_mean"));
    net.norm.output_scale = vector_from_json(jn.at("output_scale"));
    net.norm.folded = jn.at("folded").get<bool>();
  } catch (const json::exception& e) {
    throw MalformedFile(std::string("model JSON structure error: ") + e.what());
  }
  net.check_valid();
  return net;
}

void save_network(const ReluNetwork& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << network_to_json(net) << "\n";
}

ReluNetwork load_network(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MalformedFile("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return network_from_json(ss.str());
}

}  // namespace doe
