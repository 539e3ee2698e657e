#include "doe/training.hpp"

#include <algorithm>
#include <cmath>

#include "doe/errors.hpp"
#include "doe/rng.hpp"

namespace doe {

void TrainConfig::check() const {
  if (epochs < 0 || batch_size < 1 || learning_rate <= 0.0 || patience < 1 ||
      validation_fraction < 0.0 || validation_fraction >= 1.0) {
    throw Error("invalid training configuration");
  }
}

// Targets carry the output-sign convention of each head so that every model
// output is itself the quantity entering 1' max(y + eps, 0): the voltage
// model learns the stacked [V; -V] and the reverse-flow model learns -P.
// Teaching the mirrored block as genuine network outputs keeps all final
// feedforward rows nonnegative, which the tight LP relaxation relies on.
Eigen::MatrixXd head_targets(const SnapshotSet& set, HeadKind head,
                             const RetrenchPlan& plan) {
  switch (head) {
    case HeadKind::Loss:
      return set.loss_kw;
    case HeadKind::Voltage: {
      const std::size_t n = plan.v_buses.size();
      Eigen::MatrixXd t(set.rows(), 2 * n);
      for (std::size_t c = 0; c < n; ++c) {
        t.col(c) = set.v_pu.col(plan.v_buses[c]);
        t.col(n + c) = -set.v_pu.col(plan.v_buses[c]);
      }
      return t;
    }
    case HeadKind::Overload: {
      Eigen::MatrixXd t(set.rows(), plan.i_lines.size());
      for (std::size_t c = 0; c < plan.i_lines.size(); ++c) {
        t.col(c) = set.i_a.col(plan.i_lines[c]);
      }
      return t;
    }
    case HeadKind::ReverseFlow: {
      Eigen::MatrixXd t(set.rows(), plan.rpf_lines.size());
      for (std::size_t c = 0; c < plan.rpf_lines.size(); ++c) {
        t.col(c) = -set.p_flow_kw.col(plan.rpf_lines[c]);
      }
      return t;
    }
  }
  throw Error("unreachable head kind");
}

std::vector<int> head_output_ids(const Feeder& feeder, HeadKind head,
                                 const RetrenchPlan& plan) {
  (void)feeder;
  switch (head) {
    case HeadKind::Loss: return {0};
    case HeadKind::Voltage: {
      std::vector<int> ids = plan.v_buses;  // upper block, then the mirror
      ids.insert(ids.end(), plan.v_buses.begin(), plan.v_buses.end());
      return ids;
    }
    case HeadKind::Overload: return plan.i_lines;
    case HeadKind::ReverseFlow: return plan.rpf_lines;
  }
  throw Error("unreachable head kind");
}

namespace {

// Forward over a column-major batch, keeping activations for backprop.
struct BatchCache {
  std::vector<Eigen::MatrixXd> z;  // post-ReLU activations per hidden stage
  std::vector<Eigen::MatrixXd> a;  // preactivations per hidden stage
  Eigen::MatrixXd y;
};

BatchCache forward_cached(const ReluNetwork& net, const Eigen::MatrixXd& x_cols) {
  BatchCache cache;
  const auto ones = Eigen::RowVectorXd::Ones(x_cols.cols());
  Eigen::MatrixXd a = net.layers[0].w_x * x_cols + net.layers[0].b * ones;
  cache.a.push_back(a);
  cache.z.push_back(a.cwiseMax(0.0));
  for (std::size_t k = 1; k + 1 < net.layers.size(); ++k) {
    const Layer& L = net.layers[k];
    a = L.w_z * cache.z.back() + L.b * ones;
    if (L.w_x.size()) a += L.w_x * x_cols;
    cache.a.push_back(a);
    cache.z.push_back(a.cwiseMax(0.0));
  }
  const Layer& out = net.layers.back();
  cache.y = out.w_z * cache.z.back() + out.b * ones;
  if (out.w_x.size()) cache.y += out.w_x * x_cols;
  return cache;
}

struct Gradients {
  std::vector<Layer> g;  // same shapes as net.layers
};

double backward(const ReluNetwork& net, const Eigen::MatrixXd& x_cols,
                const Eigen::MatrixXd& t_cols, Gradients& grads) {
  BatchCache cache = forward_cached(net, x_cols);
  const double denom = static_cast<double>(cache.y.rows() * cache.y.cols());
  Eigen::MatrixXd diff = cache.y - t_cols;
  double loss = diff.squaredNorm() / denom;

  grads.g.clear();
  grads.g.resize(net.layers.size());

  Eigen::MatrixXd dout = 2.0 * diff / denom;
  const std::size_t last = net.layers.size() - 1;
  const Layer& out = net.layers[last];
  grads.g[last].w_z = dout * cache.z.back().transpose();
  if (out.w_x.size()) grads.g[last].w_x = dout * x_cols.transpose();
  grads.g[last].b = dout.rowwise().sum();

  Eigen::MatrixXd dz = out.w_z.transpose() * dout;
  for (std::size_t k = last; k-- > 0;) {
    const Layer& L = net.layers[k];
    Eigen::MatrixXd da =
        dz.cwiseProduct((cache.a[k].array() > 0.0).cast<double>().matrix());
    if (k > 0) {
      grads.g[k].w_z = da * cache.z[k - 1].transpose();
    }
    if (L.w_x.size()) grads.g[k].w_x = da * x_cols.transpose();
    grads.g[k].b = da.rowwise().sum();
    if (k > 0) dz = L.w_z.transpose() * da;
  }
  return loss;
}

long parameter_count(const ReluNetwork& net) {
  long n = 0;
  for (const Layer& L : net.layers) n += L.w_z.size() + L.w_x.size() + L.b.size();
  return n;
}

void axpy_into(Eigen::VectorXd& flat, long& pos, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) flat[pos++] = m(r, c);
  }
}

void read_from(const Eigen::VectorXd& flat, long& pos, Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = flat[pos++];
  }
}

}  // namespace

Eigen::VectorXd flatten_parameters(const ReluNetwork& net) {
  Eigen::VectorXd flat(parameter_count(net));
  long pos = 0;
  for (const Layer& L : net.layers) {
    axpy_into(flat, pos, L.w_z);
    axpy_into(flat, pos, L.w_x);
    axpy_into(flat, pos, L.b);
  }
  return flat;
}

void unflatten_parameters(ReluNetwork& net, const Eigen::VectorXd& theta) {
  if (theta.size() != parameter_count(net)) {
    throw DimensionMismatch("parameter vector length mismatch");
  }
  long pos = 0;
  for (Layer& L : net.layers) {
    read_from(theta, pos, L.w_z);
    read_from(theta, pos, L.w_x);
    Eigen::MatrixXd b = L.b;
    read_from(theta, pos, b);
    L.b = b;
  }
}

double mse_loss(const ReluNetwork& net, const Eigen::MatrixXd& x_rows,
                const Eigen::MatrixXd& y_rows) {
  BatchCache cache = forward_cached(net, x_rows.transpose());
  Eigen::MatrixXd diff = cache.y - y_rows.transpose();
  return diff.squaredNorm() / static_cast<double>(diff.rows() * diff.cols());
}

Eigen::VectorXd mse_gradient(const ReluNetwork& net, const Eigen::MatrixXd& x_rows,
                             const Eigen::MatrixXd& y_rows) {
  Gradients grads;
  backward(net, x_rows.transpose(), y_rows.transpose(), grads);
  Eigen::VectorXd flat(parameter_count(net));
  long pos = 0;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const Layer& L = net.layers[k];
    Eigen::MatrixXd gz = grads.g[k].w_z.size() ? grads.g[k].w_z
                                               : Eigen::MatrixXd::Zero(L.w_z.rows(), L.w_z.cols());
    Eigen::MatrixXd gx = grads.g[k].w_x.size() ? grads.g[k].w_x
                                               : Eigen::MatrixXd::Zero(L.w_x.rows(), L.w_x.cols());
    axpy_into(flat, pos, gz);
    axpy_into(flat, pos, gx);
    axpy_into(flat, pos, grads.g[k].b);
  }
  return flat;
}

TrainReport train(ReluNetwork& net, const Eigen::MatrixXd& train_x,
                  const Eigen::MatrixXd& train_y, const Eigen::MatrixXd& val_x,
                  const Eigen::MatrixXd& val_y, const TrainConfig& cfg) {
  cfg.check();
  net.check_valid();
  if (train_x.cols() != net.input_dim()) {
    throw DimensionMismatch("training inputs do not match network input");
  }
  if (train_y.cols() != net.output_dim()) {
    throw DimensionMismatch("data/head mismatch: target columns != network outputs");
  }
  if (train_x.rows() != train_y.rows() || train_x.rows() < 1) {
    throw DimensionMismatch("training rows mismatch");
  }

  TrainReport report;
  if (cfg.epochs == 0) return report;  // zero-epoch contract: model untouched

  // Standardize on training statistics only.
  Normalization norm;
  norm.input_mean = train_x.colwise().mean();
  norm.output_mean = train_y.colwise().mean();
  auto col_scale = [](const Eigen::MatrixXd& m, const Eigen::VectorXd& mean) {
    Eigen::VectorXd s(m.cols());
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      double var = (m.col(c).array() - mean[c]).square().mean();
      s[c] = std::sqrt(std::max(var, 0.0));
      if (s[c] < 1e-12) s[c] = 1.0;  // constant column
    }
    return s;
  };
  norm.input_scale = col_scale(train_x, norm.input_mean);
  norm.output_scale = col_scale(train_y, norm.output_mean);

  auto normalize = [](const Eigen::MatrixXd& m, const Eigen::VectorXd& mean,
                      const Eigen::VectorXd& scale) {
    Eigen::MatrixXd out = m;
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      out.col(c) = (m.col(c).array() - mean[c]) / scale[c];
    }
    return out;
  };

  Eigen::MatrixXd xn = normalize(train_x, norm.input_mean, norm.input_scale);
  Eigen::MatrixXd tn = normalize(train_y, norm.output_mean, norm.output_scale);
  Eigen::MatrixXd xv, tv;
  if (val_x.rows() > 0) {
    xv = normalize(val_x, norm.input_mean, norm.input_scale);
    tv = normalize(val_y, norm.output_mean, norm.output_scale);
  } else if (cfg.validation_fraction > 0.0 && train_x.rows() >= 10) {
    // Carve a deterministic validation slice off the shuffled training set.
    int n = static_cast<int>(xn.rows());
    int n_val = std::max(1, static_cast<int>(cfg.validation_fraction * n));
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    Rng carve(cfg.seed ^ 0x5eedfeedULL);
    carve.shuffle(idx);
    Eigen::MatrixXd x2(n - n_val, xn.cols()), t2(n - n_val, tn.cols());
    xv.resize(n_val, xn.cols());
    tv.resize(n_val, tn.cols());
    for (int i = 0; i < n_val; ++i) {
      xv.row(i) = xn.row(idx[i]);
      tv.row(i) = tn.row(idx[i]);
    }
    for (int i = n_val; i < n; ++i) {
      x2.row(i - n_val) = xn.row(idx[i]);
      t2.row(i - n_val) = tn.row(idx[i]);
    }
    xn = std::move(x2);
    tn = std::move(t2);
  }
  const bool have_val = xv.rows() > 0;

  const long n_params = parameter_count(net);
  Eigen::VectorXd adam_m = Eigen::VectorXd::Zero(n_params);
  Eigen::VectorXd adam_v = Eigen::VectorXd::Zero(n_params);
  long adam_t = 0;
  const double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;

  Rng rng(cfg.seed);
  std::vector<int> order(xn.rows());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  double best_val = kInf;
  Eigen::VectorXd best_theta;
  int best_epoch = -1;
  int misses = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    // Cosine decay to one percent of the base rate over the epoch budget;
    // constant-rate Adam plateaus well short of the accuracy the binding
    // constraints need.
    double lr = cfg.learning_rate *
                (0.01 + 0.99 * 0.5 *
                            (1.0 + std::cos(M_PI * static_cast<double>(epoch) /
                                            std::max(1, cfg.epochs))));
    rng.shuffle(order);
    double epoch_loss = 0.0;
    long seen = 0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      std::size_t end = std::min(order.size(), start + cfg.batch_size);
      Eigen::MatrixXd xb(net.input_dim(), end - start);
      Eigen::MatrixXd tb(net.output_dim(), end - start);
      for (std::size_t i = start; i < end; ++i) {
        xb.col(i - start) = xn.row(order[i]).transpose();
        tb.col(i - start) = tn.row(order[i]).transpose();
      }
      Gradients grads;
      double loss = backward(net, xb, tb, grads);
      if (!std::isfinite(loss)) throw DivergedLoss("training loss is not finite");
      epoch_loss += loss * static_cast<double>(end - start);
      seen += static_cast<long>(end - start);

      // Flattened optimizer step.
      Eigen::VectorXd theta = flatten_parameters(net);
      Eigen::VectorXd g(n_params);
      long pos = 0;
      for (std::size_t k = 0; k < net.layers.size(); ++k) {
        const Layer& L = net.layers[k];
        Eigen::MatrixXd gz = grads.g[k].w_z.size()
                                 ? grads.g[k].w_z
                                 : Eigen::MatrixXd::Zero(L.w_z.rows(), L.w_z.cols());
        Eigen::MatrixXd gx = grads.g[k].w_x.size()
                                 ? grads.g[k].w_x
                                 : Eigen::MatrixXd::Zero(L.w_x.rows(), L.w_x.cols());
        axpy_into(g, pos, gz);
        axpy_into(g, pos, gx);
        axpy_into(g, pos, grads.g[k].b);
      }
      if (cfg.optimizer == Optimizer::Adam) {
        ++adam_t;
        adam_m = beta1 * adam_m + (1.0 - beta1) * g;
        adam_v = beta2 * adam_v + (1.0 - beta2) * g.cwiseProduct(g);
        double c1 = 1.0 - std::pow(beta1, static_cast<double>(adam_t));
        double c2 = 1.0 - std::pow(beta2, static_cast<double>(adam_t));
        Eigen::VectorXd step =
            (adam_m / c1).cwiseQuotient(((adam_v / c2).cwiseSqrt().array() + adam_eps).matrix());
        theta -= lr * step;
      } else {
        theta -= lr * g;
      }
      unflatten_parameters(net, theta);
      if (net.kind == NetKind::Icnn) project_nonnegative(net);
    }
    report.train_loss.push_back(epoch_loss / static_cast<double>(seen));

    if (have_val) {
      double vl = mse_loss(net, xv, tv);
      report.val_loss.push_back(vl);
      if (vl < best_val - 1e-12) {
        best_val = vl;
        best_theta = flatten_parameters(net);
        best_epoch = epoch;
        misses = 0;
      } else if (++misses >= cfg.patience) {
        break;
      }
    }
  }

  if (have_val && best_theta.size() > 0) {
    unflatten_parameters(net, best_theta);
    if (net.kind == NetKind::Icnn) project_nonnegative(net);
    report.best_epoch = best_epoch;
  }
  net.norm = std::move(norm);
  return report;
}

double nmae(const ReluNetwork& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
            double normalizer) {
  if (x.rows() == 0) throw Error("EmptyTestSet: nmae needs at least one row");
  if (normalizer <= 0.0) throw Error("nmae normalizer must be positive");
  if (x.cols() != net.input_dim() || y.cols() != net.output_dim() || x.rows() != y.rows()) {
    throw DimensionMismatch("nmae data does not match network");
  }
  Eigen::MatrixXd pred = net.forward_batch(x);
  double mae = (pred - y).cwiseAbs().mean();
  return mae / normalizer;
}

}  // namespace doe
