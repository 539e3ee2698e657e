#include "doe/lp.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>

#include <Eigen/Dense>

#include "doe/errors.hpp"

namespace doe {

int LpProblem::add_variable(std::string name, double lo, double hi, double cost) {
  if (std::isnan(lo) || std::isnan(hi) || lo > hi) {
    throw Error("bad bounds for variable " + name);
  }
  if (!std::isfinite(cost)) throw Error("non-finite cost for variable " + name);
  cost_.push_back(cost);
  lo_.push_back(lo);
  hi_.push_back(hi);
  names_.push_back(std::move(name));
  return variable_count() - 1;
}

void LpProblem::add_row(LpRow row) {
  for (auto& [v, coef] : row.terms) {
    if (v < 0 || v >= variable_count()) throw Error("row term references unknown variable");
    if (!std::isfinite(coef)) throw Error("non-finite coefficient in row " + row.name);
  }
  if (!std::isfinite(row.rhs)) throw Error("non-finite rhs in row " + row.name);
  rows_.push_back(std::move(row));
}

void LpProblem::set_cost(int var, double cost) { cost_.at(var) = cost; }

void LpProblem::set_bounds(int var, double lo, double hi) {
  if (lo > hi) throw Error("bad bounds");
  lo_.at(var) = lo;
  hi_.at(var) = hi;
}

const char* to_string(LpStatus s) {
  switch (s) {
    case LpStatus::Optimal: return "Optimal";
    case LpStatus::Infeasible: return "Infeasible";
    case LpStatus::Unbounded: return "Unbounded";
    case LpStatus::IterLimit: return "IterLimit";
  }
  return "?";
}

int add_abs_term(LpProblem& p, int var, double center, double weight) {
  if (weight < 0.0) throw Error("NegativeWeight: abs-term weight must be >= 0");
  int aux = p.add_variable("abs_" + p.variable_name(var), 0.0, kInf, weight);
  p.add_row({{{var, 1.0}, {aux, -1.0}}, Rel::LE, center, ""});
  p.add_row({{{var, 1.0}, {aux, 1.0}}, Rel::GE, center, ""});
  return aux;
}

namespace {

enum class VarState : char { Basic, AtLower, AtUpper, NonbasicFree };

// Bounded-variable revised simplex over the computational form
//   min c'x  s.t.  A x + s = b
// with one logical column s_r per row whose bounds encode the relation.
// The basis inverse is kept as a dense LU factorization plus a product-form
// eta file, refactorized periodically.
class Simplex {
 public:
  Simplex(const LpProblem& p, const LpOptions& opt) : p_(p), opt_(opt) {}

  LpSolution run();

 private:
  const LpProblem& p_;
  LpOptions opt_;

  int n_ = 0;       // structural count (original problem)
  int m_ = 0;       // row count
  int ncol_ = 0;    // structurals + logicals + artificials

  std::vector<std::vector<std::pair<int, double>>> cols_;
  std::vector<double> lo_, hi_, cost_, phase1_cost_;
  std::vector<double> b_;
  std::vector<VarState> state_;
  std::vector<double> xval_;    // current value per column
  std::vector<int> basis_;      // column basic in each row

  Eigen::PartialPivLU<Eigen::MatrixXd> lu_;
  struct Eta {
    int row;
    Eigen::VectorXd w;
  };
  std::vector<Eta> etas_;
  static constexpr int kRefactorEvery = 100;

  long iterations_ = 0;
  bool bland_ = false;
  int stall_count_ = 0;
  double last_objective_ = kInf;

  void build();
  void factorize();
  Eigen::VectorXd ftran(Eigen::VectorXd v) const;
  Eigen::VectorXd btran(Eigen::VectorXd v) const;
  void compute_basics();
  double column_dot(int col, const Eigen::VectorXd& y) const;
  Eigen::VectorXd column_dense(int col) const;

  // One simplex phase on the given costs. Returns Optimal when no entering
  // candidate remains, Unbounded/IterLimit otherwise.
  LpStatus iterate(const std::vector<double>& cost, long iter_limit);
  double objective(const std::vector<double>& cost) const;
  void certificate(LpSolution& sol) const;
};

void Simplex::build() {
  n_ = p_.variable_count();
  m_ = p_.row_count();
  ncol_ = n_ + m_;
  cols_.assign(ncol_, {});
  lo_.assign(ncol_, 0.0);
  hi_.assign(ncol_, 0.0);
  cost_.assign(ncol_, 0.0);
  b_.assign(m_, 0.0);

  for (int j = 0; j < n_; ++j) {
    lo_[j] = p_.lower()[j];
    hi_[j] = p_.upper()[j];
    cost_[j] = p_.costs()[j];
  }
  for (int r = 0; r < m_; ++r) {
    const LpRow& row = p_.rows()[r];
    for (auto [v, coef] : row.terms) {
      if (coef != 0.0) cols_[v].push_back({r, coef});
    }
    b_[r] = row.rhs;
    int s = n_ + r;
    cols_[s].push_back({r, 1.0});
    switch (row.rel) {
      case Rel::LE: lo_[s] = 0.0; hi_[s] = kInf; break;
      case Rel::EQ: lo_[s] = 0.0; hi_[s] = 0.0; break;
      case Rel::GE: lo_[s] = -kInf; hi_[s] = 0.0; break;
    }
  }

  // Start every column nonbasic at its bound nearest zero; free at zero.
  state_.assign(ncol_, VarState::AtLower);
  xval_.assign(ncol_, 0.0);
  for (int j = 0; j < ncol_; ++j) {
    if (std::isfinite(lo_[j]) && std::isfinite(hi_[j])) {
      if (std::abs(lo_[j]) <= std::abs(hi_[j])) {
        state_[j] = VarState::AtLower;
        xval_[j] = lo_[j];
      } else {
        state_[j] = VarState::AtUpper;
        xval_[j] = hi_[j];
      }
    } else if (std::isfinite(lo_[j])) {
      state_[j] = VarState::AtLower;
      xval_[j] = lo_[j];
    } else if (std::isfinite(hi_[j])) {
      state_[j] = VarState::AtUpper;
      xval_[j] = hi_[j];
    } else {
      state_[j] = VarState::NonbasicFree;
      xval_[j] = 0.0;
    }
  }

  // Residual each logical would have to absorb; add a signed artificial
  // wherever that falls outside the logical's bounds.
  basis_.assign(m_, -1);
  phase1_cost_.assign(ncol_, 0.0);
  std::vector<double> act(m_, 0.0);
  for (int j = 0; j < n_; ++j) {
    if (xval_[j] == 0.0) continue;
    for (auto [r, coef] : cols_[j]) act[r] += coef * xval_[j];
  }
  for (int r = 0; r < m_; ++r) {
    int s = n_ + r;
    double resid = b_[r] - act[r];
    if (resid >= lo_[s] && resid <= hi_[s]) {
      basis_[r] = s;
      state_[s] = VarState::Basic;
      xval_[s] = resid;
    } else {
      // Pin the logical at its nearest bound and let the artificial carry
      // the rest; phase 1 drives it to zero.
      double pin = (resid < lo_[s]) ? lo_[s] : hi_[s];
      state_[s] = (pin == lo_[s]) ? VarState::AtLower : VarState::AtUpper;
      xval_[s] = pin;
      double a_val = resid - pin;
      int a = static_cast<int>(cols_.size());
      cols_.push_back({{r, 1.0}});
      if (a_val >= 0.0) {
        lo_.push_back(0.0);
        hi_.push_back(kInf);
        phase1_cost_.push_back(1.0);
      } else {
        lo_.push_back(-kInf);
        hi_.push_back(0.0);
        phase1_cost_.push_back(-1.0);
      }
      cost_.push_back(0.0);
      state_.push_back(VarState::Basic);
      xval_.push_back(a_val);
      basis_[r] = a;
      ncol_ = a + 1;
    }
  }
  phase1_cost_.resize(ncol_, 0.0);
}

void Simplex::factorize() {
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(m_, m_);
  for (int k = 0; k < m_; ++k) {
    for (auto [r, coef] : cols_[basis_[k]]) B(r, k) = coef;
  }
  lu_.compute(B);
  // PartialPivLU has no rank query; probe with a solve on e_1 and check
  // finiteness instead.
  if (m_ > 0) {
    Eigen::VectorXd probe = lu_.solve(Eigen::VectorXd::Unit(m_, 0));
    if (!probe.allFinite()) throw NumericalBreakdown("singular basis");
  }
  etas_.clear();
}

Eigen::VectorXd Simplex::ftran(Eigen::VectorXd v) const {
  Eigen::VectorXd u = m_ > 0 ? lu_.solve(v) : v;
  for (const Eta& e : etas_) {
    double piv = u[e.row] / e.w[e.row];
    if (piv != 0.0) u -= piv * e.w;
    u[e.row] = piv;
  }
  return u;
}

Eigen::VectorXd Simplex::btran(Eigen::VectorXd v) const {
  for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
    double s = v[it->row];
    double dot = it->w.dot(v) - it->w[it->row] * v[it->row];
    v[it->row] = (s - dot) / it->w[it->row];
  }
  return m_ > 0 ? lu_.transpose().solve(v) : v;
}

Eigen::VectorXd Simplex::column_dense(int col) const {
  Eigen::VectorXd a = Eigen::VectorXd::Zero(m_);
  for (auto [r, coef] : cols_[col]) a[r] = coef;
  return a;
}

double Simplex::column_dot(int col, const Eigen::VectorXd& y) const {
  double s = 0.0;
  for (auto [r, coef] : cols_[col]) s += coef * y[r];
  return s;
}

void Simplex::compute_basics() {
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m_);
  for (int r = 0; r < m_; ++r) rhs[r] = b_[r];
  for (int j = 0; j < ncol_; ++j) {
    if (state_[j] == VarState::Basic || xval_[j] == 0.0) continue;
    for (auto [r, coef] : cols_[j]) rhs[r] -= coef * xval_[j];
  }
  Eigen::VectorXd xb = ftran(rhs);
  for (int k = 0; k < m_; ++k) xval_[basis_[k]] = xb[k];
}

double Simplex::objective(const std::vector<double>& cost) const {
  double obj = 0.0;
  for (int j = 0; j < ncol_; ++j) obj += cost[j] * xval_[j];
  return obj;
}

LpStatus Simplex::iterate(const std::vector<double>& cost, long iter_limit) {
  const double dtol = opt_.opt_tol;
  for (;;) {
    if (iterations_ >= iter_limit) return LpStatus::IterLimit;

    // Pricing.
    Eigen::VectorXd cb(m_);
    for (int k = 0; k < m_; ++k) cb[k] = cost[basis_[k]];
    Eigen::VectorXd y = btran(cb);

    int enter = -1;
    int enter_dir = 0;
    double best = dtol;
    for (int j = 0; j < ncol_; ++j) {
      if (state_[j] == VarState::Basic) continue;
      if (lo_[j] == hi_[j] && state_[j] != VarState::NonbasicFree) continue;  // fixed
      double d = cost[j] - column_dot(j, y);
      int dir = 0;
      double viol = 0.0;
      if (state_[j] == VarState::AtLower) {
        if (d < -dtol) { dir = +1; viol = -d; }
      } else if (state_[j] == VarState::AtUpper) {
        if (d > dtol) { dir = -1; viol = d; }
      } else {  // free at zero
        if (d < -dtol) { dir = +1; viol = -d; }
        else if (d > dtol) { dir = -1; viol = d; }
      }
      if (dir == 0) continue;
      if (bland_) { enter = j; enter_dir = dir; break; }
      if (viol > best) { best = viol; enter = j; enter_dir = dir; }
    }
    if (enter < 0) return LpStatus::Optimal;

    Eigen::VectorXd w = ftran(column_dense(enter));

    // Ratio test: step t >= 0 moves x_enter by enter_dir*t and each basic k
    // by -enter_dir*w[k]*t.
    double t_max = kInf;
    int leave_k = -1;  // basis position, -1 means bound flip of the entering var
    double flip = hi_[enter] - lo_[enter];
    if (std::isfinite(flip)) t_max = flip;

    const double pivot_tol = 1e-9;
    for (int k = 0; k < m_; ++k) {
      double delta = -enter_dir * w[k];  // d x_basic[k] / dt
      if (std::abs(delta) <= pivot_tol) continue;
      int bk = basis_[k];
      double room;
      if (delta > 0.0) {
        room = std::isfinite(hi_[bk]) ? (hi_[bk] - xval_[bk]) / delta : kInf;
      } else {
        room = std::isfinite(lo_[bk]) ? (lo_[bk] - xval_[bk]) / delta : kInf;
      }
      if (room < -1e-12) room = 0.0;  // already at/over its bound
      if (room < t_max - 1e-12) {
        t_max = room;
        leave_k = k;
      } else if (leave_k >= 0 && room <= t_max + 1e-12) {
        // Tie break: prefer the larger pivot for stability, then lower index.
        if (std::abs(w[k]) > std::abs(w[leave_k]) + 1e-12) leave_k = k;
      }
    }
    if (!std::isfinite(t_max)) return LpStatus::Unbounded;

    ++iterations_;

    // Apply the step.
    double t = t_max;
    for (int k = 0; k < m_; ++k) {
      xval_[basis_[k]] -= enter_dir * w[k] * t;
    }
    double enter_from = xval_[enter];
    xval_[enter] = enter_from + enter_dir * t;

    if (leave_k < 0) {
      // Bound flip, basis unchanged.
      state_[enter] = (enter_dir > 0) ? VarState::AtUpper : VarState::AtLower;
      xval_[enter] = (enter_dir > 0) ? hi_[enter] : lo_[enter];
    } else {
      int leave = basis_[leave_k];
      double delta = -enter_dir * w[leave_k];
      if (delta > 0.0) {
        state_[leave] = VarState::AtUpper;
        xval_[leave] = hi_[leave];
      } else {
        state_[leave] = VarState::AtLower;
        xval_[leave] = lo_[leave];
      }
      basis_[leave_k] = enter;
      state_[enter] = VarState::Basic;
      etas_.push_back({leave_k, w});
      if (static_cast<int>(etas_.size()) >= kRefactorEvery) {
        factorize();
        compute_basics();
      }
    }

    // Stall detection drives the switch to Bland's rule.
    double obj = objective(cost);
    if (obj < last_objective_ - 1e-12) {
      stall_count_ = 0;
    } else if (++stall_count_ >= 100) {
      bland_ = true;
    }
    last_objective_ = obj;
  }
}

void Simplex::certificate(LpSolution& sol) const {
  double primal = 0.0;
  for (int j = 0; j < ncol_; ++j) {
    if (std::isfinite(lo_[j])) primal = std::max(primal, lo_[j] - xval_[j]);
    if (std::isfinite(hi_[j])) primal = std::max(primal, xval_[j] - hi_[j]);
  }
  std::vector<double> act(m_, 0.0);
  for (int j = 0; j < ncol_; ++j) {
    if (xval_[j] == 0.0) continue;
    for (auto [r, coef] : cols_[j]) act[r] += coef * xval_[j];
  }
  for (int r = 0; r < m_; ++r) primal = std::max(primal, std::abs(act[r] - b_[r]));
  sol.primal_residual = primal;

  Eigen::VectorXd cb(m_);
  for (int k = 0; k < m_; ++k) cb[k] = cost_[basis_[k]];
  Eigen::VectorXd y = btran(cb);
  double dual = 0.0;
  for (int j = 0; j < ncol_; ++j) {
    if (state_[j] == VarState::Basic) continue;
    if (lo_[j] == hi_[j]) continue;
    double d = cost_[j] - column_dot(j, y);
    if (state_[j] == VarState::AtLower) dual = std::max(dual, -d);
    else if (state_[j] == VarState::AtUpper) dual = std::max(dual, d);
    else dual = std::max(dual, std::abs(d));
  }
  sol.dual_residual = dual;
}

LpSolution Simplex::run() {
  auto t0 = std::chrono::steady_clock::now();
  LpSolution sol;

  build();
  factorize();
  compute_basics();

  long iter_limit = opt_.iter_limit > 0
                        ? opt_.iter_limit
                        : std::max(100L, 50L * (static_cast<long>(n_) + static_cast<long>(m_)));

  // Phase 1: minimize the signed artificial sum when any artificial exists.
  bool need_phase1 = false;
  for (int j = n_ + m_; j < ncol_; ++j) {
    if (phase1_cost_[j] != 0.0) { need_phase1 = true; break; }
  }
  bool phase1_cut_short = false;
  if (need_phase1) {
    last_objective_ = kInf;
    LpStatus st = iterate(phase1_cost_, iter_limit);
    if (st == LpStatus::Unbounded) {
      throw NumericalBreakdown("phase 1 reported unbounded");
    }
    if (st == LpStatus::IterLimit) {
      sol.status = LpStatus::IterLimit;
      phase1_cut_short = true;
    } else {
      double infeas = 0.0;
      for (int j = n_ + m_; j < ncol_; ++j) infeas += std::abs(xval_[j]);
      if (infeas > opt_.feas_tol) {
        sol.status = LpStatus::Infeasible;
        phase1_cut_short = true;
      } else {
        // Pin artificials at zero for phase 2.
        for (int j = n_ + m_; j < ncol_; ++j) {
          lo_[j] = 0.0;
          hi_[j] = 0.0;
          if (state_[j] != VarState::Basic) {
            state_[j] = VarState::AtLower;
            xval_[j] = 0.0;
          }
        }
      }
    }
  }

  if (!phase1_cut_short) {
    bland_ = false;
    stall_count_ = 0;
    last_objective_ = kInf;
    LpStatus st = iterate(cost_, iter_limit);
    if (st == LpStatus::Optimal) {
      // Clean refactorization before reporting, to squeeze out eta drift.
      factorize();
      compute_basics();
    }
    sol.status = st;
  }
  sol.iterations = iterations_;

  sol.x.assign(n_, 0.0);
  for (int j = 0; j < n_; ++j) sol.x[j] = xval_[j];
  sol.objective = 0.0;
  for (int j = 0; j < n_; ++j) sol.objective += p_.costs()[j] * xval_[j];
  if (sol.status == LpStatus::Optimal) certificate(sol);

  auto t1 = std::chrono::steady_clock::now();
  sol.wall_time_s = std::chrono::duration<double>(t1 - t0).count();
  return sol;
}

}  // namespace

LpSolution solve_lp(const LpProblem& p, const LpOptions& opt) {
  // Presolve: substitute fixed variables and drop empty rows; everything
  // else goes straight to the simplex so the builder-to-solver mapping
  // stays auditable.
  const int n = p.variable_count();
  std::vector<bool> fixed(n, false);
  std::vector<double> fixed_val(n, 0.0);
  int n_live = 0;
  std::vector<int> to_live(n, -1);
  for (int j = 0; j < n; ++j) {
    if (p.lower()[j] == p.upper()[j]) {
      fixed[j] = true;
      fixed_val[j] = p.lower()[j];
    } else {
      to_live[j] = n_live++;
    }
  }

  LpProblem q;
  double fixed_cost = 0.0;
  for (int j = 0; j < n; ++j) {
    if (fixed[j]) {
      fixed_cost += p.costs()[j] * fixed_val[j];
    } else {
      q.add_variable(p.variable_name(j), p.lower()[j], p.upper()[j], p.costs()[j]);
    }
  }
  for (const LpRow& row : p.rows()) {
    LpRow r2;
    r2.rel = row.rel;
    r2.rhs = row.rhs;
    r2.name = row.name;
    for (auto [v, coef] : row.terms) {
      if (fixed[v]) {
        r2.rhs -= coef * fixed_val[v];
      } else {
        r2.terms.push_back({to_live[v], coef});
      }
    }
    if (r2.terms.empty()) {
      bool ok = (r2.rel == Rel::LE && 0.0 <= r2.rhs + opt.feas_tol) ||
                (r2.rel == Rel::GE && 0.0 >= r2.rhs - opt.feas_tol) ||
                (r2.rel == Rel::EQ && std::abs(r2.rhs) <= opt.feas_tol);
      if (!ok) {
        LpSolution s;
        s.status = LpStatus::Infeasible;
        return s;
      }
      continue;
    }
    q.add_row(std::move(r2));
  }

  Simplex simplex(q, opt);
  LpSolution sol = simplex.run();

  // Restore the full variable vector and objective.
  std::vector<double> x(n, 0.0);
  for (int j = 0; j < n; ++j) {
    x[j] = fixed[j] ? fixed_val[j] : (sol.x.empty() ? 0.0 : sol.x[to_live[j]]);
  }
  sol.x = std::move(x);
  sol.objective += fixed_cost;
  return sol;
}

namespace {

void write_term(std::ostream& out, double coef, const std::string& name, bool first) {
  if (coef >= 0.0 && !first) out << " + ";
  if (coef < 0.0) out << (first ? "- " : " - ");
  out << std::abs(coef) << " " << name;
}

}  // namespace

void write_lp_format(const LpProblem& p, std::ostream& out) {
  auto var_name = [&](int j) {
    std::string n = p.variable_name(j);
    if (n.empty()) return "x" + std::to_string(j);
    for (char& c : n) {
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') c = '_';
    }
    return "v" + std::to_string(j) + "_" + n;
  };
  out << "Minimize\n obj:";
  bool first = true;
  for (int j = 0; j < p.variable_count(); ++j) {
    if (p.costs()[j] == 0.0) continue;
    out << " ";
    write_term(out, p.costs()[j], var_name(j), first);
    first = false;
  }
  if (first) out << " 0 " << (p.variable_count() ? var_name(0) : "x0");
  out << "\nSubject To\n";
  for (int r = 0; r < p.row_count(); ++r) {
    const LpRow& row = p.rows()[r];
    out << " c" << r << ":";
    bool f2 = true;
    for (auto [v, coef] : row.terms) {
      if (coef == 0.0) continue;
      out << " ";
      write_term(out, coef, var_name(v), f2);
      f2 = false;
    }
    if (f2) out << " 0 " << var_name(0);
    out << (row.rel == Rel::LE ? " <= " : row.rel == Rel::GE ? " >= " : " = ") << row.rhs
        << "\n";
  }
  out << "Bounds\n";
  for (int j = 0; j < p.variable_count(); ++j) {
    double lo = p.lower()[j], hi = p.upper()[j];
    out << " ";
    if (std::isfinite(lo) && std::isfinite(hi)) {
      out << lo << " <= " << var_name(j) << " <= " << hi;
    } else if (std::isfinite(lo)) {
      out << var_name(j) << " >= " << lo;
    } else if (std::isfinite(hi)) {
      out << "-inf <= " << var_name(j) << " <= " << hi;
    } else {
      out << var_name(j) << " free";
    }
    out << "\n";
  }
  out << "End\n";
}

}  // namespace doe
