#pragma once

#include <limits>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

namespace doe {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class Rel : char { LE = 'L', EQ = 'E', GE = 'G' };

struct LpRow {
  std::vector<std::pair<int, double>> terms;  // (variable index, coefficient)
  Rel rel = Rel::LE;
  double rhs = 0.0;
  std::string name;
};

// Sparse LP in the form  min c'x  s.t.  rows, lo <= x <= hi.
class LpProblem {
 public:
  int add_variable(std::string name, double lo, double hi, double cost = 0.0);
  void add_row(LpRow row);
  void set_cost(int var, double cost);

  int variable_count() const { return static_cast<int>(cost_.size()); }
  int row_count() const { return static_cast<int>(rows_.size()); }
  const std::vector<double>& costs() const { return cost_; }
  const std::vector<double>& lower() const { return lo_; }
  const std::vector<double>& upper() const { return hi_; }
  const std::vector<LpRow>& rows() const { return rows_; }
  const std::string& variable_name(int v) const { return names_[v]; }

  void set_bounds(int var, double lo, double hi);

 private:
  std::vector<double> cost_, lo_, hi_;
  std::vector<std::string> names_;
  std::vector<LpRow> rows_;
};

enum class LpStatus { Optimal, Infeasible, Unbounded, IterLimit };

const char* to_string(LpStatus s);

struct LpSolution {
  LpStatus status = LpStatus::IterLimit;
  std::vector<double> x;
  double objective = 0.0;
  long iterations = 0;
  double wall_time_s = 0.0;
  // Certificate values at termination: max primal bound/row violation and
  // max reduced-cost sign violation.
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

struct LpOptions {
  double feas_tol = 1e-7;
  double opt_tol = 1e-7;
  long iter_limit = 0;  // 0 means 50*(vars+rows)
};

// Revised simplex with bounded variables; Dantzig pricing with a switch to
// Bland's rule after a 100-iteration stall. Deterministic for identical
// input. Throws NumericalBreakdown if the basis cannot be factorized.
LpSolution solve_lp(const LpProblem& p, const LpOptions& opt = {});

// Adds weight*|center - var| to the objective: one auxiliary variable and
// two inequalities. Returns the auxiliary variable index.
int add_abs_term(LpProblem& p, int var, double center, double weight);

// CPLEX LP text format, for cross-checking against external solvers.
void write_lp_format(const LpProblem& p, std::ostream& out);

}  // namespace doe
