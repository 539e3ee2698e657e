#pragma once

#include <vector>

#include "doe/feeder.hpp"
#include "doe/topology.hpp"

namespace doe {

struct PowerFlowSolution {
  std::vector<double> v_pu;      // |V| per bus
  std::vector<double> i_a;       // |I| per line
  std::vector<double> p_flow_kw;   // sending-end P per line, upstream->downstream positive
  std::vector<double> q_flow_kvar; // sending-end Q per line
  double loss_kw = 0.0;
  int iterations = 0;
  double residual = 0.0;  // max equation mismatch, p.u.
};

// Max-abs residuals of the four branch-flow equations, in p.u.
struct DistflowResiduals {
  double active_balance = 0.0;   // P_ij = sum P_jk + p_j + r |I|^2
  double reactive_balance = 0.0; // Q_ij = sum Q_jk + q_j + x |I|^2
  double voltage_drop = 0.0;     // |V_j|^2 recursion
  double current_definition = 0.0;  // |I|^2 = (P^2+Q^2)/|V_i|^2
  double max() const;
};

// Per-constraint-family violation sums evaluated on a power-flow solution:
// voltage in p.u., overload in A, reverse flow in kW.
struct ViolationTerms {
  double dv_pu = 0.0;
  double dol_a = 0.0;
  double drpf_kw = 0.0;
};

// Backward/forward sweep fixed point on the branch-flow equations.
// Flat start at the slack voltage. Throws NonConvergence when max_iter is
// reached and NegativeVoltageSquare when the solution collapses.
PowerFlowSolution solve_distflow(const Feeder& feeder, const InjectionVector& inj,
                                 double tol_pu = 1e-8, int max_iter = 100);

// Same, reusing a precomputed traversal order.
PowerFlowSolution solve_distflow(const Feeder& feeder, const TopologyOrder& topo,
                                 const InjectionVector& inj, double tol_pu = 1e-8,
                                 int max_iter = 100);

DistflowResiduals residuals(const Feeder& feeder, const PowerFlowSolution& sol,
                            const InjectionVector& inj);

ViolationTerms violation_terms(const PowerFlowSolution& sol, const Limits& limits);

}  // namespace doe
