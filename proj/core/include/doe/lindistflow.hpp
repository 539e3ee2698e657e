#pragma once

#include "doe/doe_problem.hpp"
#include "doe/feeder.hpp"

namespace doe {

// Lossless linear branch-flow DOE instance: flow balance and linear voltage
// drop in squared-voltage variables, convex piecewise-linear loss epigraph
// (tangent cuts at segment midpoints over each line's flow range), thermal
// limits as |P| <= P_max with P_max = I_max * V_nominal, and the same soft
// penalty structure as the surrogate builds.
DoeInstance build_lindistflow(const Feeder& feeder, const DoeRequest& request, int t,
                              int pwl_segments);

}  // namespace doe
