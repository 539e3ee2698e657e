#pragma once

#include "doe/doe_problem.hpp"
#include "doe/feeder.hpp"

namespace doe {

// Synthesizes a stress day: a midday generation peak for solar-shaped DERs
// against light load, and an evening load peak. Load multipliers and DER
// availability are smooth interpolations over 24 hourly anchors, resampled
// to `intervals` steps. DERs with p_min = 0 follow the solar shape; DERs
// with p_min < 0 keep their full range all day.
DoeRequest make_stress_day(const Feeder& feeder, int intervals,
                           Direction direction = Direction::Upper);

// Flat request at the base load, scaled by `load_scale`, one interval.
DoeRequest make_snapshot_request(const Feeder& feeder, double load_scale,
                                 Direction direction = Direction::Upper);

}  // namespace doe
