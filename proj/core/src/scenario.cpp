#include "doe/scenario.hpp"

#include <cmath>

namespace doe {

namespace {

// 24 hourly anchors, linearly interpolated. Light overnight load, a shallow
// midday valley while solar output peaks, and an evening peak.
constexpr double kLoadShape[24] = {
    0.48, 0.46, 0.45, 0.45, 0.46, 0.50, 0.58, 0.66, 0.68, 0.62, 0.57, 0.55,
    0.54, 0.55, 0.58, 0.65, 0.80, 1.00, 1.15, 1.12, 1.00, 0.85, 0.68, 0.55};

double interp24(const double* shape, double hour) {
  double h = std::fmod(hour, 24.0);
  int i0 = static_cast<int>(h);
  int i1 = (i0 + 1) % 24;
  double f = h - i0;
  return shape[i0] * (1.0 - f) + shape[i1] * f;
}

double solar_shape(double hour) {
  if (hour < 6.0 || hour > 18.0) return 0.0;
  double s = std::sin(M_PI * (hour - 6.0) / 12.0);
  return s * s;  // narrower midday peak than a plain half-sine
}

}  // namespace

DoeRequest make_stress_day(const Feeder& feeder, int intervals, Direction direction) {
  DoeRequest req;
  req.direction = direction;
  req.limits = feeder.default_limits();
  const auto ders = der_list(feeder);
  for (int t = 0; t < intervals; ++t) {
    double hour = 24.0 * t / intervals;
    double mult = interp24(kLoadShape, hour);
    IntervalData iv;
    for (const Bus& b : feeder.buses) {
      iv.load_p_kw.push_back(b.base_load_p_kw * mult);
      iv.load_q_kvar.push_back(b.base_load_q_kvar * mult);
    }
    for (const auto& [bus, der] : ders) {
      if (der.p_min_kw >= 0.0) {
        // Solar-shaped availability: exports only, gone at night.
        double avail = der.p_max_kw * solar_shape(hour);
        iv.der_p_max_kw.push_back(avail);
        iv.der_p_min_kw.push_back(std::min(der.p_min_kw, avail));
      } else {
        // Storage-shaped: full range all day.
        iv.der_p_max_kw.push_back(der.p_max_kw);
        iv.der_p_min_kw.push_back(der.p_min_kw);
      }
      iv.der_q_kvar.push_back(der.q_der_kvar);
    }
    req.intervals.push_back(std::move(iv));
  }
  return req;
}

DoeRequest make_snapshot_request(const Feeder& feeder, double load_scale,
                                 Direction direction) {
  DoeRequest req;
  req.direction = direction;
  req.limits = feeder.default_limits();
  IntervalData iv;
  for (const Bus& b : feeder.buses) {
    iv.load_p_kw.push_back(b.base_load_p_kw * load_scale);
    iv.load_q_kvar.push_back(b.base_load_q_kvar * load_scale);
  }
  for (const auto& [bus, der] : der_list(feeder)) {
    iv.der_p_max_kw.push_back(der.p_max_kw);
    iv.der_p_min_kw.push_back(der.p_min_kw);
    iv.der_q_kvar.push_back(der.q_der_kvar);
  }
  req.intervals.push_back(std::move(iv));
  return req;
}

}  // namespace doe
