#pragma once

#include <cmath>

// Points on the circle R/Z are stored as doubles in [0,1).

namespace rds {

inline double wrap01(double x) {
  double r = x - std::floor(x);
  // x slightly below an integer can round up to exactly 1
  return r >= 1.0 ? 0.0 : r;
}

/// Representative of an offset in (-1/2, 1/2].
inline double wrap_offset(double u) {
  double r = u - std::floor(u + 0.5);
  return r <= -0.5 ? r + 1.0 : r;
}

/// Signed distance w(x,y) = ((y - x + 1/2) mod 1) - 1/2, taken in (-1/2, 1/2].
inline double signed_distance(double x, double y) { return wrap_offset(y - x); }

/// Arc-length distance min(|x-y|, 1-|x-y|).
inline double circle_distance(double x, double y) {
  double a = std::fabs(x - y);
  a -= std::floor(a);
  return a > 0.5 ? 1.0 - a : a;
}

}  // namespace rds
