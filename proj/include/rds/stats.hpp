#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "rds/error.hpp"

namespace rds {

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::fabs(sum_) >= std::fabs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double mean(std::span<const double> v) {
  CompensatedSum s;
  for (double x : v) s.add(x);
  return v.empty() ? 0.0 : s.value() / static_cast<double>(v.size());
}

/// Sample standard deviation (n - 1 denominator).
inline double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  CompensatedSum s;
  for (double x : v) s.add((x - m) * (x - m));
  return std::sqrt(s.value() / static_cast<double>(v.size() - 1));
}

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double r2 = 0.0;
  std::size_t n = 0;
};

/// Ordinary least squares y = intercept + slope x, optionally weighted.
inline LinearFit fit_line(std::span<const double> x, std::span<const double> y,
                          std::span<const double> w = {}) {
  require(x.size() == y.size() && x.size() >= 2, ErrorCode::precondition, "fit_line needs >= 2 points");
  const std::size_t n = x.size();
  double sw = 0, sx = 0, sy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    sw += wi;
    sx += wi * x[i];
    sy += wi * y[i];
  }
  const double mx = sx / sw, my = sy / sw;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    sxx += wi * (x[i] - mx) * (x[i] - mx);
    sxy += wi * (x[i] - mx) * (y[i] - my);
    syy += wi * (y[i] - my) * (y[i] - my);
  }
  LinearFit f;
  f.n = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double sse = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    const double r = y[i] - f.intercept - f.slope * x[i];
    sse += wi * r * r;
  }
  f.r2 = syy > 0 ? 1.0 - sse / syy : 1.0;
  if (n > 2) f.slope_se = std::sqrt(sse / static_cast<double>(n - 2) / sxx);
  return f;
}

/// Least-squares coefficient c of y = c x (line through the origin).
inline double fit_proportional(std::span<const double> x, std::span<const double> y) {
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += x[i] * y[i];
    sxx += x[i] * x[i];
  }
  return sxy / sxx;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Wilson score interval for a binomial proportion (z = 1.96 for 95%).
inline Interval wilson_interval(std::size_t hits, std::size_t trials, double z = 1.959963984540054) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(hits) / n;
  const double z2 = z * z;
  const double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

/// Standard error of the mean of a correlated series by non-overlapping batch means.
inline double batch_means_stderr(std::span<const double> batch_means) {
  if (batch_means.size() < 2) return 0.0;
  return sample_sd(batch_means) / std::sqrt(static_cast<double>(batch_means.size()));
}

}  // namespace rds
