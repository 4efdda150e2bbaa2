#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "rds/error.hpp"

namespace rds {

/// Function on the circle sampled at x_i = i / n.
struct GridFunction {
  std::vector<double> values;

  GridFunction() = default;
  explicit GridFunction(std::vector<double> v) : values(std::move(v)) {}
  GridFunction(std::size_t n, double fill) : values(n, fill) {}

  std::size_t size() const { return values.size(); }
  double node(std::size_t i) const { return static_cast<double>(i) / static_cast<double>(values.size()); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }

  /// Trapezoid (= rectangle, by periodicity) integral over the circle.
  double integral() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s / static_cast<double>(values.size());
  }

  double sup_norm() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::fabs(v));
    return m;
  }
};

inline bool is_valid_grid_size(std::size_t n) { return n >= 256 && (n & (n - 1)) == 0; }

/// Periodic cubic B-spline interpolant of grid values.
class PeriodicSpline {
 public:
  PeriodicSpline() = default;
  explicit PeriodicSpline(std::span<const double> values) { fit(values); }

  void fit(std::span<const double> v) {
    const std::size_t n = v.size();
    require(n >= 4, ErrorCode::precondition, "spline needs at least 4 nodes");
    const double z = std::sqrt(3.0) - 2.0;
    const std::size_t terms = std::min<std::size_t>(n, 40);
    c_.assign(n, 0.0);
    // causal pass (1 - z q^{-1}) y = v with periodic start
    double y0 = 0.0, zk = 1.0;
    for (std::size_t k = 0; k < terms; ++k) {
      y0 += zk * v[(n - k) % n];
      zk *= z;
    }
    std::vector<double> y(n);
    y[0] = y0;
    for (std::size_t i = 1; i < n; ++i) y[i] = v[i] + z * y[i - 1];
    // anticausal pass (1 - z q) c = y with periodic start
    double cl = 0.0;
    zk = 1.0;
    for (std::size_t k = 0; k < terms; ++k) {
      cl += zk * y[(n - 1 + k) % n];
      zk *= z;
    }
    c_[n - 1] = cl;
    for (std::size_t i = n - 1; i-- > 0;) c_[i] = y[i] + z * c_[i + 1];
    const double gain = -6.0 * z;
    for (double& c : c_) c *= gain;
    n_ = n;
  }

  std::size_t size() const { return n_; }
  std::span<const double> coefficients() const { return c_; }

  double operator()(double t) const {
    const double u = (t - std::floor(t)) * static_cast<double>(n_);
    auto i = static_cast<std::size_t>(u);
    double f = u - static_cast<double>(i);
    if (i >= n_) {
      i = 0;
      f = 0.0;
    }
    const double f2 = f * f, f3 = f2 * f, g = 1.0 - f;
    const double w0 = g * g * g / 6.0;
    const double w1 = (3.0 * f3 - 6.0 * f2 + 4.0) / 6.0;
    const double w2 = (-3.0 * f3 + 3.0 * f2 + 3.0 * f + 1.0) / 6.0;
    const double w3 = f3 / 6.0;
    const std::size_t im = (i + n_ - 1) % n_, i1 = (i + 1) % n_, i2 = (i + 2) % n_;
    return w0 * c_[im] + w1 * c_[i] + w2 * c_[i1] + w3 * c_[i2];
  }

 private:
  std::vector<double> c_;
  std::size_t n_ = 0;
};

}  // namespace rds
