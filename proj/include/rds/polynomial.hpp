#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace rds {

/// Dense real polynomial, coefficients in ascending powers.
class Polynomial {
 public:
  Polynomial() = default;
  explicit Polynomial(std::vector<double> coeffs) : c_(std::move(coeffs)) { trim(); }

  std::size_t degree() const { return c_.empty() ? 0 : c_.size() - 1; }
  std::span<const double> coeffs() const { return c_; }

  double operator()(double x) const {
    double acc = 0.0;
    for (std::size_t i = c_.size(); i-- > 0;) acc = acc * x + c_[i];
    return acc;
  }

  Polynomial derivative() const {
    if (c_.size() <= 1) return Polynomial{};
    std::vector<double> d(c_.size() - 1);
    for (std::size_t i = 1; i < c_.size(); ++i) d[i - 1] = static_cast<double>(i) * c_[i];
    return Polynomial(std::move(d));
  }

  /// Antiderivative vanishing at 0.
  Polynomial antiderivative() const {
    std::vector<double> a(c_.size() + 1, 0.0);
    for (std::size_t i = 0; i < c_.size(); ++i) a[i + 1] = c_[i] / static_cast<double>(i + 1);
    return Polynomial(std::move(a));
  }

  /// Coefficients t_k of p(z + h) = sum_k t_k h^k (repeated synthetic division).
  void taylor_at(double z, std::span<double> out) const {
    const std::size_t n = c_.size();
    for (std::size_t i = 0; i < n; ++i) out[i] = c_[i];
    for (std::size_t k = 0; k + 1 < n; ++k)
      for (std::size_t i = n - 1; i > k; --i) out[i - 1] += z * out[i];
  }

  /// p(z + h) - p(z), accurate relative to |h| for small h.
  double increment(double z, double h) const {
    double t[16];
    const std::size_t n = c_.size();
    if (n <= 1) return 0.0;
    taylor_at(z, std::span<double>(t, n));
    double acc = 0.0;
    for (std::size_t i = n - 1; i >= 1; --i) acc = (acc + t[i]) * h;
    return acc;
  }

 private:
  void trim() {
    while (c_.size() > 1 && c_.back() == 0.0) c_.pop_back();
  }

  std::vector<double> c_;
};

}  // namespace rds
