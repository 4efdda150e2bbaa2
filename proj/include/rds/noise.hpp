#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <boost/math/special_functions/legendre.hpp>

#include "rds/error.hpp"

namespace rds {

using u128 = unsigned __int128;

/// Philox4x32-10 block function (Salmon et al., "Parallel random numbers:
/// as easy as 1, 2, 3").
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
  constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
  for (int r = 0; r < 10; ++r) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32), lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32), lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += w0;
    key[1] += w1;
  }
  return ctr;
}

/// Counter-based stream of i.i.d. uniform draws on [-theta, theta].
///
/// A draw is a pure function of (seed, counter); split() partitions the
/// remaining counter range, so sibling streams never overlap.
class NoiseStream {
 public:
  NoiseStream(double theta, std::uint64_t seed, u128 counter = 0, u128 end = ~u128(0))
      : theta_(theta), seed_(seed), counter_(counter), end_(end) {
    require(theta > 0.0 && theta <= 0.5, ErrorCode::precondition, "theta must lie in (0, 0.5]");
  }

  double theta() const { return theta_; }
  std::uint64_t seed() const { return seed_; }
  u128 counter() const { return counter_; }
  u128 end() const { return end_; }

  /// Uniform on [0,1) with 53 random bits.
  double next_unit() {
    const u128 c = counter_++;
    const std::array<std::uint32_t, 4> ctr{static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32),
                                            static_cast<std::uint32_t>(c >> 64), static_cast<std::uint32_t>(c >> 96)};
    const std::array<std::uint32_t, 2> key{static_cast<std::uint32_t>(seed_),
                                           static_cast<std::uint32_t>(seed_ >> 32)};
    const auto out = philox4x32(ctr, key);
    const std::uint64_t bits = (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

  /// Noise draw omega in [-theta, theta].
  double next() { return theta_ * (2.0 * next_unit() - 1.0); }

  /// k streams over disjoint consecutive slices of the remaining counter range.
  std::vector<NoiseStream> split(std::size_t k) const {
    require(k >= 1, ErrorCode::precondition, "split requires k >= 1");
    std::vector<NoiseStream> out;
    out.reserve(k);
    const u128 width = (end_ - counter_) / k;
    for (std::size_t i = 0; i < k; ++i) {
      const u128 lo = counter_ + width * i;
      const u128 hi = (i + 1 == k) ? end_ : lo + width;
      out.emplace_back(theta_, seed_, lo, hi);
    }
    return out;
  }

  NoiseStream with_theta(double theta) const { return NoiseStream(theta, seed_, counter_, end_); }

 private:
  double theta_;
  std::uint64_t seed_;
  u128 counter_;
  u128 end_;
};

enum class QuadratureKind { gauss_legendre, uniform_panel };

inline QuadratureKind parse_quadrature_kind(const std::string& s) {
  if (s == "gauss_legendre") return QuadratureKind::gauss_legendre;
  if (s == "uniform_panel") return QuadratureKind::uniform_panel;
  throw Error(ErrorCode::config, "unknown quadrature kind '" + s + "'");
}

/// Reference rule on [-1,1] with weights summing to 2.
struct ReferenceRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline ReferenceRule gauss_legendre_rule(std::size_t n) {
  ReferenceRule r;
  const auto zeros = boost::math::legendre_p_zeros<double>(static_cast<int>(n));
  for (double z : zeros) {
    const double dp = boost::math::legendre_p_prime<double>(static_cast<int>(n), z);
    const double w = 2.0 / ((1.0 - z * z) * dp * dp);
    if (z == 0.0) {
      r.nodes.push_back(0.0);
      r.weights.push_back(w);
    } else {
      r.nodes.push_back(-z);
      r.weights.push_back(w);
      r.nodes.push_back(z);
      r.weights.push_back(w);
    }
  }
  return r;
}

/// Probability rule for E[f(a)] with a uniform on [-theta, theta].
///
/// gauss_legendre: n-point Gauss-Legendre, exact to degree 2n-1.
/// uniform_panel: n/4 equal panels with 4-point Gauss-Legendre each.
class NoiseQuadrature {
 public:
  NoiseQuadrature(double theta, std::size_t n, QuadratureKind kind = QuadratureKind::gauss_legendre)
      : theta_(theta), kind_(kind) {
    require(n >= 8, ErrorCode::precondition, "quadrature requires n >= 8");
    require(theta > 0.0 && theta <= 0.5, ErrorCode::precondition, "theta must lie in (0, 0.5]");
    if (kind == QuadratureKind::gauss_legendre) {
      ref_ = gauss_legendre_rule(n);
    } else {
      const std::size_t panels = n / 4;
      const ReferenceRule g4 = gauss_legendre_rule(4);
      const double h = 2.0 / static_cast<double>(panels);
      for (std::size_t p = 0; p < panels; ++p) {
        const double mid = -1.0 + h * (static_cast<double>(p) + 0.5);
        for (std::size_t j = 0; j < g4.nodes.size(); ++j) {
          ref_.nodes.push_back(mid + 0.5 * h * g4.nodes[j]);
          ref_.weights.push_back(0.5 * h * g4.weights[j]);
        }
      }
    }
    double total = 0.0;
    for (double w : ref_.weights) total += w;
    for (double& w : ref_.weights) w *= 2.0 / total;
    for (std::size_t j = 0; j < ref_.nodes.size(); ++j) {
      nodes_.push_back(theta * ref_.nodes[j]);
      weights_.push_back(0.5 * ref_.weights[j]);
    }
  }

  double theta() const { return theta_; }
  QuadratureKind kind() const { return kind_; }
  std::size_t size() const { return nodes_.size(); }
  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& weights() const { return weights_; }
  const ReferenceRule& reference() const { return ref_; }

  template <class F>
  double expect(F&& f) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < nodes_.size(); ++j) acc += weights_[j] * f(nodes_[j]);
    return acc;
  }

  /// E[f(a)] with the rule applied separately on each piece of [-theta, theta]
  /// cut at the given breakpoints (for integrands with kinks there).
  template <class F>
  double expect_piecewise(std::vector<double> cuts, F&& f) const {
    cuts.push_back(-theta_);
    cuts.push_back(theta_);
    std::sort(cuts.begin(), cuts.end());
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      const double lo = std::max(cuts[k], -theta_);
      const double hi = std::min(cuts[k + 1], theta_);
      if (!(hi > lo)) continue;
      const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
      const double scale = half / (2.0 * theta_);
      for (std::size_t j = 0; j < ref_.nodes.size(); ++j)
        acc += scale * ref_.weights[j] * f(mid + half * ref_.nodes[j]);
    }
    return acc;
  }

 private:
  double theta_;
  QuadratureKind kind_;
  ReferenceRule ref_;
  std::vector<double> nodes_;
  std::vector<double> weights_;
};

}  // namespace rds
