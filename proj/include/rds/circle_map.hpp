#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "rds/circle.hpp"
#include "rds/error.hpp"
#include "rds/polynomial.hpp"

namespace rds {

enum class MapFamily { example_nu, affine_doubling, custom_poly_deriv };

inline std::string to_string(MapFamily f) {
  switch (f) {
    case MapFamily::example_nu: return "example_nu";
    case MapFamily::affine_doubling: return "affine_doubling";
    case MapFamily::custom_poly_deriv: return "custom_poly_deriv";
  }
  return "unknown";
}

/// Derivative bounds and the radius below which T expands or contracts
/// distances by at most the derivative bounds.
struct MapBounds {
  double a1 = 0.0;
  double a2 = 0.0;
  double r_min = 0.0;
  std::size_t grid_n = 0;
};

/// Degree-two circle endomorphism whose lift on [0,1] is a polynomial.
///
/// The lift satisfies T(0) = 0 and T(1) = 2 and is extended to the real
/// line by T(x + 1) = T(x) + 2. All derivatives are exact polynomials.
class CircleMap {
 public:
  /// T_nu(x) = int_0^x nu + 140 (2 - nu) t^3 (1 - t)^3 dt, nu in (0, 2).
  static CircleMap example_nu(double nu) {
    require(nu > 0.0 && nu < 2.0, ErrorCode::precondition, "example_nu requires nu in (0,2)");
    const double c = 140.0 * (2.0 - nu);
    // t^3 (1-t)^3 = t^3 - 3 t^4 + 3 t^5 - t^6
    Polynomial dt({nu, 0.0, 0.0, c, -3.0 * c, 3.0 * c, -c});
    return CircleMap(MapFamily::example_nu, {nu}, std::move(dt));
  }

  static CircleMap affine_doubling() {
    return CircleMap(MapFamily::affine_doubling, {}, Polynomial({2.0}));
  }

  /// DT = base + p with p >= 0 on [0,1] and int_0^1 DT = 2.
  static CircleMap custom_poly_deriv(double base, std::vector<double> p) {
    require(base >= 0.0, ErrorCode::precondition, "custom map base must be nonnegative");
    require(p.size() < 15, ErrorCode::precondition, "custom derivative degree must be below 14");
    Polynomial pp(p);
    for (int i = 0; i <= 4096; ++i) {
      const double x = i / 4096.0;
      require(pp(x) >= -1e-12, ErrorCode::precondition, "custom polynomial must be nonnegative on [0,1]");
    }
    std::vector<double> coeffs = std::move(p);
    if (coeffs.empty()) coeffs.push_back(0.0);
    coeffs[0] += base;
    Polynomial dt(coeffs);
    const double mass = dt.antiderivative()(1.0);
    require(std::fabs(mass - 2.0) <= 1e-12, ErrorCode::precondition,
            "custom derivative must integrate to 2 over [0,1]");
    std::vector<double> params{base};
    return CircleMap(MapFamily::custom_poly_deriv, std::move(params), std::move(dt));
  }

  MapFamily family() const { return family_; }
  const std::vector<double>& params() const { return params_; }
  const Polynomial& lift_poly() const { return lift_; }
  const Polynomial& deriv_poly() const { return dt_; }
  const Polynomial& second_deriv_poly() const { return d2t_; }

  /// Lift of T to the real line.
  double lift(double x) const {
    const double k = std::floor(x);
    return lift_(x - k) + 2.0 * k;
  }

  double eval(double x) const { return wrap01(lift(x)); }
  double deriv(double x) const { return dt_(wrap01(x)); }
  double second_deriv(double x) const { return d2t_(wrap01(x)); }

  /// lift(z + u) - lift(z) for z in [0,1) and |u| <= 1, accurate relative to |u|.
  double lift_increment(double z, double u) const {
    const double w = z + u;
    if (w >= 0.0 && w <= 1.0) return lift_.increment(z, u);
    if (w > 1.0) return lift_.increment(z, 1.0 - z) + lift_(w - 1.0);
    // lift(w) = p(1 + w) - 2 = p(1 + w) - p(1), expanded about 1
    return lift_.increment(1.0, w) - lift_(z);
  }

  /// Point c with lift(c) = 1, separating the two monotone branches.
  double branch_point() const { return branch_; }

  /// The two solutions of T(x) = y mod 1.
  std::array<double, 2> preimages(double y) const {
    y = wrap01(y);
    return {solve_lift(y, 0.0, branch_), solve_lift(y + 1.0, branch_, 1.0)};
  }

  /// Derivative extrema via critical points of DT and the expansion radius
  /// via a (grid_n x grid_n) scan of pairs (x, x + s).
  MapBounds bounds(std::size_t grid_n = 256) const {
    require(grid_n >= 256, ErrorCode::precondition, "bounds requires grid_n >= 256");
    MapBounds b;
    b.grid_n = grid_n;
    auto [lo, hi] = derivative_range(grid_n);
    b.a1 = lo;
    b.a2 = hi;
    if (!(b.a1 > 0.0))
      throw Error(ErrorCode::fails_h1, "minimum derivative " + std::to_string(b.a1) + " is not positive");
    b.r_min = scan_r_min(b.a1, b.a2, grid_n);
    return b;
  }

  /// Min and max of DT over the circle.
  std::pair<double, double> derivative_range(std::size_t grid_n = 4096) const {
    double lo = std::min(dt_(0.0), dt_(1.0));
    double hi = std::max(dt_(0.0), dt_(1.0));
    const std::size_t m = std::max<std::size_t>(grid_n, 1024) * 4;
    double prev = d2t_(0.0);
    for (std::size_t i = 1; i <= m; ++i) {
      const double x1 = static_cast<double>(i) / static_cast<double>(m);
      const double cur = d2t_(x1);
      const double x0 = static_cast<double>(i - 1) / static_cast<double>(m);
      double xc = x1;
      if (prev == 0.0) {
        xc = x0;
      } else if ((prev < 0.0) != (cur < 0.0) && cur != 0.0) {
        double a = x0, c = x1, fa = prev;
        for (int it = 0; it < 80; ++it) {
          const double mid = 0.5 * (a + c);
          const double fm = d2t_(mid);
          if ((fm < 0.0) == (fa < 0.0)) {
            a = mid;
            fa = fm;
          } else {
            c = mid;
          }
        }
        xc = 0.5 * (a + c);
      }
      const double v = dt_(xc);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      lo = std::min(lo, dt_(x1));
      hi = std::max(hi, dt_(x1));
      prev = cur;
    }
    return {lo, hi};
  }

 private:
  CircleMap(MapFamily family, std::vector<double> params, Polynomial dt)
      : family_(family), params_(std::move(params)), dt_(std::move(dt)) {
    lift_ = dt_.antiderivative();
    d2t_ = dt_.derivative();
    require(std::fabs(lift_(1.0) - 2.0) <= 1e-12, ErrorCode::precondition, "map must have degree two");
    branch_ = solve_lift(1.0, 0.0, 1.0);
  }

  double solve_lift(double target, double lo, double hi) const {
    double flo = lift_(lo) - target;
    double fhi = lift_(hi) - target;
    if (flo > 1e-12 || fhi < -1e-12)
      throw Error(ErrorCode::no_convergence, "lift is not monotone on the preimage bracket");
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      const double fm = lift_(mid) - target;
      if (fm < 0.0) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
        fhi = fm;
      }
    }
    const double x = (-flo <= fhi) ? lo : hi;
    return x >= 1.0 ? 0.0 : x;
  }

  // Largest pair gap s with a1 s <= d(T x, T(x+s)) <= a2 s for every x.
  double scan_r_min(double a1, double a2, std::size_t grid_n) const {
    const double tol = 1e-12;
    auto image_gap = [&](double x, double s) { return std::fabs(wrap_offset(lift_increment(x, s))); };
    auto passes = [&](double s, std::size_t nx) {
      for (std::size_t i = 0; i < nx; ++i) {
        const double x = static_cast<double>(i) / static_cast<double>(nx);
        const double g = image_gap(x, s);
        if (g < a1 * s * (1.0 - tol) - tol || g > a2 * s * (1.0 + tol) + tol) return false;
      }
      return true;
    };
    const double ds = 0.5 / static_cast<double>(grid_n);
    std::size_t j = 0;
    while (j < grid_n && passes(ds * static_cast<double>(j + 1), grid_n)) ++j;
    // the lattice in x can miss the worst pair; confirm on a finer x grid
    while (j > 0 && !passes(ds * static_cast<double>(j), 16 * grid_n)) --j;
    return ds * static_cast<double>(j);
  }

  MapFamily family_;
  std::vector<double> params_;
  Polynomial dt_;
  Polynomial lift_;
  Polynomial d2t_;
  double branch_ = 0.5;
};

}  // namespace rds
