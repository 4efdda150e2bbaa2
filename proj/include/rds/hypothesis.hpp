#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <json.hpp>

#include "rds/circle.hpp"
#include "rds/circle_map.hpp"
#include "rds/error.hpp"

namespace rds {

/// Numeric verdicts mean "no violation found at the stated resolution".
enum class Verdict { pass, fail, inconclusive };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::fail: return "fail";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "?";
}

struct H1Result {
  Verdict verdict = Verdict::fail;
  double a1 = 0.0, a2 = 0.0;
  std::size_t resolution = 0;
};

/// Bounds on DT; fails when the infimum of DT is not positive.
inline H1Result check_h1(const CircleMap& map, std::size_t grid_n = 4096) {
  H1Result r;
  r.resolution = grid_n;
  const auto [lo, hi] = map.derivative_range(grid_n);
  r.a1 = lo;
  r.a2 = hi;
  r.verdict = lo > 0.0 ? Verdict::pass : Verdict::fail;
  return r;
}

struct H2Result {
  Verdict verdict = Verdict::inconclusive;
  std::optional<std::size_t> k;
  std::size_t grid_n = 0;
  std::size_t k_max = 0;
};

namespace detail {

using Bits = std::vector<std::uint64_t>;

inline void set_arc(Bits& b, std::size_t n, long lo, long hi) {
  // cells lo..hi inclusive, indices taken mod n
  if (hi - lo + 1 >= static_cast<long>(n)) {
    for (std::size_t i = 0; i < n; ++i) b[i / 64] |= std::uint64_t{1} << (i % 64);
    return;
  }
  for (long c = lo; c <= hi; ++c) {
    const auto i = static_cast<std::size_t>(((c % static_cast<long>(n)) + static_cast<long>(n)) % static_cast<long>(n));
    b[i / 64] |= std::uint64_t{1} << (i % 64);
  }
}

inline bool full(const Bits& b, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (!(b[i / 64] >> (i % 64) & 1U)) return false;
  return true;
}

inline bool test(const Bits& b, std::size_t i) { return b[i / 64] >> (i % 64) & 1U; }

}  // namespace detail

/// Reachability on a grid of N cells. Pass: an inner approximation of the
/// k-step reachable set covers the circle from every cell. Fail: an outer
/// approximation of everything reachable from some cell stays a proper subset.
inline H2Result check_h2(const CircleMap& map, double theta, std::size_t grid_n = 512, std::size_t k_max = 64) {
  require(grid_n >= 128, ErrorCode::precondition, "H2 grid must have >= 128 cells");
  H2Result r;
  r.grid_n = grid_n;
  r.k_max = k_max;
  const std::size_t n = grid_n, words = (n + 63) / 64;
  const double h = 1.0 / static_cast<double>(n);
  const double slack = 1e-12 * map.bounds().a2;
  std::vector<detail::Bits> inner1(n, detail::Bits(words, 0)), outer1(n, detail::Bits(words, 0));
  for (std::size_t j = 0; j < n; ++j) {
    const double c0 = static_cast<double>(j) * h, c1 = c0 + h;
    // points reachable in one step from every point of the cell
    const double u = c1 - theta, v = c0 + theta;
    if (v > u) {
      const double tu = map.lift(u) + slack, tv = map.lift(v) - slack;
      if (tv - tu >= 1.0) {
        detail::set_arc(inner1[j], n, 0, static_cast<long>(n) - 1);
      } else {
        const long lo = static_cast<long>(std::ceil(tu / h)), hi = static_cast<long>(std::floor(tv / h)) - 1;
        if (hi >= lo) detail::set_arc(inner1[j], n, lo, hi);
      }
    }
    // points reachable from some point of the cell
    const double to = map.lift(c0 - theta) - slack, t1 = map.lift(c1 + theta) + slack;
    detail::set_arc(outer1[j], n, static_cast<long>(std::floor(to / h)), static_cast<long>(std::ceil(t1 / h)) - 1);
  }
  auto step = [&](const std::vector<detail::Bits>& cur, const std::vector<detail::Bits>& one) {
    std::vector<detail::Bits> next(n, detail::Bits(words, 0));
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t i = 0; i < n; ++i)
        if (detail::test(cur[j], i))
          for (std::size_t w = 0; w < words; ++w) next[j][w] |= one[i][w];
    return next;
  };
  auto all_full = [&](const std::vector<detail::Bits>& s) {
    return std::all_of(s.begin(), s.end(), [&](const detail::Bits& b) { return detail::full(b, n); });
  };
  std::vector<detail::Bits> inner = inner1;
  for (std::size_t k = 1; k <= k_max; ++k) {
    if (all_full(inner)) {
      r.k = k;
      r.verdict = Verdict::pass;
      return r;
    }
    inner = step(inner, inner1);
  }
  // union over all horizons of the outer approximation
  std::vector<detail::Bits> reach = outer1;
  for (std::size_t k = 1; k <= k_max; ++k) {
    std::vector<detail::Bits> next = step(reach, outer1);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t w = 0; w < words; ++w) next[j][w] |= reach[j][w];
    if (next == reach) break;
    reach = std::move(next);
  }
  if (!all_full(reach)) r.verdict = Verdict::fail;
  return r;
}

struct H3Result {
  Verdict verdict = Verdict::fail;
  std::vector<double> orbit;
  int period = 0;
  double multiplier = 0.0;
  std::size_t resolution = 0;
};

namespace detail {

/// Roots in [0, 1) of g(x) = m for integer levels m, by sign changes on a grid
/// followed by bisection; exact grid zeros are kept.
template <class G>
std::vector<double> level_crossings(G&& g, int max_level, std::size_t grid_n) {
  std::vector<double> roots;
  const double h = 1.0 / static_cast<double>(grid_n);
  for (int m = 0; m <= max_level; ++m) {
    double x0 = 0.0, f0 = g(0.0) - m;
    for (std::size_t i = 1; i <= grid_n; ++i) {
      const double x1 = static_cast<double>(i) * h, f1 = g(x1) - m;
      if (f0 == 0.0) {
        roots.push_back(x0);
      } else if (f0 * f1 < 0.0) {
        double lo = x0, hi = x1, flo = f0;
        for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
          const double mid = 0.5 * (lo + hi), fm = g(mid) - m;
          if ((fm < 0) == (flo < 0)) {
            lo = mid;
            flo = fm;
          } else {
            hi = mid;
          }
        }
        roots.push_back(0.5 * (lo + hi));
      }
      x0 = x1;
      f0 = f1;
    }
  }
  for (double& r : roots) r = wrap01(r);
  std::sort(roots.begin(), roots.end());
  roots.erase(std::unique(roots.begin(), roots.end(), [](double a, double b) { return circle_distance(a, b) < 1e-12; }),
              roots.end());
  return roots;
}

}  // namespace detail

/// Attracting fixed point of T, with period-2 orbits as fallback.
inline H3Result check_h3(const CircleMap& map, std::size_t grid_n = 8192) {
  H3Result r;
  r.resolution = grid_n;
  // lift of T minus identity takes values in [0, 1] on [0, 1]
  const auto fixed = detail::level_crossings([&](double x) { return map.lift(x) - x; }, 1, grid_n);
  double best = std::numeric_limits<double>::infinity();
  for (double x : fixed) {
    const double m = map.deriv(x);
    if (m < best) {
      best = m;
      r.orbit = {x};
      r.period = 1;
      r.multiplier = m;
    }
  }
  if (best < 1.0) {
    r.verdict = Verdict::pass;
    return r;
  }
  const auto two = detail::level_crossings([&](double x) { return map.lift(map.lift(x)) - x; }, 3, grid_n);
  for (double x : two) {
    const double y = map.eval(x);
    if (circle_distance(x, y) < 1e-9) continue;
    const double m = map.deriv(x) * map.deriv(y);
    if (m < best) {
      best = m;
      r.orbit = {x, y};
      r.period = 2;
      r.multiplier = m;
    }
  }
  r.verdict = best < 1.0 ? Verdict::pass : Verdict::fail;
  return r;
}

struct H4Result {
  Verdict verdict = Verdict::pass;
  double min_curvature = std::numeric_limits<double>::infinity();  // over flagged points
  std::size_t flagged = 0;
  std::size_t max_tangencies_per_pair = 0;
  std::size_t pairs_with_tangency = 0;
  std::size_t grid = 0;
  double delta_tol = 1e-3;
  double c_min = 1e-2;
};

/// Scans f(a) = signed distance of (T_a x, T_a y) over a in [-theta, theta] for
/// pairs on a grid with d(x,y) >= 1e-3. Near-tangencies (|f|, |Df| < delta_tol)
/// must have |D^2 f| >= c_min, and at most one may occur per pair.
inline H4Result check_h4(const CircleMap& map, double theta, std::size_t grid = 256, double delta_tol = 1e-3,
                         double c_min = 1e-2) {
  H4Result r;
  r.grid = grid;
  r.delta_tol = delta_tol;
  r.c_min = c_min;
  const double h = 1.0 / static_cast<double>(grid);
  const double da = 2.0 * theta / static_cast<double>(grid - 1);
  std::vector<double> f(grid), df(grid);
  for (std::size_t ix = 0; ix < grid; ++ix) {
    const double x = static_cast<double>(ix) * h;
    for (std::size_t is = 1; is < grid; ++is) {
      const double s = static_cast<double>(is) * h;
      if (std::min(s, 1.0 - s) < 1e-3) continue;
      auto F = [&](double a) { return wrap_offset(map.lift(x + s + a) - map.lift(x + a)); };
      auto DF = [&](double a) { return map.deriv(x + s + a) - map.deriv(x + a); };
      auto D2F = [&](double a) { return map.second_deriv(x + s + a) - map.second_deriv(x + a); };
      for (std::size_t k = 0; k < grid; ++k) {
        const double a = -theta + static_cast<double>(k) * da;
        f[k] = F(a);
        df[k] = DF(a);
      }
      std::size_t tangencies = 0;
      auto flag = [&](double a) {
        ++r.flagged;
        r.min_curvature = std::min(r.min_curvature, std::fabs(D2F(a)));
      };
      for (std::size_t k = 0; k + 1 < grid; ++k) {
        const double a0 = -theta + static_cast<double>(k) * da;
        if (df[k] == 0.0 || df[k] * df[k + 1] < 0.0) {
          double lo = a0, hi = a0 + da;
          if (df[k] != 0.0) {
            double flo = df[k];
            for (int it = 0; it < 80 && hi - lo > 1e-15; ++it) {
              const double mid = 0.5 * (lo + hi), fm = DF(mid);
              if ((fm < 0) == (flo < 0)) {
                lo = mid;
                flo = fm;
              } else {
                hi = mid;
              }
            }
          }
          const double ac = df[k] == 0.0 ? a0 : 0.5 * (lo + hi);
          if (std::fabs(F(ac)) < delta_tol) {
            ++tangencies;
            flag(ac);
          }
        } else if (std::fabs(f[k]) < delta_tol && std::fabs(df[k]) < delta_tol) {
          flag(a0);
        }
      }
      if (tangencies > 0) ++r.pairs_with_tangency;
      r.max_tangencies_per_pair = std::max(r.max_tangencies_per_pair, tangencies);
    }
  }
  if (r.flagged > 0 && r.min_curvature < c_min) r.verdict = Verdict::fail;
  if (r.max_tangencies_per_pair > 1) r.verdict = Verdict::fail;
  return r;
}

struct H5Result {
  Verdict verdict = Verdict::fail;
  double min_max_h = 0.0;  // min over pairs of max over (a0, a1) of |H|
  std::size_t grid = 0;
  std::size_t a_grid = 0;
  double h_tol = 1e-6;
  bool sign_flip_observed = false;
};

/// H_{a0,a1}(x,y) = DT(T_{a0}(x) + a1) DT(T_{a0}(y) + a1) (DT(x + a0) - DT(y + a0)).
inline double h5_determinant(const CircleMap& map, double x, double y, double a0, double a1) {
  return map.deriv(map.eval(wrap01(x + a0)) + a1) * map.deriv(map.eval(wrap01(y + a0)) + a1) *
         (map.deriv(x + a0) - map.deriv(y + a0));
}

inline H5Result check_h5(const CircleMap& map, double theta, std::size_t grid = 128, std::size_t a_grid = 16,
                         double h_tol = 1e-6) {
  H5Result r;
  r.grid = grid;
  r.a_grid = a_grid;
  r.h_tol = h_tol;
  const double h = 1.0 / static_cast<double>(grid);
  // open interval (-theta, theta): midpoints of a_grid equal cells
  auto node = [&](std::size_t k) { return -theta + 2.0 * theta * (static_cast<double>(k) + 0.5) / static_cast<double>(a_grid); };
  double worst = std::numeric_limits<double>::infinity();
  for (std::size_t ix = 0; ix < grid; ++ix)
    for (std::size_t iy = 0; iy < grid; ++iy) {
      if (ix == iy) continue;
      const double x = static_cast<double>(ix) * h, y = static_cast<double>(iy) * h;
      double best = 0.0, lo = 0.0, hi = 0.0;
      for (std::size_t i0 = 0; i0 < a_grid; ++i0)
        for (std::size_t i1 = 0; i1 < a_grid; ++i1) {
          const double v = h5_determinant(map, x, y, node(i0), node(i1));
          best = std::max(best, std::fabs(v));
          lo = std::min(lo, v);
          hi = std::max(hi, v);
        }
      if (lo < 0.0 && hi > 0.0) r.sign_flip_observed = true;
      worst = std::min(worst, best);
    }
  r.min_max_h = worst;
  r.verdict = worst > h_tol ? Verdict::pass : Verdict::fail;
  return r;
}

struct LogBoundResult {
  double max_expectation = 0.0;
  double worst_x = 0.0, worst_y = 0.0;
  std::size_t pairs = 0;
};

/// max over grid pairs with d(x,y) >= R of E[-ln d(T_a x, T_a y)], integrating
/// with tanh-sinh between the zeros and critical points of the distance.
inline LogBoundResult check_logbound(const CircleMap& map, double theta, double R, std::size_t grid = 64) {
  LogBoundResult r;
  const double h = 1.0 / static_cast<double>(grid);
  boost::math::quadrature::tanh_sinh<double> ts(12);
  const std::size_t scan = 512;
  for (std::size_t ix = 0; ix < grid; ++ix)
    for (std::size_t iy = 0; iy < grid; ++iy) {
      const double x = static_cast<double>(ix) * h, y = static_cast<double>(iy) * h;
      if (circle_distance(x, y) < R) continue;
      const double s = signed_distance(x, y);
      // lift difference; the images coincide where it is an integer
      auto F = [&](double a) { return map.lift(x + a + s) - map.lift(x + a); };
      auto DF = [&](double a) { return map.deriv(x + a + s) - map.deriv(x + a); };
      std::vector<double> cuts{-theta, theta};
      const double da = 2.0 * theta / static_cast<double>(scan);
      for (std::size_t k = 0; k < scan; ++k) {
        const double a0 = -theta + static_cast<double>(k) * da, a1 = a0 + da;
        const double f0 = F(a0), f1 = F(a1);
        if (std::floor(f0) != std::floor(f1)) {
          const double level = std::max(std::floor(f0), std::floor(f1));
          double lo = a0, hi = a1;
          const bool up = f1 > f0;
          for (int it = 0; it < 100 && hi - lo > 1e-16; ++it) {
            const double mid = 0.5 * (lo + hi);
            if ((F(mid) < level) == up) lo = mid;
            else hi = mid;
          }
          cuts.push_back(0.5 * (lo + hi));
        }
        if (DF(a0) * DF(a1) < 0.0) {
          double lo = a0, hi = a1, flo = DF(a0);
          for (int it = 0; it < 100 && hi - lo > 1e-16; ++it) {
            const double mid = 0.5 * (lo + hi), fm = DF(mid);
            if ((fm < 0) == (flo < 0)) {
              lo = mid;
              flo = fm;
            } else {
              hi = mid;
            }
          }
          cuts.push_back(0.5 * (lo + hi));
        }
      }
      std::sort(cuts.begin(), cuts.end());
      double total = 0.0;
      for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
        if (!(cuts[k + 1] > cuts[k])) continue;
        const double mid = 0.5 * (cuts[k] + cuts[k + 1]);
        const double level = std::round(F(mid));
        // images coinciding on a whole piece: the expectation is infinite
        if (wrap_offset(F(mid) - level) == 0.0) {
          total = std::numeric_limits<double>::infinity();
          break;
        }
        auto g = [&](double a, double) {
          const double d = std::fabs(wrap_offset(F(a) - level));
          return d > 0.0 ? -std::log(d) : 745.0;
        };
        total += ts.integrate(g, cuts[k], cuts[k + 1]);
      }
      const double e = total / (2.0 * theta);
      require(std::isfinite(e) && e <= 1e3, ErrorCode::divergent, "E[-ln d] exceeds 1e3 for a grid pair");
      ++r.pairs;
      if (e > r.max_expectation) {
        r.max_expectation = e;
        r.worst_x = x;
        r.worst_y = y;
      }
    }
  return r;
}

struct HypothesisReport {
  H1Result h1;
  H2Result h2;
  H3Result h3;
  H4Result h4;
  H5Result h5;

  bool all_pass() const {
    return h1.verdict == Verdict::pass && h2.verdict == Verdict::pass && h3.verdict == Verdict::pass &&
           h4.verdict == Verdict::pass && h5.verdict == Verdict::pass;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j;
    j["h1"] = {{"verdict", to_string(h1.verdict)}, {"a1", h1.a1}, {"a2", h1.a2}, {"resolution", h1.resolution}};
    j["h2"] = {{"verdict", to_string(h2.verdict)},
               {"k", h2.k ? nlohmann::ordered_json(*h2.k) : nlohmann::ordered_json(nullptr)},
               {"grid_n", h2.grid_n},
               {"k_max", h2.k_max}};
    j["h3"] = {{"verdict", to_string(h3.verdict)},
               {"orbit", h3.orbit},
               {"period", h3.period},
               {"multiplier", h3.multiplier},
               {"resolution", h3.resolution}};
    j["h4"] = {{"verdict", to_string(h4.verdict)},
               {"min_curvature", std::isfinite(h4.min_curvature) ? nlohmann::ordered_json(h4.min_curvature)
                                                                 : nlohmann::ordered_json(nullptr)},
               {"flagged", h4.flagged},
               {"max_tangencies_per_pair", h4.max_tangencies_per_pair},
               {"pairs_with_tangency", h4.pairs_with_tangency},
               {"grid", h4.grid},
               {"delta_tol", h4.delta_tol},
               {"c_min", h4.c_min}};
    j["h5"] = {{"verdict", to_string(h5.verdict)},
               {"min_max_H", h5.min_max_h},
               {"sign_flip_observed", h5.sign_flip_observed},
               {"grid", h5.grid},
               {"a_grid", h5.a_grid},
               {"h_tol", h5.h_tol}};
    j["all_pass"] = all_pass();
    return j;
  }
};

struct PreflightOptions {
  std::size_t h2_grid = 512;
  std::size_t h2_k_max = 64;
  std::size_t h4_grid = 256;
  double h4_delta_tol = 1e-3;
  double h4_c_min = 1e-2;
  std::size_t h5_grid = 128;
  std::size_t h5_a_grid = 16;
  double h5_tol = 1e-6;
};

inline HypothesisReport preflight(const CircleMap& map, double theta, const PreflightOptions& o = {}) {
  HypothesisReport r;
  r.h1 = check_h1(map);
  r.h3 = check_h3(map);
  r.h5 = check_h5(map, theta, o.h5_grid, o.h5_a_grid, o.h5_tol);
  r.h4 = check_h4(map, theta, o.h4_grid, o.h4_delta_tol, o.h4_c_min);
  if (r.h1.verdict == Verdict::pass) r.h2 = check_h2(map, theta, o.h2_grid, o.h2_k_max);
  return r;
}

}  // namespace rds
