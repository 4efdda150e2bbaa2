#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <vector>

#include "rds/circle.hpp"
#include "rds/circle_map.hpp"
#include "rds/dynamics.hpp"
#include "rds/error.hpp"
#include "rds/noise.hpp"
#include "rds/parallel.hpp"
#include "rds/stats.hpp"

namespace rds {

/// Visit counts of the two-point distance in geometric bins over [eps_min, 1/2].
/// Distances below eps_min are kept in `below`; `batches` holds the same
/// histogram split over consecutive segments of the run.
struct DistanceHistogram {
  std::vector<double> edges;  // bins + 1 increasing edges
  std::vector<std::uint64_t> counts;
  std::uint64_t below = 0;
  std::uint64_t total = 0;
  std::vector<std::vector<std::uint64_t>> batches;
  std::vector<std::uint64_t> batch_below;

  /// Fraction of visits with distance below edges[i].
  double cumulative_below(std::size_t i) const {
    std::uint64_t c = below;
    for (std::size_t k = 0; k < i; ++k) c += counts[k];
    return static_cast<double>(c) / static_cast<double>(total);
  }

  /// Visits per unit distance, normalised by total.
  double density(std::size_t bin) const {
    return static_cast<double>(counts[bin]) / static_cast<double>(total) / (edges[bin + 1] - edges[bin]);
  }
};

inline std::vector<double> geometric_edges(double lo, double hi, std::size_t bins) {
  std::vector<double> e(bins + 1);
  const double r = std::log(hi / lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i <= bins; ++i) e[i] = lo * std::exp(r * static_cast<double>(i));
  e.back() = hi;
  return e;
}

inline std::size_t bin_of(const std::vector<double>& edges, double d) {
  const auto it = std::upper_bound(edges.begin(), edges.end(), d);
  return static_cast<std::size_t>(it - edges.begin()) - 1;
}

/// Histogram of d_k along one two-point orbit after burn_in steps.
inline DistanceHistogram distance_histogram(const CircleMap& map, NoiseStream& stream, std::uint64_t n,
                                            double eps_min, std::size_t bins, std::uint64_t burn_in = 1000,
                                            std::size_t n_batches = 20) {
  require(n >= 1000000, ErrorCode::precondition, "distance histogram needs n >= 1e6");
  require(eps_min > 0.0 && eps_min < 0.5 && bins >= 4, ErrorCode::precondition, "bad histogram range");
  DistanceHistogram h;
  h.edges = geometric_edges(eps_min, 0.5, bins);
  h.counts.assign(bins, 0);
  h.batches.assign(n_batches, std::vector<std::uint64_t>(bins, 0));
  h.batch_below.assign(n_batches, 0);
  const double x0 = stream.next_unit();
  double y0 = stream.next_unit();
  if (circle_distance(x0, y0) == 0.0) y0 = wrap01(x0 + 0.25);
  TwoPointState s = TwoPointState::from_points(x0, y0);
  for (std::uint64_t k = 0; k < burn_in; ++k) s.advance(map, stream.next());
  const std::uint64_t per_batch = n / n_batches;
  for (std::uint64_t k = 0; k < n; ++k) {
    if (s.on_diagonal()) {
      require(k >= n / 2, ErrorCode::orbit_merged, "orbit reached the diagonal before n/2 samples");
      break;
    }
    const double d = s.distance();
    const std::size_t b = std::min<std::uint64_t>(k / per_batch, n_batches - 1);
    if (d < eps_min) {
      ++h.below;
      ++h.batch_below[b];
    } else {
      const std::size_t i = std::min(bin_of(h.edges, d), bins - 1);
      ++h.counts[i];
      ++h.batches[b][i];
    }
    ++h.total;
    s.advance(map, stream.next());
  }
  return h;
}

struct ExponentFit {
  double exponent = 0.0;
  double stderr_ = 0.0;
  Interval ci;
  double r2 = 0.0;
  std::size_t points = 0;
};

namespace detail {

inline LinearFit log_cumulative_fit(const std::vector<double>& edges, const std::vector<std::uint64_t>& counts,
                                    std::uint64_t below, double lo, double hi) {
  std::vector<double> xs, ys;
  std::uint64_t total = below;
  for (auto c : counts) total += c;
  std::uint64_t cum = below;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (i > 0) cum += counts[i - 1];
    if (edges[i] < lo * (1 - 1e-12) || edges[i] > hi * (1 + 1e-12)) continue;
    require(cum > 0, ErrorCode::window_too_narrow, "no mass below an edge of the fit window");
    xs.push_back(std::log(edges[i]));
    ys.push_back(std::log(static_cast<double>(cum) / static_cast<double>(total)));
  }
  require(xs.size() >= 3, ErrorCode::window_too_narrow, "fewer than 3 histogram edges inside the fit window");
  return fit_line(xs, ys);
}

}  // namespace detail

/// Slope of ln(mass below eps) against ln eps over [lo, hi]. The slope
/// estimates -gamma for gamma in (-1/2, 0). The interval comes from the
/// spread of the same fit over run segments.
inline ExponentFit diagonal_mass_fit(const DistanceHistogram& h, double gamma_hint, double lo = 1e-5,
                                     double hi = 1e-2) {
  require(gamma_hint > -0.5 && gamma_hint < 0.0, ErrorCode::precondition,
          "diagonal mass fit requires gamma in (-1/2, 0)");
  require(h.edges.front() <= lo * (1 + 1e-12) && lo < hi, ErrorCode::window_too_narrow,
          "histogram does not resolve the fit window");
  const LinearFit all = detail::log_cumulative_fit(h.edges, h.counts, h.below, lo, hi);
  std::vector<double> slopes;
  for (std::size_t b = 0; b < h.batches.size(); ++b)
    slopes.push_back(detail::log_cumulative_fit(h.edges, h.batches[b], h.batch_below[b], lo, hi).slope);
  ExponentFit f;
  f.exponent = all.slope;
  f.r2 = all.r2;
  f.points = all.n;
  f.stderr_ = sample_sd(slopes) / std::sqrt(static_cast<double>(slopes.size()));
  f.ci = {f.exponent - 1.96 * f.stderr_, f.exponent + 1.96 * f.stderr_};
  return f;
}

/// Slope of ln(density) against ln d over bins inside [lo, hi]; estimates -gamma - 1.
inline ExponentFit density_exponent_fit(const DistanceHistogram& h, double lo = 1e-5, double hi = 1e-2) {
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    if (h.edges[i] < lo * (1 - 1e-12) || h.edges[i + 1] > hi * (1 + 1e-12) || h.counts[i] == 0) continue;
    xs.push_back(0.5 * (std::log(h.edges[i]) + std::log(h.edges[i + 1])));
    ys.push_back(std::log(h.density(i)));
  }
  require(xs.size() >= 3, ErrorCode::window_too_narrow, "fewer than 3 populated bins inside the fit window");
  const LinearFit lf = fit_line(xs, ys);
  ExponentFit f;
  f.exponent = lf.slope;
  f.stderr_ = lf.slope_se;
  f.ci = {lf.slope - 1.96 * lf.slope_se, lf.slope + 1.96 * lf.slope_se};
  f.r2 = lf.r2;
  f.points = lf.n;
  return f;
}

/// Fraction of visits with distance below eps.
inline double visit_frequency_below(const DistanceHistogram& h, double eps) {
  std::uint64_t c = h.below;
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    if (h.edges[i + 1] <= eps) c += h.counts[i];
  return static_cast<double>(c) / static_cast<double>(h.total);
}

/// Per-excursion occupation counts: starting where the pair first enters
/// distance kappa*delta, the number of iterates with d >= eps before the
/// distance first exceeds delta.
struct ExcursionStats {
  double delta = 0.0;
  double kappa = 0.0;
  std::vector<double> eps_grid;                       // decreasing
  std::vector<std::vector<std::uint64_t>> counts;     // [excursion][eps]
  std::vector<double> entry_distance;
  std::vector<std::uint8_t> censored;
  std::size_t excursions() const { return counts.size(); }
  double censored_fraction() const {
    std::size_t c = 0;
    for (auto v : censored) c += v;
    return counts.empty() ? 0.0 : static_cast<double>(c) / static_cast<double>(counts.size());
  }
  std::vector<double> mean_counts() const {
    std::vector<double> m(eps_grid.size(), 0.0);
    for (const auto& row : counts)
      for (std::size_t j = 0; j < row.size(); ++j) m[j] += static_cast<double>(row[j]);
    for (double& v : m) v /= static_cast<double>(counts.size());
    return m;
  }
};

inline ExcursionStats excursion_counts(const CircleMap& map, double theta, std::uint64_t seed, double delta,
                                       double kappa, std::vector<double> eps_grid, std::size_t excursions,
                                       std::uint64_t max_iter = 10000000, std::size_t workers = 1) {
  require(kappa > 0.0 && kappa < 1.0 && delta > 0.0 && delta < 0.5, ErrorCode::precondition, "bad excursion scales");
  std::sort(eps_grid.begin(), eps_grid.end(), std::greater<>());
  require(!eps_grid.empty() && eps_grid.front() < kappa * delta && eps_grid.back() > 0.0, ErrorCode::precondition,
          "eps grid must lie in (0, kappa*delta)");
  ExcursionStats st;
  st.delta = delta;
  st.kappa = kappa;
  st.eps_grid = eps_grid;
  struct One {
    std::vector<std::uint64_t> counts;
    double entry = 0.0;
    bool censored = false;
  };
  const auto streams = NoiseStream(theta, seed).split(excursions);
  const auto runs = parallel_map(excursions, workers, [&](std::size_t u) {
    NoiseStream s = streams[u];
    One r;
    r.counts.assign(eps_grid.size(), 0);
    const double x0 = s.next_unit();
    TwoPointState p = TwoPointState::from_offset(x0, 0.05 + 0.4 * s.next_unit());
    std::uint64_t k = 0;
    while (p.distance() >= kappa * delta) {
      if (++k > max_iter) {
        r.censored = true;
        return r;
      }
      p.advance(map, s.next());
    }
    r.entry = p.distance();
    k = 0;
    while (true) {
      const double d = p.distance();
      if (d > delta) break;
      for (std::size_t j = eps_grid.size(); j-- > 0;) {
        if (d < eps_grid[j]) break;
        ++r.counts[j];
      }
      if (++k > max_iter) {
        r.censored = true;
        break;
      }
      p.advance(map, s.next());
    }
    return r;
  });
  for (const One& r : runs) {
    st.counts.push_back(r.counts);
    st.entry_distance.push_back(r.entry);
    st.censored.push_back(r.censored ? 1 : 0);
  }
  return st;
}

struct GrowthFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  Interval ci;
  std::size_t points = 0;
};

/// Slope of the mean per-excursion count against -ln eps over eps in [lo, hi],
/// with a percentile bootstrap interval over excursions.
inline GrowthFit log_growth_fit(const ExcursionStats& st, double lo = 0.0, double hi = 1.0,
                                std::size_t resamples = 1000, std::uint64_t seed = 1) {
  require(st.excursions() >= 200, ErrorCode::precondition, "growth fit needs >= 200 excursions");
  std::vector<std::size_t> cols;
  std::vector<double> xs;
  for (std::size_t j = 0; j < st.eps_grid.size(); ++j)
    if (st.eps_grid[j] >= lo * (1 - 1e-12) && st.eps_grid[j] <= hi * (1 + 1e-12)) {
      cols.push_back(j);
      xs.push_back(-std::log(st.eps_grid[j]));
    }
  require(cols.size() >= 2, ErrorCode::window_too_narrow, "fewer than 2 eps values inside the fit window");
  auto fit_from = [&](const std::vector<std::size_t>& rows) {
    std::vector<double> ys(cols.size(), 0.0);
    for (std::size_t r : rows)
      for (std::size_t c = 0; c < cols.size(); ++c) ys[c] += static_cast<double>(st.counts[r][cols[c]]);
    for (double& y : ys) y /= static_cast<double>(rows.size());
    return fit_line(xs, ys);
  };
  const std::size_t m = st.excursions();
  std::vector<std::size_t> rows(m);
  for (std::size_t i = 0; i < m; ++i) rows[i] = i;
  const LinearFit base = fit_from(rows);
  GrowthFit g;
  g.slope = base.slope;
  g.intercept = base.intercept;
  g.r2 = base.r2;
  g.points = base.n;
  NoiseStream rng(0.5, seed);
  std::vector<double> boot;
  boot.reserve(resamples);
  for (std::size_t b = 0; b < resamples; ++b) {
    for (std::size_t i = 0; i < m; ++i)
      rows[i] = std::min(m - 1, static_cast<std::size_t>(rng.next_unit() * static_cast<double>(m)));
    boot.push_back(fit_from(rows).slope);
  }
  std::sort(boot.begin(), boot.end());
  const auto at = [&](double p) { return boot[static_cast<std::size_t>(p * static_cast<double>(boot.size() - 1))]; };
  g.ci = {at(0.025), at(0.975)};
  return g;
}

}  // namespace rds
