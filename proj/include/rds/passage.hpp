#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rds/circle.hpp"
#include "rds/circle_map.hpp"
#include "rds/dynamics.hpp"
#include "rds/error.hpp"
#include "rds/noise.hpp"
#include "rds/parallel.hpp"
#include "rds/stats.hpp"

namespace rds {

enum class FirstEvent { minus, plus, censored };

inline std::string to_string(FirstEvent e) {
  switch (e) {
    case FirstEvent::minus: return "minus";
    case FirstEvent::plus: return "plus";
    case FirstEvent::censored: return "censored";
  }
  return "?";
}

/// First exit of the two-point distance from the band (epsilon, delta).
struct PassageSample {
  double d0 = 0.0;
  std::optional<std::uint64_t> tau_minus;  // first n with d < epsilon
  std::optional<std::uint64_t> tau_plus;   // first n with d > delta
  FirstEvent first = FirstEvent::censored;
  std::uint64_t steps = 0;
  double exit_distance = 0.0;
};

/// Iterates the pair until the distance drops below epsilon or exceeds delta.
/// The exit distance is checked against [a1 eps, eps] and [delta, a2 delta].
inline PassageSample run_passage(const CircleMap& map, NoiseStream& stream, TwoPointState s, double epsilon,
                                 double delta, std::uint64_t max_iter, const MapBounds& b) {
  const double d0 = s.distance();
  require(epsilon > 0.0 && epsilon < d0 && d0 < delta && delta <= b.r_min, ErrorCode::bad_band,
          "passage requires 0 < epsilon < d(x0,y0) < delta <= r_min");
  PassageSample out;
  out.d0 = d0;
  s.n = 0;
  while (s.n < max_iter) {
    s.advance(map, stream.next());
    const double d = s.distance();
    if (d < epsilon) {
      out.first = FirstEvent::minus;
      out.tau_minus = s.n;
      require(d >= b.a1 * epsilon * (1 - 1e-9), ErrorCode::validation_failed, "minus exit below a1 * epsilon");
    } else if (d > delta) {
      out.first = FirstEvent::plus;
      out.tau_plus = s.n;
      require(d <= b.a2 * delta * (1 + 1e-9), ErrorCode::validation_failed, "plus exit above a2 * delta");
    } else {
      continue;
    }
    out.exit_distance = d;
    break;
  }
  out.steps = s.n;
  return out;
}

inline PassageSample run_passage(const CircleMap& map, NoiseStream& stream, double x0, double y0, double epsilon,
                                 double delta, std::uint64_t max_iter, const MapBounds& b) {
  return run_passage(map, stream, TwoPointState::from_points(x0, y0), epsilon, delta, max_iter, b);
}

/// Initial point distributed approximately by the stationary measure: a
/// uniform draw pushed through a burn-in of the one-point motion.
inline double stationary_draw(const CircleMap& map, NoiseStream& s, std::size_t burn_in = 256) {
  double x = s.next_unit();
  for (std::size_t k = 0; k < burn_in; ++k) x = step(map, x, s.next());
  return x;
}

struct PassageEnsemble {
  double epsilon = 0.0, delta = 0.0, d0 = 0.0;
  std::uint64_t seed = 0;
  std::vector<PassageSample> samples;
  std::size_t minus = 0, plus = 0, censored = 0;
  double p_minus_hat = 0.0;
  Interval p_minus_ci;
  double mean_min_stop = 0.0;
  double mean_min_stop_se = 0.0;
  double censored_fraction = 0.0;
};

/// count independent passages from d0, each on its own split stream.
inline PassageEnsemble passage_ensemble(const CircleMap& map, double theta, std::uint64_t seed, double epsilon,
                                        double delta, double d0, std::size_t count, std::uint64_t max_iter,
                                        std::size_t workers = 1) {
  require(count >= 1000, ErrorCode::precondition, "passage ensemble needs count >= 1000");
  const MapBounds b = map.bounds();
  require(epsilon > 0.0 && epsilon < d0 && d0 < delta && delta <= b.r_min, ErrorCode::bad_band,
          "passage requires 0 < epsilon < d0 < delta <= r_min");
  const auto streams = NoiseStream(theta, seed).split(count);
  PassageEnsemble e;
  e.epsilon = epsilon;
  e.delta = delta;
  e.d0 = d0;
  e.seed = seed;
  e.samples = parallel_map(count, workers, [&](std::size_t u) {
    NoiseStream s = streams[u];
    const double x0 = stationary_draw(map, s);
    const double sign = s.next_unit() < 0.5 ? -1.0 : 1.0;
    return run_passage(map, s, TwoPointState::from_offset(x0, sign * d0), epsilon, delta, max_iter, b);
  });
  std::vector<double> stops;
  for (const auto& p : e.samples) {
    if (p.first == FirstEvent::minus) ++e.minus;
    if (p.first == FirstEvent::plus) ++e.plus;
    if (p.first == FirstEvent::censored) {
      ++e.censored;
      continue;
    }
    stops.push_back(static_cast<double>(p.steps));
  }
  const std::size_t decided = e.minus + e.plus;
  e.p_minus_hat = decided ? static_cast<double>(e.minus) / static_cast<double>(decided) : 0.0;
  e.p_minus_ci = wilson_interval(e.minus, decided);
  e.mean_min_stop = mean(stops);
  e.mean_min_stop_se = stops.size() > 1 ? sample_sd(stops) / std::sqrt(static_cast<double>(stops.size())) : 0.0;
  e.censored_fraction = static_cast<double>(e.censored) / static_cast<double>(count);
  return e;
}

/// Cells of the zero-exponent design: for each delta and each log band width
/// L = ln(delta/eps), starting distances d0 = delta e^{-f L} for f in fractions.
struct ZeroExponentDesign {
  std::vector<double> deltas{1e-2, 5e-3, 2.5e-3};
  std::vector<double> log_bands{48.0, 56.0, 64.0};
  std::vector<double> fractions{0.25, 0.5, 0.75};
  std::size_t count = 10000;
  std::uint64_t max_iter = 10000000;
};

struct ZeroExponentReport {
  std::vector<PassageEnsemble> cells;
  LinearFit p_fit;              // p_minus_hat against ln(delta/d0)/ln(delta/eps)
  double K_fit = 0.0;           // max |p L - ln(delta/d0)| / 2 over cells
  std::vector<double> envelope; // per log band: max |p - ln(delta/d0)/L|
  double stop_coeff = 0.0;      // E[min stop] = c ln(delta/d0) ln(d0/eps)
  double max_censored = 0.0;
  bool p_monotone = true;       // nonincreasing in d0 up to 2 Wilson widths
};

inline ZeroExponentReport verify_zero_exponent_bounds(const CircleMap& map, double theta, std::uint64_t seed,
                                                      const ZeroExponentDesign& design, std::size_t workers = 1) {
  ZeroExponentReport r;
  std::vector<double> xs, ps, prod, stops;
  std::uint64_t cell = 0;
  for (double delta : design.deltas)
    for (double L : design.log_bands) {
      const double eps = delta * std::exp(-L);
      double env = 0.0;
      std::optional<std::size_t> prev;
      for (double f : design.fractions) {
        const double d0 = delta * std::exp(-f * L);
        r.cells.push_back(passage_ensemble(map, theta, seed + 1000003ULL * ++cell, eps, delta, d0, design.count,
                                           design.max_iter, workers));
        const PassageEnsemble& e = r.cells.back();
        const double x = std::log(delta / d0) / L;
        xs.push_back(x);
        ps.push_back(e.p_minus_hat);
        prod.push_back(std::log(delta / d0) * std::log(d0 / eps));
        stops.push_back(e.mean_min_stop);
        r.K_fit = std::max(r.K_fit, std::fabs(e.p_minus_hat * L - std::log(delta / d0)) / 2);
        env = std::max(env, std::fabs(e.p_minus_hat - x));
        r.max_censored = std::max(r.max_censored, e.censored_fraction);
        // fractions increase, so d0 decreases and p_minus must not decrease
        if (prev) {
          const PassageEnsemble& p = r.cells[*prev];
          const double slack = 2 * std::max(p.p_minus_ci.hi - p.p_minus_ci.lo, e.p_minus_ci.hi - e.p_minus_ci.lo);
          if (e.p_minus_hat + slack < p.p_minus_hat) r.p_monotone = false;
        }
        prev = r.cells.size() - 1;
      }
      r.envelope.push_back(env);
    }
  r.p_fit = fit_line(xs, ps);
  r.stop_coeff = fit_proportional(prod, stops);
  return r;
}

struct EscapeReport {
  std::vector<double> d0;
  std::vector<double> mean_tau;
  std::vector<double> stderr_;
  LinearFit fit;  // mean tau_plus against ln(delta/d0)
  double censored_fraction = 0.0;
};

/// Mean escape time above delta from the starting distances d0 (no lower barrier).
inline EscapeReport escape_time_positive(const CircleMap& map, double theta, std::uint64_t seed,
                                         const std::vector<double>& d0s, double delta, std::size_t count,
                                         std::uint64_t max_iter = 10000000, std::size_t workers = 1) {
  const MapBounds b = map.bounds();
  require(delta <= b.r_min, ErrorCode::bad_band, "escape requires delta <= r_min");
  EscapeReport r;
  std::vector<double> xs;
  std::size_t censored = 0, total = 0;
  std::uint64_t k = 0;
  for (double d0 : d0s) {
    require(d0 > 0.0 && d0 < delta, ErrorCode::bad_band, "escape requires 0 < d0 < delta");
    const auto streams = NoiseStream(theta, seed + 7919ULL * ++k).split(count);
    const auto taus = parallel_map(count, workers, [&](std::size_t u) {
      NoiseStream s = streams[u];
      const double x0 = stationary_draw(map, s);
      const double sign = s.next_unit() < 0.5 ? -1.0 : 1.0;
      TwoPointState st = TwoPointState::from_offset(x0, sign * d0);
      while (st.n < max_iter) {
        st.advance(map, s.next());
        if (st.distance() > delta) return static_cast<double>(st.n);
      }
      return -1.0;
    });
    std::vector<double> ok;
    for (double t : taus) {
      if (t < 0) ++censored;
      else ok.push_back(t);
    }
    total += taus.size();
    r.d0.push_back(d0);
    r.mean_tau.push_back(mean(ok));
    r.stderr_.push_back(sample_sd(ok) / std::sqrt(static_cast<double>(ok.size())));
    xs.push_back(std::log(delta / d0));
  }
  r.fit = fit_line(xs, r.mean_tau);
  r.censored_fraction = static_cast<double>(censored) / static_cast<double>(total);
  return r;
}

struct EscapeTrend {
  std::vector<std::uint64_t> budgets;
  std::vector<double> truncated_mean;  // mean of min(tau_plus, budget)
  std::vector<double> escaped_fraction;
};

/// Truncated mean escape time above delta for increasing iteration budgets.
/// At a zero exponent the expectation is infinite, so the truncated means
/// keep growing with the budget.
inline EscapeTrend escape_time_trend(const CircleMap& map, double theta, std::uint64_t seed, double d0, double delta,
                                     std::vector<std::uint64_t> budgets, std::size_t count, std::size_t workers = 1) {
  require(!budgets.empty() && d0 > 0.0 && d0 < delta, ErrorCode::precondition, "bad escape trend design");
  std::sort(budgets.begin(), budgets.end());
  const std::uint64_t cap = budgets.back();
  const auto streams = NoiseStream(theta, seed).split(count);
  const auto taus = parallel_map(count, workers, [&](std::size_t u) {
    NoiseStream s = streams[u];
    const double x0 = stationary_draw(map, s);
    const double sign = s.next_unit() < 0.5 ? -1.0 : 1.0;
    TwoPointState st = TwoPointState::from_offset(x0, sign * d0);
    while (st.n < cap) {
      st.advance(map, s.next());
      if (st.distance() > delta) return st.n;
    }
    return cap + 1;
  });
  EscapeTrend r;
  r.budgets = budgets;
  for (std::uint64_t b : budgets) {
    CompensatedSum acc;
    std::size_t escaped = 0;
    for (std::uint64_t t : taus) {
      acc.add(static_cast<double>(std::min(t, b)));
      if (t <= b) ++escaped;
    }
    r.truncated_mean.push_back(acc.value() / static_cast<double>(count));
    r.escaped_fraction.push_back(static_cast<double>(escaped) / static_cast<double>(count));
  }
  return r;
}

struct TailReport {
  std::vector<double> eps;
  std::vector<PassageEnsemble> cells;
  LinearFit fit;  // ln p_minus_hat against ln(d0/eps); slope estimates gamma
  double K_fit = 1.0;
  bool decreasing = true;
};

/// Probability of reaching eps before delta from d0 for a geometric eps grid.
inline TailReport verify_positive_exponent_tail(const CircleMap& map, double theta, std::uint64_t seed, double d0,
                                                double delta, const std::vector<double>& eps_grid, std::size_t count,
                                                double kappa = 0.1, std::uint64_t max_iter = 10000000,
                                                std::size_t workers = 1) {
  require(d0 < kappa * delta, ErrorCode::precondition, "tail design requires d0 < kappa * delta");
  TailReport r;
  std::vector<double> xs, ys;
  std::uint64_t k = 0;
  for (double eps : eps_grid) {
    r.cells.push_back(passage_ensemble(map, theta, seed + 104729ULL * ++k, eps, delta, d0, count, max_iter, workers));
    r.eps.push_back(eps);
  }
  const std::size_t smallest =
      static_cast<std::size_t>(std::min_element(eps_grid.begin(), eps_grid.end()) - eps_grid.begin());
  require(r.cells[smallest].minus >= 100, ErrorCode::too_few_hits,
          "fewer than 100 minus events at the smallest epsilon");
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    require(r.cells[i].minus > 0, ErrorCode::too_few_hits, "no minus events in a tail cell");
    xs.push_back(std::log(d0 / r.eps[i]));
    ys.push_back(std::log(r.cells[i].p_minus_hat));
  }
  r.fit = fit_line(xs, ys);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double ratio = std::exp(ys[i] - r.fit.slope * xs[i]);
    r.K_fit = std::max({r.K_fit, ratio, 1.0 / ratio});
    for (std::size_t j = 0; j < xs.size(); ++j)
      if (xs[j] > xs[i] && ys[j] > ys[i] + 1e-12) r.decreasing = false;
  }
  return r;
}

}  // namespace rds
