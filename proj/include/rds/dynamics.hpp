#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "rds/circle.hpp"
#include "rds/circle_map.hpp"
#include "rds/noise.hpp"
#include "rds/parallel.hpp"
#include "rds/stats.hpp"

namespace rds {

/// T_omega(x) = T(x + omega mod 1).
inline double step(const CircleMap& map, double x, double omega) { return map.eval(wrap01(x + omega)); }

/// A pair (x, y) driven by common noise, stored as the base point x and the
/// signed offset y - x. Offsets are advanced through exact lift increments,
/// so tiny distances keep full relative precision. Below 1e-150 the offset
/// is tracked by its logarithm under the linearised map u -> DT(x) u.
class TwoPointState {
 public:
  static TwoPointState from_points(double x, double y) { return from_offset(x, signed_distance(x, y)); }

  static TwoPointState from_offset(double x, double offset) {
    TwoPointState s;
    s.x_ = wrap01(x);
    s.offset_ = offset;
    s.normalize();
    return s;
  }

  double x() const { return x_; }
  double y() const { return wrap01(x_ + signed_offset()); }
  double signed_offset() const { return linear_ ? sign_ * std::exp(log_abs_) : offset_; }
  double distance() const { return linear_ ? std::exp(log_abs_) : std::fabs(offset_); }
  double log_distance() const {
    if (linear_) return log_abs_;
    return offset_ == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(std::fabs(offset_));
  }
  bool on_diagonal() const { return !linear_ && offset_ == 0.0; }
  bool linearized() const { return linear_; }
  std::uint64_t n = 0;

  void advance(const CircleMap& map, double omega) {
    const double z = wrap01(x_ + omega);
    if (linear_) {
      log_abs_ += std::log(map.deriv(z));
      if (log_abs_ > kLogLinear) {
        offset_ = sign_ * std::exp(log_abs_);
        linear_ = false;
      }
    } else if (offset_ != 0.0) {
      offset_ = map.lift_increment(z, offset_);
      normalize();
    }
    x_ = map.eval(z);
    ++n;
  }

 private:
  static constexpr double kLinear = 1e-150;
  static inline const double kLogLinear = std::log(kLinear);

  void normalize() {
    if (std::fabs(offset_) > 0.5) offset_ = wrap_offset(offset_);
    if (offset_ != 0.0 && std::fabs(offset_) < kLinear) {
      linear_ = true;
      sign_ = offset_ < 0.0 ? -1.0 : 1.0;
      log_abs_ = std::log(std::fabs(offset_));
    }
  }

  double x_ = 0.0;
  double offset_ = 0.0;
  double log_abs_ = 0.0;
  double sign_ = 1.0;
  bool linear_ = false;
};

/// Both coordinates advanced with the same omega.
inline TwoPointState two_point_step(const CircleMap& map, TwoPointState s, double omega) {
  s.advance(map, omega);
  return s;
}

struct LyapunovEstimate {
  double lambda_hat = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
  std::size_t burn_in = 0;
  std::uint64_t seed = 0;
};

/// Birkhoff average of ln DT_omega(x_k) over the post burn-in iterates, with a
/// batch-means standard error from floor(sqrt(n - burn_in)) batches.
inline LyapunovEstimate lyapunov_birkhoff(const CircleMap& map, NoiseStream& stream, std::optional<double> x0,
                                          std::size_t n, std::optional<std::size_t> burn_in = std::nullopt) {
  require(n >= 100000, ErrorCode::precondition, "lyapunov_birkhoff requires n >= 1e5");
  LyapunovEstimate est;
  est.n = n;
  est.burn_in = burn_in.value_or(n / 10);
  est.seed = stream.seed();
  require(est.burn_in < n, ErrorCode::precondition, "burn_in must be below n");
  double x = x0 ? wrap01(*x0) : stream.next_unit();
  for (std::size_t k = 0; k < est.burn_in; ++k) x = step(map, x, stream.next());

  const std::size_t m = n - est.burn_in;
  const auto batches = static_cast<std::size_t>(std::sqrt(static_cast<double>(m)));
  const std::size_t batch_len = m / batches;
  std::vector<double> batch_means;
  batch_means.reserve(batches);
  CompensatedSum total, batch;
  std::size_t in_batch = 0;
  for (std::size_t k = 0; k < m; ++k) {
    const double z = wrap01(x + stream.next());
    const double l = std::log(map.deriv(z));
    total.add(l);
    batch.add(l);
    if (++in_batch == batch_len && batch_means.size() < batches) {
      batch_means.push_back(batch.value() / static_cast<double>(batch_len));
      batch = CompensatedSum{};
      in_batch = 0;
    }
    x = map.eval(z);
  }
  est.lambda_hat = total.value() / static_cast<double>(m);
  est.stderr_ = batch_means_stderr(batch_means);
  return est;
}

struct DistanceSeries {
  std::vector<double> d;     // d_k for k = 0..n (shorter if the orbit merged)
  double time_avg = 0.0;     // mean of d_k, k < n
  double tail_min = 0.0;     // over the final window
  double tail_max = 0.0;
  double tail_log_min = 0.0;
  std::size_t window = 0;
  bool hit_diagonal = false;
  std::size_t merged_at = 0;
  double lyapunov_sum = 0.0;  // sum of ln DT along the base orbit from the burn-in on
};

/// Two-point orbit from (x0, y0) with statistics over the final
/// window_frac of the run. A merged orbit (exact diagonal hit) truncates the
/// series; later iterates count as distance 0 in the summaries.
inline DistanceSeries distance_series(const CircleMap& map, NoiseStream& stream, double x0, double y0,
                                      std::size_t n, double window_frac = 0.1, bool keep_series = true,
                                      std::size_t lyapunov_burn_in = 0) {
  require(circle_distance(x0, y0) > 0.0, ErrorCode::precondition, "distance_series requires x0 != y0");
  require(n >= 10 && window_frac > 0.0 && window_frac <= 1.0, ErrorCode::precondition, "bad series length or window");
  DistanceSeries out;
  out.window = std::max<std::size_t>(1, static_cast<std::size_t>(window_frac * static_cast<double>(n)));
  const std::size_t tail_start = n + 1 - out.window;
  if (keep_series) out.d.reserve(n + 1);
  TwoPointState s = TwoPointState::from_points(x0, y0);
  CompensatedSum avg, lyap;
  out.tail_min = std::numeric_limits<double>::infinity();
  out.tail_max = 0.0;
  out.tail_log_min = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k <= n; ++k) {
    const double d = s.distance();
    if (keep_series && !out.hit_diagonal) out.d.push_back(d);
    if (k < n) avg.add(d);
    if (k >= tail_start) {
      out.tail_min = std::min(out.tail_min, d);
      out.tail_max = std::max(out.tail_max, d);
      out.tail_log_min = std::min(out.tail_log_min, s.log_distance());
    }
    if (k == n) break;
    if (!out.hit_diagonal && s.on_diagonal()) {
      out.hit_diagonal = true;
      out.merged_at = k;
    }
    const double omega = stream.next();
    if (k >= lyapunov_burn_in) lyap.add(std::log(map.deriv(wrap01(s.x() + omega))));
    s.advance(map, omega);
  }
  out.time_avg = avg.value() / static_cast<double>(n);
  out.lyapunov_sum = lyap.value();
  return out;
}

enum class Regime { synchronising, intermittent, chaotic, inconclusive };

inline std::string to_string(Regime r) {
  switch (r) {
    case Regime::synchronising: return "synchronising";
    case Regime::intermittent: return "intermittent";
    case Regime::chaotic: return "chaotic";
    case Regime::inconclusive: return "inconclusive";
  }
  return "unknown";
}

struct TrichotomyOptions {
  double window_frac = 0.1;
  double lambda_tol = 0.01;        // |lambda| below this counts as zero
  double limsup_threshold = 1e-3;  // final-window max above this means "limsup > 0"
};

struct TrichotomyRun {
  std::uint64_t stream_index = 0;
  double lambda_hat = 0.0;
  double time_avg = 0.0;
  double tail_min = 0.0;
  double tail_max = 0.0;
};

struct TrichotomyReport {
  Regime regime = Regime::inconclusive;
  double theta = 0.0;
  double lambda_hat = 0.0;
  double stderr_ = 0.0;
  double mean_time_avg = 0.0;
  double max_tail_max = 0.0;
  double max_tail_min = 0.0;
  std::size_t limsup_votes = 0;
  std::vector<TrichotomyRun> runs;
};

/// Classifies the two-point behaviour at noise level theta from an ensemble
/// of independent pair orbits. The exponent is the ensemble mean of per-run
/// Birkhoff averages (burn-in n/10); |lambda| <= max(3 stderr, lambda_tol)
/// counts as zero and then the final-window maxima decide between
/// intermittent and inconclusive.
inline TrichotomyReport trichotomy_report(const CircleMap& map, double theta, std::size_t n, std::size_t ensemble,
                                          std::uint64_t seed, std::size_t workers = 1,
                                          const TrichotomyOptions& opt = {}) {
  require(ensemble >= 32, ErrorCode::precondition, "trichotomy needs an ensemble of >= 32 seeds");
  const auto streams = NoiseStream(theta, seed).split(ensemble);
  TrichotomyReport rep;
  rep.theta = theta;
  rep.runs = parallel_map(ensemble, workers, [&](std::size_t u) {
    NoiseStream st = streams[u];
    const double x0 = st.next_unit();
    double y0 = st.next_unit();
    if (y0 == x0) y0 = wrap01(x0 + 0.25);
    // burn-in applies to the exponent only; distances are summarised over the full run
    const std::size_t burn = n / 10;
    DistanceSeries ds = distance_series(map, st, x0, y0, n, opt.window_frac, false, burn);
    TrichotomyRun r;
    r.stream_index = u;
    r.lambda_hat = ds.lyapunov_sum / static_cast<double>(n - burn);
    r.time_avg = ds.time_avg;
    r.tail_min = ds.tail_min;
    r.tail_max = ds.tail_max;
    return r;
  });
  std::vector<double> lam, avg;
  for (const auto& r : rep.runs) {
    lam.push_back(r.lambda_hat);
    avg.push_back(r.time_avg);
    rep.max_tail_max = std::max(rep.max_tail_max, r.tail_max);
    rep.max_tail_min = std::max(rep.max_tail_min, r.tail_min);
    if (r.tail_max > opt.limsup_threshold) ++rep.limsup_votes;
  }
  rep.lambda_hat = mean(lam);
  rep.stderr_ = sample_sd(lam) / std::sqrt(static_cast<double>(lam.size()));
  rep.mean_time_avg = mean(avg);
  const double thr = std::max(3.0 * rep.stderr_, opt.lambda_tol);
  if (rep.lambda_hat < -thr)
    rep.regime = Regime::synchronising;
  else if (rep.lambda_hat > thr)
    rep.regime = Regime::chaotic;
  else
    rep.regime = 2 * rep.limsup_votes > rep.runs.size() ? Regime::intermittent : Regime::inconclusive;
  return rep;
}

}  // namespace rds
