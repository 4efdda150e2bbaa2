#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "rds/circle.hpp"
#include "rds/circle_map.hpp"
#include "rds/error.hpp"
#include "rds/grid_function.hpp"
#include "rds/noise.hpp"
#include "rds/parallel.hpp"
#include "rds/stats.hpp"

namespace rds {

/// Nodes and weights of E[f(a)] for the noise quadrature, with the rule
/// applied separately on each side of the points where x + a is an integer.
/// Across those points the lift of T and DT are only piecewise smooth.
struct NoiseNode {
  double a;
  double w;
};

inline std::vector<NoiseNode> split_noise_nodes(const NoiseQuadrature& quad, double x) {
  const double theta = quad.theta();
  const double xw = wrap01(x);
  std::array<double, 4> cuts{-theta, -xw, 1.0 - xw, theta};
  std::sort(cuts.begin(), cuts.end());
  const ReferenceRule& ref = quad.reference();
  std::vector<NoiseNode> out;
  out.reserve(2 * ref.nodes.size());
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double lo = std::max(cuts[k], -theta);
    const double hi = std::min(cuts[k + 1], theta);
    if (!(hi > lo)) continue;
    const double mid = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
    const double scale = half / (2.0 * theta);
    for (std::size_t j = 0; j < ref.nodes.size(); ++j)
      out.push_back({mid + half * ref.nodes[j], scale * ref.weights[j]});
  }
  return out;
}

struct KoopmanOptions {
  std::size_t grid_n = 1024;
  double tol = 1e-13;           // relative change of successive Rayleigh quotients
  double max_residual = 1e-9;   // ||P_q phi - rho phi|| / ||phi||
  std::size_t max_iter = 5000;
};

/// Discretised twisted operator P_q psi(x) = E[DT(x+a)^{-q} psi(T(x+a))] on a
/// uniform grid, with psi interpolated by a periodic cubic spline.
class TwistedKernel {
 public:
  TwistedKernel(const CircleMap& map, const NoiseQuadrature& quad, double q, std::size_t grid_n)
      : map_(&map), quad_(&quad), q_(q), n_(grid_n) {
    require(q >= -5.0 && q <= 5.0, ErrorCode::precondition, "q must lie in [-5, 5]");
    require(is_valid_grid_size(grid_n), ErrorCode::precondition, "grid size must be a power of two >= 256");
    offsets_.reserve(n_ + 1);
    offsets_.push_back(0);
    for (std::size_t i = 0; i < n_; ++i) {
      for (const Entry& e : row(static_cast<double>(i) / static_cast<double>(n_))) entries_.push_back(e);
      offsets_.push_back(entries_.size());
    }
  }

  double q() const { return q_; }
  std::size_t grid_size() const { return n_; }

  GridFunction apply(const GridFunction& psi) const {
    require(psi.size() == n_, ErrorCode::precondition, "grid function size does not match the kernel");
    return apply(PeriodicSpline(psi.values));
  }

  GridFunction apply(const PeriodicSpline& sp) const {
    GridFunction out(n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      double acc = 0.0;
      for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) acc += entries_[k].w * sp(entries_[k].t);
      out[i] = acc;
    }
    return out;
  }

  /// (P_q psi)(x) at an arbitrary point.
  double apply_at(const PeriodicSpline& sp, double x) const {
    double acc = 0.0;
    for (const Entry& e : row(x)) acc += e.w * sp(e.t);
    return acc;
  }

 private:
  struct Entry {
    double t;  // T(x + a) in [0, 1)
    double w;  // quadrature weight times DT(x + a)^{-q}
  };

  std::vector<Entry> row(double x) const {
    std::vector<Entry> out;
    for (const NoiseNode& nd : split_noise_nodes(*quad_, x)) {
      const double z = wrap01(x + nd.a);
      out.push_back({map_->eval(z), nd.w * std::pow(map_->deriv(z), -q_)});
    }
    return out;
  }

  const CircleMap* map_;
  const NoiseQuadrature* quad_;
  double q_;
  std::size_t n_;
  std::vector<Entry> entries_;
  std::vector<std::size_t> offsets_;
};

inline GridFunction twisted_apply(const CircleMap& map, const NoiseQuadrature& quad, double q,
                                  const GridFunction& psi) {
  return TwistedKernel(map, quad, q, psi.size()).apply(psi);
}

struct SpectralEig {
  double rho = 0.0;
  GridFunction phi;
  std::size_t iterations = 0;
  double residual = 0.0;
};

inline double grid_dot(const GridFunction& a, const GridFunction& b) {
  CompensatedSum s;
  for (std::size_t i = 0; i < a.size(); ++i) s.add(a[i] * b[i]);
  return s.value();
}

/// Power iteration from the constant function with sup-norm normalisation.
inline SpectralEig dominant_eig(const TwistedKernel& k, double tol = 1e-13, std::size_t max_iter = 5000,
                                double max_residual = 1e-9) {
  GridFunction v(k.grid_size(), 1.0);
  double prev = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t it = 1; it <= max_iter; ++it) {
    GridFunction w = k.apply(v);
    const double rq = grid_dot(w, v) / grid_dot(v, v);
    double resid = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) resid = std::max(resid, std::fabs(w[i] - rq * v[i]));
    resid /= v.sup_norm();
    const double norm = w.sup_norm();
    require(std::isfinite(norm) && norm > 0.0, ErrorCode::no_convergence, "power iteration degenerated");
    for (double& x : w.values) x /= norm;
    const bool settled = std::fabs(rq - prev) <= tol * std::fabs(rq) && resid <= max_residual;
    if (settled) {
      SpectralEig e;
      e.rho = rq;
      e.iterations = it;
      e.residual = resid;
      const double integral = v.integral();
      for (double& x : v.values) x /= integral;
      double lo = v.values.front();
      for (double x : v.values) lo = std::min(lo, x);
      require(lo > 0.0, ErrorCode::validation_failed, "dominant eigenfunction is not positive");
      e.phi = std::move(v);
      return e;
    }
    prev = rq;
    v = std::move(w);
  }
  throw Error(ErrorCode::no_convergence,
              "power iteration for q=" + std::to_string(k.q()) + " did not converge in " + std::to_string(max_iter) +
                  " iterations");
}

inline SpectralEig dominant_eig(const CircleMap& map, const NoiseQuadrature& quad, double q,
                                const KoopmanOptions& opt = {}) {
  return dominant_eig(TwistedKernel(map, quad, q, opt.grid_n), opt.tol, opt.max_iter, opt.max_residual);
}

/// Caches eigenpairs of P_q for one (map, quadrature, grid) triple.
class SpectralSolver {
 public:
  SpectralSolver(const CircleMap& map, const NoiseQuadrature& quad, KoopmanOptions opt = {})
      : map_(map), quad_(quad), opt_(opt) {}

  const CircleMap& map() const { return map_; }
  const NoiseQuadrature& quadrature() const { return quad_; }
  const KoopmanOptions& options() const { return opt_; }

  /// Eigenpair of P_q (dominant eigenvalue e^{Lambda(-q)}).
  const SpectralEig& eig(double q) {
    auto it = cache_.find(q);
    if (it == cache_.end()) it = cache_.emplace(q, dominant_eig(map_, quad_, q, opt_)).first;
    return it->second;
  }

  /// Moment Lyapunov function Lambda(q) = ln rho(P_{-q}).
  double lambda(double q) { return q == 0.0 ? std::log(eig(0.0).rho) : std::log(eig(-q).rho); }

 private:
  CircleMap map_;
  NoiseQuadrature quad_;
  KoopmanOptions opt_;
  std::map<double, SpectralEig> cache_;
};

inline double moment_lyapunov(const CircleMap& map, const NoiseQuadrature& quad, double q,
                              const KoopmanOptions& opt = {}) {
  return std::log(dominant_eig(map, quad, -q, opt).rho);
}

struct McEstimate {
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
  std::size_t ensemble = 0;
};

/// Sums of ln DT along one noisy orbit started uniformly; returns the partial
/// sums after `half` and after `n` steps.
inline std::pair<double, double> log_derivative_sums(const CircleMap& map, NoiseStream& s, std::size_t half,
                                                     std::size_t n) {
  double x = s.next_unit();
  double acc = 0.0, at_half = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double z = wrap01(x + s.next());
    acc += std::log(map.deriv(z));
    x = map.eval(z);
    if (k + 1 == half) at_half = acc;
  }
  return {at_half, acc};
}

/// Monte Carlo estimate of Lambda(q) from E[DT^n(x)^q].
///
/// Uses the horizon difference (ln M(n) - ln M(n/2)) / (n - n/2) so that the
/// O(1/n) offset from the initial distribution cancels. Means are reduced in
/// log space; the standard error follows from the delta method applied to the
/// two correlated sample means.
inline McEstimate moment_lyapunov_mc(const CircleMap& map, double theta, std::uint64_t seed, double q,
                                     std::size_t n, std::size_t ensemble, std::size_t workers = 1) {
  require(n >= 4 && n <= 64 && n % 2 == 0, ErrorCode::precondition, "moment MC horizon must be even, in [4, 64]");
  require(ensemble >= 100000, ErrorCode::precondition, "moment MC needs an ensemble of >= 1e5");
  McEstimate out;
  out.n = n;
  out.ensemble = ensemble;
  if (q == 0.0) return out;
  const std::size_t half = n / 2;
  constexpr std::size_t kChunks = 64;
  const auto streams = NoiseStream(theta, seed).split(kChunks);
  using Chunk = std::vector<std::pair<double, double>>;
  const auto chunks = parallel_map(kChunks, workers, [&](std::size_t c) {
    NoiseStream s = streams[c];
    const std::size_t lo = ensemble * c / kChunks, hi = ensemble * (c + 1) / kChunks;
    Chunk r;
    r.reserve(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) {
      const auto [sh, sn] = log_derivative_sums(map, s, half, n);
      r.emplace_back(q * sh, q * sn);
    }
    return r;
  });
  double shift_h = -std::numeric_limits<double>::infinity(), shift_n = shift_h;
  for (const Chunk& c : chunks)
    for (const auto& [lh, ln] : c) {
      shift_h = std::max(shift_h, lh);
      shift_n = std::max(shift_n, ln);
    }
  CompensatedSum sa, sb, saa, sbb, sab;
  for (const Chunk& c : chunks)
    for (const auto& [lh, ln] : c) {
      const double a = std::exp(ln - shift_n), b = std::exp(lh - shift_h);
      sa.add(a);
      sb.add(b);
      saa.add(a * a);
      sbb.add(b * b);
      sab.add(a * b);
    }
  const double N = static_cast<double>(ensemble);
  const double ma = sa.value() / N, mb = sb.value() / N;
  const double va = saa.value() / N - ma * ma, vb = sbb.value() / N - mb * mb, cab = sab.value() / N - ma * mb;
  const double span = static_cast<double>(n - half);
  out.estimate = ((std::log(ma) + shift_n) - (std::log(mb) + shift_h)) / span;
  const double var = (va / (ma * ma) + vb / (mb * mb) - 2.0 * cab / (ma * mb)) / (N - 1.0);
  out.stderr_ = std::sqrt(std::max(var, 0.0)) / span;
  return out;
}

/// Monte Carlo estimate of V from the variance of n^{-1/2} sum ln DT.
inline McEstimate variance_mc(const CircleMap& map, double theta, std::uint64_t seed, std::size_t n,
                              std::size_t ensemble, std::size_t workers = 1) {
  require(n >= 100 && ensemble >= 100, ErrorCode::precondition, "variance MC needs n, ensemble >= 100");
  const std::size_t burn = 64;
  const auto streams = NoiseStream(theta, seed).split(ensemble);
  const auto sums = parallel_map(ensemble, workers, [&](std::size_t u) {
    NoiseStream s = streams[u];
    double x = s.next_unit();
    for (std::size_t k = 0; k < burn; ++k) x = map.eval(wrap01(x + s.next()));
    CompensatedSum acc;
    for (std::size_t k = 0; k < n; ++k) {
      const double z = wrap01(x + s.next());
      acc.add(std::log(map.deriv(z)));
      x = map.eval(z);
    }
    return acc.value() / std::sqrt(static_cast<double>(n));
  });
  McEstimate out;
  out.n = n;
  out.ensemble = ensemble;
  const double sd = sample_sd(sums);
  out.estimate = sd * sd;
  // normal-theory standard error of a sample variance
  out.stderr_ = out.estimate * std::sqrt(2.0 / static_cast<double>(ensemble - 1));
  return out;
}

struct MomentCurve {
  std::vector<double> q_grid;
  std::vector<double> Lambda;
  std::vector<GridFunction> eigenfunctions;  // phi_{-q}: eigenfunction behind Lambda(q)
  double lambda0 = 0.0;
  double V = 0.0;
  double gamma = 0.0;
  double max_convexity_defect = 0.0;  // most negative second difference (0 if none)
  double max_lower_bound_defect = 0.0;
};

/// Step of the difference stencil for lambda0 and V. Lambda''' is O(1), so the
/// Richardson remainder O(h^4) stays near 1e-9; the eigenvalue noise floor
/// contributes about 1e-12 / h^2 to V.
inline constexpr double kDerivativeStep = 0.005;

/// Samples Lambda on q_grid (which must contain 0) and derives lambda0 = Lambda'(0)
/// and V = Lambda''(0) by Richardson-extrapolated central differences with
/// step kDerivativeStep.
inline MomentCurve moment_curve(SpectralSolver& solver, std::vector<double> q_grid) {
  std::sort(q_grid.begin(), q_grid.end());
  q_grid.erase(std::unique(q_grid.begin(), q_grid.end()), q_grid.end());
  require(std::find(q_grid.begin(), q_grid.end(), 0.0) != q_grid.end(), ErrorCode::precondition,
          "q grid must contain 0");
  require(q_grid.size() >= 3, ErrorCode::precondition, "q grid needs at least 3 points");
  const double h = kDerivativeStep;
  MomentCurve c;
  c.q_grid = q_grid;
  for (double q : q_grid) {
    c.Lambda.push_back(solver.lambda(q));
    c.eigenfunctions.push_back(solver.eig(q == 0.0 ? 0.0 : -q).phi);
  }
  auto L = [&](double v) {
    for (std::size_t i = 0; i < q_grid.size(); ++i)
      if (std::fabs(q_grid[i] - v) <= 1e-12) return c.Lambda[i];
    return solver.lambda(v);
  };
  const double l0 = L(0.0);
  const double d1 = (L(h) - L(-h)) / (2 * h), d2 = (L(2 * h) - L(-2 * h)) / (4 * h);
  c.lambda0 = (4 * d1 - d2) / 3;
  const double s1 = (L(h) - 2 * l0 + L(-h)) / (h * h), s2 = (L(2 * h) - 2 * l0 + L(-2 * h)) / (4 * h * h);
  c.V = (4 * s1 - s2) / 3;

  require(std::fabs(l0) <= 1e-10, ErrorCode::validation_failed, "Lambda(0) differs from 0 by more than 1e-10");
  for (std::size_t i = 1; i + 1 < q_grid.size(); ++i) {
    const double hm = q_grid[i] - q_grid[i - 1], hp = q_grid[i + 1] - q_grid[i];
    const double sm = (c.Lambda[i] - c.Lambda[i - 1]) / hm, sp = (c.Lambda[i + 1] - c.Lambda[i]) / hp;
    c.max_convexity_defect = std::min(c.max_convexity_defect, 0.5 * (hm + hp) * (sp - sm));
  }
  require(c.max_convexity_defect >= -1e-8, ErrorCode::convexity_violation,
          "second differences of Lambda fall below -1e-8");
  for (std::size_t i = 0; i < q_grid.size(); ++i)
    c.max_lower_bound_defect = std::min(c.max_lower_bound_defect, c.Lambda[i] - c.lambda0 * q_grid[i]);
  require(c.max_lower_bound_defect >= -1e-8, ErrorCode::validation_failed, "Lambda(q) < lambda0 q - 1e-8");
  return c;
}

inline MomentCurve moment_curve(const CircleMap& map, const NoiseQuadrature& quad, std::vector<double> q_grid,
                                const KoopmanOptions& opt = {}) {
  SpectralSolver solver(map, quad, opt);
  return moment_curve(solver, std::move(q_grid));
}

/// Noise floor of a single Lambda evaluation (set by the eigen-residual tolerance).
inline constexpr double kLambdaNoiseFloor = 1e-9;

/// The nonzero root gamma of Lambda, on the opposite side of 0 from lambda0.
/// Returns 0 when lambda0 is within 3 noise floors of 0.
inline double gamma_root(SpectralSolver& solver, double lambda0, double V) {
  if (std::fabs(lambda0) <= 3.0 * kLambdaNoiseFloor) return 0.0;
  const double side = lambda0 > 0 ? -1.0 : 1.0;
  // On the far side of gamma, Lambda has the sign of lambda0; near 0 it has the opposite sign.
  auto beyond = [&](double q) { return solver.lambda(q) * lambda0 > 0.0; };
  double start = (V > 0.0) ? std::min(1.0, std::fabs(lambda0) / V) : 1.0;
  start = std::min(start, 5.0);
  double inner = side * start;
  for (int k = 0; k < 60 && beyond(inner); ++k) inner *= 0.5;
  require(!beyond(inner), ErrorCode::no_bracket, "could not find a point between 0 and gamma");
  double outer = inner;
  while (!beyond(outer)) {
    if (std::fabs(outer) >= 5.0) throw Error(ErrorCode::no_bracket, "Lambda has no sign change in q in [-5, 5]");
    inner = outer;
    outer = side * std::min(5.0, 2.0 * std::fabs(outer));
  }
  double lo = std::min(inner, outer), hi = std::max(inner, outer);
  std::uintmax_t iters = 200;
  auto f = [&](double q) { return solver.lambda(q); };
  const auto tol = [](double a, double b) { return std::fabs(a - b) <= 1e-15 * std::max(1.0, std::fabs(a)); };
  const auto r = boost::math::tools::toms748_solve(f, lo, hi, f(lo), f(hi), tol, iters);
  const double g = std::fabs(f(r.first)) <= std::fabs(f(r.second)) ? r.first : r.second;
  require(std::fabs(f(g)) <= 1e-10, ErrorCode::no_convergence, "root of Lambda not resolved to 1e-10");
  return g;
}

inline double gamma_root(SpectralSolver& solver, const MomentCurve& c) { return gamma_root(solver, c.lambda0, c.V); }

/// E[ln DT(x + a)] at each grid node.
inline GridFunction expected_log_derivative(const CircleMap& map, const NoiseQuadrature& quad, std::size_t grid_n) {
  GridFunction g(grid_n, 0.0);
  for (std::size_t i = 0; i < grid_n; ++i) {
    const double x = g.node(i);
    double acc = 0.0;
    for (const NoiseNode& nd : split_noise_nodes(quad, x)) acc += nd.w * std::log(map.deriv(wrap01(x + nd.a)));
    g[i] = acc;
  }
  return g;
}

/// Density of the stationary measure: fixed point of the annealed transfer
/// operator rho'(y) = sum_{T z = y} E[rho(z - a)] / DT(z).
inline GridFunction stationary_density(const CircleMap& map, const NoiseQuadrature& quad, double tol = 1e-12,
                                       std::size_t grid_n = 1024, std::size_t max_iter = 5000) {
  require(is_valid_grid_size(grid_n), ErrorCode::precondition, "grid size must be a power of two >= 256");
  struct Entry {
    double t;
    double w;
  };
  std::vector<Entry> entries;
  std::vector<std::size_t> offsets{0};
  for (std::size_t i = 0; i < grid_n; ++i) {
    const double y = static_cast<double>(i) / static_cast<double>(grid_n);
    for (double z : map.preimages(y)) {
      const double inv = 1.0 / map.deriv(z);
      for (std::size_t j = 0; j < quad.size(); ++j)
        entries.push_back({wrap01(z - quad.nodes()[j]), inv * quad.weights()[j]});
    }
    offsets.push_back(entries.size());
  }
  GridFunction rho(grid_n, 1.0);
  for (std::size_t it = 0; it < max_iter; ++it) {
    const PeriodicSpline sp(rho.values);
    GridFunction next(grid_n, 0.0);
    for (std::size_t i = 0; i < grid_n; ++i) {
      double acc = 0.0;
      for (std::size_t k = offsets[i]; k < offsets[i + 1]; ++k) acc += entries[k].w * sp(entries[k].t);
      next[i] = acc;
    }
    const double mass = next.integral();
    for (double& v : next.values) v /= mass;
    double l1 = 0.0;
    for (std::size_t i = 0; i < grid_n; ++i) l1 += std::fabs(next[i] - rho[i]);
    l1 /= static_cast<double>(grid_n);
    rho = std::move(next);
    if (l1 < tol) return rho;
  }
  throw Error(ErrorCode::no_convergence, "stationary density iteration did not converge");
}

/// Lambda'(0) as the stationary average of E[ln DT(x + a)].
inline double spectral_lyapunov(const CircleMap& map, const NoiseQuadrature& quad, std::size_t grid_n = 1024) {
  const GridFunction rho = stationary_density(map, quad, 1e-13, grid_n);
  const GridFunction eld = expected_log_derivative(map, quad, grid_n);
  return grid_dot(rho, eld) / static_cast<double>(grid_n);
}

/// Noise amplitude in [lo, hi] at which the spectral Lyapunov exponent vanishes.
inline double zero_exponent_theta(const CircleMap& map, double lo, double hi, std::size_t quad_n = 96,
                                  std::size_t grid_n = 1024) {
  auto f = [&](double th) { return spectral_lyapunov(map, NoiseQuadrature(th, quad_n), grid_n); };
  const double flo = f(lo), fhi = f(hi);
  require(flo * fhi < 0.0, ErrorCode::no_bracket, "Lyapunov exponent does not change sign on the theta interval");
  std::uintmax_t iters = 100;
  const auto tol = [](double a, double b) { return std::fabs(a - b) <= 1e-12; };
  const auto r = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, tol, iters);
  return 0.5 * (r.first + r.second);
}

struct DqPhi0 {
  GridFunction dphi;    // d/dq phi_q at q = 0
  double lambda0 = 0.0; // (Lambda(h) - Lambda(-h)) / 2h from the same eigenpairs
  double h = 0.0;
  double residual = 0.0; // sup |E ln DT - lambda0 - (P_0 - I) dphi|
};

/// Central difference (phi_h - phi_{-h}) / 2h of the integral-normalised
/// eigenfunctions of P_{+-h}, validated against the first-moment identity
/// E[ln DT(x+a)] - lambda = (P_0 - I) d_q phi_0 (x).
inline DqPhi0 d_q_phi0(SpectralSolver& solver, double h) {
  require(h >= 1e-3 && h <= 0.05, ErrorCode::precondition, "h must lie in [1e-3, 0.05]");
  const SpectralEig& plus = solver.eig(h);
  const SpectralEig& minus = solver.eig(-h);
  const std::size_t n = plus.phi.size();
  DqPhi0 out;
  out.h = h;
  out.dphi = GridFunction(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) out.dphi[i] = (plus.phi[i] - minus.phi[i]) / (2 * h);
  // rho(P_{-h}) = e^{Lambda(h)}, rho(P_h) = e^{Lambda(-h)}
  out.lambda0 = (std::log(minus.rho) - std::log(plus.rho)) / (2 * h);
  const TwistedKernel p0(solver.map(), solver.quadrature(), 0.0, n);
  const GridFunction pd = p0.apply(out.dphi);
  const GridFunction eld = expected_log_derivative(solver.map(), solver.quadrature(), n);
  for (std::size_t i = 0; i < n; ++i)
    out.residual = std::max(out.residual, std::fabs(eld[i] - out.lambda0 - (pd[i] - out.dphi[i])));
  require(out.residual <= 10 * h * h, ErrorCode::validation_failed,
          "first-moment identity residual " + std::to_string(out.residual) + " exceeds 10 h^2");
  return out;
}

/// E[f(T(x+a), T(y+a))] for a two-point observable f.
inline double two_point_apply(const CircleMap& map, const NoiseQuadrature& quad,
                              const std::function<double(double, double)>& f, double x, double y) {
  require(circle_distance(x, y) > 0.0, ErrorCode::precondition, "two_point_apply requires x != y");
  // cut at wrap points of both coordinates
  std::vector<double> cuts{-wrap01(x), 1.0 - wrap01(x), -wrap01(y), 1.0 - wrap01(y)};
  return quad.expect_piecewise(cuts, [&](double a) {
    const double u = wrap01(x + a);
    const double tx = map.eval(u);
    const double off = wrap_offset(map.lift_increment(u, signed_distance(x, y)));
    const double ty = wrap01(tx + off);
    const double v = f(tx, ty);
    if (!std::isfinite(v))
      throw Error(ErrorCode::diagonal_hit, "two-point observable is singular at a quadrature node");
    return v;
  });
}

/// |(P_(2) - I) phi(x, y) - lambda0| for phi(x, y) = ln d(x, y) - d_q phi_0(x).
inline double martingale_defect(const CircleMap& map, const NoiseQuadrature& quad, const DqPhi0& dq, double x,
                                double y, double r_limit) {
  const double d = circle_distance(x, y);
  require(d > 0.0 && d < r_limit, ErrorCode::precondition, "martingale_defect requires 0 < d(x,y) < r_min / a2");
  const PeriodicSpline sp(dq.dphi.values);
  auto phi = [&](double u, double v) { return std::log(circle_distance(u, v)) - sp(u); };
  const double pphi = two_point_apply(map, quad, phi, x, y);
  return std::fabs(pphi - phi(x, y) - dq.lambda0);
}

/// Largest relative error of E[W_q(T(x+a), DT(x+a) u)] = e^{Lambda(-q)} W_q(x, u)
/// for W_q(x, u) = u^{-q} phi_q(x) on the product of grid nodes and u_grid.
inline double eigen_identity_residual(const CircleMap& map, const NoiseQuadrature& quad, double q,
                                      const SpectralEig& eig, const std::vector<double>& u_grid,
                                      std::size_t x_stride = 1) {
  const PeriodicSpline sp(eig.phi.values);
  double worst = 0.0;
  for (std::size_t i = 0; i < eig.phi.size(); i += x_stride) {
    const double x = eig.phi.node(i);
    const auto nodes = split_noise_nodes(quad, x);
    for (double u : u_grid) {
      double lhs = 0.0;
      for (const NoiseNode& nd : nodes) {
        const double z = wrap01(x + nd.a);
        lhs += nd.w * std::pow(map.deriv(z) * u, -q) * sp(map.eval(z));
      }
      const double rhs = eig.rho * std::pow(u, -q) * eig.phi[i];
      worst = std::max(worst, std::fabs(lhs - rhs) / std::fabs(rhs));
    }
  }
  return worst;
}

}  // namespace rds
