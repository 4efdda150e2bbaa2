#include <cmath>

#include <gtest/gtest.h>

#include "rds/koopman.hpp"

using namespace rds;

namespace {

const CircleMap& nu06() {
  static const CircleMap m = CircleMap::example_nu(0.6);
  return m;
}

SpectralSolver& solver02() {
  static SpectralSolver s(nu06(), NoiseQuadrature(0.2, 96));
  return s;
}

}  // namespace

TEST(PeriodicSpline, InterpolatesSmoothPeriodicFunctions) {
  const std::size_t n = 256;
  std::vector<double> v(n);
  auto f = [](double x) { return std::sin(2 * M_PI * x) + 0.3 * std::cos(6 * M_PI * x); };
  for (std::size_t i = 0; i < n; ++i) v[i] = f(static_cast<double>(i) / n);
  const PeriodicSpline sp(v);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) worst = std::max(worst, std::fabs(sp(k / 1000.0 + 1e-4) - f(k / 1000.0 + 1e-4)));
  EXPECT_LT(worst, 1e-6);
  EXPECT_NEAR(sp(3.0 / n), v[3], 1e-14);
  EXPECT_NEAR(sp(1.0 + 3.0 / n), v[3], 1e-13);
  const PeriodicSpline one(std::vector<double>(n, 2.5));
  EXPECT_NEAR(one(0.123), 2.5, 1e-14);
}

TEST(GridSize, PowersOfTwoFrom256) {
  EXPECT_TRUE(is_valid_grid_size(256));
  EXPECT_TRUE(is_valid_grid_size(4096));
  EXPECT_FALSE(is_valid_grid_size(128));
  EXPECT_FALSE(is_valid_grid_size(1000));
}

TEST(MomentLyapunov, AffineDoublingIsLinear) {
  const CircleMap m = CircleMap::affine_doubling();
  const NoiseQuadrature quad(0.2, 32);
  for (double q : {-2.0, -1.0, -0.5, 0.5, 1.0, 2.0}) EXPECT_NEAR(moment_lyapunov(m, quad, q), q * std::log(2.0), 1e-12);
  const MomentCurve c = moment_curve(m, quad, {-0.1, -0.05, 0.0, 0.05, 0.1});
  EXPECT_NEAR(c.lambda0, std::log(2.0), 1e-10);
  EXPECT_NEAR(c.V, 0.0, 1e-6);
}

TEST(MomentLyapunov, DegreeTwoFixesLambdaAtOne) {
  // the integral of D(T^n) over the circle is the degree 2^n for every noise path
  EXPECT_NEAR(solver02().lambda(1.0), std::log(2.0), 1e-8);
  EXPECT_NEAR(solver02().lambda(0.0), 0.0, 1e-12);
}

TEST(MomentLyapunov, CurveShapeAtTheta02) {
  SpectralSolver& s = solver02();
  MomentCurve c = moment_curve(s, {-1.0, -0.5, -0.1, -0.05, 0.0, 0.05, 0.1, 0.5, 1.0});
  EXPECT_GT(c.lambda0, 0.0);
  EXPECT_GT(c.V, 0.0);
  EXPECT_GE(c.max_convexity_defect, -1e-8);
  EXPECT_GE(c.max_lower_bound_defect, -1e-8);
  const double g = gamma_root(s, c);
  EXPECT_LT(g, 0.0);
  EXPECT_NEAR(s.lambda(g), 0.0, 1e-10);
  // lambda0 agrees with the stationary average of E ln DT (left eigenvector formula)
  EXPECT_NEAR(c.lambda0, spectral_lyapunov(nu06(), NoiseQuadrature(0.2, 96)), 1e-8);
}

TEST(MomentLyapunov, GridMustContainZero) {
  EXPECT_THROW(moment_curve(solver02(), {-1.0, -0.5, 0.5, 1.0}), Error);
  EXPECT_THROW(moment_curve(solver02(), {0.0, 1.0}), Error);
}

TEST(MomentLyapunov, DerivativesDoNotDependOnTheGrid) {
  const MomentCurve a = moment_curve(solver02(), {-0.1, -0.05, 0.0, 0.05, 0.1});
  const MomentCurve b = moment_curve(solver02(), {-1.0, 0.0, 1.0});
  EXPECT_EQ(a.lambda0, b.lambda0);
  EXPECT_EQ(a.V, b.V);
}

TEST(MomentLyapunov, MonteCarloAgreesWithSpectral) {
  const McEstimate e = moment_lyapunov_mc(nu06(), 0.2, 5, -1.0, 24, 100000);
  EXPECT_NEAR(e.estimate, solver02().lambda(-1.0), 4 * e.stderr_);
  EXPECT_THROW(moment_lyapunov_mc(nu06(), 0.2, 5, -1.0, 23, 100000), Error);
}

TEST(Eigenpair, WqIdentityHolds) {
  SpectralSolver& s = solver02();
  for (double q : {-1.0, 0.5}) {
    const SpectralEig& e = s.eig(q);
    EXPECT_NEAR(e.phi.integral(), 1.0, 1e-12);
    EXPECT_LT(eigen_identity_residual(nu06(), s.quadrature(), q, e, {0.1, 0.5}, 16), 1e-8);
  }
}

TEST(StationaryDensity, FullNoiseIsThePushforwardOfLebesgue) {
  const CircleMap& m = nu06();
  const GridFunction rho = stationary_density(m, NoiseQuadrature(0.5, 256), 1e-12, 1024);
  EXPECT_NEAR(rho.integral(), 1.0, 1e-12);
  double worst = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    double push = 0.0;
    for (double z : m.preimages(rho.node(i))) push += 1.0 / m.deriv(z);
    worst = std::max(worst, std::fabs(rho[i] - push));
  }
  EXPECT_LT(worst, 1e-6);
}

TEST(StationaryDensity, ZeroExponentRootIsBracketed) {
  const double th = zero_exponent_theta(nu06(), 0.15, 0.2);
  EXPECT_GT(th, 0.16);
  EXPECT_LT(th, 0.18);
  EXPECT_NEAR(spectral_lyapunov(nu06(), NoiseQuadrature(th, 96)), 0.0, 1e-9);
  EXPECT_THROW(zero_exponent_theta(nu06(), 0.2, 0.3), Error);
}

TEST(CenteredEigenfunction, DerivativeResidualScalesQuadratically) {
  SpectralSolver& s = solver02();
  const DqPhi0 a = d_q_phi0(s, 1e-3);
  const DqPhi0 b = d_q_phi0(s, 2e-3);
  EXPECT_LT(a.residual, 1e-5);
  EXPECT_GT(b.residual / a.residual, 2.5);
  EXPECT_LT(b.residual / a.residual, 6.0);
}

TEST(Martingale, DefectIsLinearInTheDistance) {
  SpectralSolver& s = solver02();
  const DqPhi0 dq = d_q_phi0(s, 1e-3);
  const double x = 0.37;
  const double r1 = martingale_defect(nu06(), s.quadrature(), dq, x, x + 1e-3, 0.01) / 1e-3;
  const double r2 = martingale_defect(nu06(), s.quadrature(), dq, x, x + 1e-4, 0.01) / 1e-4;
  EXPECT_LT(std::fabs(r1), 10.0);
  EXPECT_LT(std::fabs(r2), 10.0);
}

TEST(TwistedKernel, RejectsLargeTwists) {
  EXPECT_THROW(TwistedKernel(nu06(), NoiseQuadrature(0.2, 16), 6.0, 256), Error);
  EXPECT_THROW(TwistedKernel(nu06(), NoiseQuadrature(0.2, 16), 1.0, 300), Error);
}
