#include <cmath>

#include <gtest/gtest.h>

#include "rds/occupation.hpp"

using namespace rds;

namespace {

// Histogram whose mass below e is exactly (e / 1/2)^g, split evenly into batches.
DistanceHistogram power_law_histogram(double g, double eps_min, std::size_t bins) {
  DistanceHistogram h;
  h.edges = geometric_edges(eps_min, 0.5, bins);
  const double scale = 1e15;
  auto mass = [&](double e) { return std::llround(scale * std::pow(e / 0.5, g)); };
  h.below = static_cast<std::uint64_t>(mass(eps_min));
  for (std::size_t i = 0; i < bins; ++i)
    h.counts.push_back(static_cast<std::uint64_t>(mass(h.edges[i + 1]) - mass(h.edges[i])));
  h.total = static_cast<std::uint64_t>(scale);
  h.batches.assign(20, h.counts);
  h.batch_below.assign(20, h.below);
  return h;
}

}  // namespace

TEST(Histogram, GeometricEdges) {
  const auto e = geometric_edges(1e-9, 0.5, 170);
  ASSERT_EQ(e.size(), 171u);
  EXPECT_DOUBLE_EQ(e.front(), 1e-9);
  EXPECT_EQ(e.back(), 0.5);
  for (std::size_t i = 1; i < e.size(); ++i) EXPECT_NEAR(e[i] / e[i - 1], e[1] / e[0], 1e-12);
  EXPECT_EQ(bin_of(e, 1e-9), 0u);
  EXPECT_EQ(bin_of(e, std::sqrt(e[3] * e[4])), 3u);
  EXPECT_EQ(bin_of(e, 0.49), 169u);
}

TEST(Histogram, OrbitCountsAddUp) {
  const CircleMap m = CircleMap::example_nu(0.6);
  NoiseStream s(0.2, 3);
  const DistanceHistogram h = distance_histogram(m, s, 1000000, 1e-9, 170);
  EXPECT_EQ(h.total, 1000000u);
  std::uint64_t sum = h.below;
  for (auto c : h.counts) sum += c;
  EXPECT_EQ(sum, h.total);
  for (std::size_t i = 0; i < h.counts.size(); ++i) {
    std::uint64_t b = 0;
    for (const auto& batch : h.batches) b += batch[i];
    EXPECT_EQ(b, h.counts[i]);
  }
  EXPECT_DOUBLE_EQ(h.cumulative_below(h.counts.size()), 1.0);
  EXPECT_DOUBLE_EQ(visit_frequency_below(h, 0.5), 1.0);
  EXPECT_LT(visit_frequency_below(h, 1e-3), visit_frequency_below(h, 1e-2));
}

TEST(Histogram, RejectsShortRuns) {
  NoiseStream s(0.2, 3);
  EXPECT_THROW(distance_histogram(CircleMap::example_nu(0.6), s, 1000, 1e-9, 170), Error);
}

TEST(DiagonalMass, RecoversAPowerLaw) {
  for (double g : {0.1, 0.2133, 0.4}) {
    const DistanceHistogram h = power_law_histogram(g, 1e-9, 170);
    const ExponentFit f = diagonal_mass_fit(h, -g);
    EXPECT_NEAR(f.exponent, g, 1e-6);
    EXPECT_GT(f.r2, 0.999999);
    EXPECT_LE(f.ci.lo, f.exponent);
    EXPECT_GE(f.ci.hi, f.exponent);
    // density ~ d^{g-1}
    EXPECT_NEAR(density_exponent_fit(h).exponent, g - 1.0, 1e-3);
  }
}

TEST(DiagonalMass, Preconditions) {
  const DistanceHistogram h = power_law_histogram(0.2, 1e-9, 170);
  EXPECT_THROW(diagonal_mass_fit(h, -0.6), Error);
  EXPECT_THROW(diagonal_mass_fit(h, 0.1), Error);
  const DistanceHistogram coarse = power_law_histogram(0.2, 1e-3, 8);
  EXPECT_THROW(diagonal_mass_fit(coarse, -0.2), Error);
}

TEST(Excursions, CountsGrowAsEpsShrinks) {
  const CircleMap m = CircleMap::example_nu(0.6);
  const ExcursionStats st = excursion_counts(m, 0.2, 5, 1e-2, 0.1, {1e-4, 1e-6, 1e-5, 1e-7}, 300);
  ASSERT_EQ(st.excursions(), 300u);
  EXPECT_EQ(st.eps_grid, (std::vector<double>{1e-4, 1e-5, 1e-6, 1e-7}));
  EXPECT_EQ(st.censored_fraction(), 0.0);
  for (std::size_t r = 0; r < st.excursions(); ++r) {
    EXPECT_LT(st.entry_distance[r], 1e-3);
    for (std::size_t j = 1; j < st.eps_grid.size(); ++j) EXPECT_GE(st.counts[r][j], st.counts[r][j - 1]);
  }
  const auto mc = st.mean_counts();
  EXPECT_GT(mc.back(), mc.front());
}

TEST(Excursions, RejectsEpsOutsideTheEntryScale) {
  const CircleMap m = CircleMap::example_nu(0.6);
  EXPECT_THROW(excursion_counts(m, 0.2, 5, 1e-2, 0.1, {1e-2}, 10), Error);
  EXPECT_THROW(excursion_counts(m, 0.2, 5, 1e-2, 1.5, {1e-4}, 10), Error);
}

TEST(GrowthFit, RecoversALinearLaw) {
  ExcursionStats st;
  for (int j = 1; j <= 10; ++j) st.eps_grid.push_back(std::exp(-j));
  for (std::uint64_t r = 0; r < 400; ++r) {
    std::vector<std::uint64_t> row;
    for (std::uint64_t j = 1; j <= 10; ++j) row.push_back(2 + 3 * j + r % 5);
    st.counts.push_back(row);
  }
  const GrowthFit g = log_growth_fit(st);
  EXPECT_NEAR(g.slope, 3.0, 1e-12);
  EXPECT_NEAR(g.intercept, 4.0, 1e-9);
  EXPECT_NEAR(g.ci.lo, 3.0, 1e-12);
  EXPECT_NEAR(g.ci.hi, 3.0, 1e-12);
  const GrowthFit w = log_growth_fit(st, std::exp(-5.5), std::exp(-2.5));
  EXPECT_EQ(w.points, 3u);
  EXPECT_THROW(log_growth_fit(st, 1e-30, 1e-29), Error);
  st.counts.resize(199);
  EXPECT_THROW(log_growth_fit(st), Error);
}
