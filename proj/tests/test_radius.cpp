#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

#include <gtest/gtest.h>

#include "stpca/radius_select.hpp"

using namespace stpca;

namespace {
double brute_force_w1(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<std::size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[perm[i]]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(a.size());
}

RadiusSelectionConfig small_config(int d) {
  RadiusSelectionConfig cfg;
  cfg.d = d;
  cfg.n = 40;
  cfg.replicates = 20;
  cfg.seed = 7;
  return cfg;
}
}  // namespace

TEST(Wasserstein, Examples) {
  EXPECT_DOUBLE_EQ(wasserstein_1_sorted({0, 1}, {1, 0}), 0.0);
  EXPECT_DOUBLE_EQ(wasserstein_1_sorted({0, 0}, {1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(wasserstein_1_sorted({0, 2}, {1, 1}), 1.0);
  EXPECT_THROW(wasserstein_1_sorted({0}, {0, 1}), std::invalid_argument);
  EXPECT_THROW(wasserstein_1_sorted({}, {}), std::invalid_argument);
}

TEST(Wasserstein, MatchesExactAssignment) {
  Rng rng(21);
  std::normal_distribution<double> g;
  for (int t = 0; t < 20; ++t) {
    std::vector<double> a(7), b(7);
    for (auto& v : a) v = g(rng);
    for (auto& v : b) v = 2.0 * g(rng) + 0.5;
    EXPECT_NEAR(wasserstein_1_sorted(a, b), brute_force_w1(a, b), 1e-12);
  }
}

TEST(Wasserstein, MetricProperties) {
  Rng rng(22);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> a(30), b(30), c(30);
    for (auto* v : {&a, &b, &c})
      for (auto& x : *v) x = u(rng);
    EXPECT_EQ(wasserstein_1_sorted(a, a), 0.0);
    EXPECT_DOUBLE_EQ(wasserstein_1_sorted(a, b), wasserstein_1_sorted(b, a));
    EXPECT_LE(wasserstein_1_sorted(a, c), wasserstein_1_sorted(a, b) + wasserstein_1_sorted(b, c) + 1e-12);
  }
}

TEST(ExpectedW1, CircleMatchesAtUnitRadius) {
  RadiusSelectionConfig cfg = small_config(1);
  cfg.replicates = 50;
  EXPECT_LE(expected_wasserstein(1.0, cfg), 0.05);
}

TEST(ExpectedW1, SmallRadiusApproachesTorusMean) {
  const RadiusSelectionConfig cfg = small_config(2);
  const ExpectedWasserstein ew(cfg);
  EXPECT_NEAR(ew(1e-3), ew.torus_mean_distance(), 0.05 * ew.torus_mean_distance());
  EXPECT_THROW(ew(0.0), std::invalid_argument);
}

TEST(SelectRadius, Deterministic) {
  const RadiusSelectionConfig cfg = small_config(2);
  const RadiusEstimate a = select_radius(cfg);
  const RadiusEstimate b = select_radius(cfg);
  EXPECT_EQ(a.r_star, b.r_star);
  EXPECT_EQ(a.evaluations, b.evaluations);
}

TEST(SelectRadius, ReplicateOrderDoesNotMatter) {
  RadiusSelectionConfig cfg = small_config(2);
  cfg.replicates = 6;
  cfg.replicate_seeds = {11, 22, 33, 44, 55, 66};
  const double a = expected_wasserstein(1.4, cfg);
  cfg.replicate_seeds = {66, 33, 11, 55, 22, 44};
  EXPECT_NEAR(expected_wasserstein(1.4, cfg), a, 1e-12);
}

TEST(SelectRadius, CircleRadiusIsOne) {
  RadiusSelectionConfig cfg = small_config(1);
  cfg.replicates = 50;
  const RadiusEstimate est = select_radius(cfg);
  EXPECT_GE(est.r_star, 0.95);
  EXPECT_LE(est.r_star, 1.05);
}

TEST(SelectRadius, TraceIsUnimodal) {
  const RadiusEstimate est = select_radius(small_config(2));
  EXPECT_TRUE(trace_is_unimodal(est.evaluations));
  const auto [lo, hi] = small_config(2).bracket();
  EXPECT_GT(est.r_star, lo);
  EXPECT_LT(est.r_star, hi);
}

TEST(SelectRadius, UnimodalityCheck) {
  EXPECT_TRUE(trace_is_unimodal({{1, 3}, {2, 1}, {3, 2}}));
  EXPECT_FALSE(trace_is_unimodal({{1, 3}, {2, 1}, {3, 2}, {4, 0}}));
}

TEST(SelectRadius, Validation) {
  RadiusSelectionConfig cfg = small_config(2);
  cfg.d = 0;
  EXPECT_THROW(select_radius(cfg), std::invalid_argument);
  cfg = small_config(2);
  cfg.r_lo = 3.0;
  cfg.r_hi = 2.0;
  EXPECT_THROW(select_radius(cfg), std::invalid_argument);
  cfg = small_config(2);
  cfg.replicate_seeds = {1, 2};
  EXPECT_THROW(select_radius(cfg), std::invalid_argument);
}
