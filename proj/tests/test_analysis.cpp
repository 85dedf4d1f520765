#include <cmath>
#include <random>
#include <stdexcept>

#include <gtest/gtest.h>

#include "stpca/analysis.hpp"
#include "support.hpp"

using namespace stpca;

namespace {
std::vector<double> von_mises_like(int n, double mu, double sd, Rng& rng) {
  std::normal_distribution<double> g(mu, sd);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (auto& a : out) a = wrap_angle(g(rng));
  return out;
}

std::vector<double> uniform_angles(int n, Rng& rng) {
  std::uniform_real_distribution<double> u(-pi, pi);
  std::vector<double> out(static_cast<std::size_t>(n));
  for (auto& a : out) a = u(rng);
  return out;
}
}  // namespace

TEST(Kde, IntegratesToOne) {
  Rng rng(81);
  for (double h : {0.05, 0.3, 1.0, pi}) {
    const CircularKde kde(von_mises_like(50, 0.5, 0.7, rng), h);
    const int m = 20000;
    double s = 0.0;
    for (int j = 0; j < m; ++j) s += kde.density(-pi + two_pi * j / m);
    EXPECT_NEAR(s * two_pi / m, 1.0, 1e-6);
  }
}

TEST(Kde, PeriodicAndDerivative) {
  Rng rng(82);
  const CircularKde kde(uniform_angles(30, rng), 0.4);
  for (double t : {-3.0, -1.0, 0.2, 2.5}) {
    EXPECT_NEAR(kde.density(t), kde.density(t + two_pi), 1e-12);
    const double fd = (kde.density(t + 1e-6) - kde.density(t - 1e-6)) / 2e-6;
    EXPECT_NEAR(kde.derivative(t), fd, 1e-5);
  }
}

TEST(Kde, Validation) {
  EXPECT_THROW(CircularKde({0.0}, 0.3), std::invalid_argument);
  EXPECT_THROW(CircularKde({0.0, 1.0}, 0.0), std::invalid_argument);
  EXPECT_THROW(CircularKde({0.0, 1.0}, 3.2), std::invalid_argument);
  EXPECT_THROW(CircularKde({0.0, std::nan("")}, 0.3), std::invalid_argument);
  EXPECT_THROW(circular_kde({}), std::invalid_argument);
}

TEST(Kde, DefaultBandwidth) {
  Rng rng(83);
  const std::vector<double> a = von_mises_like(200, 1.0, 0.3, rng);
  EXPECT_NEAR(default_bandwidth(a), circular_sd(a) * std::pow(200.0, -1.0 / 7.0), 1e-15);
  EXPECT_LE(default_bandwidth(uniform_angles(200, rng)), pi / 2);
  EXPECT_GT(default_bandwidth({1.0, 1.0, 1.0}), 0.0);
}

TEST(ModeCluster, SingleTightCluster) {
  Rng rng(84);
  const ClusterAssignment c = mode_cluster(circular_kde(von_mises_like(100, 2.0, 0.1, rng)));
  ASSERT_EQ(c.modes.size(), 1u);
  EXPECT_NEAR(c.modes[0], 2.0, 0.05);
  for (int l : c.labels) EXPECT_EQ(l, 0);
}

TEST(ModeCluster, TwoAntipodalClusters) {
  Rng rng(85);
  std::vector<double> a = von_mises_like(80, 0.0, 0.2, rng);
  const std::vector<double> b = von_mises_like(80, pi, 0.2, rng);
  a.insert(a.end(), b.begin(), b.end());
  std::vector<int> truth(160, 0);
  std::fill(truth.begin() + 80, truth.end(), 1);
  const ClusterAssignment c = mode_cluster(circular_kde(a, 0.2));
  EXPECT_EQ(c.modes.size(), 2u);
  EXPECT_EQ(c.basin_boundaries.size(), 2u);
  EXPECT_GE(classification_rate(c.labels, truth), 0.99);
}

TEST(ModeCluster, RotationEquivariance) {
  Rng rng(86);
  std::vector<double> a = von_mises_like(60, -1.0, 0.3, rng);
  const std::vector<double> b = von_mises_like(60, 1.5, 0.3, rng);
  a.insert(a.end(), b.begin(), b.end());
  const ClusterAssignment c0 = mode_cluster(circular_kde(a, 0.3));
  std::vector<double> rotated = a;
  for (auto& v : rotated) v = wrap_angle(v + 2.0);
  const ClusterAssignment c1 = mode_cluster(circular_kde(rotated, 0.3));
  ASSERT_EQ(c0.modes.size(), c1.modes.size());
  EXPECT_DOUBLE_EQ(classification_rate(c0.labels, c1.labels), 1.0);
}

TEST(ModeCluster, OversmoothingGivesOneCluster) {
  Rng rng(87);
  std::vector<double> a = von_mises_like(50, -1.0, 0.3, rng);
  const std::vector<double> b = von_mises_like(50, 1.0, 0.3, rng);
  a.insert(a.end(), b.begin(), b.end());
  EXPECT_EQ(mode_cluster(circular_kde(a, pi)).modes.size(), 1u);
}

TEST(ModeCluster, FlatDensityIsDegenerate) {
  std::vector<double> a(64);
  for (int i = 0; i < 64; ++i) a[static_cast<std::size_t>(i)] = -pi + two_pi * i / 64;
  const ClusterAssignment c = mode_cluster(circular_kde(a, 1.0));
  EXPECT_TRUE(c.degenerate);
  EXPECT_THROW(mode_cluster(circular_kde(a, 1.0), 4), std::invalid_argument);
}

TEST(ClassificationRate, Examples) {
  EXPECT_DOUBLE_EQ(classification_rate({1, 1, 0, 0}, {0, 0, 1, 1}), 1.0);
  EXPECT_DOUBLE_EQ(classification_rate({0, 0, 0, 0}, {0, 0, 1, 1}), 0.5);
  EXPECT_DOUBLE_EQ(classification_rate({0, 1, 2}, {0, 0, 0}), 1.0 / 3.0);
  EXPECT_THROW(classification_rate({0}, {0, 1}), std::invalid_argument);
  EXPECT_THROW(classification_rate({-1}, {0}), std::invalid_argument);
}

TEST(Watson, AllEqualIsHighlySignificant) {
  const UniformityTest t = watson_uniformity_test(std::vector<double>(100, 0.7));
  EXPECT_LT(t.p_value, 1e-6);
}

TEST(Watson, RotationInvariant) {
  Rng rng(88);
  const std::vector<double> a = von_mises_like(150, 0.0, 1.0, rng);
  std::vector<double> b = a;
  for (auto& v : b) v = wrap_angle(v + 1.234);
  EXPECT_NEAR(watson_uniformity_test(a).statistic, watson_uniformity_test(b).statistic, 1e-10);
}

TEST(Watson, PValuesAreUniformUnderTheNull) {
  Rng rng(89);
  std::vector<double> p;
  for (int t = 0; t < 500; ++t) p.push_back(watson_uniformity_test(uniform_angles(200, rng)).p_value);
  // 1% critical value of the one-sample KS statistic at n = 500 is about 0.073
  EXPECT_LT(testing_support::ks_statistic(p, [](double x) { return std::clamp(x, 0.0, 1.0); }), 0.073);
}

TEST(Watson, PValueSeries) {
  EXPECT_DOUBLE_EQ(watson_p_value(0.0), 1.0);
  // both series agree where they meet
  const double edge = 1.0 / (pi * pi);
  EXPECT_NEAR(watson_p_value(edge * (1 - 1e-12)), watson_p_value(edge), 1e-10);
  for (double u = 0.001; u < 0.5; u += 0.001) EXPECT_LE(watson_p_value(u + 0.001), watson_p_value(u));
  EXPECT_NEAR(watson_p_value(0.187), 0.05, 0.002);
  EXPECT_NEAR(watson_p_value(0.267), 0.01, 0.001);
  EXPECT_THROW(watson_uniformity_test(std::vector<double>(9, 0.0)), std::invalid_argument);
}

TEST(TorusLineFit, DiagonalAcrossTheSeam) {
  Eigen::MatrixXd s(50, 2);
  for (int j = 0; j < 50; ++j) s.row(j) << wrap_angle(2.5 + 0.1 * j), wrap_angle(-2.0 + 0.1 * j);
  const TorusLineFit fit = torus_linear_fit(s);
  EXPECT_NEAR(fit.r_squared, 1.0, 1e-12);
  EXPECT_NEAR(std::abs(fit.direction[0]), std::sqrt(0.5), 1e-10);
  EXPECT_NEAR(fit.unwrapped(49, 0) - fit.unwrapped(0, 0), 4.9, 1e-10);
  EXPECT_THROW(torus_linear_fit(Eigen::MatrixXd::Zero(1, 2)), std::invalid_argument);
}
