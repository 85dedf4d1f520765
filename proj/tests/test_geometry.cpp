#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/LU>
#include <gtest/gtest.h>

#include "stpca/geometry.hpp"
#include "support.hpp"

using namespace stpca;
using testing_support::ks_statistic;

TEST(Wrap, CanonicalRepresentatives) {
  EXPECT_EQ(wrap(Eigen::Vector2d(0.0, 0.0)).angles(), Eigen::Vector2d(0.0, 0.0));
  EXPECT_DOUBLE_EQ(wrap(Eigen::VectorXd::Constant(1, pi)).angles()[0], -pi);
  const TorusPoint p{3 * pi / 2, -5 * pi / 2};
  EXPECT_NEAR(p.angles()[0], -pi / 2, 1e-15);
  EXPECT_NEAR(p.angles()[1], -pi / 2, 1e-15);
}

TEST(Wrap, RejectsNonFinite) {
  EXPECT_THROW(TorusPoint({std::nan(""), 0.0}), std::invalid_argument);
  EXPECT_THROW(TorusPoint({std::numeric_limits<double>::infinity()}), std::invalid_argument);
}

TEST(Wrap, AlwaysInHalfOpenInterval) {
  Rng rng(3);
  std::uniform_real_distribution<double> u(-1e4, 1e4);
  for (int i = 0; i < 10000; ++i) {
    const double w = wrap_angle(u(rng));
    EXPECT_GE(w, -pi);
    EXPECT_LT(w, pi);
  }
}

TEST(CircleDistance, Examples) {
  EXPECT_NEAR(circle_distance(0.0, pi / 2), pi / 2, 1e-15);
  EXPECT_NEAR(circle_distance(-3.0, 3.0), 2 * pi - 6.0, 1e-12);
  EXPECT_EQ(circle_distance(1.234, 1.234), 0.0);
}

TEST(TorusDistance, Examples) {
  EXPECT_NEAR(torus_distance(Eigen::Vector2d(0, 0), Eigen::Vector2d(pi / 2, pi / 2)), pi / std::sqrt(2.0), 1e-12);
  const Eigen::Vector2d x(-pi, -pi), y(pi - 1e-9, pi - 1e-9);
  EXPECT_NEAR(torus_distance(x, y), std::sqrt(2.0) * 1e-9, 1e-15);
  EXPECT_THROW(torus_distance(Eigen::Vector2d(0, 0), Eigen::Vector3d(0, 0, 0)), std::invalid_argument);
}

TEST(TorusDistance, MetricAxiomsAndPeriodicity) {
  Rng rng(11);
  const Eigen::MatrixXd pts = sample_uniform_torus(3 * 10000, 3, rng);
  std::uniform_int_distribution<int> shift(-3, 3);
  for (int t = 0; t < 10000; ++t) {
    const Eigen::VectorXd a = pts.row(3 * t), b = pts.row(3 * t + 1), c = pts.row(3 * t + 2);
    const double ab = torus_distance(a, b);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, std::sqrt(3.0) * pi + 1e-12);
    EXPECT_EQ(ab, torus_distance(b, a));
    EXPECT_LE(ab, torus_distance(a, c) + torus_distance(c, b) + 1e-12);
    EXPECT_LE(torus_distance(a, a), 1e-12);
    Eigen::VectorXd shifted = a;
    for (Eigen::Index k = 0; k < 3; ++k) shifted[k] += two_pi * shift(rng);
    EXPECT_NEAR(torus_distance(shifted, b), ab, 1e-10);
  }
}

TEST(SphereDistance, Examples) {
  EXPECT_NEAR(sphere_distance(SpherePoint(Eigen::Vector3d(2, 0, 0), 2), SpherePoint(Eigen::Vector3d(0, 2, 0), 2)), pi, 1e-14);
  EXPECT_EQ(sphere_distance(Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(0, 0, 1), 1.0), 0.0);
  EXPECT_NEAR(sphere_distance(Eigen::Vector3d(0, 0, 1), Eigen::Vector3d(0, 0, -1), 1.0), pi, 1e-15);
  EXPECT_THROW(sphere_distance(SpherePoint(Eigen::Vector3d(1, 0, 0), 1), SpherePoint(Eigen::Vector3d(2, 0, 0), 2)), std::invalid_argument);
}

TEST(SphereDistance, MetricAxiomsAndScaling) {
  Rng rng(12);
  const double r = 1.7;
  const Eigen::MatrixXd pts = sample_uniform_sphere(3 * 10000, 2, r, rng);
  for (int t = 0; t < 10000; ++t) {
    const Eigen::VectorXd a = pts.row(3 * t), b = pts.row(3 * t + 1), c = pts.row(3 * t + 2);
    const double ab = sphere_distance(a, b, r);
    EXPECT_GE(ab, 0.0);
    EXPECT_LE(ab, r * pi + 1e-12);
    EXPECT_NEAR(ab, sphere_distance(b, a, r), 1e-15);
    EXPECT_LE(ab, sphere_distance(a, c, r) + sphere_distance(c, b, r) + 1e-12);
    EXPECT_LE(sphere_distance(a, a, r), 1e-12);
    EXPECT_NEAR(ab, r * sphere_distance(a / r, b / r, 1.0), 1e-12);
  }
}

TEST(SpherePoint, RejectsOffSphere) {
  EXPECT_THROW(SpherePoint(Eigen::Vector3d(1, 1, 0), 1.0), std::invalid_argument);
  EXPECT_THROW(SpherePoint(Eigen::Vector3d(1, 0, 0), -1.0), std::invalid_argument);
  EXPECT_NO_THROW(SpherePoint(Eigen::Vector3d(0, 0, 2), 2.0));
}

namespace {
void expect_proper_rotation(const Eigen::MatrixXd& m, const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  EXPECT_LE((m.transpose() * m - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-9);
  EXPECT_NEAR(m.determinant(), 1.0, 1e-9);
  Eigen::VectorXd pole = Eigen::VectorXd::Zero(n);
  pole[n - 1] = 1.0;
  EXPECT_LE((m * v - pole).cwiseAbs().maxCoeff(), 1e-9);
}
}  // namespace

TEST(RotationToPole, NorthPoleIsIdentity) {
  const auto rot = rotation_to_north_pole(SpherePoint(Eigen::Vector3d(0, 0, 1), 1.0));
  EXPECT_EQ(rot.matrix, Eigen::Matrix3d::Identity());
}

TEST(RotationToPole, EquatorPoint) { expect_proper_rotation(rotation_matrix_to_north_pole(Eigen::Vector3d(1, 0, 0)), Eigen::Vector3d(1, 0, 0)); }

TEST(RotationToPole, SouthPoleFallback) {
  for (int n : {2, 3, 5}) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
    v[n - 1] = -1.0;
    expect_proper_rotation(rotation_matrix_to_north_pole(v), v);
  }
}

TEST(RotationToPole, RandomDirections) {
  Rng rng(5);
  for (int d : {1, 2, 3, 6}) {
    const Eigen::MatrixXd pts = sample_uniform_sphere(1000, d, 1.0, rng);
    for (Eigen::Index i = 0; i < pts.rows(); ++i) expect_proper_rotation(rotation_matrix_to_north_pole(pts.row(i).transpose()), pts.row(i).transpose());
  }
}

TEST(Sampling, UniformTorusRangeAndKs) {
  Rng rng(1);
  const Eigen::MatrixXd one = sample_uniform_torus(1, 2, rng);
  EXPECT_EQ(one.rows(), 1);
  EXPECT_TRUE((one.array() >= -pi).all() && (one.array() < pi).all());

  const Eigen::MatrixXd big = sample_uniform_torus(100000, 1, rng);
  std::vector<double> s(big.data(), big.data() + big.size());
  EXPECT_LT(ks_statistic(s, [](double x) { return (x + pi) / two_pi; }), 0.01);
}

TEST(Sampling, Deterministic) {
  Rng a(99), b(99);
  EXPECT_EQ(sample_uniform_torus(50, 3, a), sample_uniform_torus(50, 3, b));
  EXPECT_EQ(sample_uniform_sphere(50, 3, 2.0, a), sample_uniform_sphere(50, 3, 2.0, b));
}

TEST(Sampling, UniformSphere) {
  Rng rng(2);
  const double r = 1.3;
  const Eigen::MatrixXd pts = sample_uniform_sphere(100000, 2, r, rng);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) ASSERT_NEAR(pts.row(i).norm(), r, 1e-9 * r);
  EXPECT_LT((pts.colwise().mean() / r).norm(), 0.02);
  // Archimedes: the last coordinate of a uniform point on S^2 is uniform on [-r, r].
  std::vector<double> z(static_cast<std::size_t>(pts.rows()));
  for (Eigen::Index i = 0; i < pts.rows(); ++i) z[static_cast<std::size_t>(i)] = pts(i, 2);
  EXPECT_LT(ks_statistic(z, [r](double x) { return (x + r) / (2 * r); }), 0.01);
}

TEST(Sampling, WrappedNormalDegenerateCovariance) {
  Rng rng(4);
  const TorusPoint mu{4.0, -1.0};
  const Eigen::MatrixXd s = sample_wrapped_normal(20, mu, Eigen::Matrix2d::Zero(), rng);
  for (Eigen::Index i = 0; i < s.rows(); ++i) EXPECT_EQ(s.row(i).transpose(), mu.angles());
}

TEST(Sampling, WrappedNormalRejectsIndefinite) {
  Rng rng(4);
  Eigen::Matrix2d bad;
  bad << 1.0, 2.0, 2.0, 1.0;
  EXPECT_THROW(sample_wrapped_normal(5, TorusPoint{0.0, 0.0}, bad, rng), std::invalid_argument);
}

TEST(Sampling, WrappedNormalCircularMean) {
  Rng rng(6);
  const Eigen::MatrixXd s = sample_wrapped_normal(10000, TorusPoint{0.0}, Eigen::MatrixXd::Constant(1, 1, 0.01), rng);
  double c = 0.0, sn = 0.0;
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    c += std::cos(s(i, 0));
    sn += std::sin(s(i, 0));
  }
  EXPECT_LT(std::abs(std::atan2(sn, c)), 0.02);
}

TEST(Sampling, WrappedNormalMoments) {
  Rng rng(8);
  Eigen::Matrix2d sigma;
  sigma << 0.04, 0.02, 0.02, 0.09;
  const Eigen::MatrixXd s = sample_wrapped_normal(50000, TorusPoint{1.0, -2.0}, sigma, rng);
  Eigen::MatrixXd centered(s.rows(), 2);
  for (Eigen::Index i = 0; i < s.rows(); ++i) centered.row(i) << angle_diff(s(i, 0), 1.0), angle_diff(s(i, 1), -2.0);
  const Eigen::Matrix2d cov = centered.transpose() * centered / static_cast<double>(s.rows());
  EXPECT_LE((cov - sigma).cwiseAbs().maxCoeff(), 0.003);
}

TEST(FrechetMean, Examples) {
  EXPECT_NEAR(frechet_mean_circle({0.1, 0.3}), 0.2, 1e-15);
  EXPECT_NEAR(std::abs(frechet_mean_circle({pi - 0.1, -pi + 0.1})), pi, 1e-12);
  EXPECT_THROW(frechet_mean_circle({}), std::invalid_argument);
}

TEST(FrechetMean, MatchesGridSearch) {
  Rng rng(21);
  std::normal_distribution<double> g(2.5, 1.0);
  std::vector<double> a(100);
  for (double& v : a) v = wrap_angle(g(rng));
  const double mean = frechet_mean_circle(a);
  const std::vector<double> w(a.size(), 1.0);
  double best = 0.0, best_f = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 1000000; ++k) {
    const double t = -pi + two_pi * k / 1000000.0;
    const double f = circle_frechet_objective(t, a, w);
    if (f < best_f) {
      best_f = f;
      best = t;
    }
  }
  EXPECT_LT(circle_distance(mean, best), 1e-5);
  std::uniform_real_distribution<double> probe(-pi, pi);
  const double fm = circle_frechet_objective(mean, a, w);
  for (int k = 0; k < 1000; ++k) EXPECT_LE(fm, circle_frechet_objective(probe(rng), a, w) + 1e-12);
}

TEST(FrechetMean, WeightsShiftTheMean) {
  EXPECT_NEAR(frechet_mean_circle({0.0, 1.0}, std::vector<double>{3.0, 1.0}), 0.25, 1e-12);
  EXPECT_THROW(frechet_mean_circle({0.0, 1.0}, std::vector<double>{1.0}), std::invalid_argument);
}
