#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "dcut/normal.hpp"
#include "dcut/rng.hpp"

using namespace dcut;

namespace {

Eigen::MatrixXd dense_sigma(std::size_t d, double m) {
  const double p = 1.0 / static_cast<double>(d + 1);
  Eigen::MatrixXd s = Eigen::MatrixXd::Constant(d, d, -p * p);
  s.diagonal().array() += p;
  return m * s;
}

double dense_log_density(const Eigen::MatrixXd& cov, const Eigen::VectorXd& x) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  const Eigen::MatrixXd l = llt.matrixL();
  const double logdet = 2 * l.diagonal().array().log().sum();
  const Eigen::VectorXd z = llt.matrixL().solve(x);
  return -0.5 * static_cast<double>(x.size()) * std::log(2 * std::numbers::pi) - 0.5 * logdet - 0.5 * z.squaredNorm();
}

}  // namespace

TEST(NormalParams, Validation) {
  EXPECT_THROW(NormalSetParams(0, 1, 0.5), DomainError);
  EXPECT_THROW(NormalSetParams(3, 0, 0.5), DomainError);
  EXPECT_THROW(NormalSetParams(3, 1, 1.0), DomainError);
  EXPECT_THROW(NormalSetParams(3, 1, 0.0), DomainError);
}

TEST(NormalParams, ClosedFormsAgainstDense) {
  for (std::size_t d : {1u, 2u, 7u, 20u, 50u}) {
    const NormalSetParams prm(d, 1.0, 0.2);
    const auto s = dense_sigma(d, 1.0);
    const double dd = static_cast<double>(d);
    const Eigen::MatrixXd inv = (dd + 1) * (Eigen::MatrixXd::Identity(d, d) + Eigen::MatrixXd::Ones(d, d));
    EXPECT_LE((inv * s - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff(), 1e-10) << d;
    EXPECT_NEAR(std::log(s.determinant()) + (dd + 1) * std::log(dd + 1), 0.0, 1e-10) << d;
    const auto flat = prm.sigma();
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) EXPECT_DOUBLE_EQ(flat[i * d + j], s(i, j));
  }
}

TEST(NormalDensity, AtOrigin) {
  for (std::size_t d : {1u, 4u, 50u})
    for (double m : {1.0, 250.0, 1e4}) {
      const NormalSetParams prm(d, m, 0.2);
      const std::vector<double> x(d, 0.0);
      const double dd = static_cast<double>(d);
      const double expect = -dd / 2 * std::log(2 * std::numbers::pi * m) + (dd + 1) / 2 * std::log(dd + 1);
      EXPECT_NEAR(normal_log_density(prm, x), expect, 1e-10 * std::abs(expect) + 1e-12);
    }
}

TEST(NormalDensity, QuadraticFormAtUnitVector) {
  for (std::size_t d : {1u, 3u, 10u}) {
    const double m = 7.5;
    const NormalSetParams prm(d, m, 0.2);
    std::vector<double> e1(d, 0.0);
    e1[0] = 1;
    EXPECT_NEAR(prm.quadratic_form(e1), 2.0 * (d + 1) / m, 1e-14);
  }
}

TEST(NormalDensity, MatchesDenseFactorization) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  for (std::size_t d = 1; d <= 8; ++d)
    for (double m : {0.5, 30.0, 1e3}) {
      const NormalSetParams prm(d, m, 0.3);
      const auto cov = dense_sigma(d, m);
      for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> x(d);
        Eigen::VectorXd ex(d);
        for (std::size_t i = 0; i < d; ++i) ex[i] = x[i] = nd(rng) * std::sqrt(m) / (d + 1);
        const double ref = std::exp(dense_log_density(cov, ex));
        EXPECT_NEAR(normal_density(prm, x), ref, 1e-10 * ref) << "d=" << d << " m=" << m;
      }
    }
  EXPECT_THROW(normal_log_density(NormalSetParams(3, 1, 0.2), std::vector<double>(2, 0.0)), DomainError);
}

TEST(NormalSets, OriginIsAboveTheBand) {
  const NormalSetParams prm(50, 1e4, 0.05);
  const std::vector<double> x(50, 0.0);
  EXPECT_GT(normal_log_density(prm, x), prm.log_upper());
  EXPECT_FALSE(normal_set_member(prm, x));
  EXPECT_LT(prm.log_lower(), prm.log_upper());
}

TEST(NormalSets, BandMatchesChiSquareWindow) {
  // x = r e_1 gives Q = 2 (d+1) r^2 / m; membership is Q in
  // [d + log(d+1) - d log(1+delta), d + log(d+1) - d log(1-delta)].
  const std::size_t d = 6;
  const double m = 100, delta = 0.3, dd = d;
  const NormalSetParams prm(d, m, delta);
  const double q_lo = dd + std::log(dd + 1) - dd * std::log1p(delta);
  const double q_hi = dd + std::log(dd + 1) - dd * std::log1p(-delta);
  for (double q : {0.5 * q_lo, 0.999 * q_lo, 1.001 * q_lo, 0.5 * (q_lo + q_hi), 0.999 * q_hi, 1.001 * q_hi}) {
    std::vector<double> x(d, 0.0);
    x[0] = std::sqrt(q * m / (2 * (dd + 1)));
    EXPECT_EQ(normal_set_member(prm, x), q >= q_lo && q <= q_hi) << q;
  }
}

TEST(NormalSets, BulkBoundaryIsMember) {
  const std::size_t d = 9;
  const double m = 1e3;
  const NormalSetParams prm(d, m, 0.2);
  const double r = std::pow(d, -0.5) * std::pow(m, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(prm.bulk_radius(), r);
  std::vector<double> x(d, 0.0);
  x[0] = r;
  EXPECT_TRUE(bulk_set_member(prm, x));
  x[0] = std::nextafter(r, 2 * r) * (1 + 1e-12);
  EXPECT_FALSE(bulk_set_member(prm, x));
  const std::vector<double> y(d, r / 3);  // |y| = r
  EXPECT_EQ(bulk_set_member(prm, y), r * r / 9 * d <= r * r);
}

TEST(NormalSampler, CovarianceIsMSigma) {
  const std::size_t d = 10, n = 100000;
  const double m = 1e3;
  NormalSampler sampler(d, m);
  auto rng = make_stream(4, 0);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
  std::vector<double> x;
  for (std::size_t i = 0; i < n; ++i) {
    sampler.sample(rng, x);
    const Eigen::Map<const Eigen::VectorXd> v(x.data(), d);
    acc += v * v.transpose();
    mean += v;
  }
  acc /= static_cast<double>(n);
  mean /= static_cast<double>(n);
  const auto cov = dense_sigma(d, m);
  for (std::size_t i = 0; i < d; ++i) {
    EXPECT_LE(std::abs(mean[i]), 5 * std::sqrt(cov(i, i) / n));
    for (std::size_t j = 0; j < d; ++j) {
      const double se = std::sqrt((cov(i, i) * cov(j, j) + cov(i, j) * cov(i, j)) / n);
      EXPECT_LE(std::abs(acc(i, j) - cov(i, j)), 5 * se) << i << "," << j;
    }
  }
}

TEST(NormalSampler, ImportanceIntegralIsOne) {
  // Proposal: isotropic normal with variance 2m/(d+1), wider than every eigenvalue of m Sigma.
  for (std::size_t d = 1; d <= 5; ++d) {
    const double m = 40;
    const NormalSetParams prm(d, m, 0.2);
    const double var = 2 * m / (d + 1);
    auto rng = make_stream(8, d);
    std::normal_distribution<double> nd(0, std::sqrt(var));
    const std::size_t n = 200000;
    double sum = 0;
    std::vector<double> x(d);
    for (std::size_t i = 0; i < n; ++i) {
      double sq = 0;
      for (auto& v : x) {
        v = nd(rng);
        sq += v * v;
      }
      const double log_q = -0.5 * d * std::log(2 * std::numbers::pi * var) - sq / (2 * var);
      sum += std::exp(normal_log_density(prm, x) - log_q);
    }
    EXPECT_NEAR(sum / n, 1.0, 0.02) << "d=" << d;
  }
}

TEST(NormalSampler, TypicalFrequencyMatchesChiSquare) {
  // Under xi ~ Normal(0, m Sigma), Q is chi^2_d, so membership frequency is a chi^2 window probability.
  const std::size_t d = 20, n = 20000;
  const double m = 500, delta = 0.4, dd = d;
  const NormalSetParams prm(d, m, delta);
  NormalSampler sampler(d, m);
  auto rng = make_stream(12, 0);
  std::vector<double> x;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sampler.sample(rng, x);
    hits += normal_set_member(prm, x);
  }
  const double q_lo = dd + std::log(dd + 1) - dd * std::log1p(delta);
  const double q_hi = dd + std::log(dd + 1) - dd * std::log1p(-delta);
  std::chi_squared_distribution<double> chi(dd);
  auto ref_rng = make_stream(13, 0);
  std::size_t ref_hits = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double q = chi(ref_rng);
    ref_hits += q >= q_lo && q <= q_hi;
  }
  const double p1 = static_cast<double>(hits) / n, p2 = static_cast<double>(ref_hits) / n;
  EXPECT_LE(std::abs(p1 - p2), 4 * std::sqrt(2 * p2 * (1 - p2) / n));
}
