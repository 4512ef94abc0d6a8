#pragma once

// Normal(0, m Sigma) in dimension d with Sigma = diag(p) - p p^T, p = 1/(d+1).
// Closed forms: |Sigma| = (d+1)^{-(d+1)},  Sigma^{-1} = (d+1)(I + 1 1^T).

#include <cmath>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "dcut/group.hpp"

namespace dcut {

namespace detail {

/// log|det A| by Gaussian elimination with partial pivoting (A is copied).
inline double log_abs_det(std::vector<double> a, std::size_t d) {
  double logdet = 0;
  for (std::size_t c = 0; c < d; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < d; ++r)
      if (std::abs(a[r * d + c]) > std::abs(a[piv * d + c])) piv = r;
    if (a[piv * d + c] == 0) return -INFINITY;
    if (piv != c)
      for (std::size_t j = 0; j < d; ++j) std::swap(a[c * d + j], a[piv * d + j]);
    const double diag = a[c * d + c];
    logdet += std::log(std::abs(diag));
    for (std::size_t r = c + 1; r < d; ++r) {
      const double f = a[r * d + c] / diag;
      for (std::size_t j = c; j < d; ++j) a[r * d + j] -= f * a[c * d + j];
    }
  }
  return logdet;
}

}  // namespace detail

class NormalSetParams {
 public:
  static constexpr std::size_t kVerifyUpTo = 50;

  NormalSetParams(std::size_t d, double m, double delta) : d_(d), m_(m), delta_(delta) {
    if (d < 1) throw DomainError("normal set: d must be >= 1");
    if (!(m > 0)) throw DomainError("normal set: m must be positive");
    if (!(delta > 0 && delta < 1)) throw DomainError("normal set: delta must lie in (0,1)");
    if (d <= kVerifyUpTo) verify_closed_forms();
  }

  std::size_t d() const noexcept { return d_; }
  double m() const noexcept { return m_; }
  double delta() const noexcept { return delta_; }

  /// Sigma as a dense row-major d x d matrix.
  std::vector<double> sigma() const {
    const double p = 1.0 / static_cast<double>(d_ + 1);
    std::vector<double> s(d_ * d_, -p * p);
    for (std::size_t i = 0; i < d_; ++i) s[i * d_ + i] = p - p * p;
    return s;
  }

  /// log|m Sigma| = d log m - (d+1) log(d+1).
  double log_det_scaled() const {
    const double dd = static_cast<double>(d_);
    return dd * std::log(m_) - (dd + 1) * std::log(dd + 1);
  }

  /// x^T (m Sigma)^{-1} x = (d+1)(|x|^2 + (sum x)^2) / m.
  double quadratic_form(std::span<const double> x) const {
    double sq = 0, sum = 0;
    for (double v : x) {
      sq += v * v;
      sum += v;
    }
    return static_cast<double>(d_ + 1) * (sq + sum * sum) / m_;
  }

  /// Bounds on log phi_{Sigma,m} defining W^Normal_{m,delta}.
  double log_lower() const { return band(1 - delta_); }
  double log_upper() const { return band(1 + delta_); }

  /// Radius d^{-1/2} m^{2/3} of the bulk set A_{m,d}.
  double bulk_radius() const { return std::pow(static_cast<double>(d_), -0.5) * std::pow(m_, 2.0 / 3.0); }

 private:
  double band(double factor) const {
    const double dd = static_cast<double>(d_);
    return -dd / 2 * std::log(2 * std::numbers::pi * std::numbers::e * m_ / (factor * (dd + 1)));
  }

  void verify_closed_forms() const {
    const auto s = sigma();
    const double dd = static_cast<double>(d_);
    // (d+1)(I + 1 1^T) Sigma = I
    double worst = 0;
    for (std::size_t i = 0; i < d_; ++i) {
      for (std::size_t j = 0; j < d_; ++j) {
        double col_sum = 0;
        for (std::size_t r = 0; r < d_; ++r) col_sum += s[r * d_ + j];
        const double prod = (dd + 1) * (s[i * d_ + j] + col_sum);
        worst = std::max(worst, std::abs(prod - (i == j ? 1.0 : 0.0)));
      }
    }
    const double det_check = detail::log_abs_det(s, d_) + (dd + 1) * std::log(dd + 1);
    if (worst > 1e-10 || std::abs(std::expm1(det_check)) > 1e-10)
      throw NumericalError("closed-form Sigma identities failed numerically");
  }

  std::size_t d_;
  double m_;
  double delta_;
};

inline double normal_log_density(const NormalSetParams& prm, std::span<const double> x) {
  if (x.size() != prm.d()) throw DomainError("normal_density: dimension mismatch");
  const double dd = static_cast<double>(prm.d());
  return -dd / 2 * std::log(2 * std::numbers::pi) - 0.5 * prm.log_det_scaled() - 0.5 * prm.quadratic_form(x);
}

inline double normal_density(const NormalSetParams& prm, std::span<const double> x) {
  return std::exp(normal_log_density(prm, x));
}

/// x in W^Normal_{m,delta}.
inline bool normal_set_member(const NormalSetParams& prm, std::span<const double> x) {
  const double lp = normal_log_density(prm, x);
  return prm.log_lower() <= lp && lp <= prm.log_upper();
}

/// x in A_{m,d}: |x|_2 <= d^{-1/2} m^{2/3}.
inline bool bulk_set_member(const NormalSetParams& prm, std::span<const double> x) {
  double sq = 0;
  for (double v : x) sq += v * v;
  const double r = prm.bulk_radius();
  return sq <= r * r;
}

/// Exact Normal(0, m Sigma) sampler: project a standard normal in d+1
/// dimensions onto the sum-zero hyperplane and keep d coordinates.
class NormalSampler {
 public:
  NormalSampler(std::size_t d, double m) : d_(d), scale_(std::sqrt(m / static_cast<double>(d + 1))), z_(d + 1) {}

  template <std::uniform_random_bit_generator Rng>
  void sample(Rng& rng, std::vector<double>& out) {
    std::normal_distribution<double> nd;
    double mean = 0;
    for (auto& v : z_) {
      v = nd(rng);
      mean += v;
    }
    mean /= static_cast<double>(d_ + 1);
    out.resize(d_);
    for (std::size_t i = 0; i < d_; ++i) out[i] = scale_ * (z_[i] - mean);
  }

 private:
  std::size_t d_;
  double scale_;
  std::vector<double> z_;
};

}  // namespace dcut
