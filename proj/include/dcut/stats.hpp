#pragma once

// Small statistics toolbox shared by the Monte Carlo experiments.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

namespace dcut {

/// Neumaier compensated summation.
class CompensatedSum {
 public:
  void add(double x) noexcept {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Welford running moments.
class RunningMoments {
 public:
  void add(double x) noexcept {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  std::size_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }
  double stderr_mean() const noexcept { return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0; }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

inline double log_poisson_pmf(double lambda, std::uint64_t m) {
  if (lambda == 0.0) return m == 0 ? 0.0 : -INFINITY;
  const double md = static_cast<double>(m);
  return md * std::log(lambda) - lambda - std::lgamma(md + 1.0);
}

inline double poisson_pmf(double lambda, std::uint64_t m) { return std::exp(log_poisson_pmf(lambda, m)); }

inline double binomial_pmf(std::uint64_t n, double p, std::uint64_t x) {
  if (x > n) return 0.0;
  if (p <= 0.0) return x == 0 ? 1.0 : 0.0;
  if (p >= 1.0) return x == n ? 1.0 : 0.0;
  const double nd = static_cast<double>(n), xd = static_cast<double>(x);
  return std::exp(std::lgamma(nd + 1) - std::lgamma(xd + 1) - std::lgamma(nd - xd + 1) + xd * std::log(p) +
                  (nd - xd) * std::log1p(-p));
}

/// Upper tail of the chi-square distribution.
inline double chi_square_sf(double stat, double dof) {
  if (dof <= 0) return 1.0;
  if (stat <= 0) return 1.0;
  return boost::math::gamma_q(dof / 2.0, stat / 2.0);
}

struct GofResult {
  double statistic = 0.0;
  double dof = 0.0;
  double p_value = 1.0;
  std::size_t cells = 0;          // after merging
  std::size_t merged_cells = 0;   // original cells folded into neighbours
};

/// Pearson chi-square goodness of fit. Cells are visited in order and adjacent
/// cells are pooled until each pooled cell has expected count >= min_expected;
/// a short trailing pool is folded into the previous one.
inline GofResult chi_square_gof(std::span<const double> observed, std::span<const double> expected,
                                double min_expected = 5.0, std::size_t fitted_params = 0) {
  if (observed.size() != expected.size()) throw std::invalid_argument("chi_square_gof: size mismatch");
  std::vector<double> obs, exp;
  double o = 0, e = 0;
  std::size_t pooled = 0, merged = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    o += observed[i];
    e += expected[i];
    ++pooled;
    if (e >= min_expected) {
      obs.push_back(o);
      exp.push_back(e);
      merged += pooled - 1;
      o = e = 0;
      pooled = 0;
    }
  }
  if (pooled > 0) {
    if (!exp.empty()) {
      obs.back() += o;
      exp.back() += e;
      merged += pooled;
    } else {
      obs.push_back(o);
      exp.push_back(e);
      merged += pooled - 1;
    }
  }
  GofResult r;
  r.cells = exp.size();
  r.merged_cells = merged;
  for (std::size_t i = 0; i < exp.size(); ++i) {
    if (exp[i] > 0) r.statistic += (obs[i] - exp[i]) * (obs[i] - exp[i]) / exp[i];
  }
  r.dof = static_cast<double>(exp.size()) - 1.0 - static_cast<double>(fitted_params);
  r.p_value = r.dof > 0 ? chi_square_sf(r.statistic, r.dof) : 1.0;
  return r;
}

}  // namespace dcut
