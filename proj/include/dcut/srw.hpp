#pragma once

// Rate-1 simple random walk W_s on Z, its entropy h(s), the entropic time and
// the cutoff-time formula t0(k, G).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "dcut/group.hpp"
#include "dcut/stats.hpp"

namespace dcut {

/// Chernoff bound P(|W_s| > x) <= 2 exp(-(x asinh(x/s) - s(sqrt(1+(x/s)^2) - 1))),
/// from E exp(lambda W_s) = exp(s (cosh lambda - 1)).
inline double srw_tail_bound(double s, double x) {
  if (s == 0) return x >= 0 ? 0.0 : 1.0;
  const double r = x / s;
  const double expo = x * std::asinh(r) - s * (std::sqrt(1 + r * r) - 1);
  return std::min(1.0, 2 * std::exp(-expo));
}

/// P(W_s = x) for all |x| <= radius, p(x) = e^{-s} I_|x|(s). Built by Miller's
/// backward recurrence I_{x-1} = (2x/s) I_x + I_{x+1}, normalized through
/// p(0) + 2 sum_{x>0} p(x) = 1. The radius is the first x where the tail bound
/// drops below 1e-17, which certifies a truncation error <= 1e-14 per entry.
class SrwPmf {
 public:
  explicit SrwPmf(double s) : s_(s) {
    if (!(s >= 0) || !std::isfinite(s)) throw DomainError("srw_pmf: s must be a finite nonnegative number");
    if (s == 0) {
      p_ = {1.0};
      return;
    }
    std::int64_t radius = 1;
    while (srw_tail_bound(s, static_cast<double>(radius)) > 1e-17) radius = radius * 2;
    std::int64_t lo = radius / 2, hi = radius;
    while (lo < hi) {
      const std::int64_t mid = (lo + hi) / 2;
      if (srw_tail_bound(s, static_cast<double>(mid)) > 1e-17)
        lo = mid + 1;
      else
        hi = mid;
    }
    radius = std::max<std::int64_t>(lo, 1);
    tail_bound_ = srw_tail_bound(s, static_cast<double>(radius));

    const std::int64_t start = radius + 32 + static_cast<std::int64_t>(4 * std::sqrt(static_cast<double>(radius)));
    std::vector<double> w(static_cast<std::size_t>(start + 2), 0.0);
    w[static_cast<std::size_t>(start)] = 1e-300;
    for (std::int64_t x = start; x >= 1; --x) {
      const auto i = static_cast<std::size_t>(x);
      w[i - 1] = (2.0 * static_cast<double>(x) / s) * w[i] + w[i + 1];
      if (w[i - 1] > 1e250) {
        for (std::size_t j = i - 1; j < w.size(); ++j) w[j] *= 1e-250;
      }
    }
    std::vector<double> v(w.begin(), w.begin() + radius + 1);
    CompensatedSum total;
    total.add(v[0]);
    for (std::size_t x = 1; x < v.size(); ++x) total.add(2 * v[x]);
    const double z = total.value();
    for (double& e : v) e /= z;
    p_ = std::move(v);
  }

  double s() const noexcept { return s_; }
  std::int64_t radius() const noexcept { return static_cast<std::int64_t>(p_.size()) - 1; }
  double tail_bound() const noexcept { return tail_bound_; }

  double operator()(std::int64_t x) const noexcept {
    const auto a = static_cast<std::size_t>(x < 0 ? -x : x);
    return a < p_.size() ? p_[a] : 0.0;
  }

  /// p(0), p(1), ..., p(radius).
  const std::vector<double>& half() const noexcept { return p_; }

  double entropy() const {
    CompensatedSum h;
    for (std::size_t x = 0; x < p_.size(); ++x) {
      const double v = p_[x];
      if (v > 0) h.add((x == 0 ? 1.0 : 2.0) * -v * std::log(v));
    }
    return h.value();
  }

  /// Var(-log p(W_s)).
  double varentropy() const {
    const double h = entropy();
    CompensatedSum s;
    for (std::size_t x = 0; x < p_.size(); ++x) {
      const double v = p_[x];
      if (v > 0) {
        const double q = -std::log(v) - h;
        s.add((x == 0 ? 1.0 : 2.0) * v * q * q);
      }
    }
    return s.value();
  }

 private:
  double s_;
  double tail_bound_ = 0.0;
  std::vector<double> p_;
};

inline double srw_pmf(double s, std::int64_t x) { return SrwPmf(s)(x); }

inline double h_asymptotic(double s) { return 0.5 * std::log(2 * std::numbers::pi * std::numbers::e * s); }

/// Above this s the exact table is too wide; h(s) - h_asymptotic(s) = O(1/s) < 1e-10 there.
inline constexpr double kHExactCutover = 1e9;

/// Entropy (nats) of the rate-1 simple random walk on Z at time s.
inline double h_exact(double s) {
  if (s == 0) return 0.0;
  if (s > kHExactCutover) return h_asymptotic(s);
  return SrwPmf(s).entropy();
}

/// Leading-order asymptotics (1/2) log(2 pi e s).

/// sup over a grid of Var(Q^SRW(s)); the measured stand-in for the constant beta.
inline double srw_varentropy_sup(const std::vector<double>& grid) {
  double best = 0;
  for (double s : grid) best = std::max(best, s == 0 ? 0.0 : SrwPmf(s).varentropy());
  return best;
}

/// t_ent(k, N): the t solving k h(t/k) = log N, by doubling then bisection.
inline double entropic_time(std::size_t k, double log_n, double tol = 1e-9) {
  if (k < 1) throw DomainError("entropic_time: k must be >= 1");
  if (!(log_n >= 0)) throw DomainError("entropic_time: log N must be nonnegative");
  if (log_n == 0) return 0.0;
  const double kd = static_cast<double>(k);
  auto f = [&](double t) { return kd * h_exact(t / kd) - log_n; };
  double lo = 0, hi = 1;
  int guard = 0;
  while (f(hi) < 0) {
    lo = hi;
    hi *= 2;
    if (++guard > 200) throw NumericalError("entropic_time: could not bracket the root");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double v = f(mid);
    if (std::abs(v) <= tol) return mid;
    if (v < 0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 4 * std::numeric_limits<double>::epsilon() * hi) {
      if (std::abs(f(lo)) <= tol) return lo;
      if (std::abs(f(hi)) <= tol) return hi;
      break;
    }
  }
  throw NumericalError("entropic_time: bisection did not reach tolerance");
}

enum class Regime { SmallK, Comparable, LargeK };

inline const char* regime_label(Regime r) {
  switch (r) {
    case Regime::SmallK: return "k<<log|G|";
    case Regime::Comparable: return "k~log|G|";
    case Regime::LargeK: return "k>>log|G|";
  }
  return "?";
}

struct RegimeThresholds {
  double lower = 1.0;                                 // ratio k/log|G| below this: small-k branch
  double upper = std::numbers::e * std::numbers::e;   // above this: large-k branch
  double seam = 0.25;                                 // relative band reported as "near threshold"
};

inline Regime classify_regime(double k, double log_group_size, const RegimeThresholds& th = {}) {
  const double ratio = k / log_group_size;
  if (ratio < th.lower) return Regime::SmallK;
  if (ratio > th.upper) return Regime::LargeK;
  return Regime::Comparable;
}

/// k/(2 pi e) |G|^{2/(k-1)}.
inline double cutoff_branch_small(std::size_t k, double log_group_size) {
  const double kd = static_cast<double>(k);
  return kd / (2 * std::numbers::pi * std::numbers::e) * std::exp(2 * log_group_size / (kd - 1));
}

inline double cutoff_branch_entropic(std::size_t k, double log_group_size) { return entropic_time(k, log_group_size); }

/// log|G| / log(k / log|G|); needs k / log|G| > e.
inline double cutoff_branch_large(std::size_t k, double log_group_size) {
  const double ratio = static_cast<double>(k) / log_group_size;
  if (!(ratio > std::numbers::e))
    throw DomainError("large-k branch needs k/log|G| > e (got " + std::to_string(ratio) + ")");
  return log_group_size / std::log(ratio);
}

inline double cutoff_branch(Regime r, std::size_t k, double log_group_size) {
  switch (r) {
    case Regime::SmallK: return cutoff_branch_small(k, log_group_size);
    case Regime::Comparable: return cutoff_branch_entropic(k, log_group_size);
    case Regime::LargeK: return cutoff_branch_large(k, log_group_size);
  }
  return NAN;
}

struct CutoffTime {
  double t0 = 0;
  Regime regime = Regime::SmallK;
  double ratio = 0;  // k / log|G|
  // Set when the ratio sits within the seam band of a threshold.
  std::optional<Regime> adjacent;
  std::optional<double> adjacent_t0;
};

inline CutoffTime cutoff_time_log(std::size_t k, double log_group_size, const RegimeThresholds& th = {}) {
  if (k < 2) throw DomainError("cutoff_time: k must be >= 2");
  if (!(log_group_size >= std::log(6.0) - 1e-12)) throw DomainError("cutoff_time: |G| must be >= 6");
  CutoffTime out;
  out.ratio = static_cast<double>(k) / log_group_size;
  out.regime = classify_regime(static_cast<double>(k), log_group_size, th);
  out.t0 = cutoff_branch(out.regime, k, log_group_size);
  std::optional<Regime> adj;
  if (out.regime == Regime::SmallK && out.ratio >= th.lower * (1 - th.seam)) adj = Regime::Comparable;
  if (out.regime == Regime::Comparable) {
    if (out.ratio <= th.lower * (1 + th.seam)) adj = Regime::SmallK;
    else if (out.ratio >= th.upper * (1 - th.seam)) adj = Regime::LargeK;
  }
  if (out.regime == Regime::LargeK && out.ratio <= th.upper * (1 + th.seam)) adj = Regime::Comparable;
  if (adj) {
    try {
      out.adjacent_t0 = cutoff_branch(*adj, k, log_group_size);
      out.adjacent = adj;
    } catch (const DomainError&) {
      // adjacent branch undefined here (e.g. large-k with ratio <= e)
    }
  }
  return out;
}

inline CutoffTime cutoff_time(std::size_t k, std::uint64_t group_size, const RegimeThresholds& th = {}) {
  if (group_size < 6) throw DomainError("cutoff_time: |G| must be >= 6");
  return cutoff_time_log(k, std::log(static_cast<double>(group_size)), th);
}

}  // namespace dcut
