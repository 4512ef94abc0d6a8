#pragma once

// Entropy experiments on the auxiliary coordinates: Y_n asymptotics,
// varentropy, typical sets of C_S in both regimes and concentration of Q_R.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "dcut/group.hpp"
#include "dcut/normal.hpp"
#include "dcut/parallel.hpp"
#include "dcut/pmf.hpp"
#include "dcut/rng.hpp"
#include "dcut/srw.hpp"
#include "dcut/stats.hpp"
#include "dcut/walk.hpp"

namespace dcut {

enum class EntropyMode { Exact, Asymptotic };

struct SrwEntropy {
  double s = 0;
  double value = 0;
  EntropyMode mode = EntropyMode::Exact;
  double truncation_bound = 0;  // tail mass left out of the exact sum
};

inline SrwEntropy srw_entropy(double s, EntropyMode mode = EntropyMode::Exact) {
  SrwEntropy e{s, 0.0, mode, 0.0};
  if (mode == EntropyMode::Asymptotic) {
    e.value = s == 0 ? 0.0 : h_asymptotic(s);
    return e;
  }
  if (s == 0) return e;
  SrwPmf pmf(s);
  e.value = pmf.entropy();
  e.truncation_bound = pmf.tail_bound();
  return e;
}

/// Leading term k_S h(m / k_S) of H(Y_m).
inline double y_entropy_asymptotic(std::size_t k_s, std::size_t m) {
  if (k_s < 1) throw DomainError("y_entropy_asymptotic: k_S must be >= 1");
  if (m == 0) return 0.0;
  return static_cast<double>(k_s) * h_exact(static_cast<double>(m) / static_cast<double>(k_s));
}

struct VarentropyReport {
  std::size_t k_s = 0, n = 0;
  double exact = 0;      // Var(Q_n) from the pmf
  double bound = 0;      // n ((log k_S)^2 + 2) / 2
  bool within_bound = false;
  std::optional<double> mc;     // sample variance of Q_n
  std::optional<double> mc_se;  // its standard error
};

/// Var(Q_n), Q_n = -log P(Y_n = y) at y ~ Y_n. With samples > 0 the MC estimate
/// draws Y_n through the multinomial decomposition.
inline VarentropyReport varentropy_bound_check(std::size_t k_s, std::size_t n, std::size_t samples = 0,
                                               std::uint64_t seed = 0) {
  const auto pmf = y_pmf_exact(k_s, n);
  VarentropyReport r;
  r.k_s = k_s;
  r.n = n;
  r.exact = varentropy_of(pmf);
  const double lk = std::log(static_cast<double>(k_s));
  r.bound = static_cast<double>(n) * (lk * lk + 2) / 2;
  r.within_bound = r.exact <= r.bound;
  if (samples > 1) {
    auto rng = make_stream(seed, 0, 0x7e);
    RunningMoments mom;
    std::vector<double> q(samples);
    LatticePoint pt(k_s);
    for (std::size_t i = 0; i < samples; ++i) {
      const auto c = sample_CS_direct(k_s, n, rng);
      for (std::size_t a = 0; a < k_s; ++a) pt[a] = static_cast<std::int32_t>(c[a]);
      q[i] = -pmf.log_prob(pt);
      mom.add(q[i]);
    }
    const double mean = mom.mean(), var = mom.variance();
    double m4 = 0;
    for (double v : q) m4 += std::pow(v - mean, 4);
    m4 /= static_cast<double>(samples);
    r.mc = var;
    r.mc_se = std::sqrt(std::max(0.0, m4 - var * var) / static_cast<double>(samples));
  }
  return r;
}

/// W_S(delta, t) for k^3 << t: sum w in {0,1} and the first k_S - 1
/// coordinates in W^Normal_{rho_S t, delta}.
class WsSmallRegime {
 public:
  WsSmallRegime(std::size_t k_s, double t, double delta, double rho_s) : k_s_(k_s) {
    if (k_s < 1) throw DomainError("ws_member_small_regime: k_S must be >= 1");
    if (k_s >= 2) params_.emplace(k_s - 1, rho_s * t, delta);
  }

  bool operator()(std::span<const std::int64_t> w) const {
    if (w.size() != k_s_) throw DomainError("ws_member_small_regime: dimension mismatch");
    std::int64_t sum = 0;
    for (auto v : w) sum += v;
    if (sum != 0 && sum != 1) return false;
    if (!params_) return true;
    std::vector<double> hat(w.begin(), w.end() - 1);
    return normal_set_member(*params_, hat);
  }

 private:
  std::size_t k_s_;
  std::optional<NormalSetParams> params_;
};

inline bool ws_member_small_regime(std::span<const std::int64_t> w, std::size_t k_s, double t, double delta,
                                   double rho_s) {
  return WsSmallRegime(k_s, t, delta, rho_s)(w);
}

enum class WsVariant { Minus, Plus };

inline constexpr std::size_t kMaxMidKs = 4;
inline constexpr std::size_t kMaxMidSteps = 20;

/// W_S^-(delta, t) = union over l in [n_-, n_+] of {P(Y_l = w) >= e^{-k_S h(t/k) - delta k}};
/// W_S^+(delta, t) = union over l in {n_+, n_+ - 1} of {0 < P(Y_l = w) <= e^{-k_S h(t/k) + delta k}}.
/// The window is rho_S t -+ tau t^{1/2}, with n_- clamped at 0.
class WsMidRegime {
 public:
  WsMidRegime(std::size_t k_s, std::size_t k, double t, double delta, double tau) : k_s_(k_s) {
    if (k_s < 1 || k_s > kMaxMidKs) throw DomainError("ws_member_mid_regime: scale guard k_S <= 4 violated");
    if (k < k_s) throw DomainError("ws_member_mid_regime: k must be >= k_S");
    if (!(t >= 0)) throw DomainError("ws_member_mid_regime: t must be nonnegative");
    const double rho = static_cast<double>(k_s) / static_cast<double>(k);
    const double centre = rho * t, half = tau * std::sqrt(t);
    n_minus_ = static_cast<std::size_t>(std::max(0.0, std::ceil(centre - half)));
    const double up = std::floor(centre + half);
    if (up < 0) throw DomainError("ws_member_mid_regime: empty window");
    n_plus_ = static_cast<std::size_t>(up);
    if (n_plus_ > kMaxMidSteps) throw DomainError("ws_member_mid_regime: scale guard n_+ <= 20 violated");
    const double kd = static_cast<double>(k);
    const double base = -static_cast<double>(k_s) * (t == 0 ? 0.0 : h_exact(t / kd));
    log_lo_ = base - delta * kd;
    log_hi_ = base + delta * kd;
    for (std::size_t l = n_minus_; l <= n_plus_; ++l) laws_.emplace(l, y_pmf_exact(k_s, l));
    if (n_plus_ >= 1 && !laws_.count(n_plus_ - 1)) laws_.emplace(n_plus_ - 1, y_pmf_exact(k_s, n_plus_ - 1));
  }

  std::size_t n_minus() const noexcept { return n_minus_; }
  std::size_t n_plus() const noexcept { return n_plus_; }
  double log_lower() const noexcept { return log_lo_; }
  double log_upper() const noexcept { return log_hi_; }

  bool minus(const LatticePoint& w) const {
    check(w);
    for (std::size_t l = n_minus_; l <= n_plus_; ++l) {
      const double lp = laws_.at(l).log_prob(w);
      if (std::isfinite(lp) && lp >= log_lo_) return true;
    }
    return false;
  }

  bool plus(const LatticePoint& w) const {
    check(w);
    for (std::size_t l : {n_plus_, n_plus_ - 1}) {
      if (l > n_plus_) continue;  // n_+ = 0 wraps
      const double lp = laws_.at(l).log_prob(w);
      if (std::isfinite(lp) && lp <= log_hi_) return true;
    }
    return false;
  }

  bool operator()(const LatticePoint& w, WsVariant v) const { return v == WsVariant::Minus ? minus(w) : plus(w); }

 private:
  void check(const LatticePoint& w) const {
    if (w.size() != k_s_) throw DomainError("ws_member_mid_regime: dimension mismatch");
  }

  std::size_t k_s_;
  std::size_t n_minus_ = 0, n_plus_ = 0;
  double log_lo_ = 0, log_hi_ = 0;
  std::map<std::size_t, PmfTable> laws_;
};

inline bool ws_member_mid_regime(const LatticePoint& w, std::size_t k_s, std::size_t k, double t, double delta,
                                 double tau, WsVariant variant) {
  return WsMidRegime(k_s, k, t, delta, tau)(w, variant);
}

/// E[Q_R(t)] = k_R h(t/k).
inline double qr_entropy_mean(double t, std::size_t k, std::size_t k_r) {
  if (k < 1) throw DomainError("qr_entropy_mean: k must be >= 1");
  if (t == 0 || k_r == 0) return 0.0;
  return static_cast<double>(k_r) * h_exact(t / static_cast<double>(k));
}

namespace detail {

/// -log P(W_s = x), falling back to the tail bound outside the table radius.
inline double srw_surprisal(const SrwPmf& pmf, std::int64_t x) {
  const double p = pmf(x);
  if (p > 0) return -std::log(p);
  return -std::log(std::max(pmf.tail_bound(), std::numeric_limits<double>::min()));
}

/// W_s = 2 Bin(N, 1/2) - N with N ~ Poisson(s).
template <std::uniform_random_bit_generator Rng>
std::int64_t sample_srw(double s, Rng& rng) {
  if (s == 0) return 0;
  const auto n = std::poisson_distribution<std::int64_t>(s)(rng);
  const auto up = std::binomial_distribution<std::int64_t>(n, 0.5)(rng);
  return 2 * up - n;
}

}  // namespace detail

/// Draws of Q_R(t) = -sum_a log P(W_{t/k} = C_a) over k_R independent coordinates.
inline std::vector<double> qr_samples(double t, std::size_t k, std::size_t k_r, std::size_t samples,
                                      std::uint64_t seed, std::size_t threads = 1) {
  std::vector<double> out(samples, 0.0);
  if (t == 0 || k_r == 0) return out;
  const double s = t / static_cast<double>(k);
  const SrwPmf pmf(s);
  parallel_for(samples, threads, [&](std::size_t r) {
    auto rng = make_stream(seed, r, 0x9);
    CompensatedSum q;
    for (std::size_t a = 0; a < k_r; ++a) q.add(detail::srw_surprisal(pmf, detail::sample_srw(s, rng)));
    out[r] = q.value();
  });
  return out;
}

struct QrConcentrationReport {
  double t0 = 0, eps = 0, omega = 0;
  std::size_t k = 0, k_r = 0, samples = 0;
  double mean_t0 = 0;                 // E[Q_R(t0)]
  double t_minus = 0, t_plus = 0;
  double frac_below = 0;              // P(Q_R(t_minus) <= E[Q_R(t0)] - omega)
  double frac_above = 0;              // P(Q_R(t_plus) >= E[Q_R(t0)] + omega)
  double mean_minus = 0, mean_minus_se = 0, exact_mean_minus = 0;
  double mean_plus = 0, mean_plus_se = 0, exact_mean_plus = 0;
  double beta_hat = 0;                // max over both times of Var(Q_R)/k_R
  double beta_grid = 0;               // sup of Var(Q^SRW(s)) over a log grid
};

inline QrConcentrationReport qr_concentration_experiment(double t0, std::size_t k, std::size_t k_r, double eps,
                                                         double omega, std::size_t samples, std::uint64_t seed,
                                                         std::size_t threads = 1) {
  if (!(t0 > 0)) throw DomainError("qr_concentration_experiment: t0 must be positive");
  if (!(eps > 0 && eps < 1)) throw DomainError("qr_concentration_experiment: eps must lie in (0,1)");
  if (samples < 2) throw DomainError("qr_concentration_experiment: need at least two samples");
  QrConcentrationReport r;
  r.t0 = t0;
  r.eps = eps;
  r.omega = omega;
  r.k = k;
  r.k_r = k_r;
  r.samples = samples;
  r.mean_t0 = qr_entropy_mean(t0, k, k_r);
  r.t_minus = (1 - eps) * t0;
  r.t_plus = (1 + eps) * t0;
  const auto lo = qr_samples(r.t_minus, k, k_r, samples, seed, threads);
  const auto hi = qr_samples(r.t_plus, k, k_r, samples, mix64(seed + 1), threads);
  RunningMoments mlo, mhi;
  std::size_t below = 0, above = 0;
  for (double q : lo) {
    mlo.add(q);
    below += q <= r.mean_t0 - omega;
  }
  for (double q : hi) {
    mhi.add(q);
    above += q >= r.mean_t0 + omega;
  }
  const double ns = static_cast<double>(samples);
  r.frac_below = static_cast<double>(below) / ns;
  r.frac_above = static_cast<double>(above) / ns;
  r.mean_minus = mlo.mean();
  r.mean_minus_se = std::sqrt(mlo.variance() / ns);
  r.exact_mean_minus = qr_entropy_mean(r.t_minus, k, k_r);
  r.mean_plus = mhi.mean();
  r.mean_plus_se = std::sqrt(mhi.variance() / ns);
  r.exact_mean_plus = qr_entropy_mean(r.t_plus, k, k_r);
  if (k_r > 0) r.beta_hat = std::max(mlo.variance(), mhi.variance()) / static_cast<double>(k_r);
  std::vector<double> grid;
  for (int i = 0; i <= 60; ++i) grid.push_back(std::pow(10.0, -3 + 0.1 * i));
  r.beta_grid = srw_varentropy_sup(grid);
  return r;
}

}  // namespace dcut
