#pragma once

// Exact law of the rate-1 walk on Cay(D_n, S) by uniformization:
//   P_t f = sum_m Pois(t; m) P^m f,
// with one application of P being right-convolution by the step measure.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>

#include "dcut/fft.hpp"
#include "dcut/group.hpp"
#include "dcut/stats.hpp"

namespace dcut {

inline constexpr double kMassTolerance = 1e-12;
inline constexpr double kNegativeClip = 1e-15;

/// Dense probability vector over G in flat-index order (eps * n + x).
class DistVector {
 public:
  DistVector() = default;
  DistVector(std::uint64_t n, std::vector<double> probs) : n_(n), probs_(std::move(probs)) {
    if (probs_.size() != 2 * n_) throw DomainError("DistVector length must be 2n");
  }

  static DistVector delta(const GroupParams& p, DihedralElement g = DihedralElement::identity()) {
    p.require_exact();
    std::vector<double> v(p.size(), 0.0);
    v[g.flat(p)] = 1.0;
    return DistVector(p.n(), std::move(v));
  }
  static DistVector uniform(const GroupParams& p) {
    p.require_exact();
    return DistVector(p.n(), std::vector<double>(p.size(), 1.0 / static_cast<double>(p.size())));
  }

  std::uint64_t n() const noexcept { return n_; }
  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  double& operator[](std::size_t i) { return probs_[i]; }
  std::span<const double> probs() const noexcept { return probs_; }
  std::vector<double>& data() noexcept { return probs_; }

  double mass() const {
    CompensatedSum s;
    for (double v : probs_) s.add(v);
    return s.value();
  }

  /// Clips rounding noise in [-1e-15, 0) to zero; anything more negative is an error.
  void clip_negatives(double threshold = kNegativeClip) {
    for (double& v : probs_) {
      if (v < 0) {
        if (v < -threshold) throw NumericalError("negative probability " + std::to_string(v));
        v = 0;
      }
    }
  }

  void normalize() {
    const double m = mass();
    if (!(m > 0)) throw NumericalError("cannot normalize a zero vector");
    for (double& v : probs_) v /= m;
  }

  /// Entries >= -1e-15 and |mass - 1| <= 1e-12.
  bool valid() const {
    for (double v : probs_)
      if (v < -kNegativeClip) return false;
    return std::abs(mass() - 1.0) <= kMassTolerance;
  }

 private:
  std::uint64_t n_ = 0;
  std::vector<double> probs_;
};

/// Binary dump: 8-byte magic "DCUTDIST", uint64 n, then 2n little-endian doubles.
inline constexpr char kDistMagic[8] = {'D', 'C', 'U', 'T', 'D', 'I', 'S', 'T'};

inline void write_dist_binary(const DistVector& f, const std::string& path) {
  static_assert(std::endian::native == std::endian::little, "binary dump assumes a little-endian host");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::ios_base::failure("cannot open " + path + " for writing");
  out.write(kDistMagic, 8);
  const std::uint64_t n = f.n();
  out.write(reinterpret_cast<const char*>(&n), 8);
  out.write(reinterpret_cast<const char*>(f.probs().data()), static_cast<std::streamsize>(8 * f.size()));
  if (!out) throw std::ios_base::failure("write failed: " + path);
}

inline DistVector read_dist_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::ios_base::failure("cannot open " + path);
  char magic[8];
  std::uint64_t n = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&n), 8);
  if (!in || std::memcmp(magic, kDistMagic, 8) != 0) throw std::ios_base::failure("bad DistVector header: " + path);
  std::vector<double> v(2 * n);
  in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(8 * v.size()));
  if (!in) throw std::ios_base::failure("truncated DistVector: " + path);
  return DistVector(n, std::move(v));
}

/// Step law mu(z) = multiplicity of z in the 2k-atom multiset S over 2k,
/// split into rotation part a[u] = mu(r^u) and reflection part b[u] = mu(s r^u).
struct StepMeasure {
  std::vector<double> a;
  std::vector<double> b;

  double mass() const {
    CompensatedSum s;
    for (double v : a) s.add(v);
    for (double v : b) s.add(v);
    return s.value();
  }
  std::size_t support() const {
    return static_cast<std::size_t>(std::count_if(a.begin(), a.end(), [](double v) { return v != 0; }) +
                                    std::count_if(b.begin(), b.end(), [](double v) { return v != 0; }));
  }
};

inline StepMeasure step_measure(const GeneratorSet& gs, const GroupParams& p) {
  p.require_exact();
  StepMeasure mu{std::vector<double>(p.n(), 0.0), std::vector<double>(p.n(), 0.0)};
  const double w = 1.0 / (2.0 * static_cast<double>(gs.k()));
  for (const auto& g : gs.gens()) {
    if (g.is_reflection) {
      mu.b[g.u] += 2 * w;  // s r^u is its own inverse
    } else {
      mu.a[g.u] += w;
      mu.a[neg_mod(g.u, p.n())] += w;
    }
  }
  return mu;
}

/// nu(g) = sum_z f(g z^{-1}) mu(z), i.e. one right-multiplication step.
inline DistVector convolve_naive(const DistVector& f, const StepMeasure& mu, const GroupParams& p) {
  const std::uint64_t n = p.n();
  std::vector<double> out(2 * n, 0.0);
  for (int part = 0; part < 2; ++part) {
    const auto& m = part == 0 ? mu.a : mu.b;
    for (std::uint64_t u = 0; u < n; ++u) {
      const double w = m[u];
      if (w == 0) continue;
      const DihedralElement z{static_cast<std::uint8_t>(part), u};
      for (std::uint64_t idx = 0; idx < 2 * n; ++idx) {
        const double fv = f[idx];
        if (fv == 0) continue;
        out[multiply(DihedralElement::from_flat(idx, p), z, p).flat(p)] += fv * w;
      }
    }
  }
  return DistVector(n, std::move(out));
}

/// Spectral form of P. Per frequency j the step couples (F0[j], F1[-j]):
///   F0'[j] = A[j] F0[j] + B[j] F1[-j],   F1'[j] = A[j] F1[j] + B[j] F0[-j],
/// where F0, F1 are the DFTs of the two cosets, A = DFT(a) (real, a symmetric),
/// B = DFT(b).
class SpectralKernel {
 public:
  SpectralKernel(const StepMeasure& mu, const GroupParams& p) : n_(p.n()), dft_(p.n()) {
    A_ = dft_.forward_real(mu.a);
    B_ = dft_.forward_real(mu.b);
  }

  std::uint64_t n() const noexcept { return n_; }
  const Dft& dft() const noexcept { return dft_; }

  void to_spectral(const DistVector& f, std::vector<cplx>& F0, std::vector<cplx>& F1) const {
    std::vector<cplx> c0(n_), c1(n_);
    for (std::uint64_t x = 0; x < n_; ++x) {
      c0[x] = f[x];
      c1[x] = f[n_ + x];
    }
    F0 = dft_.forward(std::move(c0));
    F1 = dft_.forward(std::move(c1));
  }

  DistVector from_spectral(const std::vector<cplx>& F0, const std::vector<cplx>& F1) const {
    auto c0 = dft_.inverse(F0);
    auto c1 = dft_.inverse(F1);
    std::vector<double> out(2 * n_);
    for (std::uint64_t x = 0; x < n_; ++x) {
      out[x] = c0[x].real();
      out[n_ + x] = c1[x].real();
    }
    return DistVector(n_, std::move(out));
  }

  /// One application of P in the frequency domain; frequencies j and -j are
  /// updated together so the step can run in place.
  void apply(std::vector<cplx>& F0, std::vector<cplx>& F1) const {
    const double a0 = A_[0].real();
    const cplx b0 = B_[0];
    {
      const cplx f0 = F0[0], f1 = F1[0];
      F0[0] = a0 * f0 + b0 * f1;
      F1[0] = a0 * f1 + b0 * f0;
    }
    for (std::uint64_t j = 1; 2 * j <= n_; ++j) {
      const std::uint64_t mj = n_ - j;
      const cplx f0j = F0[j], f0m = F0[mj], f1j = F1[j], f1m = F1[mj];
      const double aj = A_[j].real(), am = A_[mj].real();
      F0[j] = aj * f0j + B_[j] * f1m;
      F1[mj] = am * f1m + B_[mj] * f0j;
      if (mj != j) {
        F0[mj] = am * f0m + B_[mj] * f1j;
        F1[j] = aj * f1j + B_[j] * f0m;
      }
    }
  }

 private:
  std::uint64_t n_;
  Dft dft_;
  std::vector<cplx> A_, B_;
};

inline DistVector convolve_fast(const DistVector& f, const StepMeasure& mu, const GroupParams& p) {
  SpectralKernel ker(mu, p);
  std::vector<cplx> F0, F1;
  ker.to_spectral(f, F0, F1);
  ker.apply(F0, F1);
  return ker.from_spectral(F0, F1);
}

enum class KernelRoute { Auto, Direct, Spectral };

struct EvolveOptions {
  double tol = 1e-12;
  std::size_t step_budget = 1'000'000;
  KernelRoute route = KernelRoute::Auto;
};

struct EvolveResult {
  DistVector dist;
  double tail_mass = 0.0;     // Poisson mass beyond the truncation point
  double mass_deficit = 0.0;  // 1 - mass before renormalization
  std::size_t steps_used = 0;
};

namespace detail {

/// Smallest M with P(Pois(t) > M) < tol.
inline std::size_t poisson_truncation(double t, double tol, std::size_t budget) {
  if (t == 0) return 0;
  auto tail = [&](std::size_t m) { return boost::math::gamma_p(static_cast<double>(m) + 1.0, t); };
  std::size_t hi = static_cast<std::size_t>(t + 10 * std::sqrt(t) + 10);
  while (tail(hi) >= tol) {
    if (hi > budget) throw BudgetError("uniformization needs more than " + std::to_string(budget) + " steps");
    hi *= 2;
  }
  std::size_t lo = 0;
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo) / 2;
    if (tail(mid) < tol)
      hi = mid;
    else
      lo = mid + 1;
  }
  if (lo > budget) throw BudgetError("uniformization needs " + std::to_string(lo) + " steps, budget " +
                                     std::to_string(budget));
  return lo;
}

inline bool use_spectral(const StepMeasure& mu, KernelRoute route) {
  if (route == KernelRoute::Direct) return false;
  if (route == KernelRoute::Spectral) return true;
  return mu.support() > 24;
}

/// Sparse list of (element, weight) for direct stepping.
inline std::vector<std::pair<DihedralElement, double>> atoms(const StepMeasure& mu) {
  std::vector<std::pair<DihedralElement, double>> out;
  for (std::uint64_t u = 0; u < mu.a.size(); ++u) {
    if (mu.a[u] != 0) out.push_back({{0, u}, mu.a[u]});
    if (mu.b[u] != 0) out.push_back({{1, u}, mu.b[u]});
  }
  return out;
}

/// Single sweep over P^m f0, m = 0..M_max, feeding one Poisson-weighted
/// accumulator per requested time.
inline std::vector<EvolveResult> evolve_many(const DistVector& f0, const StepMeasure& mu, const GroupParams& p,
                                             std::span<const double> times, const EvolveOptions& opt) {
  p.require_exact();
  if (!(opt.tol > 0) || opt.tol > 1e-6) throw DomainError("tol must lie in (0, 1e-6]");
  const std::size_t K = times.size();
  std::vector<std::size_t> M(K);
  std::size_t m_max = 0;
  for (std::size_t i = 0; i < K; ++i) {
    if (!(times[i] >= 0)) throw DomainError("t must be nonnegative");
    M[i] = poisson_truncation(times[i], opt.tol, opt.step_budget);
    m_max = std::max(m_max, M[i]);
  }
  const std::uint64_t n = p.n();
  const std::size_t len = 2 * n;
  std::vector<EvolveResult> res(K);
  auto weight = [&](std::size_t i, std::size_t m) { return std::exp(log_poisson_pmf(times[i], m)); };

  if (use_spectral(mu, opt.route)) {
    SpectralKernel ker(mu, p);
    std::vector<cplx> F0, F1;
    ker.to_spectral(f0, F0, F1);
    std::vector<std::vector<cplx>> S0(K, std::vector<cplx>(n)), S1(K, std::vector<cplx>(n));
    for (std::size_t m = 0; m <= m_max; ++m) {
      if (m > 0) ker.apply(F0, F1);
      for (std::size_t i = 0; i < K; ++i) {
        if (m > M[i]) continue;
        const double w = weight(i, m);
        if (w == 0) continue;
        for (std::uint64_t j = 0; j < n; ++j) {
          S0[i][j] += w * F0[j];
          S1[i][j] += w * F1[j];
        }
      }
    }
    for (std::size_t i = 0; i < K; ++i) {
      res[i].dist = ker.from_spectral(S0[i], S1[i]);
    }
  } else {
    const auto at = atoms(mu);
    std::vector<double> cur(f0.probs().begin(), f0.probs().end()), next(len);
    std::vector<std::vector<double>> acc(K, std::vector<double>(len, 0.0));
    // Precomputed right-multiplication tables: g * z for every atom z.
    std::vector<std::vector<std::uint32_t>> dest(at.size(), std::vector<std::uint32_t>(len));
    for (std::size_t z = 0; z < at.size(); ++z)
      for (std::uint64_t idx = 0; idx < len; ++idx)
        dest[z][idx] = static_cast<std::uint32_t>(multiply(DihedralElement::from_flat(idx, p), at[z].first, p).flat(p));
    for (std::size_t m = 0; m <= m_max; ++m) {
      if (m > 0) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t z = 0; z < at.size(); ++z) {
          const double w = at[z].second;
          const auto& d = dest[z];
          for (std::uint64_t idx = 0; idx < len; ++idx) next[d[idx]] += w * cur[idx];
        }
        cur.swap(next);
      }
      for (std::size_t i = 0; i < K; ++i) {
        if (m > M[i]) continue;
        const double w = weight(i, m);
        if (w == 0) continue;
        for (std::uint64_t idx = 0; idx < len; ++idx) acc[i][idx] += w * cur[idx];
      }
    }
    for (std::size_t i = 0; i < K; ++i) res[i].dist = DistVector(n, std::move(acc[i]));
  }

  const double f0_mass = f0.mass();
  for (std::size_t i = 0; i < K; ++i) {
    auto& r = res[i];
    r.steps_used = M[i];
    r.tail_mass = times[i] == 0 ? 0.0 : boost::math::gamma_p(static_cast<double>(M[i]) + 1.0, times[i]);
    r.dist.clip_negatives();
    r.mass_deficit = f0_mass - r.dist.mass();
    if (r.mass_deficit >= opt.tol + 1e-13)
      throw NumericalError("uniformization mass deficit " + std::to_string(r.mass_deficit) + " exceeds tol");
    r.dist.normalize();
  }
  return res;
}

}  // namespace detail

inline EvolveResult evolve_continuous(const DistVector& f0, const GeneratorSet& gs, const GroupParams& p, double t,
                                      const EvolveOptions& opt = {}) {
  if (t == 0) {
    if (!(opt.tol > 0) || opt.tol > 1e-6) throw DomainError("tol must lie in (0, 1e-6]");
    return {f0, 0.0, 0.0, 0};
  }
  const auto mu = step_measure(gs, p);
  const double times[1] = {t};
  return std::move(detail::evolve_many(f0, mu, p, times, opt)[0]);
}

/// (1/2) sum_g |f(g) - 1/|G||. The Cayley graph is vertex transitive, so the
/// distance from the identity start equals the worst case over start points.
inline double tv_exact(const DistVector& f) {
  const double u = 1.0 / static_cast<double>(f.size());
  CompensatedSum s;
  for (double v : f.probs()) s.add(std::abs(v - u));
  return 0.5 * s.value();
}

/// |G| sum_g f(g)^2 - 1.
inline double collision_exact(const DistVector& f) {
  CompensatedSum s;
  for (double v : f.probs()) s.add(v * v);
  return static_cast<double>(f.size()) * s.value() - 1.0;
}

struct CurvePoint {
  double t = 0;
  double tv = 0;
  double tail_mass = 0;
  std::size_t steps_used = 0;
};

inline constexpr double kMonotoneSlack = 1e-9;

/// d_TV(t) from the identity on an ascending grid, one sweep of powers.
inline std::vector<CurvePoint> tv_curve(const GeneratorSet& gs, const GroupParams& p, std::span<const double> grid,
                                        const EvolveOptions& opt = {}) {
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (grid[i] < grid[i - 1]) throw DomainError("t grid must be ascending");
  if (grid.empty()) return {};
  const auto mu = step_measure(gs, p);
  const auto f0 = DistVector::delta(p);
  auto res = detail::evolve_many(f0, mu, p, grid, opt);
  std::vector<CurvePoint> out;
  out.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    out.push_back({grid[i], tv_exact(res[i].dist), res[i].tail_mass, res[i].steps_used});
    if (i > 0 && out[i].tv > out[i - 1].tv + kMonotoneSlack)
      throw NumericalError("d_TV increased along the grid at t = " + std::to_string(grid[i]));
  }
  return out;
}

}  // namespace dcut
