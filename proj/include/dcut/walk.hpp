#pragma once

// Monte Carlo simulation of the rate-1 walk X(t) on Cay(D_n, S) together with
// the auxiliary coordinates C(t), through which
//   X(t) = s^{N_S mod 2} r^{sum_a C_a U_a}.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <vector>

#include "dcut/exact_mixing.hpp"
#include "dcut/group.hpp"
#include "dcut/parallel.hpp"
#include "dcut/pmf.hpp"
#include "dcut/rng.hpp"
#include "dcut/stats.hpp"

namespace dcut {

struct Step {
  std::uint32_t index = 0;  // sigma_i, 0-based
  std::int8_t sign = 1;     // eta_i
};

inline constexpr std::uint64_t kMaxRecordedSteps = 100'000'000;

struct Trajectory {
  double t = 0;
  std::vector<Step> steps;  // empty unless recorded
  bool steps_recorded = false;
  std::uint64_t n_total = 0;
  std::uint64_t n_refl = 0;
  std::vector<std::uint32_t> usage;  // arrivals of Z_a^{+-1} per generator
};

struct WalkSnapshot {
  DihedralElement x;
  std::vector<std::int64_t> c;
  std::uint64_t n_total = 0;
  std::uint64_t n_refl = 0;
};

struct SimulateResult {
  Trajectory traj;
  WalkSnapshot snap;
};

/// Draws N ~ Poisson(t) uniform steps and tracks X and C in one forward pass.
/// A rotation step at position i carries the sign (-1)^{#reflection steps after i}
/// = (-1)^{N_S} (-1)^{#reflection steps up to i}; the global (-1)^{N_S} is
/// applied once at the end, and the same factor is the prefactor of the
/// reflection coordinates.
template <std::uniform_random_bit_generator Rng>
SimulateResult simulate(const GeneratorSet& gs, const GroupParams& p, double t, Rng& rng, bool record_steps = true) {
  if (!(t >= 0)) throw DomainError("simulate: t must be nonnegative");
  const std::size_t k = gs.k();
  const std::size_t ks = gs.k_s();
  SimulateResult out;
  auto& tr = out.traj;
  auto& sn = out.snap;
  tr.t = t;
  tr.usage.assign(k, 0);
  sn.c.assign(k, 0);
  const std::uint64_t N = t == 0 ? 0 : std::poisson_distribution<std::uint64_t>(t)(rng);
  tr.n_total = N;
  tr.steps_recorded = record_steps && N <= kMaxRecordedSteps;
  if (tr.steps_recorded) tr.steps.reserve(N);
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(k - 1));
  std::bernoulli_distribution coin(0.5);
  DihedralElement x = DihedralElement::identity();
  std::uint64_t refl_seen = 0;
  for (std::uint64_t i = 0; i < N; ++i) {
    const std::uint32_t a = pick(rng);
    const std::int8_t eta = coin(rng) ? 1 : -1;
    if (tr.steps_recorded) tr.steps.push_back({a, eta});
    ++tr.usage[a];
    const auto& g = gs[a];
    if (g.is_reflection) {
      ++refl_seen;
      x = multiply(x, g.element(), p);
      sn.c[a] += (refl_seen % 2 == 1) ? -1 : 1;  // (-1)^i, i = position in the reflection subsequence
    } else {
      const std::uint64_t u = eta > 0 ? g.u : neg_mod(g.u, p.n());
      x = multiply(x, DihedralElement::rotation(u), p);
      sn.c[a] += (refl_seen % 2 == 0) ? eta : -eta;
    }
  }
  if (refl_seen % 2 == 1)
    for (auto& v : sn.c) v = -v;
  (void)ks;
  tr.n_refl = refl_seen;
  sn.x = x;
  sn.n_total = N;
  sn.n_refl = refl_seen;
  return out;
}

/// Position only; skips the auxiliary bookkeeping.
template <std::uniform_random_bit_generator Rng>
DihedralElement simulate_position(const GeneratorSet& gs, const GroupParams& p, double t, Rng& rng) {
  const std::uint64_t N = t == 0 ? 0 : std::poisson_distribution<std::uint64_t>(t)(rng);
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(gs.k() - 1));
  std::bernoulli_distribution coin(0.5);
  DihedralElement x = DihedralElement::identity();
  for (std::uint64_t i = 0; i < N; ++i) {
    const auto& g = gs[pick(rng)];
    const bool pos = coin(rng);
    if (g.is_reflection)
      x = multiply(x, g.element(), p);
    else
      x = multiply(x, DihedralElement::rotation(pos ? g.u : neg_mod(g.u, p.n())), p);
  }
  return x;
}

/// snap.x == s^{N_S mod 2} r^{sum_a c_a u_a mod n}, exactly.
inline bool aux_identity_check(const WalkSnapshot& snap, const GeneratorSet& gs, const GroupParams& p) {
  if (snap.c.size() != gs.k()) return false;
  const std::uint64_t n = p.n();
  std::uint64_t rot = 0;
  for (std::size_t a = 0; a < gs.k(); ++a) {
    const std::uint64_t ca = reduce_mod(snap.c[a], n);
    rot = add_mod(rot, detail::mulmod(ca, gs[a].u, n), n);
  }
  const DihedralElement expect{static_cast<std::uint8_t>(snap.n_refl % 2), rot};
  return snap.x == expect;
}

namespace detail {

/// Multi_k(trials, uniform) by sequential binomial splitting.
template <std::uniform_random_bit_generator Rng>
void add_uniform_multinomial(std::vector<std::int64_t>& out, std::uint64_t trials, int sign, Rng& rng) {
  const std::size_t k = out.size();
  std::uint64_t left = trials;
  for (std::size_t i = 0; i + 1 < k && left > 0; ++i) {
    const double p = 1.0 / static_cast<double>(k - i);
    const std::uint64_t take = std::binomial_distribution<std::uint64_t>(left, p)(rng);
    out[i] += sign * static_cast<std::int64_t>(take);
    left -= take;
  }
  out[k - 1] += sign * static_cast<std::int64_t>(left);
}

}  // namespace detail

/// C+ - C- + C_err with C+- ~ Multi(floor(N_S/2)), C_err ~ Multi(N_S mod 2).
template <std::uniform_random_bit_generator Rng>
std::vector<std::int64_t> sample_CS_direct(std::size_t k_s, std::uint64_t n_s, Rng& rng) {
  if (k_s < 1) throw DomainError("sample_CS_direct: k_S must be >= 1");
  std::vector<std::int64_t> c(k_s, 0);
  detail::add_uniform_multinomial(c, n_s / 2, +1, rng);
  detail::add_uniform_multinomial(c, n_s / 2, -1, rng);
  detail::add_uniform_multinomial(c, n_s % 2, +1, rng);
  return c;
}

/// hist[i] = |J_i| = number of generators used exactly i times.
struct JiCounts {
  std::vector<std::uint64_t> hist;

  std::uint64_t operator[](std::size_t i) const { return i < hist.size() ? hist[i] : 0; }
  std::uint64_t at_least(std::size_t i) const {
    std::uint64_t s = 0;
    for (std::size_t j = i; j < hist.size(); ++j) s += hist[j];
    return s;
  }
};

inline JiCounts ji_counts(const Trajectory& traj, const GeneratorSet& gs) {
  if (traj.usage.size() != gs.k()) throw DomainError("ji_counts: trajectory does not match generator set");
  JiCounts j;
  for (auto u : traj.usage) {
    if (u >= j.hist.size()) j.hist.resize(u + 1, 0);
    ++j.hist[u];
  }
  if (j.hist.empty()) j.hist.push_back(0);
  return j;
}

/// P(|J_i| = x) with |J_i| ~ Binomial(k, (t/k)^i e^{-t/k} / i!).
inline double ji_success_probability(std::size_t i, double t, std::size_t k) {
  return poisson_pmf(t / static_cast<double>(k), i);
}

struct JiLawReport {
  std::size_t trajectories = 0;
  std::vector<double> q;              // success probability per i
  std::vector<double> mean_observed;  // average |J_i|
  std::vector<GofResult> gof;         // |J_i| histogram vs Binomial(k, q_i)
};

/// Chi-square fit of |J_0|..|J_max_i| over independent trajectories against
/// their Binomial(k, q_i) laws; cells pooled from x = 0 upward.
inline JiLawReport ji_law_check(const GeneratorSet& gs, const GroupParams& p, double t, std::size_t trajectories,
                                std::uint64_t seed, std::size_t max_i = 2, std::size_t threads = 1) {
  const std::size_t k = gs.k();
  std::vector<std::vector<std::uint64_t>> draws(trajectories);
  parallel_for(trajectories, threads, [&](std::size_t r) {
    auto rng = make_stream(seed, r, 0x1a);
    const auto j = ji_counts(simulate(gs, p, t, rng, false).traj, gs);
    for (std::size_t i = 0; i <= max_i; ++i) draws[r].push_back(j[i]);
  });
  JiLawReport rep;
  rep.trajectories = trajectories;
  const double nt = static_cast<double>(trajectories);
  for (std::size_t i = 0; i <= max_i; ++i) {
    const double q = ji_success_probability(i, t, k);
    std::vector<double> obs(k + 1, 0.0), expct(k + 1, 0.0);
    double sum = 0;
    for (const auto& d : draws) {
      obs[d[i]] += 1;
      sum += static_cast<double>(d[i]);
    }
    for (std::size_t x = 0; x <= k; ++x) expct[x] = nt * binomial_pmf(k, q, x);
    rep.q.push_back(q);
    rep.mean_observed.push_back(trajectories ? sum / nt : 0.0);
    rep.gof.push_back(chi_square_gof(obs, expct));
  }
  return rep;
}

/// |J_1 - t e^{-t/k}| <= delta t e^{-t/k} and |J_{>=2}| <= min(delta t, delta^2 k / 2).
inline bool once_typical(const JiCounts& j, double t, std::size_t k, double delta) {
  const double centre = t * std::exp(-t / static_cast<double>(k));
  const double L = std::min(delta * t, delta * delta * static_cast<double>(k) / 2);
  return std::abs(static_cast<double>(j[1]) - centre) <= delta * centre &&
         static_cast<double>(j.at_least(2)) <= L;
}

/// Event B: some generator is used exactly once in one walk and not at all in the other.
inline bool event_B(const Trajectory& a, const Trajectory& b) {
  for (std::size_t i = 0; i < a.usage.size(); ++i) {
    if ((a.usage[i] == 1 && b.usage[i] == 0) || (a.usage[i] == 0 && b.usage[i] == 1)) return true;
  }
  return false;
}

struct EventBReport {
  std::size_t replicates = 0;
  double p_B = 0, se_B = 0;
  std::size_t typical = 0;
  double p_B_given_typ = 0, se_B_given_typ = 0;
};

inline EventBReport event_B_frequency(const GeneratorSet& gs, const GroupParams& p, double t, std::size_t replicates,
                                      std::uint64_t seed, double delta = 0.5, std::size_t threads = 1) {
  struct Cell {
    bool b = false, typ = false;
  };
  std::vector<Cell> cells(replicates);
  parallel_for(replicates, threads, [&](std::size_t r) {
    auto rng = make_stream(seed, r, 0xb);
    const auto x = simulate(gs, p, t, rng, false);
    const auto y = simulate(gs, p, t, rng, false);
    cells[r].b = event_B(x.traj, y.traj);
    cells[r].typ = once_typical(ji_counts(x.traj, gs), t, gs.k(), delta) &&
                   once_typical(ji_counts(y.traj, gs), t, gs.k(), delta);
  });
  EventBReport rep;
  rep.replicates = replicates;
  std::size_t nb = 0, nbt = 0;
  for (const auto& c : cells) {
    nb += c.b;
    rep.typical += c.typ;
    nbt += c.b && c.typ;
  }
  auto se = [](double q, std::size_t m) { return m ? std::sqrt(q * (1 - q) / static_cast<double>(m)) : 0.0; };
  rep.p_B = replicates ? static_cast<double>(nb) / static_cast<double>(replicates) : 0.0;
  rep.se_B = se(rep.p_B, replicates);
  if (rep.typical) {
    rep.p_B_given_typ = static_cast<double>(nbt) / static_cast<double>(rep.typical);
    rep.se_B_given_typ = se(rep.p_B_given_typ, rep.typical);
  }
  return rep;
}

struct CollisionEstimate {
  double estimate = 0;  // |G| P(X = X') - 1
  double stderr_ = 0;
  double ci_lo = 0, ci_hi = 0;
  std::size_t pairs = 0;
};

inline CollisionEstimate collision_statistic(const GeneratorSet& gs, const GroupParams& p, double t,
                                             std::size_t pairs, std::uint64_t seed, std::size_t threads = 1) {
  if (pairs == 0) throw DomainError("collision_statistic: need at least one pair");
  std::vector<std::uint8_t> hit(pairs);
  parallel_for(pairs, threads, [&](std::size_t r) {
    auto rng = make_stream(seed, r, 0xc);
    hit[r] = simulate_position(gs, p, t, rng) == simulate_position(gs, p, t, rng);
  });
  std::size_t h = 0;
  for (auto v : hit) h += v;
  const double q = static_cast<double>(h) / static_cast<double>(pairs);
  const double G = static_cast<double>(p.size());
  CollisionEstimate e;
  e.pairs = pairs;
  e.estimate = G * q - 1;
  // Floor at one pseudo-count so a zero-hit run still reports a positive error.
  const double qq = std::max(q, 1.0 / static_cast<double>(pairs));
  e.stderr_ = G * std::sqrt(qq * (1 - qq) / static_cast<double>(pairs));
  e.ci_lo = e.estimate - 1.96 * e.stderr_;
  e.ci_hi = e.estimate + 1.96 * e.stderr_;
  return e;
}

/// Conditional-law oracle: exact pmf of C_S given N_S.
using CsOracle = std::function<PmfTable(std::size_t k_s, std::size_t n_s)>;

struct CsGroupResult {
  std::uint64_t n_s = 0;
  std::size_t samples = 0;
  GofResult gof;
  bool outside_support = false;
};

struct CsLawReport {
  std::vector<CsGroupResult> groups;
  std::size_t skipped_samples = 0;  // N_S groups too small or beyond the enumeration guard
  double min_p_value = 1.0;
};

/// Simulates C_S(t), splits by N_S and compares each slice with the oracle by
/// chi-square. Cells are ordered by decreasing expected count and merged until
/// each has expected count >= 5.
inline CsLawReport cs_law_crosscheck(const GeneratorSet& gs, const GroupParams& p, double t, std::size_t samples,
                                     std::uint64_t seed, const CsOracle& oracle = y_pmf_exact,
                                     std::size_t min_group = 100, std::size_t threads = 1) {
  const std::size_t ks = gs.k_s();
  if (ks < 1) throw DomainError("cs_law_crosscheck: generator set has no reflections");
  std::vector<std::pair<std::uint64_t, LatticePoint>> draws(samples);
  parallel_for(samples, threads, [&](std::size_t r) {
    auto rng = make_stream(seed, r, 0xc5);
    const auto res = simulate(gs, p, t, rng, false);
    LatticePoint c(ks);
    for (std::size_t a = 0; a < ks; ++a) c[a] = static_cast<std::int32_t>(res.snap.c[a]);
    draws[r] = {res.snap.n_refl, std::move(c)};
  });
  std::map<std::uint64_t, std::map<LatticePoint, std::uint64_t>> by_ns;
  for (auto& [ns, c] : draws) ++by_ns[ns][c];

  CsLawReport rep;
  for (const auto& [ns, hist] : by_ns) {
    std::size_t cnt = 0;
    for (const auto& [pt, c] : hist) cnt += c;
    if (cnt < min_group || ns > kMaxYSteps || ks > kMaxYDim) {
      rep.skipped_samples += cnt;
      continue;
    }
    const auto pmf = oracle(ks, static_cast<std::size_t>(ns));
    CsGroupResult g;
    g.n_s = ns;
    g.samples = cnt;
    std::vector<std::pair<double, double>> cells;  // (expected, observed)
    for (const auto& [pt, cell] : pmf.cells()) {
      auto it = hist.find(pt);
      cells.push_back({cell.p * static_cast<double>(cnt), it == hist.end() ? 0.0 : static_cast<double>(it->second)});
    }
    for (const auto& [pt, c] : hist)
      if (pmf.prob(pt) == 0) g.outside_support = true;
    std::sort(cells.begin(), cells.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<double> e, o;
    for (const auto& [ex, ob] : cells) {
      e.push_back(ex);
      o.push_back(ob);
    }
    g.gof = chi_square_gof(o, e);
    if (g.outside_support) g.gof.p_value = 0.0;
    rep.min_p_value = std::min(rep.min_p_value, g.gof.p_value);
    rep.groups.push_back(std::move(g));
  }
  return rep;
}

}  // namespace dcut
