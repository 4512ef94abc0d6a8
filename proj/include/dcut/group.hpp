#pragma once

// Dihedral group D_n = <r, s | r^n = s^2 = id, rs = sr^{-1}> of order 2n.
// Elements are kept in the normal form s^refl r^rot (reflection on the left).

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcut/rng.hpp"

namespace dcut {

/// Invalid arguments or parameters outside a guarded scale.
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A numeric procedure failed its own accuracy contract.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class BudgetError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

namespace detail {

inline std::uint64_t mulmod(std::uint64_t a, std::uint64_t b, std::uint64_t m) {
  return static_cast<std::uint64_t>((static_cast<unsigned __int128>(a) * b) % m);
}

inline std::uint64_t powmod(std::uint64_t b, std::uint64_t e, std::uint64_t m) {
  std::uint64_t r = 1 % m;
  b %= m;
  while (e) {
    if (e & 1) r = mulmod(r, b, m);
    b = mulmod(b, b, m);
    e >>= 1;
  }
  return r;
}

}  // namespace detail

/// Deterministic Miller-Rabin; the witness set is exact for all 64-bit inputs.
inline bool is_prime(std::uint64_t n) {
  if (n < 2) return false;
  for (std::uint64_t p : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    if (n % p == 0) return n == p;
  }
  std::uint64_t d = n - 1;
  int s = 0;
  while ((d & 1) == 0) {
    d >>= 1;
    ++s;
  }
  for (std::uint64_t a : {2ULL, 3ULL, 5ULL, 7ULL, 11ULL, 13ULL, 17ULL, 19ULL, 23ULL, 29ULL, 31ULL, 37ULL}) {
    std::uint64_t x = detail::powmod(a, d, n);
    if (x == 1 || x == n - 1) continue;
    bool composite = true;
    for (int i = 1; i < s; ++i) {
      x = detail::mulmod(x, x, n);
      if (x == n - 1) {
        composite = false;
        break;
      }
    }
    if (composite) return false;
  }
  return true;
}

/// Largest n for which dense distributions over G are allowed (2n <= 2^26).
inline constexpr std::uint64_t kMaxExactRotations = std::uint64_t{1} << 25;

class GroupParams {
 public:
  explicit GroupParams(std::uint64_t n) : n_(n), prime_(is_prime(n)) {
    if (n < 3) throw DomainError("dihedral group needs n >= 3, got " + std::to_string(n));
  }

  std::uint64_t n() const noexcept { return n_; }
  std::uint64_t size() const noexcept { return 2 * n_; }
  bool n_is_prime() const noexcept { return prime_; }
  bool exact_feasible() const noexcept { return n_ <= kMaxExactRotations; }

  void require_prime() const {
    if (!prime_) throw DomainError("n = " + std::to_string(n_) + " is not prime");
  }
  void require_exact() const {
    if (!exact_feasible()) throw DomainError("2n exceeds the exact-distribution bound 2^26");
  }

  friend bool operator==(const GroupParams&, const GroupParams&) = default;

 private:
  std::uint64_t n_;
  bool prime_;
};

/// s^refl r^rot with 0 <= rot < n.
struct DihedralElement {
  std::uint8_t refl = 0;
  std::uint64_t rot = 0;

  static DihedralElement identity() noexcept { return {}; }
  static DihedralElement rotation(std::uint64_t x) noexcept { return {0, x}; }
  static DihedralElement reflection(std::uint64_t x) noexcept { return {1, x}; }

  std::uint64_t flat(const GroupParams& p) const noexcept { return refl * p.n() + rot; }
  static DihedralElement from_flat(std::uint64_t idx, const GroupParams& p) noexcept {
    return {static_cast<std::uint8_t>(idx >= p.n() ? 1 : 0), idx % p.n()};
  }

  friend bool operator==(const DihedralElement&, const DihedralElement&) = default;
};

inline std::uint64_t neg_mod(std::uint64_t x, std::uint64_t n) noexcept { return x == 0 ? 0 : n - x; }

inline std::uint64_t add_mod(std::uint64_t a, std::uint64_t b, std::uint64_t n) noexcept {
  std::uint64_t s = a + b;  // a, b < n <= 2^63
  return s >= n ? s - n : s;
}

/// Reduces a signed integer into Z_n.
inline std::uint64_t reduce_mod(std::int64_t v, std::uint64_t n) noexcept {
  const auto nn = static_cast<std::int64_t>(n);
  std::int64_t r = v % nn;
  return static_cast<std::uint64_t>(r < 0 ? r + nn : r);
}

// (s^ea r^xa)(s^eb r^xb) = s^{ea^eb} r^{xb + (-1)^eb xa}, from r^x s = s r^{-x}.
inline DihedralElement multiply(const DihedralElement& a, const DihedralElement& b, const GroupParams& p) noexcept {
  const std::uint64_t n = p.n();
  const std::uint64_t xa = b.refl ? neg_mod(a.rot, n) : a.rot;
  return {static_cast<std::uint8_t>(a.refl ^ b.refl), add_mod(b.rot, xa, n)};
}

inline DihedralElement inverse(const DihedralElement& a, const GroupParams& p) noexcept {
  if (a.refl) return a;
  return {0, neg_mod(a.rot, p.n())};
}

/// Integer power a^e, e may be negative.
inline DihedralElement power(const DihedralElement& a, std::int64_t e, const GroupParams& p) noexcept {
  if (a.refl) return (e % 2 == 0) ? DihedralElement::identity() : a;
  const std::uint64_t n = p.n();
  const std::uint64_t em = reduce_mod(e, n);
  return {0, detail::mulmod(a.rot, em, n)};
}

struct Generator {
  bool is_reflection = false;
  std::uint64_t u = 0;

  DihedralElement element() const noexcept { return {static_cast<std::uint8_t>(is_reflection ? 1 : 0), u}; }
  friend bool operator==(const Generator&, const Generator&) = default;
};

/// The k sampled generators, reflections first. The implied symmetric multiset
/// S = {Z_a, Z_a^{-1}} has 2k atoms.
class GeneratorSet {
 public:
  GeneratorSet() = default;

  /// Normalizes the order so reflections come first (stable), recording the
  /// original position of every generator in `permutation()`.
  GeneratorSet(std::uint64_t n, std::vector<Generator> gens, std::uint64_t seed = 0) : n_(n), seed_(seed) {
    if (gens.empty()) throw DomainError("generator set must be nonempty");
    std::vector<std::size_t> order(gens.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_partition(order.begin(), order.end(), [&](std::size_t i) { return gens[i].is_reflection; });
    gens_.reserve(gens.size());
    for (std::size_t i : order) {
      if (gens[i].u >= n) throw DomainError("generator exponent out of range");
      gens_.push_back(gens[i]);
    }
    perm_ = std::move(order);
    k_s_ = static_cast<std::size_t>(
        std::count_if(gens_.begin(), gens_.end(), [](const Generator& g) { return g.is_reflection; }));
  }

  std::uint64_t n() const noexcept { return n_; }
  std::size_t k() const noexcept { return gens_.size(); }
  std::size_t k_s() const noexcept { return k_s_; }
  std::size_t k_r() const noexcept { return gens_.size() - k_s_; }
  double rho_s() const noexcept { return static_cast<double>(k_s_) / static_cast<double>(k()); }
  double rho_r() const noexcept { return static_cast<double>(k_r()) / static_cast<double>(k()); }
  std::uint64_t seed() const noexcept { return seed_; }

  const std::vector<Generator>& gens() const noexcept { return gens_; }
  const Generator& operator[](std::size_t a) const { return gens_[a]; }
  /// permutation()[i] = index in the sampled order of the generator now at i.
  const std::vector<std::size_t>& permutation() const noexcept { return perm_; }

  /// 64-bit FNV-1a over (n, gens); stable across runs and platforms.
  std::uint64_t hash() const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&](std::uint64_t v) {
      for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xff;
        h *= 0x100000001b3ULL;
      }
    };
    feed(n_);
    for (const auto& g : gens_) {
      feed(g.is_reflection ? 1 : 0);
      feed(g.u);
    }
    return h;
  }

  nlohmann::json to_json() const {
    nlohmann::json js;
    js["n"] = n_;
    js["k"] = k();
    js["seed"] = seed_;
    js["gens"] = nlohmann::json::array();
    for (const auto& g : gens_) js["gens"].push_back({{"s", g.is_reflection ? 1 : 0}, {"u", g.u}});
    return js;
  }

  static GeneratorSet from_json(const nlohmann::json& js) {
    const auto n = js.at("n").get<std::uint64_t>();
    std::vector<Generator> gens;
    for (const auto& g : js.at("gens")) {
      const int s = g.at("s").get<int>();
      if (s != 0 && s != 1) throw DomainError("generator field s must be 0 or 1");
      gens.push_back({s == 1, g.at("u").get<std::uint64_t>()});
    }
    if (js.contains("k") && js.at("k").get<std::size_t>() != gens.size())
      throw DomainError("generator set: k does not match gens length");
    return GeneratorSet(n, std::move(gens), js.value("seed", std::uint64_t{0}));
  }

 private:
  std::uint64_t n_ = 0;
  std::vector<Generator> gens_;
  std::vector<std::size_t> perm_;
  std::size_t k_s_ = 0;
  std::uint64_t seed_ = 0;
};

/// Z_1..Z_k i.i.d. uniform over G.
template <std::uniform_random_bit_generator Rng>
GeneratorSet sample_generator_set(const GroupParams& p, std::size_t k, Rng& rng, std::uint64_t seed_tag = 0) {
  if (k < 1) throw DomainError("k must be positive");
  std::uniform_int_distribution<std::uint64_t> elem(0, p.size() - 1);
  std::vector<Generator> gens(k);
  for (auto& g : gens) {
    const auto e = DihedralElement::from_flat(elem(rng), p);
    g = {e.refl == 1, e.rot};
  }
  return GeneratorSet(p.n(), std::move(gens), seed_tag);
}

inline GeneratorSet sample_generator_set(const GroupParams& p, std::size_t k, std::uint64_t seed) {
  auto rng = make_stream(seed, 0, 0x5e7);
  return sample_generator_set(p, k, rng, seed);
}

/// rho_S in [1/4, 3/4] and at least one rotation and one reflection.
inline bool check_balance(const GeneratorSet& gs) noexcept {
  const std::size_t k = gs.k();
  const std::size_t ks = gs.k_s();
  return ks >= 1 && gs.k_r() >= 1 && 4 * ks >= k && 4 * ks <= 3 * k;
}

/// Goodness: the H-components u_a fall into pairwise distinct classes {u, -u}.
inline bool is_good(const GeneratorSet& gs, const GroupParams& p) {
  std::vector<std::uint64_t> reps;
  reps.reserve(gs.k());
  for (const auto& g : gs.gens()) reps.push_back(std::min(g.u, neg_mod(g.u, p.n())));
  std::sort(reps.begin(), reps.end());
  return std::adjacent_find(reps.begin(), reps.end()) == reps.end();
}

struct BalancedDraw {
  GeneratorSet gs;
  std::size_t rejections = 0;
};

/// Resamples until check_balance passes.
template <std::uniform_random_bit_generator Rng>
BalancedDraw sample_balanced(const GroupParams& p, std::size_t k, Rng& rng, std::uint64_t seed_tag = 0,
                             std::size_t max_tries = 100000) {
  if (k < 2) throw DomainError("a balanced generator set needs k >= 2");
  for (std::size_t tries = 0; tries < max_tries; ++tries) {
    auto gs = sample_generator_set(p, k, rng, seed_tag);
    if (check_balance(gs)) return {std::move(gs), tries};
  }
  throw DomainError("no balanced generator set after " + std::to_string(max_tries) + " draws");
}

}  // namespace dcut
