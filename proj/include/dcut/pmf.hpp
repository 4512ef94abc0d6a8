#pragma once

// Sparse exact pmfs over integer lattices and entropy functionals.
//
// Exact ("rational") tables store integer numerators over one common
// denominator. The enumeration guards keep that denominator below 2^64, so
// every probability is an exact fraction without arbitrary-precision ints.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "dcut/group.hpp"
#include "dcut/stats.hpp"

namespace dcut {

using LatticePoint = std::vector<std::int32_t>;

class PmfTable {
 public:
  struct Cell {
    std::uint64_t num = 0;  // exact mode only
    double p = 0.0;
  };

  PmfTable() = default;

  static PmfTable exact(std::size_t dim, std::uint64_t denominator) {
    PmfTable t;
    t.dim_ = dim;
    t.exact_ = true;
    t.den_ = denominator;
    return t;
  }
  static PmfTable floating(std::size_t dim) {
    PmfTable t;
    t.dim_ = dim;
    return t;
  }

  std::size_t dim() const noexcept { return dim_; }
  bool is_exact() const noexcept { return exact_; }
  std::uint64_t denominator() const noexcept { return den_; }
  std::size_t size() const noexcept { return cells_.size(); }
  const std::map<LatticePoint, Cell>& cells() const noexcept { return cells_; }

  void add_count(const LatticePoint& x, std::uint64_t num) {
    auto& c = cells_[x];
    c.num += num;
    c.p = static_cast<double>(c.num) / static_cast<double>(den_);
  }
  void add_prob(const LatticePoint& x, double p) { cells_[x].p += p; }

  double prob(const LatticePoint& x) const {
    auto it = cells_.find(x);
    return it == cells_.end() ? 0.0 : it->second.p;
  }

  /// Reduced fraction (num, den) for exact tables.
  std::pair<std::uint64_t, std::uint64_t> fraction(const LatticePoint& x) const {
    auto it = cells_.find(x);
    const std::uint64_t num = it == cells_.end() ? 0 : it->second.num;
    if (num == 0) return {0, 1};
    const std::uint64_t g = std::gcd(num, den_);
    return {num / g, den_ / g};
  }

  /// Exact tables: numerators sum to the denominator. Float tables: |sum-1| <= 1e-12.
  bool normalized() const {
    if (exact_) {
      unsigned __int128 s = 0;
      for (const auto& [x, c] : cells_) s += c.num;
      return s == den_;
    }
    CompensatedSum s;
    for (const auto& [x, c] : cells_) s.add(c.p);
    return std::abs(s.value() - 1.0) <= 1e-12;
  }

  /// log p(x); exact tables use log(num) - log(den) to avoid rounding p first.
  double log_prob(const LatticePoint& x) const {
    auto it = cells_.find(x);
    if (it == cells_.end() || it->second.p == 0) return -INFINITY;
    return log_cell(it->second);
  }

  double log_cell(const Cell& c) const {
    if (exact_) return std::log(static_cast<double>(c.num)) - std::log(static_cast<double>(den_));
    return std::log(c.p);
  }

  nlohmann::json to_json() const {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& [x, c] : cells_) {
      nlohmann::json e;
      e["point"] = x;
      if (exact_) {
        const auto [num, den] = fraction(x);
        e["p"] = std::to_string(num) + "/" + std::to_string(den);
      } else {
        e["p"] = c.p;
      }
      arr.push_back(std::move(e));
    }
    return arr;
  }

 private:
  std::size_t dim_ = 0;
  bool exact_ = false;
  std::uint64_t den_ = 1;
  std::map<LatticePoint, Cell> cells_;
};

inline constexpr std::size_t kMaxYDim = 6;
inline constexpr std::size_t kMaxYSteps = 24;
inline constexpr std::size_t kMaxMultiDim = 5;
inline constexpr std::size_t kMaxMultiTrials = 12;

namespace detail {

// Coordinates are packed 8 bits apiece with a +128 offset.
inline std::uint64_t pack(std::span<const std::int32_t> x) {
  std::uint64_t key = 0;
  for (std::size_t i = 0; i < x.size(); ++i) key |= static_cast<std::uint64_t>(x[i] + 128) << (8 * i);
  return key;
}

inline LatticePoint unpack(std::uint64_t key, std::size_t dim) {
  LatticePoint x(dim);
  for (std::size_t i = 0; i < dim; ++i) x[i] = static_cast<std::int32_t>((key >> (8 * i)) & 0xff) - 128;
  return x;
}

inline std::uint64_t ipow(std::uint64_t b, std::size_t e) {
  std::uint64_t r = 1;
  for (std::size_t i = 0; i < e; ++i) r *= b;
  return r;
}

/// Every composition of `total` into `parts` nonnegative parts.
inline void for_each_composition(std::size_t parts, std::uint32_t total,
                                 const std::function<void(const std::vector<std::int32_t>&)>& fn) {
  std::vector<std::int32_t> c(parts, 0);
  std::function<void(std::size_t, std::uint32_t)> rec = [&](std::size_t i, std::uint32_t left) {
    if (i + 1 == parts) {
      c[i] = static_cast<std::int32_t>(left);
      fn(c);
      return;
    }
    for (std::uint32_t v = 0; v <= left; ++v) {
      c[i] = static_cast<std::int32_t>(v);
      rec(i + 1, left - v);
    }
  };
  if (parts == 0) {
    if (total == 0) fn(c);
    return;
  }
  rec(0, total);
}

inline std::uint64_t multinomial_coefficient(const std::vector<std::int32_t>& c) {
  // Built as a product of binomials; exact for the guarded sizes (<= 12!).
  std::uint64_t r = 1, acc = 0;
  for (auto v : c) {
    for (std::int32_t j = 1; j <= v; ++j) {
      ++acc;
      r = r * acc / static_cast<std::uint64_t>(j);
    }
  }
  return r;
}

}  // namespace detail

/// Exact law of Y_n = -Y_{n-1} + delta_n, delta_i uniform on {e_1..e_kS}.
inline PmfTable y_pmf_exact(std::size_t k_s, std::size_t n_steps) {
  if (k_s < 1 || k_s > kMaxYDim || n_steps > kMaxYSteps)
    throw DomainError("y_pmf_exact: scale guard k_S in [1,6], n <= 24 violated");
  std::unordered_map<std::uint64_t, std::uint64_t> cur{{detail::pack(LatticePoint(k_s, 0)), 1}}, next;
  LatticePoint x(k_s);
  for (std::size_t m = 0; m < n_steps; ++m) {
    next.clear();
    for (const auto& [key, cnt] : cur) {
      x = detail::unpack(key, k_s);
      for (auto& v : x) v = -v;
      for (std::size_t i = 0; i < k_s; ++i) {
        x[i] += 1;
        next[detail::pack(x)] += cnt;
        x[i] -= 1;
      }
    }
    cur.swap(next);
  }
  auto t = PmfTable::exact(k_s, detail::ipow(k_s, n_steps));
  for (const auto& [key, cnt] : cur) t.add_count(detail::unpack(key, k_s), cnt);
  return t;
}

/// Exact law of X - Y with X, Y iid Multi_d(N, uniform).
inline PmfTable multinomial_diff_pmf(std::size_t d, std::size_t trials) {
  if (d < 1 || d > kMaxMultiDim || trials > kMaxMultiTrials)
    throw DomainError("multinomial_diff_pmf: scale guard d in [1,5], N <= 12 violated");
  std::vector<std::pair<std::vector<std::int32_t>, std::uint64_t>> comps;
  detail::for_each_composition(d, static_cast<std::uint32_t>(trials), [&](const std::vector<std::int32_t>& c) {
    comps.emplace_back(c, detail::multinomial_coefficient(c));
  });
  std::unordered_map<std::uint64_t, std::uint64_t> acc;
  LatticePoint diff(d);
  for (const auto& [cx, wx] : comps) {
    for (const auto& [cy, wy] : comps) {
      for (std::size_t i = 0; i < d; ++i) diff[i] = cx[i] - cy[i];
      acc[detail::pack(diff)] += wx * wy;
    }
  }
  auto t = PmfTable::exact(d, detail::ipow(d, 2 * trials));
  for (const auto& [key, cnt] : acc) t.add_count(detail::unpack(key, d), cnt);
  return t;
}

/// Shannon entropy in nats.
inline double entropy_of(const PmfTable& pmf) {
  CompensatedSum s;
  for (const auto& [x, c] : pmf.cells()) {
    if (c.p > 0) s.add(-c.p * pmf.log_cell(c));
  }
  return s.value();
}

/// Entropy of a probability vector (zeros skipped).
inline double entropy_of(std::span<const double> p) {
  CompensatedSum s;
  for (double v : p)
    if (v > 0) s.add(-v * std::log(v));
  return s.value();
}

/// Var(-log p(X)) under the table's own law.
inline double varentropy_of(const PmfTable& pmf) {
  const double h = entropy_of(pmf);
  CompensatedSum s;
  for (const auto& [x, c] : pmf.cells()) {
    if (c.p > 0) {
      const double q = -pmf.log_cell(c) - h;
      s.add(c.p * q * q);
    }
  }
  return s.value();
}

struct PluginEntropy {
  double plugin = 0.0;        // maximum-likelihood estimate
  double estimate = 0.0;      // Miller-Madow corrected
  double stderr_ = 0.0;       // jackknife
  std::size_t support = 0;    // observed distinct values
  std::size_t samples = 0;
};

/// Plug-in entropy with the (support - 1) / (2 samples) Miller-Madow
/// correction and a jackknife standard error, from a histogram of counts.
inline PluginEntropy entropy_plugin_counts(std::span<const std::uint64_t> counts) {
  PluginEntropy r;
  std::uint64_t n = 0;
  for (auto c : counts) {
    n += c;
    if (c > 0) ++r.support;
  }
  if (n == 0) throw DomainError("entropy_plugin: no samples");
  r.samples = n;
  const double nd = static_cast<double>(n);
  auto clogc = [](double c) { return c > 0 ? c * std::log(c) : 0.0; };
  CompensatedSum s;
  for (auto c : counts) s.add(clogc(static_cast<double>(c)));
  const double S = s.value();
  r.plugin = std::log(nd) - S / nd;
  r.estimate = r.plugin + (static_cast<double>(r.support) - 1.0) / (2.0 * nd);
  if (n > 1) {
    // Leave-one-out estimates only depend on which cell loses the sample.
    std::vector<std::pair<double, double>> loo;  // (value, multiplicity)
    double mean = 0;
    for (auto c : counts) {
      if (c == 0) continue;
      const double cd = static_cast<double>(c);
      const double h = std::log(nd - 1) - (S - clogc(cd) + clogc(cd - 1)) / (nd - 1);
      loo.emplace_back(h, cd);
      mean += h * cd;
    }
    mean /= nd;
    double ss = 0;
    for (const auto& [h, w] : loo) ss += w * (h - mean) * (h - mean);
    r.stderr_ = std::sqrt((nd - 1) / nd * ss);
  }
  return r;
}

template <class T>
PluginEntropy entropy_plugin(std::span<const T> samples) {
  std::map<T, std::uint64_t> hist;
  for (const auto& s : samples) ++hist[s];
  std::vector<std::uint64_t> counts;
  counts.reserve(hist.size());
  for (const auto& [k, c] : hist) counts.push_back(c);
  return entropy_plugin_counts(counts);
}

}  // namespace dcut
