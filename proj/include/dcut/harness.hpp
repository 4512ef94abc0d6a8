#pragma once

// Cutoff experiments: sample balanced generator sets, evaluate d_TV on a grid
// of multiples of t0, check the cutoff prediction and write reproducible
// CSV/JSON reports.

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <unistd.h>

#include <nlohmann/json.hpp>

#include "dcut/exact_mixing.hpp"
#include "dcut/group.hpp"
#include "dcut/parallel.hpp"
#include "dcut/rng.hpp"
#include "dcut/srw.hpp"
#include "dcut/stats.hpp"
#include "dcut/walk.hpp"

namespace dcut {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr int kSchemaVersion = 1;

enum class Method { Exact, MonteCarlo };

inline const char* method_name(Method m) { return m == Method::Exact ? "exact" : "mc"; }

inline Method parse_method(const std::string& s) {
  if (s == "exact") return Method::Exact;
  if (s == "mc") return Method::MonteCarlo;
  throw DomainError("method must be 'exact' or 'mc', got '" + s + "'");
}

/// How k is chosen per prime: fixed values, k = round(c log|G|) ("log-ratio")
/// or k = round(|G|^c) ("power"), one k per entry of `values`.
struct KRule {
  std::string type = "fixed";
  std::vector<double> values;

  std::vector<std::size_t> resolve(std::uint64_t n) const {
    const double G = 2.0 * static_cast<double>(n);
    std::vector<std::size_t> ks;
    for (double c : values) {
      double k = 0;
      if (type == "fixed")
        k = c;
      else if (type == "log-ratio")
        k = std::round(c * std::log(G));
      else if (type == "power")
        k = std::round(std::pow(G, c));
      else
        throw DomainError("unknown k_rule type '" + type + "'");
      if (!(k >= 2) || k != std::floor(k)) throw DomainError("k_rule produced an invalid k");
      ks.push_back(static_cast<std::size_t>(k));
    }
    return ks;
  }
};

struct ExperimentConfig {
  std::vector<std::uint64_t> primes{101, 1009, 10007};
  KRule k_rule{"fixed", {5}};
  std::vector<double> epsilons{1.0};
  std::vector<double> alpha_grid{0.25, 0.5, 0.8, 1.0, 1.2, 2.0, 4.0};
  std::size_t replicates = 10;
  Method method = Method::Exact;
  std::size_t mc_samples = 100000;
  std::uint64_t seed = 1;
  double evolve_tol = 1e-12;
  std::size_t step_budget = 1'000'000;
  double eta_lo = 0.2;
  double eta_hi = 0.2;
  double quota = 0.8;
  RegimeThresholds thresholds{};
  std::string output;  // directory; empty means the CLI default

  /// Asserts every n prime, exact scale bounds and parameter ranges.
  void validate() const {
    if (primes.empty()) throw DomainError("config: primes must be nonempty");
    for (auto n : primes) {
      const GroupParams p(n);
      p.require_prime();
      if (method == Method::Exact) p.require_exact();
    }
    if (k_rule.values.empty()) throw DomainError("config: k_rule.values must be nonempty");
    for (auto n : primes) (void)k_rule.resolve(n);
    for (double e : epsilons)
      if (!(e > 0 && e < 1e6)) throw DomainError("config: epsilons must be positive");
    for (double a : alpha_grid)
      if (!(a >= 0)) throw DomainError("config: alpha grid must be nonnegative");
    if (replicates < 1) throw DomainError("config: replicates must be >= 1");
    if (method == Method::MonteCarlo && mc_samples < 2) throw DomainError("config: mc_samples must be >= 2");
    if (!(evolve_tol > 0 && evolve_tol <= 1e-6)) throw DomainError("config: evolve_tol must lie in (0, 1e-6]");
    if (!(quota > 0 && quota <= 1)) throw DomainError("config: quota must lie in (0, 1]");
  }

  /// Sorted union of the alpha grid and every 1 -+ eps (negative values dropped).
  std::vector<double> full_grid() const {
    std::vector<double> g = alpha_grid;
    for (double e : epsilons) {
      if (1 - e >= 0) g.push_back(1 - e);
      g.push_back(1 + e);
    }
    std::sort(g.begin(), g.end());
    g.erase(std::unique(g.begin(), g.end()), g.end());
    return g;
  }

  nlohmann::json to_json() const {
    nlohmann::json js;
    js["primes"] = primes;
    js["k_rule"] = {{"type", k_rule.type}, {"values", k_rule.values}};
    js["epsilons"] = epsilons;
    js["alpha_grid"] = alpha_grid;
    js["replicates"] = replicates;
    js["method"] = method_name(method);
    js["mc_samples"] = mc_samples;
    js["seed"] = seed;
    js["tolerances"] = {{"evolve_tol", evolve_tol}, {"step_budget", step_budget}};
    js["verify"] = {{"eta_lo", eta_lo}, {"eta_hi", eta_hi}, {"quota", quota}};
    js["thresholds"] = {{"lower", thresholds.lower}, {"upper", thresholds.upper}, {"seam", thresholds.seam}};
    js["output"] = output;
    return js;
  }

  static ExperimentConfig from_json(const nlohmann::json& js) {
    static const std::vector<std::string> known{"primes",     "k_rule", "epsilons",   "alpha_grid", "replicates",
                                                "method",     "mc_samples", "seed",   "tolerances", "verify",
                                                "thresholds", "output"};
    for (auto it = js.begin(); it != js.end(); ++it)
      if (std::find(known.begin(), known.end(), it.key()) == known.end())
        throw DomainError("config: unknown key '" + it.key() + "'");
    ExperimentConfig c;
    try {
      if (js.contains("primes")) c.primes = js["primes"].get<std::vector<std::uint64_t>>();
      if (js.contains("k_rule")) {
        const auto& kr = js["k_rule"];
        if (kr.is_array()) {
          c.k_rule = {"fixed", kr.get<std::vector<double>>()};
        } else {
          c.k_rule.type = kr.value("type", std::string("fixed"));
          c.k_rule.values = kr.at("values").get<std::vector<double>>();
        }
      }
      if (js.contains("epsilons")) c.epsilons = js["epsilons"].get<std::vector<double>>();
      if (js.contains("alpha_grid")) c.alpha_grid = js["alpha_grid"].get<std::vector<double>>();
      if (js.contains("replicates")) c.replicates = js["replicates"].get<std::size_t>();
      if (js.contains("method")) c.method = parse_method(js["method"].get<std::string>());
      if (js.contains("mc_samples")) c.mc_samples = js["mc_samples"].get<std::size_t>();
      if (js.contains("seed")) c.seed = js["seed"].get<std::uint64_t>();
      if (js.contains("tolerances")) {
        c.evolve_tol = js["tolerances"].value("evolve_tol", c.evolve_tol);
        c.step_budget = js["tolerances"].value("step_budget", c.step_budget);
      }
      if (js.contains("verify")) {
        c.eta_lo = js["verify"].value("eta_lo", c.eta_lo);
        c.eta_hi = js["verify"].value("eta_hi", c.eta_hi);
        c.quota = js["verify"].value("quota", c.quota);
      }
      if (js.contains("thresholds")) {
        c.thresholds.lower = js["thresholds"].value("lower", c.thresholds.lower);
        c.thresholds.upper = js["thresholds"].value("upper", c.thresholds.upper);
        c.thresholds.seam = js["thresholds"].value("seam", c.thresholds.seam);
      }
      if (js.contains("output")) c.output = js["output"].get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw DomainError(std::string("config: ") + e.what());
    }
    c.validate();
    return c;
  }

  /// FNV-1a over the canonical (key-sorted, compact) JSON form.
  std::uint64_t hash() const {
    const std::string s = to_json().dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : s) {
      h ^= ch;
      h *= 0x100000001b3ULL;
    }
    return h;
  }
};

struct ProfileRow {
  std::uint64_t n = 0;
  std::size_t k = 0;
  std::size_t replicate = 0;
  std::string regime;
  double alpha = 0;
  double t = 0;
  double t0 = 0;
  double tv = 0;
  double stderr_ = 0;
  double bias = 0;  // MC plug-in bias estimate sqrt(|G| / (2 pi samples)); 0 for exact rows
  std::uint64_t gs_hash = 0;
  std::uint64_t seed = 0;
  std::size_t rejections = 0;
  std::string status = "ok";

  friend bool operator==(const ProfileRow& a, const ProfileRow& b) {
    auto same = [](double x, double y) { return (std::isnan(x) && std::isnan(y)) || x == y; };
    return a.n == b.n && a.k == b.k && a.replicate == b.replicate && a.regime == b.regime && same(a.alpha, b.alpha) &&
           same(a.t, b.t) && same(a.t0, b.t0) && same(a.tv, b.tv) && same(a.stderr_, b.stderr_) &&
           same(a.bias, b.bias) && a.gs_hash == b.gs_hash && a.seed == b.seed && a.rejections == b.rejections &&
           a.status == b.status;
  }
};

struct CutoffProfile {
  std::uint64_t config_hash = 0;
  nlohmann::json config;  // resolved config, echoed into file headers
  std::vector<ProfileRow> rows;
  std::size_t failed_cells = 0;
};

/// Seed of cell (n, k, replicate); independent of the cell's position in the config lists.
inline std::uint64_t cell_seed(std::uint64_t seed, std::uint64_t n, std::size_t k, std::size_t replicate) {
  return mix64(seed ^ mix64(n ^ mix64(static_cast<std::uint64_t>(k) ^ mix64(replicate + 0x51))));
}

struct McTv {
  double tv = 0, stderr_ = 0, bias = 0;
};

/// Empirical-distribution TV against uniform from `samples` walk endpoints.
/// The standard error is the delta-method one, 0.5 sd(sign(f_hat(X) - 1/|G|)) / sqrt(samples).
inline McTv tv_monte_carlo(const GeneratorSet& gs, const GroupParams& p, double t, std::size_t samples,
                           std::uint64_t seed, std::size_t threads = 1) {
  std::vector<std::uint64_t> where(samples);
  parallel_for(samples, threads, [&](std::size_t i) {
    auto rng = make_stream(seed, i, 0x7f);
    where[i] = simulate_position(gs, p, t, rng).flat(p);
  });
  const std::size_t len = p.size();
  std::vector<std::uint64_t> hist(len, 0);
  for (auto w : where) ++hist[w];
  const double ns = static_cast<double>(samples), u = 1.0 / static_cast<double>(len);
  CompensatedSum tv;
  RunningMoments sgn;
  for (std::size_t g = 0; g < len; ++g) {
    const double f = static_cast<double>(hist[g]) / ns;
    tv.add(std::abs(f - u));
    const double s = f > u ? 1.0 : -1.0;
    for (std::uint64_t c = 0; c < hist[g]; ++c) sgn.add(s);
  }
  McTv out;
  out.tv = 0.5 * tv.value();
  out.stderr_ = std::max(0.5 * std::sqrt(sgn.variance() / ns), 0.5 / ns);
  out.bias = std::sqrt(static_cast<double>(len) / (2 * std::numbers::pi * ns));
  return out;
}

/// Runs every (n, k, replicate) cell. A cell whose evolution throws is marked
/// failed (status column) and the scan continues.
inline CutoffProfile run_cutoff_scan(const ExperimentConfig& cfg, std::size_t threads = 1) {
  cfg.validate();
  struct Cell {
    std::uint64_t n;
    std::size_t k, rep;
  };
  std::vector<Cell> cells;
  for (auto n : cfg.primes)
    for (auto k : cfg.k_rule.resolve(n))
      for (std::size_t r = 0; r < cfg.replicates; ++r) cells.push_back({n, k, r});
  const auto grid = cfg.full_grid();
  std::vector<std::vector<ProfileRow>> out(cells.size());
  std::vector<std::uint8_t> failed(cells.size(), 0);
  // Cells run in parallel; MC samples inside a cell then run serially.
  parallel_for(cells.size(), threads, [&](std::size_t ci) {
    const auto& c = cells[ci];
    const GroupParams p(c.n);
    const auto ct = cutoff_time(c.k, p.size(), cfg.thresholds);
    const std::uint64_t cs = cell_seed(cfg.seed, c.n, c.k, c.rep);
    auto rng = make_stream(cs, 0, 0x5e7);
    const auto draw = sample_balanced(p, c.k, rng, cs);
    ProfileRow base;
    base.n = c.n;
    base.k = c.k;
    base.replicate = c.rep;
    base.regime = regime_label(ct.regime);
    base.t0 = ct.t0;
    base.gs_hash = draw.gs.hash();
    base.seed = cs;
    base.rejections = draw.rejections;
    std::vector<double> ts;
    for (double a : grid) ts.push_back(a * ct.t0);
    auto& rows = out[ci];
    try {
      if (cfg.method == Method::Exact) {
        EvolveOptions opt;
        opt.tol = cfg.evolve_tol;
        opt.step_budget = cfg.step_budget;
        const auto curve = tv_curve(draw.gs, p, ts, opt);
        for (std::size_t i = 0; i < grid.size(); ++i) {
          auto r = base;
          r.alpha = grid[i];
          r.t = ts[i];
          r.tv = curve[i].tv;
          rows.push_back(r);
        }
      } else {
        for (std::size_t i = 0; i < grid.size(); ++i) {
          const auto mc = tv_monte_carlo(draw.gs, p, ts[i], cfg.mc_samples, mix64(cs + i + 1));
          auto r = base;
          r.alpha = grid[i];
          r.t = ts[i];
          r.tv = mc.tv;
          r.stderr_ = mc.stderr_;
          r.bias = mc.bias;
          rows.push_back(r);
        }
      }
    } catch (const std::exception&) {
      rows.clear();
      failed[ci] = 1;
      for (std::size_t i = 0; i < grid.size(); ++i) {
        auto r = base;
        r.alpha = grid[i];
        r.t = ts[i];
        r.tv = NAN;
        r.status = "failed";
        rows.push_back(r);
      }
    }
  });
  CutoffProfile prof;
  prof.config_hash = cfg.hash();
  prof.config = cfg.to_json();
  for (auto& v : out)
    for (auto& r : v) prof.rows.push_back(std::move(r));
  prof.failed_cells = static_cast<std::size_t>(std::count(failed.begin(), failed.end(), 1));
  std::sort(prof.rows.begin(), prof.rows.end(), [](const ProfileRow& a, const ProfileRow& b) {
    return std::tie(a.n, a.k, a.replicate, a.alpha) < std::tie(b.n, b.k, b.replicate, b.alpha);
  });
  return prof;
}

/// Within each (n, k, replicate): d_TV non-increasing along alpha, up to 1e-9
/// for exact rows or 3 combined standard errors for MC rows.
inline bool profile_monotone(const CutoffProfile& prof) {
  for (std::size_t i = 1; i < prof.rows.size(); ++i) {
    const auto& a = prof.rows[i - 1];
    const auto& b = prof.rows[i];
    if (a.n != b.n || a.k != b.k || a.replicate != b.replicate) continue;
    if (a.status != "ok" || b.status != "ok") continue;
    const double slack = (a.stderr_ == 0 && b.stderr_ == 0)
                             ? kMonotoneSlack
                             : 3 * std::sqrt(a.stderr_ * a.stderr_ + b.stderr_ * b.stderr_);
    if (b.tv > a.tv + slack) return false;
  }
  return true;
}

struct VerifyCell {
  std::uint64_t n = 0;
  std::size_t k = 0;
  std::size_t replicates = 0;
  std::size_t passed = 0;
  double fraction = 0;
  bool pass = false;
  bool nearest_used = false;  // a replicate used a neighbouring grid point
  std::vector<std::string> missing;
  double alpha_lo = 0, alpha_hi = 0;  // grid points actually used (last replicate)
  std::vector<double> tv_lo, tv_hi;
  double median_tv_lo = NAN, median_tv_hi = NAN;
};

struct VerifyReport {
  double eps = 0, eta_lo = 0, eta_hi = 0, quota = 0;
  std::vector<VerifyCell> cells;
  bool pass = false;
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) return NAN;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

/// Per (n, k): a replicate passes iff d_TV((1-eps)t0) >= 1 - eta_lo and
/// d_TV((1+eps)t0) <= eta_hi; the cell passes iff at least a fraction `quota`
/// of replicates pass. Without an exact grid point the nearest point on the
/// conservative side is used (alpha in [1-eps, 1) resp. (1, 1+eps]) and flagged;
/// with none, the cell fails with "missing grid points".
inline VerifyReport verify_cutoff(const CutoffProfile& prof, double eps, double eta_lo, double eta_hi,
                                  double quota = 0.8) {
  constexpr double kAlphaTol = 1e-12;
  VerifyReport rep{eps, eta_lo, eta_hi, quota, {}, true};
  std::map<std::pair<std::uint64_t, std::size_t>, std::map<std::size_t, std::vector<const ProfileRow*>>> groups;
  for (const auto& r : prof.rows) groups[{r.n, r.k}][r.replicate].push_back(&r);
  const double a_lo = 1 - eps, a_hi = 1 + eps;
  for (const auto& [key, reps] : groups) {
    VerifyCell cell;
    cell.n = key.first;
    cell.k = key.second;
    cell.replicates = reps.size();
    bool missing_lo = false, missing_hi = false;
    for (const auto& [rid, rows] : reps) {
      const ProfileRow* lo = nullptr;
      const ProfileRow* hi = nullptr;
      bool near = false;
      for (const auto* r : rows)
        if (std::abs(r->alpha - a_lo) <= kAlphaTol) lo = r;
      for (const auto* r : rows)
        if (std::abs(r->alpha - a_hi) <= kAlphaTol) hi = r;
      if (!lo) {
        for (const auto* r : rows)
          if (r->alpha > a_lo && r->alpha < 1 && (!lo || r->alpha < lo->alpha)) lo = r;
        near |= lo != nullptr;
      }
      if (!hi) {
        for (const auto* r : rows)
          if (r->alpha < a_hi && r->alpha > 1 && (!hi || r->alpha > hi->alpha)) hi = r;
        near |= hi != nullptr;
      }
      if (!lo) missing_lo = true;
      if (!hi) missing_hi = true;
      if (!lo || !hi) continue;
      cell.nearest_used |= near;
      cell.alpha_lo = lo->alpha;
      cell.alpha_hi = hi->alpha;
      const bool ok_rows = lo->status == "ok" && hi->status == "ok";
      if (ok_rows) {
        cell.tv_lo.push_back(lo->tv);
        cell.tv_hi.push_back(hi->tv);
      }
      if (ok_rows && lo->tv >= 1 - eta_lo && hi->tv <= eta_hi) ++cell.passed;
    }
    if (missing_lo) cell.missing.push_back("missing grid points: alpha=" + std::to_string(a_lo));
    if (missing_hi) cell.missing.push_back("missing grid points: alpha=" + std::to_string(a_hi));
    cell.fraction = cell.replicates ? static_cast<double>(cell.passed) / static_cast<double>(cell.replicates) : 0.0;
    cell.pass = cell.missing.empty() && cell.fraction >= quota;
    cell.median_tv_lo = median_of(cell.tv_lo);
    cell.median_tv_hi = median_of(cell.tv_hi);
    rep.pass &= cell.pass;
    rep.cells.push_back(std::move(cell));
  }
  if (rep.cells.empty()) rep.pass = false;
  return rep;
}

struct WindowResult {
  double t_lo = 0;  // d_TV(t_lo) = 0.75
  double t_hi = 0;  // d_TV(t_hi) = 0.25
  double t0 = 0;
  double ratio = 0;  // (t_hi - t_lo) / t0
};

/// Bisection for the quartile crossings of d_TV(t), to relative precision tol.
inline WindowResult window_locate(const GeneratorSet& gs, const GroupParams& p, double tol = 1e-6,
                                  std::optional<double> t0 = std::nullopt, const EvolveOptions& opt = {}) {
  p.require_exact();
  const auto f0 = DistVector::delta(p);
  const auto mu = step_measure(gs, p);
  auto tv = [&](double t) {
    if (t == 0) return tv_exact(f0);
    const double ts[1] = {t};
    return tv_exact(detail::evolve_many(f0, mu, p, ts, opt)[0].dist);
  };
  auto crossing = [&](double level) {
    double lo = 0, hi = 1;
    int guard = 0;
    while (tv(hi) > level) {
      lo = hi;
      hi *= 2;
      if (++guard > 60) throw NumericalError("window_locate: could not bracket d_TV = " + std::to_string(level));
    }
    while (hi - lo > tol * hi) {
      const double mid = 0.5 * (lo + hi);
      if (tv(mid) > level)
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  };
  if (tv(0) <= 0.75) throw NumericalError("window_locate: d_TV(0) is already below 0.75");
  WindowResult w;
  w.t_lo = crossing(0.75);
  w.t_hi = crossing(0.25);
  w.t0 = t0 ? *t0 : cutoff_time(gs.k(), p.size()).t0;
  w.ratio = (w.t_hi - w.t_lo) / w.t0;
  return w;
}

struct GcdReport {
  std::uint64_t n = 0;
  std::uint64_t gamma = 0;   // gcd(v_1, ..., v_k, n)
  bool exact = true;
  bool uniform = false;      // exact: counts equal on gamma Z_n and zero elsewhere
  std::uint64_t total = 0;   // enumerated tuples or samples
  std::vector<std::uint64_t> counts;
  double p_value = NAN;      // MC only
  bool off_support = false;  // some value fell outside gamma Z_n
};

inline constexpr std::uint64_t kMaxGcdEnumeration = 20'000'000;

/// Distribution of v . U mod n for U uniform on Z_n^k, against Unif(gamma Z_n).
/// samples == 0 enumerates all n^k tuples.
inline GcdReport gcd_uniformity_check(const GroupParams& p, const std::vector<std::uint64_t>& v,
                                      std::size_t samples = 0, std::uint64_t seed = 0) {
  if (v.empty()) throw DomainError("gcd_uniformity_check: v must be nonempty");
  const std::uint64_t n = p.n();
  GcdReport r;
  r.n = n;
  r.gamma = n;
  for (auto x : v) r.gamma = std::gcd(r.gamma, x % n);
  r.counts.assign(n, 0);
  std::vector<std::uint64_t> vm(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) vm[i] = v[i] % n;
  if (samples == 0) {
    double tuples = std::pow(static_cast<double>(n), static_cast<double>(v.size()));
    if (tuples > static_cast<double>(kMaxGcdEnumeration))
      throw DomainError("gcd_uniformity_check: n^k too large to enumerate");
    std::vector<std::uint64_t> u(v.size(), 0);
    for (;;) {
      std::uint64_t s = 0;
      for (std::size_t i = 0; i < u.size(); ++i) s = add_mod(s, detail::mulmod(vm[i], u[i], n), n);
      ++r.counts[s];
      ++r.total;
      std::size_t i = 0;
      while (i < u.size() && ++u[i] == n) u[i++] = 0;
      if (i == u.size()) break;
    }
    const std::uint64_t expect = r.total / (n / r.gamma);
    r.uniform = true;
    for (std::uint64_t x = 0; x < n; ++x) {
      const bool on = x % r.gamma == 0;
      if (!on && r.counts[x]) r.off_support = true;
      if ((on && r.counts[x] != expect) || (!on && r.counts[x] != 0)) r.uniform = false;
    }
    return r;
  }
  r.exact = false;
  auto rng = make_stream(seed, 0, 0x6cd);
  std::uniform_int_distribution<std::uint64_t> unif(0, n - 1);
  for (std::size_t t = 0; t < samples; ++t) {
    std::uint64_t s = 0;
    for (auto x : vm) s = add_mod(s, detail::mulmod(x, unif(rng), n), n);
    ++r.counts[s];
  }
  r.total = samples;
  std::vector<double> obs, exp;
  const double e = static_cast<double>(samples) / static_cast<double>(n / r.gamma);
  for (std::uint64_t x = 0; x < n; ++x) {
    if (x % r.gamma == 0) {
      obs.push_back(static_cast<double>(r.counts[x]));
      exp.push_back(e);
    } else if (r.counts[x]) {
      r.off_support = true;
    }
  }
  r.p_value = r.off_support ? 0.0 : (obs.size() > 1 ? chi_square_gof(obs, exp).p_value : 1.0);
  r.uniform = !r.off_support && r.p_value > 0.001;
  return r;
}

struct RegimeFlagThresholds {
  double much_less = 0.1;
  double much_greater = 10.0;
};

struct RegimeReport {
  std::size_t k = 0;
  std::uint64_t n = 0;
  double log_g = 0;
  Regime regime = Regime::SmallK;
  std::string label;
  std::optional<double> t_small, t_entropic, t_large;  // the three branch values, where defined
  // (i) k^2 << |G|^{2/k}
  double cond_i_lhs = 0, cond_i_rhs = 0, cond_i_ratio = 0;
  bool cond_i_flag = false;
  // (ii) k >> |G|^{2/k} (log k)^2
  double cond_ii_lhs = 0, cond_ii_rhs = 0, cond_ii_ratio = 0;
  bool cond_ii_flag = false;
  // k <= log|G| / loglog|G| or k >= 2(1+eps) log|G| / loglog|G|
  double simple_threshold = 0;
  bool simple_small = false, simple_large = false;
  bool large_k_flag = false;  // k / log|G| >= much_greater
};

inline RegimeReport regime_report(std::size_t k, std::uint64_t n, double eps = 0.1,
                                  const RegimeFlagThresholds& fl = {}, const RegimeThresholds& th = {}) {
  if (k < 2) throw DomainError("regime_report: k must be >= 2");
  const GroupParams p(n);
  RegimeReport r;
  r.k = k;
  r.n = n;
  r.log_g = std::log(static_cast<double>(p.size()));
  r.regime = classify_regime(static_cast<double>(k), r.log_g, th);
  r.label = regime_label(r.regime);
  const double kd = static_cast<double>(k);
  try { r.t_small = cutoff_branch_small(k, r.log_g); } catch (const std::exception&) {}
  try { r.t_entropic = cutoff_branch_entropic(k, r.log_g); } catch (const std::exception&) {}
  try { r.t_large = cutoff_branch_large(k, r.log_g); } catch (const std::exception&) {}
  const double g2k = std::exp(2 * r.log_g / kd);
  r.cond_i_lhs = kd * kd;
  r.cond_i_rhs = g2k;
  r.cond_i_ratio = r.cond_i_lhs / r.cond_i_rhs;
  r.cond_i_flag = r.cond_i_ratio <= fl.much_less;
  const double lk = std::log(kd);
  r.cond_ii_lhs = kd;
  r.cond_ii_rhs = g2k * lk * lk;
  r.cond_ii_ratio = r.cond_ii_lhs / r.cond_ii_rhs;
  r.cond_ii_flag = r.cond_ii_ratio >= fl.much_greater;
  r.simple_threshold = r.log_g / std::log(r.log_g);
  r.simple_small = kd <= r.simple_threshold;
  r.simple_large = kd >= 2 * (1 + eps) * r.simple_threshold;
  r.large_k_flag = kd / r.log_g >= fl.much_greater;
  return r;
}

// ---------------------------------------------------------------- output

inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return NAN;
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument(s);
  return v;
}

inline constexpr const char* kProfileColumns =
    "n,k,replicate,regime,alpha,t,t0,tv,stderr,bias,gs_hash,seed,rejections,status";

inline std::string profile_to_csv(const CutoffProfile& prof) {
  std::ostringstream os;
  os << "# schema_version=" << kSchemaVersion << "\n";
  os << "# config_hash=" << prof.config_hash << "\n";
  os << "# config=" << (prof.config.is_null() ? std::string("{}") : prof.config.dump()) << "\n";
  os << kProfileColumns << "\n";
  for (const auto& r : prof.rows) {
    os << r.n << ',' << r.k << ',' << r.replicate << ',' << r.regime << ',' << format_double(r.alpha) << ','
       << format_double(r.t) << ',' << format_double(r.t0) << ',' << format_double(r.tv) << ','
       << format_double(r.stderr_) << ',' << format_double(r.bias) << ',' << r.gs_hash << ',' << r.seed << ','
       << r.rejections << ',' << r.status << "\n";
  }
  return os.str();
}

inline nlohmann::json profile_to_json(const CutoffProfile& prof) {
  nlohmann::json js;
  js["schema_version"] = kSchemaVersion;
  js["config_hash"] = prof.config_hash;
  js["config"] = prof.config.is_null() ? nlohmann::json::object() : prof.config;
  js["failed_cells"] = prof.failed_cells;
  js["rows"] = nlohmann::json::array();
  auto num = [](double x) -> nlohmann::json { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
  for (const auto& r : prof.rows) {
    js["rows"].push_back({{"n", r.n},
                          {"k", r.k},
                          {"replicate", r.replicate},
                          {"regime", r.regime},
                          {"alpha", r.alpha},
                          {"t", r.t},
                          {"t0", r.t0},
                          {"tv", num(r.tv)},
                          {"stderr", r.stderr_},
                          {"bias", r.bias},
                          {"gs_hash", r.gs_hash},
                          {"seed", r.seed},
                          {"rejections", r.rejections},
                          {"status", r.status}});
  }
  return js;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline CutoffProfile profile_from_csv(std::istream& in) {
  CutoffProfile prof;
  std::string line;
  bool header = false;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      const std::string key = line.substr(2, eq - 2), val = line.substr(eq + 1);
      if (key == "schema_version" && std::stoi(val) != kSchemaVersion)
        throw DomainError("profile: unsupported schema_version " + val);
      if (key == "config_hash") prof.config_hash = std::stoull(val);
      if (key == "config") prof.config = nlohmann::json::parse(val);
      continue;
    }
    if (!header) {
      if (line != kProfileColumns) throw DomainError("profile: unexpected column header");
      header = true;
      continue;
    }
    const auto f = split_csv(line);
    if (f.size() != 14) throw DomainError("profile: line " + std::to_string(lineno) + " has wrong field count");
    try {
      ProfileRow r;
      r.n = std::stoull(f[0]);
      r.k = std::stoull(f[1]);
      r.replicate = std::stoull(f[2]);
      r.regime = f[3];
      r.alpha = parse_double(f[4]);
      r.t = parse_double(f[5]);
      r.t0 = parse_double(f[6]);
      r.tv = parse_double(f[7]);
      r.stderr_ = parse_double(f[8]);
      r.bias = parse_double(f[9]);
      r.gs_hash = std::stoull(f[10]);
      r.seed = std::stoull(f[11]);
      r.rejections = std::stoull(f[12]);
      r.status = f[13];
      if (r.status != "ok") ++prof.failed_cells;  // counted per row here
      prof.rows.push_back(std::move(r));
    } catch (const std::logic_error&) {
      throw DomainError("profile: malformed line " + std::to_string(lineno));
    }
  }
  if (!header) throw DomainError("profile: missing column header");
  return prof;
}

inline CutoffProfile profile_from_csv_string(const std::string& s) {
  std::istringstream is(s);
  return profile_from_csv(is);
}

/// Writes `content` to `path` through a temporary file in the same directory
/// and a rename, so readers never see a partial file.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
    os << content;
    os.flush();
    if (!os) {
      fs::remove(tmp, ec);
      throw IoError("write failed for " + tmp.string());
    }
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot rename " + tmp.string() + " to " + path.string());
  }
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

enum class Format { Csv, Json };

inline void emit(const CutoffProfile& prof, Format fmt, const std::filesystem::path& path) {
  write_atomic(path, fmt == Format::Csv ? profile_to_csv(prof) : profile_to_json(prof).dump(2) + "\n");
}

inline CutoffProfile load_profile(const std::filesystem::path& path) {
  const std::string s = read_file(path);
  return profile_from_csv_string(s);
}

inline nlohmann::json verify_to_json(const VerifyReport& v) {
  nlohmann::json js;
  js["schema_version"] = kSchemaVersion;
  js["eps"] = v.eps;
  js["eta_lo"] = v.eta_lo;
  js["eta_hi"] = v.eta_hi;
  js["quota"] = v.quota;
  js["pass"] = v.pass;
  js["cells"] = nlohmann::json::array();
  auto num = [](double x) -> nlohmann::json { return std::isfinite(x) ? nlohmann::json(x) : nlohmann::json(nullptr); };
  for (const auto& c : v.cells) {
    js["cells"].push_back({{"n", c.n},
                           {"k", c.k},
                           {"replicates", c.replicates},
                           {"passed", c.passed},
                           {"fraction", c.fraction},
                           {"pass", c.pass},
                           {"nearest_used", c.nearest_used},
                           {"missing", c.missing},
                           {"median_tv_lo", num(c.median_tv_lo)},
                           {"median_tv_hi", num(c.median_tv_hi)}});
  }
  return js;
}

inline void emit(const VerifyReport& rep, Format fmt, const std::filesystem::path& path) {
  if (fmt == Format::Json) {
    write_atomic(path, verify_to_json(rep).dump(2) + "\n");
    return;
  }
  std::ostringstream os;
  os << "# schema_version=" << kSchemaVersion << "\n";
  os << "n,k,replicates,passed,fraction,pass,nearest_used,median_tv_lo,median_tv_hi,missing\n";
  for (const auto& c : rep.cells) {
    std::string miss;
    for (const auto& m : c.missing) miss += (miss.empty() ? "" : ";") + m;
    os << c.n << ',' << c.k << ',' << c.replicates << ',' << c.passed << ',' << format_double(c.fraction) << ','
       << (c.pass ? 1 : 0) << ',' << (c.nearest_used ? 1 : 0) << ',' << format_double(c.median_tv_lo) << ','
       << format_double(c.median_tv_hi) << ',' << miss << "\n";
  }
  write_atomic(path, os.str());
}

}  // namespace dcut
