// dcut: command-line front end for the dihedral cutoff library.
//
// Every subcommand renders one report: a resolved config, a table of rows and
// a few summary scalars. Plain output is CSV with '#' header lines; --json
// emits the same content as a single JSON document. Output is assembled in
// memory and written at the end (stdout or an atomic file via --out).

#include <chrono>
#include <cstdlib>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "dcut/dcut.hpp"

namespace {

using nlohmann::json;
using namespace dcut;

constexpr int kExitOk = 0;
constexpr int kExitScanFailedCells = 2;
constexpr int kExitCheckFailed = 3;
constexpr int kExitUsage = 64;
constexpr int kExitDomain = 65;
constexpr int kExitIo = 74;

constexpr const char* kOutputDirEnv = "DCUT_OUTPUT_DIR";

struct Common {
  bool json = false;
  bool deterministic = false;
  bool bits = false;
  std::size_t threads = 1;
  std::uint64_t seed = 1;
  std::string out;
};

struct Report {
  std::string command;
  json config = json::object();
  std::vector<std::string> columns;
  std::vector<json> rows;  // one object per row, keyed by column
  json summary = json::object();
  int exit_code = kExitOk;
  bool force_stdout = false;  // --out already named a data file
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_flag("--json", c.json, "Emit JSON instead of CSV");
  sub->add_flag("--deterministic", c.deterministic, "Suppress timing lines");
  sub->add_flag("--bits", c.bits, "Display entropies in bits (computation stays in nats)");
  sub->add_option("--threads", c.threads, "Worker threads (0 = hardware concurrency)")->capture_default_str();
  sub->add_option("--seed", c.seed, "Master seed")->capture_default_str();
  sub->add_option("--out", c.out, "Write output to this file (atomic) instead of stdout");
}

double to_unit(double nats, const Common& c) { return c.bits ? nats / std::log(2.0) : nats; }
const char* unit_name(const Common& c) { return c.bits ? "bits" : "nats"; }

json num(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

std::string cell_text(const json& v) {
  if (v.is_null()) return "";
  if (v.is_boolean()) return v.get<bool>() ? "1" : "0";
  if (v.is_number_float()) return format_double(v.get<double>());
  if (v.is_number_unsigned()) return std::to_string(v.get<std::uint64_t>());
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

std::string render(const Report& r, const Common& c, std::optional<double> elapsed) {
  if (c.json) {
    json js;
    js["schema_version"] = kSchemaVersion;
    js["command"] = r.command;
    js["config"] = r.config;
    js["columns"] = r.columns;
    js["rows"] = json::array();
    for (const auto& row : r.rows) js["rows"].push_back(row);
    js["summary"] = r.summary;
    if (elapsed) {
      js["elapsed_seconds"] = *elapsed;
      js["threads"] = resolve_threads(c.threads);
    }
    return js.dump(2) + "\n";
  }
  std::ostringstream os;
  os << "# schema_version=" << kSchemaVersion << "\n";
  os << "# command=" << r.command << "\n";
  os << "# config=" << r.config.dump() << "\n";
  for (std::size_t i = 0; i < r.columns.size(); ++i) os << (i ? "," : "") << r.columns[i];
  os << "\n";
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < r.columns.size(); ++i) {
      if (i) os << ',';
      os << cell_text(row.contains(r.columns[i]) ? row.at(r.columns[i]) : json());
    }
    os << "\n";
  }
  for (auto it = r.summary.begin(); it != r.summary.end(); ++it) os << "# " << it.key() << "=" << cell_text(*it) << "\n";
  if (elapsed) {
    os << "# elapsed_seconds=" << format_double(*elapsed) << "\n";
    os << "# threads=" << resolve_threads(c.threads) << "\n";
  }
  return os.str();
}

void deliver(const std::string& text, const Common& c, bool force_stdout) {
  if (c.out.empty() || force_stdout) {
    std::cout << text;
    std::cout.flush();
    if (!std::cout) throw IoError("write to stdout failed");
  } else {
    write_atomic(c.out, text);
  }
}

json base_config(const Common& c) {
  return {{"seed", c.seed}, {"log_base", "e"}, {"display_unit", unit_name(c)}};
}

// Generator set: read from a JSON file, or a balanced draw from the seed.
struct GsSource {
  std::uint64_t n = 0;
  std::size_t k = 0;
  std::string file;
};

void add_gs_options(CLI::App* sub, GsSource& g, bool need_k = true) {
  sub->add_option("--n", g.n, "Rotation order n (group size 2n)")->required();
  auto* k = sub->add_option("--k", g.k, "Number of generators");
  if (need_k) k->required();
  sub->add_option("--gens", g.file, "Generator set JSON {n, gens:[{s,u}]} (overrides --k sampling)");
}

struct ResolvedGs {
  GroupParams p;
  GeneratorSet gs;
  std::size_t rejections = 0;
};

ResolvedGs resolve_gs(const GsSource& g, const Common& c) {
  const GroupParams p(g.n);
  if (!g.file.empty()) {
    json js;
    try {
      js = json::parse(read_file(g.file));
    } catch (const json::exception& e) {
      throw DomainError(std::string("generator file: ") + e.what());
    }
    auto gs = GeneratorSet::from_json(js);
    if (gs.n() != g.n) throw DomainError("generator file n does not match --n");
    return {p, std::move(gs), 0};
  }
  auto rng = make_stream(c.seed, 0, 0x5e7);
  auto draw = sample_balanced(p, g.k, rng, c.seed);
  return {p, std::move(draw.gs), draw.rejections};
}

json gs_config(const ResolvedGs& r) {
  return {{"n", r.p.n()},
          {"k", r.gs.k()},
          {"k_s", r.gs.k_s()},
          {"gs_hash", r.gs.hash()},
          {"rejections", r.rejections},
          {"generators", r.gs.to_json()["gens"]}};
}

// ------------------------------------------------------------------ commands

struct SimulateArgs {
  GsSource gs;
  double t = 0;
  std::size_t replicates = 100;
  bool check_identity = false;
};

Report cmd_simulate(const SimulateArgs& a, const Common& c) {
  if (!(a.t >= 0)) throw DomainError("--t must be nonnegative");
  const auto r = resolve_gs(a.gs, c);
  struct Row {
    std::uint64_t n = 0, ns = 0, bucket = 0;
    bool b = false, ok = false;
    std::uint64_t j0 = 0, j1 = 0, j2 = 0;
  };
  std::vector<Row> rows(a.replicates);
  parallel_for(a.replicates, c.threads, [&](std::size_t i) {
    auto rng = make_stream(c.seed, i, 0x51);
    const auto x = simulate(r.gs, r.p, a.t, rng, false);
    const auto y = simulate(r.gs, r.p, a.t, rng, false);
    const auto j = ji_counts(x.traj, r.gs);
    rows[i] = {x.snap.n_total, x.snap.n_refl, x.snap.x.flat(r.p), event_B(x.traj, y.traj),
               a.check_identity && aux_identity_check(x.snap, r.gs, r.p), j[0], j[1], j.at_least(2)};
  });
  Report rep;
  rep.command = "simulate";
  rep.config = base_config(c);
  rep.config["group"] = gs_config(r);
  rep.config["t"] = a.t;
  rep.config["replicates"] = a.replicates;
  rep.config["check_identity"] = a.check_identity;
  rep.columns = {"replicate", "N", "N_S", "tv_bucket", "B_flag", "J0", "J1", "J2plus"};
  if (a.check_identity) rep.columns.push_back("identity_ok");
  std::size_t pass = 0, nb = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& w = rows[i];
    json row{{"replicate", i}, {"N", w.n},   {"N_S", w.ns}, {"tv_bucket", w.bucket},
             {"B_flag", w.b},  {"J0", w.j0}, {"J1", w.j1}, {"J2plus", w.j2}};
    if (a.check_identity) row["identity_ok"] = w.ok;
    pass += w.ok;
    nb += w.b;
    rep.rows.push_back(std::move(row));
  }
  rep.summary["replicates"] = a.replicates;
  rep.summary["B_frequency"] = a.replicates ? static_cast<double>(nb) / static_cast<double>(a.replicates) : 0.0;
  if (a.check_identity) {
    rep.summary["identity_check_pass"] = pass;
    if (pass != a.replicates) rep.exit_code = kExitCheckFailed;
  }
  return rep;
}

struct EvolveArgs {
  GsSource gs;
  std::vector<double> times;
  std::vector<double> alphas;
  double tol = 1e-12;
  std::size_t budget = 1'000'000;
};

EvolveOptions evolve_options(const EvolveArgs& a) {
  EvolveOptions o;
  o.tol = a.tol;
  o.step_budget = a.budget;
  return o;
}

Report cmd_tv_exact(const EvolveArgs& a, const Common& c) {
  const auto r = resolve_gs(a.gs, c);
  const auto t0 = cutoff_time(r.gs.k(), r.p.size());
  Report rep;
  rep.command = "tv-exact";
  rep.config = base_config(c);
  rep.config["group"] = gs_config(r);
  rep.config["tol"] = a.tol;
  rep.config["step_budget"] = a.budget;
  rep.columns = {"t", "alpha", "tv", "collision", "tail_mass", "steps_used"};
  const auto f0 = DistVector::delta(r.p);
  for (double t : a.times) {
    if (!(t >= 0)) throw DomainError("--t must be nonnegative");
    const auto e = evolve_continuous(f0, r.gs, r.p, t, evolve_options(a));
    rep.rows.push_back({{"t", t},
                        {"alpha", t / t0.t0},
                        {"tv", tv_exact(e.dist)},
                        {"collision", collision_exact(e.dist)},
                        {"tail_mass", e.tail_mass},
                        {"steps_used", e.steps_used}});
  }
  rep.summary["t0"] = t0.t0;
  rep.summary["regime"] = regime_label(t0.regime);
  return rep;
}

Report cmd_tv_curve(const EvolveArgs& a, const Common& c) {
  const auto r = resolve_gs(a.gs, c);
  const auto t0 = cutoff_time(r.gs.k(), r.p.size());
  std::vector<double> alphas = a.alphas;
  if (alphas.empty()) alphas = ExperimentConfig{}.alpha_grid;
  std::sort(alphas.begin(), alphas.end());
  std::vector<double> ts;
  for (double al : alphas) {
    if (!(al >= 0)) throw DomainError("--alphas must be nonnegative");
    ts.push_back(al * t0.t0);
  }
  const auto curve = tv_curve(r.gs, r.p, ts, evolve_options(a));
  Report rep;
  rep.command = "tv-curve";
  rep.config = base_config(c);
  rep.config["group"] = gs_config(r);
  rep.config["alphas"] = alphas;
  rep.config["tol"] = a.tol;
  rep.config["step_budget"] = a.budget;
  rep.columns = {"alpha", "t", "tv", "tail_mass", "steps_used"};
  bool monotone = true;
  for (std::size_t i = 0; i < curve.size(); ++i) {
    rep.rows.push_back({{"alpha", alphas[i]},
                        {"t", curve[i].t},
                        {"tv", curve[i].tv},
                        {"tail_mass", curve[i].tail_mass},
                        {"steps_used", curve[i].steps_used}});
    if (i && curve[i].tv > curve[i - 1].tv + kMonotoneSlack) monotone = false;
  }
  rep.summary["t0"] = t0.t0;
  rep.summary["regime"] = regime_label(t0.regime);
  rep.summary["monotone"] = monotone;
  return rep;
}

struct EntropyArgs {
  std::string mode = "srw";
  std::vector<double> s;
  std::size_t k_s = 2, steps = 4, d = 2, trials = 1;
  bool pmf = false;
};

void pmf_rows(Report& rep, const PmfTable& t) {
  rep.columns = {"point", "p", "p_float"};
  for (const auto& [x, cell] : t.cells()) {
    std::string pt;
    for (std::size_t i = 0; i < x.size(); ++i) pt += (i ? " " : "") + std::to_string(x[i]);
    const auto [nu, de] = t.fraction(x);
    rep.rows.push_back({{"point", pt}, {"p", std::to_string(nu) + "/" + std::to_string(de)}, {"p_float", cell.p}});
  }
}

Report cmd_entropy(const EntropyArgs& a, const Common& c) {
  Report rep;
  rep.command = "entropy";
  rep.config = base_config(c);
  rep.config["mode"] = a.mode;
  if (a.mode == "srw") {
    if (a.s.empty()) throw DomainError("entropy --mode srw needs --s");
    rep.config["s"] = a.s;
    rep.columns = {"s", "h_exact", "h_asymptotic", "truncation_bound"};
    for (double s : a.s) {
      const auto e = srw_entropy(s);
      rep.rows.push_back({{"s", s},
                          {"h_exact", to_unit(e.value, c)},
                          {"h_asymptotic", to_unit(srw_entropy(s, EntropyMode::Asymptotic).value, c)},
                          {"truncation_bound", e.truncation_bound}});
    }
  } else if (a.mode == "y") {
    rep.config["k_s"] = a.k_s;
    rep.config["steps"] = a.steps;
    const auto t = y_pmf_exact(a.k_s, a.steps);
    if (a.pmf) {
      pmf_rows(rep, t);
    } else {
      const double h = entropy_of(t), asym = y_entropy_asymptotic(a.k_s, a.steps);
      const auto v = varentropy_bound_check(a.k_s, a.steps);
      rep.columns = {"k_s", "n", "entropy", "asymptotic", "gap", "relative_gap", "varentropy", "varentropy_bound"};
      rep.rows.push_back({{"k_s", a.k_s},
                          {"n", a.steps},
                          {"entropy", to_unit(h, c)},
                          {"asymptotic", to_unit(asym, c)},
                          {"gap", to_unit(h - asym, c)},
                          {"relative_gap", asym > 0 ? num(std::abs(h - asym) / asym) : json(nullptr)},
                          {"varentropy", v.exact},
                          {"varentropy_bound", v.bound}});
    }
    rep.summary["support"] = t.size();
  } else if (a.mode == "multidiff") {
    rep.config["d"] = a.d;
    rep.config["trials"] = a.trials;
    const auto t = multinomial_diff_pmf(a.d, a.trials);
    if (a.pmf) {
      pmf_rows(rep, t);
    } else {
      rep.columns = {"d", "trials", "entropy", "support"};
      rep.rows.push_back({{"d", a.d}, {"trials", a.trials}, {"entropy", to_unit(entropy_of(t), c)}, {"support", t.size()}});
    }
    rep.summary["support"] = t.size();
  } else {
    throw CLI::ValidationError("--mode", "must be one of srw, y, multidiff");
  }
  rep.summary["unit"] = unit_name(c);
  return rep;
}

struct EntropicArgs {
  std::size_t k = 1;
  double log_n = 0;
  double tol = 1e-9;
};

Report cmd_entropic_time(const EntropicArgs& a, const Common& c) {
  const double t = entropic_time(a.k, a.log_n, a.tol);
  Report rep;
  rep.command = "entropic-time";
  rep.config = base_config(c);
  rep.config["k"] = a.k;
  rep.config["logN"] = a.log_n;
  rep.config["tol"] = a.tol;
  rep.columns = {"k", "logN", "t_ent", "k_h_t_over_k"};
  const double kh = static_cast<double>(a.k) * h_exact(t / static_cast<double>(a.k));
  rep.rows.push_back({{"k", a.k}, {"logN", to_unit(a.log_n, c)}, {"t_ent", t}, {"k_h_t_over_k", to_unit(kh, c)}});
  rep.summary["unit"] = unit_name(c);
  return rep;
}

struct CutoffTimeArgs {
  std::size_t k = 2;
  std::uint64_t group_size = 0;
  double eps = 0.1;
};

Report cmd_cutoff_time(const CutoffTimeArgs& a, const Common& c) {
  if (a.group_size % 2 != 0) throw DomainError("--group-size must be even (|D_n| = 2n)");
  const auto ct = cutoff_time(a.k, a.group_size);
  const auto rr = regime_report(a.k, a.group_size / 2, a.eps);
  Report rep;
  rep.command = "cutoff-time";
  rep.config = base_config(c);
  rep.config["k"] = a.k;
  rep.config["group_size"] = a.group_size;
  rep.config["eps"] = a.eps;
  rep.columns = {"k", "group_size", "log_group_size", "regime", "t0", "ratio", "adjacent_regime", "adjacent_t0"};
  rep.rows.push_back({{"k", a.k},
                      {"group_size", a.group_size},
                      {"log_group_size", std::log(static_cast<double>(a.group_size))},
                      {"regime", regime_label(ct.regime)},
                      {"t0", ct.t0},
                      {"ratio", ct.ratio},
                      {"adjacent_regime", ct.adjacent ? json(regime_label(*ct.adjacent)) : json(nullptr)},
                      {"adjacent_t0", ct.adjacent_t0 ? json(*ct.adjacent_t0) : json(nullptr)}});
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  rep.summary["t_small"] = opt(rr.t_small);
  rep.summary["t_entropic"] = opt(rr.t_entropic);
  rep.summary["t_large"] = opt(rr.t_large);
  rep.summary["cond_i_ratio"] = rr.cond_i_ratio;
  rep.summary["cond_i_flag"] = rr.cond_i_flag;
  rep.summary["cond_ii_ratio"] = rr.cond_ii_ratio;
  rep.summary["cond_ii_flag"] = rr.cond_ii_flag;
  rep.summary["simple_small"] = rr.simple_small;
  rep.summary["simple_large"] = rr.simple_large;
  rep.summary["large_k_flag"] = rr.large_k_flag;
  return rep;
}

struct ScanArgs {
  std::string config;
  std::string format;  // csv | json; default from the output extension
  std::optional<std::size_t> replicates;
  std::optional<std::string> method;
  bool seed_given = false;
};

Report cmd_cutoff_scan(const ScanArgs& a, const Common& c) {
  json js;
  try {
    js = json::parse(read_file(a.config));
  } catch (const json::exception& e) {
    throw DomainError(std::string("config file: ") + e.what());
  }
  auto cfg = ExperimentConfig::from_json(js);
  // Command-line values win over the file.
  if (a.seed_given) cfg.seed = c.seed;
  if (a.replicates) cfg.replicates = *a.replicates;
  if (a.method) cfg.method = parse_method(*a.method);
  cfg.validate();

  std::filesystem::path path;
  Format fmt = a.format == "json" ? Format::Json : Format::Csv;
  if (!c.out.empty()) {
    path = c.out;
    if (a.format.empty() && path.extension() == ".json") fmt = Format::Json;
  } else {
    std::filesystem::path dir = cfg.output;
    if (dir.empty()) {
      const char* env = std::getenv(kOutputDirEnv);
      dir = env && *env ? env : ".";
    }
    path = dir / (fmt == Format::Json ? "profile.json" : "profile.csv");
  }

  const auto prof = run_cutoff_scan(cfg, c.threads);
  emit(prof, fmt, path);

  Report rep;
  rep.command = "cutoff-scan";
  rep.config = base_config(c);
  rep.config["experiment"] = cfg.to_json();
  rep.config["seed"] = cfg.seed;
  rep.columns = {"n", "k", "regime", "t0_median", "tv_at_min_alpha_median", "tv_at_max_alpha_median", "failed"};
  std::map<std::pair<std::uint64_t, std::size_t>, std::vector<const ProfileRow*>> groups;
  for (const auto& r : prof.rows) groups[{r.n, r.k}].push_back(&r);
  for (const auto& [key, rows] : groups) {
    std::map<std::size_t, std::pair<const ProfileRow*, const ProfileRow*>> ends;
    std::vector<double> t0s, lo, hi;
    std::size_t failed = 0;
    for (const auto* r : rows) {
      auto& e = ends[r->replicate];
      if (!e.first || r->alpha < e.first->alpha) e.first = r;
      if (!e.second || r->alpha > e.second->alpha) e.second = r;
    }
    for (const auto& [rid, e] : ends) {
      t0s.push_back(e.first->t0);
      if (e.first->status == "ok") {
        lo.push_back(e.first->tv);
        hi.push_back(e.second->tv);
      } else {
        ++failed;
      }
    }
    rep.rows.push_back({{"n", key.first},
                        {"k", key.second},
                        {"regime", rows.front()->regime},
                        {"t0_median", median_of(t0s)},
                        {"tv_at_min_alpha_median", num(median_of(lo))},
                        {"tv_at_max_alpha_median", num(median_of(hi))},
                        {"failed", failed}});
  }
  rep.force_stdout = true;
  rep.summary["output"] = path.string();
  rep.summary["format"] = fmt == Format::Json ? "json" : "csv";
  rep.summary["rows"] = prof.rows.size();
  rep.summary["failed_cells"] = prof.failed_cells;
  rep.summary["config_hash"] = prof.config_hash;
  if (prof.failed_cells > 0) rep.exit_code = kExitScanFailedCells;
  return rep;
}

struct VerifyArgs {
  std::string profile;
  double eps = 1.0;
  std::optional<double> eta, eta_lo, eta_hi;
  double quota = 0.8;
};

Report cmd_verify(const VerifyArgs& a, const Common& c) {
  const auto prof = load_profile(a.profile);
  const double lo = a.eta_lo ? *a.eta_lo : a.eta.value_or(0.2);
  const double hi = a.eta_hi ? *a.eta_hi : a.eta.value_or(0.2);
  const auto v = verify_cutoff(prof, a.eps, lo, hi, a.quota);
  Report rep;
  rep.command = "verify";
  rep.config = base_config(c);
  rep.config["profile"] = a.profile;
  rep.config["profile_config_hash"] = prof.config_hash;
  rep.config["eps"] = a.eps;
  rep.config["eta_lo"] = lo;
  rep.config["eta_hi"] = hi;
  rep.config["quota"] = a.quota;
  rep.columns = {"n",        "k",            "replicates",   "passed",       "fraction",
                 "pass",     "nearest_used", "median_tv_lo", "median_tv_hi", "missing"};
  for (const auto& cell : v.cells) {
    std::string miss;
    for (const auto& m : cell.missing) miss += (miss.empty() ? "" : ";") + m;
    rep.rows.push_back({{"n", cell.n},
                        {"k", cell.k},
                        {"replicates", cell.replicates},
                        {"passed", cell.passed},
                        {"fraction", cell.fraction},
                        {"pass", cell.pass},
                        {"nearest_used", cell.nearest_used},
                        {"median_tv_lo", num(cell.median_tv_lo)},
                        {"median_tv_hi", num(cell.median_tv_hi)},
                        {"missing", miss}});
  }
  rep.summary["pass"] = v.pass;
  if (!v.pass) rep.exit_code = kExitCheckFailed;
  return rep;
}

struct JiArgs {
  GsSource gs;
  double t = 0;
  std::size_t trajectories = 1000;
  double delta = 0.5;
};

Report cmd_ji_stats(const JiArgs& a, const Common& c) {
  if (!(a.t >= 0)) throw DomainError("--t must be nonnegative");
  const auto r = resolve_gs(a.gs, c);
  const auto law = ji_law_check(r.gs, r.p, a.t, a.trajectories, c.seed, 2, c.threads);
  const auto b = event_B_frequency(r.gs, r.p, a.t, a.trajectories, c.seed, a.delta, c.threads);
  Report rep;
  rep.command = "ji-stats";
  rep.config = base_config(c);
  rep.config["group"] = gs_config(r);
  rep.config["t"] = a.t;
  rep.config["trajectories"] = a.trajectories;
  rep.config["delta"] = a.delta;
  rep.columns = {"i", "q", "mean_observed", "mean_expected", "chi2", "dof", "p_value"};
  for (std::size_t i = 0; i < law.gof.size(); ++i) {
    rep.rows.push_back({{"i", i},
                        {"q", law.q[i]},
                        {"mean_observed", law.mean_observed[i]},
                        {"mean_expected", static_cast<double>(r.gs.k()) * law.q[i]},
                        {"chi2", law.gof[i].statistic},
                        {"dof", law.gof[i].dof},
                        {"p_value", law.gof[i].p_value}});
  }
  rep.summary["p_B"] = b.p_B;
  rep.summary["se_B"] = b.se_B;
  rep.summary["typical"] = b.typical;
  rep.summary["p_B_given_typ"] = b.p_B_given_typ;
  rep.summary["se_B_given_typ"] = b.se_B_given_typ;
  return rep;
}

struct GcdArgs {
  std::uint64_t n = 0;
  std::vector<std::uint64_t> v;
  std::size_t samples = 0;
};

Report cmd_gcd_check(const GcdArgs& a, const Common& c) {
  const auto r = gcd_uniformity_check(GroupParams(a.n), a.v, a.samples, c.seed);
  Report rep;
  rep.command = "gcd-check";
  rep.config = base_config(c);
  rep.config["n"] = a.n;
  rep.config["v"] = a.v;
  rep.config["samples"] = a.samples;
  rep.columns = {"x", "count", "in_support"};
  for (std::size_t x = 0; x < r.counts.size(); ++x)
    rep.rows.push_back({{"x", x}, {"count", r.counts[x]}, {"in_support", x % r.gamma == 0}});
  rep.summary["gamma"] = r.gamma;
  rep.summary["exact"] = r.exact;
  rep.summary["total"] = r.total;
  rep.summary["uniform"] = r.uniform;
  if (!r.exact) {
    rep.summary["p_value"] = num(r.p_value);
    rep.summary["off_support"] = r.off_support;
  }
  if (r.exact && !r.uniform) rep.exit_code = kExitCheckFailed;
  return rep;
}

struct NormalArgs {
  std::size_t d = 10;
  double m = 1000;
  double delta = 0.2;
  std::size_t samples = 10000;
  std::vector<double> x;
};

Report cmd_normal_set(const NormalArgs& a, const Common& c) {
  const NormalSetParams prm(a.d, a.m, a.delta);
  Report rep;
  rep.command = "normal-set";
  rep.config = base_config(c);
  rep.config["d"] = a.d;
  rep.config["m"] = a.m;
  rep.config["delta"] = a.delta;
  rep.summary["log_lower"] = prm.log_lower();
  rep.summary["log_upper"] = prm.log_upper();
  rep.summary["bulk_radius"] = prm.bulk_radius();
  if (!a.x.empty()) {
    rep.config["x"] = a.x;
    rep.columns = {"log_density", "in_normal_set", "in_bulk_set"};
    rep.rows.push_back({{"log_density", normal_log_density(prm, a.x)},
                        {"in_normal_set", normal_set_member(prm, a.x)},
                        {"in_bulk_set", bulk_set_member(prm, a.x)}});
    return rep;
  }
  rep.config["samples"] = a.samples;
  struct Hit {
    bool w = false, bulk = false;
  };
  std::vector<Hit> hits(a.samples);
  parallel_for(a.samples, c.threads, [&](std::size_t i) {
    auto rng = make_stream(c.seed, i, 0x40);
    NormalSampler s(a.d, a.m);
    std::vector<double> x;
    s.sample(rng, x);
    hits[i] = {normal_set_member(prm, x), bulk_set_member(prm, x)};
  });
  std::size_t w = 0, bulk = 0;
  for (const auto& h : hits) {
    w += h.w;
    bulk += h.bulk;
  }
  const double ns = static_cast<double>(std::max<std::size_t>(a.samples, 1));
  const double pw = static_cast<double>(w) / ns, pb = static_cast<double>(bulk) / ns;
  rep.columns = {"set", "frequency", "stderr"};
  rep.rows.push_back({{"set", "normal"}, {"frequency", pw}, {"stderr", std::sqrt(pw * (1 - pw) / ns)}});
  rep.rows.push_back({{"set", "bulk"}, {"frequency", pb}, {"stderr", std::sqrt(pb * (1 - pb) / ns)}});
  return rep;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random walks on dihedral groups: simulation, exact mixing, entropy and cutoff checks.\n"
               "All logarithms are natural (nats); --bits changes display only."};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Help for every subcommand");

  Common common;

  SimulateArgs sim;
  auto* s_sim = app.add_subcommand("simulate", "Simulate walk replicates; CSV per replicate");
  add_gs_options(s_sim, sim.gs);
  s_sim->add_option("--t", sim.t, "Time")->required();
  s_sim->add_option("--replicates", sim.replicates, "Replicates")->capture_default_str();
  s_sim->add_flag("--check-identity", sim.check_identity, "Check X = s^{N_S mod 2} r^{sum C_a U_a} per replicate");
  add_common(s_sim, common);

  EvolveArgs tve;
  auto* s_tve = app.add_subcommand("tv-exact", "Exact d_TV(t) from the identity");
  add_gs_options(s_tve, tve.gs);
  s_tve->add_option("--t", tve.times, "Time(s)")->required();
  s_tve->add_option("--tol", tve.tol, "Poisson truncation tolerance")->capture_default_str();
  s_tve->add_option("--budget", tve.budget, "Step budget")->capture_default_str();
  add_common(s_tve, common);

  EvolveArgs tvc;
  auto* s_tvc = app.add_subcommand("tv-curve", "Exact d_TV on the grid alpha * t0");
  add_gs_options(s_tvc, tvc.gs);
  s_tvc->add_option("--alphas", tvc.alphas, "Multiples of t0 (default 0.25 0.5 0.8 1 1.2 2 4)");
  s_tvc->add_option("--tol", tvc.tol, "Poisson truncation tolerance")->capture_default_str();
  s_tvc->add_option("--budget", tvc.budget, "Step budget")->capture_default_str();
  add_common(s_tvc, common);

  EntropyArgs ent;
  auto* s_ent = app.add_subcommand("entropy", "Entropies in nats: SRW h(s), Y_n, multinomial differences");
  s_ent->add_option("--mode", ent.mode, "srw | y | multidiff")
      ->check(CLI::IsMember({"srw", "y", "multidiff"}))
      ->capture_default_str();
  s_ent->add_option("--s", ent.s, "SRW time(s) (mode srw)");
  s_ent->add_option("--ks", ent.k_s, "k_S (mode y)")->capture_default_str();
  s_ent->add_option("--steps", ent.steps, "n (mode y)")->capture_default_str();
  s_ent->add_option("--d", ent.d, "d (mode multidiff)")->capture_default_str();
  s_ent->add_option("--trials", ent.trials, "N (mode multidiff)")->capture_default_str();
  s_ent->add_flag("--pmf", ent.pmf, "Print the exact pmf table instead of the entropy");
  add_common(s_ent, common);

  EntropicArgs et;
  auto* s_et = app.add_subcommand("entropic-time", "Solve k h(t/k) = log N (natural log)");
  s_et->add_option("--k", et.k, "Dimension k")->required();
  s_et->add_option("--logN", et.log_n, "log N in nats")->required();
  s_et->add_option("--tol", et.tol, "Tolerance on k h(t/k) - log N")->capture_default_str();
  add_common(s_et, common);

  CutoffTimeArgs ctime;
  auto* s_ct = app.add_subcommand("cutoff-time", "Predicted cutoff time t0(k, |G|) and regime");
  s_ct->add_option("--k", ctime.k, "Number of generators")->required();
  s_ct->add_option("--group-size", ctime.group_size, "|G| = 2n")->required();
  s_ct->add_option("--eps", ctime.eps, "eps in the simplified regime thresholds")->capture_default_str();
  add_common(s_ct, common);

  ScanArgs scan;
  auto* s_scan = app.add_subcommand("cutoff-scan", "Run a cutoff experiment from a JSON config");
  s_scan->add_option("--config", scan.config, "Experiment config (JSON)")->required();
  s_scan->add_option("--format", scan.format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  s_scan->add_option("--replicates", scan.replicates, "Override replicates");
  s_scan->add_option("--method", scan.method, "Override method: exact | mc")->check(CLI::IsMember({"exact", "mc"}));
  add_common(s_scan, common);
  s_scan->get_option("--out")->description(
      std::string("Profile path (default: <config output or $") + kOutputDirEnv + " or .>/profile.csv)");

  VerifyArgs ver;
  auto* s_ver = app.add_subcommand("verify", "Check a profile against the cutoff thresholds");
  s_ver->add_option("--profile", ver.profile, "Profile CSV from cutoff-scan")->required();
  s_ver->add_option("--eps", ver.eps, "Window half-width: alpha in {1-eps, 1+eps}")->capture_default_str();
  s_ver->add_option("--eta", ver.eta, "Both thresholds (default 0.2)");
  s_ver->add_option("--eta-lo", ver.eta_lo, "Require d_TV((1-eps)t0) >= 1 - eta_lo");
  s_ver->add_option("--eta-hi", ver.eta_hi, "Require d_TV((1+eps)t0) <= eta_hi");
  s_ver->add_option("--quota", ver.quota, "Fraction of replicates that must pass")->capture_default_str();
  add_common(s_ver, common);

  JiArgs ji;
  auto* s_ji = app.add_subcommand("ji-stats", "|J_i| laws against Binomial and event-B frequency");
  add_gs_options(s_ji, ji.gs);
  s_ji->add_option("--t", ji.t, "Time")->required();
  s_ji->add_option("--trajectories", ji.trajectories, "Trajectories")->capture_default_str();
  s_ji->add_option("--delta", ji.delta, "delta of the typical event")->capture_default_str();
  add_common(s_ji, common);

  GcdArgs gcd;
  auto* s_gcd = app.add_subcommand("gcd-check", "Law of v.U mod n against Unif(gamma Z_n)");
  s_gcd->add_option("--n", gcd.n, "Modulus n")->required();
  s_gcd->add_option("--v", gcd.v, "Coefficients (space or comma separated)")->required()->delimiter(',');
  s_gcd->add_option("--samples", gcd.samples, "0 = exhaustive enumeration")->capture_default_str();
  add_common(s_gcd, common);

  NormalArgs nrm;
  auto* s_nrm = app.add_subcommand("normal-set", "Normal(0, m Sigma) typical-set membership");
  s_nrm->add_option("--d", nrm.d, "Dimension")->capture_default_str();
  s_nrm->add_option("--m", nrm.m, "Scale m")->capture_default_str();
  s_nrm->add_option("--delta", nrm.delta, "Band tolerance")->capture_default_str();
  s_nrm->add_option("--samples", nrm.samples, "Monte Carlo draws")->capture_default_str();
  s_nrm->add_option("--x", nrm.x, "Test a single point instead of sampling")->delimiter(',');
  add_common(s_nrm, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  const auto start = std::chrono::steady_clock::now();
  try {
    Report rep;
    if (*s_sim) rep = cmd_simulate(sim, common);
    else if (*s_tve) rep = cmd_tv_exact(tve, common);
    else if (*s_tvc) rep = cmd_tv_curve(tvc, common);
    else if (*s_ent) rep = cmd_entropy(ent, common);
    else if (*s_et) rep = cmd_entropic_time(et, common);
    else if (*s_ct) rep = cmd_cutoff_time(ctime, common);
    else if (*s_scan) {
      scan.seed_given = s_scan->count("--seed") > 0;
      rep = cmd_cutoff_scan(scan, common);
    } else if (*s_ver) rep = cmd_verify(ver, common);
    else if (*s_ji) rep = cmd_ji_stats(ji, common);
    else if (*s_gcd) rep = cmd_gcd_check(gcd, common);
    else if (*s_nrm) rep = cmd_normal_set(nrm, common);
    std::optional<double> elapsed;
    if (!common.deterministic)
      elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    deliver(render(rep, common, elapsed), common, rep.force_stdout);
    return rep.exit_code;
  } catch (const IoError& e) {
    std::cerr << "dcut: I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "dcut: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "dcut: error: " << e.what() << "\n";
    return kExitDomain;
  }
}
