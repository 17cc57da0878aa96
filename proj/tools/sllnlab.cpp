// sllnlab: command-line front end for the lattice strong-law toolkit.
//
// Every subcommand resolves a flat sectioned key-value config (file, then
// --set overrides in order, then --seed/--out/--threads), runs, and writes
// three things into the output directory: manifest.txt echoing the fully
// resolved config with defaults filled in, summary.txt with the headline
// numbers, and one or more CSV files with the raw series.  Config resolution
// is pure: the same file plus the same overrides produce the same manifest
// bytes, and no output depends on the thread budget.
//
// Exit codes: 0 the run finished and every declared expectation held,
// 1 an expectation failed, 2 usage or configuration error, 3 numerical
// guard tripped or a resource budget was refused.

#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "slln/acceptance.hpp"
#include "slln/common.hpp"
#include "slln/config.hpp"
#include "slln/lattice_field.hpp"
#include "slln/lfss.hpp"
#include "slln/models.hpp"
#include "slln/moments.hpp"
#include "slln/multi_index.hpp"
#include "slln/report.hpp"
#include "slln/scaling.hpp"
#include "slln/slln.hpp"
#include "slln/stable.hpp"
#include "slln/toeplitz.hpp"

namespace {

using namespace slln;

constexpr int kExitOk = 0;
constexpr int kExitExpectation = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

// Refusals that are about machine budgets rather than config syntax.
struct ResourceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- config access with writeback ------------------------------------------
// Each helper reads a key and immediately stores the resolved value back, so
// the manifest ends up echoing every key the run consulted, defaults included.

std::int64_t cfg_int(Config& c, const std::string& key, std::int64_t fallback) {
  const std::int64_t v = c.get_int(key, fallback);
  c.set(key, fmt_int(v));
  return v;
}

double cfg_double(Config& c, const std::string& key, double fallback) {
  const double v = c.get_double(key, fallback);
  c.set(key, fmt_double(v));
  return v;
}

bool cfg_bool(Config& c, const std::string& key, bool fallback) {
  const bool v = c.get_bool(key, fallback);
  c.set(key, v ? "true" : "false");
  return v;
}

std::string cfg_string(Config& c, const std::string& key, const std::string& fallback) {
  const std::string v = c.get_string(key, fallback);
  c.set(key, v);
  return v;
}

std::string join_ints(const std::vector<std::int64_t>& v, const char* sep = ", ") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += fmt_int(v[i]);
  }
  return out;
}

std::string join_doubles(const std::vector<double>& v, const char* sep = ", ") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += fmt_double(v[i]);
  }
  return out;
}

std::vector<std::int64_t> cfg_ints(Config& c, const std::string& key, std::vector<std::int64_t> fallback) {
  std::vector<std::int64_t> v = c.get_ints(key, std::move(fallback));
  c.set(key, join_ints(v));
  return v;
}

std::vector<double> cfg_doubles(Config& c, const std::string& key, std::vector<double> fallback) {
  std::vector<double> v = c.get_doubles(key, std::move(fallback));
  c.set(key, join_doubles(v));
  return v;
}

std::string join_notes(const std::vector<std::string>& notes) {
  std::string out;
  for (std::size_t i = 0; i < notes.size(); ++i) {
    if (i) out += "; ";
    out += notes[i];
  }
  return out.empty() ? std::string("none") : out;
}

std::string to_hex(std::uint64_t x) {
  char buf[19];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(x));
  return buf;
}

// --- spec parsers -----------------------------------------------------------

// Scaling specs: "power <beta>" or "power_log <H> <rho>".
ScalingFunction parse_scaling(const std::string& text, const std::string& key) {
  std::istringstream in(text);
  std::string kind;
  in >> kind;
  std::string extra;
  if (kind == "power") {
    double beta = 0.0;
    if (!(in >> beta) || (in >> extra)) {
      throw std::runtime_error("config key '" + key + "': expected 'power <beta>', got '" + text + "'");
    }
    return ScalingFunction::power(beta);
  }
  if (kind == "power_log") {
    double h = 0.0, rho = 0.0;
    if (!(in >> h >> rho) || (in >> extra)) {
      throw std::runtime_error("config key '" + key + "': expected 'power_log <H> <rho>', got '" + text + "'");
    }
    return ScalingFunction::power_log(h, rho);
  }
  throw std::runtime_error("config key '" + key + "': unknown scaling '" + text +
                           "' (use 'power <beta>' or 'power_log <H> <rho>')");
}

std::vector<ScalingFunction> load_phis(Config& c, const std::string& prefix, int d,
                                       const std::string& fallback) {
  std::vector<ScalingFunction> out;
  for (int j = 0; j < d; ++j) {
    const std::string key = prefix + fmt_int(j);
    out.push_back(parse_scaling(cfg_string(c, key, fallback), key));
  }
  return out;
}

// Optional second normalizer set; present iff the axis-0 key is set.
std::vector<ScalingFunction> maybe_load_phis(Config& c, const std::string& prefix, int d) {
  if (!c.has(prefix + "0")) return {};
  return load_phis(c, prefix, d, "power 1");
}

Norm parse_norm(Config& c, const std::string& key) {
  const std::string v = cfg_string(c, key, "l2");
  if (v == "l2") return Norm::L2;
  if (v == "linf") return Norm::Linf;
  throw std::runtime_error("config key '" + key + "': expected 'l2' or 'linf', got '" + v + "'");
}

LfssConfig load_lfss(Config& c, int d) {
  LfssConfig cfg;
  cfg.d = d;
  cfg.alpha = cfg_double(c, "field.alpha", 1.5);
  cfg.hurst = cfg_doubles(c, "field.hurst", std::vector<double>(static_cast<std::size_t>(d), 0.8));
  cfg.kappa = cfg_double(c, "field.kappa", 0.0);
  cfg.grid_step = cfg_double(c, "field.grid_step", 0.25);
  cfg.trunc_window = cfg_int(c, "field.trunc_window", 64);
  cfg.trunc_delta = cfg_double(c, "field.trunc_delta", 0.05);
  return cfg;
}

FieldGenerator make_generator(Config& c, std::uint64_t seed) {
  const std::string kind = cfg_string(c, "field.generator", "iid-gaussian");
  const int d = static_cast<int>(cfg_int(c, "field.d", 1));
  if (kind == "zero") return zero_generator(d);
  if (kind == "iid-gaussian") {
    return iid_gaussian_generator(d, cfg_double(c, "field.sigma", 1.0), seed);
  }
  if (kind == "iid-stable") {
    const double alpha = cfg_double(c, "field.alpha", 1.5);
    return iid_stable_generator(d, alpha, cfg_double(c, "field.sigma", 1.0), seed);
  }
  if (kind == "orthogonal") {
    const double scale = cfg_double(c, "field.variance_scale", 1.0);
    const double power = cfg_double(c, "field.variance_power", 0.0);
    auto variance = [scale, power](const MultiIndex& n) {
      double prod = 1.0;
      for (auto v : n) prod *= static_cast<double>(std::max<std::int64_t>(1, v));
      return scale * std::pow(prod, power);
    };
    return orthogonal_generator(d, variance, seed);
  }
  if (kind == "quasi-stationary") {
    return quasi_stationary_generator(d, cfg_double(c, "field.ar_coeff", 0.5), seed);
  }
  if (kind == "lfss") return lfss_generator(load_lfss(c, d), seed);
  throw std::runtime_error(
      "config key 'field.generator': unknown kind '" + kind +
      "' (zero, iid-gaussian, iid-stable, orthogonal, quasi-stationary, lfss)");
}

// Pairwise bound specs "geometric <r>" give r^{i+j}; used for correlation caps.
std::function<double(std::int64_t, std::int64_t)> parse_pair_bound(Config& c, const std::string& key,
                                                                   const std::string& fallback) {
  const std::string text = cfg_string(c, key, fallback);
  std::istringstream in(text);
  std::string kind;
  in >> kind;
  if (kind == "geometric") {
    double r = 0.0;
    std::string extra;
    if (!(in >> r) || (in >> extra)) {
      throw std::runtime_error("config key '" + key + "': expected 'geometric <r>', got '" + text + "'");
    }
    return [r](std::int64_t i, std::int64_t j) { return std::pow(r, static_cast<double>(i + j)); };
  }
  throw std::runtime_error("config key '" + key + "': unknown bound '" + text + "' (use 'geometric <r>')");
}

// --- shared run plumbing -----------------------------------------------------

struct CommonOpts {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out = ".";
  std::uint64_t seed = 0;
  int threads = 1;
  CLI::Option* out_opt = nullptr;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* threads_opt = nullptr;
};

void attach_common(CLI::App* sub, CommonOpts& o) {
  sub->add_option("--config", o.config_path, "config file (flat sectioned key = value)");
  sub->add_option("--set", o.sets, "override one key, as section.key=value; repeatable");
  o.out_opt = sub->add_option("--out", o.out, "output directory (default: current directory)");
  o.seed_opt = sub->add_option("--seed", o.seed, "master seed; shorthand for --set run.seed=N");
  o.threads_opt = sub->add_option("--threads", o.threads, "thread budget; shorthand for --set run.threads=N");
}

struct Run {
  Config cfg;
  std::string out_dir;
  std::uint64_t seed = 0;
  int threads = 1;

  std::string path(const std::string& name) const {
    return (std::filesystem::path(out_dir) / name).string();
  }
};

Run start_run(const CommonOpts& o, const std::string& subcommand, std::int64_t default_seed = 1,
              std::int64_t default_threads = 1) {
  Run run;
  if (!o.config_path.empty()) run.cfg = Config::from_file(o.config_path);
  for (const auto& s : o.sets) run.cfg.apply_override(s);
  if (o.seed_opt->count() > 0) run.cfg.set("run.seed", fmt_int(static_cast<std::int64_t>(o.seed)));
  if (o.out_opt->count() > 0) run.cfg.set("run.out", o.out);
  if (o.threads_opt->count() > 0) run.cfg.set("run.threads", fmt_int(o.threads));
  run.cfg.set("run.subcommand", subcommand);
  run.seed = static_cast<std::uint64_t>(cfg_int(run.cfg, "run.seed", default_seed));
  run.threads = static_cast<int>(cfg_int(run.cfg, "run.threads", default_threads));
  run.out_dir = cfg_string(run.cfg, "run.out", ".");
  if (run.threads < 1) throw std::runtime_error("config key 'run.threads': must be >= 1");
  std::filesystem::create_directories(run.out_dir);
  return run;
}

void finish_run(const Run& run, const SummaryWriter& summary) {
  std::ofstream m(run.path("manifest.txt"), std::ios::binary);
  if (!m) throw std::runtime_error("cannot open " + run.path("manifest.txt"));
  m << run.cfg.manifest();
  summary.write(run.path("summary.txt"));
  std::fputs(summary.str().c_str(), stdout);
}

// Expectation keys are optional; when present they decide the exit code.
struct Expectations {
  int exit_code = kExitOk;

  void check(SummaryWriter& s, const std::string& label, bool met) {
    s.kv(label, met ? "met" : "FAILED");
    if (!met) exit_code = kExitExpectation;
  }
};

void summarize_assessment(SummaryWriter& s, const std::string& prefix, const SeriesAssessment& a) {
  s.kv(prefix + "_verdict", to_string(a.verdict));
  s.kv(prefix + "_tail_ratio", a.tail_ratio);
  s.kv(prefix + "_ratios_used", static_cast<std::int64_t>(a.ratios_used));
}

// --- simulate ----------------------------------------------------------------

int cmd_simulate(const CommonOpts& o) {
  Run run = start_run(o, "simulate");
  Config& c = run.cfg;

  FieldGenerator gen = make_generator(c, run.seed);
  const int d = gen.d;
  const auto ud = static_cast<std::size_t>(d);
  MultiIndex shape = cfg_ints(c, "field.shape", MultiIndex(ud, 16));
  MultiIndex origin = cfg_ints(c, "field.origin", MultiIndex(ud, 1));
  if (shape.size() != ud) throw std::runtime_error("config key 'field.shape': need one entry per axis");
  if (origin.size() != ud) throw std::runtime_error("config key 'field.origin': need one entry per axis");
  const std::int64_t replicate = cfg_int(c, "field.replicate", 0);
  const std::int64_t max_bytes = cfg_int(c, "field.max_bytes", 268435456);

  std::int64_t cells = 1;
  for (auto v : shape) {
    if (v < 1) throw std::runtime_error("config key 'field.shape': entries must be >= 1");
    if (cells > std::numeric_limits<std::int64_t>::max() / v) {
      throw ResourceError("simulate: field size overflows the cell counter");
    }
    cells *= v;
  }
  const std::int64_t needed = cells > std::numeric_limits<std::int64_t>::max() / 8 ? -1 : cells * 8;
  if (needed < 0 || needed > max_bytes) {
    throw ResourceError("simulate: field needs " + (needed < 0 ? std::string("> 2^63") : fmt_int(needed)) +
                        " bytes but field.max_bytes allows " + fmt_int(max_bytes) +
                        "; shrink field.shape or raise the budget");
  }

  const std::string basename = cfg_string(c, "output.basename", "field");
  const bool want_csv = cfg_bool(c, "output.csv", false);

  LatticeField f = gen.make(shape, origin, replicate, run.threads);
  const std::string bin_path = run.path(basename + ".bin");
  write_field_binary(f, bin_path);
  if (want_csv) {
    std::ofstream fc(run.path(basename + ".csv"), std::ios::binary);
    if (!fc) throw std::runtime_error("cannot open " + run.path(basename + ".csv"));
    write_field_csv(f, fc);
  }

  std::ifstream in(bin_path, std::ios::binary);
  std::stringstream bytes;
  bytes << in.rdbuf();
  const std::uint64_t checksum = fnv1a64(bytes.str());

  SummaryWriter s;
  s.kv("subcommand", "simulate");
  s.kv("generator", gen.label);
  s.kv("d", static_cast<std::int64_t>(d));
  s.kv("shape", join_ints(shape));
  s.kv("origin", join_ints(origin));
  s.kv("replicate", replicate);
  s.kv("cells", cells);
  s.kv("bytes", needed);
  s.kv("seed", run.seed);
  s.kv("field_file", basename + ".bin");
  s.kv("checksum", to_hex(checksum));
  finish_run(run, s);
  return kExitOk;
}

// --- estimate-moments ----------------------------------------------------------

int cmd_estimate_moments(const CommonOpts& o) {
  Run run = start_run(o, "estimate-moments");
  Config& c = run.cfg;
  const std::string kind = cfg_string(c, "estimate.kind", "abs");

  SummaryWriter s;
  s.kv("subcommand", "estimate-moments");
  s.kv("kind", kind);
  s.kv("seed", run.seed);
  Expectations ex;

  if (kind == "abs") {
    const std::string law = cfg_string(c, "estimate.law", "gaussian");
    ScalarSampler sampler = ScalarSampler::constant(0.0);
    if (law == "gaussian") {
      sampler = ScalarSampler::gaussian(cfg_double(c, "estimate.sigma", 1.0));
    } else if (law == "stable") {
      sampler = ScalarSampler::stable(cfg_double(c, "estimate.alpha", 1.5), cfg_double(c, "estimate.sigma", 1.0));
    } else if (law == "constant") {
      sampler = ScalarSampler::constant(cfg_double(c, "estimate.value", 1.0));
    } else {
      throw std::runtime_error("config key 'estimate.law': unknown law '" + law +
                               "' (gaussian, stable, constant)");
    }
    const double p = cfg_double(c, "estimate.p", 1.0);
    const std::int64_t replicates = cfg_int(c, "estimate.replicates", 20000);
    const MomentEstimate e = estimate_abs_moment(sampler, p, replicates, run.seed, "cli/abs-moment");

    CsvWriter csv({"p", "value", "std_error", "replicates", "heavy_tail_unstable"});
    csv.row({cell(e.p), cell(e.value), cell(e.std_error), cell(e.replicates), cell(e.heavy_tail_unstable)});
    csv.write(run.path("moments.csv"));

    s.kv("p", e.p);
    s.kv("value", e.value);
    s.kv("std_error", e.std_error);
    s.kv("replicates", e.replicates);
    s.kv("heavy_tail_unstable", e.heavy_tail_unstable);
    if (c.has("estimate.expect_value")) {
      const double want = cfg_double(c, "estimate.expect_value", 0.0);
      const double tol = cfg_double(c, "estimate.expect_tol", 4.0 * e.std_error);
      s.kv("expect_value", want);
      s.kv("expect_tol", tol);
      ex.check(s, "expectation_value", std::abs(e.value - want) <= tol);
    }
  } else if (kind == "law") {
    const int d = static_cast<int>(cfg_int(c, "field.d", 1));
    const LfssConfig cfg = load_lfss(c, d);
    const std::int64_t a = cfg_int(c, "estimate.a", 2);
    const double p = cfg_double(c, "estimate.p", 1.0);
    const auto exps64 = cfg_ints(c, "estimate.exponents", {2, 3, 4, 5, 6});
    std::vector<int> exponents;
    for (auto v : exps64) exponents.push_back(static_cast<int>(v));
    const std::int64_t replicates = cfg_int(c, "estimate.replicates", 2000);
    const std::int64_t shift = cfg_int(c, "estimate.shift", 16);

    const MomentLawReport rep =
        lfss_moment_law(cfg, a, p, exponents, replicates, run.seed, "cli/moment-law", run.threads, shift);

    CsvWriter csv({"exponent", "size", "mean_abs_p", "std_error", "predicted"});
    for (const auto& r : rep.rows) {
      csv.row({cell(r.exponent), cell(r.size), cell(r.mean_abs_p), cell(r.std_error), cell(r.predicted)});
    }
    csv.write(run.path("moments.csv"));

    s.kv("c_hat", rep.c_hat);
    s.kv("slope", rep.slope);
    s.kv("slope_target", rep.slope_target);
    s.kv("ratio_geomean", rep.ratio_geomean);
    s.kv("ratio_target", rep.ratio_target);
    s.kv("shift_gap", rep.shift_gap);
    s.kv("shift_se", rep.shift_se);
    s.kv("shift_within_tol", rep.shift_within_tol);
    s.kv("heavy_tail_unstable", rep.heavy_tail_unstable);
    s.kv("notes", join_notes(rep.notes));
    if (c.has("estimate.expect_slope_tol")) {
      const double tol = cfg_double(c, "estimate.expect_slope_tol", 0.05);
      ex.check(s, "expectation_slope", std::abs(rep.slope - rep.slope_target) <= tol);
    }
    if (c.has("estimate.expect_ratio_rel_tol")) {
      const double tol = cfg_double(c, "estimate.expect_ratio_rel_tol", 0.10);
      ex.check(s, "expectation_ratio",
               std::abs(rep.ratio_geomean - rep.ratio_target) <= tol * rep.ratio_target);
    }
  } else if (kind == "sup") {
    const int d = static_cast<int>(cfg_int(c, "field.d", 1));
    const LfssConfig cfg = load_lfss(c, d);
    const double gamma = cfg_double(c, "estimate.gamma", 1.0);
    const std::int64_t side = cfg_int(c, "estimate.side", 8);
    const auto refines64 = cfg_ints(c, "estimate.refines", {1, 2, 4});
    std::vector<int> refines;
    for (auto v : refines64) refines.push_back(static_cast<int>(v));
    const std::int64_t replicates = cfg_int(c, "estimate.replicates", 2000);

    const auto rows =
        estimate_sup_increment_moments(cfg, gamma, side, refines, replicates, run.seed, "cli/sup-moment",
                                       run.threads);
    CsvWriter csv({"side", "refine", "gamma", "value", "std_error", "c6"});
    double c6_min = rows.front().c6, c6_max = rows.front().c6;
    for (const auto& r : rows) {
      csv.row({cell(r.side), cell(static_cast<std::int64_t>(r.refine)), cell(r.gamma), cell(r.value),
               cell(r.std_error), cell(r.c6)});
      c6_min = std::min(c6_min, r.c6);
      c6_max = std::max(c6_max, r.c6);
    }
    csv.write(run.path("moments.csv"));
    s.kv("gamma", gamma);
    s.kv("side", side);
    s.kv("c6_min", c6_min);
    s.kv("c6_max", c6_max);
    if (c.has("estimate.expect_c6_rel_spread")) {
      const double tol = cfg_double(c, "estimate.expect_c6_rel_spread", 0.5);
      ex.check(s, "expectation_c6_spread", c6_max - c6_min <= tol * c6_max);
    }
  } else if (kind == "block-tail") {
    const int d = static_cast<int>(cfg_int(c, "field.d", 1));
    const LfssConfig cfg = load_lfss(c, d);
    const double gamma = cfg_double(c, "estimate.gamma", 1.0);
    const double epsilon = cfg_double(c, "estimate.epsilon", 0.5);
    const int n_max = static_cast<int>(cfg_int(c, "estimate.n_max", 8));
    const std::int64_t replicates = cfg_int(c, "estimate.replicates", 2000);

    const BlockTailReport rep =
        run_lfss_block_tail(cfg, gamma, epsilon, n_max, replicates, run.seed, "cli/block-tail", run.threads);
    CsvWriter csv({"n", "moment", "std_error", "fitted_bound", "normalized"});
    for (std::size_t i = 0; i < rep.block_max_moment.size(); ++i) {
      csv.row({cell(static_cast<std::int64_t>(i)), cell(rep.block_max_moment[i]), cell(rep.block_std_error[i]),
               cell(rep.fitted_bound[i]), cell(rep.normalized_terms[i])});
    }
    csv.write(run.path("moments.csv"));
    s.kv("gamma", rep.gamma);
    s.kv("rho", rep.rho);
    s.kv("c_fit", rep.c_fit);
    s.kv("dominance_fraction", rep.dominance_fraction);
    summarize_assessment(s, "normalized", rep.normalized_series);
    s.kv("notes", join_notes(rep.notes));
    if (c.has("estimate.expect")) {
      const std::string want = cfg_string(c, "estimate.expect", "converges");
      ex.check(s, "expectation_verdict", to_string(rep.normalized_series.verdict) == want);
    }
  } else {
    throw std::runtime_error("config key 'estimate.kind': unknown kind '" + kind +
                             "' (abs, law, sup, block-tail)");
  }

  finish_run(run, s);
  return ex.exit_code;
}

// --- check-conditions ----------------------------------------------------------

void write_series_outputs(const Run& run, SummaryWriter& s, Expectations& ex, Config& c,
                          const MomentSeriesReport& rep) {
  const std::size_t nd = rep.terms.empty() ? 0 : rep.terms.front().n.size();
  std::vector<std::string> header;
  for (std::size_t j = 0; j < nd; ++j) header.push_back("n" + fmt_int(static_cast<std::int64_t>(j)));
  header.insert(header.end(), {"term", "std_error", "anchor"});
  CsvWriter terms(header);
  for (const auto& t : rep.terms) {
    std::vector<std::string> row;
    for (auto v : t.n) row.push_back(cell(v));
    row.push_back(cell(t.term));
    row.push_back(cell(t.std_error));
    row.push_back(join_ints(t.argmax_anchor, ";"));
    terms.row(row);
  }
  terms.write(run.path("terms.csv"));

  CsvWriter levels({"level", "level_sum", "partial_sum"});
  for (std::size_t i = 0; i < rep.level_sums.size(); ++i) {
    levels.row({cell(static_cast<std::int64_t>(i)), cell(rep.level_sums[i]), cell(rep.partial_sums[i])});
  }
  levels.write(run.path("levels.csv"));

  summarize_assessment(s, "series", rep.assessment);
  s.kv("plan_admissible", rep.plan_admissible);
  s.kv("plan_note", rep.plan_note.empty() ? "none" : rep.plan_note);
  s.kv("notes", join_notes(rep.notes));
  if (c.has("conditions.expect")) {
    const std::string want = cfg_string(c, "conditions.expect", "converges");
    ex.check(s, "expectation_verdict", to_string(rep.assessment.verdict) == want);
  }
}

void write_recursion_outputs(const Run& run, SummaryWriter& s, Expectations& ex, Config& c,
                             const RecursionTrace& trace) {
  CsvWriter csv({"level", "lhs", "rhs_f", "drive", "bound", "slack_mean", "slack_se", "within_tol"});
  for (const auto& lv : trace.levels) {
    csv.row({cell(static_cast<std::int64_t>(lv.level)), cell(lv.lhs), cell(lv.rhs_f), cell(lv.drive),
             cell(lv.bound), cell(lv.slack_mean), cell(lv.slack_se), cell(lv.within_tol)});
  }
  csv.write(run.path("recursion.csv"));

  s.kv("c", trace.c);
  s.kv("D", trace.D);
  s.kv("f0", trace.f0);
  s.kv("f0_exact_zero", trace.f0_exact_zero);
  s.kv("all_within_tol", trace.all_within_tol);
  s.kv("per_replicate_gaps_nonneg", trace.per_replicate_gaps_nonneg);
  s.kv("constants_note", trace.constants_note.empty() ? "none" : trace.constants_note);
  s.kv("notes", join_notes(trace.notes));
  const bool holds = trace.all_within_tol && trace.per_replicate_gaps_nonneg;
  s.kv("verdict", holds ? "holds" : "violated");
  if (c.has("conditions.expect")) {
    const std::string want = cfg_string(c, "conditions.expect", "holds");
    ex.check(s, "expectation_verdict", (holds ? "holds" : "violated") == want);
  }
}

int cmd_check_conditions(const CommonOpts& o) {
  if (o.config_path.empty() && o.sets.empty()) {
    std::fputs(
        "check-conditions: empty config.\n"
        "Provide --config FILE or --set section.key=value.  Start with conditions.check\n"
        "(rect, sphere, corollary, recursion-rect, recursion-sphere, quasi-stationary,\n"
        "orthogonal, moricz), a [field] generator where applicable, and optionally\n"
        "conditions.expect to turn the verdict into the exit code.\n",
        stderr);
    return kExitUsage;
  }

  Run run = start_run(o, "check-conditions");
  Config& c = run.cfg;
  const std::string check = cfg_string(c, "conditions.check", "rect");

  SummaryWriter s;
  s.kv("subcommand", "check-conditions");
  s.kv("check", check);
  s.kv("seed", run.seed);
  Expectations ex;

  if (check == "rect" || check == "sphere") {
    FieldGenerator gen = make_generator(c, run.seed);
    const double p = cfg_double(c, "conditions.p", 1.0);
    const int n_max = static_cast<int>(cfg_int(c, "conditions.n_max", 8));
    ConditionSeriesOptions opt;
    opt.replicates = cfg_int(c, "conditions.replicates", 2000);
    opt.threads = run.threads;
    opt.require_admissible = cfg_bool(c, "conditions.require_admissible", false);
    if (check == "rect") {
      const auto phis = load_phis(c, "conditions.phi", gen.d, "power 1");
      const auto bases = cfg_ints(c, "conditions.bases", MultiIndex(static_cast<std::size_t>(gen.d), 2));
      write_series_outputs(run, s, ex, c, condition_series_rect(gen, phis, bases, p, n_max, opt));
    } else {
      const auto f = parse_scaling(cfg_string(c, "conditions.f", "power 1"), "conditions.f");
      const std::int64_t a = cfg_int(c, "conditions.a", 2);
      const Norm norm = parse_norm(c, "conditions.norm");
      write_series_outputs(run, s, ex, c, condition_series_sphere(gen, f, a, p, n_max, norm, opt));
    }
  } else if (check == "corollary") {
    const int d = static_cast<int>(cfg_int(c, "conditions.d", 1));
    const auto phis = load_phis(c, "conditions.phi", d, "power 1");
    const auto bases = cfg_ints(c, "conditions.bases", MultiIndex(static_cast<std::size_t>(d), 2));
    const double p = cfg_double(c, "conditions.p", 1.0);
    const int n_max = static_cast<int>(cfg_int(c, "conditions.n_max", 8));
    // Bound spec "power <coef> <q>" reads as coef * |B_n|^q over the block
    // |B_n| = prod_j bases_j^{n_j}; the checker divides by prod_j phi_j^p.
    const std::string text = cfg_string(c, "conditions.bound", "power 1 1");
    std::istringstream in(text);
    std::string kindw;
    double coef = 0.0, q = 0.0;
    std::string extra;
    in >> kindw;
    if (kindw != "power" || !(in >> coef >> q) || (in >> extra)) {
      throw std::runtime_error("config key 'conditions.bound': expected 'power <coef> <q>', got '" + text +
                               "'");
    }
    auto bound = [&bases, coef, q, d](const MultiIndex& n) {
      double size = 1.0;
      for (int j = 0; j < d; ++j) {
        auto u = static_cast<std::size_t>(j);
        size *= std::pow(static_cast<double>(bases[u]), static_cast<double>(n[u]));
      }
      return coef * std::pow(size, q);
    };
    write_series_outputs(run, s, ex, c, corollary_bound_series(bound, phis, bases, p, n_max));
  } else if (check == "recursion-sphere" || check == "recursion-rect") {
    FieldGenerator gen = make_generator(c, run.seed);
    const std::int64_t a = cfg_int(c, "conditions.a", 2);
    const double p = cfg_double(c, "conditions.p", 1.0);
    const int n_levels = static_cast<int>(cfg_int(c, "conditions.levels", 4));
    RecursionOptions opt;
    opt.replicates = cfg_int(c, "conditions.replicates", 4000);
    opt.threads = run.threads;
    if (check == "recursion-sphere") {
      const auto f = parse_scaling(cfg_string(c, "conditions.f", "power 1.1"), "conditions.f");
      const Norm norm = parse_norm(c, "conditions.norm");
      write_recursion_outputs(run, s, ex, c, recursion_trace_sphere(gen, f, a, p, n_levels, norm, opt));
    } else {
      const int sdim = static_cast<int>(cfg_int(c, "conditions.s", gen.d));
      const auto phis = load_phis(c, "conditions.phi", gen.d, "power 1.1");
      write_recursion_outputs(run, s, ex, c, recursion_trace_rect(gen, sdim, phis, a, p, n_levels, opt));
    }
  } else if (check == "quasi-stationary") {
    const auto corr = parse_pair_bound(c, "conditions.corr", "geometric 0.5");
    const auto phi1 = parse_scaling(cfg_string(c, "conditions.phi0", "power 1"), "conditions.phi0");
    const auto phi2 = parse_scaling(cfg_string(c, "conditions.phi1", "power 1"), "conditions.phi1");
    const std::int64_t a = cfg_int(c, "conditions.a", 2);
    const std::int64_t lag_max = cfg_int(c, "conditions.lag_max", 256);
    const int chain_cap = static_cast<int>(cfg_int(c, "conditions.chain_cap", 8));
    const auto rep = check_quasi_stationary_condition(corr, phi1, phi2, a, lag_max, chain_cap);

    CsvWriter csv({"k", "tail_axis1", "tail_axis2"});
    for (std::size_t k = 0; k < rep.tail_axis1.size(); ++k) {
      csv.row({cell(static_cast<std::int64_t>(k)), cell(rep.tail_axis1[k]), cell(rep.tail_axis2[k])});
    }
    csv.write(run.path("tails.csv"));

    s.kv("D", rep.D);
    s.kv("h11", rep.h(1, 1));
    s.kv("tails_converge", rep.tails_converge);
    s.kv("fh_sum", rep.fh_sum);
    summarize_assessment(s, "fh", rep.fh_assessment);
    s.kv("chain_lhs", rep.chain_lhs);
    s.kv("chain_rhs", rep.chain_rhs);
    s.kv("chain_holds", rep.chain_holds);
    s.kv("notes", join_notes(rep.notes));
    const bool conv = rep.tails_converge && rep.fh_assessment.verdict == SeriesVerdict::Converges &&
                      rep.chain_holds;
    s.kv("verdict", conv ? "converges" : "diverges");
    if (c.has("conditions.expect")) {
      const std::string want = cfg_string(c, "conditions.expect", "converges");
      ex.check(s, "expectation_verdict", (conv ? "converges" : "diverges") == want);
    }
  } else if (check == "orthogonal") {
    const int d = static_cast<int>(cfg_int(c, "conditions.d", 1));
    const std::int64_t trunc = cfg_int(c, "conditions.trunc", 256);
    const double scale = cfg_double(c, "conditions.variance_scale", 1.0);
    const double power = cfg_double(c, "conditions.variance_power", 0.0);
    auto variance = [scale, power](const MultiIndex& n) {
      double prod = 1.0;
      for (auto v : n) prod *= static_cast<double>(std::max<std::int64_t>(1, v));
      return scale * std::pow(prod, power);
    };
    const auto rep = check_orthogonal_conditions(variance, d, trunc);

    CsvWriter csv({"level", "log_weighted_block", "plain_block"});
    const std::size_t nlev = std::max(rep.log_weighted.block_sums.size(), rep.plain.block_sums.size());
    for (std::size_t i = 0; i < nlev; ++i) {
      const double lw = i < rep.log_weighted.block_sums.size() ? rep.log_weighted.block_sums[i] : 0.0;
      const double pl = i < rep.plain.block_sums.size() ? rep.plain.block_sums[i] : 0.0;
      csv.row({cell(static_cast<std::int64_t>(i)), cell(lw), cell(pl)});
    }
    csv.write(run.path("blocks.csv"));

    s.kv("log_weighted_partial_sum", rep.log_weighted.partial_sum);
    summarize_assessment(s, "log_weighted", rep.log_weighted.assessment);
    s.kv("plain_partial_sum", rep.plain.partial_sum);
    summarize_assessment(s, "plain", rep.plain.assessment);
    s.kv("verdicts_agree", rep.verdicts_agree);
    if (c.has("conditions.expect")) {
      const std::string want = cfg_string(c, "conditions.expect", "converges");
      ex.check(s, "expectation_verdict", to_string(rep.plain.assessment.verdict) == want);
    }
  } else if (check == "moricz") {
    const auto corr = parse_pair_bound(c, "conditions.corr", "geometric 0.5");
    std::vector<ScalingFunction> lambdas;
    for (int j = 0; j < 2; ++j) {
      const std::string key = "conditions.lambda" + fmt_int(j);
      lambdas.push_back(parse_scaling(cfg_string(c, key, "power 1"), key));
    }
    const std::int64_t trunc = cfg_int(c, "conditions.trunc", 4096);
    const std::int64_t rho_trunc = cfg_int(c, "conditions.rho_trunc", 512);
    const auto rep = check_moricz_quasi_orthogonal(corr, lambdas, trunc, rho_trunc);

    CsvWriter csv({"axis", "log_weight_sum", "log_weight_verdict", "reciprocal_sum", "reciprocal_verdict"});
    for (std::size_t j = 0; j < rep.log_weight_axis_sums.size(); ++j) {
      csv.row({cell(static_cast<std::int64_t>(j)), cell(rep.log_weight_axis_sums[j]),
               cell(to_string(rep.log_weight_axis[j].verdict)), cell(rep.reciprocal_axis_sums[j]),
               cell(to_string(rep.reciprocal_axis[j].verdict))});
    }
    csv.write(run.path("axes.csv"));

    s.kv("rho_sum", rep.rho_sum);
    summarize_assessment(s, "rho", rep.rho_assessment);
    s.kv("log_weight_converges", rep.log_weight_converges);
    s.kv("reciprocal_converges", rep.reciprocal_converges);
    s.kv("notes", join_notes(rep.notes));
    const bool conv = rep.rho_assessment.verdict == SeriesVerdict::Converges && rep.reciprocal_converges;
    s.kv("verdict", conv ? "converges" : "diverges");
    if (c.has("conditions.expect")) {
      const std::string want = cfg_string(c, "conditions.expect", "converges");
      ex.check(s, "expectation_verdict", (conv ? "converges" : "diverges") == want);
    }
  } else {
    throw std::runtime_error("config key 'conditions.check': unknown check '" + check +
                             "' (rect, sphere, corollary, recursion-rect, recursion-sphere, "
                             "quasi-stationary, orthogonal, moricz)");
  }

  finish_run(run, s);
  return ex.exit_code;
}

// --- slln ----------------------------------------------------------------------

int cmd_slln(const CommonOpts& o) {
  Run run = start_run(o, "slln");
  Config& c = run.cfg;

  FieldGenerator gen = make_generator(c, run.seed);
  const auto phis = load_phis(c, "slln.phi", gen.d, "power 1");
  SllnOptions opt;
  opt.shell_cap = static_cast<int>(cfg_int(c, "slln.shell_cap", 6));
  opt.ref_shell = static_cast<int>(cfg_int(c, "slln.ref_shell", 2));
  opt.halving_target = cfg_double(c, "slln.halving_target", 0.5);
  opt.replicates = cfg_int(c, "slln.replicates", 8);
  opt.threads = run.threads;
  opt.require_admissible = cfg_bool(c, "slln.require_admissible", false);
  opt.base = cfg_int(c, "slln.base", 2);
  opt.survey_p = cfg_double(c, "slln.survey_p", 1.0);
  opt.control_phis = maybe_load_phis(c, "slln.control", gen.d);

  const SllnReport rep = run_slln(gen, phis, opt);

  std::vector<std::string> header = {"shell", "median", "p90"};
  if (rep.control_tail) header.push_back("control_median");
  CsvWriter csv(header);
  for (std::size_t k = 0; k < rep.tail.median.size(); ++k) {
    std::vector<std::string> row = {cell(static_cast<std::int64_t>(k)), cell(rep.tail.median[k]),
                                    cell(rep.tail.p90[k])};
    if (rep.control_tail) row.push_back(cell(rep.control_tail->median[k]));
    csv.row(row);
  }
  csv.write(run.path("tailsup.csv"));

  SummaryWriter s;
  s.kv("subcommand", "slln");
  s.kv("generator", gen.label);
  s.kv("seed", run.seed);
  s.kv("replicates", rep.replicates);
  s.kv("shell_cap", static_cast<std::int64_t>(opt.shell_cap));
  s.kv("ref_shell", static_cast<std::int64_t>(opt.ref_shell));
  s.kv("median_ref", rep.tail.median_ref);
  s.kv("median_cap", rep.tail.median_cap);
  s.kv("halving_ratio", rep.tail.halving_ratio);
  s.kv("halving_target", opt.halving_target);
  s.kv("nonincreasing", rep.tail.nonincreasing);
  s.kv("decay_met", rep.tail.passes);
  if (rep.control_tail) {
    s.kv("control_halving_ratio", rep.control_tail->halving_ratio);
    s.kv("control_decay_met", rep.control_tail->passes);
  }
  s.kv("plan_admissible", rep.plan_admissible);
  s.kv("plan_note", rep.plan_note.empty() ? "none" : rep.plan_note);
  s.kv("notes", join_notes(rep.notes));

  Expectations ex;
  // slln.expect = decay asks the normalized tail sup to meet the halving
  // target; flat declares a negative control and asks it not to.
  const std::string expect = cfg_string(c, "slln.expect", "decay");
  if (expect == "decay") {
    ex.check(s, "expectation_decay", rep.tail.passes);
  } else if (expect == "flat") {
    ex.check(s, "expectation_flat", !rep.tail.passes);
  } else if (expect != "none") {
    throw std::runtime_error("config key 'slln.expect': expected decay, flat, or none, got '" + expect + "'");
  }
  if (rep.control_tail && c.has("slln.control_expect")) {
    const std::string cexpect = cfg_string(c, "slln.control_expect", "flat");
    if (cexpect == "decay") {
      ex.check(s, "expectation_control_decay", rep.control_tail->passes);
    } else if (cexpect == "flat") {
      ex.check(s, "expectation_control_flat", !rep.control_tail->passes);
    } else {
      throw std::runtime_error("config key 'slln.control_expect': expected decay or flat, got '" + cexpect +
                               "'");
    }
  }

  finish_run(run, s);
  return ex.exit_code;
}

// --- toeplitz -------------------------------------------------------------------

int cmd_toeplitz(const CommonOpts& o) {
  Run run = start_run(o, "toeplitz");
  Config& c = run.cfg;

  const int d = static_cast<int>(cfg_int(c, "toeplitz.d", 1));
  const auto phis = load_phis(c, "toeplitz.phi", d, "power 1");
  const std::int64_t a = cfg_int(c, "toeplitz.a", 2);
  const int n_max = static_cast<int>(cfg_int(c, "toeplitz.n_max", 10));
  const ToeplitzWeights w(phis, a);

  // Diagonal scales n = (k, ..., k) plus the telescoped closed form; the gap
  // column is the defect against that closed form.
  std::vector<std::string> header;
  for (int j = 0; j < d; ++j) header.push_back("n" + fmt_int(j));
  header.insert(header.end(), {"row_sum", "closed_form", "gap"});
  CsvWriter csv(header);
  double max_row_sum = 0.0;
  double max_gap = 0.0;
  for (int k = 0; k <= n_max; ++k) {
    const MultiIndex n(static_cast<std::size_t>(d), k);
    const double rs = w.row_sum(n);
    double closed = 1.0;
    for (int j = 0; j < d; ++j) {
      closed *= 1.0 - phis[static_cast<std::size_t>(j)](1.0) / w.phi_at_power(j, k + 1);
    }
    std::vector<std::string> row;
    for (int j = 0; j < d; ++j) row.push_back(cell(static_cast<std::int64_t>(k)));
    row.insert(row.end(), {cell(rs), cell(closed), cell(rs - closed)});
    csv.row(row);
    max_row_sum = std::max(max_row_sum, rs);
    max_gap = std::max(max_gap, std::abs(rs - closed));
  }
  csv.write(run.path("rows.csv"));

  SummaryWriter s;
  s.kv("subcommand", "toeplitz");
  s.kv("a", a);
  s.kv("d", static_cast<std::int64_t>(d));
  s.kv("max_row_sum", max_row_sum);
  s.kv("max_closed_form_gap", max_gap);

  const std::string transform = cfg_string(c, "toeplitz.transform", "none");
  if (transform == "decay") {
    // The source lives on the exponent grid, so decay is per doubling.
    const double decay = cfg_double(c, "toeplitz.decay", 0.25);
    const auto grid = cfg_ints(c, "toeplitz.grid", MultiIndex(static_cast<std::size_t>(d), 64));
    if (grid.size() != static_cast<std::size_t>(d)) {
      throw std::runtime_error("config key 'toeplitz.grid': need one entry per axis");
    }
    auto source = [decay](const MultiIndex& k) {
      double v = 1.0;
      for (auto x : k) v *= std::pow(decay, static_cast<double>(x));
      return v;
    };
    const auto res = toeplitz_transform(w, source, grid);
    CsvWriter tails({"threshold", "tail_sup"});
    bool strict = true;
    for (std::size_t i = 0; i < res.tail_levels.size(); ++i) {
      tails.row({cell(res.tail_levels[i]), cell(res.tail_sup[i])});
      // The doubling chain is 1, 2, 4, ...; threshold 0 is not part of it.
      if (i >= 2 && res.tail_sup[i] >= res.tail_sup[i - 1]) strict = false;
    }
    tails.write(run.path("tails.csv"));
    s.kv("transform", "decay");
    s.kv("tail_sup_final", res.tail_sup.empty() ? 0.0 : res.tail_sup.back());
    s.kv("tail_sup_decreasing_per_doubling", strict);
  } else if (transform != "none") {
    throw std::runtime_error("config key 'toeplitz.transform': expected none or decay, got '" + transform +
                             "'");
  }

  Expectations ex;
  if (cfg_bool(c, "toeplitz.expect_row_sums_le_one", true)) {
    ex.check(s, "expectation_row_sums", max_row_sum <= 1.0 + 1e-12);
  }

  finish_run(run, s);
  return ex.exit_code;
}

// --- paper-suite ----------------------------------------------------------------

int cmd_paper_suite(const CommonOpts& o, bool list_only) {
  if (list_only) {
    for (const auto& info : criterion_catalog()) {
      std::printf("%2d  %-22s  %s\n", info.id, info.name, info.blurb);
    }
    return kExitOk;
  }

  // Default thread budget 8: the determinism criterion reruns the stochastic
  // criteria under budget 1 and compares bytes, so 8 gives it a real contrast.
  Run run = start_run(o, "paper-suite", 1729, 8);
  SuiteTunables t = SuiteTunables::from_config(run.cfg);
  t.echo(run.cfg);

  const auto results = run_acceptance(t, run.seed, 1, run.threads);

  SummaryWriter s;
  s.kv("subcommand", "paper-suite");
  s.kv("seed", run.seed);
  CsvWriter csv({"id", "name", "passed", "detail"});
  int passed = 0;
  for (const auto& r : results) {
    std::printf("%s\n", criterion_line(r).c_str());
    csv.row({cell(static_cast<std::int64_t>(r.id)), cell(r.name), cell(r.passed), cell(r.detail)});
    s.kv("criterion_" + fmt_int(r.id), (r.passed ? std::string("pass ") : std::string("FAIL ")) + r.name);
    if (r.passed) ++passed;
  }
  csv.write(run.path("suite.csv"));
  s.kv("criteria_passed", static_cast<std::int64_t>(passed));
  s.kv("criteria_total", static_cast<std::int64_t>(results.size()));
  const bool all = passed == static_cast<int>(results.size());
  s.kv("all_passed", all);
  finish_run(run, s);
  return all ? kExitOk : kExitExpectation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lattice strong-law simulation and verification toolkit"};
  app.require_subcommand(1);

  CommonOpts sim_o, est_o, chk_o, sll_o, top_o, pap_o;
  CLI::App* sim = app.add_subcommand("simulate", "generate one field realization and write it out");
  attach_common(sim, sim_o);
  CLI::App* est = app.add_subcommand("estimate-moments", "scalar, block, and sup moment estimates");
  attach_common(est, est_o);
  CLI::App* chk = app.add_subcommand("check-conditions", "moment-series and corollary condition checks");
  attach_common(chk, chk_o);
  CLI::App* sll = app.add_subcommand("slln", "normalized tail-sup decay harness");
  attach_common(sll, sll_o);
  CLI::App* top = app.add_subcommand("toeplitz", "weight row sums and weighted-transform tails");
  attach_common(top, top_o);
  CLI::App* pap = app.add_subcommand("paper-suite", "run the acceptance criteria bundle");
  attach_common(pap, pap_o);
  bool list_only = false;
  pap->add_flag("--list", list_only, "print the criteria without running them");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sim_o);
    if (est->parsed()) return cmd_estimate_moments(est_o);
    if (chk->parsed()) return cmd_check_conditions(chk_o);
    if (sll->parsed()) return cmd_slln(sll_o);
    if (top->parsed()) return cmd_toeplitz(top_o);
    if (pap->parsed()) return cmd_paper_suite(pap_o, list_only);
  } catch (const ResourceError& e) {
    std::fprintf(stderr, "sllnlab: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::bad_alloc&) {
    std::fprintf(stderr, "sllnlab: out of memory\n");
    return kExitNumerical;
  } catch (const std::logic_error& e) {
    // Library guards (domain/invariant violations) surface as logic errors.
    std::fprintf(stderr, "sllnlab: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr, "sllnlab: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
