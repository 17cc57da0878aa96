#pragma once

// Desk-scale acceptance sweep behind the `sllnlab paper-suite` subcommand and
// the test harness.  Each criterion is a self-contained quantitative check
// that returns a pass flag plus a one-line diagnostic.  Diagnostics carry
// numbers only, never timings or thread counts, so a rerun under a different
// thread budget must reproduce them byte for byte; the final criterion turns
// that into a test.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "slln/common.hpp"
#include "slln/config.hpp"
#include "slln/lattice_field.hpp"
#include "slln/lfss.hpp"
#include "slln/models.hpp"
#include "slln/moments.hpp"
#include "slln/multi_index.hpp"
#include "slln/prefix_sum.hpp"
#include "slln/rng.hpp"
#include "slln/scaling.hpp"
#include "slln/slln.hpp"
#include "slln/stable.hpp"
#include "slln/toeplitz.hpp"

namespace slln {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;  // space-separated key=value pairs, byte-stable per seed
};

// Tolerances and sampling budgets.  Every field maps to a [suite] config key,
// so a run can tighten one criterion or deliberately break it to confirm the
// failure path reports.
struct SuiteTunables {
  double ecf_tol = 0.02;
  std::int64_t ecf_draws = 100000;
  double var_tol = 0.03;
  double oracle_rel_tol = 1e-12;
  std::int64_t toeplitz_configs = 200;
  double toeplitz_tol = 1e-12;
  std::int64_t law_replicates = 10000;
  double law_ratio_rel_tol = 0.10;
  double law_slope_tol = 0.05;
  std::int64_t scaling_replicates = 100000;
  std::int64_t dichotomy_replicates = 10000;
  std::int64_t slln_replicates = 32;
  double slln_halving = 0.5;
  std::int64_t recursion_replicates = 4000;
  double klesov_tol = 1e-4;

  static SuiteTunables from_config(const Config& c) {
    SuiteTunables t;
    t.ecf_tol = c.get_double("suite.ecf_tol", t.ecf_tol);
    t.ecf_draws = c.get_int("suite.ecf_draws", t.ecf_draws);
    t.var_tol = c.get_double("suite.var_tol", t.var_tol);
    t.oracle_rel_tol = c.get_double("suite.oracle_rel_tol", t.oracle_rel_tol);
    t.toeplitz_configs = c.get_int("suite.toeplitz_configs", t.toeplitz_configs);
    t.toeplitz_tol = c.get_double("suite.toeplitz_tol", t.toeplitz_tol);
    t.law_replicates = c.get_int("suite.law_replicates", t.law_replicates);
    t.law_ratio_rel_tol = c.get_double("suite.law_ratio_rel_tol", t.law_ratio_rel_tol);
    t.law_slope_tol = c.get_double("suite.law_slope_tol", t.law_slope_tol);
    t.scaling_replicates = c.get_int("suite.scaling_replicates", t.scaling_replicates);
    t.dichotomy_replicates = c.get_int("suite.dichotomy_replicates", t.dichotomy_replicates);
    t.slln_replicates = c.get_int("suite.slln_replicates", t.slln_replicates);
    t.slln_halving = c.get_double("suite.slln_halving", t.slln_halving);
    t.recursion_replicates = c.get_int("suite.recursion_replicates", t.recursion_replicates);
    t.klesov_tol = c.get_double("suite.klesov_tol", t.klesov_tol);
    return t;
  }

  void echo(Config& c) const {
    c.set("suite.ecf_tol", fmt_double(ecf_tol));
    c.set("suite.ecf_draws", fmt_int(ecf_draws));
    c.set("suite.var_tol", fmt_double(var_tol));
    c.set("suite.oracle_rel_tol", fmt_double(oracle_rel_tol));
    c.set("suite.toeplitz_configs", fmt_int(toeplitz_configs));
    c.set("suite.toeplitz_tol", fmt_double(toeplitz_tol));
    c.set("suite.law_replicates", fmt_int(law_replicates));
    c.set("suite.law_ratio_rel_tol", fmt_double(law_ratio_rel_tol));
    c.set("suite.law_slope_tol", fmt_double(law_slope_tol));
    c.set("suite.scaling_replicates", fmt_int(scaling_replicates));
    c.set("suite.dichotomy_replicates", fmt_int(dichotomy_replicates));
    c.set("suite.slln_replicates", fmt_int(slln_replicates));
    c.set("suite.slln_halving", fmt_double(slln_halving));
    c.set("suite.recursion_replicates", fmt_int(recursion_replicates));
    c.set("suite.klesov_tol", fmt_double(klesov_tol));
  }
};

struct CriterionInfo {
  int id;
  const char* name;
  const char* blurb;
};

inline const std::array<CriterionInfo, 11>& criterion_catalog() {
  static const std::array<CriterionInfo, 11> cat = {{
      {1, "sampler-law", "stable sampler empirical characteristic function plus the Gaussian variance reduction"},
      {2, "sum-oracles", "rectangular, spherical, maximal, and running-max sums against exhaustive enumeration"},
      {3, "recursion-constants", "closed-form recursion constants, the base selector, and c < 1 across an admissible scan"},
      {4, "toeplitz-weights", "weight row sums, the telescoping identity, and tail decay of the weighted transform"},
      {5, "moment-law", "dyadic moment growth of aggregated heavy-tailed increments against the scaling target"},
      {6, "operator-scaling", "quantile match of rescaled partial sums at the scaling exponent, with a shifted-exponent control"},
      {7, "condition-dichotomy", "summability verdict flips between log-boosted and plain power normalizers on one generator"},
      {8, "slln-decay", "normalized tail suprema halve between dyadic shells, with an under-normalized control"},
      {9, "recursion-inequalities", "estimated levels respect the c F + D drive bound within two standard errors"},
      {10, "corollary-checkers", "quasi-stationary constants, the unit-variance lattice series, and the square-root normalizer flag"},
      {11, "thread-determinism", "stochastic criteria reproduce byte-identical diagnostics across thread budgets"},
  }};
  return cat;
}

namespace detail {

class DetailLine {
 public:
  DetailLine& add(const std::string& key, const std::string& value) {
    if (!text_.empty()) text_ += " ";
    text_ += key + "=" + value;
    return *this;
  }
  DetailLine& add(const std::string& key, double value) { return add(key, fmt_double(value)); }
  DetailLine& add(const std::string& key, std::int64_t value) { return add(key, fmt_int(value)); }
  DetailLine& add(const std::string& key, int value) { return add(key, static_cast<std::int64_t>(value)); }
  DetailLine& add(const std::string& key, bool value) { return add(key, std::string(value ? "yes" : "no")); }
  const std::string& str() const { return text_; }

 private:
  std::string text_;
};

// Odometer over the inclusive box [lo, hi]; the callback sees each point once.
template <typename Fn>
inline void acceptance_box(const MultiIndex& lo, const MultiIndex& hi, Fn&& fn) {
  const std::size_t d = lo.size();
  for (std::size_t j = 0; j < d; ++j) {
    if (hi[j] < lo[j]) return;
  }
  MultiIndex p = lo;
  while (true) {
    fn(p);
    std::size_t j = 0;
    while (j < d) {
      if (++p[j] <= hi[j]) break;
      p[j] = lo[j];
      ++j;
    }
    if (j == d) return;
  }
}

inline double oracle_rect(const LatticeField& f, const MultiIndex& m, const MultiIndex& n) {
  const std::size_t d = m.size();
  MultiIndex lo(d), hi(d);
  for (std::size_t j = 0; j < d; ++j) {
    lo[j] = m[j] + 1;
    hi[j] = m[j] + n[j];
  }
  double s = 0.0;
  acceptance_box(lo, hi, [&](const MultiIndex& p) { s += f.at(p); });
  return s;
}

inline double oracle_maximal(const LatticeField& f, const MultiIndex& m, const MultiIndex& n, int s) {
  if (s == 0) return std::abs(oracle_rect(f, m, n));
  const auto us = static_cast<std::size_t>(s);
  MultiIndex lo(us, 1);
  MultiIndex hi(n.begin(), n.begin() + s);
  double best = 0.0;
  acceptance_box(lo, hi, [&](const MultiIndex& k) {
    MultiIndex nn = n;
    for (std::size_t j = 0; j < us; ++j) nn[j] = k[j];
    best = std::max(best, std::abs(oracle_rect(f, m, nn)));
  });
  return best;
}

// Sum over the annulus Q_{m+k} \ Q_m straight from its definition: balls
// live in the nonnegative orthant and carry a strict lower radius, so the
// origin is excluded whenever m = 0.
inline double oracle_annulus(const LatticeField& f, std::int64_t m, std::int64_t k, Norm norm) {
  const auto d = static_cast<std::size_t>(f.d());
  MultiIndex lo(d, 0), hi(d, m + k);
  double s = 0.0;
  acceptance_box(lo, hi, [&](const MultiIndex& p) {
    bool in_outer = false, in_inner = false;
    if (norm == Norm::Linf) {
      const std::int64_t v = linf_norm(p);
      in_outer = v <= m + k;
      in_inner = v <= m;
    } else {
      const std::int64_t v = l2_norm_sq(p);
      in_outer = v <= (m + k) * (m + k);
      in_inner = v <= m * m;
    }
    if (in_outer && !in_inner) s += f.at(p);
  });
  return s;
}

}  // namespace detail

// --- 1: sampler law ---------------------------------------------------------
//
// The empirical characteristic function of the stable sampler against
// exp(-|theta|^alpha) on an alpha x theta grid, plus the alpha = 2 variance,
// which must land on 2 sigma^2.  Draws are split into fixed chunks with one
// stream per chunk and reduced in chunk order, so the result is independent
// of the thread budget.
inline CriterionResult criterion_sampler_law(const SuiteTunables& t, std::uint64_t seed, int threads) {
  const std::vector<double> alphas = {0.8, 1.0, 1.5, 2.0};
  const std::vector<double> thetas = {0.25, 0.5, 1.0, 2.0};
  const std::int64_t chunks = 100;
  double max_err = 0.0;
  double worst_alpha = alphas[0], worst_theta = thetas[0];
  double var2 = 0.0;
  for (double alpha : alphas) {
    const StableParams sp{alpha, 1.0};
    std::vector<std::vector<double>> cos_sums(static_cast<std::size_t>(chunks),
                                              std::vector<double>(thetas.size(), 0.0));
    std::vector<double> sq_sums(static_cast<std::size_t>(chunks), 0.0);
    parallel_for(chunks, threads, [&](std::int64_t c) {
      const std::int64_t base = t.ecf_draws / chunks;
      const std::int64_t extra = t.ecf_draws % chunks;
      const std::int64_t count = base + (c < extra ? 1 : 0);
      Rng rng(seed, "acceptance/sampler/alpha-" + fmt_double(alpha) + "/chunk-" + fmt_int(c));
      std::vector<NeumaierSum> sc(thetas.size());
      NeumaierSum s2;
      for (std::int64_t i = 0; i < count; ++i) {
        const double x = sample_sas(sp, rng);
        for (std::size_t q = 0; q < thetas.size(); ++q) sc[q].add(std::cos(thetas[q] * x));
        s2.add(x * x);
      }
      const auto uc = static_cast<std::size_t>(c);
      for (std::size_t q = 0; q < thetas.size(); ++q) cos_sums[uc][q] = sc[q].value();
      sq_sums[uc] = s2.value();
    });
    const double total = static_cast<double>(t.ecf_draws);
    for (std::size_t q = 0; q < thetas.size(); ++q) {
      NeumaierSum acc;
      for (std::int64_t c = 0; c < chunks; ++c) acc.add(cos_sums[static_cast<std::size_t>(c)][q]);
      const double ecf = acc.value() / total;
      const double target = std::exp(-std::pow(thetas[q], alpha));
      const double err = std::abs(ecf - target);
      if (err > max_err) {
        max_err = err;
        worst_alpha = alpha;
        worst_theta = thetas[q];
      }
    }
    if (alpha == 2.0) {
      NeumaierSum acc;
      for (std::int64_t c = 0; c < chunks; ++c) acc.add(sq_sums[static_cast<std::size_t>(c)]);
      var2 = acc.value() / total;
    }
  }
  const bool ecf_ok = max_err < t.ecf_tol;
  const bool var_ok = std::abs(var2 - 2.0) <= t.var_tol * 2.0;
  CriterionResult r{1, "sampler-law", ecf_ok && var_ok, ""};
  r.detail = detail::DetailLine()
                 .add("max_ecf_err", max_err)
                 .add("worst_alpha", worst_alpha)
                 .add("worst_theta", worst_theta)
                 .add("alpha2_var", var2)
                 .add("var_target", 2.0)
                 .add("draws", t.ecf_draws)
                 .str();
  return r;
}

// --- 2: sum oracles ----------------------------------------------------------
//
// Every fast sum against a raw loop over its definition: exhaustively over
// boxes up to 6^d, d <= 3, all anchors, sides, and sweep counts, plus all
// spherical radii a [0, 4]^d field allows in both norms.  One field carries
// small integers (comparison is exact equality); the other carries Gaussian
// draws (relative tolerance).
inline CriterionResult criterion_sum_oracles(const SuiteTunables& t, std::uint64_t seed) {
  std::int64_t cases = 0, mismatches = 0;
  double max_rel_err = 0.0;
  auto compare = [&](double fast, double oracle, bool exact) {
    ++cases;
    if (exact) {
      if (fast != oracle) ++mismatches;
      return;
    }
    const double rel = std::abs(fast - oracle) / std::max(1.0, std::abs(oracle));
    max_rel_err = std::max(max_rel_err, rel);
    if (rel > t.oracle_rel_tol) ++mismatches;
  };

  for (int d = 1; d <= 3; ++d) {
    const auto ud = static_cast<std::size_t>(d);
    for (int pass = 0; pass < 2; ++pass) {
      const bool exact = pass == 0;

      LatticeField rect_field(MultiIndex(ud, 6), MultiIndex(ud, 1), GeneratorId::Custom, seed);
      if (exact) {
        for (std::int64_t i = 0; i < rect_field.size(); ++i) {
          rect_field.values()[static_cast<std::size_t>(i)] = static_cast<double>((7 * i + 3) % 11 - 5);
        }
      } else {
        Rng rng(seed, "acceptance/oracles/rect-d" + fmt_int(d));
        for (auto& v : rect_field.values()) v = rng.normal();
      }
      PrefixSumTable table(rect_field);
      detail::acceptance_box(MultiIndex(ud, 0), MultiIndex(ud, 5), [&](const MultiIndex& m) {
        MultiIndex hi(ud);
        for (std::size_t j = 0; j < ud; ++j) hi[j] = 6 - m[j];
        detail::acceptance_box(MultiIndex(ud, 1), hi, [&](const MultiIndex& n) {
          compare(rect_partial_sum(table, m, n), detail::oracle_rect(rect_field, m, n), exact);
          for (int s = 0; s <= d; ++s) {
            compare(maximal_sum(table, m, n, s), detail::oracle_maximal(rect_field, m, n, s), exact);
          }
        });
      });

      LatticeField ball_field(MultiIndex(ud, 5), MultiIndex(ud, 0), GeneratorId::Custom, seed);
      if (exact) {
        for (std::int64_t i = 0; i < ball_field.size(); ++i) {
          ball_field.values()[static_cast<std::size_t>(i)] = static_cast<double>((7 * i + 3) % 11 - 5);
        }
      } else {
        Rng rng(seed, "acceptance/oracles/ball-d" + fmt_int(d));
        for (auto& v : ball_field.values()) v = rng.normal();
      }
      for (Norm norm : {Norm::L2, Norm::Linf}) {
        for (std::int64_t m = 0; m <= 2; ++m) {
          for (std::int64_t n = 1; n + m <= 4; ++n) {
            NeumaierSum full;
            for (std::int64_t k = 1; k <= n; ++k) full.add(detail::oracle_annulus(ball_field, m + k - 1, 1, norm));
            compare(spherical_partial_sum(ball_field, m, n, norm), full.value(), exact);
            const RunningMaxResult run = spherical_running_max(ball_field, m, n, norm);
            double best = 0.0;
            NeumaierSum acc;
            for (std::int64_t k = 1; k <= n; ++k) {
              acc.add(detail::oracle_annulus(ball_field, m + k - 1, 1, norm));
              const auto uk = static_cast<std::size_t>(k - 1);
              compare(run.partial[uk], acc.value(), exact);
              best = std::max(best, std::abs(acc.value()));
              compare(run.running_max[uk], best, exact);
            }
          }
        }
      }
    }
  }

  CriterionResult r{2, "sum-oracles", mismatches == 0, ""};
  r.detail = detail::DetailLine()
                 .add("cases", cases)
                 .add("mismatches", mismatches)
                 .add("max_rel_err", max_rel_err)
                 .str();
  return r;
}

// --- 3: recursion constants ---------------------------------------------------
//
// Closed-form spot values, the exhaustive base selector, and a scan asserting
// c < 1 wherever selection succeeds.  The scan keeps p >= 1: there the strict
// selection inequality forces c < 1, while for p < 1 the contraction is
// carried by the companion constant k and c itself can exceed one.
inline CriterionResult criterion_recursion_constants(const SuiteTunables&) {
  const double d22 = recursion_constants(2, 2.0, 2.0).D;
  const double d31 = recursion_constants(3, 1.0, 3.5).D;
  const bool spot_ok = d22 == 4.0 && d31 == 4.0;

  const BaseSelection sel = select_base(std::pow(2.0, 1.5), 2.0);
  const bool select_ok = sel.a.has_value() && *sel.a == 8;

  std::int64_t successes = 0;
  bool all_c_below_one = true;
  double worst_c = 0.0;
  const std::vector<double> ps = {1.0, 1.25, 1.5, 2.0, 2.5, 3.0};
  for (double p : ps) {
    for (int i = 21; i <= 120; ++i) {
      const double c_low = static_cast<double>(i) * 0.05;
      const BaseSelection cand = select_base(c_low, p);
      if (!cand.a.has_value()) continue;
      ++successes;
      try {
        const RecursionConstants rc = recursion_constants(*cand.a, p, c_low);
        worst_c = std::max(worst_c, rc.c);
        if (!(rc.c < 1.0)) all_c_below_one = false;
      } catch (const std::domain_error&) {
        all_c_below_one = false;
      }
    }
  }

  CriterionResult r{3, "recursion-constants", spot_ok && select_ok && successes > 0 && all_c_below_one, ""};
  r.detail = detail::DetailLine()
                 .add("D_2_2", d22)
                 .add("D_3_1", d31)
                 .add("selected_base", sel.a.has_value() ? fmt_int(*sel.a) : std::string("none"))
                 .add("scan_successes", successes)
                 .add("worst_c", worst_c)
                 .str();
  return r;
}

// --- 4: Toeplitz weights -------------------------------------------------------
//
// Random configurations check the row-sum bound and the telescoped closed
// form; the d = 1 identity row sums match 1 - 2^{-n-1}; the weighted
// transform of a geometrically decaying input has strictly shrinking tail
// sups across each doubling of the grid threshold.
inline CriterionResult criterion_toeplitz_weights(const SuiteTunables& t, std::uint64_t seed) {
  Rng rng(seed, "acceptance/toeplitz");
  std::int64_t violations = 0;
  double max_gap = 0.0;
  for (std::int64_t i = 0; i < t.toeplitz_configs; ++i) {
    const int d = 1 + std::min<int>(2, static_cast<int>(rng.uniform01() * 3.0));
    const std::int64_t a = 2 + std::min<std::int64_t>(2, static_cast<std::int64_t>(rng.uniform01() * 3.0));
    std::vector<ScalingFunction> phis;
    MultiIndex n(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
      phis.push_back(ScalingFunction::power(0.3 + 2.2 * rng.uniform01()));
      n[static_cast<std::size_t>(j)] = std::min<std::int64_t>(6, static_cast<std::int64_t>(rng.uniform01() * 7.0));
    }
    const ToeplitzWeights w(phis, a);
    const double row = w.row_sum(n);
    double closed = 1.0;
    for (int j = 0; j < d; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      closed *= 1.0 - phis[uj](1.0) / phis[uj](std::pow(static_cast<double>(a),
                                                        static_cast<double>(n[uj] + 1)));
    }
    if (row > 1.0 + t.toeplitz_tol) ++violations;
    const double gap = std::abs(row - closed) / std::max(1.0, std::abs(closed));
    max_gap = std::max(max_gap, gap);
    if (gap > t.toeplitz_tol) ++violations;
  }

  const ToeplitzWeights identity({ScalingFunction::power(1.0)}, 2);
  double max_closed_err = 0.0;
  for (std::int64_t n1 = 0; n1 <= 12; ++n1) {
    const double row = identity.row_sum({n1});
    const double closed = 1.0 - std::pow(2.0, -static_cast<double>(n1 + 1));
    max_closed_err = std::max(max_closed_err, std::abs(row - closed));
  }
  const bool closed_ok = max_closed_err <= t.toeplitz_tol;

  const ToeplitzTransformResult tr = toeplitz_transform(
      identity, [](const MultiIndex& k) { return std::pow(0.25, static_cast<double>(k[0])); }, {64});
  bool strictly_decaying = tr.tail_sup.size() >= 2;
  for (std::size_t i = 1; i < tr.tail_sup.size(); ++i) {
    if (!(tr.tail_sup[i] < tr.tail_sup[i - 1])) strictly_decaying = false;
  }

  CriterionResult r{4, "toeplitz-weights", violations == 0 && closed_ok && strictly_decaying, ""};
  r.detail = detail::DetailLine()
                 .add("configs", t.toeplitz_configs)
                 .add("violations", violations)
                 .add("max_identity_gap", max_gap)
                 .add("max_closed_err", max_closed_err)
                 .add("tail_levels", static_cast<std::int64_t>(tr.tail_sup.size()))
                 .add("tail_first", tr.tail_sup.empty() ? 0.0 : tr.tail_sup.front())
                 .add("tail_last", tr.tail_sup.empty() ? 0.0 : tr.tail_sup.back())
                 .str();
  return r;
}

namespace detail {

// The kernel is long-memory (H > 1/alpha), so the window is the one knob
// that trades truncation bias against cost; callers pick it per criterion.
inline LfssConfig acceptance_lfss_config(std::int64_t trunc_window) {
  LfssConfig cfg;
  cfg.d = 1;
  cfg.alpha = 1.5;
  cfg.hurst = {0.8};
  cfg.grid_step = 0.25;
  cfg.trunc_window = trunc_window;
  cfg.trunc_delta = 0.05;
  return cfg;
}

}  // namespace detail

// --- 5: moment law -------------------------------------------------------------
//
// Aggregated heavy-tailed increments at dyadic block sizes 2^4..2^10: the
// consecutive-scale moment ratio must sit near 2^H and the log-linear slope
// near H log 2 (p = 1).  The window spans the largest block four times over;
// anything shorter leaves a visible downward bias on the slope.
inline CriterionResult criterion_moment_law(const SuiteTunables& t, std::uint64_t seed, int threads) {
  const LfssConfig cfg = detail::acceptance_lfss_config(1024);
  const MomentLawReport rep =
      lfss_moment_law(cfg, 2, 1.0, {4, 5, 6, 7, 8, 9, 10}, t.law_replicates, seed, "acceptance/moment-law", threads);
  const bool ratio_ok = std::abs(rep.ratio_geomean - rep.ratio_target) <= t.law_ratio_rel_tol * rep.ratio_target;
  const bool slope_ok = std::abs(rep.slope - rep.slope_target) <= t.law_slope_tol;
  CriterionResult r{5, "moment-law", ratio_ok && slope_ok, ""};
  r.detail = detail::DetailLine()
                 .add("ratio_geomean", rep.ratio_geomean)
                 .add("ratio_target", rep.ratio_target)
                 .add("slope", rep.slope)
                 .add("slope_target", rep.slope_target)
                 .add("replicates", rep.replicates)
                 .str();
  return r;
}

// --- 6: operator scaling ---------------------------------------------------------
//
// Doubling the summation length must match multiplying by 2^H in
// distribution: rank errors at five quantiles stay inside the Monte Carlo
// band.  The same draws rated at exponent H + 0.2 must leave the band.
inline CriterionResult criterion_operator_scaling(const SuiteTunables& t, std::uint64_t seed, int threads) {
  const AxisWeights w = make_axis_weights(0.8, 1.5, 0.25, 64, 1.0, 0.05);
  const std::vector<double> qs = {0.1, 0.25, 0.5, 0.75, 0.9};
  const OperatorScalingCheck good = check_operator_scaling_1d(w, 1.5, 16, 32, std::pow(2.0, 0.8),
                                                              t.scaling_replicates, qs, seed,
                                                              "acceptance/op-scaling", threads);
  const OperatorScalingCheck bad = check_operator_scaling_1d(w, 1.5, 16, 32, std::pow(2.0, 1.0),
                                                             t.scaling_replicates, qs, seed,
                                                             "acceptance/op-scaling", threads);
  auto max_err = [](const OperatorScalingCheck& c) {
    double m = 0.0;
    for (double e : c.rank_errors) m = std::max(m, e);
    return m;
  };
  CriterionResult r{6, "operator-scaling", good.pass && !bad.pass, ""};
  r.detail = detail::DetailLine()
                 .add("max_rank_err", max_err(good))
                 .add("control_max_rank_err", max_err(bad))
                 .add("band_mid", good.bands.size() > 2 ? good.bands[2] : 0.0)
                 .add("replicates", t.scaling_replicates)
                 .str();
  return r;
}

// --- 7: condition dichotomy -------------------------------------------------------
//
// One heavy-tailed increment generator, one seed, two normalizers: the
// power-times-log normalizer with exponent 1/alpha + 1/2 on the log makes
// the moment series converge, the bare power x^H leaves it flat.
inline CriterionResult criterion_condition_dichotomy(const SuiteTunables& t, std::uint64_t seed, int threads) {
  const LfssConfig cfg = detail::acceptance_lfss_config(256);
  const FieldGenerator gen = lfss_generator(cfg, seed);
  ConditionSeriesOptions opt;
  opt.replicates = t.dichotomy_replicates;
  opt.threads = threads;
  const double rho = 1.0 / cfg.alpha + 0.5;
  const MomentSeriesReport with_log =
      condition_series_rect(gen, {ScalingFunction::power_log(0.8, rho)}, {2}, 1.0, 8, opt);
  const MomentSeriesReport without_log =
      condition_series_rect(gen, {ScalingFunction::power(0.8)}, {2}, 1.0, 8, opt);
  const bool flips = with_log.assessment.verdict == SeriesVerdict::Converges &&
                     without_log.assessment.verdict != SeriesVerdict::Converges;
  CriterionResult r{7, "condition-dichotomy", flips, ""};
  r.detail = detail::DetailLine()
                 .add("with_log", to_string(with_log.assessment.verdict))
                 .add("with_log_tail_ratio", with_log.assessment.tail_ratio)
                 .add("without_log", to_string(without_log.assessment.verdict))
                 .add("without_log_tail_ratio", without_log.assessment.tail_ratio)
                 .add("replicates", t.dichotomy_replicates)
                 .str();
  return r;
}

// --- 8: strong-law decay ------------------------------------------------------------
//
// i.i.d. symmetric stable field on the plane, normalized per axis by
// x^{1/alpha} (1 + log x)^{1/alpha + 1/2}: the across-replicate median tail
// sup at shell 2^10 must sit at or below half its shell-2^4 value.  The
// square-root normalizer rates the same draws and must fail the same bar.
inline CriterionResult criterion_slln_decay(const SuiteTunables& t, std::uint64_t seed, int threads) {
  const double inv_alpha = 2.0 / 3.0;
  const double rho = inv_alpha + 0.5;
  const FieldGenerator gen = iid_stable_generator(2, 1.5, 1.0, seed);
  SllnOptions opt;
  opt.shell_cap = 10;
  opt.ref_shell = 4;
  opt.halving_target = t.slln_halving;
  opt.replicates = t.slln_replicates;
  opt.threads = threads;
  opt.control_phis = {ScalingFunction::power(0.5), ScalingFunction::power(0.5)};
  const SllnReport rep = run_slln(
      gen, {ScalingFunction::power_log(inv_alpha, rho), ScalingFunction::power_log(inv_alpha, rho)}, opt);
  const bool control_fails = rep.control_tail.has_value() && !rep.control_tail->passes;
  CriterionResult r{8, "slln-decay", rep.tail.passes && control_fails, ""};
  r.detail = detail::DetailLine()
                 .add("halving_ratio", rep.tail.halving_ratio)
                 .add("median_ref", rep.tail.median_ref)
                 .add("median_cap", rep.tail.median_cap)
                 .add("control_ratio", rep.control_tail.has_value() ? rep.control_tail->halving_ratio : 0.0)
                 .add("target", t.slln_halving)
                 .add("replicates", t.slln_replicates)
                 .str();
  return r;
}

// --- 9: recursion inequalities --------------------------------------------------------
//
// Spherical and rectangular recursion traces on i.i.d. symmetric stable
// draws: every level estimate must respect F(n+1) <= c F(n) + D drive within
// two standard errors, and the per-replicate max-minus-sum gaps must be
// nonnegative exactly.
inline CriterionResult criterion_recursion_inequalities(const SuiteTunables& t, std::uint64_t seed, int threads) {
  RecursionOptions opt;
  opt.replicates = t.recursion_replicates;
  opt.threads = threads;
  const RecursionTrace sph = recursion_trace_sphere(iid_stable_generator(2, 1.5, 1.0, seed),
                                                    ScalingFunction::power(1.1), 2, 1.0, 4, Norm::L2, opt);
  const RecursionTrace rect = recursion_trace_rect(iid_stable_generator(2, 1.5, 1.0, seed + 1), 2,
                                                   {ScalingFunction::power(1.1), ScalingFunction::power(1.1)},
                                                   2, 1.0, 4, opt);
  auto min_slack = [](const RecursionTrace& tr) {
    double m = 0.0;
    bool first = true;
    for (const auto& lv : tr.levels) {
      const double z = lv.slack_mean + 2.0 * lv.slack_se;
      if (first || z < m) m = z;
      first = false;
    }
    return m;
  };
  const bool sphere_ok = sph.all_within_tol && sph.per_replicate_gaps_nonneg && sph.f0_exact_zero;
  const bool rect_ok = rect.all_within_tol && rect.per_replicate_gaps_nonneg && rect.f0_exact_zero;
  CriterionResult r{9, "recursion-inequalities", sphere_ok && rect_ok, ""};
  r.detail = detail::DetailLine()
                 .add("sphere_ok", sphere_ok)
                 .add("sphere_min_slack", min_slack(sph))
                 .add("rect_ok", rect_ok)
                 .add("rect_min_slack", min_slack(rect))
                 .add("c", sph.c)
                 .add("D", sph.D)
                 .add("replicates", t.recursion_replicates)
                 .str();
  return r;
}

// --- 10: corollary checkers --------------------------------------------------------------
//
// Quasi-stationary constants at a = 2 and identity normalizers land on
// D = 4 and h(1,1) = 4 exactly; the unit-variance reciprocal-square series
// reproduces pi^2/6 after the analytic tail correction; the square-root
// normalizer fails the weaker quasi-orthogonal condition.
inline CriterionResult criterion_corollary_checkers(const SuiteTunables& t) {
  const QuasiStationaryReport qs = check_quasi_stationary_condition(
      [](std::int64_t i, std::int64_t j) { return std::pow(0.5, static_cast<double>(i + j)); },
      ScalingFunction::power(1.0), ScalingFunction::power(1.0), 2);
  const double h11 = qs.h(1, 1);
  const bool qs_ok = qs.D == 4.0 && h11 == 4.0 && qs.tails_converge && qs.chain_holds;

  const std::int64_t trunc = 10000;
  const OrthogonalConditionReport orth =
      check_orthogonal_conditions([](const MultiIndex&) { return 1.0; }, 1, trunc);
  const double tail_estimate = 1.0 / static_cast<double>(trunc);
  const double klesov_err =
      std::abs(orth.plain.partial_sum + tail_estimate - std::numbers::pi * std::numbers::pi / 6.0);
  const bool klesov_ok = klesov_err <= t.klesov_tol && orth.plain.assessment.verdict == SeriesVerdict::Converges;

  const QuasiOrthogonalReport mz = check_moricz_quasi_orthogonal(
      [](std::int64_t m, std::int64_t n) { return std::pow(0.5, static_cast<double>(m + n)); },
      {ScalingFunction::power(0.5), ScalingFunction::power(0.5)});
  const bool moricz_ok = mz.rho_assessment.verdict == SeriesVerdict::Converges && !mz.reciprocal_converges;

  CriterionResult r{10, "corollary-checkers", qs_ok && klesov_ok && moricz_ok, ""};
  r.detail = detail::DetailLine()
                 .add("D", qs.D)
                 .add("h11", h11)
                 .add("chain_holds", qs.chain_holds)
                 .add("klesov_err", klesov_err)
                 .add("rho_verdict", to_string(mz.rho_assessment.verdict))
                 .add("sqrt_normalizer_flagged", !mz.reciprocal_converges)
                 .str();
  return r;
}

namespace detail {

inline CriterionResult run_criterion(int id, const SuiteTunables& t, std::uint64_t seed, int threads) {
  switch (id) {
    case 1: return criterion_sampler_law(t, seed, threads);
    case 2: return criterion_sum_oracles(t, seed);
    case 3: return criterion_recursion_constants(t);
    case 4: return criterion_toeplitz_weights(t, seed);
    case 5: return criterion_moment_law(t, seed, threads);
    case 6: return criterion_operator_scaling(t, seed, threads);
    case 7: return criterion_condition_dichotomy(t, seed, threads);
    case 8: return criterion_slln_decay(t, seed, threads);
    case 9: return criterion_recursion_inequalities(t, seed, threads);
    case 10: return criterion_corollary_checkers(t);
  }
  throw std::invalid_argument("run_criterion: no criterion with id " + fmt_int(id));
}

}  // namespace detail

// Runs criteria 1-10 under `threads_primary`, then reruns every seeded one
// under `threads_check` and byte-compares the diagnostics; the comparison is
// criterion 11.  Criteria 3 and 10 are closed-form and carry no seed.
inline std::vector<CriterionResult> run_acceptance(const SuiteTunables& t, std::uint64_t seed,
                                                   int threads_primary, int threads_check) {
  std::vector<CriterionResult> out;
  out.reserve(11);
  for (int id = 1; id <= 10; ++id) out.push_back(detail::run_criterion(id, t, seed, threads_primary));

  const std::vector<int> seeded = {1, 2, 4, 5, 6, 7, 8, 9};
  bool all_match = true;
  detail::DetailLine line;
  for (int id : seeded) {
    const CriterionResult again = detail::run_criterion(id, t, seed, threads_check);
    const CriterionResult& first = out[static_cast<std::size_t>(id - 1)];
    const bool match = again.detail == first.detail && again.passed == first.passed;
    all_match = all_match && match;
    line.add("criterion_" + fmt_int(id), match ? std::string("match") : std::string("drift"));
  }
  line.add("budgets", fmt_int(threads_primary) + "/" + fmt_int(threads_check));
  out.push_back({11, "thread-determinism", all_match, line.str()});
  return out;
}

inline std::string criterion_line(const CriterionResult& r) {
  return std::string(r.passed ? "pass" : "FAIL") + "  criterion " + fmt_int(r.id) + "  " + r.name + "  " +
         r.detail;
}

}  // namespace slln
