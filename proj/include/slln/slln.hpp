#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "slln/common.hpp"
#include "slln/lattice_field.hpp"
#include "slln/lfss.hpp"
#include "slln/models.hpp"
#include "slln/moments.hpp"
#include "slln/multi_index.hpp"
#include "slln/prefix_sum.hpp"
#include "slln/rng.hpp"
#include "slln/scaling.hpp"

namespace slln {

namespace detail {

// Linear-interpolation quantile of an unsorted sample.
inline double quantile(std::vector<double> xs, double q) {
  if (xs.empty()) throw std::invalid_argument("quantile: empty sample");
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= xs.size()) return xs.back();
  const double t = pos - static_cast<double>(lo);
  return (1.0 - t) * xs[lo] + t * xs[lo + 1];
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Normalized tail suprema over dyadic shells.  For one replicate on the box
// [1, 2^cap]^d the scan records, shell by shell, the largest |S(0; n)| over
// the product normalizer, and suffix maxima turn that into
// T(k) = sup over |n|_inf >= 2^k (within the box).  T is nonincreasing in k
// by construction; a normalization strong enough for the strong law drives
// it toward zero, an under-normalization keeps it flat.

struct TailSupSeries {
  int shell_cap = 0;
  std::vector<std::vector<double>> per_replicate;  // [replicate][k]
  std::vector<double> median, p90;                 // across replicates, per shell
  bool nonincreasing = true;
  double median_ref = 0.0;
  double median_cap = 0.0;
  double halving_ratio = 0.0;  // median_cap / median_ref
  bool passes = false;
};

struct SllnOptions {
  int shell_cap = 10;   // box side 2^shell_cap per axis
  int ref_shell = 4;    // the decay check compares T(shell_cap) against T(ref_shell)
  double halving_target = 0.5;
  std::int64_t replicates = 32;
  int threads = 1;
  bool require_admissible = false;  // refuse normalizations whose base plan fails
  std::int64_t base = 2;            // block base the admissibility survey uses
  double survey_p = 1.0;            // moment order the survey uses
  double doubling_x_min = 1.0;
  double doubling_x_max = 1e6;
  std::vector<ScalingFunction> control_phis;  // optional second normalizer set,
                                              // rated on the same draws
};

struct SllnReport {
  TailSupSeries tail;
  std::optional<TailSupSeries> control_tail;
  std::vector<BasePlan> plans;
  bool plan_admissible = false;
  std::string plan_note;
  std::int64_t replicates = 0;
  std::uint64_t master_seed = 0;
  std::vector<std::string> notes;
};

namespace detail {

inline void finish_tail(TailSupSeries& tail, int ref_shell, double halving_target) {
  const auto nk = static_cast<std::size_t>(tail.shell_cap + 1);
  tail.median.assign(nk, 0.0);
  tail.p90.assign(nk, 0.0);
  std::vector<double> col(tail.per_replicate.size());
  for (std::size_t k = 0; k < nk; ++k) {
    for (std::size_t r = 0; r < tail.per_replicate.size(); ++r) col[r] = tail.per_replicate[r][k];
    tail.median[k] = quantile(col, 0.5);
    tail.p90[k] = quantile(col, 0.9);
  }
  tail.nonincreasing = true;
  for (const auto& row : tail.per_replicate) {
    for (std::size_t k = 1; k < row.size(); ++k) {
      if (row[k] > row[k - 1]) tail.nonincreasing = false;
    }
  }
  tail.median_ref = tail.median[static_cast<std::size_t>(ref_shell)];
  tail.median_cap = tail.median[nk - 1];
  if (tail.median_ref > 0.0) {
    tail.halving_ratio = tail.median_cap / tail.median_ref;
    tail.passes = tail.halving_ratio <= halving_target;
  } else {
    tail.halving_ratio = 0.0;
    tail.passes = true;  // the sup already vanished at the reference shell
  }
}

}  // namespace detail

inline SllnReport run_slln(const FieldGenerator& gen, const std::vector<ScalingFunction>& phis,
                           const SllnOptions& opt = {}) {
  const int d = gen.d;
  if (d < 1) throw std::invalid_argument("run_slln: generator dimension must be >= 1");
  if (static_cast<int>(phis.size()) != d) {
    throw std::invalid_argument("run_slln: need one normalizer per axis");
  }
  if (opt.shell_cap < 1 || opt.ref_shell < 0 || opt.ref_shell >= opt.shell_cap) {
    throw std::invalid_argument("run_slln: need 0 <= ref_shell < shell_cap");
  }
  if (opt.replicates < 1) throw std::invalid_argument("run_slln: need at least 1 replicate");
  if (!opt.control_phis.empty() && static_cast<int>(opt.control_phis.size()) != d) {
    throw std::invalid_argument("run_slln: control normalizer set must match the dimension");
  }
  const std::int64_t side = detail::ipow(2, opt.shell_cap);
  {
    double cells = 1.0;
    for (int j = 0; j < d; ++j) cells *= static_cast<double>(side);
    if (cells > 2e8) {
      throw std::invalid_argument("run_slln: 2^" + fmt_int(opt.shell_cap) + " per axis at d = " + fmt_int(d) +
                                  " is beyond the scan budget");
    }
  }

  SllnReport rep;
  rep.replicates = opt.replicates;
  rep.master_seed = gen.master_seed;

  const double x_max = std::max(opt.doubling_x_max, 2.0 * static_cast<double>(side));
  rep.plans = detail::axis_plans(phis, std::vector<std::int64_t>(static_cast<std::size_t>(d), opt.base),
                                 opt.survey_p, opt.doubling_x_min, x_max);
  detail::fill_plan_summary_plans(rep.plans, rep.plan_admissible, rep.plan_note);
  if (opt.require_admissible && !rep.plan_admissible) {
    throw std::domain_error("run_slln: normalization rejected: " + rep.plan_note);
  }

  // Per-axis normalizer tables over 1..side, and a log2 table for the shells.
  const auto uside = static_cast<std::size_t>(side);
  std::vector<std::vector<double>> phi_tbl(static_cast<std::size_t>(d), std::vector<double>(uside + 1, 1.0));
  std::vector<std::vector<double>> ctrl_tbl;
  for (int j = 0; j < d; ++j) {
    for (std::int64_t x = 1; x <= side; ++x) {
      phi_tbl[static_cast<std::size_t>(j)][static_cast<std::size_t>(x)] =
          phis[static_cast<std::size_t>(j)](static_cast<double>(x));
    }
  }
  if (!opt.control_phis.empty()) {
    ctrl_tbl.assign(static_cast<std::size_t>(d), std::vector<double>(uside + 1, 1.0));
    for (int j = 0; j < d; ++j) {
      for (std::int64_t x = 1; x <= side; ++x) {
        ctrl_tbl[static_cast<std::size_t>(j)][static_cast<std::size_t>(x)] =
            opt.control_phis[static_cast<std::size_t>(j)](static_cast<double>(x));
      }
    }
  }
  std::vector<int> lg_tbl(uside + 1, 0);
  for (std::int64_t x = 1; x <= side; ++x) lg_tbl[static_cast<std::size_t>(x)] = static_cast<int>(floor_log2(x));

  const auto nk = static_cast<std::size_t>(opt.shell_cap + 1);
  rep.tail.shell_cap = opt.shell_cap;
  rep.tail.per_replicate.assign(static_cast<std::size_t>(opt.replicates), std::vector<double>(nk, 0.0));
  if (!opt.control_phis.empty()) {
    rep.control_tail.emplace();
    rep.control_tail->shell_cap = opt.shell_cap;
    rep.control_tail->per_replicate.assign(static_cast<std::size_t>(opt.replicates),
                                           std::vector<double>(nk, 0.0));
  }

  const MultiIndex shape = constant_index(d, side);
  const MultiIndex origin = constant_index(d, 1);
  const MultiIndex zero = constant_index(d, 0);
  parallel_for(opt.replicates, opt.threads, [&](std::int64_t r) {
    LatticeField f = gen.make(shape, origin, r, 1);
    PrefixSumTable t(f);
    std::vector<double> shell_max(nk, 0.0), shell_max_ctrl(nk, 0.0);
    MultiIndex n = constant_index(d, 1);
    MultiIndex sz(static_cast<std::size_t>(d));
    while (true) {
      for (int j = 0; j < d; ++j) sz[static_cast<std::size_t>(j)] = n[static_cast<std::size_t>(j)];
      const double s = std::abs(rect_partial_sum(t, zero, sz));
      double dn = 1.0;
      std::int64_t linf = 0;
      for (int j = 0; j < d; ++j) {
        const auto u = static_cast<std::size_t>(j);
        dn *= phi_tbl[u][static_cast<std::size_t>(n[u])];
        linf = std::max(linf, n[u]);
      }
      const auto k = static_cast<std::size_t>(lg_tbl[static_cast<std::size_t>(linf)]);
      shell_max[k] = std::max(shell_max[k], s / dn);
      if (!ctrl_tbl.empty()) {
        double cn = 1.0;
        for (int j = 0; j < d; ++j) {
          cn *= ctrl_tbl[static_cast<std::size_t>(j)][static_cast<std::size_t>(n[static_cast<std::size_t>(j)])];
        }
        shell_max_ctrl[k] = std::max(shell_max_ctrl[k], s / cn);
      }
      int j = d - 1;
      while (j >= 0 && n[static_cast<std::size_t>(j)] == side) {
        n[static_cast<std::size_t>(j)] = 1;
        --j;
      }
      if (j < 0) break;
      ++n[static_cast<std::size_t>(j)];
    }
    auto& row = rep.tail.per_replicate[static_cast<std::size_t>(r)];
    double run = 0.0;
    for (std::size_t k = nk; k-- > 0;) {
      run = std::max(run, shell_max[k]);
      row[k] = run;
    }
    if (rep.control_tail) {
      auto& crow = rep.control_tail->per_replicate[static_cast<std::size_t>(r)];
      run = 0.0;
      for (std::size_t k = nk; k-- > 0;) {
        run = std::max(run, shell_max_ctrl[k]);
        crow[k] = run;
      }
    }
  });

  detail::finish_tail(rep.tail, opt.ref_shell, opt.halving_target);
  if (rep.control_tail) detail::finish_tail(*rep.control_tail, opt.ref_shell, opt.halving_target);
  if (rep.tail.median_ref == 0.0) {
    rep.notes.push_back("tail suprema vanish at the reference shell; the decay check is trivial");
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Block-maximum tail bound for the d = 1 moving-average field: E M(2^n)^gamma
// against c 2^{n gamma H}, with c fitted on the early blocks, plus the
// normalized block series whose summability the strong law needs.

struct BlockTailReport {
  double gamma = 0.0;
  double rho = 0.0;  // normalization exponent 1/alpha + epsilon
  std::vector<double> block_max_moment;  // E M(2^n)^gamma, n = 0..n_max
  std::vector<double> block_std_error;
  std::vector<double> fitted_bound;      // c_fit 2^{n gamma H}
  double c_fit = 0.0;
  double dominance_fraction = 0.0;       // later blocks at or under the fitted bound
  std::vector<double> normalized_terms;  // E M(2^n)^gamma / 2^{n gamma rho}
  SeriesAssessment normalized_series;
  std::int64_t replicates = 0;
  std::uint64_t master_seed = 0;
  std::vector<std::string> notes;
};

inline BlockTailReport run_lfss_block_tail(const LfssConfig& cfg, double gamma, double epsilon, int n_max,
                                           std::int64_t replicates, std::uint64_t master_seed,
                                           const std::string& stream = "block-tail", int threads = 1) {
  validate(cfg);
  require_block_regime(cfg);
  if (cfg.d != 1) throw std::invalid_argument("run_lfss_block_tail: implemented for d = 1");
  if (!(gamma > 0.0) || gamma >= cfg.alpha) {
    throw std::domain_error("run_lfss_block_tail: need 0 < gamma < alpha, got gamma = " + fmt_double(gamma) +
                            ", alpha = " + fmt_double(cfg.alpha));
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("run_lfss_block_tail: epsilon must be positive");
  const double rho = 1.0 / cfg.alpha + epsilon;
  if (!(gamma * rho > 1.0)) {
    throw std::domain_error("run_lfss_block_tail: gamma (1/alpha + epsilon) = " + fmt_double(gamma * rho) +
                            " must exceed 1 for the block series to close");
  }
  if (n_max < 2) throw std::invalid_argument("run_lfss_block_tail: need n_max >= 2");
  if (replicates < 2) throw std::invalid_argument("run_lfss_block_tail: need at least 2 replicates");

  BlockTailReport rep;
  rep.gamma = gamma;
  rep.rho = rho;
  rep.replicates = replicates;
  rep.master_seed = master_seed;
  const double H = cfg.hurst[0];
  if (2.0 * gamma >= cfg.alpha) {
    rep.notes.push_back("2 gamma >= alpha: standard errors are indicative only");
  }

  const std::int64_t len = detail::ipow(2, n_max);
  const auto nb = static_cast<std::size_t>(n_max + 1);
  std::vector<std::vector<double>> mx(nb, std::vector<double>(static_cast<std::size_t>(replicates)));
  parallel_for(replicates, threads, [&](std::int64_t r) {
    LatticeField f = simulate_increment_field(cfg, {len}, master_seed, replicate_stream(stream, r), 1);
    const auto& xi = f.values();
    const auto ur = static_cast<std::size_t>(r);
    NeumaierSum s;
    double run = 0.0;
    std::int64_t next = 1;
    std::size_t block = 0;
    for (std::int64_t k = 1; k <= len; ++k) {
      s.add(xi[static_cast<std::size_t>(k - 1)]);
      run = std::max(run, std::abs(s.value()));
      if (k == next) {
        mx[block][ur] = std::pow(run, gamma);
        ++block;
        next *= 2;
      }
    }
  });

  for (std::size_t n = 0; n < nb; ++n) {
    auto ms = detail::mean_and_se(mx[n]);
    rep.block_max_moment.push_back(ms.mean);
    rep.block_std_error.push_back(ms.se);
  }
  const int split = n_max / 2;
  for (int n = 0; n <= split; ++n) {
    const double growth = std::pow(2.0, static_cast<double>(n) * gamma * H);
    rep.c_fit = std::max(rep.c_fit, rep.block_max_moment[static_cast<std::size_t>(n)] / growth);
  }
  int later = 0, dominated = 0;
  for (int n = 0; n <= n_max; ++n) {
    const double growth = std::pow(2.0, static_cast<double>(n) * gamma * H);
    rep.fitted_bound.push_back(rep.c_fit * growth);
    if (n > split) {
      ++later;
      if (rep.block_max_moment[static_cast<std::size_t>(n)] <=
          rep.fitted_bound[static_cast<std::size_t>(n)] * (1.0 + 1e-12)) {
        ++dominated;
      }
    }
  }
  rep.dominance_fraction = later > 0 ? static_cast<double>(dominated) / static_cast<double>(later) : 1.0;
  for (int n = 0; n <= n_max; ++n) {
    rep.normalized_terms.push_back(rep.block_max_moment[static_cast<std::size_t>(n)] /
                                   std::pow(2.0, static_cast<double>(n) * gamma * rho));
  }
  rep.normalized_series = assess_series(rep.normalized_terms);
  return rep;
}

// ---------------------------------------------------------------------------
// Sup of the cumulative sheet over a refined lattice on [0, side]^d.  One
// simulation at the finest spacing serves every coarser refinement by
// subsampling, so the estimates are exactly nested: finer lattices can only
// raise the supremum.  Scaling the simulated integer-lattice sheet down to
// spacing 1/refine uses the per-axis dilation law, a factor
// refine^{-sum_j H_j} on values.

struct SupMomentEstimate {
  std::int64_t side = 0;
  int refine = 1;
  double gamma = 0.0;
  double value = 0.0;  // E sup^gamma over the refined lattice
  double std_error = 0.0;
  double c6 = 0.0;  // value / side^{gamma sum_j H_j}
};

inline std::vector<SupMomentEstimate> estimate_sup_increment_moments(
    const LfssConfig& cfg, double gamma, std::int64_t side, const std::vector<int>& refines,
    std::int64_t replicates, std::uint64_t master_seed, const std::string& stream = "sup-moment",
    int threads = 1) {
  validate(cfg);
  if (!(gamma > 0.0) || gamma >= cfg.alpha) {
    throw std::domain_error("estimate_sup_increment_moments: need 0 < gamma < alpha, got gamma = " +
                            fmt_double(gamma) + ", alpha = " + fmt_double(cfg.alpha));
  }
  if (side < 1) throw std::invalid_argument("estimate_sup_increment_moments: side must be >= 1");
  if (refines.empty()) throw std::invalid_argument("estimate_sup_increment_moments: need refinements");
  for (std::size_t i = 0; i < refines.size(); ++i) {
    if (refines[i] < 1 || (i > 0 && refines[i] <= refines[i - 1])) {
      throw std::invalid_argument("estimate_sup_increment_moments: refinements must be strictly increasing");
    }
    if (refines.back() % refines[i] != 0) {
      throw std::invalid_argument("estimate_sup_increment_moments: each refinement must divide the finest one");
    }
  }
  if (replicates < 2) throw std::invalid_argument("estimate_sup_increment_moments: need at least 2 replicates");
  const int rmax = refines.back();
  const std::int64_t cells = side * rmax;
  {
    double total = 1.0;
    for (int j = 0; j < cfg.d; ++j) total *= static_cast<double>(cells);
    if (total > 2e7) {
      throw std::invalid_argument("estimate_sup_increment_moments: refined box is beyond the scan budget");
    }
  }

  double hsum = 0.0;
  for (double h : cfg.hurst) hsum += h;
  const double prefactor = std::pow(static_cast<double>(rmax), -gamma * hsum);

  const auto reps = static_cast<std::size_t>(replicates);
  std::vector<std::vector<double>> sup_pow(refines.size(), std::vector<double>(reps));
  const MultiIndex shape = constant_index(cfg.d, cells);
  const MultiIndex origin = constant_index(cfg.d, 1);
  const MultiIndex zero = constant_index(cfg.d, 0);
  parallel_for(replicates, threads, [&](std::int64_t r) {
    LatticeField f = simulate_increment_field(cfg, shape, master_seed, replicate_stream(stream, r), 1);
    f.rebase(origin);
    PrefixSumTable t(f);
    const auto ur = static_cast<std::size_t>(r);
    for (std::size_t fi = 0; fi < refines.size(); ++fi) {
      const std::int64_t step = rmax / refines[fi];
      const std::int64_t pts = side * refines[fi];
      MultiIndex k = constant_index(cfg.d, 1);
      MultiIndex n(static_cast<std::size_t>(cfg.d));
      double best = 0.0;
      while (true) {
        for (int j = 0; j < cfg.d; ++j) {
          n[static_cast<std::size_t>(j)] = k[static_cast<std::size_t>(j)] * step;
        }
        best = std::max(best, std::abs(rect_partial_sum(t, zero, n)));
        int j = cfg.d - 1;
        while (j >= 0 && k[static_cast<std::size_t>(j)] == pts) {
          k[static_cast<std::size_t>(j)] = 1;
          --j;
        }
        if (j < 0) break;
        ++k[static_cast<std::size_t>(j)];
      }
      sup_pow[fi][ur] = std::pow(best, gamma) * prefactor;
    }
  });

  std::vector<SupMomentEstimate> out;
  for (std::size_t fi = 0; fi < refines.size(); ++fi) {
    SupMomentEstimate e;
    e.side = side;
    e.refine = refines[fi];
    e.gamma = gamma;
    auto ms = detail::mean_and_se(sup_pow[fi]);
    e.value = ms.mean;
    e.std_error = ms.se;
    e.c6 = ms.mean / std::pow(static_cast<double>(side), gamma * hsum);
    out.push_back(e);
  }
  return out;
}

inline SupMomentEstimate estimate_sup_increment_moment(const LfssConfig& cfg, double gamma, std::int64_t side,
                                                       int refine, std::int64_t replicates,
                                                       std::uint64_t master_seed,
                                                       const std::string& stream = "sup-moment",
                                                       int threads = 1) {
  return estimate_sup_increment_moments(cfg, gamma, side, {refine}, replicates, master_seed, stream,
                                        threads)[0];
}

}  // namespace slln
