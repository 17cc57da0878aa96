#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "slln/common.hpp"
#include "slln/lattice_field.hpp"
#include "slln/lfss.hpp"
#include "slln/models.hpp"
#include "slln/multi_index.hpp"
#include "slln/prefix_sum.hpp"
#include "slln/rng.hpp"
#include "slln/scaling.hpp"
#include "slln/stable.hpp"

namespace slln {

namespace detail {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

inline MeanSe mean_and_se(const std::vector<double>& xs) {
  MeanSe r;
  const auto n = static_cast<double>(xs.size());
  if (xs.empty()) return r;
  NeumaierSum s;
  for (double x : xs) s.add(x);
  r.mean = s.value() / n;
  if (xs.size() < 2) return r;
  NeumaierSum q;
  for (double x : xs) q.add((x - r.mean) * (x - r.mean));
  r.se = std::sqrt(std::max(0.0, q.value() / (n - 1.0)) / n);
  return r;
}

inline std::int64_t ipow(std::int64_t a, std::int64_t n) {
  if (a < 1 || n < 0) throw std::invalid_argument("ipow: need a >= 1 and n >= 0");
  std::int64_t v = 1;
  const std::int64_t cap = std::int64_t{1} << 60;
  for (std::int64_t i = 0; i < n; ++i) {
    if (v > cap / a) {
      throw std::overflow_error("ipow: " + fmt_int(a) + "^" + fmt_int(n) + " exceeds the index range");
    }
    v *= a;
  }
  return v;
}

// All exponent vectors in [0, n_max]^d, last coordinate fastest.
inline std::vector<MultiIndex> exponent_grid(int d, int n_max) {
  std::vector<MultiIndex> out;
  MultiIndex n(static_cast<std::size_t>(d), 0);
  while (true) {
    out.push_back(n);
    int j = d - 1;
    while (j >= 0 && n[static_cast<std::size_t>(j)] == n_max) {
      n[static_cast<std::size_t>(j)] = 0;
      --j;
    }
    if (j < 0) break;
    ++n[static_cast<std::size_t>(j)];
  }
  return out;
}

inline std::int64_t total_level(const MultiIndex& n) {
  std::int64_t t = 0;
  for (auto v : n) t += v;
  return t;
}

inline std::int64_t floor_log_base(std::int64_t a, std::int64_t x) {
  if (x < 1) throw std::invalid_argument("floor_log_base: x must be >= 1");
  std::int64_t k = 0, v = 1;
  while (v <= x / a) {
    v *= a;
    ++k;
  }
  return k;
}

}  // namespace detail

inline double generator_alpha(const FieldGenerator& gen) {
  if (gen.lfss) return gen.lfss->alpha;
  if (gen.model && gen.model->law == NoiseLaw::Stable && gen.model->kind == ModelKind::Iid) {
    return gen.model->alpha;
  }
  return 2.0;
}

// ---------------------------------------------------------------------------
// Absolute-moment estimation for scalar laws.

class ScalarSampler {
 public:
  enum class Kind { Gaussian, Stable, Constant };

  static ScalarSampler gaussian(double sigma) {
    if (!(sigma >= 0.0)) throw std::invalid_argument("ScalarSampler::gaussian: sigma must be >= 0");
    ScalarSampler s;
    s.kind_ = Kind::Gaussian;
    s.sigma_ = sigma;
    return s;
  }

  static ScalarSampler stable(double alpha, double sigma) {
    validate(StableParams{alpha, sigma});
    ScalarSampler s;
    s.kind_ = Kind::Stable;
    s.alpha_ = alpha;
    s.sigma_ = sigma;
    return s;
  }

  static ScalarSampler constant(double value) {
    ScalarSampler s;
    s.kind_ = Kind::Constant;
    s.value_ = value;
    return s;
  }

  Kind kind() const { return kind_; }
  double alpha() const { return alpha_; }
  double sigma() const { return sigma_; }

  double draw(Rng& rng) const {
    switch (kind_) {
      case Kind::Gaussian:
        return sigma_ * rng.normal();
      case Kind::Stable:
        return sample_sas(StableParams{alpha_, sigma_}, rng);
      case Kind::Constant:
        return value_;
    }
    return 0.0;
  }

 private:
  Kind kind_ = Kind::Gaussian;
  double alpha_ = 2.0;
  double sigma_ = 1.0;
  double value_ = 0.0;
};

struct MomentEstimate {
  double p = 1.0;
  double value = 0.0;
  double std_error = 0.0;
  std::int64_t replicates = 0;
  bool heavy_tail_unstable = false;  // 2p >= alpha: the sample variance of |X|^p has no mean
  std::uint64_t master_seed = 0;
  std::string stream;
};

inline MomentEstimate estimate_abs_moment(const ScalarSampler& sampler, double p, std::int64_t replicates,
                                          std::uint64_t master_seed, const std::string& stream = "abs-moment") {
  if (!(p > 0.0)) throw std::invalid_argument("estimate_abs_moment: p must be positive");
  if (replicates < 2) throw std::invalid_argument("estimate_abs_moment: need at least 2 replicates");
  MomentEstimate out;
  out.p = p;
  out.replicates = replicates;
  out.master_seed = master_seed;
  out.stream = stream;
  if (sampler.kind() == ScalarSampler::Kind::Stable && sampler.alpha() < 2.0) {
    if (p >= sampler.alpha()) {
      throw std::domain_error("estimate_abs_moment: E|X|^p is infinite for a stable law with p >= alpha "
                              "(heavy-tail range 1 < alpha < 2 needs p < alpha), got p = " +
                              fmt_double(p) + ", alpha = " + fmt_double(sampler.alpha()));
    }
    out.heavy_tail_unstable = 2.0 * p >= sampler.alpha();
  }
  Rng rng(master_seed, stream);
  std::vector<double> xs(static_cast<std::size_t>(replicates));
  for (auto& x : xs) x = std::pow(std::abs(sampler.draw(rng)), p);
  auto ms = detail::mean_and_se(xs);
  out.value = ms.mean;
  out.std_error = ms.se;
  return out;
}

// ---------------------------------------------------------------------------
// Series verdicts.  Empirical truncated series are judged by the geometric
// mean of consecutive level-sum ratios over the later half of the horizon.
// A flat tail that has not decayed reads as divergence: a summable series
// must eventually show ratios bounded away from one, while a ratio pinned
// near one with non-vanishing terms is the signature of log-like divergence.

enum class SeriesVerdict { Converges, Diverges, Inconclusive };

inline std::string to_string(SeriesVerdict v) {
  switch (v) {
    case SeriesVerdict::Converges: return "converges";
    case SeriesVerdict::Diverges: return "diverges";
    case SeriesVerdict::Inconclusive: return "inconclusive";
  }
  return "?";
}

struct VerdictRule {
  double converge_ratio = 0.95;  // tail ratio at or below: converges
  double diverge_ratio = 1.05;   // tail ratio at or above: diverges
  double zero_floor = 1e-300;    // levels at or below count as exact zeros
  double flat_floor = 1e-12;     // flat tails above this read as divergence
};

struct SeriesAssessment {
  SeriesVerdict verdict = SeriesVerdict::Inconclusive;
  double tail_ratio = 0.0;
  int ratios_used = 0;
  bool flat_rule_applied = false;
};

inline SeriesAssessment assess_series(const std::vector<double>& level_sums, const VerdictRule& rule = {}) {
  SeriesAssessment out;
  const std::size_t n = level_sums.size();
  std::size_t last_nz = n;
  for (std::size_t i = n; i-- > 0;) {
    if (std::abs(level_sums[i]) > rule.zero_floor) {
      last_nz = i;
      break;
    }
  }
  if (last_nz == n || last_nz + 1 < n) {
    // nothing left at the horizon: the tail vanished inside it
    out.verdict = SeriesVerdict::Converges;
    return out;
  }
  std::vector<double> ratios;
  for (std::size_t i = std::max<std::size_t>(n / 2, 1); i <= last_nz; ++i) {
    const double prev = level_sums[i - 1];
    const double cur = level_sums[i];
    if (prev > rule.zero_floor && cur > rule.zero_floor) ratios.push_back(cur / prev);
  }
  out.ratios_used = static_cast<int>(ratios.size());
  if (ratios.size() < 2) return out;
  NeumaierSum lg;
  for (double r : ratios) lg.add(std::log(r));
  out.tail_ratio = std::exp(lg.value() / static_cast<double>(ratios.size()));
  if (out.tail_ratio <= rule.converge_ratio) {
    out.verdict = SeriesVerdict::Converges;
  } else if (out.tail_ratio >= rule.diverge_ratio) {
    out.verdict = SeriesVerdict::Diverges;
  } else {
    out.flat_rule_applied = true;
    out.verdict = level_sums[last_nz] > rule.flat_floor ? SeriesVerdict::Diverges : SeriesVerdict::Converges;
  }
  return out;
}

namespace detail {

// Dyadic condensation must judge complete blocks only: a block cut short by
// the truncation is biased low and would read as decay no matter what the
// series does.
inline SeriesAssessment assess_dyadic_blocks(std::vector<double> blocks, bool last_complete,
                                             const VerdictRule& rule) {
  if (!last_complete && !blocks.empty()) blocks.pop_back();
  return assess_series(blocks, rule);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Moment condition series over exponent grids.

struct SeriesTerm {
  MultiIndex n;            // exponent vector; block sizes are a_j^{n_j}
  double term = 0.0;       // sup over probed anchors of mean |S|^p / prod phi^p
  double std_error = 0.0;  // at the anchor attaining the sup
  MultiIndex argmax_anchor;
  bool heavy_tail_unstable = false;
};

struct MomentSeriesReport {
  bool sphere = false;
  std::vector<SeriesTerm> terms;
  std::vector<double> level_sums;    // terms condensed by total exponent
  std::vector<double> partial_sums;  // running sums of level_sums
  SeriesAssessment assessment;
  std::vector<std::int64_t> bases;
  double p = 1.0;
  std::vector<std::string> phi_labels;
  std::vector<BasePlan> plans;  // one per axis
  bool plan_admissible = false;
  std::string plan_note;
  std::int64_t replicates = 0;
  std::uint64_t master_seed = 0;
  std::vector<std::string> notes;
};

// Anchors probed when estimating sup_m E|S(m; sizes)|^p.  Stationary
// generators skip the plan: the supremum is attained at the corner anchor
// exactly. For anything else the probed sup is a lower estimate and the
// anchors used are recorded in the report.
struct ProbePlan {
  bool include_zero = true;
  bool include_scale = true;       // the running corner: m = sizes
  bool include_axis_scale = true;  // single-axis shifts: m = sizes_j e_j
  std::vector<MultiIndex> extra;
};

namespace detail {

inline void push_unique(std::vector<MultiIndex>& v, MultiIndex m) {
  for (const auto& x : v) {
    if (x == m) return;
  }
  v.push_back(std::move(m));
}

inline std::vector<MultiIndex> rect_anchors(const ProbePlan& plan, bool stationary, const MultiIndex& sizes) {
  const int d = static_cast<int>(sizes.size());
  std::vector<MultiIndex> out;
  if (stationary) {
    out.push_back(constant_index(d, 0));
    return out;
  }
  if (plan.include_zero) push_unique(out, constant_index(d, 0));
  if (plan.include_scale) push_unique(out, sizes);
  if (plan.include_axis_scale) {
    for (int j = 0; j < d; ++j) {
      MultiIndex m = constant_index(d, 0);
      m[static_cast<std::size_t>(j)] = sizes[static_cast<std::size_t>(j)];
      push_unique(out, std::move(m));
    }
  }
  for (const auto& m : plan.extra) {
    check_dim(m, d, "ProbePlan anchor");
    check_nonnegative(m, "ProbePlan anchor");
    push_unique(out, m);
  }
  if (out.empty()) {
    throw std::invalid_argument("probe plan is empty; a non-stationary generator needs at least one anchor");
  }
  return out;
}

inline std::vector<BasePlan> axis_plans(const std::vector<ScalingFunction>& phis,
                                        const std::vector<std::int64_t>& bases, double p, double x_min,
                                        double x_max) {
  std::vector<BasePlan> plans;
  for (std::size_t j = 0; j < phis.size(); ++j) {
    auto db = doubling_bounds(phis[j], x_min, x_max);
    plans.push_back(make_base_plan(bases[j], p, {db.c_low}, /*require_admissible=*/false));
  }
  return plans;
}

inline void fill_plan_summary_plans(const std::vector<BasePlan>& plans, bool& admissible,
                                    std::string& note) {
  admissible = true;
  for (const auto& plan : plans) {
    if (!plan.admissible) {
      admissible = false;
      if (!note.empty()) note += "; ";
      note += plan.failed_inequality;
    }
  }
}

inline void fill_plan_summary(MomentSeriesReport& rep) {
  fill_plan_summary_plans(rep.plans, rep.plan_admissible, rep.plan_note);
}

}  // namespace detail

struct ConditionSeriesOptions {
  std::int64_t replicates = 2000;
  int threads = 1;
  ProbePlan probes{};
  std::vector<std::int64_t> probe_radii;  // extra anchors for spherical sums
  VerdictRule rule{};
  bool require_admissible = false;  // survey by default: record the base-plan
                                    // verdict, sample regardless
  double doubling_x_min = 1.0;
  double doubling_x_max = 1e6;
};

// Empirical check of sum_n sup_m E|S(m; a^n)|^p / prod_j phi_j(a_j^{n_j})^p
// over the exponent box [0, n_max]^d.  One field per replicate covers every
// (level, anchor) pair, so all terms share noise and their ratios are far
// less noisy than the terms themselves.
inline MomentSeriesReport condition_series_rect(const FieldGenerator& gen,
                                                const std::vector<ScalingFunction>& phis,
                                                const std::vector<std::int64_t>& bases, double p, int n_max,
                                                const ConditionSeriesOptions& opt = {}) {
  const int d = gen.d;
  if (d < 1) throw std::invalid_argument("condition_series_rect: generator dimension must be >= 1");
  if (static_cast<int>(phis.size()) != d || static_cast<int>(bases.size()) != d) {
    throw std::invalid_argument("condition_series_rect: need one scaling function and one base per axis");
  }
  for (auto a : bases) {
    if (a < 2) throw std::invalid_argument("condition_series_rect: bases must be >= 2");
  }
  if (!(p > 0.0)) throw std::invalid_argument("condition_series_rect: p must be positive");
  if (n_max < 0) throw std::invalid_argument("condition_series_rect: n_max must be >= 0");
  if (opt.replicates < 2) throw std::invalid_argument("condition_series_rect: need at least 2 replicates");

  MomentSeriesReport rep;
  rep.sphere = false;
  rep.bases = bases;
  rep.p = p;
  rep.replicates = opt.replicates;
  rep.master_seed = gen.master_seed;
  for (const auto& phi : phis) rep.phi_labels.push_back(phi.label());

  double x_max = opt.doubling_x_max;
  for (int j = 0; j < d; ++j) {
    x_max = std::max(x_max, 2.0 * std::pow(static_cast<double>(bases[static_cast<std::size_t>(j)]),
                                           static_cast<double>(n_max + 1)));
  }
  rep.plans = detail::axis_plans(phis, bases, p, opt.doubling_x_min, x_max);
  detail::fill_plan_summary(rep);
  if (opt.require_admissible && !rep.plan_admissible) {
    throw std::domain_error("condition_series_rect: base plan inadmissible: " + rep.plan_note);
  }

  const double alpha = generator_alpha(gen);
  const bool heavy = alpha < 2.0 && 2.0 * p >= alpha;
  if (heavy) {
    rep.notes.push_back("2p >= alpha: sample variance of |S|^p is infinite, standard errors are indicative only");
  }
  if (gen.stationary) {
    rep.notes.push_back("stationary generator: sup over anchors replaced by the exact value at the corner");
  }

  const auto levels = detail::exponent_grid(d, n_max);
  std::vector<MultiIndex> sizes(levels.size());
  std::vector<double> denom(levels.size());
  for (std::size_t li = 0; li < levels.size(); ++li) {
    MultiIndex sz(static_cast<std::size_t>(d));
    double dn = 1.0;
    for (int j = 0; j < d; ++j) {
      auto u = static_cast<std::size_t>(j);
      sz[u] = detail::ipow(bases[u], levels[li][u]);
      dn *= std::pow(phis[u](static_cast<double>(sz[u])), p);
    }
    sizes[li] = std::move(sz);
    denom[li] = dn;
  }

  std::vector<std::vector<MultiIndex>> anchors(levels.size());
  for (std::size_t li = 0; li < levels.size(); ++li) {
    anchors[li] = detail::rect_anchors(opt.probes, gen.stationary, sizes[li]);
  }

  // [level][anchor][replicate]
  std::vector<std::vector<std::vector<double>>> vals(levels.size());
  for (std::size_t li = 0; li < levels.size(); ++li) {
    vals[li].assign(anchors[li].size(), std::vector<double>(static_cast<std::size_t>(opt.replicates)));
  }

  const bool kernel_path = gen.lfss && d == 1 && gen.stationary;
  if (kernel_path) {
    // d = 1 partial sums collapse to one dot product per replicate; no field.
    auto ws = increment_weights(*gen.lfss);
    std::vector<std::int64_t> ns;
    for (std::size_t li = 0; li < levels.size(); ++li) ns.push_back(sizes[li][0]);
    auto draws = sample_partial_sums_1d(ws[0], gen.lfss->alpha, ns, opt.replicates, gen.master_seed,
                                        gen.label, opt.threads);
    for (std::size_t li = 0; li < levels.size(); ++li) {
      for (std::int64_t r = 0; r < opt.replicates; ++r) {
        auto ur = static_cast<std::size_t>(r);
        vals[li][0][ur] = std::pow(std::abs(draws[li][ur]), p) / denom[li];
      }
    }
  } else {
    MultiIndex extent = constant_index(d, 1);
    for (std::size_t li = 0; li < levels.size(); ++li) {
      for (const auto& m : anchors[li]) {
        for (int j = 0; j < d; ++j) {
          auto u = static_cast<std::size_t>(j);
          extent[u] = std::max(extent[u], m[u] + sizes[li][u]);
        }
      }
    }
    const MultiIndex origin = constant_index(d, 1);  // anchors are exclusive lower corners
    parallel_for(opt.replicates, opt.threads, [&](std::int64_t r) {
      LatticeField f = gen.make(extent, origin, r, 1);
      PrefixSumTable t(f);
      for (std::size_t li = 0; li < levels.size(); ++li) {
        for (std::size_t ai = 0; ai < anchors[li].size(); ++ai) {
          double s = rect_partial_sum(t, anchors[li][ai], sizes[li]);
          vals[li][ai][static_cast<std::size_t>(r)] = std::pow(std::abs(s), p) / denom[li];
        }
      }
    });
  }

  std::int64_t max_level = 0;
  for (const auto& n : levels) max_level = std::max(max_level, detail::total_level(n));
  rep.level_sums.assign(static_cast<std::size_t>(max_level + 1), 0.0);
  for (std::size_t li = 0; li < levels.size(); ++li) {
    SeriesTerm term;
    term.n = levels[li];
    term.heavy_tail_unstable = heavy;
    double best = -1.0;
    for (std::size_t ai = 0; ai < anchors[li].size(); ++ai) {
      auto ms = detail::mean_and_se(vals[li][ai]);
      if (ms.mean > best) {
        best = ms.mean;
        term.term = ms.mean;
        term.std_error = ms.se;
        term.argmax_anchor = anchors[li][ai];
      }
    }
    rep.level_sums[static_cast<std::size_t>(detail::total_level(levels[li]))] += term.term;
    rep.terms.push_back(std::move(term));
  }
  NeumaierSum run;
  for (double v : rep.level_sums) {
    run.add(v);
    rep.partial_sums.push_back(run.value());
  }
  rep.assessment = assess_series(rep.level_sums, opt.rule);
  return rep;
}

// Spherical variant: S(m; k) sums the annulus m < |x| <= m + k, so the
// series runs over radii a^n and anchors are inner radii.
inline MomentSeriesReport condition_series_sphere(const FieldGenerator& gen, const ScalingFunction& f,
                                                  std::int64_t a, double p, int n_max, Norm norm,
                                                  const ConditionSeriesOptions& opt = {}) {
  const int d = gen.d;
  if (d < 1) throw std::invalid_argument("condition_series_sphere: generator dimension must be >= 1");
  if (a < 2) throw std::invalid_argument("condition_series_sphere: a must be >= 2");
  if (!(p > 0.0)) throw std::invalid_argument("condition_series_sphere: p must be positive");
  if (n_max < 0) throw std::invalid_argument("condition_series_sphere: n_max must be >= 0");
  if (opt.replicates < 2) throw std::invalid_argument("condition_series_sphere: need at least 2 replicates");

  MomentSeriesReport rep;
  rep.sphere = true;
  rep.bases = {a};
  rep.p = p;
  rep.replicates = opt.replicates;
  rep.master_seed = gen.master_seed;
  rep.phi_labels = {f.label()};

  const double x_max = std::max(opt.doubling_x_max,
                                2.0 * std::pow(static_cast<double>(a), static_cast<double>(n_max + 1)));
  rep.plans = {make_base_plan(a, p, {doubling_bounds(f, opt.doubling_x_min, x_max).c_low}, false)};
  detail::fill_plan_summary(rep);
  if (opt.require_admissible && !rep.plan_admissible) {
    throw std::domain_error("condition_series_sphere: base plan inadmissible: " + rep.plan_note);
  }

  const double alpha = generator_alpha(gen);
  const bool heavy = alpha < 2.0 && 2.0 * p >= alpha;
  if (heavy) {
    rep.notes.push_back("2p >= alpha: sample variance of |S|^p is infinite, standard errors are indicative only");
  }

  const std::int64_t top = detail::ipow(a, n_max);
  std::vector<std::int64_t> radii;  // inner-radius anchors
  if (gen.stationary) {
    radii = {0};
    rep.notes.push_back("stationary generator: sup over inner radii replaced by the value at radius 0");
  } else {
    radii = {0};
    for (auto r : opt.probe_radii) {
      if (r < 0) throw std::invalid_argument("condition_series_sphere: probe radii must be >= 0");
      if (std::find(radii.begin(), radii.end(), r) == radii.end()) radii.push_back(r);
    }
  }

  std::int64_t reach = 0;
  for (auto r : radii) reach = std::max(reach, r + top);
  // Ball domains live in the nonnegative orthant, so [0, reach]^d covers them.
  const MultiIndex origin = constant_index(d, 0);
  const MultiIndex shape = constant_index(d, reach + 1);

  // [level][anchor][replicate]
  std::vector<std::vector<std::vector<double>>> vals(
      static_cast<std::size_t>(n_max + 1),
      std::vector<std::vector<double>>(radii.size(), std::vector<double>(static_cast<std::size_t>(opt.replicates))));
  std::vector<double> denom(static_cast<std::size_t>(n_max + 1));
  for (int n = 0; n <= n_max; ++n) {
    denom[static_cast<std::size_t>(n)] =
        std::pow(f(static_cast<double>(detail::ipow(a, n))), p);
  }

  parallel_for(opt.replicates, opt.threads, [&](std::int64_t r) {
    LatticeField fld = gen.make(shape, origin, r, 1);
    for (std::size_t ri = 0; ri < radii.size(); ++ri) {
      auto rm = spherical_running_max(fld, radii[ri], top, norm);
      for (int n = 0; n <= n_max; ++n) {
        const auto k = static_cast<std::size_t>(detail::ipow(a, n));
        vals[static_cast<std::size_t>(n)][ri][static_cast<std::size_t>(r)] =
            std::pow(std::abs(rm.partial[k - 1]), p) / denom[static_cast<std::size_t>(n)];
      }
    }
  });

  rep.level_sums.assign(static_cast<std::size_t>(n_max + 1), 0.0);
  for (int n = 0; n <= n_max; ++n) {
    SeriesTerm term;
    term.n = {n};
    term.heavy_tail_unstable = heavy;
    double best = -1.0;
    for (std::size_t ri = 0; ri < radii.size(); ++ri) {
      auto ms = detail::mean_and_se(vals[static_cast<std::size_t>(n)][ri]);
      if (ms.mean > best) {
        best = ms.mean;
        term.term = ms.mean;
        term.std_error = ms.se;
        term.argmax_anchor = {radii[ri]};
      }
    }
    rep.level_sums[static_cast<std::size_t>(n)] = term.term;
    rep.terms.push_back(std::move(term));
  }
  NeumaierSum run;
  for (double v : rep.level_sums) {
    run.add(v);
    rep.partial_sums.push_back(run.value());
  }
  rep.assessment = assess_series(rep.level_sums, opt.rule);
  return rep;
}

// Deterministic variant: the caller supplies the moment bound (or its exact
// value) as a function of the exponent vector, and only the normalization
// and the verdict machinery run.  Lets analytic second-moment computations
// cross-check the sampled series.
inline MomentSeriesReport corollary_bound_series(const std::function<double(const MultiIndex&)>& moment_bound,
                                                 const std::vector<ScalingFunction>& phis,
                                                 const std::vector<std::int64_t>& bases, double p, int n_max,
                                                 const VerdictRule& rule = {}) {
  const int d = static_cast<int>(phis.size());
  if (d < 1 || static_cast<int>(bases.size()) != d) {
    throw std::invalid_argument("corollary_bound_series: need one scaling function and one base per axis");
  }
  if (!(p > 0.0)) throw std::invalid_argument("corollary_bound_series: p must be positive");
  if (n_max < 0) throw std::invalid_argument("corollary_bound_series: n_max must be >= 0");
  MomentSeriesReport rep;
  rep.bases = bases;
  rep.p = p;
  for (const auto& phi : phis) rep.phi_labels.push_back(phi.label());
  double x_max = 1e6;
  for (int j = 0; j < d; ++j) {
    x_max = std::max(x_max, 2.0 * std::pow(static_cast<double>(bases[static_cast<std::size_t>(j)]),
                                           static_cast<double>(n_max + 1)));
  }
  rep.plans = detail::axis_plans(phis, bases, p, 1.0, x_max);
  detail::fill_plan_summary(rep);
  rep.notes.push_back("deterministic evaluation of a supplied moment bound");

  const auto levels = detail::exponent_grid(d, n_max);
  std::int64_t max_level = 0;
  for (const auto& n : levels) max_level = std::max(max_level, detail::total_level(n));
  rep.level_sums.assign(static_cast<std::size_t>(max_level + 1), 0.0);
  for (const auto& n : levels) {
    double dn = 1.0;
    for (int j = 0; j < d; ++j) {
      auto u = static_cast<std::size_t>(j);
      dn *= std::pow(phis[u](static_cast<double>(detail::ipow(bases[u], n[u]))), p);
    }
    const double b = moment_bound(n);
    if (!(b >= 0.0) || !std::isfinite(b)) {
      throw std::domain_error("corollary_bound_series: moment bound gave " + fmt_double(b) + " at " + to_string(n));
    }
    SeriesTerm term;
    term.n = n;
    term.term = b / dn;
    rep.level_sums[static_cast<std::size_t>(detail::total_level(n))] += term.term;
    rep.terms.push_back(std::move(term));
  }
  NeumaierSum run;
  for (double v : rep.level_sums) {
    run.add(v);
    rep.partial_sums.push_back(run.value());
  }
  rep.assessment = assess_series(rep.level_sums, rule);
  return rep;
}

// ---------------------------------------------------------------------------
// Recursion traces.  The maximal-sum gap F at consecutive block scales obeys
// F(n+1) <= c F(n) + D w(n), with w the normalized driving moment; the trace
// estimates every piece of that inequality level by level.

struct RecursionLevel {
  int level = 0;
  double lhs = 0.0;    // gap estimate one scale up
  double rhs_f = 0.0;  // gap estimate at the current scale
  double drive = 0.0;  // normalized driving moment
  double bound = 0.0;  // c * rhs_f + D * drive
  double slack_mean = 0.0;
  double slack_se = 0.0;
  bool within_tol = false;  // slack_mean >= -2 slack_se
};

struct RecursionTrace {
  bool sphere = true;
  int axis = 0;  // rect traces: 1-based axis being contracted
  std::int64_t a = 2;
  double p = 1.0;
  double c = 0.0;
  double D = 0.0;
  BasePlan plan;
  std::string constants_note;
  double f0 = 0.0;            // gap at the unit scale, identically zero
  bool f0_exact_zero = false;
  std::vector<RecursionLevel> levels;
  bool all_within_tol = false;
  bool per_replicate_gaps_nonneg = false;  // max-sum >= |sum| held exactly in every draw
  std::int64_t replicates = 0;
  std::uint64_t master_seed = 0;
  std::vector<std::string> notes;
};

struct RecursionOptions {
  std::int64_t replicates = 4000;
  int threads = 1;
  ProbePlan probes{};                     // rect anchors (non-stationary only)
  std::vector<std::int64_t> probe_radii;  // sphere anchors (non-stationary only)
  double doubling_x_min = 1.0;
  double doubling_x_max = 1e6;
};

namespace detail {

inline void finish_trace_levels(RecursionTrace& tr) {
  tr.all_within_tol = true;
  for (const auto& lv : tr.levels) tr.all_within_tol = tr.all_within_tol && lv.within_tol;
}

}  // namespace detail

inline RecursionTrace recursion_trace_sphere(const FieldGenerator& gen, const ScalingFunction& f,
                                             std::int64_t a, double p, int n_levels, Norm norm,
                                             const RecursionOptions& opt = {}) {
  if (gen.d < 1) throw std::invalid_argument("recursion_trace_sphere: generator dimension must be >= 1");
  if (a < 2) throw std::invalid_argument("recursion_trace_sphere: a must be >= 2");
  if (!(p >= 1.0)) throw std::invalid_argument("recursion_trace_sphere: p must be >= 1");
  if (n_levels < 1) throw std::invalid_argument("recursion_trace_sphere: need at least one level");
  if (opt.replicates < 2) throw std::invalid_argument("recursion_trace_sphere: need at least 2 replicates");

  RecursionTrace tr;
  tr.sphere = true;
  tr.a = a;
  tr.p = p;
  tr.replicates = opt.replicates;
  tr.master_seed = gen.master_seed;

  const double x_max = std::max(opt.doubling_x_max,
                                2.0 * std::pow(static_cast<double>(a), static_cast<double>(n_levels + 1)));
  // inadmissible plans refuse here: the trace has no meaning without c < 1
  tr.plan = make_base_plan(a, p, {doubling_bounds(f, opt.doubling_x_min, x_max).c_low}, true);
  tr.c = tr.plan.consts[0].c;
  tr.D = tr.plan.consts[0].D;
  tr.constants_note = "c = (1 + (a-1) 2^(p-1)) / c_low^(p floor(log2 a)), D = 2^(p-1) (sum_j j^(p-1) + a - 1)";

  const std::int64_t top = detail::ipow(a, n_levels);
  std::vector<std::int64_t> radii = {0};
  if (!gen.stationary) {
    for (auto r : opt.probe_radii) {
      if (r < 0) throw std::invalid_argument("recursion_trace_sphere: probe radii must be >= 0");
      if (std::find(radii.begin(), radii.end(), r) == radii.end()) radii.push_back(r);
    }
  }
  std::int64_t reach = 0;
  for (auto r : radii) reach = std::max(reach, r + top);
  // Ball domains live in the nonnegative orthant, so [0, reach]^d covers them.
  const MultiIndex origin = constant_index(gen.d, 0);
  const MultiIndex shape = constant_index(gen.d, reach + 1);

  const auto nn = static_cast<std::size_t>(n_levels + 1);
  std::vector<double> fnorm(nn);
  for (std::size_t n = 0; n < nn; ++n) {
    fnorm[n] = std::pow(f(static_cast<double>(detail::ipow(a, static_cast<std::int64_t>(n)))), p);
  }

  // u = normalized gap, w = normalized drive; [level][anchor][replicate]
  std::vector<std::vector<std::vector<double>>> u(nn), w(nn);
  for (std::size_t n = 0; n < nn; ++n) {
    u[n].assign(radii.size(), std::vector<double>(static_cast<std::size_t>(opt.replicates)));
    w[n].assign(radii.size(), std::vector<double>(static_cast<std::size_t>(opt.replicates)));
  }
  std::vector<std::uint8_t> gap_ok(static_cast<std::size_t>(opt.replicates), 1);

  parallel_for(opt.replicates, opt.threads, [&](std::int64_t r) {
    LatticeField fld = gen.make(shape, origin, r, 1);
    const auto ur = static_cast<std::size_t>(r);
    for (std::size_t ri = 0; ri < radii.size(); ++ri) {
      auto rm = spherical_running_max(fld, radii[ri], top, norm);
      for (std::size_t n = 0; n < nn; ++n) {
        const auto k = static_cast<std::size_t>(detail::ipow(a, static_cast<std::int64_t>(n)));
        const double s = std::abs(rm.partial[k - 1]);
        const double mx = rm.running_max[k - 1];
        if (mx < s) gap_ok[ur] = 0;
        u[n][ri][ur] = (std::pow(mx, p) - std::pow(s, p)) / fnorm[n];
        w[n][ri][ur] = std::pow(s, p) / fnorm[n];
      }
    }
  });

  tr.per_replicate_gaps_nonneg = std::all_of(gap_ok.begin(), gap_ok.end(), [](std::uint8_t b) { return b != 0; });
  {
    auto ms0 = detail::mean_and_se(u[0][0]);
    tr.f0 = ms0.mean;
    tr.f0_exact_zero = std::all_of(u[0][0].begin(), u[0][0].end(), [](double x) { return x == 0.0; });
  }

  const bool single_anchor = radii.size() == 1;
  if (!single_anchor) {
    tr.notes.push_back("anchored sup estimated over a finite radius set; slack uses error quadrature");
  }
  for (int n = 0; n < n_levels; ++n) {
    const auto un = static_cast<std::size_t>(n);
    RecursionLevel lv;
    lv.level = n;
    if (single_anchor) {
      auto mlhs = detail::mean_and_se(u[un + 1][0]);
      auto mf = detail::mean_and_se(u[un][0]);
      auto mw = detail::mean_and_se(w[un][0]);
      lv.lhs = mlhs.mean;
      lv.rhs_f = mf.mean;
      lv.drive = mw.mean;
      std::vector<double> g(static_cast<std::size_t>(opt.replicates));
      for (std::size_t r = 0; r < g.size(); ++r) {
        g[r] = tr.c * u[un][0][r] + tr.D * w[un][0][r] - u[un + 1][0][r];
      }
      auto mg = detail::mean_and_se(g);
      lv.slack_mean = mg.mean;
      lv.slack_se = mg.se;
    } else {
      detail::MeanSe mf, mw;
      for (std::size_t ri = 0; ri < radii.size(); ++ri) {
        auto cf = detail::mean_and_se(u[un][ri]);
        auto cw = detail::mean_and_se(w[un][ri]);
        if (cf.mean > mf.mean) mf = cf;
        if (cw.mean > mw.mean) mw = cw;
      }
      auto mlhs = detail::mean_and_se(u[un + 1][0]);  // the radius-0 gap is the self-contained left side
      lv.lhs = mlhs.mean;
      lv.rhs_f = mf.mean;
      lv.drive = mw.mean;
      lv.slack_mean = tr.c * mf.mean + tr.D * mw.mean - mlhs.mean;
      lv.slack_se = std::sqrt(tr.c * tr.c * mf.se * mf.se + tr.D * tr.D * mw.se * mw.se + mlhs.se * mlhs.se);
    }
    lv.bound = tr.c * lv.rhs_f + tr.D * lv.drive;
    lv.within_tol = lv.slack_mean >= -2.0 * lv.slack_se;
    tr.levels.push_back(lv);
  }
  detail::finish_trace_levels(tr);
  return tr;
}

// Rectangular trace for the contraction of axis s: the gap between the
// maximal sum over the first s axes and over the first s-1 axes, compared at
// block exponents all l+1 against the same gap with axis s held at l.
inline RecursionTrace recursion_trace_rect(const FieldGenerator& gen, int s,
                                           const std::vector<ScalingFunction>& phis, std::int64_t a, double p,
                                           int n_levels, const RecursionOptions& opt = {}) {
  const int d = gen.d;
  if (d < 1) throw std::invalid_argument("recursion_trace_rect: generator dimension must be >= 1");
  if (s < 1 || s > d) throw std::invalid_argument("recursion_trace_rect: axis s must lie in [1, d]");
  if (static_cast<int>(phis.size()) != d) {
    throw std::invalid_argument("recursion_trace_rect: need one scaling function per axis");
  }
  if (a < 2) throw std::invalid_argument("recursion_trace_rect: a must be >= 2");
  if (!(p > 0.0)) throw std::invalid_argument("recursion_trace_rect: p must be positive");
  if (n_levels < 1) throw std::invalid_argument("recursion_trace_rect: need at least one level");
  if (opt.replicates < 2) throw std::invalid_argument("recursion_trace_rect: need at least 2 replicates");

  RecursionTrace tr;
  tr.sphere = false;
  tr.axis = s;
  tr.a = a;
  tr.p = p;
  tr.replicates = opt.replicates;
  tr.master_seed = gen.master_seed;

  double x_max = std::max(opt.doubling_x_max,
                          2.0 * std::pow(static_cast<double>(a), static_cast<double>(n_levels + 1)));
  std::vector<double> c_lows;
  for (const auto& phi : phis) c_lows.push_back(doubling_bounds(phi, opt.doubling_x_min, x_max).c_low);
  tr.plan = make_base_plan(a, p, c_lows, true);
  const auto& rc = tr.plan.consts[static_cast<std::size_t>(s - 1)];
  if (p <= 1.0) {
    // subadditive split: both coefficients collapse to a / c_low^(p floor(log2 a))
    tr.c = rc.k;
    tr.D = rc.k;
    tr.constants_note = "p <= 1: c = D = a / c_low_s^(p floor(log2 a))";
  } else {
    tr.c = rc.c;
    tr.D = rc.D;
    tr.constants_note = "p > 1: c = (1 + (a-1) 2^(p-1)) / c_low_s^(p floor(log2 a)), D = 2^(p-1) (sum_j j^(p-1) + a - 1)";
  }

  const std::int64_t top = detail::ipow(a, n_levels);
  MultiIndex top_sizes = constant_index(d, top);
  std::vector<MultiIndex> anchors = detail::rect_anchors(opt.probes, gen.stationary, top_sizes);
  MultiIndex extent = constant_index(d, 1);
  for (const auto& m : anchors) {
    for (int j = 0; j < d; ++j) {
      auto u = static_cast<std::size_t>(j);
      extent[u] = std::max(extent[u], m[u] + top);
    }
  }
  const MultiIndex origin = constant_index(d, 1);

  // Exponent vectors per level: hi = all l+1; mid = axis s at l, others l+1.
  auto sizes_at = [&](int l_axis_s, int l_others) {
    MultiIndex sz(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
      sz[static_cast<std::size_t>(j)] =
          detail::ipow(a, j == s - 1 ? l_axis_s : l_others);
    }
    return sz;
  };
  auto denom_at = [&](const MultiIndex& sz) {
    double dn = 1.0;
    for (int j = 0; j < d; ++j) {
      auto u = static_cast<std::size_t>(j);
      dn *= std::pow(phis[u](static_cast<double>(sz[u])), p);
    }
    return dn;
  };

  const auto nl = static_cast<std::size_t>(n_levels);
  std::vector<MultiIndex> hi_sizes(nl), mid_sizes(nl);
  std::vector<double> hi_denom(nl), mid_denom(nl);
  for (std::size_t l = 0; l < nl; ++l) {
    const int li = static_cast<int>(l);
    hi_sizes[l] = sizes_at(li + 1, li + 1);
    mid_sizes[l] = sizes_at(li, li + 1);
    hi_denom[l] = denom_at(hi_sizes[l]);
    mid_denom[l] = denom_at(mid_sizes[l]);
  }

  const auto reps = static_cast<std::size_t>(opt.replicates);
  const std::size_t na = anchors.size();
  std::vector<std::vector<std::vector<double>>> u_hi(nl), u_mid(nl), w_mid(nl);
  for (std::size_t l = 0; l < nl; ++l) {
    u_hi[l].assign(na, std::vector<double>(reps));
    u_mid[l].assign(na, std::vector<double>(reps));
    w_mid[l].assign(na, std::vector<double>(reps));
  }
  std::vector<double> u_zero(reps);  // gap at unit blocks, exactly zero
  std::vector<std::uint8_t> gap_ok(reps, 1);

  parallel_for(opt.replicates, opt.threads, [&](std::int64_t r) {
    LatticeField fld = gen.make(extent, origin, r, 1);
    PrefixSumTable t(fld);
    const auto ur = static_cast<std::size_t>(r);
    auto gap = [&](const MultiIndex& m, const MultiIndex& sz, double dn, double* drive_out) {
      const double ms = maximal_sum(t, m, sz, s);
      const double ms1 = maximal_sum(t, m, sz, s - 1);
      if (ms < ms1) gap_ok[ur] = 0;
      if (drive_out) *drive_out = std::pow(ms1, p) / dn;
      return (std::pow(ms, p) - std::pow(ms1, p)) / dn;
    };
    {
      const MultiIndex unit = constant_index(d, 1);
      u_zero[ur] = gap(anchors[0], unit, denom_at(unit), nullptr);
    }
    for (std::size_t l = 0; l < nl; ++l) {
      for (std::size_t ai = 0; ai < na; ++ai) {
        u_hi[l][ai][ur] = gap(anchors[ai], hi_sizes[l], hi_denom[l], nullptr);
        double drv = 0.0;
        u_mid[l][ai][ur] = gap(anchors[ai], mid_sizes[l], mid_denom[l], &drv);
        w_mid[l][ai][ur] = drv;
      }
    }
  });

  tr.per_replicate_gaps_nonneg = std::all_of(gap_ok.begin(), gap_ok.end(), [](std::uint8_t b) { return b != 0; });
  tr.f0 = detail::mean_and_se(u_zero).mean;
  tr.f0_exact_zero = std::all_of(u_zero.begin(), u_zero.end(), [](double x) { return x == 0.0; });

  const bool single_anchor = na == 1;
  if (!single_anchor) {
    tr.notes.push_back("anchored sup estimated over a finite anchor set; slack uses error quadrature");
  }
  for (std::size_t l = 0; l < nl; ++l) {
    RecursionLevel lv;
    lv.level = static_cast<int>(l);
    if (single_anchor) {
      auto mlhs = detail::mean_and_se(u_hi[l][0]);
      auto mf = detail::mean_and_se(u_mid[l][0]);
      auto mw = detail::mean_and_se(w_mid[l][0]);
      lv.lhs = mlhs.mean;
      lv.rhs_f = mf.mean;
      lv.drive = mw.mean;
      std::vector<double> g(reps);
      for (std::size_t r = 0; r < reps; ++r) {
        g[r] = tr.c * u_mid[l][0][r] + tr.D * w_mid[l][0][r] - u_hi[l][0][r];
      }
      auto mg = detail::mean_and_se(g);
      lv.slack_mean = mg.mean;
      lv.slack_se = mg.se;
    } else {
      detail::MeanSe mf, mw;
      for (std::size_t ai = 0; ai < na; ++ai) {
        auto cf = detail::mean_and_se(u_mid[l][ai]);
        auto cw = detail::mean_and_se(w_mid[l][ai]);
        if (cf.mean > mf.mean) mf = cf;
        if (cw.mean > mw.mean) mw = cw;
      }
      auto mlhs = detail::mean_and_se(u_hi[l][0]);
      lv.lhs = mlhs.mean;
      lv.rhs_f = mf.mean;
      lv.drive = mw.mean;
      lv.slack_mean = tr.c * mf.mean + tr.D * mw.mean - mlhs.mean;
      lv.slack_se = std::sqrt(tr.c * tr.c * mf.se * mf.se + tr.D * tr.D * mw.se * mw.se + mlhs.se * mlhs.se);
    }
    lv.bound = tr.c * lv.rhs_f + tr.D * lv.drive;
    lv.within_tol = lv.slack_mean >= -2.0 * lv.slack_se;
    tr.levels.push_back(lv);
  }
  detail::finish_trace_levels(tr);
  return tr;
}

// ---------------------------------------------------------------------------
// Moment scaling law for the d = 1 moving-average field:
// E|S(0; n)|^p = C a^{p H e} along n = a^e, with C estimated once at n = 1.

struct MomentLawRow {
  int exponent = 0;
  std::int64_t size = 0;
  double mean_abs_p = 0.0;
  double std_error = 0.0;
  double predicted = 0.0;
};

struct MomentLawReport {
  std::vector<MomentLawRow> rows;
  double c_hat = 0.0;         // E|xi(0)|^p from the unit block
  double slope = 0.0;         // least-squares slope of log mean against the exponent
  double slope_target = 0.0;  // p H log a
  double ratio_geomean = 0.0;
  double ratio_target = 0.0;  // a^{p H step} for a uniform exponent step
  double shift_gap = 0.0;     // paired mean of |S(shift; top)|^p - |S(0; top)|^p
  double shift_se = 0.0;
  bool shift_within_tol = false;
  bool heavy_tail_unstable = false;
  std::int64_t replicates = 0;
  std::uint64_t master_seed = 0;
  std::vector<std::string> notes;
};

inline MomentLawReport lfss_moment_law(const LfssConfig& cfg, std::int64_t a, double p,
                                       const std::vector<int>& exponents, std::int64_t replicates,
                                       std::uint64_t master_seed, const std::string& stream = "moment-law",
                                       int threads = 1, std::int64_t shift = 16) {
  validate(cfg);
  if (cfg.d != 1) throw std::invalid_argument("lfss_moment_law: implemented for d = 1 aggregated kernels");
  if (a < 2) throw std::invalid_argument("lfss_moment_law: a must be >= 2");
  if (!(p > 0.0) || p >= cfg.alpha) {
    throw std::domain_error("lfss_moment_law: need 0 < p < alpha, E|S|^p is infinite otherwise, got p = " +
                            fmt_double(p) + ", alpha = " + fmt_double(cfg.alpha));
  }
  if (exponents.empty()) throw std::invalid_argument("lfss_moment_law: need at least one exponent");
  for (std::size_t i = 0; i < exponents.size(); ++i) {
    if (exponents[i] < 0 || (i > 0 && exponents[i] <= exponents[i - 1])) {
      throw std::invalid_argument("lfss_moment_law: exponents must be nonnegative and strictly increasing");
    }
  }
  if (replicates < 2) throw std::invalid_argument("lfss_moment_law: need at least 2 replicates");
  if (shift < 1) throw std::invalid_argument("lfss_moment_law: shift must be >= 1");

  MomentLawReport rep;
  rep.replicates = replicates;
  rep.master_seed = master_seed;
  rep.heavy_tail_unstable = 2.0 * p >= cfg.alpha;
  if (rep.heavy_tail_unstable) {
    rep.notes.push_back("2p >= alpha: standard errors are indicative only");
  }

  const double H = cfg.hurst[0];
  auto w = increment_weights(cfg)[0];

  std::vector<std::int64_t> ns = {1};
  for (int e : exponents) {
    std::int64_t sz = detail::ipow(a, e);
    if (sz > 1) ns.push_back(sz);
  }
  auto kernels = partial_sum_kernels(w, ns);
  const std::size_t base_len = kernels.back().size();
  const auto off = static_cast<std::size_t>(shift * w.r);
  const StableParams noise{cfg.alpha, std::pow(w.h, 1.0 / cfg.alpha)};

  std::vector<std::vector<double>> draws(ns.size(), std::vector<double>(static_cast<std::size_t>(replicates)));
  std::vector<double> shifted(static_cast<std::size_t>(replicates));
  parallel_for(replicates, threads, [&](std::int64_t r) {
    Rng rng(master_seed, replicate_stream(stream, r) + "/noise-0");
    std::vector<double> eps(base_len + off);
    for (double& x : eps) x = sample_sas(noise, rng);
    const auto ur = static_cast<std::size_t>(r);
    for (std::size_t k = 0; k < kernels.size(); ++k) {
      NeumaierSum dot;
      for (std::size_t i = 0; i < kernels[k].size(); ++i) dot.add(kernels[k][i] * eps[i]);
      draws[k][ur] = dot.value();
    }
    NeumaierSum dot;  // the same top kernel against noise offset by shift cells
    for (std::size_t i = 0; i < base_len; ++i) dot.add(kernels.back()[i] * eps[i + off]);
    shifted[ur] = dot.value();
  });

  std::vector<double> abs_p(static_cast<std::size_t>(replicates));
  auto moment_at = [&](const std::vector<double>& xs) {
    for (std::size_t i = 0; i < xs.size(); ++i) abs_p[i] = std::pow(std::abs(xs[i]), p);
    return detail::mean_and_se(abs_p);
  };

  auto unit = moment_at(draws[0]);
  rep.c_hat = unit.mean;

  std::vector<double> log_means, log_es;
  // ns always starts with the unit block; exponent 0, when requested, reuses it
  std::size_t ki = exponents[0] == 0 ? 0 : 1;
  for (std::size_t ei = 0; ei < exponents.size(); ++ei, ++ki) {
    auto ms = moment_at(draws[ki]);
    MomentLawRow row;
    row.exponent = exponents[ei];
    row.size = ns[ki];
    row.mean_abs_p = ms.mean;
    row.std_error = ms.se;
    row.predicted = rep.c_hat * std::pow(static_cast<double>(a), p * H * static_cast<double>(exponents[ei]));
    rep.rows.push_back(row);
    log_means.push_back(std::log(ms.mean));
    log_es.push_back(static_cast<double>(exponents[ei]));
  }

  rep.slope_target = p * H * std::log(static_cast<double>(a));
  if (rep.rows.size() >= 2) {
    // least squares of log mean on the exponent
    double se_ = 0.0, sm = 0.0, see = 0.0, sem = 0.0;
    const auto m = static_cast<double>(log_es.size());
    for (std::size_t i = 0; i < log_es.size(); ++i) {
      se_ += log_es[i];
      sm += log_means[i];
      see += log_es[i] * log_es[i];
      sem += log_es[i] * log_means[i];
    }
    rep.slope = (m * sem - se_ * sm) / (m * see - se_ * se_);

    bool uniform = true;
    const int step = exponents[1] - exponents[0];
    for (std::size_t i = 1; i + 1 < exponents.size(); ++i) {
      if (exponents[i + 1] - exponents[i] != step) uniform = false;
    }
    if (uniform) {
      NeumaierSum lg;
      for (std::size_t i = 1; i < rep.rows.size(); ++i) {
        lg.add(std::log(rep.rows[i].mean_abs_p / rep.rows[i - 1].mean_abs_p));
      }
      rep.ratio_geomean = std::exp(lg.value() / static_cast<double>(rep.rows.size() - 1));
      rep.ratio_target = std::pow(static_cast<double>(a), p * H * static_cast<double>(step));
    } else {
      rep.notes.push_back("non-uniform exponent grid: consecutive-ratio summary skipped");
    }
  }

  // Stationarity spot check: the same block anchored `shift` cells later,
  // drawn from the same noise, must match in mean.
  std::vector<double> diff(static_cast<std::size_t>(replicates));
  for (std::size_t i = 0; i < diff.size(); ++i) {
    diff[i] = std::pow(std::abs(shifted[i]), p) - std::pow(std::abs(draws.back()[i]), p);
  }
  auto md = detail::mean_and_se(diff);
  rep.shift_gap = md.mean;
  rep.shift_se = md.se;
  rep.shift_within_tol = std::abs(md.mean) <= 2.0 * md.se;
  return rep;
}

// ---------------------------------------------------------------------------
// Lattice-indexed series with dyadic condensation.  Plain consecutive ratios
// of polynomially decaying terms sit at 1 and read as flat; grouping by
// max-norm shells 2^k <= |n| < 2^(k+1) turns polynomial decay into geometric
// block decay, which the ratio rule classifies correctly.

struct LatticeSeriesReport {
  double partial_sum = 0.0;
  std::vector<double> block_sums;  // dyadic shells by |n|_inf
  SeriesAssessment assessment;
  std::int64_t trunc = 0;
};

inline LatticeSeriesReport assess_lattice_series(int d, std::int64_t trunc,
                                                 const std::function<double(const MultiIndex&)>& term,
                                                 const VerdictRule& rule = {}) {
  if (d < 1) throw std::invalid_argument("assess_lattice_series: d must be >= 1");
  if (trunc < 2) throw std::invalid_argument("assess_lattice_series: truncation must be >= 2");
  double cost = 1.0;
  for (int j = 0; j < d; ++j) cost *= static_cast<double>(trunc);
  if (cost > 2e8) {
    throw std::invalid_argument("assess_lattice_series: " + fmt_int(trunc) + "^" + fmt_int(d) +
                                " terms is beyond the enumeration budget");
  }
  LatticeSeriesReport rep;
  rep.trunc = trunc;
  const auto nblocks = static_cast<std::size_t>(floor_log2(trunc) + 1);
  std::vector<NeumaierSum> blocks(nblocks);
  MultiIndex n(static_cast<std::size_t>(d), 1);
  while (true) {
    const double t = term(n);
    if (!std::isfinite(t)) {
      throw std::domain_error("assess_lattice_series: term at " + to_string(n) + " is not finite");
    }
    blocks[static_cast<std::size_t>(floor_log2(linf_norm(n)))].add(t);
    int j = d - 1;
    while (j >= 0 && n[static_cast<std::size_t>(j)] == trunc) {
      n[static_cast<std::size_t>(j)] = 1;
      --j;
    }
    if (j < 0) break;
    ++n[static_cast<std::size_t>(j)];
  }
  NeumaierSum total;
  for (const auto& b : blocks) {
    rep.block_sums.push_back(b.value());
    total.add(b.value());
  }
  rep.partial_sum = total.value();
  // The top shell is complete only when the truncation reaches 2^(k+1) - 1.
  const bool last_complete = floor_log2(trunc + 1) == floor_log2(trunc) + 1;
  rep.assessment = detail::assess_dyadic_blocks(rep.block_sums, last_complete, rule);
  return rep;
}

// ---------------------------------------------------------------------------
// Summability checks behind the quasi-stationary corollary.  The correlation
// bound f(i, j) is weighted by h(i, j), the product of per-axis tail sums
// T_s(k) = sum_{n >= k} a^n / phi_s(a^n)^2 evaluated at k = floor log_a of
// each lag.

struct QuasiStationaryReport {
  std::int64_t a = 2;
  int tail_exponent_cap = 60;
  std::int64_t lag_max = 256;
  int chain_cap = 8;
  std::vector<double> tail_axis1, tail_axis2;  // T_s(k) for k = 0..cap
  SeriesAssessment tail_axis1_assessment, tail_axis2_assessment;
  bool tails_converge = false;
  double D = 0.0;  // T_1(0) T_2(0)
  double fh_sum = 0.0;
  SeriesAssessment fh_assessment;
  double chain_lhs = 0.0;
  double chain_rhs_printed = 0.0;  // D f(0,0) plus the interior lags only
  double chain_rhs = 0.0;          // plus the boundary lags (i, 0) and (0, j)
  bool chain_holds = false;
  std::vector<std::string> notes;

  double h(std::int64_t i, std::int64_t j) const {
    if (i < 1 || j < 1) throw std::invalid_argument("QuasiStationaryReport::h: lags must be >= 1");
    auto ki = static_cast<std::size_t>(std::min<std::int64_t>(detail::floor_log_base(a, i), tail_exponent_cap));
    auto kj = static_cast<std::size_t>(std::min<std::int64_t>(detail::floor_log_base(a, j), tail_exponent_cap));
    return tail_axis1[ki] * tail_axis2[kj];
  }
};

inline QuasiStationaryReport check_quasi_stationary_condition(
    const std::function<double(std::int64_t, std::int64_t)>& corr_bound, const ScalingFunction& phi1,
    const ScalingFunction& phi2, std::int64_t a, std::int64_t lag_max = 256, int chain_cap = 8,
    const VerdictRule& rule = {}) {
  if (a < 2) throw std::invalid_argument("check_quasi_stationary_condition: a must be >= 2");
  if (lag_max < 2) throw std::invalid_argument("check_quasi_stationary_condition: lag_max must be >= 2");
  if (chain_cap < 1 || detail::ipow(a, chain_cap) > 4096) {
    throw std::invalid_argument("check_quasi_stationary_condition: chain cap out of range");
  }
  QuasiStationaryReport rep;
  rep.a = a;
  rep.lag_max = lag_max;
  rep.chain_cap = chain_cap;

  const int cap = rep.tail_exponent_cap;
  auto axis_tail = [&](const ScalingFunction& phi, std::vector<double>& tail, SeriesAssessment& assessment) {
    std::vector<double> terms(static_cast<std::size_t>(cap + 1));
    for (int n = 0; n <= cap; ++n) {
      const double x = std::pow(static_cast<double>(a), static_cast<double>(n));
      const double ph = phi(x);
      terms[static_cast<std::size_t>(n)] = x / (ph * ph);
    }
    assessment = assess_series(terms, rule);
    tail.assign(static_cast<std::size_t>(cap + 1), 0.0);
    NeumaierSum acc;
    for (int n = cap; n >= 0; --n) {
      acc.add(terms[static_cast<std::size_t>(n)]);
      tail[static_cast<std::size_t>(n)] = acc.value();
    }
  };
  axis_tail(phi1, rep.tail_axis1, rep.tail_axis1_assessment);
  axis_tail(phi2, rep.tail_axis2, rep.tail_axis2_assessment);
  rep.tails_converge = rep.tail_axis1_assessment.verdict == SeriesVerdict::Converges &&
                       rep.tail_axis2_assessment.verdict == SeriesVerdict::Converges;
  rep.D = rep.tail_axis1[0] * rep.tail_axis2[0];
  if (!rep.tails_converge) {
    rep.notes.push_back("an axis tail sum diverges: D and the weights h carry no meaning here");
  }

  {
    const auto nblocks = static_cast<std::size_t>(floor_log2(lag_max) + 1);
    std::vector<NeumaierSum> blocks(nblocks);
    for (std::int64_t i = 1; i <= lag_max; ++i) {
      for (std::int64_t j = 1; j <= lag_max; ++j) {
        const double fv = corr_bound(i, j);
        if (!(fv >= 0.0) || !std::isfinite(fv)) {
          throw std::domain_error("check_quasi_stationary_condition: correlation bound gave " + fmt_double(fv) +
                                  " at lag (" + fmt_int(i) + ", " + fmt_int(j) + ")");
        }
        blocks[static_cast<std::size_t>(floor_log2(std::max(i, j)))].add(fv * rep.h(i, j));
      }
    }
    std::vector<double> bl;
    NeumaierSum total;
    for (const auto& b : blocks) {
      bl.push_back(b.value());
      total.add(b.value());
    }
    rep.fh_sum = total.value();
    const bool last_complete = floor_log2(lag_max + 1) == floor_log2(lag_max) + 1;
    rep.fh_assessment = detail::assess_dyadic_blocks(bl, last_complete, rule);
  }

  // Finite chain comparison on [0, a^cap]^2: folding the double sum of
  // weighted prefix sums lag by lag needs the boundary terms f(i, 0) and
  // f(0, j); the two-sided display that keeps only interior lags undercounts
  // whenever f charges the axes, so both right sides are reported.
  {
    const std::int64_t P = detail::ipow(a, chain_cap);
    const auto np = static_cast<std::size_t>(P + 1);
    std::vector<double> pref(np * np);
    for (std::int64_t i = 0; i <= P; ++i) {
      NeumaierSum row;
      for (std::int64_t j = 0; j <= P; ++j) {
        row.add(corr_bound(i, j));
        const auto u = static_cast<std::size_t>(i) * np + static_cast<std::size_t>(j);
        pref[u] = row.value() + (i > 0 ? pref[u - np] : 0.0);
      }
    }
    NeumaierSum lhs;
    for (int nn = 0; nn <= chain_cap; ++nn) {
      const std::int64_t an = detail::ipow(a, nn);
      const double xn = static_cast<double>(an);
      const double w1 = xn / (phi1(xn) * phi1(xn));
      for (int mm = 0; mm <= chain_cap; ++mm) {
        const std::int64_t am = detail::ipow(a, mm);
        const double xm = static_cast<double>(am);
        const double w2 = xm / (phi2(xm) * phi2(xm));
        lhs.add(w1 * w2 * pref[static_cast<std::size_t>(an) * np + static_cast<std::size_t>(am)]);
      }
    }
    rep.chain_lhs = lhs.value();

    NeumaierSum interior;
    for (std::int64_t i = 1; i <= P; ++i) {
      for (std::int64_t j = 1; j <= P; ++j) interior.add(corr_bound(i, j) * rep.h(i, j));
    }
    rep.chain_rhs_printed = rep.D * corr_bound(0, 0) + interior.value();
    NeumaierSum boundary;
    for (std::int64_t i = 1; i <= P; ++i) {
      const auto ki = static_cast<std::size_t>(std::min<std::int64_t>(detail::floor_log_base(a, i), cap));
      boundary.add(corr_bound(i, 0) * rep.tail_axis1[ki] * rep.tail_axis2[0]);
      boundary.add(corr_bound(0, i) * rep.tail_axis1[0] * rep.tail_axis2[ki]);
    }
    rep.chain_rhs = rep.chain_rhs_printed + boundary.value();
    rep.chain_holds = rep.chain_rhs * (1.0 + 1e-12) + 1e-12 >= rep.chain_lhs;
    if (rep.chain_rhs_printed < rep.chain_lhs) {
      rep.notes.push_back("interior-only right side falls below the chained left side; the boundary lags are required");
    }
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Variance-weighted summability for orthogonal fields: the log-weighted
// series and the plain one that suffices under an anchored variance-ratio
// bound.  Both verdicts come from the same dyadic condensation.

struct OrthogonalConditionReport {
  LatticeSeriesReport log_weighted;  // sigma^2(n) prod_j (log(1 + n_j) / n_j)^2
  LatticeSeriesReport plain;         // sigma^2(n) / prod_j n_j^2
  bool verdicts_agree = false;
};

inline OrthogonalConditionReport check_orthogonal_conditions(
    const std::function<double(const MultiIndex&)>& variance_map, int d, std::int64_t trunc = 256,
    const VerdictRule& rule = {}) {
  if (d < 1) throw std::invalid_argument("check_orthogonal_conditions: d must be >= 1");
  OrthogonalConditionReport rep;
  auto guarded = [&](const MultiIndex& n) {
    const double v = variance_map(n);
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::domain_error("check_orthogonal_conditions: variance map gave " + fmt_double(v) + " at " +
                              to_string(n));
    }
    return v;
  };
  rep.log_weighted = assess_lattice_series(
      d, trunc,
      [&](const MultiIndex& n) {
        double w = 1.0;
        for (auto v : n) {
          const double lg = std::log(1.0 + static_cast<double>(v));
          w *= (lg * lg) / (static_cast<double>(v) * static_cast<double>(v));
        }
        return guarded(n) * w;
      },
      rule);
  rep.plain = assess_lattice_series(
      d, trunc,
      [&](const MultiIndex& n) {
        double w = 1.0;
        for (auto v : n) w /= static_cast<double>(v) * static_cast<double>(v);
        return guarded(n) * w;
      },
      rule);
  rep.verdicts_agree = rep.log_weighted.assessment.verdict == rep.plain.assessment.verdict;
  return rep;
}

// Largest probed ratio E S(m; 2^n)^2 / E S(0; 2^n)^2; equals 1 for variance
// profiles that do not drift with the anchor.
struct AnchoredVarianceRatio {
  double value = 0.0;
  double std_error = 0.0;  // delta-method propagation through the ratio
  MultiIndex argmax_anchor;
  int argmax_exponent = 0;
  std::int64_t replicates = 0;
};

inline AnchoredVarianceRatio estimate_anchored_variance_ratio(const FieldGenerator& gen,
                                                              const std::vector<int>& exponents,
                                                              const std::vector<MultiIndex>& anchors,
                                                              std::int64_t replicates, int threads = 1) {
  const int d = gen.d;
  if (exponents.empty()) throw std::invalid_argument("estimate_anchored_variance_ratio: need exponents");
  if (anchors.empty()) throw std::invalid_argument("estimate_anchored_variance_ratio: need anchors");
  if (replicates < 2) throw std::invalid_argument("estimate_anchored_variance_ratio: need at least 2 replicates");
  for (int e : exponents) {
    if (e < 0) throw std::invalid_argument("estimate_anchored_variance_ratio: exponents must be >= 0");
  }
  int e_max = 0;
  for (int e : exponents) e_max = std::max(e_max, e);
  const std::int64_t top = detail::ipow(2, e_max);
  MultiIndex extent = constant_index(d, top);
  for (const auto& m : anchors) {
    check_dim(m, d, "anchored variance ratio anchor");
    check_nonnegative(m, "anchored variance ratio anchor");
    for (int j = 0; j < d; ++j) {
      auto u = static_cast<std::size_t>(j);
      extent[u] = std::max(extent[u], m[u] + top);
    }
  }
  const MultiIndex zero = constant_index(d, 0);
  const MultiIndex origin = constant_index(d, 1);

  const auto reps = static_cast<std::size_t>(replicates);
  std::vector<std::vector<std::vector<double>>> sq(
      exponents.size(), std::vector<std::vector<double>>(anchors.size() + 1, std::vector<double>(reps)));
  parallel_for(replicates, threads, [&](std::int64_t r) {
    LatticeField f = gen.make(extent, origin, r, 1);
    PrefixSumTable t(f);
    const auto ur = static_cast<std::size_t>(r);
    for (std::size_t ei = 0; ei < exponents.size(); ++ei) {
      const MultiIndex sizes = constant_index(d, detail::ipow(2, exponents[ei]));
      const double s0 = rect_partial_sum(t, zero, sizes);
      sq[ei][0][ur] = s0 * s0;
      for (std::size_t ai = 0; ai < anchors.size(); ++ai) {
        const double s = rect_partial_sum(t, anchors[ai], sizes);
        sq[ei][ai + 1][ur] = s * s;
      }
    }
  });

  AnchoredVarianceRatio out;
  out.replicates = replicates;
  for (std::size_t ei = 0; ei < exponents.size(); ++ei) {
    auto base = detail::mean_and_se(sq[ei][0]);
    if (!(base.mean > 0.0)) continue;
    for (std::size_t ai = 0; ai < anchors.size(); ++ai) {
      auto ms = detail::mean_and_se(sq[ei][ai + 1]);
      const double ratio = ms.mean / base.mean;
      if (ratio > out.value) {
        out.value = ratio;
        const double ra = ms.se / ms.mean;
        const double rb = base.se / base.mean;
        out.std_error = ratio * std::sqrt(ra * ra + rb * rb);
        out.argmax_anchor = anchors[ai];
        out.argmax_exponent = exponents[ei];
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Quasi-orthogonality: a summable correlation profile rho plus per-axis
// growth conditions on the normalizers.  The log-weighted axis series is the
// classical requirement; the reciprocal-square series is the weaker one that
// suffices once rho is summable.

struct QuasiOrthogonalReport {
  double rho_sum = 0.0;
  SeriesAssessment rho_assessment;  // dyadic blocks by max(m, n) + 1
  std::vector<double> log_weight_axis_sums;    // per axis: sum log^2(k + 1) / lambda(k)^2
  std::vector<SeriesAssessment> log_weight_axis;
  bool log_weight_converges = false;
  std::vector<double> reciprocal_axis_sums;  // per axis: sum 1 / lambda(k)^2
  std::vector<SeriesAssessment> reciprocal_axis;
  bool reciprocal_converges = false;
  std::int64_t trunc = 0;
  std::vector<std::string> notes;
};

inline QuasiOrthogonalReport check_moricz_quasi_orthogonal(
    const std::function<double(std::int64_t, std::int64_t)>& rho, const std::vector<ScalingFunction>& lambdas,
    std::int64_t trunc = 4096, std::int64_t rho_trunc = 512, const VerdictRule& rule = {}) {
  if (lambdas.size() != 2) {
    throw std::invalid_argument("check_moricz_quasi_orthogonal: need one normalizer per axis (two axes)");
  }
  if (trunc < 2 || rho_trunc < 2) {
    throw std::invalid_argument("check_moricz_quasi_orthogonal: truncations must be >= 2");
  }
  QuasiOrthogonalReport rep;
  rep.trunc = trunc;

  {
    const auto nblocks = static_cast<std::size_t>(floor_log2(rho_trunc + 1) + 1);
    std::vector<NeumaierSum> blocks(nblocks);
    for (std::int64_t m = 0; m <= rho_trunc; ++m) {
      for (std::int64_t n = 0; n <= rho_trunc; ++n) {
        const double v = rho(m, n);
        if (!std::isfinite(v)) {
          throw std::domain_error("check_moricz_quasi_orthogonal: rho gave a non-finite value at (" +
                                  fmt_int(m) + ", " + fmt_int(n) + ")");
        }
        blocks[static_cast<std::size_t>(floor_log2(std::max(m, n) + 1))].add(std::abs(v));
      }
    }
    std::vector<double> bl;
    NeumaierSum total;
    for (const auto& b : blocks) {
      bl.push_back(b.value());
      total.add(b.value());
    }
    rep.rho_sum = total.value();
    // blocks are keyed by max(m, n) + 1, which runs up to rho_trunc + 1
    const bool last_complete = floor_log2(rho_trunc + 2) == floor_log2(rho_trunc + 1) + 1;
    rep.rho_assessment = detail::assess_dyadic_blocks(bl, last_complete, rule);
  }

  rep.log_weight_converges = true;
  rep.reciprocal_converges = true;
  for (const auto& lambda : lambdas) {
    auto logw = assess_lattice_series(
        1, trunc,
        [&](const MultiIndex& n) {
          const double x = static_cast<double>(n[0]);
          const double lg = std::log(x + 1.0);
          const double lam = lambda(x);
          return lg * lg / (lam * lam);
        },
        rule);
    rep.log_weight_axis_sums.push_back(logw.partial_sum);
    rep.log_weight_axis.push_back(logw.assessment);
    rep.log_weight_converges =
        rep.log_weight_converges && logw.assessment.verdict == SeriesVerdict::Converges;

    auto rec = assess_lattice_series(
        1, trunc,
        [&](const MultiIndex& n) {
          const double lam = lambda(static_cast<double>(n[0]));
          return 1.0 / (lam * lam);
        },
        rule);
    rep.reciprocal_axis_sums.push_back(rec.partial_sum);
    rep.reciprocal_axis.push_back(rec.assessment);
    rep.reciprocal_converges =
        rep.reciprocal_converges && rec.assessment.verdict == SeriesVerdict::Converges;
  }
  if (!rep.reciprocal_converges) {
    rep.notes.push_back("a reciprocal-square axis series diverges: the weaker normalizer condition fails");
  }
  return rep;
}

}  // namespace slln
