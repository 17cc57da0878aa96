#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "slln/common.hpp"
#include "slln/fft.hpp"
#include "slln/lattice_field.hpp"
#include "slln/multi_index.hpp"
#include "slln/prefix_sum.hpp"
#include "slln/rng.hpp"
#include "slln/stable.hpp"

namespace slln {

// x_+^beta with the convention x_+^0 = 1 for x > 0 and 0 otherwise, so the
// exponent-zero kernel degenerates to an indicator instead of a constant.
inline double pow_plus(double x, double beta) {
  if (x <= 0.0) return 0.0;
  if (beta == 0.0) return 1.0;
  return std::pow(x, beta);
}

// Moving-average field on the unit lattice: each increment is a weighted sum
// of i.i.d. symmetric alpha-stable cell noises, with per-axis weights taken
// from the fractional kernel (1 - s)_+^beta - (-s)_+^beta, beta = H - 1/alpha.
struct LfssConfig {
  int d = 1;
  double alpha = 1.5;
  std::vector<double> hurst;      // one exponent per axis, each in (0, 1)
  double kappa = 0.0;             // overall kernel constant; 0 selects the
                                  // unit-scale calibration per axis
  double grid_step = 1.0 / 16.0;  // h = 1/r for an integer r >= 1
  int64_t trunc_window = 16;      // kernel kept on [-window, 1] per axis
  double trunc_delta = 0.02;      // allowed alpha-mass loss per axis
};

inline void validate(const LfssConfig& cfg) {
  if (cfg.d < 1 || cfg.d > 4) {
    throw std::invalid_argument("LfssConfig: d must be in [1, 4], got " + fmt_int(cfg.d));
  }
  if (!(cfg.alpha > 0.0) || !(cfg.alpha <= 2.0)) {
    throw std::invalid_argument("LfssConfig: alpha must be in (0, 2], got " + fmt_double(cfg.alpha));
  }
  if (static_cast<int>(cfg.hurst.size()) != cfg.d) {
    throw std::invalid_argument("LfssConfig: hurst needs one entry per axis");
  }
  for (int j = 0; j < cfg.d; ++j) {
    double hst = cfg.hurst[static_cast<std::size_t>(j)];
    if (!(hst > 0.0) || !(hst < 1.0)) {
      throw std::invalid_argument("LfssConfig: hurst[" + fmt_int(j) + "] must be in (0, 1), got " + fmt_double(hst));
    }
    if (!(hst - 1.0 / cfg.alpha > -1.0)) {
      throw std::invalid_argument("LfssConfig: hurst[" + fmt_int(j) + "] - 1/alpha must exceed -1 for a locally integrable kernel");
    }
  }
  if (!(cfg.kappa >= 0.0)) {
    throw std::invalid_argument("LfssConfig: kappa must be positive (or 0 for automatic calibration)");
  }
  double rd = 1.0 / cfg.grid_step;
  int64_t r = std::llround(rd);
  if (!(cfg.grid_step > 0.0) || r < 1 || std::abs(rd - static_cast<double>(r)) > 1e-9) {
    throw std::invalid_argument("LfssConfig: grid_step must equal 1/r for an integer r >= 1, got " + fmt_double(cfg.grid_step));
  }
  if (cfg.trunc_window < 1) {
    throw std::invalid_argument("LfssConfig: trunc_window must be >= 1, got " + fmt_int(cfg.trunc_window));
  }
  if (!(cfg.trunc_delta > 0.0) || !(cfg.trunc_delta < 1.0)) {
    throw std::invalid_argument("LfssConfig: trunc_delta must be in (0, 1), got " + fmt_double(cfg.trunc_delta));
  }
}

// The block-normalization experiments require every hurst exponent above
// 1/alpha and a strictly heavy-tailed index; plain field simulation does not.
inline void require_block_regime(const LfssConfig& cfg) {
  validate(cfg);
  if (!(cfg.alpha > 1.0) || !(cfg.alpha < 2.0)) {
    throw std::invalid_argument("block-normalization experiments need alpha in (1, 2), got " + fmt_double(cfg.alpha));
  }
  for (int j = 0; j < cfg.d; ++j) {
    if (!(cfg.hurst[static_cast<std::size_t>(j)] > 1.0 / cfg.alpha)) {
      throw std::invalid_argument("block-normalization experiments need hurst[" + fmt_int(j) +
                                  "] > 1/alpha, got " + fmt_double(cfg.hurst[static_cast<std::size_t>(j)]));
    }
  }
}

namespace detail {

template <typename F>
double simpson_rec(const F& f, double a, double b, double fa, double fm, double fb,
                   double whole, double tol, int depth) {
  double m = 0.5 * (a + b);
  double lm = 0.5 * (a + m);
  double rm = 0.5 * (m + b);
  double flm = f(lm);
  double frm = f(rm);
  double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

template <typename F>
double integrate(const F& f, double a, double b, double tol) {
  double fa = f(a);
  double fb = f(b);
  double m = 0.5 * (a + b);
  double fm = f(m);
  double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return simpson_rec(f, a, b, fa, fm, fb, whole, tol, 42);
}

}  // namespace detail

// alpha-norm of the unit-increment kernel raised to alpha:
//   I = int |(1-s)_+^beta - (-s)_+^beta|^alpha ds
//     = 1/(alpha H) + int_0^inf |(1+u)^beta - u^beta|^alpha du.
// The half-line part is integrated with an endpoint-taming power substitution
// on (0, 1], in log coordinates on [1, U], and closed by the two-term
// asymptotic tail beyond U.
inline double kernel_alpha_norm_integral(double hurst, double alpha) {
  double beta = hurst - 1.0 / alpha;
  if (std::abs(beta) < 1e-14) return 1.0;  // indicator kernel
  double head = 1.0 / (alpha * hurst);
  auto g = [&](double u) {
    double diff = pow_plus(1.0 + u, beta) - pow_plus(u, beta);
    return std::pow(std::abs(diff), alpha);
  };
  double m_sub = beta > 0.0 ? std::max(1.0, 2.0 / beta) : std::max(1.0, 2.0 / (alpha * hurst));
  auto g_near = [&](double v) {
    double u = std::pow(v, m_sub);
    return g(u) * m_sub * std::pow(v, m_sub - 1.0);
  };
  double j_near = detail::integrate(g_near, 0.0, 1.0, 1e-12);
  double cut = 1e6;
  auto g_log = [&](double x) {
    double u = std::exp(x);
    return g(u) * u;
  };
  double j_mid = detail::integrate(g_log, 0.0, std::log(cut), 1e-12);
  double q = alpha * (1.0 - beta) - 1.0;  // = alpha (1 - H), positive
  double lead = std::pow(std::abs(beta), alpha);
  double j_tail = lead * (std::pow(cut, -q) / q +
                          0.5 * alpha * (beta - 1.0) * std::pow(cut, -q - 1.0) / (q + 1.0));
  return head + j_near + j_mid + j_tail;
}

// Per-axis calibration giving the unit increment a unit scale parameter.
inline double kappa1(double hurst, double alpha) {
  return std::pow(kernel_alpha_norm_integral(hurst, alpha), -1.0 / alpha);
}

// Separable calibration for a full exponent vector.
inline double normalize_kappa(const std::vector<double>& hurst, double alpha) {
  double out = 1.0;
  for (double hst : hurst) out *= kappa1(hst, alpha);
  return out;
}

// Kernel constant the config resolves to: explicit when set, otherwise the
// product of per-axis calibrations.
inline double resolved_kappa(const LfssConfig& cfg) {
  return cfg.kappa > 0.0 ? cfg.kappa : normalize_kappa(cfg.hurst, cfg.alpha);
}

// Continuous-parameter kernel, mostly useful for spot checks against the
// discretized weights.
inline double kernel_g(const std::vector<double>& t, const std::vector<double>& s,
                       const LfssConfig& cfg) {
  validate(cfg);
  if (t.size() != cfg.hurst.size() || s.size() != cfg.hurst.size()) {
    throw std::invalid_argument("kernel_g: t and s must have one entry per axis");
  }
  double out = resolved_kappa(cfg);
  for (std::size_t j = 0; j < cfg.hurst.size(); ++j) {
    double beta = cfg.hurst[j] - 1.0 / cfg.alpha;
    out *= pow_plus(t[j] - s[j], beta) - pow_plus(-s[j], beta);
  }
  return out;
}

// Fraction of the kernel's alpha-mass outside [-window, 1], from the same
// asymptotic tail expansion.  Zero for the indicator kernel.
inline double truncation_tail_fraction(double hurst, double alpha, int64_t window) {
  double beta = hurst - 1.0 / alpha;
  if (std::abs(beta) < 1e-14) return 0.0;
  double q = alpha * (1.0 - beta) - 1.0;
  double lead = std::pow(std::abs(beta), alpha);
  double lw = static_cast<double>(window);
  double tail = lead * (std::pow(lw, -q) / q +
                        0.5 * alpha * (beta - 1.0) * std::pow(lw, -q - 1.0) / (q + 1.0));
  double frac = tail / kernel_alpha_norm_integral(hurst, alpha);
  return std::max(0.0, frac);
}

// Smallest window whose estimated alpha-mass loss stays at or below `delta`.
inline int64_t choose_truncation_window(double hurst, double alpha, double delta) {
  if (!(delta > 0.0) || !(delta < 1.0)) {
    throw std::invalid_argument("choose_truncation_window: delta must be in (0, 1), got " + fmt_double(delta));
  }
  double beta = hurst - 1.0 / alpha;
  if (std::abs(beta) < 1e-14) return 1;
  double q = alpha * (1.0 - beta) - 1.0;
  double lead = std::pow(std::abs(beta), alpha);
  double norm = kernel_alpha_norm_integral(hurst, alpha);
  double lw = std::pow(lead / (q * delta * norm), 1.0 / q);
  int64_t window = std::max<int64_t>(1, static_cast<int64_t>(std::ceil(lw)));
  while (truncation_tail_fraction(hurst, alpha, window) > delta) window *= 2;
  return window;
}

// Cell averages of the unit-increment kernel over cells [mh, (m+1)h),
// m in [-window*r, r-1], from the exact antiderivative of each branch.
struct AxisWeights {
  double hurst = 0.5;
  double alpha = 2.0;
  double beta = 0.0;
  double h = 1.0;
  int64_t r = 1;
  int64_t m_min = 0;
  double kappa = 1.0;          // constant folded into c
  double tail_fraction = 0.0;  // estimated alpha-mass dropped by the window
  std::vector<double> c;       // c[i] is the average on cell m_min + i
};

inline AxisWeights make_axis_weights(double hurst, double alpha, double grid_step,
                                     int64_t window, double kappa_factor, double delta) {
  AxisWeights w;
  w.hurst = hurst;
  w.alpha = alpha;
  w.beta = hurst - 1.0 / alpha;
  w.r = std::llround(1.0 / grid_step);
  w.h = 1.0 / static_cast<double>(w.r);
  w.m_min = -window * w.r;
  w.tail_fraction = truncation_tail_fraction(hurst, alpha, window);
  if (w.tail_fraction > delta) {
    throw std::runtime_error("increment weights: window " + fmt_int(window) + " discards alpha-mass fraction " +
                             fmt_double(w.tail_fraction) + " > allowed " + fmt_double(delta) +
                             "; raise trunc_window to at least " +
                             fmt_int(choose_truncation_window(hurst, alpha, delta)));
  }
  double bp1 = w.beta + 1.0;
  auto prim = [&](double x) { return pow_plus(x, bp1) / bp1; };
  int64_t count = w.r - w.m_min;
  w.c.resize(static_cast<std::size_t>(count));
  for (int64_t i = 0; i < count; ++i) {
    int64_t m = w.m_min + i;
    double a = static_cast<double>(m) * w.h;
    double b = static_cast<double>(m + 1) * w.h;
    double cell = (prim(1.0 - a) - prim(1.0 - b)) - (prim(-a) - prim(-b));
    w.c[static_cast<std::size_t>(i)] = cell / w.h;
  }
  w.kappa = kappa_factor;
  if (w.kappa != 1.0) {
    for (double& x : w.c) x *= w.kappa;
  }
  return w;
}

// Per-axis weight tables for a config.  An explicit overall kappa is folded
// into the first axis; automatic calibration applies kappa1 per axis.
inline std::vector<AxisWeights> increment_weights(const LfssConfig& cfg) {
  validate(cfg);
  std::vector<AxisWeights> out;
  out.reserve(static_cast<std::size_t>(cfg.d));
  for (int j = 0; j < cfg.d; ++j) {
    double factor;
    if (cfg.kappa > 0.0) {
      factor = j == 0 ? cfg.kappa : 1.0;
    } else {
      factor = kappa1(cfg.hurst[static_cast<std::size_t>(j)], cfg.alpha);
    }
    out.push_back(make_axis_weights(cfg.hurst[static_cast<std::size_t>(j)], cfg.alpha,
                                    cfg.grid_step, cfg.trunc_window, factor, cfg.trunc_delta));
  }
  return out;
}

// Discrete alpha-norm of one axis, sum |c|^alpha h; approaches kappa^alpha
// times the kernel integral as h -> 0 and the window grows.
inline double discrete_alpha_norm(const AxisWeights& w) {
  NeumaierSum s;
  for (double x : w.c) s.add(std::pow(std::abs(x), w.alpha));
  return s.value() * w.h;
}

// Increment field xi(n) = sum_m prod_j c_j(m_j) eps(m + n r) on [0, shape)^d,
// noise i.i.d. symmetric alpha-stable with scale h^{d/alpha}.  Axes are
// contracted one at a time; raw noise is produced per row from a dedicated
// stream and never materialized as a full tensor.  Every output value is a
// fixed-order compensated sum, so thread count cannot change results.
inline LatticeField simulate_increment_field(const LfssConfig& cfg, const MultiIndex& shape,
                                             uint64_t master_seed, const std::string& stream_name,
                                             int threads) {
  validate(cfg);
  if (static_cast<int>(shape.size()) != cfg.d) {
    throw std::invalid_argument("simulate_increment_field: shape rank mismatch");
  }
  for (int j = 0; j < cfg.d; ++j) {
    if (shape[static_cast<std::size_t>(j)] < 1) {
      throw std::invalid_argument("simulate_increment_field: shape[" + fmt_int(j) + "] must be >= 1");
    }
  }
  std::vector<AxisWeights> ws = increment_weights(cfg);
  const int64_t r = ws[0].r;
  const double noise_scale = std::pow(ws[0].h, static_cast<double>(cfg.d) / cfg.alpha);
  const StableParams noise{cfg.alpha, noise_scale};

  // Raw extent per axis: cells m + n r for m in [m_min, r-1], n in [0, N).
  std::vector<int64_t> dims(ws.size());
  for (std::size_t j = 0; j < ws.size(); ++j) {
    dims[j] = (cfg.trunc_window + shape[j]) * r;
  }

  // Pass 1 contracts the last axis while generating its noise row by row.
  int64_t rows = 1;
  for (std::size_t j = 0; j + 1 < dims.size(); ++j) rows *= dims[j];
  const std::size_t last = ws.size() - 1;
  const int64_t n_last = shape[last];
  std::vector<double> cur(static_cast<std::size_t>(rows * n_last));
  parallel_for(rows, threads, [&](int64_t row) {
    Rng rng(master_seed, stream_name + "/noise-" + fmt_int(row));
    std::vector<double> noise_row(static_cast<std::size_t>(dims[last]));
    for (double& x : noise_row) x = sample_sas(noise, rng);
    std::vector<double> out = correlate_strided(ws[last].c, noise_row, r, n_last);
    std::copy(out.begin(), out.end(), cur.begin() + static_cast<std::size_t>(row * n_last));
  });
  dims[last] = n_last;

  // Remaining passes contract one axis each over the stored buffer.
  for (int axis = static_cast<int>(ws.size()) - 2; axis >= 0; --axis) {
    int64_t outer = 1;
    for (int j = 0; j < axis; ++j) outer *= dims[static_cast<std::size_t>(j)];
    int64_t inner = 1;
    for (std::size_t j = static_cast<std::size_t>(axis) + 1; j < dims.size(); ++j) inner *= dims[j];
    const int64_t len = dims[static_cast<std::size_t>(axis)];
    const int64_t n_axis = shape[static_cast<std::size_t>(axis)];
    std::vector<double> next(static_cast<std::size_t>(outer * n_axis * inner));
    parallel_for(outer * inner, threads, [&](int64_t line) {
      const int64_t o = line / inner;
      const int64_t i = line % inner;
      std::vector<double> lane(static_cast<std::size_t>(len));
      for (int64_t k = 0; k < len; ++k) {
        lane[static_cast<std::size_t>(k)] = cur[static_cast<std::size_t>((o * len + k) * inner + i)];
      }
      std::vector<double> out = correlate_strided(ws[static_cast<std::size_t>(axis)].c, lane, r, n_axis);
      for (int64_t k = 0; k < n_axis; ++k) {
        next[static_cast<std::size_t>((o * n_axis + k) * inner + i)] = out[static_cast<std::size_t>(k)];
      }
    });
    cur.swap(next);
    dims[static_cast<std::size_t>(axis)] = n_axis;
  }

  LatticeField field(shape, MultiIndex(shape.size(), 0), GeneratorId::FractionalStableIncrements, master_seed);
  field.values() = std::move(cur);
  return field;
}

// Sheet values are cumulative sums of the increment field: z(t) sums xi over
// [0, t), so z vanishes on the coordinate hyperplanes.
class Sheet {
 public:
  explicit Sheet(LatticeField xi) : xi_(std::move(xi)), table_(xi_) {}

  const LatticeField& increments() const { return xi_; }
  const PrefixSumTable& table() const { return table_; }

  double at(const MultiIndex& t) const {
    MultiIndex m(t.size());
    for (std::size_t j = 0; j < t.size(); ++j) {
      if (t[j] < 0 || t[j] > xi_.shape()[j]) {
        throw std::out_of_range("Sheet::at: coordinate " + fmt_int(static_cast<int64_t>(j)) + " out of range");
      }
      m[j] = t[j] - 1;
    }
    return table_.cumulative(m);
  }

  // Sum of xi over the box [m, m+n).
  double rect_increment(const MultiIndex& m, const MultiIndex& n) const {
    MultiIndex lo(m.size());
    for (std::size_t j = 0; j < m.size(); ++j) lo[j] = m[j] - 1;
    return rect_partial_sum(table_, lo, n);
  }

 private:
  LatticeField xi_;
  PrefixSumTable table_;
};

// Aggregated one-dimensional kernels: A_n(i) = sum_{k<n} c(i - k r) satisfies
// sum_{k<n} xi(k) = sum_i A_n(i) eps(i), so anchored partial sums can be drawn
// without building the field.  Entries are returned for each requested n
// (strictly increasing), each vector covering i in [m_min, n r - 1].
inline std::vector<std::vector<double>> partial_sum_kernels(const AxisWeights& w,
                                                            const std::vector<int64_t>& ns) {
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (ns[i] < 1 || (i > 0 && ns[i] <= ns[i - 1])) {
      throw std::invalid_argument("partial_sum_kernels: ns must be strictly increasing and positive");
    }
  }
  std::vector<std::vector<double>> out;
  if (ns.empty()) return out;
  const int64_t n_max = ns.back();
  std::vector<double> acc(static_cast<std::size_t>(n_max * w.r - w.m_min), 0.0);
  int64_t k = 0;
  for (int64_t n : ns) {
    for (; k < n; ++k) {
      const std::size_t off = static_cast<std::size_t>(k * w.r);
      for (std::size_t i = 0; i < w.c.size(); ++i) acc[off + i] += w.c[i];
    }
    out.emplace_back(acc.begin(), acc.begin() + static_cast<std::ptrdiff_t>(n * w.r - w.m_min));
  }
  return out;
}

// Scale parameter of sum_i A(i) eps(i) when eps has scale h^{1/alpha}.
inline double kernel_scale(const std::vector<double>& kernel, double alpha, double h) {
  NeumaierSum s;
  for (double x : kernel) s.add(std::pow(std::abs(x), alpha));
  return std::pow(s.value() * h, 1.0 / alpha);
}

// Draws of the anchored partial sums sum_{k<n} xi(k) for each tracked n,
// one noise stream per replicate.  Result is indexed [n_index][replicate].
// The stream name and cell order match the d=1 layout of
// simulate_increment_field, so at equal seeds both paths consume the same
// noise and the sums agree up to reassociation.
inline std::vector<std::vector<double>> sample_partial_sums_1d(
    const AxisWeights& w, double alpha, const std::vector<int64_t>& ns, int64_t replicates,
    uint64_t master_seed, const std::string& stream_prefix, int threads) {
  std::vector<std::vector<double>> kernels = partial_sum_kernels(w, ns);
  const std::size_t noise_len = kernels.empty() ? 0 : kernels.back().size();
  const StableParams noise{alpha, std::pow(w.h, 1.0 / alpha)};
  std::vector<std::vector<double>> out(kernels.size(),
                                       std::vector<double>(static_cast<std::size_t>(replicates)));
  parallel_for(replicates, threads, [&](int64_t rep) {
    Rng rng(master_seed, replicate_stream(stream_prefix, rep) + "/noise-0");
    std::vector<double> eps(noise_len);
    for (double& x : eps) x = sample_sas(noise, rng);
    for (std::size_t ki = 0; ki < kernels.size(); ++ki) {
      NeumaierSum s;
      const std::vector<double>& kern = kernels[ki];
      for (std::size_t i = 0; i < kern.size(); ++i) s.add(kern[i] * eps[i]);
      out[ki][static_cast<std::size_t>(rep)] = s.value();
    }
  });
  return out;
}

// Two-sample check that the law of z(n_scaled) matches factor * z(n_base):
// compare empirical ranks of sample A at the quantiles of the rescaled sample
// B.  Both samples come from the same discretization, so grid and truncation
// bias largely cancel; a wrong factor shifts every rank.  The band is four
// two-sample binomial standard errors.
struct OperatorScalingCheck {
  double factor = 1.0;
  std::vector<double> quantiles;
  std::vector<double> rank_errors;
  std::vector<double> bands;
  bool pass = false;
};

inline OperatorScalingCheck check_operator_scaling_1d(
    const AxisWeights& w, double alpha, int64_t n_base, int64_t n_scaled, double factor,
    int64_t replicates, const std::vector<double>& quantiles, uint64_t master_seed,
    const std::string& stream_prefix, int threads) {
  if (n_base < 1 || n_scaled <= n_base) {
    throw std::invalid_argument("check_operator_scaling_1d: need 1 <= n_base < n_scaled");
  }
  std::vector<std::vector<double>> a =
      sample_partial_sums_1d(w, alpha, {n_scaled}, replicates, master_seed, stream_prefix + "/a", threads);
  std::vector<std::vector<double>> b =
      sample_partial_sums_1d(w, alpha, {n_base}, replicates, master_seed, stream_prefix + "/b", threads);
  std::vector<double> xs = std::move(a[0]);
  std::vector<double> ys = std::move(b[0]);
  for (double& y : ys) y *= factor;
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  OperatorScalingCheck res;
  res.factor = factor;
  res.quantiles = quantiles;
  res.pass = true;
  const double rn = static_cast<double>(replicates);
  for (double q : quantiles) {
    if (!(q > 0.0) || !(q < 1.0)) {
      throw std::invalid_argument("check_operator_scaling_1d: quantiles must lie in (0, 1)");
    }
    std::size_t idx = static_cast<std::size_t>(std::min<double>(rn - 1.0, std::floor(q * rn)));
    double cut = ys[idx];
    std::size_t count = static_cast<std::size_t>(std::upper_bound(xs.begin(), xs.end(), cut) - xs.begin());
    double err = std::abs(static_cast<double>(count) / rn - q);
    double band = 4.0 * std::sqrt(2.0 * q * (1.0 - q) / rn);
    res.rank_errors.push_back(err);
    res.bands.push_back(band);
    if (err > band) res.pass = false;
  }
  return res;
}

}  // namespace slln
