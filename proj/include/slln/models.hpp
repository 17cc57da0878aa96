#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "slln/common.hpp"
#include "slln/lattice_field.hpp"
#include "slln/lfss.hpp"
#include "slln/multi_index.hpp"
#include "slln/rng.hpp"
#include "slln/stable.hpp"

namespace slln {

enum class ModelKind { Iid, Orthogonal, QuasiStationary };
enum class NoiseLaw { Gaussian, Stable };

// Covariance-level model of a random field. The three kinds cover the
// corollary checkers: i.i.d. (Gaussian or SaS), orthogonal Gaussians with a
// prescribed variance map, and a unit-variance field whose correlations at
// lag n are bounded by a known f(n).
struct CovarianceModel {
  ModelKind kind = ModelKind::Iid;

  // iid only.
  NoiseLaw law = NoiseLaw::Gaussian;
  double alpha = 2.0;  // stable index when law == Stable
  double sigma = 1.0;  // Gaussian std dev / stable scale

  // orthogonal only: sigma^2 as a function of the absolute lattice point.
  std::function<double(const MultiIndex&)> variance_map;

  // quasi-stationary only: per-axis AR(1) coefficient. The field is the
  // product of independent stationary unit-variance AR(1) sequences, one per
  // axis, so corr at lag n is exactly ar_coeff^(n_1+...+n_d).
  double ar_coeff = 0.5;
};

inline void validate(const CovarianceModel& m) {
  switch (m.kind) {
    case ModelKind::Iid:
      if (m.sigma < 0.0) throw std::invalid_argument("CovarianceModel: sigma must be >= 0");
      if (m.law == NoiseLaw::Stable && !(m.alpha > 0.0 && m.alpha <= 2.0)) {
        throw std::invalid_argument("CovarianceModel: alpha must lie in (0, 2]");
      }
      break;
    case ModelKind::Orthogonal:
      if (!m.variance_map) throw std::invalid_argument("CovarianceModel: orthogonal kind needs a variance map");
      break;
    case ModelKind::QuasiStationary:
      if (!(std::abs(m.ar_coeff) < 1.0)) {
        throw std::invalid_argument("CovarianceModel: quasi-stationary construction needs |ar_coeff| < 1 "
                                    "(covariance not positive-definite otherwise)");
      }
      break;
  }
}

// Correlation bound achieved by the quasi-stationary construction:
// f(n) = |r|^{n_1+...+n_d}, with f(0) = 1.
inline double achieved_corr_bound(const CovarianceModel& m, const MultiIndex& lag) {
  if (m.kind != ModelKind::QuasiStationary) {
    throw std::invalid_argument("achieved_corr_bound: only defined for quasi-stationary models");
  }
  std::int64_t total = 0;
  for (auto v : lag) {
    if (v < 0) throw std::invalid_argument("achieved_corr_bound: lag must be nonnegative");
    total += v;
  }
  return std::pow(std::abs(m.ar_coeff), static_cast<double>(total));
}

namespace detail {

// Row decomposition: rows iterate over all axes but the last, the last axis
// is contiguous in memory.
inline std::pair<std::int64_t, std::int64_t> row_layout(const MultiIndex& shape) {
  std::int64_t rows = 1;
  for (std::size_t j = 0; j + 1 < shape.size(); ++j) rows *= shape[j];
  return {rows, shape[shape.size() - 1]};
}

// Absolute multi-index of the first point of a row (origin 0).
inline MultiIndex row_start(const MultiIndex& shape, std::int64_t row) {
  MultiIndex p(shape.size(), 0);
  for (int j = static_cast<int>(shape.size()) - 2; j >= 0; --j) {
    auto u = static_cast<std::size_t>(j);
    p[u] = row % shape[u];
    row /= shape[u];
  }
  return p;
}

}  // namespace detail

// Draws one field on the box [origin, origin + shape). Each row along the
// last axis gets its own named stream, so output is identical for every
// thread budget. The variance map sees absolute coordinates; the noise
// layout itself is anchored to the box, not to absolute position.
inline LatticeField generate_model_field(const CovarianceModel& model, const MultiIndex& shape,
                                         const MultiIndex& origin, std::uint64_t master_seed,
                                         const std::string& stream_name, int threads = 1) {
  validate(model);
  if (shape.empty()) throw std::invalid_argument("generate_model_field: empty shape");
  const int d = static_cast<int>(shape.size());
  check_dim(origin, d, "generate_model_field origin");
  GeneratorId gen = GeneratorId::Custom;
  switch (model.kind) {
    case ModelKind::Iid:
      gen = (model.law == NoiseLaw::Stable) ? GeneratorId::IidStable : GeneratorId::IidGaussian;
      break;
    case ModelKind::Orthogonal:
      gen = GeneratorId::OrthogonalGaussian;
      break;
    case ModelKind::QuasiStationary:
      gen = GeneratorId::QuasiStationaryAr;
      break;
  }
  LatticeField f(shape, origin, gen, master_seed);
  auto [rows, row_len] = detail::row_layout(shape);

  if (model.kind == ModelKind::QuasiStationary) {
    // Per-axis stationary AR(1) sequences with unit variance:
    // g(0) = w_0, g(k) = r g(k-1) + sqrt(1-r^2) w_k. The field is their
    // tensor product, filled deterministically from the precomputed axes.
    const double r = model.ar_coeff;
    const double innov = std::sqrt(1.0 - r * r);
    std::vector<std::vector<double>> axis_seq(static_cast<std::size_t>(d));
    for (int j = 0; j < d; ++j) {
      Rng rng(master_seed, stream_name + "/axis-" + fmt_int(j));
      auto& g = axis_seq[static_cast<std::size_t>(j)];
      g.resize(static_cast<std::size_t>(shape[static_cast<std::size_t>(j)]));
      g[0] = rng.normal();
      for (std::size_t k = 1; k < g.size(); ++k) g[k] = r * g[k - 1] + innov * rng.normal();
    }
    parallel_for(rows, threads, [&](std::int64_t row) {
      MultiIndex p = detail::row_start(shape, row);
      double head = 1.0;
      for (int j = 0; j + 1 < d; ++j) {
        head *= axis_seq[static_cast<std::size_t>(j)][static_cast<std::size_t>(p[static_cast<std::size_t>(j)])];
      }
      const auto& last = axis_seq[static_cast<std::size_t>(d - 1)];
      double* out = f.values().data() + row * row_len;
      for (std::int64_t i = 0; i < row_len; ++i) out[i] = head * last[static_cast<std::size_t>(i)];
    });
    return f;
  }

  parallel_for(rows, threads, [&](std::int64_t row) {
    Rng rng(master_seed, stream_name + "/noise-" + fmt_int(row));
    double* out = f.values().data() + row * row_len;
    if (model.kind == ModelKind::Iid) {
      if (model.law == NoiseLaw::Stable) {
        const StableParams sp{model.alpha, model.sigma};
        for (std::int64_t i = 0; i < row_len; ++i) out[i] = sample_sas(sp, rng);
      } else {
        for (std::int64_t i = 0; i < row_len; ++i) out[i] = model.sigma * rng.normal();
      }
    } else {
      MultiIndex p = add(detail::row_start(shape, row), origin);
      auto last = static_cast<std::size_t>(d - 1);
      for (std::int64_t i = 0; i < row_len; ++i) {
        p[last] = origin[last] + i;
        double v = model.variance_map(p);
        if (!(v >= 0.0) || !std::isfinite(v)) {
          throw std::runtime_error("generate_model_field: variance map gave " + fmt_double(v) + " at " +
                                   to_string(p) + "; not a valid covariance");
        }
        out[i] = std::sqrt(v) * rng.normal();
      }
    }
  });
  return f;
}

inline LatticeField generate_model_field(const CovarianceModel& model, const MultiIndex& shape,
                                         std::uint64_t master_seed, const std::string& stream_name,
                                         int threads = 1) {
  return generate_model_field(model, shape, constant_index(static_cast<int>(shape.size()), 0), master_seed,
                              stream_name, threads);
}

// A reusable recipe for drawing independent replicate fields. Replicate r of
// generator "name" uses stream prefix "name/replicate-r"; every stream below
// that prefix is derived from the same master seed, so (seed, label, r)
// fully determines the field regardless of thread budget.
struct FieldGenerator {
  std::string label = "field";
  int d = 1;
  bool stationary = false;
  std::uint64_t master_seed = 1;
  std::optional<CovarianceModel> model;
  std::optional<LfssConfig> lfss;

  LatticeField make(const MultiIndex& shape, const MultiIndex& origin, std::int64_t replicate,
                    int threads = 1) const {
    check_dim(shape, d, "FieldGenerator shape");
    check_dim(origin, d, "FieldGenerator origin");
    const std::string stream = replicate_stream(label, replicate);
    if (lfss) {
      LatticeField f = simulate_increment_field(*lfss, shape, master_seed, stream, threads);
      f.rebase(origin);
      return f;
    }
    if (model) return generate_model_field(*model, shape, origin, master_seed, stream, threads);
    return LatticeField(shape, origin, GeneratorId::Zero, master_seed);
  }

  // The origin is always explicit.  A scalar-replicate convenience overload
  // would let a braced single-element origin silently convert to the
  // replicate number instead.
};

inline FieldGenerator zero_generator(int d) {
  FieldGenerator g;
  g.label = "zero";
  g.d = d;
  g.stationary = true;
  return g;
}

inline FieldGenerator iid_gaussian_generator(int d, double sigma, std::uint64_t seed,
                                             std::string label = "iid-gaussian") {
  FieldGenerator g;
  g.label = std::move(label);
  g.d = d;
  g.stationary = true;
  g.master_seed = seed;
  CovarianceModel m;
  m.kind = ModelKind::Iid;
  m.law = NoiseLaw::Gaussian;
  m.sigma = sigma;
  g.model = m;
  return g;
}

inline FieldGenerator iid_stable_generator(int d, double alpha, double sigma, std::uint64_t seed,
                                           std::string label = "iid-stable") {
  FieldGenerator g;
  g.label = std::move(label);
  g.d = d;
  g.stationary = true;
  g.master_seed = seed;
  CovarianceModel m;
  m.kind = ModelKind::Iid;
  m.law = NoiseLaw::Stable;
  m.alpha = alpha;
  m.sigma = sigma;
  g.model = m;
  return g;
}

inline FieldGenerator orthogonal_generator(int d, std::function<double(const MultiIndex&)> variance_map,
                                           std::uint64_t seed, std::string label = "orthogonal") {
  FieldGenerator g;
  g.label = std::move(label);
  g.d = d;
  g.stationary = false;
  g.master_seed = seed;
  CovarianceModel m;
  m.kind = ModelKind::Orthogonal;
  m.variance_map = std::move(variance_map);
  g.model = m;
  return g;
}

inline FieldGenerator quasi_stationary_generator(int d, double ar_coeff, std::uint64_t seed,
                                                 std::string label = "quasi-stationary") {
  FieldGenerator g;
  g.label = std::move(label);
  g.d = d;
  g.stationary = true;
  g.master_seed = seed;
  CovarianceModel m;
  m.kind = ModelKind::QuasiStationary;
  m.ar_coeff = ar_coeff;
  g.model = m;
  return g;
}

inline FieldGenerator lfss_generator(const LfssConfig& cfg, std::uint64_t seed, std::string label = "lfss") {
  validate(cfg);
  FieldGenerator g;
  g.label = std::move(label);
  g.d = cfg.d;
  g.stationary = true;  // stationary increments by construction
  g.master_seed = seed;
  g.lfss = cfg;
  return g;
}

}  // namespace slln
