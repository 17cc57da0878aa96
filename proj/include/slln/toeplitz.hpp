#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <vector>

#include "slln/common.hpp"
#include "slln/lattice_field.hpp"
#include "slln/multi_index.hpp"
#include "slln/prefix_sum.hpp"
#include "slln/scaling.hpp"

namespace slln {

// Block-averaging weights on the exponent lattice:
//
//   w(n; k) = prod_j (phi_j(a^{k_j+1}) - phi_j(a^{k_j})) / phi_j(a^{n_j+1})
//
// for k <= n componentwise, zero otherwise.  Row sums telescope per axis to
// prod_j (1 - phi_j(1) / phi_j(a^{n_j+1})), hence never exceed 1, and each
// fixed-k weight vanishes as |n| grows.
class ToeplitzWeights {
 public:
  ToeplitzWeights(std::vector<ScalingFunction> phis, std::int64_t a)
      : phis_(std::move(phis)), a_(a) {
    if (a_ < 2) throw std::invalid_argument("ToeplitzWeights: a must be >= 2");
    if (phis_.empty()) throw std::invalid_argument("ToeplitzWeights: need at least one scaling function");
  }

  int d() const { return static_cast<int>(phis_.size()); }
  std::int64_t a() const { return a_; }

  double phi_at_power(int axis, std::int64_t e) const {
    return phis_[static_cast<std::size_t>(axis)](std::pow(static_cast<double>(a_), static_cast<double>(e)));
  }

  double weight(const MultiIndex& n, const MultiIndex& k) const {
    check_dim(n, d(), "ToeplitzWeights n");
    check_dim(k, d(), "ToeplitzWeights k");
    check_nonnegative(n, "ToeplitzWeights n");
    check_nonnegative(k, "ToeplitzWeights k");
    if (!all_leq(k, n)) return 0.0;
    double w = 1.0;
    for (int j = 0; j < d(); ++j) {
      auto u = static_cast<std::size_t>(j);
      double inc = phi_at_power(j, k[u] + 1) - phi_at_power(j, k[u]);
      double denom = phi_at_power(j, n[u] + 1);
      if (!(denom > 0.0)) {
        throw std::domain_error("ToeplitzWeights: phi_" + fmt_int(j) + " nonpositive at a^" + fmt_int(n[u] + 1));
      }
      if (inc < 0.0) {
        throw std::domain_error("ToeplitzWeights: phi_" + fmt_int(j) + " decreasing between a^" + fmt_int(k[u]) +
                                " and a^" + fmt_int(k[u] + 1));
      }
      w *= inc / denom;
    }
    return w;
  }

  double row_sum(const MultiIndex& n) const {
    check_dim(n, d(), "ToeplitzWeights n");
    double s = 1.0;
    for (int j = 0; j < d(); ++j) {
      auto u = static_cast<std::size_t>(j);
      NeumaierSum acc;
      double denom = phi_at_power(j, n[u] + 1);
      for (std::int64_t k = 0; k <= n[u]; ++k) {
        acc.add(phi_at_power(j, k + 1) - phi_at_power(j, k));
      }
      s *= acc.value() / denom;
    }
    return s;
  }

 private:
  std::vector<ScalingFunction> phis_;
  std::int64_t a_;
};

struct ToeplitzTransformResult {
  MultiIndex grid_max;                  // transform computed for m <= grid_max
  std::vector<double> t;                // t(m), row-major over the grid
  std::vector<std::int64_t> tail_levels;  // |m| thresholds N for the diagnostic
  std::vector<double> tail_sup;         // max over |m| >= N of |t(m)|
};

// t(m) = sum_{k <= m} w(m; k) s(k).  The weighted partials share a prefix
// table of g(k) = (per-axis increments product) * s(k), so the whole grid
// costs one table build plus one query per m.
inline ToeplitzTransformResult toeplitz_transform(const ToeplitzWeights& w,
                                                  const std::function<double(const MultiIndex&)>& s,
                                                  const MultiIndex& grid_max) {
  check_dim(grid_max, w.d(), "toeplitz_transform grid_max");
  check_nonnegative(grid_max, "toeplitz_transform grid_max");
  int d = w.d();
  MultiIndex shape(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) shape[static_cast<std::size_t>(i)] = grid_max[static_cast<std::size_t>(i)] + 1;
  LatticeField g(shape, constant_index(d, 0), GeneratorId::Custom, 0);
  MultiIndex k(static_cast<std::size_t>(d), 0);
  for (std::int64_t idx = 0; idx < g.size(); ++idx) {
    double inc = 1.0;
    for (int j = 0; j < d; ++j) {
      auto u = static_cast<std::size_t>(j);
      inc *= w.phi_at_power(j, k[u] + 1) - w.phi_at_power(j, k[u]);
    }
    g.values()[static_cast<std::size_t>(idx)] = inc * s(k);
    int axis = d - 1;
    while (axis >= 0) {
      auto u = static_cast<std::size_t>(axis);
      ++k[u];
      if (k[u] <= grid_max[u]) break;
      k[u] = 0;
      --axis;
    }
  }
  PrefixSumTable table(g);

  ToeplitzTransformResult res;
  res.grid_max = grid_max;
  res.t.resize(static_cast<std::size_t>(g.size()));
  MultiIndex m(static_cast<std::size_t>(d), 0);
  for (std::int64_t idx = 0; idx < g.size(); ++idx) {
    double denom = 1.0;
    for (int j = 0; j < d; ++j) denom *= w.phi_at_power(j, m[static_cast<std::size_t>(j)] + 1);
    res.t[static_cast<std::size_t>(idx)] = table.cumulative(m) / denom;
    int axis = d - 1;
    while (axis >= 0) {
      auto u = static_cast<std::size_t>(axis);
      ++m[u];
      if (m[u] <= grid_max[u]) break;
      m[u] = 0;
      --axis;
    }
  }

  std::int64_t max_level = 0;
  for (auto v : grid_max) max_level = std::max(max_level, v);
  for (std::int64_t lvl = 0; lvl <= max_level; lvl = (lvl == 0 ? 1 : lvl * 2)) {
    res.tail_levels.push_back(lvl);
    double sup = 0.0;
    MultiIndex q(static_cast<std::size_t>(d), 0);
    for (std::int64_t idx = 0; idx < g.size(); ++idx) {
      if (linf_norm(q) >= lvl) sup = std::max(sup, std::abs(res.t[static_cast<std::size_t>(idx)]));
      int axis = d - 1;
      while (axis >= 0) {
        auto u = static_cast<std::size_t>(axis);
        ++q[u];
        if (q[u] <= grid_max[u]) break;
        q[u] = 0;
        --axis;
      }
    }
    res.tail_sup.push_back(sup);
  }
  return res;
}

}  // namespace slln
