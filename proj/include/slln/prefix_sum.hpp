#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "slln/common.hpp"
#include "slln/lattice_field.hpp"
#include "slln/multi_index.hpp"

namespace slln {

// Summed-area table over a field box.  Entry at relative index r holds the
// sum of field values over [origin, origin + r] inclusive.  Rectangle queries
// combine 2^d corners with alternating signs.
//
// Lines are accumulated with compensated summation, so query error stays near
// eps times the accumulated absolute mass of the enclosing box even on
// million-entry tables.
class PrefixSumTable {
 public:
  explicit PrefixSumTable(const LatticeField& f)
      : d_(f.d()), shape_(f.shape()), origin_(f.origin()), cum_(f.values()) {
    strides_.assign(shape_.size(), 1);
    for (int i = d_ - 2; i >= 0; --i) {
      strides_[static_cast<std::size_t>(i)] =
          strides_[static_cast<std::size_t>(i + 1)] * shape_[static_cast<std::size_t>(i + 1)];
    }
    for (int axis = d_ - 1; axis >= 0; --axis) cumsum_axis(axis);
  }

  int d() const { return d_; }
  const MultiIndex& shape() const { return shape_; }
  const MultiIndex& origin() const { return origin_; }

  // Cumulative sum over [origin, abs] inclusive; zero when any coordinate of
  // abs lies below the origin.  abs must not exceed the box on any axis.
  double cumulative(const MultiIndex& abs) const {
    std::int64_t idx = 0;
    for (int i = 0; i < d_; ++i) {
      auto u = static_cast<std::size_t>(i);
      std::int64_t rel = abs[u] - origin_[u];
      if (rel < -1 || rel >= shape_[u]) {
        throw std::out_of_range("PrefixSumTable: coordinate " + fmt_int(i) + " of " + to_string(abs) +
                                " outside queryable range [origin-1, origin+shape) with origin " +
                                to_string(origin_) + ", shape " + to_string(shape_));
      }
      if (rel < 0) return 0.0;
      idx += rel * strides_[u];
    }
    return cum_[static_cast<std::size_t>(idx)];
  }

 private:
  void cumsum_axis(int axis) {
    auto a = static_cast<std::size_t>(axis);
    std::int64_t len = shape_[a];
    std::int64_t stride = strides_[a];
    std::int64_t total = static_cast<std::int64_t>(cum_.size());
    std::int64_t block = stride * len;
    for (std::int64_t base = 0; base < total; base += block) {
      for (std::int64_t lane = 0; lane < stride; ++lane) {
        NeumaierSum acc;
        std::int64_t p = base + lane;
        for (std::int64_t i = 0; i < len; ++i, p += stride) {
          acc.add(cum_[static_cast<std::size_t>(p)]);
          cum_[static_cast<std::size_t>(p)] = acc.value();
        }
      }
    }
  }

  int d_;
  MultiIndex shape_;
  MultiIndex origin_;
  std::vector<std::int64_t> strides_;
  std::vector<double> cum_;
};

// Sum of field values over the half-open rectangle (m, m + n], each n_i >= 1.
// m may sit one step below the box on any axis.
inline double rect_partial_sum(const PrefixSumTable& t, const MultiIndex& m, const MultiIndex& n) {
  check_dim(m, t.d(), "rect_partial_sum m");
  check_dim(n, t.d(), "rect_partial_sum n");
  for (int i = 0; i < t.d(); ++i) {
    auto u = static_cast<std::size_t>(i);
    if (n[u] < 1) {
      throw std::invalid_argument("rect_partial_sum: side " + fmt_int(i) + " of n must be >= 1, got " +
                                  fmt_int(n[u]));
    }
    if (m[u] < t.origin()[u] - 1 || m[u] + n[u] > t.origin()[u] + t.shape()[u] - 1) {
      throw std::out_of_range("rect_partial_sum: coordinate " + fmt_int(i) + " of rectangle (" +
                              to_string(m) + ", m+n] with n " + to_string(n) + " outside field box");
    }
  }
  int d = t.d();
  double total = 0.0;
  MultiIndex corner(static_cast<std::size_t>(d));
  for (std::uint32_t mask = 0; mask < (1u << d); ++mask) {
    int ones = 0;
    for (int i = 0; i < d; ++i) {
      auto u = static_cast<std::size_t>(i);
      if (mask & (1u << i)) {
        corner[u] = m[u] + n[u];
        ++ones;
      } else {
        corner[u] = m[u];
      }
    }
    double sign = ((d - ones) % 2 == 0) ? 1.0 : -1.0;
    total += sign * t.cumulative(corner);
  }
  return total;
}

// Direct enumeration reference for rect_partial_sum.  Kept in the library so
// the CLI can cross-check small boxes on demand; tests rely on it heavily.
inline double rect_partial_sum_direct(const LatticeField& f, const MultiIndex& m, const MultiIndex& n) {
  int d = f.d();
  NeumaierSum acc;
  MultiIndex k(static_cast<std::size_t>(d));
  for (int i = 0; i < d; ++i) k[static_cast<std::size_t>(i)] = m[static_cast<std::size_t>(i)] + 1;
  while (true) {
    acc.add(f.at(k));
    int axis = d - 1;
    while (axis >= 0) {
      auto a = static_cast<std::size_t>(axis);
      ++k[a];
      if (k[a] <= m[a] + n[a]) break;
      k[a] = m[a] + 1;
      --axis;
    }
    if (axis < 0) break;
  }
  return acc.value();
}

// M_s(m; n): maximum of |S(m; k_1..k_s, n_{s+1}..n_d)| over 1 <= k_j <= n_j
// for the first s axes.  s = 0 degenerates to |S(m; n)|.  One inclusion-
// exclusion query per grid point of the swept axes.
inline double maximal_sum(const PrefixSumTable& t, const MultiIndex& m, const MultiIndex& n, int s) {
  check_dim(m, t.d(), "maximal_sum m");
  check_dim(n, t.d(), "maximal_sum n");
  if (s < 0 || s > t.d()) {
    throw std::invalid_argument("maximal_sum: s must be in [0, d], got " + fmt_int(s));
  }
  MultiIndex k = n;
  for (int i = 0; i < s; ++i) k[static_cast<std::size_t>(i)] = 1;
  double best = 0.0;
  bool first = true;
  while (true) {
    double v = std::abs(rect_partial_sum(t, m, k));
    if (first || v > best) best = v;
    first = false;
    int axis = s - 1;
    while (axis >= 0) {
      auto a = static_cast<std::size_t>(axis);
      ++k[a];
      if (k[a] <= n[a]) break;
      k[a] = 1;
      --axis;
    }
    if (axis < 0) break;
  }
  return best;
}

// --- Sums over ball-shaped domains -----------------------------------------
//
// S(m; n) = sum over Q_{m+n} \ Q_m.  Points are bucketed by the smallest
// integer k >= 1 with ||p|| <= m + k, which lets one sweep produce S(m; k)
// and the running maximum for every k up to n.  Radii and norms compare in
// exact integer arithmetic.

namespace detail {

inline std::int64_t shell_of_point(const MultiIndex& p, std::int64_t m, Norm norm) {
  if (norm == Norm::Linf) {
    std::int64_t v = linf_norm(p);
    return v <= m ? 0 : v - m;
  }
  std::int64_t nsq = l2_norm_sq(p);
  if (nsq <= m * m) return 0;
  auto r = static_cast<std::int64_t>(std::ceil(std::sqrt(static_cast<double>(nsq))));
  while (r > 0 && (r - 1) * (r - 1) >= nsq) --r;  // smallest r with r*r >= nsq
  while (r * r < nsq) ++r;
  std::int64_t k = r - m;
  return k < 1 ? 1 : k;
}

}  // namespace detail

// Per-shell sums for k = 1..n relative to inner radius m; entry [k-1] holds
// the sum over Q_{m+k} \ Q_{m+k-1}.
inline std::vector<double> spherical_shell_sums(const LatticeField& f, std::int64_t m, std::int64_t n,
                                                Norm norm) {
  if (m < 0 || n < 1) {
    throw std::invalid_argument("spherical_shell_sums: need m >= 0 and n >= 1, got m=" + fmt_int(m) +
                                ", n=" + fmt_int(n));
  }
  std::vector<NeumaierSum> shells(static_cast<std::size_t>(n));
  Ball outer{f.d(), static_cast<double>(m + n), norm};
  for (auto& p : enumerate_domain(outer)) {
    std::int64_t k = detail::shell_of_point(p, m, norm);
    if (k >= 1 && k <= n) shells[static_cast<std::size_t>(k - 1)].add(f.at(p));
  }
  std::vector<double> out(static_cast<std::size_t>(n));
  for (std::int64_t k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = shells[static_cast<std::size_t>(k)].value();
  return out;
}

inline double spherical_partial_sum(const LatticeField& f, std::int64_t m, std::int64_t n, Norm norm) {
  if (n == 0) return 0.0;
  auto shells = spherical_shell_sums(f, m, n, norm);
  NeumaierSum acc;
  for (double s : shells) acc.add(s);
  return acc.value();
}

struct RunningMaxResult {
  std::vector<double> partial;  // S(m; k), k = 1..n
  std::vector<double> running_max;  // max_{j <= k} |S(m; j)|
};

inline RunningMaxResult spherical_running_max(const LatticeField& f, std::int64_t m, std::int64_t n,
                                              Norm norm) {
  auto shells = spherical_shell_sums(f, m, n, norm);
  RunningMaxResult r;
  r.partial.resize(shells.size());
  r.running_max.resize(shells.size());
  NeumaierSum acc;
  double best = 0.0;
  for (std::size_t k = 0; k < shells.size(); ++k) {
    acc.add(shells[k]);
    r.partial[k] = acc.value();
    best = std::max(best, std::abs(r.partial[k]));
    r.running_max[k] = best;
  }
  return r;
}

}  // namespace slln
