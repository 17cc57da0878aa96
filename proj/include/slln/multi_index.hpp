#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "slln/common.hpp"

namespace slln {

// A lattice point in Z^d.  Sum domains live on the nonnegative orthant; a
// handful of internal queries (prefix lookups one step below a box) use -1.
using MultiIndex = std::vector<std::int64_t>;

enum class Norm { L2, Linf };

inline std::string to_string(const MultiIndex& n) {
  std::string s = "(";
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (i) s += ",";
    s += fmt_int(n[i]);
  }
  s += ")";
  return s;
}

inline void check_dim(const MultiIndex& n, int d, const char* what) {
  if (static_cast<int>(n.size()) != d) {
    throw std::invalid_argument(std::string(what) + ": expected dimension " +
                                fmt_int(d) + ", got " + fmt_int(static_cast<std::int64_t>(n.size())));
  }
}

inline void check_nonnegative(const MultiIndex& n, const char* what) {
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (n[i] < 0) {
      throw std::out_of_range(std::string(what) + ": coordinate " + fmt_int(static_cast<std::int64_t>(i)) +
                              " is negative in " + to_string(n));
    }
  }
}

inline std::int64_t linf_norm(const MultiIndex& n) {
  std::int64_t m = 0;
  for (auto v : n) m = std::max(m, std::abs(v));
  return m;
}

inline std::int64_t l2_norm_sq(const MultiIndex& n) {
  std::int64_t s = 0;
  for (auto v : n) s += v * v;
  return s;
}

inline bool all_leq(const MultiIndex& a, const MultiIndex& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) return false;
  }
  return true;
}

inline MultiIndex add(const MultiIndex& a, const MultiIndex& b) {
  MultiIndex r(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
  return r;
}

inline MultiIndex constant_index(int d, std::int64_t v) {
  return MultiIndex(static_cast<std::size_t>(d), v);
}

inline std::int64_t box_volume(const MultiIndex& n) {
  std::int64_t p = 1;
  for (auto v : n) p *= v;
  return p;
}

// Closed ball of radius r about the origin, intersected with the nonnegative
// orthant.  Radius 0 is the empty set by convention; under Linf the ball of
// radius r >= 1 is the cube [0, floor(r)]^d.
struct Ball {
  int d = 1;
  double radius = 0.0;
  Norm norm = Norm::L2;
};

inline bool ball_contains(const Ball& b, const MultiIndex& k) {
  if (b.radius <= 0.0) return false;
  if (b.norm == Norm::Linf) {
    return static_cast<double>(linf_norm(k)) <= b.radius;
  }
  double r2 = b.radius * b.radius;
  return static_cast<double>(l2_norm_sq(k)) <= r2;
}

// All lattice points of the ball, in lexicographic order (first coordinate
// most significant).
inline std::vector<MultiIndex> enumerate_domain(const Ball& b) {
  if (b.d < 1 || b.d > 8) {
    throw std::invalid_argument("enumerate_domain: dimension must be in [1, 8], got " + fmt_int(b.d));
  }
  if (b.radius < 0.0) {
    throw std::invalid_argument("enumerate_domain: radius must be nonnegative, got " + fmt_double(b.radius));
  }
  std::vector<MultiIndex> out;
  if (b.radius <= 0.0) return out;
  std::int64_t rmax = static_cast<std::int64_t>(std::floor(b.radius));
  MultiIndex k(static_cast<std::size_t>(b.d), 0);
  while (true) {
    if (ball_contains(b, k)) out.push_back(k);
    int axis = b.d - 1;
    while (axis >= 0) {
      ++k[static_cast<std::size_t>(axis)];
      if (k[static_cast<std::size_t>(axis)] <= rmax) break;
      k[static_cast<std::size_t>(axis)] = 0;
      --axis;
    }
    if (axis < 0) break;
  }
  return out;
}

// Points with m < ||k|| <= m + n in the nonnegative orthant.  The strict
// lower bound drops the origin whenever m = 0, matching the shell bucketing
// used by the spherical sums.  n = 0 gives the empty annulus.
inline std::vector<MultiIndex> enumerate_annulus(int d, std::int64_t m, std::int64_t n, Norm norm) {
  if (m < 0 || n < 0) {
    throw std::invalid_argument("enumerate_annulus: radii must be nonnegative (m=" + fmt_int(m) +
                                ", n=" + fmt_int(n) + ")");
  }
  Ball outer{d, static_cast<double>(m + n), norm};
  std::vector<MultiIndex> out;
  for (auto& k : enumerate_domain(outer)) {
    bool inside_inner = norm == Norm::Linf ? linf_norm(k) <= m : l2_norm_sq(k) <= m * m;
    if (!inside_inner) out.push_back(std::move(k));
  }
  return out;
}

}  // namespace slln
