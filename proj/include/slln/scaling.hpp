#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "slln/common.hpp"

namespace slln {

// Normalizing functions for sum asymptotics.  Three concrete kinds cover the
// toolkit: pure powers x^beta, log-corrected powers (1 + x^H) log(1+x)^rho,
// and tabulated samples with log-linear interpolation.
class ScalingFunction {
 public:
  static ScalingFunction power(double beta) {
    if (!(beta > 0.0)) throw std::invalid_argument("ScalingFunction::power: beta must be positive");
    ScalingFunction f;
    f.kind_ = Kind::Power;
    f.a_ = beta;
    f.label_ = "power(" + fmt_double(beta) + ")";
    return f;
  }

  static ScalingFunction power_log(double H, double rho) {
    if (!(H > 0.0)) throw std::invalid_argument("ScalingFunction::power_log: H must be positive");
    if (rho < 0.0) throw std::invalid_argument("ScalingFunction::power_log: rho must be nonnegative");
    ScalingFunction f;
    f.kind_ = Kind::PowerLog;
    f.a_ = H;
    f.b_ = rho;
    f.label_ = "power_log(" + fmt_double(H) + "," + fmt_double(rho) + ")";
    return f;
  }

  // Samples (x_i, y_i) with x strictly increasing and y positive
  // nondecreasing; evaluation interpolates linearly in (log x, log y).
  static ScalingFunction table(std::vector<double> xs, std::vector<double> ys) {
    if (xs.size() != ys.size() || xs.size() < 2) {
      throw std::invalid_argument("ScalingFunction::table: need two or more samples");
    }
    for (std::size_t i = 0; i < xs.size(); ++i) {
      if (!(xs[i] > 0.0) || !(ys[i] > 0.0)) {
        throw std::invalid_argument("ScalingFunction::table: samples must be positive");
      }
      if (i > 0 && xs[i] <= xs[i - 1]) {
        throw std::invalid_argument("ScalingFunction::table: x samples must be strictly increasing");
      }
      if (i > 0 && ys[i] < ys[i - 1]) {
        throw std::invalid_argument("ScalingFunction::table: y samples must be nondecreasing");
      }
    }
    ScalingFunction f;
    f.kind_ = Kind::Table;
    f.xs_ = std::move(xs);
    f.ys_ = std::move(ys);
    f.label_ = "table[" + fmt_int(static_cast<std::int64_t>(f.xs_.size())) + "]";
    return f;
  }

  double operator()(double x) const {
    if (!(x >= 0.0)) throw std::domain_error("ScalingFunction: argument must be nonnegative, got " + fmt_double(x));
    switch (kind_) {
      case Kind::Power:
        return std::pow(x, a_);
      case Kind::PowerLog: {
        double lg = std::log1p(x);
        return (1.0 + std::pow(x, a_)) * std::pow(lg, b_);
      }
      case Kind::Table: {
        if (x <= xs_.front()) return ys_.front();
        if (x >= xs_.back()) {
          // extend with the last segment's log-log slope
          std::size_t i = xs_.size() - 1;
          double slope = (std::log(ys_[i]) - std::log(ys_[i - 1])) / (std::log(xs_[i]) - std::log(xs_[i - 1]));
          return std::exp(std::log(ys_[i]) + slope * (std::log(x) - std::log(xs_[i])));
        }
        auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
        std::size_t i = static_cast<std::size_t>(it - xs_.begin());
        double t = (std::log(x) - std::log(xs_[i - 1])) / (std::log(xs_[i]) - std::log(xs_[i - 1]));
        return std::exp((1.0 - t) * std::log(ys_[i - 1]) + t * std::log(ys_[i]));
      }
    }
    return 0.0;
  }

  const std::string& label() const { return label_; }

 private:
  enum class Kind { Power, PowerLog, Table };
  Kind kind_ = Kind::Power;
  double a_ = 1.0;
  double b_ = 0.0;
  std::vector<double> xs_, ys_;
  std::string label_;
};

struct DoublingBounds {
  double c_low = 0.0;   // inf of f(2x)/f(x) over the sampled grid
  double c_high = 0.0;  // sup of f(2x)/f(x)
  double x_min = 0.0;
  double x_max = 0.0;
  std::int64_t grid_points = 0;
};

// Estimates two-sided doubling bounds on a geometric grid over
// [x_min, x_max/2].  These are sampled bounds, not proofs; the grid and range
// are recorded alongside the values.  Throws when f is non-monotone on the
// grid or some doubling ratio is <= 1.
inline DoublingBounds doubling_bounds(const ScalingFunction& f, double x_min, double x_max,
                                      std::int64_t grid_points = 1024) {
  if (!(x_min > 0.0) || !(x_max > 2.0 * x_min)) {
    throw std::invalid_argument("doubling_bounds: need 0 < x_min and x_max > 2*x_min");
  }
  if (grid_points < 1000) grid_points = 1000;
  DoublingBounds b;
  b.x_min = x_min;
  b.x_max = x_max;
  b.grid_points = grid_points;
  double lo = std::log(x_min), hi = std::log(x_max / 2.0);
  double prev_val = -1.0;
  b.c_low = std::numeric_limits<double>::infinity();
  b.c_high = 0.0;
  for (std::int64_t i = 0; i < grid_points; ++i) {
    double x = std::exp(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(grid_points - 1));
    double fx = f(x);
    double f2x = f(2.0 * x);
    if (!(fx > 0.0) || f2x < fx || fx < prev_val) {
      throw std::domain_error("doubling_bounds: not doubling-admissible at x = " + fmt_double(x) +
                              " (" + f.label() + " non-monotone or nonpositive there)");
    }
    prev_val = fx;
    double ratio = f2x / fx;
    if (!(ratio > 1.0)) {
      throw std::domain_error("doubling_bounds: not doubling-admissible at x = " + fmt_double(x) +
                              " (doubling ratio " + fmt_double(ratio) + " <= 1)");
    }
    b.c_low = std::min(b.c_low, ratio);
    b.c_high = std::max(b.c_high, ratio);
  }
  return b;
}

inline std::int64_t floor_log2(std::int64_t a) {
  std::int64_t k = 0;
  while ((std::int64_t{1} << (k + 1)) <= a) ++k;
  return k;
}

struct BaseSelection {
  std::optional<std::int64_t> a;  // smallest admissible block base, if any
  std::int64_t best_a = 0;        // closest candidate when none qualifies
  double best_margin = -std::numeric_limits<double>::infinity();  // lhs - rhs at best_a
};

// Strict comparison with a relative guard: values within 1e-12 of each other
// count as equal, so a boundary case that lands on equality only after
// rounding (e.g. squaring 2^{3/2}) does not slip through as admissible.
inline bool strictly_greater(double lhs, double rhs) { return lhs > rhs * (1.0 + 1e-12); }

// Scans integer bases a in [2, a_max] for the smallest one with
// c_low^{floor(log2 a)} > max(a, a * 2^{p-1}), strictly.
inline BaseSelection select_base(double c_low, double p, std::int64_t a_max = 64) {
  if (!(c_low > 0.0) || !(p > 0.0)) {
    throw std::invalid_argument("select_base: need c_low > 0 and p > 0");
  }
  if (a_max < 2) throw std::invalid_argument("select_base: a_max must be >= 2");
  BaseSelection sel;
  for (std::int64_t a = 2; a <= a_max; ++a) {
    double lhs = std::pow(c_low, static_cast<double>(floor_log2(a)));
    double rhs = std::max(static_cast<double>(a), static_cast<double>(a) * std::pow(2.0, p - 1.0));
    double margin = lhs - rhs;
    if (margin > sel.best_margin) {
      sel.best_margin = margin;
      sel.best_a = a;
    }
    if (strictly_greater(lhs, rhs)) {
      sel.a = a;
      return sel;
    }
  }
  return sel;
}

struct RecursionConstants {
  double c = 0.0;     // contraction factor (1 + (a-1) 2^{p-1}) / c_low^{p floor(log2 a)}
  double D = 0.0;     // driving coefficient 2^{p-1} (sum_{j=1}^{a-1} j^{p-1} + (a-1))
  double k = 0.0;     // p <= 1 contraction a / c_low^{p floor(log2 a)}
};

inline RecursionConstants recursion_constants(std::int64_t a, double p, double c_low) {
  if (a < 2) throw std::invalid_argument("recursion_constants: a must be >= 2");
  if (!(p > 0.0) || !(c_low > 1.0)) {
    throw std::invalid_argument("recursion_constants: need p > 0 and c_low > 1");
  }
  RecursionConstants rc;
  double denom = std::pow(c_low, p * static_cast<double>(floor_log2(a)));
  double two_pm1 = std::pow(2.0, p - 1.0);
  rc.c = (1.0 + static_cast<double>(a - 1) * two_pm1) / denom;
  rc.k = static_cast<double>(a) / denom;
  NeumaierSum s;
  for (std::int64_t j = 1; j <= a - 1; ++j) s.add(std::pow(static_cast<double>(j), p - 1.0));
  rc.D = two_pm1 * (s.value() + static_cast<double>(a - 1));
  if (!(rc.c < 1.0)) {
    throw std::domain_error("recursion_constants: base plan inadmissible, contraction factor c = " +
                            fmt_double(rc.c) + " >= 1 for a = " + fmt_int(a) + ", p = " + fmt_double(p) +
                            ", c_low = " + fmt_double(c_low));
  }
  return rc;
}

// A block base paired with the moment order and per-axis doubling lower
// bounds.  Admissibility records whether the strict selection inequality
// holds on every axis; constants are computed regardless so survey runs can
// report them.
struct BasePlan {
  std::int64_t a = 2;
  double p = 1.0;
  std::vector<double> c_low;               // one per axis (or a single entry)
  bool admissible = false;
  std::string failed_inequality;           // empty when admissible
  std::vector<RecursionConstants> consts;  // one per axis, valid when contraction < 1
};

inline BasePlan make_base_plan(std::int64_t a, double p, std::vector<double> c_lows,
                               bool require_admissible) {
  if (a < 2) throw std::invalid_argument("make_base_plan: a must be >= 2");
  if (!(p > 0.0)) throw std::invalid_argument("make_base_plan: p must be positive");
  BasePlan plan;
  plan.a = a;
  plan.p = p;
  plan.c_low = std::move(c_lows);
  plan.admissible = true;
  for (double cl : plan.c_low) {
    double lhs = std::pow(cl, static_cast<double>(floor_log2(a)));
    double rhs = std::max(static_cast<double>(a), static_cast<double>(a) * std::pow(2.0, p - 1.0));
    bool contraction_ok = true;
    RecursionConstants rc{};
    try {
      rc = recursion_constants(a, p, cl);
    } catch (const std::exception&) {
      contraction_ok = false;
    }
    plan.consts.push_back(rc);
    if (!strictly_greater(lhs, rhs) || !contraction_ok) {
      plan.admissible = false;
      plan.failed_inequality = "c_low^floor(log2 a) > max(a, a 2^(p-1)) fails: " + fmt_double(lhs) +
                               " <= " + fmt_double(rhs) + " at a = " + fmt_int(a) + ", p = " + fmt_double(p) +
                               ", c_low = " + fmt_double(cl) +
                               (contraction_ok ? "" : " (contraction factor >= 1)");
    }
  }
  if (require_admissible && !plan.admissible) {
    throw std::domain_error("make_base_plan: " + plan.failed_inequality);
  }
  return plan;
}

}  // namespace slln
