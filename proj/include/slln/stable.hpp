#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "slln/common.hpp"
#include "slln/rng.hpp"

namespace slln {

// Symmetric alpha-stable draws with characteristic function
// exp(-|scale * theta|^alpha), 0 < alpha <= 2.
//
// alpha = 2 reduces to a centered Gaussian with variance 2 scale^2 and
// alpha = 1 to a Cauchy with quartiles at +-scale.  The general case uses the
// trigonometric construction sin(aU)/cos(U)^{1/a} * (cos((1-a)U)/W)^{(1-a)/a}
// with U uniform on (-pi/2, pi/2) and W unit exponential.
struct StableParams {
  double alpha = 2.0;
  double scale = 1.0;
};

inline void validate(const StableParams& p) {
  if (!(p.alpha > 0.0) || !(p.alpha <= 2.0)) {
    throw std::invalid_argument("StableParams: alpha must be in (0, 2], got " + fmt_double(p.alpha));
  }
  if (!(p.scale >= 0.0)) {
    throw std::invalid_argument("StableParams: scale must be nonnegative, got " + fmt_double(p.scale));
  }
}

inline double sample_sas(const StableParams& p, Rng& rng) {
  constexpr double kPi = 3.14159265358979323846264338327950288;
  double u = kPi * (rng.uniform_open() - 0.5);  // (-pi/2, pi/2)
  if (p.alpha == 2.0) {
    double w = rng.exponential();
    return p.scale * 2.0 * std::sqrt(w) * std::sin(u);
  }
  if (p.alpha == 1.0) {
    return p.scale * std::tan(u);
  }
  double w = rng.exponential();
  if (w < 1e-300) w = 1e-300;
  double au = p.alpha * u;
  double x = std::sin(au) / std::pow(std::cos(u), 1.0 / p.alpha) *
             std::pow(std::cos(u - au) / w, (1.0 - p.alpha) / p.alpha);
  return p.scale * x;
}

// Empirical characteristic function of a sample at one frequency; symmetric
// laws make the cosine average sufficient.
inline double ecf_cos(const std::vector<double>& xs, double theta) {
  NeumaierSum s;
  for (double x : xs) s.add(std::cos(theta * x));
  return s.value() / static_cast<double>(xs.size());
}

inline double sas_cf(const StableParams& p, double theta) {
  return std::exp(-std::pow(std::abs(p.scale * theta), p.alpha));
}

}  // namespace slln
