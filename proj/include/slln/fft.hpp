#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "slln/common.hpp"

namespace slln {

// Fixed-path radix-2 transform.  The evaluation order never depends on input
// data or machine load, so repeated runs produce bit-identical output; that
// property is load-bearing for the reproducibility checks, which compare
// formatted doubles across thread counts.
inline void fft_radix2(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n == 0) return;
  if ((n & (n - 1)) != 0) {
    throw std::invalid_argument("fft_radix2: length must be a power of two, got " + fmt_int(static_cast<int64_t>(n)));
  }
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  constexpr double kTwoPi = 6.28318530717958647692528676655900577;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    double ang = kTwoPi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
    std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        std::complex<double> u = a[i + k];
        std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
  if (inverse) {
    for (auto& x : a) x /= static_cast<double>(n);
  }
}

inline std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// out[t] = sum_m w[m] * noise[m + t*stride] for t in [0, count).
// The direct loop is O(count * |w|); the transform route pads both sequences
// to a common power of two and reads off every stride-th lag of the
// cross-correlation.
inline std::vector<double> correlate_strided_direct(const std::vector<double>& w,
                                                    const std::vector<double>& noise,
                                                    int64_t stride, int64_t count) {
  if (stride < 1) throw std::invalid_argument("correlate_strided: stride must be >= 1");
  if (count < 0) throw std::invalid_argument("correlate_strided: count must be >= 0");
  const int64_t need = static_cast<int64_t>(w.size()) + (count > 0 ? (count - 1) * stride : 0);
  if (static_cast<int64_t>(noise.size()) < need) {
    throw std::invalid_argument("correlate_strided: noise too short, need " + fmt_int(need) +
                                " values, got " + fmt_int(static_cast<int64_t>(noise.size())));
  }
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int64_t t = 0; t < count; ++t) {
    NeumaierSum s;
    const double* base = noise.data() + t * stride;
    for (std::size_t m = 0; m < w.size(); ++m) s.add(w[m] * base[m]);
    out[static_cast<std::size_t>(t)] = s.value();
  }
  return out;
}

inline std::vector<double> correlate_strided_fft(const std::vector<double>& w,
                                                 const std::vector<double>& noise,
                                                 int64_t stride, int64_t count) {
  if (stride < 1) throw std::invalid_argument("correlate_strided: stride must be >= 1");
  if (count < 0) throw std::invalid_argument("correlate_strided: count must be >= 0");
  const int64_t need = static_cast<int64_t>(w.size()) + (count > 0 ? (count - 1) * stride : 0);
  if (static_cast<int64_t>(noise.size()) < need) {
    throw std::invalid_argument("correlate_strided: noise too short, need " + fmt_int(need) +
                                " values, got " + fmt_int(static_cast<int64_t>(noise.size())));
  }
  if (count == 0) return {};
  const std::size_t usable = static_cast<std::size_t>(need);
  const std::size_t n = next_pow2(usable + w.size());
  std::vector<std::complex<double>> fa(n), fb(n);
  // Cross-correlation as convolution with the reversed kernel.
  for (std::size_t m = 0; m < w.size(); ++m) fa[w.size() - 1 - m] = w[m];
  for (std::size_t i = 0; i < usable; ++i) fb[i] = noise[i];
  fft_radix2(fa, false);
  fft_radix2(fb, false);
  for (std::size_t i = 0; i < n; ++i) fa[i] *= fb[i];
  fft_radix2(fa, true);
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int64_t t = 0; t < count; ++t) {
    out[static_cast<std::size_t>(t)] = fa[static_cast<std::size_t>(w.size()) - 1 + static_cast<std::size_t>(t * stride)].real();
  }
  return out;
}

// Path choice is a pure function of the problem shape, never of timing, so a
// given configuration always takes the same route.
inline std::vector<double> correlate_strided(const std::vector<double>& w,
                                             const std::vector<double>& noise,
                                             int64_t stride, int64_t count) {
  const double direct_cost = static_cast<double>(w.size()) * static_cast<double>(count > 0 ? count : 0);
  const std::size_t usable = w.size() + static_cast<std::size_t>(count > 0 ? (count - 1) * stride : 0);
  const double n = static_cast<double>(next_pow2(usable + w.size()));
  const double fft_cost = 3.0 * n * std::log2(n) * 2.5;
  if (direct_cost <= fft_cost || direct_cost < 1e5) {
    return correlate_strided_direct(w, noise, stride, count);
  }
  return correlate_strided_fft(w, noise, stride, count);
}

}  // namespace slln
