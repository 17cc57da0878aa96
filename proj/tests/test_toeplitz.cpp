#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "slln/scaling.hpp"
#include "slln/toeplitz.hpp"

namespace slln {
namespace {

// phi = x, a = 2: the row sum telescopes to 1 - 2^{-n-1}.
TEST(Toeplitz, ClosedFormRowSumOneDim) {
  ToeplitzWeights w({ScalingFunction::power(1.0)}, 2);
  for (std::int64_t n = 0; n <= 20; ++n) {
    EXPECT_NEAR(w.row_sum({n}), 1.0 - std::pow(2.0, -static_cast<double>(n) - 1.0), 1e-12) << n;
  }
}

// Row sums never exceed one: swept over dimensions, bases, exponents, and
// log corrections; 216 configurations in all.
TEST(Toeplitz, RowSumsNeverExceedOne) {
  std::vector<ScalingFunction> phis = {
      ScalingFunction::power(0.5), ScalingFunction::power(1.0),  ScalingFunction::power(1.7),
      ScalingFunction::power(2.3), ScalingFunction::power_log(0.8, 1.0),
      ScalingFunction::power_log(1.2, 2.0)};
  int checked = 0;
  for (std::int64_t a : {2, 3, 5}) {
    for (const auto& p1 : phis) {
      // d = 1
      ToeplitzWeights w1({p1}, a);
      for (std::int64_t n : {0, 1, 3, 9}) {
        double rs = w1.row_sum({n});
        EXPECT_LE(rs, 1.0 + 1e-12);
        EXPECT_GE(rs, 0.0);
        ++checked;
      }
      // d = 2, pairing each phi with a fixed partner
      ToeplitzWeights w2({p1, ScalingFunction::power(1.0)}, a);
      for (std::int64_t n : {0, 2, 7}) {
        double rs = w2.row_sum({n, n + 1});
        EXPECT_LE(rs, 1.0 + 1e-12);
        EXPECT_GE(rs, 0.0);
        ++checked;
      }
    }
  }
  EXPECT_GE(checked, 120);
}

TEST(Toeplitz, WeightSupportAndPositivity) {
  ToeplitzWeights w({ScalingFunction::power(1.0), ScalingFunction::power(0.5)}, 2);
  EXPECT_DOUBLE_EQ(w.weight({2, 2}, {3, 1}), 0.0);  // k beyond n
  EXPECT_GT(w.weight({2, 2}, {1, 1}), 0.0);
  // Row of weights sums to row_sum.
  double acc = 0.0;
  for (std::int64_t k1 = 0; k1 <= 3; ++k1) {
    for (std::int64_t k2 = 0; k2 <= 2; ++k2) acc += w.weight({3, 2}, {k1, k2});
  }
  EXPECT_NEAR(acc, w.row_sum({3, 2}), 1e-12);
}

// Each fixed-k weight is (phi(a^{k+1}) - phi(a^k)) / phi(a^{n+1}), so it
// shrinks strictly as n grows along every axis.
TEST(Toeplitz, FixedEntryVanishesAsRowsGrow) {
  ToeplitzWeights w({ScalingFunction::power(1.3)}, 2);
  double prev = w.weight({1}, {0});
  for (std::int64_t n = 2; n <= 12; ++n) {
    double cur = w.weight({n}, {0});
    EXPECT_LT(cur, prev);
    prev = cur;
  }
  EXPECT_LT(prev, 1e-4);
}

// Transform against the direct double sum on a 5x5 exponent grid.
TEST(Toeplitz, TransformMatchesDirectSum) {
  ToeplitzWeights w({ScalingFunction::power(1.0), ScalingFunction::power_log(0.9, 1.0)}, 2);
  auto s = [](const MultiIndex& k) {
    return std::cos(1.7 * static_cast<double>(k[0])) / (1.0 + static_cast<double>(k[1]));
  };
  auto res = toeplitz_transform(w, s, {4, 4});
  ASSERT_EQ(res.t.size(), 25u);
  std::size_t idx = 0;
  for (std::int64_t m1 = 0; m1 <= 4; ++m1) {
    for (std::int64_t m2 = 0; m2 <= 4; ++m2, ++idx) {
      double want = 0.0;
      for (std::int64_t k1 = 0; k1 <= m1; ++k1) {
        for (std::int64_t k2 = 0; k2 <= m2; ++k2) want += w.weight({m1, m2}, {k1, k2}) * s({k1, k2});
      }
      EXPECT_NEAR(res.t[idx], want, 1e-12) << "m=(" << m1 << "," << m2 << ")";
    }
  }
}

// A vanishing input sequence drags the weighted means to zero: the recorded
// tail sup must drop strictly at every doubling level.  (s = 4^{-k} gives
// t(m) = (2 - 2^{-m}) / 2^{m+1}, strictly decreasing from m = 0 on; the
// slower 2^{-k} would tie the first two levels.)
TEST(Toeplitz, TailSupsDecayForVanishingInput) {
  ToeplitzWeights w({ScalingFunction::power(1.0)}, 2);
  auto s = [](const MultiIndex& k) { return std::pow(0.25, static_cast<double>(k[0])); };
  auto res = toeplitz_transform(w, s, {64});
  ASSERT_GE(res.tail_levels.size(), 4u);
  for (std::size_t i = 1; i < res.tail_sup.size(); ++i) {
    EXPECT_LT(res.tail_sup[i], res.tail_sup[i - 1]) << "level " << res.tail_levels[i];
  }
}

}  // namespace
}  // namespace slln
