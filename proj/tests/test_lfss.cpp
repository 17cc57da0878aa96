#include "slln/lfss.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace {

using namespace slln;

TEST(Lfss, PowPlusBranches) {
  EXPECT_DOUBLE_EQ(pow_plus(4.0, 0.5), 2.0);
  EXPECT_DOUBLE_EQ(pow_plus(2.0, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(pow_plus(0.0, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(pow_plus(-3.0, 0.5), 0.0);
  EXPECT_DOUBLE_EQ(pow_plus(-3.0, -0.2), 0.0);
}

TEST(Lfss, ValidateRejectsBadConfigs) {
  LfssConfig good;
  good.d = 2;
  good.alpha = 1.5;
  good.hurst = {0.7, 0.8};
  good.trunc_window = 2048;
  EXPECT_NO_THROW(validate(good));

  LfssConfig c = good;
  c.alpha = 2.5;
  EXPECT_THROW(validate(c), std::invalid_argument);
  c = good;
  c.alpha = 0.0;
  EXPECT_THROW(validate(c), std::invalid_argument);
  c = good;
  c.hurst = {0.7};
  EXPECT_THROW(validate(c), std::invalid_argument);
  c = good;
  c.hurst = {0.7, 1.0};
  EXPECT_THROW(validate(c), std::invalid_argument);
  c = good;
  c.grid_step = 0.3;
  EXPECT_THROW(validate(c), std::invalid_argument);
  c = good;
  c.grid_step = -0.25;
  EXPECT_THROW(validate(c), std::invalid_argument);
  c = good;
  c.trunc_window = 0;
  EXPECT_THROW(validate(c), std::invalid_argument);
  c = good;
  c.trunc_delta = 0.0;
  EXPECT_THROW(validate(c), std::invalid_argument);
}

TEST(Lfss, BlockRegimeGuard) {
  LfssConfig c;
  c.d = 1;
  c.alpha = 1.5;
  c.hurst = {0.8};
  EXPECT_NO_THROW(require_block_regime(c));
  c.alpha = 2.0;
  EXPECT_THROW(require_block_regime(c), std::invalid_argument);
  c.alpha = 1.5;
  c.hurst = {0.5};  // below 1/alpha = 2/3
  EXPECT_THROW(require_block_regime(c), std::invalid_argument);
}

// At hurst = 1/alpha the kernel degenerates to the indicator of (0, 1), whose
// alpha-norm integral is 1, so the calibration constant is exactly 1 and cell
// averages are exactly 1 on [0, 1) and 0 elsewhere.
TEST(Lfss, IndicatorKernelIsExact) {
  EXPECT_DOUBLE_EQ(kernel_alpha_norm_integral(0.5, 2.0), 1.0);
  EXPECT_DOUBLE_EQ(kappa1(0.5, 2.0), 1.0);
  EXPECT_DOUBLE_EQ(kappa1(2.0 / 3.0, 1.5), 1.0);
  EXPECT_DOUBLE_EQ(truncation_tail_fraction(0.5, 2.0, 1), 0.0);

  AxisWeights w = make_axis_weights(0.5, 2.0, 0.25, 2, 1.0, 0.5);
  EXPECT_EQ(w.r, 4);
  EXPECT_EQ(w.m_min, -8);
  ASSERT_EQ(w.c.size(), 12u);
  for (int64_t m = -8; m < 4; ++m) {
    double want = (m >= 0 && m < 4) ? 1.0 : 0.0;
    EXPECT_DOUBLE_EQ(w.c[static_cast<std::size_t>(m + 8)], want) << "cell " << m;
  }
  EXPECT_DOUBLE_EQ(discrete_alpha_norm(w), 1.0);
}

// Independent check of the alpha-norm integral: brute midpoint Riemann sum in
// log coordinates over the half line, against the adaptive-quadrature value.
double riemann_alpha_norm(double hurst, double alpha) {
  double beta = hurst - 1.0 / alpha;
  double head = 1.0 / (alpha * hurst);
  double lo = std::log(1e-8);
  double hi = std::log(1e8);
  int n = 200000;
  double dx = (hi - lo) / n;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    double u = std::exp(lo + (i + 0.5) * dx);
    double diff = std::pow(1.0 + u, beta) - std::pow(u, beta);
    acc += std::pow(std::abs(diff), alpha) * u * dx;
  }
  return head + acc;
}

TEST(Lfss, AlphaNormMatchesRiemannSum) {
  double got_a = kernel_alpha_norm_integral(0.8, 1.5);
  double ref_a = riemann_alpha_norm(0.8, 1.5);
  EXPECT_NEAR(got_a / ref_a, 1.0, 2e-3);

  double got_b = kernel_alpha_norm_integral(0.4, 1.2);
  double ref_b = riemann_alpha_norm(0.4, 1.2);
  EXPECT_NEAR(got_b / ref_b, 1.0, 2e-3);
}

// Cell averages come from an antiderivative; recompute a few by midpoint
// quadrature inside each cell.
TEST(Lfss, CellWeightsMatchQuadrature) {
  double hurst = 0.8;
  double alpha = 1.5;
  double beta = hurst - 1.0 / alpha;
  AxisWeights w = make_axis_weights(hurst, alpha, 0.25, 4, 1.0, 0.9);
  ASSERT_EQ(w.r, 4);
  ASSERT_EQ(w.m_min, -16);
  for (std::size_t i = 0; i < w.c.size(); ++i) {
    int64_t m = w.m_min + static_cast<int64_t>(i);
    double a = m * w.h;
    int nq = 20000;
    double acc = 0.0;
    for (int k = 0; k < nq; ++k) {
      double s = a + (k + 0.5) * w.h / nq;
      acc += pow_plus(1.0 - s, beta) - pow_plus(-s, beta);
    }
    acc /= nq;
    EXPECT_NEAR(w.c[i], acc, 1e-5 * std::max(1.0, std::abs(acc))) << "cell " << m;
  }
}

TEST(Lfss, KernelGSpotValues) {
  LfssConfig cfg;
  cfg.d = 1;
  cfg.alpha = 2.0;
  cfg.hurst = {0.75};
  cfg.kappa = 1.0;
  // beta = 0.25; at t=1, s=0.5 only the first branch is active.
  EXPECT_DOUBLE_EQ(kernel_g({1.0}, {0.5}, cfg), std::pow(0.5, 0.25));
  // s = -1: both branches.
  EXPECT_DOUBLE_EQ(kernel_g({1.0}, {-1.0}, cfg), std::pow(2.0, 0.25) - 1.0);
  // s past t: support ends.
  EXPECT_DOUBLE_EQ(kernel_g({1.0}, {1.5}, cfg), 0.0);
  // Explicit kappa scales linearly.
  cfg.kappa = 3.0;
  EXPECT_DOUBLE_EQ(kernel_g({1.0}, {0.5}, cfg), 3.0 * std::pow(0.5, 0.25));
}

TEST(Lfss, KappaFoldingPerAxis) {
  LfssConfig cfg;
  cfg.d = 2;
  cfg.alpha = 1.5;
  cfg.hurst = {0.8, 0.75};
  cfg.grid_step = 0.5;
  cfg.trunc_window = 4;
  cfg.trunc_delta = 0.9;

  // Explicit kappa lands on axis 0 only.
  cfg.kappa = 2.5;
  std::vector<AxisWeights> ws = increment_weights(cfg);
  AxisWeights raw0 = make_axis_weights(0.8, 1.5, 0.5, 4, 1.0, 0.9);
  AxisWeights raw1 = make_axis_weights(0.75, 1.5, 0.5, 4, 1.0, 0.9);
  ASSERT_EQ(ws[0].c.size(), raw0.c.size());
  for (std::size_t i = 0; i < raw0.c.size(); ++i) {
    EXPECT_DOUBLE_EQ(ws[0].c[i], 2.5 * raw0.c[i]);
    EXPECT_DOUBLE_EQ(ws[1].c[i], raw1.c[i]);
  }

  // Automatic calibration applies kappa1 per axis.
  cfg.kappa = 0.0;
  ws = increment_weights(cfg);
  double k0 = kappa1(0.8, 1.5);
  double k1 = kappa1(0.75, 1.5);
  for (std::size_t i = 0; i < raw0.c.size(); ++i) {
    EXPECT_DOUBLE_EQ(ws[0].c[i], k0 * raw0.c[i]);
    EXPECT_DOUBLE_EQ(ws[1].c[i], k1 * raw1.c[i]);
  }
  EXPECT_DOUBLE_EQ(resolved_kappa(cfg), k0 * k1);
  cfg.kappa = 2.5;
  EXPECT_DOUBLE_EQ(resolved_kappa(cfg), 2.5);
}

TEST(Lfss, TruncationWindowRespectsDelta) {
  int64_t w = choose_truncation_window(0.8, 1.5, 0.02);
  EXPECT_GE(w, 1);
  EXPECT_LE(truncation_tail_fraction(0.8, 1.5, w), 0.02);
  // A clearly undersized window is rejected with a pointer to the fix.
  try {
    make_axis_weights(0.8, 1.5, 1.0, 8, 1.0, 0.02);
    FAIL() << "expected runtime_error";
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("raise trunc_window"), std::string::npos);
  }
  EXPECT_THROW(choose_truncation_window(0.8, 1.5, 0.0), std::invalid_argument);
  EXPECT_THROW(choose_truncation_window(0.8, 1.5, 1.0), std::invalid_argument);
}

// Far from the support the cell weights follow a power law; doubling the
// distance multiplies them by 2^(beta - 1).
TEST(Lfss, WeightTailDecayRatio) {
  double hurst = 0.8;
  double alpha = 1.5;
  double beta = hurst - 1.0 / alpha;
  AxisWeights w = make_axis_weights(hurst, alpha, 1.0, 256, 1.0, 0.9);
  ASSERT_EQ(w.r, 1);
  ASSERT_EQ(w.m_min, -256);
  double c64 = w.c[static_cast<std::size_t>(-64 - w.m_min)];
  double c128 = w.c[static_cast<std::size_t>(-128 - w.m_min)];
  ASSERT_GT(c64, 0.0);
  EXPECT_NEAR(c128 / c64, std::pow(2.0, beta - 1.0), 0.03 * std::pow(2.0, beta - 1.0));
}

// With automatic calibration the discrete alpha-norm should sit just below 1:
// averaging inside cells and truncating the tail both lose mass.
TEST(Lfss, DiscreteAlphaNormNearUnit) {
  double hurst = 0.8;
  double alpha = 1.5;
  int64_t window = choose_truncation_window(hurst, alpha, 0.01);
  AxisWeights w = make_axis_weights(hurst, alpha, 1.0 / 16.0, window, kappa1(hurst, alpha), 0.011);
  double norm = discrete_alpha_norm(w);
  EXPECT_LT(norm, 1.0 + 1e-9);
  EXPECT_GT(norm, 0.95);
}

TEST(Lfss, PartialSumKernelsTelescope) {
  AxisWeights w;
  w.r = 2;
  w.m_min = -2;
  w.c = {1.0, 2.0, 3.0, 4.0};  // cells -2..1
  std::vector<std::vector<double>> ks = partial_sum_kernels(w, {1, 2, 3});
  // A_n covers cells m_min .. n*r - 1; A_n(i) = sum_{k<n} c(i - k r).
  ASSERT_EQ(ks.size(), 3u);
  ASSERT_EQ(ks[0].size(), 4u);
  ASSERT_EQ(ks[1].size(), 6u);
  ASSERT_EQ(ks[2].size(), 8u);
  std::vector<double> a1 = {1.0, 2.0, 3.0, 4.0};
  std::vector<double> a2 = {1.0, 2.0, 4.0, 6.0, 3.0, 4.0};
  std::vector<double> a3 = {1.0, 2.0, 4.0, 6.0, 4.0, 6.0, 3.0, 4.0};
  for (std::size_t i = 0; i < a1.size(); ++i) EXPECT_DOUBLE_EQ(ks[0][i], a1[i]);
  for (std::size_t i = 0; i < a2.size(); ++i) EXPECT_DOUBLE_EQ(ks[1][i], a2[i]);
  for (std::size_t i = 0; i < a3.size(); ++i) EXPECT_DOUBLE_EQ(ks[2][i], a3[i]);

  EXPECT_THROW(partial_sum_kernels(w, {2, 2}), std::invalid_argument);
  EXPECT_THROW(partial_sum_kernels(w, {0}), std::invalid_argument);
}

TEST(Lfss, KernelScaleHandValue) {
  EXPECT_DOUBLE_EQ(kernel_scale({3.0, 4.0}, 2.0, 0.5), std::sqrt(12.5));
  EXPECT_DOUBLE_EQ(kernel_scale({}, 1.5, 1.0), 0.0);
}

// At hurst = 1/alpha the increment field is i.i.d. standard stable: disjoint
// noise blocks, each summing to scale (r^d h^d)^(1/alpha) = 1.
TEST(Lfss, IndicatorFieldIsStandardStable) {
  LfssConfig cfg;
  cfg.d = 1;
  cfg.alpha = 1.5;
  cfg.hurst = {2.0 / 3.0};
  cfg.grid_step = 0.25;
  cfg.trunc_window = 1;
  LatticeField f = simulate_increment_field(cfg, {20000}, 4242, "ecf", 1);
  const std::vector<double>& xs = f.values();
  double n = static_cast<double>(xs.size());
  for (double theta : {0.5, 1.0, 2.0}) {
    double acc = 0.0;
    for (double x : xs) acc += std::cos(theta * x);
    EXPECT_NEAR(acc / n, std::exp(-std::pow(theta, 1.5)), 0.03) << "theta " << theta;
  }
  // Disjoint blocks make neighbours exactly independent; the sample
  // correlation only sees noise.
  double c0 = 0.0, c1 = 0.0;
  for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
    double a = std::max(-3.0, std::min(3.0, xs[i]));
    double b = std::max(-3.0, std::min(3.0, xs[i + 1]));
    c0 += a * a;
    c1 += a * b;
  }
  EXPECT_LT(std::abs(c1 / c0), 0.03);
}

TEST(Lfss, SheetMatchesBruteForce) {
  LfssConfig cfg;
  cfg.d = 2;
  cfg.alpha = 1.8;
  cfg.hurst = {0.7, 0.6};
  cfg.grid_step = 0.5;
  cfg.trunc_window = 4;
  cfg.trunc_delta = 0.2;
  LatticeField xi = simulate_increment_field(cfg, {8, 8}, 99, "sheet", 1);
  Sheet sheet(xi);
  for (int64_t t0 = 0; t0 <= 8; ++t0) {
    for (int64_t t1 = 0; t1 <= 8; ++t1) {
      double brute = 0.0;
      for (int64_t i = 0; i < t0; ++i) {
        for (int64_t j = 0; j < t1; ++j) brute += xi.at({i, j});
      }
      EXPECT_NEAR(sheet.at({t0, t1}), brute, 1e-11 * std::max(1.0, std::abs(brute)));
    }
  }
  // The sheet vanishes on the coordinate hyperplanes.
  EXPECT_DOUBLE_EQ(sheet.at({0, 5}), 0.0);
  EXPECT_DOUBLE_EQ(sheet.at({5, 0}), 0.0);
  // Box increments match direct sums.
  double brute = 0.0;
  for (int64_t i = 2; i < 5; ++i) {
    for (int64_t j = 3; j < 7; ++j) brute += xi.at({i, j});
  }
  EXPECT_NEAR(sheet.rect_increment({2, 3}, {3, 4}), brute, 1e-11 * std::max(1.0, std::abs(brute)));
  EXPECT_THROW(sheet.at({9, 0}), std::out_of_range);
  EXPECT_THROW(sheet.at({-1, 0}), std::out_of_range);
}

// The kernel sampler and the field simulator consume the same noise stream in
// the same order, so anchored partial sums agree up to reassociation.
TEST(Lfss, KernelPathMatchesFieldPath) {
  LfssConfig cfg;
  cfg.d = 1;
  cfg.alpha = 1.5;
  cfg.hurst = {0.8};
  cfg.grid_step = 0.25;
  cfg.trunc_window = 8;
  cfg.trunc_delta = 0.2;
  std::vector<int64_t> ns = {1, 2, 4, 8, 16};
  int64_t reps = 5;
  AxisWeights w = increment_weights(cfg)[0];
  std::vector<std::vector<double>> sums =
      sample_partial_sums_1d(w, cfg.alpha, ns, reps, 777, "kfp", 1);
  for (int64_t rep = 0; rep < reps; ++rep) {
    LatticeField f = simulate_increment_field(cfg, {16}, 777, replicate_stream("kfp", rep), 1);
    NeumaierSum acc;
    std::size_t next = 0;
    for (int64_t k = 0; k < 16; ++k) {
      acc.add(f.values()[static_cast<std::size_t>(k)]);
      if (next < ns.size() && ns[next] == k + 1) {
        double got = sums[next][static_cast<std::size_t>(rep)];
        EXPECT_NEAR(got, acc.value(), 1e-9 * std::max(1.0, std::abs(acc.value())))
            << "rep " << rep << " n " << ns[next];
        ++next;
      }
    }
    EXPECT_EQ(next, ns.size());
  }
}

TEST(Lfss, SimulationDeterministicAcrossThreads) {
  LfssConfig cfg;
  cfg.d = 2;
  cfg.alpha = 1.6;
  cfg.hurst = {0.75, 0.8};
  cfg.grid_step = 0.5;
  cfg.trunc_window = 4;
  cfg.trunc_delta = 0.3;
  LatticeField a = simulate_increment_field(cfg, {6, 7}, 2024, "det", 1);
  LatticeField b = simulate_increment_field(cfg, {6, 7}, 2024, "det", 8);
  ASSERT_EQ(a.values().size(), b.values().size());
  for (std::size_t i = 0; i < a.values().size(); ++i) {
    EXPECT_EQ(a.values()[i], b.values()[i]) << "cell " << i;
  }
  LatticeField c = simulate_increment_field(cfg, {6, 7}, 2025, "det", 1);
  EXPECT_NE(a.values(), c.values());
}

// Self-similarity in law: z(4n) should match 4^hurst z(n).  The rank test
// accepts the true exponent and rejects one that is 0.4 too high.
TEST(Lfss, OperatorScalingRankTest) {
  double hurst = 0.8;
  double alpha = 1.5;
  int64_t window = choose_truncation_window(hurst, alpha, 0.05);
  AxisWeights w = make_axis_weights(hurst, alpha, 1.0, window, kappa1(hurst, alpha), 0.05);
  std::vector<double> qs = {0.25, 0.75};
  OperatorScalingCheck ok = check_operator_scaling_1d(w, alpha, 8, 32, std::pow(4.0, hurst),
                                                      4000, qs, 555, "opscale", 1);
  EXPECT_TRUE(ok.pass);
  OperatorScalingCheck bad = check_operator_scaling_1d(w, alpha, 8, 32, std::pow(4.0, hurst + 0.4),
                                                       4000, qs, 555, "opscale", 1);
  EXPECT_FALSE(bad.pass);
  EXPECT_THROW(check_operator_scaling_1d(w, alpha, 8, 8, 1.0, 100, qs, 1, "x", 1),
               std::invalid_argument);
  EXPECT_THROW(check_operator_scaling_1d(w, alpha, 8, 32, 1.0, 100, {1.5}, 1, "x", 1),
               std::invalid_argument);
}

}  // namespace
