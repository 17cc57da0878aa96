#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "slln/models.hpp"

namespace slln {
namespace {

TEST(Models, ZeroGeneratorAllZero) {
  auto g = zero_generator(2);
  auto f = g.make({4, 4}, {0, 0}, 0);
  for (double v : f.values()) EXPECT_DOUBLE_EQ(v, 0.0);
  EXPECT_TRUE(g.stationary);
}

TEST(Models, DeterministicAcrossCallsAndThreads) {
  auto g = iid_gaussian_generator(2, 1.0, 99);
  auto a = g.make({16, 16}, {0, 0}, 3, 1);
  auto b = g.make({16, 16}, {0, 0}, 3, 1);
  auto c = g.make({16, 16}, {0, 0}, 3, 4);
  EXPECT_EQ(a.values(), b.values());
  EXPECT_EQ(a.values(), c.values());
  auto other_rep = g.make({16, 16}, {0, 0}, 4, 1);
  EXPECT_NE(a.values(), other_rep.values());
}

TEST(Models, IidGaussianMoments) {
  auto g = iid_gaussian_generator(2, 1.5, 7);
  auto f = g.make({300, 300}, {0, 0}, 0);
  NeumaierSum s, s2;
  for (double v : f.values()) {
    s.add(v);
    s2.add(v * v);
  }
  const double n = static_cast<double>(f.size());
  EXPECT_NEAR(s.value() / n, 0.0, 0.02);
  EXPECT_NEAR(s2.value() / n, 1.5 * 1.5, 0.03 * 2.25);
}

TEST(Models, IidStableHasHeavyTails) {
  auto g = iid_stable_generator(1, 1.2, 1.0, 11);
  auto f = g.make({200000}, {0}, 0);
  int big = 0;
  for (double v : f.values()) {
    if (std::abs(v) > 100.0) ++big;
  }
  EXPECT_GT(big, 20);  // P(|X| > 100) ~ 100^-1.2 would be ~ 0.4 per 100k draws for Gaussian: none
}

// The variance map is evaluated at absolute coordinates: a field anchored at
// (2, 3) must see sigma^2(2, 3) = 6 at its corner, not sigma^2(1, 1).
TEST(Models, OrthogonalVarianceMapSeesAbsolutePoints) {
  auto vm = [](const MultiIndex& p) { return static_cast<double>(p[0] * p[1]); };
  auto g = orthogonal_generator(2, vm, 13);
  const int reps = 20000;
  NeumaierSum corner, far;
  for (int r = 0; r < reps; ++r) {
    auto f = g.make({2, 2}, {2, 3}, r);
    corner.add(f.at({2, 3}) * f.at({2, 3}));
    far.add(f.at({3, 4}) * f.at({3, 4}));
  }
  EXPECT_NEAR(corner.value() / reps, 6.0, 0.25);
  EXPECT_NEAR(far.value() / reps, 12.0, 0.5);
  EXPECT_FALSE(g.stationary);
}

TEST(Models, OrthogonalPointsUncorrelated) {
  auto vm = [](const MultiIndex&) { return 1.0; };
  auto g = orthogonal_generator(2, vm, 17);
  const int reps = 8000;
  double sxy = 0, sx = 0, sy = 0, sxx = 0, syy = 0;
  for (int r = 0; r < reps; ++r) {
    auto f = g.make({3, 3}, {1, 1}, r);
    double x = f.at({1, 1}), y = f.at({2, 3});
    sxy += x * y;
    sx += x;
    sy += y;
    sxx += x * x;
    syy += y * y;
  }
  double corr = (sxy - sx * sy / reps) / std::sqrt((sxx - sx * sx / reps) * (syy - sy * sy / reps));
  EXPECT_LT(std::abs(corr), 4.0 / std::sqrt(static_cast<double>(reps)));
}

TEST(Models, OrthogonalRejectsNegativeVariance) {
  auto vm = [](const MultiIndex& p) { return static_cast<double>(p[0]); };  // negative at p0 < 0
  auto g = orthogonal_generator(1, vm, 19);
  EXPECT_THROW(g.make({3}, MultiIndex{-5}, 0), std::runtime_error);
  EXPECT_NO_THROW(g.make({3}, MultiIndex{0}, 0));
}

// Product-AR(1) field: unit variance, correlation r^{|n|_1} at lag n.
TEST(Models, QuasiStationaryCorrelations) {
  const double r = 0.5;
  auto g = quasi_stationary_generator(2, r, 23);
  EXPECT_TRUE(g.stationary);
  const int reps = 20000;
  NeumaierSum var, lag10, lag11, lag20;
  for (int rep = 0; rep < reps; ++rep) {
    auto f = g.make({3, 3}, {0, 0}, rep);
    double x = f.at({0, 0});
    var.add(x * x);
    lag10.add(x * f.at({1, 0}));
    lag11.add(x * f.at({1, 1}));
    lag20.add(x * f.at({2, 0}));
  }
  EXPECT_NEAR(var.value() / reps, 1.0, 0.05);
  EXPECT_NEAR(lag10.value() / reps, 0.5, 0.04);
  EXPECT_NEAR(lag11.value() / reps, 0.25, 0.04);
  EXPECT_NEAR(lag20.value() / reps, 0.25, 0.04);
}

TEST(Models, AchievedCorrBound) {
  CovarianceModel m;
  m.kind = ModelKind::QuasiStationary;
  m.ar_coeff = 0.5;
  EXPECT_DOUBLE_EQ(achieved_corr_bound(m, {0, 0}), 1.0);
  EXPECT_DOUBLE_EQ(achieved_corr_bound(m, {1, 2}), 0.125);
  EXPECT_THROW(achieved_corr_bound(m, {-1, 0}), std::invalid_argument);
  CovarianceModel iid;
  EXPECT_THROW(achieved_corr_bound(iid, {0}), std::invalid_argument);
}

TEST(Models, ValidateRejectsBadModels) {
  CovarianceModel qs;
  qs.kind = ModelKind::QuasiStationary;
  qs.ar_coeff = 1.0;
  EXPECT_THROW(validate(qs), std::invalid_argument);
  CovarianceModel orth;
  orth.kind = ModelKind::Orthogonal;  // no variance map
  EXPECT_THROW(validate(orth), std::invalid_argument);
  CovarianceModel st;
  st.law = NoiseLaw::Stable;
  st.alpha = 2.5;
  EXPECT_THROW(validate(st), std::invalid_argument);
}

// Rebasing moves the box, not the values: the lfss path generates on the box
// and then anchors it, so the same replicate at two origins holds identical
// values at corresponding offsets.
TEST(Models, LfssOriginRebaseKeepsValues) {
  LfssConfig cfg;
  cfg.d = 1;
  cfg.alpha = 1.5;
  cfg.hurst = {0.8};
  cfg.trunc_window = 8;
  cfg.trunc_delta = 0.25;  // a stub kernel is fine here; only anchoring is under test
  auto g = lfss_generator(cfg, 31);
  auto a = g.make({32}, MultiIndex{0}, 5);
  auto b = g.make({32}, MultiIndex{-16}, 5);
  EXPECT_EQ(a.values(), b.values());
  EXPECT_EQ(a.origin()[0], 0);
  EXPECT_EQ(b.origin()[0], -16);
  EXPECT_TRUE(g.stationary);
}

TEST(Models, FieldBinaryRoundTrip) {
  auto g = iid_gaussian_generator(2, 1.0, 41);
  auto f = g.make({8, 8}, {1, 1}, 0);
  const std::string path = "test_field_roundtrip.bin";
  write_field_binary(f, path);
  auto h = read_field_binary(path);
  EXPECT_EQ(h.shape(), f.shape());
  EXPECT_EQ(h.origin(), f.origin());
  EXPECT_EQ(h.values(), f.values());
  EXPECT_EQ(static_cast<int>(h.generator()), static_cast<int>(f.generator()));
  std::remove(path.c_str());
}

}  // namespace
}  // namespace slln
