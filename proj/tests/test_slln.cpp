#include "slln/slln.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace {

using namespace slln;

LfssConfig block_cfg() {
  LfssConfig cfg;
  cfg.d = 1;
  cfg.alpha = 1.5;
  cfg.hurst = {0.8};
  cfg.grid_step = 0.25;
  cfg.trunc_window = 8;
  cfg.trunc_delta = 0.2;
  return cfg;
}

bool has_note(const std::vector<std::string>& notes, const std::string& needle) {
  for (const auto& n : notes) {
    if (n.find(needle) != std::string::npos) return true;
  }
  return false;
}

TEST(Slln, TrivialZeroFieldPasses) {
  SllnOptions opt;
  opt.shell_cap = 4;
  opt.ref_shell = 1;
  opt.replicates = 3;
  // x^{1.2} doubles by 2^{1.2} > 2, so the admissibility gate stays open.
  opt.require_admissible = true;
  auto rep = run_slln(zero_generator(1), {ScalingFunction::power(1.2)}, opt);
  EXPECT_TRUE(rep.plan_admissible);
  EXPECT_TRUE(rep.plan_note.empty());
  ASSERT_EQ(rep.plans.size(), 1u);
  EXPECT_TRUE(rep.tail.passes);
  EXPECT_DOUBLE_EQ(rep.tail.median_ref, 0.0);
  EXPECT_DOUBLE_EQ(rep.tail.halving_ratio, 0.0);
  for (const auto& row : rep.tail.per_replicate) {
    for (double v : row) EXPECT_DOUBLE_EQ(v, 0.0);
  }
  EXPECT_TRUE(has_note(rep.notes, "tail suprema vanish"));
  EXPECT_FALSE(rep.control_tail.has_value());
}

TEST(Slln, RejectsWeakNormalizationOnRequest) {
  SllnOptions opt;
  opt.shell_cap = 3;
  opt.ref_shell = 1;
  opt.replicates = 2;
  // sqrt(x) doubles by 2^{1/2} < 2, so the base-2 survey refuses it.
  opt.require_admissible = true;
  try {
    run_slln(zero_generator(1), {ScalingFunction::power(0.5)}, opt);
    FAIL() << "expected rejection";
  } catch (const std::domain_error& e) {
    EXPECT_NE(std::string(e.what()).find("run_slln: normalization rejected"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("c_low"), std::string::npos);
  }
  // Advisory mode runs anyway and reports the failed inequality.
  opt.require_admissible = false;
  auto rep = run_slln(zero_generator(1), {ScalingFunction::power(0.5)}, opt);
  EXPECT_FALSE(rep.plan_admissible);
  EXPECT_FALSE(rep.plan_note.empty());
}

TEST(Slln, GaussianRectanglesHalve) {
  FieldGenerator gen = iid_gaussian_generator(2, 1.0, 20260819);
  std::vector<ScalingFunction> phis = {ScalingFunction::power(1.0), ScalingFunction::power(1.0)};
  SllnOptions opt;
  opt.shell_cap = 6;
  opt.ref_shell = 2;
  opt.replicates = 24;
  opt.control_phis = {ScalingFunction::power(0.3), ScalingFunction::power(0.3)};
  auto rep = run_slln(gen, phis, opt);

  ASSERT_EQ(rep.tail.median.size(), 7u);
  ASSERT_EQ(rep.tail.p90.size(), 7u);
  ASSERT_EQ(rep.tail.per_replicate.size(), 24u);
  for (const auto& row : rep.tail.per_replicate) ASSERT_EQ(row.size(), 7u);
  EXPECT_TRUE(rep.tail.nonincreasing);
  for (std::size_t k = 1; k < rep.tail.median.size(); ++k) {
    EXPECT_LE(rep.tail.median[k], rep.tail.median[k - 1]);
  }
  for (std::size_t k = 0; k < rep.tail.median.size(); ++k) {
    EXPECT_LE(rep.tail.median[k], rep.tail.p90[k]);
  }
  EXPECT_GT(rep.tail.median_ref, 0.0);
  EXPECT_TRUE(rep.tail.passes);
  EXPECT_LE(rep.tail.halving_ratio, 0.5);

  // The under-normalized control is rated on the same draws and stays flat.
  ASSERT_TRUE(rep.control_tail.has_value());
  EXPECT_TRUE(rep.control_tail->nonincreasing);
  EXPECT_FALSE(rep.control_tail->passes);
  EXPECT_GT(rep.control_tail->halving_ratio, 0.5);

  // phi(x) = x sits on the doubling boundary at base 2; the survey is advisory here.
  ASSERT_EQ(rep.plans.size(), 2u);
  EXPECT_FALSE(rep.plan_admissible);
  EXPECT_FALSE(rep.plan_note.empty());
  EXPECT_TRUE(rep.notes.empty());
  EXPECT_EQ(rep.replicates, 24);
  EXPECT_EQ(rep.master_seed, 20260819u);
}

TEST(Slln, HarnessDeterministicAcrossThreads) {
  FieldGenerator gen = iid_gaussian_generator(2, 1.0, 77);
  std::vector<ScalingFunction> phis = {ScalingFunction::power(1.0), ScalingFunction::power(1.0)};
  SllnOptions opt;
  opt.shell_cap = 5;
  opt.ref_shell = 2;
  opt.replicates = 8;
  opt.threads = 1;
  auto one = run_slln(gen, phis, opt);
  opt.threads = 8;
  auto eight = run_slln(gen, phis, opt);
  EXPECT_EQ(one.tail.per_replicate, eight.tail.per_replicate);
  EXPECT_EQ(one.tail.median, eight.tail.median);
}

TEST(Slln, RunSllnValidatesArguments) {
  std::vector<ScalingFunction> one = {ScalingFunction::power(1.0)};
  std::vector<ScalingFunction> two = {ScalingFunction::power(1.0), ScalingFunction::power(1.0)};
  SllnOptions opt;
  opt.shell_cap = 3;
  opt.ref_shell = 1;
  opt.replicates = 2;

  EXPECT_THROW(run_slln(zero_generator(0), {}, opt), std::invalid_argument);
  EXPECT_THROW(run_slln(zero_generator(2), one, opt), std::invalid_argument);

  SllnOptions bad = opt;
  bad.ref_shell = 3;
  EXPECT_THROW(run_slln(zero_generator(1), one, bad), std::invalid_argument);
  bad = opt;
  bad.ref_shell = -1;
  EXPECT_THROW(run_slln(zero_generator(1), one, bad), std::invalid_argument);
  bad = opt;
  bad.replicates = 0;
  EXPECT_THROW(run_slln(zero_generator(1), one, bad), std::invalid_argument);
  bad = opt;
  bad.control_phis = one;
  EXPECT_THROW(run_slln(zero_generator(2), two, bad), std::invalid_argument);

  // 2^10 per axis in three dimensions overruns the scan budget.
  SllnOptions big;
  big.shell_cap = 10;
  big.ref_shell = 4;
  big.replicates = 1;
  std::vector<ScalingFunction> three(3, ScalingFunction::power(1.0));
  try {
    run_slln(zero_generator(3), three, big);
    FAIL() << "expected the budget guard";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("beyond the scan budget"), std::string::npos);
  }
}

TEST(Slln, BlockTailGrowthAndSeriesIdentities) {
  const LfssConfig cfg = block_cfg();
  const double gamma = 1.4;
  const double epsilon = 0.5;
  const int n_max = 6;
  auto rep = run_lfss_block_tail(cfg, gamma, epsilon, n_max, 400, 2025);

  EXPECT_DOUBLE_EQ(rep.gamma, gamma);
  EXPECT_DOUBLE_EQ(rep.rho, 1.0 / 1.5 + 0.5);
  EXPECT_EQ(rep.replicates, 400);
  EXPECT_EQ(rep.master_seed, 2025u);
  ASSERT_EQ(rep.block_max_moment.size(), 7u);
  ASSERT_EQ(rep.block_std_error.size(), 7u);
  ASSERT_EQ(rep.fitted_bound.size(), 7u);
  ASSERT_EQ(rep.normalized_terms.size(), 7u);

  // Block maxima are running maxima, so the moments are monotone exactly.
  for (std::size_t n = 1; n < rep.block_max_moment.size(); ++n) {
    EXPECT_LE(rep.block_max_moment[n - 1], rep.block_max_moment[n]);
  }
  for (double se : rep.block_std_error) EXPECT_GE(se, 0.0);

  // The fit is the largest early-block ratio, and the bound echoes it.
  const double H = cfg.hurst[0];
  double c_fit = 0.0;
  for (std::size_t n = 0; n <= static_cast<std::size_t>(n_max / 2); ++n) {
    c_fit = std::max(c_fit, rep.block_max_moment[n] / std::pow(2.0, static_cast<double>(n) * gamma * H));
  }
  EXPECT_DOUBLE_EQ(rep.c_fit, c_fit);
  for (std::size_t n = 0; n < rep.fitted_bound.size(); ++n) {
    EXPECT_DOUBLE_EQ(rep.fitted_bound[n], rep.c_fit * std::pow(2.0, static_cast<double>(n) * gamma * H));
    EXPECT_DOUBLE_EQ(rep.normalized_terms[n],
                     rep.block_max_moment[n] / std::pow(2.0, static_cast<double>(n) * gamma * rep.rho));
  }
  EXPECT_GE(rep.dominance_fraction, 0.5);
  EXPECT_LE(rep.dominance_fraction, 1.0);

  // gamma rho > 1 makes the normalized block series summable.
  EXPECT_EQ(rep.normalized_series.verdict, SeriesVerdict::Converges);
  EXPECT_TRUE(has_note(rep.notes, "standard errors are indicative only"));
}

TEST(Slln, BlockTailQuietWhenSquareIntegrable) {
  // 2 gamma < alpha, so no caveat about the standard errors.
  auto rep = run_lfss_block_tail(block_cfg(), 0.7, 1.0, 3, 40, 7);
  EXPECT_TRUE(rep.notes.empty());
  EXPECT_DOUBLE_EQ(rep.rho, 1.0 / 1.5 + 1.0);
}

TEST(Slln, BlockTailValidatesArguments) {
  const LfssConfig cfg = block_cfg();
  EXPECT_THROW(run_lfss_block_tail(cfg, 1.5, 0.5, 4, 10, 1), std::domain_error);
  EXPECT_THROW(run_lfss_block_tail(cfg, 0.0, 0.5, 4, 10, 1), std::domain_error);
  EXPECT_THROW(run_lfss_block_tail(cfg, 1.4, 0.0, 4, 10, 1), std::invalid_argument);
  try {
    // gamma (1/alpha + epsilon) = 0.91 here, too small to close the series.
    run_lfss_block_tail(cfg, 1.05, 0.2, 4, 10, 1);
    FAIL() << "expected the closure guard";
  } catch (const std::domain_error& e) {
    EXPECT_NE(std::string(e.what()).find("must exceed 1"), std::string::npos);
  }
  EXPECT_THROW(run_lfss_block_tail(cfg, 1.4, 0.5, 1, 10, 1), std::invalid_argument);
  EXPECT_THROW(run_lfss_block_tail(cfg, 1.4, 0.5, 4, 1, 1), std::invalid_argument);

  LfssConfig flat = cfg;  // hurst at 1/alpha is outside the block regime
  flat.hurst = {1.0 / 1.5};
  EXPECT_THROW(run_lfss_block_tail(flat, 1.4, 0.5, 4, 10, 1), std::invalid_argument);
  LfssConfig gauss = cfg;  // so is alpha = 2
  gauss.alpha = 2.0;
  EXPECT_THROW(run_lfss_block_tail(gauss, 1.4, 0.5, 4, 10, 1), std::invalid_argument);
  LfssConfig planar = cfg;
  planar.d = 2;
  planar.hurst = {0.8, 0.8};
  EXPECT_THROW(run_lfss_block_tail(planar, 1.4, 0.5, 4, 10, 1), std::invalid_argument);
}

TEST(Slln, BlockTailDeterministicAcrossThreads) {
  auto one = run_lfss_block_tail(block_cfg(), 1.4, 0.5, 4, 50, 5, "block-tail", 1);
  auto eight = run_lfss_block_tail(block_cfg(), 1.4, 0.5, 4, 50, 5, "block-tail", 8);
  EXPECT_EQ(one.block_max_moment, eight.block_max_moment);
  auto sone = estimate_sup_increment_moment(block_cfg(), 1.0, 8, 2, 16, 5, "sup-moment", 1);
  auto seight = estimate_sup_increment_moment(block_cfg(), 1.0, 8, 2, 16, 5, "sup-moment", 8);
  EXPECT_EQ(sone.value, seight.value);
  EXPECT_EQ(sone.std_error, seight.std_error);
}

TEST(Slln, NestedRefinementsRaiseTheSup) {
  const LfssConfig cfg = block_cfg();
  auto ests = estimate_sup_increment_moments(cfg, 1.0, 8, {1, 2, 4}, 8, 99);
  ASSERT_EQ(ests.size(), 3u);
  const double hsum = 0.8;
  for (const auto& e : ests) {
    EXPECT_EQ(e.side, 8);
    EXPECT_DOUBLE_EQ(e.gamma, 1.0);
    EXPECT_GT(e.value, 0.0);
    EXPECT_DOUBLE_EQ(e.c6, e.value / std::pow(8.0, 1.0 * hsum));
  }
  EXPECT_EQ(ests[0].refine, 1);
  EXPECT_EQ(ests[1].refine, 2);
  EXPECT_EQ(ests[2].refine, 4);
  // One simulation serves all three lattices, so refining only adds candidate points.
  EXPECT_LE(ests[0].value, ests[1].value);
  EXPECT_LE(ests[1].value, ests[2].value);
  EXPECT_GT(ests[2].value, ests[0].value);
}

TEST(Slln, SideRefineExchangeLeavesConstant) {
  const LfssConfig cfg = block_cfg();
  const double gamma = 1.2;
  // Both calls scan the same 32-cell simulation, so the dilation law is exact.
  auto coarse = estimate_sup_increment_moment(cfg, gamma, 16, 2, 6, 4242);
  auto fine = estimate_sup_increment_moment(cfg, gamma, 8, 4, 6, 4242);
  const double factor = std::pow(2.0, gamma * 0.8);
  EXPECT_NEAR(coarse.value / fine.value, factor, 1e-12 * factor);
  EXPECT_NEAR(coarse.c6, fine.c6, 1e-12 * fine.c6);
}

TEST(Slln, SupConstantStableAcrossSides) {
  const LfssConfig cfg = block_cfg();
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (int side : {2, 4, 8, 16}) {
    auto est = estimate_sup_increment_moment(cfg, 1.0, side, 2, 64, 31);
    lo = std::min(lo, est.c6);
    hi = std::max(hi, est.c6);
  }
  EXPECT_GT(lo, 0.0);
  EXPECT_LE(hi / lo, 2.5);
}

TEST(Slln, SupMomentValidatesArguments) {
  const LfssConfig cfg = block_cfg();
  EXPECT_THROW(estimate_sup_increment_moments(cfg, 1.5, 4, {1}, 4, 1), std::domain_error);
  EXPECT_THROW(estimate_sup_increment_moments(cfg, -1.0, 4, {1}, 4, 1), std::domain_error);
  EXPECT_THROW(estimate_sup_increment_moments(cfg, 1.0, 0, {1}, 4, 1), std::invalid_argument);
  EXPECT_THROW(estimate_sup_increment_moments(cfg, 1.0, 4, {}, 4, 1), std::invalid_argument);
  EXPECT_THROW(estimate_sup_increment_moments(cfg, 1.0, 4, {2, 2}, 4, 1), std::invalid_argument);
  EXPECT_THROW(estimate_sup_increment_moments(cfg, 1.0, 4, {2, 3}, 4, 1), std::invalid_argument);
  EXPECT_THROW(estimate_sup_increment_moments(cfg, 1.0, 4, {0}, 4, 1), std::invalid_argument);
  EXPECT_THROW(estimate_sup_increment_moments(cfg, 1.0, 4, {1}, 1, 1), std::invalid_argument);

  LfssConfig planar = block_cfg();
  planar.d = 2;
  planar.hurst = {0.8, 0.8};
  try {
    // 5000^2 refined cells overruns the scan budget.
    estimate_sup_increment_moments(planar, 1.0, 5000, {1}, 4, 1);
    FAIL() << "expected the budget guard";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("beyond the scan budget"), std::string::npos);
  }
}

}  // namespace
