#include <gtest/gtest.h>

#include <algorithm>

#include "slln/multi_index.hpp"

namespace slln {
namespace {

TEST(MultiIndex, NormsAndVolume) {
  MultiIndex n{3, -4, 2};
  EXPECT_EQ(linf_norm(n), 4);
  EXPECT_EQ(l2_norm_sq(n), 9 + 16 + 4);
  EXPECT_EQ(box_volume(MultiIndex{2, 3, 5}), 30);
  EXPECT_EQ(box_volume(MultiIndex{7}), 7);
}

TEST(MultiIndex, Comparisons) {
  EXPECT_TRUE(all_leq(MultiIndex{1, 2}, MultiIndex{1, 3}));
  EXPECT_FALSE(all_leq(MultiIndex{2, 2}, MultiIndex{1, 3}));
  EXPECT_EQ(add(MultiIndex{1, 2}, MultiIndex{3, 4}), (MultiIndex{4, 6}));
  EXPECT_EQ(constant_index(3, 5), (MultiIndex{5, 5, 5}));
}

TEST(MultiIndex, Checks) {
  EXPECT_THROW(check_dim(MultiIndex{1, 2}, 3, "x"), std::invalid_argument);
  EXPECT_NO_THROW(check_dim(MultiIndex{1, 2}, 2, "x"));
  EXPECT_THROW(check_nonnegative(MultiIndex{1, -1}, "x"), std::out_of_range);
  EXPECT_NO_THROW(check_nonnegative(MultiIndex{0, 0}, "x"));
}

// Hand-enumerated: nonnegative lattice points with x^2 + y^2 <= 4 are
// (0,0) (0,1) (0,2) (1,0) (1,1) (2,0).
TEST(MultiIndex, EnumerateL2Ball) {
  auto pts = enumerate_domain(Ball{2, 2.0, Norm::L2});
  ASSERT_EQ(pts.size(), 6u);
  std::vector<MultiIndex> expect = {{0, 0}, {0, 1}, {0, 2}, {1, 0}, {1, 1}, {2, 0}};
  EXPECT_EQ(pts, expect);  // lexicographic order is part of the contract
}

TEST(MultiIndex, EnumerateLinfBallIsCube) {
  auto pts = enumerate_domain(Ball{2, 2.0, Norm::Linf});
  EXPECT_EQ(pts.size(), 9u);
  auto pts3 = enumerate_domain(Ball{3, 1.0, Norm::Linf});
  EXPECT_EQ(pts3.size(), 8u);
}

TEST(MultiIndex, RadiusZeroBallIsEmpty) {
  EXPECT_TRUE(enumerate_domain(Ball{2, 0.0, Norm::L2}).empty());
  EXPECT_TRUE(enumerate_domain(Ball{1, 0.0, Norm::Linf}).empty());
}

// The annulus uses the strict lower bound m < ||k||, so the origin never
// appears, even at m = 0.
TEST(MultiIndex, AnnulusStrictLowerBound) {
  auto ring = enumerate_annulus(2, 1, 1, Norm::L2);
  std::vector<MultiIndex> expect = {{0, 2}, {1, 1}, {2, 0}};
  EXPECT_EQ(ring, expect);

  auto full = enumerate_annulus(2, 0, 2, Norm::L2);
  ASSERT_EQ(full.size(), 5u);  // the 6-point ball minus the origin
  EXPECT_TRUE(std::none_of(full.begin(), full.end(),
                           [](const MultiIndex& k) { return linf_norm(k) == 0; }));

  EXPECT_TRUE(enumerate_annulus(2, 3, 0, Norm::L2).empty());
}

// Shells tile the annulus: the k = 1..n shells of inner radius m partition
// the points with m < ||p|| <= m + n.
TEST(MultiIndex, ShellsPartitionAnnulus) {
  for (Norm norm : {Norm::L2, Norm::Linf}) {
    std::size_t total = 0;
    for (std::int64_t k = 1; k <= 4; ++k) total += enumerate_annulus(2, k - 1, 1, norm).size();
    EXPECT_EQ(total, enumerate_annulus(2, 0, 4, norm).size());
  }
}

}  // namespace
}  // namespace slln
