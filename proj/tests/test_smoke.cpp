#include <gtest/gtest.h>

#include "slln/slln.hpp"

TEST(Smoke, HeadersCompileAndLink) {
  slln::MultiIndex n{2, 3};
  EXPECT_EQ(slln::box_volume(n), 6);
}
