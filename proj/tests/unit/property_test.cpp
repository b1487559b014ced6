#include <gtest/gtest.h>

#include "support/properties.hpp"

namespace rwad {
namespace {

TEST(Properties, TenThousandRandomCases) {
  const testing::PropertyTally t = testing::run_property_cases(10000, 2024);
  EXPECT_EQ(t.total, 10000);
  EXPECT_EQ(t.cases.size(), 5u);
  for (const auto& f : t.failures) ADD_FAILURE() << f;
  EXPECT_EQ(t.failed, 0);
}

}  // namespace
}  // namespace rwad
