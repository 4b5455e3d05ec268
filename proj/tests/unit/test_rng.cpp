#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "defglm/rng.hpp"

using namespace defglm;

TEST(Rng, DerivedSeedsDependOnKeyOrderAndValues) {
  EXPECT_EQ(derive_seed(1, {2, 3}), derive_seed(1, {2, 3}));
  EXPECT_NE(derive_seed(1, {2, 3}), derive_seed(1, {3, 2}));
  EXPECT_NE(derive_seed(1, {2}), derive_seed(2, {2}));
  EXPECT_NE(derive_seed(1, {}), derive_seed(1, {0}));
  std::set<std::uint64_t> seen;
  for (std::uint64_t r = 0; r < 1000; ++r) seen.insert(derive_seed(7, {r}));
  EXPECT_EQ(seen.size(), 1000u);
}

TEST(Rng, StreamsAreReproducible) {
  Rng a = make_stream(42, {1, 2});
  Rng b = make_stream(42, {1, 2});
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a(), b());
}

TEST(Rng, UniformAndNormalMoments) {
  Rng rng = make_stream(5, {});
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = uniform01(rng);
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    const double z = standard_normal(rng);
    sn += z;
    sn2 += z * z;
  }
  EXPECT_NEAR(su / n, 0.5, 3 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(sn / n, 0.0, 3 / std::sqrt(n));
  EXPECT_NEAR(sn2 / n, 1.0, 3 * std::sqrt(2.0 / n));
}
