#include <gtest/gtest.h>

#include <set>

#include "xenav/rng.hpp"

using namespace xenav;

// Reference values come from an independent Python implementation of the
// generators; see docs/prng.md.

TEST(Rng, SplitSeedVectors)
{
    EXPECT_EQ(mix64(0), 16294208416658607535ULL);
    EXPECT_EQ(split_seed(0, 0), 12620847990533781122ULL);
    EXPECT_EQ(split_seed(1, 0), 578543533230821686ULL);
    EXPECT_EQ(split_seed(42, 7), 9712691373579149495ULL);
    EXPECT_EQ(split_seed(~0ULL, 123456789), 4325449278136612991ULL);
}

TEST(Rng, EngineVectors)
{
    Rng a(0);
    EXPECT_EQ(a.next_u64(), 2947667278772165694ULL);
    Rng b(1);
    EXPECT_EQ(b.next_u64(), 2469588189546311528ULL);
    Rng c(42);
    EXPECT_EQ(c.next_u64(), 13930160852258120406ULL);

    Rng d(5489);
    for (int i = 0; i < 9999; ++i) {
        d.next_u64();
    }
    EXPECT_EQ(d.next_u64(), 9981545732273789042ULL);
}

TEST(Rng, Uniform01UsesTop53Bits)
{
    Rng r(42);
    EXPECT_EQ(r.uniform01(), static_cast<double>(13930160852258120406ULL >> 11) * 0x1.0p-53);
    Rng s(7);
    for (int i = 0; i < 10000; ++i) {
        const double u = s.uniform01();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
    }
}

TEST(Rng, UniformDegenerateInterval)
{
    Rng r(3);
    EXPECT_EQ(r.uniform(0.25, 0.25), 0.25);
}

TEST(Rng, UniformIntCoversInclusiveRange)
{
    Rng r(11);
    std::set<std::int64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        const auto v = r.uniform_int(-3, 3);
        ASSERT_GE(v, -3);
        ASSERT_LE(v, 3);
        seen.insert(v);
    }
    EXPECT_EQ(seen.size(), 7U);
}

TEST(Rng, SplitSeedChildrenDistinct)
{
    std::set<std::uint64_t> seen;
    for (std::uint64_t i = 0; i < 10000; ++i) {
        seen.insert(split_seed(99, i));
    }
    EXPECT_EQ(seen.size(), 10000U);
}
