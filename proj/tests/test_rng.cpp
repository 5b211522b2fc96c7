#include <fracspde/rng.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

using namespace fracspde;

// Published known-answer vectors for Philox4x32-10.
TEST(Philox, KnownAnswers)
{
  using A4 = std::array<std::uint32_t, 4>;
  EXPECT_EQ(CounterRng::philox4x32_10({0, 0, 0, 0}, {0, 0}), (A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(CounterRng::philox4x32_10({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(CounterRng::philox4x32_10({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(CounterRng, PureFunctionOfPath)
{
  const SeedPath p{11, 3, 17, stream_purpose::noise};
  CounterRng a(p), b(p);
  for (int i = 0; i < 1000; ++i)
    ASSERT_EQ(a(), b());
  // interleaving with another stream changes nothing
  CounterRng c(p), other(SeedPath{11, 4, 17, stream_purpose::noise});
  CounterRng d(p);
  for (int i = 0; i < 100; ++i) {
    (void)other();
    ASSERT_EQ(c.normal(), d.normal());
  }
}

TEST(CounterRng, DistinctStreams)
{
  std::set<std::uint64_t> first;
  for (std::uint64_t seed : {0ull, 1ull})
    for (std::uint64_t rep : {0ull, 1ull, 1ull << 33})
      for (std::uint64_t step : {0ull, 1ull, 1ull << 40})
        for (std::uint32_t purpose : {stream_purpose::noise, stream_purpose::bootstrap}) {
          CounterRng r(SeedPath{seed, rep, step, purpose});
          first.insert(r());
        }
  EXPECT_EQ(first.size(), 2u * 3 * 3 * 2);
}

TEST(CounterRng, UniformAndNormalMoments)
{
  CounterRng r(SeedPath{5, 0, 0, stream_purpose::test});
  const int n = 200000;
  double su = 0, su2 = 0, sn = 0, sn2 = 0, sn4 = 0;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    su += u;
    su2 += u * u;
    const double z = r.normal();
    sn += z;
    sn2 += z * z;
    sn4 += z * z * z * z;
  }
  // 5 standard errors
  EXPECT_NEAR(su / n, 0.5, 5 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(su2 / n, 1.0 / 3, 5 * std::sqrt(4.0 / 45 / n));
  EXPECT_NEAR(sn / n, 0.0, 5 * std::sqrt(1.0 / n));
  EXPECT_NEAR(sn2 / n, 1.0, 5 * std::sqrt(2.0 / n));
  EXPECT_NEAR(sn4 / n, 3.0, 5 * std::sqrt(96.0 / n));
}

TEST(CounterRng, UniformOpenZeroNeverZero)
{
  CounterRng r(SeedPath{0, 0, 0, 0});
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform_open0();
    ASSERT_GT(u, 0.0);
    ASSERT_LE(u, 1.0);
  }
}
