#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "periodavg/errors.hpp"
#include "periodavg/numkit.hpp"

using namespace pavg;

TEST(Axpy, SpecExamples) {
  EXPECT_EQ(axpy(0.0, ParamVector{5, 5}, ParamVector{1, 2}), (ParamVector{1, 2}));
  EXPECT_EQ(axpy(1.0, ParamVector{1, 1}, ParamVector{0, 0}), (ParamVector{1, 1}));
  const ParamVector r = axpy(-0.1, ParamVector{10, 20}, ParamVector{3, 4});
  EXPECT_NEAR(r[0], 2.0, 1e-15);
  EXPECT_NEAR(r[1], 2.0, 1e-15);
}

TEST(Axpy, LengthMismatchIsDimensionError) {
  EXPECT_THROW(axpy(1.0, ParamVector{1, 2}, ParamVector{1}), DimensionError);
  ParamVector y{1};
  EXPECT_THROW(axpy_inplace(1.0, ParamVector{1, 2}, y), DimensionError);
}

TEST(SqL2Norm, SpecExamples) {
  EXPECT_EQ(sq_l2_norm(ParamVector{0, 0, 0}), 0.0);
  EXPECT_EQ(sq_l2_norm(ParamVector{3, 4}), 25.0);
  EXPECT_EQ(sq_l2_norm(ParamVector{1, 1, 1, 1}), 4.0);
}

TEST(MeanVectors, SpecExamples) {
  std::vector<ParamVector> a = {{1, 3}, {3, 5}};
  EXPECT_EQ(mean_vectors(std::span<const ParamVector>(a)), (ParamVector{2, 4}));
  std::vector<ParamVector> b = {{7}};
  EXPECT_EQ(mean_vectors(std::span<const ParamVector>(b)), (ParamVector{7}));
  std::vector<ParamVector> c = {{1, 0}, {0, 1}, {1, 1}, {2, 2}};
  EXPECT_EQ(mean_vectors(std::span<const ParamVector>(c)), (ParamVector{1, 1}));
}

TEST(MeanVectors, EmptyIsUsageError) {
  std::vector<ParamVector> none;
  EXPECT_THROW(mean_vectors(std::span<const ParamVector>(none)), UsageError);
}

TEST(MeanVectors, CopiesAverageBackBitExactly) {
  RngStream rng(5, 1);
  for (int trial = 0; trial < 200; ++trial) {
    ParamVector v(7);
    for (auto& x : v) x = rng.normal() * std::pow(10.0, static_cast<int>(rng.uniform_below(20)) - 10);
    v[0] = -0.0;
    const std::size_t n = 1 + rng.uniform_below(16);
    std::vector<ParamVector> copies(n, v);
    const ParamVector m = mean_vectors(std::span<const ParamVector>(copies));
    for (std::size_t j = 0; j < v.size(); ++j) {
      EXPECT_EQ(std::signbit(m[j]), std::signbit(v[j]));
      EXPECT_EQ(m[j], v[j]);
    }
  }
}

TEST(MeanVectors, RepeatedCallsAreBitIdentical) {
  RngStream rng(9, 0);
  std::vector<ParamVector> xs(5, ParamVector(11));
  for (auto& x : xs) {
    for (auto& e : x) e = rng.normal();
  }
  const ParamVector first = mean_vectors(std::span<const ParamVector>(xs));
  for (int i = 0; i < 10; ++i) EXPECT_EQ(mean_vectors(std::span<const ParamVector>(xs)), first);
}

TEST(RequireFinite, RejectsNanAndInf) {
  EXPECT_NO_THROW(require_finite(ParamVector{1, 2}, "x"));
  EXPECT_THROW(require_finite(ParamVector{1, NAN}, "x"), NumericError);
  EXPECT_THROW(require_finite(ParamVector{INFINITY}, "x"), NumericError);
}

// Known-answer vectors for Philox4x32-10.
TEST(Philox, KnownAnswers) {
  using A4 = std::array<std::uint32_t, 4>;
  EXPECT_EQ(RngStream::philox({0, 0, 0, 0}, {0, 0}), (A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(RngStream::philox({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
            (A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(RngStream::philox({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
            (A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(RngStream, SameSeedAndStreamReproduceMillionDraws) {
  RngStream a(123, 4);
  RngStream b(123, 4);
  bool equal = true;
  for (int i = 0; i < 1000000; ++i) equal = equal && a.next_u32() == b.next_u32();
  EXPECT_TRUE(equal);
}

TEST(RngStream, DistinctStreamsDiffer) {
  RngStream a(1, 0);
  RngStream b(1, 1);
  RngStream c(2, 0);
  int same_ab = 0, same_ac = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto x = a.next_u32();
    same_ab += x == b.next_u32();
    same_ac += x == c.next_u32();
  }
  EXPECT_LT(same_ab, 3);
  EXPECT_LT(same_ac, 3);
}

TEST(RngStream, DistinctStreamsAreUncorrelated) {
  RngStream a(42, 0);
  RngStream b(42, 1);
  const int n = 200000;
  double sab = 0, sa = 0, sb = 0, saa = 0, sbb = 0;
  for (int i = 0; i < n; ++i) {
    const double x = a.uniform(), y = b.uniform();
    sa += x, sb += y, sab += x * y, saa += x * x, sbb += y * y;
  }
  const double cov = sab / n - (sa / n) * (sb / n);
  const double corr = cov / std::sqrt((saa / n - sa * sa / n / n) * (sbb / n - sb * sb / n / n));
  EXPECT_LT(std::fabs(corr), 5.0 / std::sqrt(static_cast<double>(n)));
}

TEST(RngStream, UniformMomentsAndRange) {
  RngStream rng(7, 3);
  const int n = 200000;
  double sum = 0, sum_sq = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sum_sq += u * u;
  }
  EXPECT_NEAR(sum / n, 0.5, 5 * std::sqrt(1.0 / 12 / n));
  EXPECT_NEAR(sum_sq / n - (sum / n) * (sum / n), 1.0 / 12, 0.002);
}

TEST(RngStream, NormalMoments) {
  RngStream rng(8, 0);
  const int n = 200000;
  double sum = 0, sum_sq = 0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sum_sq += z * z;
  }
  EXPECT_NEAR(sum / n, 0.0, 5.0 / std::sqrt(n));
  EXPECT_NEAR(sum_sq / n, 1.0, 0.02);
}

TEST(RngStream, UniformBelowCoversRangeUniformly) {
  RngStream rng(3, 3);
  std::vector<int> counts(7, 0);
  const int n = 70000;
  for (int i = 0; i < n; ++i) {
    const auto v = rng.uniform_below(7);
    ASSERT_LT(v, 7u);
    ++counts[v];
  }
  for (int c : counts) EXPECT_NEAR(c, n / 7.0, 5 * std::sqrt(n / 7.0));
  EXPECT_THROW(rng.uniform_below(0), UsageError);
}

TEST(Shuffle, IsPermutationAndDeterministic) {
  std::vector<int> a(100), b;
  for (int i = 0; i < 100; ++i) a[i] = i;
  b = a;
  RngStream r1(11, 0), r2(11, 0);
  shuffle(a, r1);
  shuffle(b, r2);
  EXPECT_EQ(a, b);
  EXPECT_EQ(std::set<int>(a.begin(), a.end()).size(), 100u);
  std::vector<int> sorted(100);
  for (int i = 0; i < 100; ++i) sorted[i] = i;
  EXPECT_NE(a, sorted);
}

TEST(Stats, MeanMedianSpread) {
  const std::vector<double> xs = {3, 1, 4, 1, 5};
  EXPECT_DOUBLE_EQ(mean(xs), 2.8);
  EXPECT_EQ(median(xs), 3.0);
  const std::vector<double> even = {4, 1, 3, 2};
  EXPECT_EQ(median(even), 2.5);
  const Spread s = spread(xs);
  EXPECT_EQ(s.min, 1.0);
  EXPECT_EQ(s.median, 3.0);
  EXPECT_EQ(s.max, 5.0);
  EXPECT_NEAR(stddev(std::vector<double>{2, 4, 4, 4, 5, 5, 7, 9}), 2.138089935299395, 1e-12);
}
