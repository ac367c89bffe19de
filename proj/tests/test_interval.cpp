#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "koopzubov/interval.hpp"

using namespace kz;

namespace {

bool same(const Interval& a, double lo, double hi) { return a.lo() == lo && a.hi() == hi; }

Interval random_interval(std::mt19937_64& rng, double span = 4.0) {
  std::uniform_real_distribution<double> u(-span, span);
  double a = u(rng), b = u(rng);
  if (a > b) std::swap(a, b);
  return Interval(a, b);
}

double inside(std::mt19937_64& rng, const Interval& a) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  return a.lo() + u(rng) * a.width();
}

}  // namespace

TEST(Interval, EndpointArithmetic) {
  EXPECT_TRUE(same(Interval(1, 2) + Interval(3, 4), 4, 6));
  EXPECT_TRUE(same(Interval(1, 2) * Interval(-1, 3), -2, 6));
  EXPECT_TRUE(same(Interval(0, 0) * Interval(-9, 9), 0, 0));
  EXPECT_TRUE(same(Interval(1, 2) - Interval(3, 4), -3, -1));
  EXPECT_TRUE(same(Interval(2, 4) / Interval(1, 2), 1, 4));
}

TEST(Interval, DivisionThroughZeroIsDomainError) {
  EXPECT_THROW(Interval(1, 2) / Interval(-1, 1), DomainError);
  EXPECT_THROW(Interval(1, 2) / Interval(0, 1), DomainError);
}

TEST(Interval, RejectsReversedEndpoints) { EXPECT_THROW(Interval(2, 1), DomainError); }

TEST(Interval, Elementary) {
  const auto t = tanh(Interval(-1, 2));
  EXPECT_LE(t.lo(), std::tanh(-1.0));
  EXPECT_GE(t.hi(), std::tanh(2.0));
  EXPECT_NEAR(t.lo(), std::tanh(-1.0), 1e-11);
  EXPECT_NEAR(t.hi(), std::tanh(2.0), 1e-11);

  const auto s = sin(Interval(0, std::numbers::pi));
  EXPECT_LE(s.lo(), 0.0);
  EXPECT_NEAR(s.lo(), 0.0, 1e-11);
  EXPECT_GE(s.hi(), 1.0);
  EXPECT_NEAR(s.hi(), 1.0, 1e-11);

  EXPECT_TRUE(same(pow_int(Interval(-2, 1), 2), 0, 4));
  EXPECT_TRUE(same(pow_int(Interval(-2, 1), 3), -8, 1));
  EXPECT_TRUE(same(pow_int(Interval(-3, -1), 0), 1, 1));
  EXPECT_THROW(sqrt(Interval(-1, 1)), DomainError);
  const auto r = sqrt(Interval(4, 9));
  EXPECT_NEAR(r.lo(), 2.0, 1e-11);
  EXPECT_NEAR(r.hi(), 3.0, 1e-11);
  EXPECT_TRUE(abs(Interval(-3, 2)).lo() == 0.0);
}

TEST(Interval, CosAcrossPeriod) {
  const auto c = cos(Interval(-0.5, 7.0));
  EXPECT_LE(c.lo(), -1.0);
  EXPECT_GE(c.hi(), 1.0);
}

// Every real result lies in the interval result, for every operation.
TEST(Interval, FundamentalEnclosureProperty) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10000; ++trial) {
    const Interval a = random_interval(rng), b = random_interval(rng);
    const double x = inside(rng, a), y = inside(rng, b);
    EXPECT_TRUE((a + b).contains(x + y));
    EXPECT_TRUE((a - b).contains(x - y));
    EXPECT_TRUE((a * b).contains(x * y));
    if (!b.contains(0.0)) EXPECT_TRUE((a / b).contains(x / y));
    EXPECT_TRUE(sin(a).contains(std::sin(x)));
    EXPECT_TRUE(cos(a).contains(std::cos(x)));
    EXPECT_TRUE(tanh(a).contains(std::tanh(x)));
    EXPECT_TRUE(exp(a).contains(std::exp(x)));
    EXPECT_TRUE(abs(a).contains(std::fabs(x)));
    EXPECT_TRUE(sqr(a).contains(x * x));
    for (int k = 0; k <= 7; ++k) EXPECT_TRUE(pow_int(a, k).contains(std::pow(x, k))) << k;
    if (a.lo() >= 0) EXPECT_TRUE(sqrt(a).contains(std::sqrt(x)));
  }
}

TEST(Interval, InclusionIsotonicity) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> grow(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    const Interval a = random_interval(rng), b = random_interval(rng);
    const Interval A(a.lo() - grow(rng), a.hi() + grow(rng));
    const Interval B(b.lo() - grow(rng), b.hi() + grow(rng));
    EXPECT_TRUE((A + B).contains(a + b));
    EXPECT_TRUE((A - B).contains(a - b));
    EXPECT_TRUE((A * B).contains(a * b));
    EXPECT_TRUE(sin(A).contains(sin(a)));
    EXPECT_TRUE(tanh(A).contains(tanh(a)));
    EXPECT_TRUE(pow_int(A, 3).contains(pow_int(a, 3)));
    EXPECT_TRUE(pow_int(A, 4).contains(pow_int(a, 4)));
  }
}

TEST(Box, SplitWidestDimension) {
  const Box b{Interval(0, 2), Interval(0, 1)};
  const auto [l, r] = b.split();
  EXPECT_EQ(l, (Box{Interval(0, 1), Interval(0, 1)}));
  EXPECT_EQ(r, (Box{Interval(1, 2), Interval(0, 1)}));

  const Box tall{Interval(0, 1), Interval(0, 4)};
  EXPECT_EQ(tall.widest_dim(), 1u);
  const auto [lo, hi] = tall.split();
  EXPECT_EQ(lo[1].hi(), 2.0);
  EXPECT_EQ(hi[1].lo(), 2.0);
  // Halves cover the parent exactly.
  EXPECT_EQ(lo[1].lo(), tall[1].lo());
  EXPECT_EQ(hi[1].hi(), tall[1].hi());
  EXPECT_EQ(lo[0], tall[0]);

  State p(2);
  p << 0.3, 0.7;
  EXPECT_THROW(Box::point(p).split(), DomainError);
}

TEST(Interval, NormSquaredBound) {
  std::vector<Interval> v{Interval(3), Interval(4)};
  EXPECT_TRUE(same(norm_sq_bound(v), 25, 25));
  v = {Interval(-1, 1), Interval(0)};
  EXPECT_TRUE(same(norm_sq_bound(v), 0, 1));
  v = {Interval(1, 2), Interval(1, 2)};
  EXPECT_TRUE(same(norm_sq_bound(v), 2, 8));
}
