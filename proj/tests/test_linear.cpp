#include <gtest/gtest.h>

#include <random>
#include <set>

#include "popproto/linear.hpp"

using namespace popproto;

namespace {

/// Every base + sum n_i p_i with n_i <= cap, kept if it fits inside box.
std::set<Vec> enumerate_coset(const PeriodicCoset& P, std::int64_t cap, std::int64_t box) {
  std::set<Vec> out;
  std::vector<std::int64_t> n(P.periods.size(), 0);
  for (;;) {
    Vec v = P.base;
    for (std::size_t i = 0; i < n.size(); ++i)
      for (std::size_t j = 0; j < v.size(); ++j) v[j] += n[i] * P.periods[i][j];
    bool inside = true;
    for (auto x : v) inside = inside && x <= box;
    if (inside) out.insert(v);
    std::size_t i = 0;
    while (i < n.size() && n[i] == cap) n[i++] = 0;
    if (i == n.size()) break;
    ++n[i];
  }
  return out;
}

}  // namespace

TEST(Coset, MembershipMatchesEnumeration) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 150; ++trial) {
    std::size_t k = 1 + rng() % 3, l = rng() % 4;
    Vec base(k);
    for (auto& x : base) x = std::int64_t(rng() % 3);
    std::vector<Vec> periods(l, Vec(k));
    for (auto& p : periods)
      for (auto& x : p) x = std::int64_t(rng() % 3);
    PeriodicCoset P(base, periods);
    const std::int64_t box = 6;
    auto members = enumerate_coset(P, box, box);
    Vec v(k, 0);
    for (;;) {
      EXPECT_EQ(coset_member(P, v), members.count(v) > 0);
      std::size_t i = 0;
      while (i < k && v[i] == box) v[i++] = 0;
      if (i == k) break;
      ++v[i];
    }
  }
}

TEST(Coset, RejectsBadInput) {
  EXPECT_THROW(PeriodicCoset({-1}, {}), DomainError);
  EXPECT_THROW(PeriodicCoset({0}, {{-1}}), DomainError);
  EXPECT_THROW(PeriodicCoset({0, 0}, {{1}}), DimensionMismatch);
  EXPECT_THROW(coset_member(PeriodicCoset({0}, {{1}}), {1, 1}), DimensionMismatch);
}

TEST(Semilinear, EvenOrAtLeastFive) {
  SemilinearSet S{{PeriodicCoset({0}, {{2}}), PeriodicCoset({5}, {{1}})}};
  for (std::int64_t v = 0; v < 20; ++v) EXPECT_EQ(semilinear_member(S, {v}), v % 2 == 0 || v >= 5) << v;
  SemilinearSet back = semilinear_from_json(to_json(S));
  for (std::int64_t v = 0; v < 20; ++v) EXPECT_EQ(semilinear_member(back, {v}), semilinear_member(S, {v}));
}

TEST(Density, ThresholdIsInclusive) {
  EXPECT_TRUE(is_alpha_dense(std::vector<Count>{1, 3, 0}, Rational(1, 4)));
  EXPECT_FALSE(is_alpha_dense(std::vector<Count>{1, 4, 0}, Rational(1, 4)));
  EXPECT_TRUE(is_alpha_dense(std::vector<Count>{7}, Rational(1)));
  EXPECT_FALSE(is_alpha_dense(std::vector<Count>{1, 1}, Rational(1)));
  EXPECT_TRUE(is_alpha_dense(std::vector<Count>{}, Rational(1, 2)));
  EXPECT_THROW(is_alpha_dense(std::vector<Count>{1}, Rational(0)), DomainError);
  EXPECT_THROW(is_alpha_dense(std::vector<Count>{1}, Rational(3, 2)), DomainError);
}

TEST(Density, HugeCountsDoNotOverflow) {
  const Count big = Count(1) << 62;
  EXPECT_TRUE(is_alpha_dense(std::vector<Count>{big, big, big}, Rational(1, 3)));
  EXPECT_FALSE(is_alpha_dense(std::vector<Count>{big, big, big - 1}, Rational(1, 3)));
}

TEST(LinearSpec, ParseAndEvaluate) {
  LinearSpec s = parse_linear_spec("2/3,1/2");
  ASSERT_EQ(s.coefficients.size(), 2u);
  EXPECT_EQ(s.coefficients[0], Rational(2, 3));
  EXPECT_EQ(s.evaluate({9, 5}), 6 + 2);
  EXPECT_EQ(s.evaluate({1, 1}), 0);
  EXPECT_EQ(parse_linear_spec("4,1,2").evaluate({250, 500, 125}), 1750);
  EXPECT_THROW(parse_linear_spec("1/0"), DomainError);
  EXPECT_THROW(parse_linear_spec("a"), DomainError);
  EXPECT_THROW(parse_linear_spec("1,"), DomainError);
  EXPECT_THROW(s.evaluate({1}), DimensionMismatch);
}

TEST(LinearSpec, Classification) {
  EXPECT_EQ(classify_linear(parse_linear_spec("4,1,2")).kind, LinearKind::NLinear);
  auto q = classify_linear(parse_linear_spec("2/3,1"));
  EXPECT_EQ(q.kind, LinearKind::QNonnegLinear);
  EXPECT_FALSE(q.integer);
  auto n = classify_linear(parse_linear_spec("-1,2"));
  EXPECT_EQ(n.kind, LinearKind::HasNegative);
  EXPECT_TRUE(n.integer);
}

TEST(AffineWindow, RecoversIntegerLinearFunction) {
  auto f = [](const Vec& m) { return 4 * m[0] + m[1] + 2 * m[2]; };
  auto r = check_eventually_affine_window(f, 3, 2, 4);
  ASSERT_TRUE(std::holds_alternative<AffineFit>(r));
  const auto& fit = std::get<AffineFit>(r);
  EXPECT_EQ(fit.b, 0);
  EXPECT_EQ(fit.c, (Vec{4, 1, 2}));
  EXPECT_TRUE(fit.natural_coefficients);
}

TEST(AffineWindow, FlagsFloorAndNegativeCoefficients) {
  auto half = [](const Vec& m) { return m[0] / 2; };
  auto r = check_eventually_affine_window(half, 1, 0, 6);
  ASSERT_TRUE(std::holds_alternative<AffineCounterexample>(r));
  const auto& bad = std::get<AffineCounterexample>(r);
  Vec m = bad.m, m1 = {bad.m[0] + 1}, m2 = {bad.m[0] + 2};
  EXPECT_NE(half(m1) - half(m), half(m2) - half(m1));

  auto diff = [](const Vec& m) { return 7 + m[0] - m[1]; };
  auto d = check_eventually_affine_window(diff, 2, 1, 3);
  ASSERT_TRUE(std::holds_alternative<AffineFit>(d));
  EXPECT_EQ(std::get<AffineFit>(d).b, 7);
  EXPECT_FALSE(std::get<AffineFit>(d).natural_coefficients);

  EXPECT_THROW(check_eventually_affine_window(half, 1, 0, 0), DomainError);
  EXPECT_THROW(check_eventually_affine_window(half, 5, 0, 1), DomainError);
}

TEST(ConstantWindow, ThresholdIsEventuallyConstant) {
  auto phi = [](const Vec& m) { return m[0] + m[1] >= 5; };
  auto early = check_eventually_constant_window(phi, 2, 0, 4);
  ASSERT_TRUE(std::holds_alternative<ConstantCounterexample>(early));
  const auto& c = std::get<ConstantCounterexample>(early);
  EXPECT_NE(phi(c.m), phi(c.m_prime));
  auto late = check_eventually_constant_window(phi, 2, 3, 10);
  ASSERT_TRUE(std::holds_alternative<ConstantOnWindow>(late));
  EXPECT_TRUE(std::get<ConstantOnWindow>(late).value);
}

TEST(ConstantWindow, MajorityIsNot) {
  auto phi = [](const Vec& m) { return m[0] >= m[1]; };
  for (std::int64_t m0 : {1, 10, 100}) {
    auto r = check_eventually_constant_window(phi, 2, m0, 3);
    EXPECT_TRUE(std::holds_alternative<ConstantCounterexample>(r)) << m0;
  }
}
