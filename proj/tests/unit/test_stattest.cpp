#include <algorithm>
#include <cmath>

#include <boost/math/special_functions/beta.hpp>
#include <gtest/gtest.h>

#include "certkit/random.hpp"
#include "certkit/stattest.hpp"
#include "fixtures.hpp"

namespace certkit {
namespace {

// Direct term-by-term summation in long double; each term from lgammal.
long double upper_tail_oracle(std::uint64_t k, std::uint64_t n, long double p) {
  if (k == 0) return 1.0L;
  if (p <= 0.0L) return 0.0L;
  if (p >= 1.0L) return 1.0L;
  long double sum = 0.0L;
  for (std::uint64_t i = k; i <= n; ++i) {
    const long double log_term = std::lgammal(n + 1.0L) - std::lgammal(i + 1.0L) - std::lgammal(n - i + 1.0L) +
                                 i * std::log(p) + (n - i) * std::log1p(-p);
    sum += std::exp(log_term);
  }
  return sum;
}

TEST(BinomialTail, MatchesDirectSummation) {
  for (std::uint64_t n : {1u, 2u, 7u, 50u, 100u, 200u, 1000u}) {
    for (double p : {0.01, 0.3, 0.5, 0.9, 0.999}) {
      for (std::uint64_t k = 0; k <= n; k += std::max<std::uint64_t>(1, n / 25)) {
        const double got = binomial_upper_tail(k, n, p);
        const long double want = upper_tail_oracle(k, n, p);
        EXPECT_NEAR(got, static_cast<double>(want), 1e-12 + 1e-10 * static_cast<double>(want))
            << "k=" << k << " n=" << n << " p=" << p;
      }
    }
  }
}

TEST(BinomialTail, AgreesWithRegularisedIncompleteBeta) {
  Rng rng(11);
  for (int t = 0; t < 500; ++t) {
    const std::uint64_t n = 1 + rng.uniform_index(2000);
    const std::uint64_t k = 1 + rng.uniform_index(n);
    const double p = rng.uniform(0.001, 0.999);
    // P(X >= k) = I_p(k, n - k + 1)
    const double want = boost::math::ibeta(static_cast<double>(k), static_cast<double>(n - k + 1), p);
    EXPECT_NEAR(binomial_upper_tail(k, n, p), want, 1e-11 + 1e-9 * want);
    EXPECT_NEAR(binomial_lower_tail(k - 1, n, p), 1.0 - want, 1e-11 + 1e-9 * (1.0 - want));
  }
}

TEST(BinomialTest, ReproducesPublishedTable) {
  const auto small = binomial_test_one_sided(94, 100, 0.9, Direction::at_least, 0.05);
  EXPECT_NEAR(small.p_value, 0.117, 0.001);
  EXPECT_NEAR(small.conf_bound, 0.885, 0.001);
  EXPECT_EQ(small.decision, Decision::fail_to_reject);
  EXPECT_DOUBLE_EQ(small.statistic, 0.94);

  const auto large = binomial_test_one_sided(188, 200, 0.9, Direction::at_least, 0.05);
  EXPECT_NEAR(large.p_value, 0.032, 0.001);
  EXPECT_NEAR(large.conf_bound, 0.904, 0.001);
  EXPECT_EQ(large.decision, Decision::reject_H0);
}

TEST(BinomialTest, FrozenDerivedValues) {
  // Frozen from the long-double summation oracle above.
  EXPECT_NEAR(binomial_test_one_sided(94, 100, 0.9, Direction::at_least, 0.05).p_value,
              static_cast<double>(upper_tail_oracle(94, 100, 0.9L)), 1e-13);
  EXPECT_NEAR(binomial_test_one_sided(188, 200, 0.9, Direction::at_least, 0.05).p_value,
              static_cast<double>(upper_tail_oracle(188, 200, 0.9L)), 1e-13);
}

TEST(BinomialTest, DegenerateNullsAndErrors) {
  EXPECT_DOUBLE_EQ(binomial_test_one_sided(5, 10, 0.0, Direction::at_least, 0.05).p_value, 0.0);
  EXPECT_DOUBLE_EQ(binomial_test_one_sided(0, 10, 0.0, Direction::at_least, 0.05).p_value, 1.0);
  EXPECT_DOUBLE_EQ(binomial_test_one_sided(10, 10, 1.0, Direction::at_least, 0.05).p_value, 1.0);
  EXPECT_DOUBLE_EQ(binomial_test_one_sided(10, 10, 1.0, Direction::at_most, 0.05).p_value, 1.0);
  EXPECT_CERTKIT_ERROR(binomial_test_one_sided(11, 10, 0.5, Direction::at_least, 0.05), ErrorCode::InvalidCount);
  EXPECT_CERTKIT_ERROR(binomial_test_one_sided(0, 0, 0.5, Direction::at_least, 0.05), ErrorCode::InvalidCount);
  EXPECT_CERTKIT_ERROR(binomial_test_one_sided(1, 10, 0.5, Direction::at_least, 1.0), ErrorCode::InvalidAlpha);
  EXPECT_CERTKIT_ERROR(binomial_test_one_sided(1, 10, 1.5, Direction::at_least, 0.05), ErrorCode::InvalidArgument);
}

TEST(BinomialTest, ZeroAlphaNeverRejects) {
  const auto r = binomial_test_one_sided(100, 100, 0.5, Direction::at_least, 0.0);
  EXPECT_LT(r.p_value, 1e-20);
  EXPECT_EQ(r.decision, Decision::fail_to_reject);
}

TEST(ClopperPearson, MatchesInverseIncompleteBeta) {
  Rng rng(12);
  for (int t = 0; t < 500; ++t) {
    const std::uint64_t n = 1 + rng.uniform_index(1000);
    const std::uint64_t k = rng.uniform_index(n + 1);
    const double alpha = rng.uniform(0.001, 0.2);
    const double lower = clopper_pearson_bound(k, n, alpha, BoundSide::lower);
    const double upper = clopper_pearson_bound(k, n, alpha, BoundSide::upper);
    const double want_lower =
        k == 0 ? 0.0 : boost::math::ibeta_inv(static_cast<double>(k), static_cast<double>(n - k + 1), alpha);
    const double want_upper =
        k == n ? 1.0 : boost::math::ibeta_inv(static_cast<double>(k + 1), static_cast<double>(n - k), 1.0 - alpha);
    EXPECT_NEAR(lower, want_lower, 1e-9) << k << "/" << n;
    EXPECT_NEAR(upper, want_upper, 1e-9) << k << "/" << n;
    EXPECT_LE(lower, static_cast<double>(k) / static_cast<double>(n) + 1e-12);
    EXPECT_GE(upper, static_cast<double>(k) / static_cast<double>(n) - 1e-12);
  }
}

// Test/interval duality: reject at level alpha iff p0 is below the lower bound.
TEST(BinomialProperty, DecisionDualToLowerBound) {
  Rng rng(13);
  int checked = 0;
  for (int t = 0; t < 2000; ++t) {
    const std::uint64_t n = 5 + rng.uniform_index(500);
    const std::uint64_t k = rng.uniform_index(n + 1);
    const double p0 = rng.uniform(0.01, 0.99);
    const auto r = binomial_test_one_sided(k, n, p0, Direction::at_least, 0.05);
    if (std::abs(r.conf_bound - p0) < 1e-7) continue;
    EXPECT_EQ(r.decision == Decision::reject_H0, r.conf_bound > p0) << k << "/" << n << " p0=" << p0;
    ++checked;
  }
  EXPECT_GT(checked, 1900);
}

TEST(BinomialProperty, PValueMonotone) {
  for (std::uint64_t k = 0; k < 100; ++k) {
    EXPECT_GE(binomial_upper_tail(k, 100, 0.9), binomial_upper_tail(k + 1, 100, 0.9));
  }
  double prev = 0.0;
  for (double p0 = 0.05; p0 < 1.0; p0 += 0.05) {
    const double p = binomial_test_one_sided(60, 100, p0, Direction::at_least, 0.05).p_value;
    EXPECT_GE(p, prev);
    prev = p;
  }
}

TEST(BinomialProperty, AtMostMirrorsAtLeast) {
  for (std::uint64_t k = 0; k <= 40; ++k) {
    const auto hi = binomial_test_one_sided(k, 40, 0.3, Direction::at_most, 0.05);
    const auto lo = binomial_test_one_sided(40 - k, 40, 0.7, Direction::at_least, 0.05);
    EXPECT_NEAR(hi.p_value, lo.p_value, 1e-13);
    EXPECT_NEAR(hi.conf_bound, 1.0 - lo.conf_bound, 1e-9);
  }
}

std::vector<double> normal_values(std::size_t n, double mean, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal(mean, 1.0);
  return v;
}

TEST(Bootstrap, PValueFollowsDocumentedScheme) {
  const auto values = normal_values(40, 0.3, 21);
  const auto r = bootstrap_test_one_sided(values, 0.0, Direction::at_least, 1000, 0.05, 77);
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  std::size_t null_side = 0;
  for (std::size_t b = 0; b < 1000; ++b) {
    Rng rng(derive_seed(77, b));
    double sum = 0.0;
    for (std::size_t i = 0; i < sorted.size(); ++i) sum += sorted[rng.uniform_index(sorted.size())];
    null_side += sum / 40.0 <= 0.0 ? 1 : 0;
  }
  EXPECT_DOUBLE_EQ(r.p_value, static_cast<double>(null_side + 1) / 1001.0);
  EXPECT_EQ(*r.seed, 77u);
  EXPECT_EQ(*r.resamples, 1000u);
}

TEST(Bootstrap, OrderInvariantAndDeterministic) {
  auto values = normal_values(30, 0.5, 22);
  const auto a = bootstrap_test_one_sided(values, 0.0, Direction::at_least, 2000, 0.05, 5);
  std::reverse(values.begin(), values.end());
  const auto b = bootstrap_test_one_sided(values, 0.0, Direction::at_least, 2000, 0.05, 5);
  EXPECT_EQ(a.p_value, b.p_value);
  EXPECT_EQ(a.conf_bound, b.conf_bound);
}

TEST(Bootstrap, PowerAndBoundSide) {
  const auto strong = bootstrap_test_one_sided(normal_values(200, 1.0, 23), 0.0, Direction::at_least, 1000, 0.05, 1);
  EXPECT_EQ(strong.decision, Decision::reject_H0);
  EXPECT_DOUBLE_EQ(strong.p_value, 1.0 / 1001.0);
  EXPECT_GT(strong.conf_bound, 0.0);
  EXPECT_LT(strong.conf_bound, strong.statistic);
  const auto upper = bootstrap_test_one_sided(normal_values(200, -1.0, 24), 0.0, Direction::at_most, 1000, 0.05, 1);
  EXPECT_EQ(upper.decision, Decision::reject_H0);
  EXPECT_GT(upper.conf_bound, upper.statistic);
}

TEST(Bootstrap, Errors) {
  const auto few = normal_values(19, 0.0, 1);
  EXPECT_CERTKIT_ERROR(bootstrap_test_one_sided(few, 0.0, Direction::at_least, 1000, 0.05, 1),
                       ErrorCode::TooFewSamples);
  const auto ok = normal_values(20, 0.0, 1);
  EXPECT_CERTKIT_ERROR(bootstrap_test_one_sided(ok, 0.0, Direction::at_least, 999, 0.05, 1),
                       ErrorCode::InvalidResampleCount);
}

TEST(EvaluateMpr, DispatchesOnTestKind) {
  const auto d = testing::correctness_dataset(200, 188);
  MprSpec mpr{"acc", "accuracy", 0.9, Direction::at_least, 1.0, TestKind::exact_binomial, 2000};
  const auto [metric, exact] = evaluate_mpr(d, mpr, 0.05);
  EXPECT_EQ(exact.test_id, "exact_binomial");
  EXPECT_NEAR(exact.p_value, 0.032, 0.001);
  EXPECT_DOUBLE_EQ(metric.value, 0.94);

  mpr.test_kind = TestKind::bootstrap;
  const auto [m2, boot] = evaluate_mpr(d, mpr, 0.05, 3);
  EXPECT_EQ(boot.test_id, "bootstrap_mean");
  EXPECT_DOUBLE_EQ(boot.statistic, 0.94);
  EXPECT_GT(boot.p_value, 0.0);
  EXPECT_LT(boot.p_value, 0.2);
}

}  // namespace
}  // namespace certkit
