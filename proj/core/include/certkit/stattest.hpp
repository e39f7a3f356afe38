#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>

#include "certkit/core.hpp"

namespace certkit {

enum class Decision { reject_H0, fail_to_reject };

std::string_view to_string(Decision d) noexcept;

/// Rejects iff alpha > 0 and p <= alpha. A hypothesis that was allocated no
/// significance level can never be rejected.
Decision decide(double p_value, double alpha) noexcept;

/// Outcome of a one-sided test. Every MPR is normalised so that rejecting
/// H0 means "requirement demonstrated"; `conf_bound` is the lower bound
/// for at_least and the upper bound for at_most, at level 1 - alpha_used.
/// Inputs needed for third-party reproduction travel with the result.
struct TestResult {
  std::string test_id;
  double statistic = 0.0;
  double p_value = 1.0;
  double conf_bound = 0.0;
  double alpha_used = 0.0;
  Decision decision = Decision::fail_to_reject;
  std::size_t n = 0;

  double threshold = 0.0;
  Direction direction = Direction::at_least;
  std::optional<std::size_t> successes;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> resamples;

  /// Re-derive the decision for a different level (used by multiplicity
  /// procedures, which fix alpha after the p-value is known).
  void set_alpha(double alpha) noexcept {
    alpha_used = alpha;
    decision = decide(p_value, alpha);
  }
};

/// P(X >= k) for X ~ Binomial(n, p). Log-space summation outward from the
/// mode with the ratio recurrence, anchored by one lgamma evaluation.
double binomial_upper_tail(std::uint64_t k, std::uint64_t n, double p);

/// P(X <= k) for X ~ Binomial(n, p).
double binomial_lower_tail(std::uint64_t k, std::uint64_t n, double p);

/// Exact one-sided binomial test. For at_least, H0: p <= p0 and the
/// p-value is P(X >= k | p0); for at_most, H0: p >= p0 and it is
/// P(X <= k | p0). p0 in {0, 1} is answered by the degenerate
/// distribution rather than rejected as invalid.
TestResult binomial_test_one_sided(std::uint64_t k, std::uint64_t n, double p0, Direction direction,
                                   double alpha);

enum class BoundSide { lower, upper };

/// One-sided Clopper-Pearson bound at level 1 - alpha, found by bisection
/// on the exact tail. lower(k = 0) = 0 and upper(k = n) = 1.
double clopper_pearson_bound(std::uint64_t k, std::uint64_t n, double alpha, BoundSide side);

inline constexpr std::size_t kBootstrapMinSamples = 20;
inline constexpr std::size_t kBootstrapMinResamples = 1000;

/// Percentile bootstrap test on the mean of `values`.
///
/// The input is sorted before resampling, so the result does not depend on
/// the input order. Resample b draws its indices from
/// Rng(derive_seed(seed, b)), which makes any partitioning of the resample
/// loop produce identical output. The p-value is (r + 1) / (B + 1) where r
/// counts resampled means on the H0 side of the threshold (<= threshold
/// for at_least, >= threshold for at_most).
TestResult bootstrap_test_one_sided(std::span<const double> values, double threshold, Direction direction,
                                    std::size_t resamples, double alpha, std::uint64_t seed);

/// Shared tail of every bootstrap-style test: given replicate statistics,
/// computes the corrected p-value and the percentile bound. Quantiles use
/// the inverse empirical CDF (order statistic ceil(q * B)).
TestResult bootstrap_result_from_replicates(std::string test_id, std::span<const double> replicates,
                                            double observed, double threshold, Direction direction,
                                            double alpha, std::size_t n, std::uint64_t seed);

/// Computes the MPR's metric and dispatches to its declared test.
/// Proportion metrics use (k, n) directly; bootstrap tests run on the
/// per-sample values whose mean is the metric (correctness indicators for
/// proportions, squared errors for mse; rmse is tested as mse against
/// threshold^2, reporting the bound back on the rmse scale).
std::pair<MetricValue, TestResult> evaluate_mpr(const Dataset& dataset, const MprSpec& mpr, double alpha,
                                                std::uint64_t seed = 0);

}  // namespace certkit
