#include "certkit/stattest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "certkit/random.hpp"

namespace certkit {

std::string_view to_string(Decision d) noexcept {
  return d == Decision::reject_H0 ? "reject_H0" : "fail_to_reject";
}

Decision decide(double p_value, double alpha) noexcept {
  return (alpha > 0.0 && p_value <= alpha) ? Decision::reject_H0 : Decision::fail_to_reject;
}

namespace {

double log_binomial_pmf(std::uint64_t i, std::uint64_t n, double log_p, double log_q) {
  const double dn = static_cast<double>(n);
  const double di = static_cast<double>(i);
  return std::lgamma(dn + 1.0) - std::lgamma(di + 1.0) - std::lgamma(dn - di + 1.0) + di * log_p +
         (dn - di) * log_q;
}

/// Sum of pmf over [lo, hi] for 0 < p < 1. The pmf is unimodal, so the sum
/// is anchored at the largest term inside the range and accumulated outward
/// until terms stop contributing at double precision.
double binomial_range_sum(std::uint64_t lo, std::uint64_t hi, std::uint64_t n, double p) {
  if (lo > hi) return 0.0;
  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  const double log_odds = log_p - log_q;
  const auto mode = static_cast<std::uint64_t>(std::floor((static_cast<double>(n) + 1.0) * p));
  const std::uint64_t anchor = std::clamp(std::min(mode, n), lo, hi);
  const double log_anchor = log_binomial_pmf(anchor, n, log_p, log_q);

  constexpr double kNegligible = 1e-20;
  double sum = 1.0;
  // upward: pmf(i+1)/pmf(i) = (n-i)/(i+1) * p/q
  double rel = 0.0;
  for (std::uint64_t i = anchor; i < hi; ++i) {
    rel += std::log(static_cast<double>(n - i) / static_cast<double>(i + 1)) + log_odds;
    const double t = std::exp(rel);
    sum += t;
    if (t < kNegligible * sum) break;
  }
  rel = 0.0;
  for (std::uint64_t i = anchor; i > lo; --i) {
    rel += std::log(static_cast<double>(i) / static_cast<double>(n - i + 1)) - log_odds;
    const double t = std::exp(rel);
    sum += t;
    if (t < kNegligible * sum) break;
  }
  return std::min(1.0, std::exp(log_anchor + std::log(sum)));
}

void check_counts(std::uint64_t k, std::uint64_t n) {
  if (n == 0) throw Error(ErrorCode::InvalidCount, "n must be at least 1");
  if (k > n) throw Error(ErrorCode::InvalidCount, "k=" + std::to_string(k) + " exceeds n=" + std::to_string(n));
}

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidAlpha, "alpha must lie in [0,1)");
}

}  // namespace

double binomial_upper_tail(std::uint64_t k, std::uint64_t n, double p) {
  if (k == 0) return 1.0;
  if (k > n) return 0.0;
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  return binomial_range_sum(k, n, n, p);
}

double binomial_lower_tail(std::uint64_t k, std::uint64_t n, double p) {
  if (k >= n) return 1.0;
  if (p <= 0.0) return 1.0;
  if (p >= 1.0) return 0.0;
  return binomial_range_sum(0, k, n, p);
}

double clopper_pearson_bound(std::uint64_t k, std::uint64_t n, double alpha, BoundSide side) {
  check_counts(k, n);
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorCode::InvalidAlpha, "alpha must lie in (0,1)");
  if (side == BoundSide::lower && k == 0) return 0.0;
  if (side == BoundSide::upper && k == n) return 1.0;

  // lower: P(X >= k | p) is increasing in p; upper: P(X <= k | p) is decreasing.
  double lo = 0.0;
  double hi = 1.0;
  for (int iter = 0; iter < 200 && hi - lo > 1e-15; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const bool below = side == BoundSide::lower ? binomial_upper_tail(k, n, mid) < alpha
                                                : binomial_lower_tail(k, n, mid) > alpha;
    (below ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

TestResult binomial_test_one_sided(std::uint64_t k, std::uint64_t n, double p0, Direction direction,
                                   double alpha) {
  check_counts(k, n);
  check_alpha(alpha);
  if (!(p0 >= 0.0 && p0 <= 1.0)) throw Error(ErrorCode::InvalidArgument, "p0 must lie in [0,1]");

  TestResult r;
  r.test_id = "exact_binomial";
  r.n = n;
  r.successes = k;
  r.threshold = p0;
  r.direction = direction;
  r.statistic = static_cast<double>(k) / static_cast<double>(n);
  r.p_value = direction == Direction::at_least ? binomial_upper_tail(k, n, p0) : binomial_lower_tail(k, n, p0);
  const double bound_alpha = alpha > 0.0 ? alpha : 0.05;
  r.conf_bound = clopper_pearson_bound(k, n, bound_alpha,
                                       direction == Direction::at_least ? BoundSide::lower : BoundSide::upper);
  r.set_alpha(alpha);
  return r;
}

TestResult bootstrap_result_from_replicates(std::string test_id, std::span<const double> replicates,
                                            double observed, double threshold, Direction direction,
                                            double alpha, std::size_t n, std::uint64_t seed) {
  const std::size_t B = replicates.size();
  std::size_t on_null_side = 0;
  for (double m : replicates) {
    const bool null_side = direction == Direction::at_least ? m <= threshold : m >= threshold;
    on_null_side += null_side ? 1 : 0;
  }
  std::vector<double> sorted(replicates.begin(), replicates.end());
  std::sort(sorted.begin(), sorted.end());
  const auto quantile = [&](double q) {
    const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(B)));
    return sorted[std::clamp<std::size_t>(rank, 1, B) - 1];
  };

  TestResult r;
  r.test_id = std::move(test_id);
  r.statistic = observed;
  r.n = n;
  r.threshold = threshold;
  r.direction = direction;
  r.seed = seed;
  r.resamples = B;
  r.p_value = static_cast<double>(on_null_side + 1) / static_cast<double>(B + 1);
  const double bound_alpha = alpha > 0.0 ? alpha : 0.05;
  r.conf_bound = direction == Direction::at_least ? quantile(bound_alpha) : quantile(1.0 - bound_alpha);
  r.set_alpha(alpha);
  return r;
}

TestResult bootstrap_test_one_sided(std::span<const double> values, double threshold, Direction direction,
                                    std::size_t resamples, double alpha, std::uint64_t seed) {
  const std::size_t n = values.size();
  if (n < kBootstrapMinSamples) {
    throw Error(ErrorCode::TooFewSamples, "bootstrap needs at least " + std::to_string(kBootstrapMinSamples) +
                                              " samples, got " + std::to_string(n));
  }
  if (resamples < kBootstrapMinResamples) {
    throw Error(ErrorCode::InvalidResampleCount,
                "at least " + std::to_string(kBootstrapMinResamples) + " resamples required");
  }
  check_alpha(alpha);

  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  double observed = 0.0;
  for (double v : sorted) observed += v;
  observed /= static_cast<double>(n);

  std::vector<double> means(resamples);
  for (std::size_t b = 0; b < resamples; ++b) {
    Rng rng(derive_seed(seed, b));
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += sorted[rng.uniform_index(n)];
    means[b] = sum / static_cast<double>(n);
  }
  return bootstrap_result_from_replicates("bootstrap_mean", means, observed, threshold, direction, alpha, n, seed);
}

std::pair<MetricValue, TestResult> evaluate_mpr(const Dataset& dataset, const MprSpec& mpr, double alpha,
                                                std::uint64_t seed) {
  mpr.validate();
  const MetricInfo& info = lookup_metric(mpr.metric_id);
  MetricValue metric = compute_metric(dataset, mpr.metric_id);

  if (mpr.test_kind == TestKind::exact_binomial) {
    TestResult r = binomial_test_one_sided(*metric.successes, metric.n, mpr.threshold, mpr.direction, alpha);
    return {std::move(metric), std::move(r)};
  }

  std::vector<double> values = metric.per_sample_losses;
  double threshold = mpr.threshold;
  if (info.proportion) {
    for (double& v : values) v = 1.0 - v;
  } else if (info.id == "rmse") {
    threshold = mpr.threshold * mpr.threshold;
  }
  TestResult r = bootstrap_test_one_sided(values, threshold, mpr.direction, mpr.bootstrap_resamples, alpha, seed);
  if (info.id == "rmse") {
    r.statistic = std::sqrt(r.statistic);
    r.conf_bound = std::sqrt(r.conf_bound);
    r.threshold = mpr.threshold;
  }
  return {std::move(metric), std::move(r)};
}

}  // namespace certkit
