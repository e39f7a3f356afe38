#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "certkit/stattest.hpp"

namespace certkit {

/// n x d matrix of already-encoded features. The encoder itself lives
/// outside the toolkit; only its identifier is carried for the report.
struct EncodedBatch {
  Eigen::MatrixXd data;
  std::vector<FeatureKind> kinds;  // empty means all real
  SplitTag source = SplitTag::production;
  std::optional<std::int64_t> window_start;
  std::optional<std::int64_t> window_end;
  std::string encoder_id = "identity";

  static EncodedBatch from_dataset(const Dataset& dataset, std::string encoder_id = "identity");
  std::size_t rows() const noexcept { return static_cast<std::size_t>(data.rows()); }
  std::size_t dims() const noexcept { return static_cast<std::size_t>(data.cols()); }
  void validate() const;
};

enum class ShiftMethod { univariate_bonferroni, mmd_permutation };

std::string_view to_string(ShiftMethod m) noexcept;
ShiftMethod parse_shift_method(std::string_view text);

struct ShiftOptions {
  ShiftMethod method = ShiftMethod::mmd_permutation;
  double alpha = 0.05;
  std::size_t permutations = 1000;
  std::uint64_t seed = 0;
};

struct ShiftVerdict {
  ShiftMethod method = ShiftMethod::mmd_permutation;
  /// One result per dimension (univariate) or a single MMD result.
  std::vector<TestResult> per_feature;
  bool shift = false;
  double alpha = 0.05;
  /// MMD^2 for the kernel method.
  std::optional<double> severity;
  std::optional<double> bandwidth;
  std::size_t permutations = 0;
  std::uint64_t seed = 0;
  std::string encoder_id;
};

/// sup |F_x - F_y| over the pooled sample.
double ks_statistic(std::span<const double> x, std::span<const double> y);

/// Kolmogorov survival function Q(lambda) = 2 sum (-1)^(j-1) exp(-2 j^2 lambda^2).
double kolmogorov_survival(double lambda);

/// Exact P(D >= d_observed) under exchangeability for tie-free samples,
/// by counting monotone lattice paths that stay strictly inside the band
/// |i/n - j/m| < d. Equivalent to enumerating every relabelling of the
/// pooled sample.
double ks_exact_pvalue(std::size_t n, std::size_t m, double d_observed);

inline constexpr std::size_t kKsMinSamples = 5;
inline constexpr std::size_t kKsExactLimit = 25;
inline constexpr std::size_t kKsTiePermutations = 10'000;

/// Two-sample Kolmogorov-Smirnov test. Samples with max(n, m) <= 25 use the
/// exact lattice-path distribution (tie-free) or a seeded Monte-Carlo
/// permutation distribution (with ties); larger samples use the asymptotic
/// Kolmogorov law with effective size sqrt(nm/(n+m)) and the
/// Stephens correction (en + 0.12 + 0.11/en) * D.
TestResult ks_two_sample(std::span<const double> x, std::span<const double> y);

/// Two-sample chi-square homogeneity test on category codes.
///
/// Rare-bucket rule: every category whose smaller expected count is below 5
/// goes into one pooled bucket; while that bucket itself is below 5 it is
/// merged with the least frequent remaining category. Fewer than two
/// buckets left is a DegenerateTable error.
TestResult chi2_two_sample(std::span<const std::int64_t> x, std::span<const std::int64_t> y);

/// Median of pairwise Euclidean distances over all rows (1.0 if that is 0).
double median_heuristic(const Eigen::MatrixXd& pooled);

/// Unbiased (U-statistic) MMD^2 with k(a,b) = exp(-|a-b|^2 / (2 sigma^2)).
double mmd2_unbiased(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, double bandwidth);

/// Two-stage shift test on encoded batches.
///   univariate_bonferroni: KS (chi-square for categorical dims) per
///     dimension, each at alpha / d; shift iff any rejects.
///   mmd_permutation: unbiased MMD^2, RBF kernel with median-heuristic
///     bandwidth on the pooled rows, p = (r + 1) / (P + 1) over P label
///     shuffles; shuffle b uses Rng(derive_seed(seed, b)).
ShiftVerdict multivariate_shift_test(const EncodedBatch& reference, const EncodedBatch& production,
                                     const ShiftOptions& options);

/// Probability vector over a finite support.
class DiscreteDistribution {
 public:
  explicit DiscreteDistribution(std::vector<double> probabilities);
  std::size_t size() const noexcept { return p_.size(); }
  double operator[](std::size_t i) const { return p_[i]; }
  std::span<const double> probabilities() const noexcept { return p_; }

 private:
  std::vector<double> p_;
};

/// 0.5 * sum |p_i - q_i|.
double total_variation_discrete(const DiscreteDistribution& p, const DiscreteDistribution& q);

struct ShiftBound {
  double err_p = 0.0;
  double err_q = 0.0;
  double gap = 0.0;
  double tv = 0.0;
  bool holds = false;
};

/// err_p = sum p_i |h_i - f_i|; checks |err_p - err_q| <= tv(p, q) (+1e-12).
ShiftBound shift_bound_check(std::span<const double> h, std::span<const double> f, const DiscreteDistribution& p,
                             const DiscreteDistribution& q);

enum class ShiftClass { benign, malignant };

std::string_view to_string(ShiftClass c) noexcept;

struct ShiftClassification {
  ShiftClass verdict = ShiftClass::malignant;
  MetricValue metric;
  TestResult test;
};

/// After a detected shift, a labelled point check decides whether the MPR
/// still holds: benign iff the MPR test rejects H0 at `alpha`.
ShiftClassification classify_shift(const ShiftVerdict& verdict, const Dataset& point_check, const MprSpec& mpr,
                                   double alpha, std::uint64_t seed = 0);

}  // namespace certkit
