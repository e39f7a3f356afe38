#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "certkit/stattest.hpp"

namespace certkit {

struct OutcomeRecord {
  int group = 0;       // a
  int label = 0;       // y
  int prediction = 0;  // y-hat
};

/// 2 x 2 x 2 contingency cube of counts indexed [a][y][y-hat].
struct GroupedOutcomes {
  std::array<std::array<std::array<std::uint64_t, 2>, 2>, 2> counts{};

  static GroupedOutcomes from_records(std::span<const OutcomeRecord> records);
  /// Needs binary group, label and prediction columns.
  static GroupedOutcomes from_dataset(const Dataset& dataset);

  std::uint64_t group_size(int a) const noexcept;
  std::uint64_t cell_size(int a, int y) const noexcept;
  std::uint64_t total() const noexcept { return group_size(0) + group_size(1); }
};

/// P(y-hat = 1 | a = 1) - P(y-hat = 1 | a = 0). Positive favours a = 1.
double statistical_parity_diff(const GroupedOutcomes& outcomes);

enum class OddsMode { opportunity, odds };

/// opportunity: |TPR(a=1) - TPR(a=0)|; odds: the larger of the TPR and
/// FPR gaps.
double equalized_odds_diff(const GroupedOutcomes& outcomes, OddsMode mode);

enum class FairnessMetric { statistical_parity, equal_opportunity, equalized_odds };

std::string_view to_string(FairnessMetric m) noexcept;
FairnessMetric parse_fairness_metric(std::string_view text);

/// Absolute disparity used for gating.
double fairness_violation(const GroupedOutcomes& outcomes, FairnessMetric metric);

struct ModelPoint {
  std::string model_id;
  double performance = 0.0;
  double fairness_violation = 0.0;
};

/// Non-dominated points under (performance up, violation down), sorted by
/// performance descending then violation ascending. Points tied on both
/// axes are all kept.
std::vector<ModelPoint> pareto_front(std::span<const ModelPoint> points);

struct FairnessMpr {
  FairnessMetric metric = FairnessMetric::statistical_parity;
  double max_violation = 0.0;
};

struct FairnessCheck {
  FairnessMetric metric = FairnessMetric::statistical_parity;
  double signed_estimate = 0.0;
  double violation = 0.0;
  TestResult test;
};

/// Bootstrap test that each absolute violation stays below its maximum
/// (H0: violation >= max_violation). Every replicate resamples each group
/// with its size held fixed; replicate b uses Rng(derive_seed(seed, b)).
/// A replicate that leaves a required (group, label) cell empty counts
/// on the H0 side.
std::vector<FairnessCheck> fairness_mpr_check(const GroupedOutcomes& outcomes, std::span<const FairnessMpr> mprs,
                                              std::size_t n_bootstrap, double alpha, std::uint64_t seed);

/// True when parity and an odds-type metric are both required; the two
/// cannot in general hold together when base rates differ.
bool has_incompatible_fairness_mprs(std::span<const FairnessMpr> mprs) noexcept;

}  // namespace certkit
