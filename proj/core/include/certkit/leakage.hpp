#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "certkit/core.hpp"

namespace certkit {

enum class LeakageSeverity { clean, warning, violation };

std::string_view to_string(LeakageSeverity s) noexcept;

struct LeakageEvidence {
  /// cross_duplicate, train_duplicate, test_duplicate, shared_group,
  /// late_train_row, proxy_feature.
  std::string kind;
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  /// Group id or feature name.
  std::string item;
  std::optional<double> statistic;
};

/// severity == clean exactly when evidence is empty.
struct LeakageReport {
  std::string check_id;
  LeakageSeverity severity = LeakageSeverity::clean;
  std::vector<LeakageEvidence> evidence;
  std::string description;
  std::map<std::string, double> parameters;
};

enum class DuplicateKey { exact_features, feature_hash };

std::string_view to_string(DuplicateKey k) noexcept;
DuplicateKey parse_duplicate_key(std::string_view text);

/// Feature tuple in declared column order, each value printed with 12
/// significant digits so that CSV round-trips compare equal.
std::string canonical_features(const LabeledSample& row);

/// One cross_duplicate entry per test row whose canonical tuple occurs in
/// train (listing every matching train row). Repeated tuples inside either
/// set are reported as warnings.
LeakageReport duplicate_check(const Dataset& train, const Dataset& test,
                              DuplicateKey key = DuplicateKey::exact_features);

/// Evidence: one shared_group entry per id present in both sets, sorted by id.
LeakageReport group_leakage_check(const Dataset& train, const Dataset& test);

/// Violation iff max(train timestamp) > min(test timestamp). Evidence: the
/// train rows stamped after the test start.
LeakageReport temporal_split_check(const Dataset& train, const Dataset& test);

inline constexpr std::size_t kProxyMinRows = 100;
inline constexpr double kProxyAucThreshold = 0.99;
inline constexpr double kProxyCorrelationThreshold = 0.99;

/// Per-feature target-proxy screen on an internal split of `dataset`.
/// Binary labels: the feature's orientation and best single threshold are
/// fitted on the training part; the holdout AUC of the oriented feature is
/// flagged when >= auc_threshold. Regression: holdout |Spearman rho|
/// >= 0.99 is flagged. Flags are warnings.
LeakageReport target_proxy_screen(const Dataset& dataset, double auc_threshold = kProxyAucThreshold,
                                  double holdout_fraction = 0.5, std::uint64_t seed = 0);

/// Spearman rank correlation with mid-ranks; 0 when either side is constant.
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace certkit
