#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "certkit/error.hpp"

namespace certkit {

enum class Direction { at_least, at_most };
enum class SplitTag { train, validation, test, production };
enum class TaskKind { classification, regression };
enum class FeatureKind { real, categorical };
enum class TestKind { exact_binomial, bootstrap };

std::string_view to_string(Direction d) noexcept;
std::string_view to_string(SplitTag s) noexcept;
std::string_view to_string(TaskKind t) noexcept;
std::string_view to_string(TestKind t) noexcept;
Direction parse_direction(std::string_view text);
SplitTag parse_split_tag(std::string_view text);
TaskKind parse_task_kind(std::string_view text);
TestKind parse_test_kind(std::string_view text);

using ClassIndex = std::int64_t;

/// A label or prediction: integer class index for classification, real
/// scalar for regression. Never mixed within one dataset.
using Target = std::variant<ClassIndex, double>;

double target_value(const Target& t) noexcept;

struct LabeledSample {
  std::vector<double> features;
  std::optional<Target> label;
  std::optional<Target> prediction;
  std::optional<std::vector<double>> scores;
  std::optional<int> group;
  std::optional<std::string> group_id;
  std::optional<std::int64_t> timestamp;
  SplitTag split = SplitTag::test;
};

struct FeatureColumn {
  std::string name;
  FeatureKind kind = FeatureKind::real;
};

/// Declares which roles are present. A role that is declared must be filled
/// in every row; an undeclared role must be absent in every row.
struct Schema {
  std::vector<FeatureColumn> features;
  TaskKind task = TaskKind::classification;
  bool has_label = false;
  bool has_prediction = false;
  bool has_scores = false;
  bool has_group = false;
  bool has_group_id = false;
  bool has_timestamp = false;
  /// 0 when not declared; otherwise class indices and score arity are checked.
  std::size_t num_classes = 0;

  std::optional<std::size_t> feature_index(std::string_view name) const;
  std::string describe() const;
};

/// Immutable collection of samples with a content hash computed at
/// construction. The hash covers schema and row content only (not
/// provenance), so re-serializing and re-ingesting preserves it.
class Dataset {
 public:
  Dataset(Schema schema, std::vector<LabeledSample> rows, std::string provenance = {});

  const Schema& schema() const noexcept { return schema_; }
  std::span<const LabeledSample> rows() const noexcept { return rows_; }
  const LabeledSample& row(std::size_t i) const { return rows_.at(i); }
  std::size_t size() const noexcept { return rows_.size(); }
  bool empty() const noexcept { return rows_.empty(); }
  const std::string& provenance() const noexcept { return provenance_; }
  const std::string& content_hash() const noexcept { return hash_; }

  Dataset subset(std::span<const std::size_t> indices, std::string provenance = {}) const;
  std::vector<double> feature_column(std::size_t feature) const;

 private:
  Schema schema_;
  std::vector<LabeledSample> rows_;
  std::string provenance_;
  std::string hash_;
};

/// Canonical text form used for the content hash.
std::string canonical_row(const Schema& schema, const LabeledSample& row);

struct MetricInfo {
  std::string id;
  bool proportion = false;
  double lower = 0.0;
  double upper = 1.0;
  /// at_least for accuracy-like metrics, at_most for error-like ones.
  Direction natural_direction = Direction::at_least;
};

/// Built-in registry: accuracy, precision, recall (positive class 1), mse, rmse.
const MetricInfo& lookup_metric(std::string_view metric_id);
std::vector<std::string> registered_metrics();

struct MetricValue {
  std::string metric_id;
  double value = 0.0;
  std::size_t n = 0;
  /// Exact success count for proportion metrics; value == *successes / n.
  std::optional<std::size_t> successes;
  /// 0/1 losses for proportion metrics, squared errors for mse/rmse,
  /// the raw loss for empirical_risk.
  std::vector<double> per_sample_losses;
};

MetricValue compute_metric(const Dataset& dataset, std::string_view metric_id);

/// Mean of a named per-sample loss: zero_one, squared, absolute, zero.
MetricValue empirical_risk(const Dataset& dataset, std::string_view loss_id);

struct MprSpec {
  std::string id;
  std::string metric_id;
  double threshold = 0.0;
  Direction direction = Direction::at_least;
  double alpha_share = 1.0;
  TestKind test_kind = TestKind::exact_binomial;
  std::size_t bootstrap_resamples = 2000;

  void validate() const;
};

struct SamplingDescriptor {
  std::string strategy;
  std::map<std::string, std::string> parameters;
};

/// Application-domain declaration: operating context, technical input
/// requirements, and the sampling strategy that fixes the reference
/// distribution for evaluation.
struct SaddRecord {
  std::string context;
  std::string technical;
  std::string sampling_text;
  SamplingDescriptor sampling;
  std::int64_t version = 1;

  void validate() const;
  std::string content_hash() const;
};

/// Throws ConfigInvalid unless `next.version > previous.version`.
void check_revision(const SaddRecord& previous, const SaddRecord& next);

}  // namespace certkit
