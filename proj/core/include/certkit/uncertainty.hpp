#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "certkit/error.hpp"

namespace certkit {

/// K member distributions over C classes for one input, with optional
/// posterior weights (uniform when empty).
struct EnsemblePrediction {
  std::vector<std::vector<double>> members;
  std::vector<double> weights;

  std::size_t num_members() const noexcept { return members.size(); }
  std::size_t num_classes() const noexcept { return members.empty() ? 0 : members.front().size(); }
  void validate() const;
  /// Weighted average of the member rows.
  std::vector<double> predictive() const;
};

/// All values in nats.
struct UncertaintyDecomposition {
  double total = 0.0;
  double aleatoric = 0.0;
  double epistemic = 0.0;
};

/// Shannon entropy in nats with 0 log 0 = 0.
double entropy(std::span<const double> p);

/// total = H(mean member), aleatoric = mean H(member), epistemic = their
/// difference (the mutual information between label and member).
UncertaintyDecomposition decompose(const EnsemblePrediction& ensemble);

/// Mutual information written directly as sum_k w_k KL(p_k || p_bar).
/// Independent of `decompose`; kept as a cross-check.
double epistemic_kl_form(const EnsemblePrediction& ensemble);

inline double to_bits(double nats) { return nats / 0.69314718055994530942; }

/// Unset components are not checked.
struct UncertaintyThresholds {
  std::optional<double> total;
  std::optional<double> aleatoric;
  std::optional<double> epistemic;
};

enum class FallbackAction { accept, abstain };

std::string_view to_string(FallbackAction a) noexcept;

/// Abstain iff any configured component strictly exceeds its threshold.
FallbackAction uncertainty_fallback(const EnsemblePrediction& ensemble, const UncertaintyThresholds& thresholds);

enum class QualityTask { misclassification_detection, ood_detection, selective_prediction };
enum class UncertaintyComponent { total, aleatoric, epistemic };

std::string_view to_string(QualityTask t) noexcept;
std::string_view to_string(UncertaintyComponent c) noexcept;
QualityTask parse_quality_task(std::string_view text);
UncertaintyComponent parse_uncertainty_component(std::string_view text);

struct RiskCoveragePoint {
  double coverage = 0.0;
  double risk = 0.0;
  double threshold = 0.0;
};

struct QualityReport {
  QualityTask task = QualityTask::misclassification_detection;
  UncertaintyComponent component = UncertaintyComponent::total;
  double auroc = std::numeric_limits<double>::quiet_NaN();
  std::vector<RiskCoveragePoint> risk_coverage;
  /// Area under the risk-coverage curve (trapezoid over the points).
  double aurc = std::numeric_limits<double>::quiet_NaN();
};

/// Probability that a random positive scores above a random negative,
/// ties counted one half (Mann-Whitney U / (n_pos * n_neg)).
double auroc(std::span<const double> scores, std::span<const bool> positive);

/// `flags[i]` marks the event the score should detect: a wrong prediction
/// (misclassification_detection, selective_prediction) or an OOD input
/// (ood_detection). AUROC needs at least two of each flag value.
/// Selective prediction keeps the least uncertain inputs first; coverage
/// k/n comes with the error rate among those k inputs.
QualityReport evaluate_uncertainty_quality(std::span<const UncertaintyDecomposition> decomps,
                                           std::span<const bool> flags, QualityTask task,
                                           UncertaintyComponent component = UncertaintyComponent::total);

double component_value(const UncertaintyDecomposition& d, UncertaintyComponent c) noexcept;

struct EnsembleRecord {
  EnsemblePrediction ensemble;
  std::optional<long long> label;
  std::optional<bool> ood;
};

/// JSONL: {"members": [[...], ...], "weights": [...], "label": k, "ood": b}
/// per line; every record is validated on load.
std::vector<EnsembleRecord> read_ensemble_jsonl(std::istream& in);

}  // namespace certkit
