#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "certkit/stattest.hpp"

namespace certkit {

struct Hypothesis {
  std::string id;
  double p_value = 1.0;
  double weight = 0.0;
};

/// Hypotheses in their declared (priority or temporal) order.
struct HypothesisFamily {
  std::vector<Hypothesis> hypotheses;
  double alpha = 0.05;
};

struct SequentialStep {
  std::string id;
  double p_value = 1.0;
  double alpha_allocated = 0.0;
  Decision decision = Decision::fail_to_reject;
  /// Level handed to the next hypothesis on rejection; 0 when lost.
  double alpha_carried_forward = 0.0;
};

struct SequentialDecision {
  std::string procedure;
  double family_alpha = 0.0;
  std::vector<SequentialStep> steps;

  std::vector<Decision> decisions() const;
  std::vector<double> alpha_trace() const;
};

enum class Procedure { uncorrected, bonferroni, fixed_sequence, fallback };

std::string_view to_string(Procedure p) noexcept;
Procedure parse_procedure(std::string_view text);

/// Per-test level family_alpha / n_tests.
double bonferroni_adjust(double family_alpha, std::size_t n_tests);

/// Weighted Bonferroni: H_i tested at alpha * w_i. With all weights zero
/// the uniform split alpha / n is used.
SequentialDecision bonferroni_test(const HypothesisFamily& family);

/// Each H_i is tested at the full alpha, but only while every predecessor
/// was rejected. Weights are ignored.
SequentialDecision fixed_sequence_test(const HypothesisFamily& family);

/// Level of the i-th hypothesis under the fallback recurrence:
/// alpha * w_i, plus the previous level when the previous hypothesis was
/// rejected.
double fallback_alpha(double family_alpha, double weight, std::optional<double> previous_alpha,
                      bool previous_rejected);

/// Fallback procedure. Weights must be non-negative and sum to 1 within
/// 1e-12. Ties p_i == alpha_i reject.
SequentialDecision fallback_test(const HypothesisFamily& family);

SequentialDecision apply_procedure(Procedure procedure, const HypothesisFamily& family);

/// Simulation setup for empirical FWER checks. True nulls draw p ~ U(0,1);
/// false nulls draw the p-value of a one-sided z-test whose statistic is
/// shifted by `alternative_shift`.
struct FwerConfig {
  std::vector<bool> true_null;
  /// Empty means uniform.
  std::vector<double> weights;
  double alpha = 0.05;
  double alternative_shift = 2.5;
};

struct FwerEstimate {
  double fwer = 0.0;
  double std_error = 0.0;
  std::size_t trials = 0;
  std::size_t false_rejection_trials = 0;
};

inline constexpr std::size_t kMinFwerTrials = 10'000;

/// Fraction of trials with at least one rejected true null. Trial t uses
/// Rng(derive_seed(seed, t)).
FwerEstimate simulate_fwer(Procedure procedure, const FwerConfig& config, std::size_t trials, std::uint64_t seed);

}  // namespace certkit
