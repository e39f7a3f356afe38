#include "certkit/multiplicity.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

#include "certkit/random.hpp"

namespace certkit {

std::vector<Decision> SequentialDecision::decisions() const {
  std::vector<Decision> out;
  for (const auto& s : steps) out.push_back(s.decision);
  return out;
}

std::vector<double> SequentialDecision::alpha_trace() const {
  std::vector<double> out;
  for (const auto& s : steps) out.push_back(s.alpha_allocated);
  return out;
}

std::string_view to_string(Procedure p) noexcept {
  switch (p) {
    case Procedure::uncorrected: return "uncorrected";
    case Procedure::bonferroni: return "bonferroni";
    case Procedure::fixed_sequence: return "fixed_sequence";
    case Procedure::fallback: return "fallback";
  }
  return "bonferroni";
}

Procedure parse_procedure(std::string_view text) {
  if (text == "uncorrected") return Procedure::uncorrected;
  if (text == "bonferroni") return Procedure::bonferroni;
  if (text == "fixed_sequence") return Procedure::fixed_sequence;
  if (text == "fallback") return Procedure::fallback;
  throw Error(ErrorCode::ConfigInvalid, "unknown multiplicity procedure '" + std::string(text) + "'");
}

namespace {

void check_family(const HypothesisFamily& family) {
  if (!(family.alpha > 0.0 && family.alpha < 1.0)) throw Error(ErrorCode::InvalidAlpha, "family alpha must lie in (0,1)");
  for (const auto& h : family.hypotheses) {
    if (!(h.p_value >= 0.0 && h.p_value <= 1.0)) {
      throw Error(ErrorCode::InvalidArgument, "p-value of '" + h.id + "' outside [0,1]");
    }
    if (!(h.weight >= 0.0)) throw Error(ErrorCode::WeightSumInvalid, "negative weight for '" + h.id + "'");
  }
}

SequentialDecision start(std::string_view procedure, const HypothesisFamily& family) {
  check_family(family);
  SequentialDecision out;
  out.procedure = std::string(procedure);
  out.family_alpha = family.alpha;
  out.steps.reserve(family.hypotheses.size());
  return out;
}

}  // namespace

double bonferroni_adjust(double family_alpha, std::size_t n_tests) {
  if (!(family_alpha > 0.0 && family_alpha < 1.0)) throw Error(ErrorCode::InvalidAlpha, "family alpha must lie in (0,1)");
  if (n_tests == 0) throw Error(ErrorCode::InvalidArgument, "at least one test required");
  return family_alpha / static_cast<double>(n_tests);
}

SequentialDecision bonferroni_test(const HypothesisFamily& family) {
  SequentialDecision out = start("bonferroni", family);
  const std::size_t m = family.hypotheses.size();
  double weight_sum = 0.0;
  for (const auto& h : family.hypotheses) weight_sum += h.weight;
  for (const auto& h : family.hypotheses) {
    const double level = weight_sum > 0.0 ? family.alpha * h.weight : bonferroni_adjust(family.alpha, m);
    out.steps.push_back({h.id, h.p_value, level, decide(h.p_value, level), 0.0});
  }
  return out;
}

SequentialDecision fixed_sequence_test(const HypothesisFamily& family) {
  SequentialDecision out = start("fixed_sequence", family);
  bool open = true;
  for (const auto& h : family.hypotheses) {
    const Decision d = open ? decide(h.p_value, family.alpha) : Decision::fail_to_reject;
    open = open && d == Decision::reject_H0;
    out.steps.push_back({h.id, h.p_value, family.alpha, d, d == Decision::reject_H0 ? family.alpha : 0.0});
  }
  return out;
}

double fallback_alpha(double family_alpha, double weight, std::optional<double> previous_alpha,
                      bool previous_rejected) {
  const double own = family_alpha * weight;
  return (previous_alpha && previous_rejected) ? *previous_alpha + own : own;
}

SequentialDecision fallback_test(const HypothesisFamily& family) {
  SequentialDecision out = start("fallback", family);
  double sum = 0.0;
  for (const auto& h : family.hypotheses) sum += h.weight;
  if (!family.hypotheses.empty() && std::abs(sum - 1.0) > 1e-12) {
    throw Error(ErrorCode::WeightSumInvalid, "fallback weights sum to " + std::to_string(sum) + ", not 1");
  }
  std::optional<double> previous;
  bool previous_rejected = false;
  for (const auto& h : family.hypotheses) {
    const double level = fallback_alpha(family.alpha, h.weight, previous, previous_rejected);
    const Decision d = decide(h.p_value, level);
    out.steps.push_back({h.id, h.p_value, level, d, d == Decision::reject_H0 ? level : 0.0});
    previous = level;
    previous_rejected = d == Decision::reject_H0;
  }
  return out;
}

SequentialDecision apply_procedure(Procedure procedure, const HypothesisFamily& family) {
  switch (procedure) {
    case Procedure::uncorrected: {
      SequentialDecision out = start("uncorrected", family);
      for (const auto& h : family.hypotheses) {
        out.steps.push_back({h.id, h.p_value, family.alpha, decide(h.p_value, family.alpha), 0.0});
      }
      return out;
    }
    case Procedure::bonferroni: return bonferroni_test(family);
    case Procedure::fixed_sequence: return fixed_sequence_test(family);
    case Procedure::fallback: return fallback_test(family);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown procedure");
}

FwerEstimate simulate_fwer(Procedure procedure, const FwerConfig& config, std::size_t trials, std::uint64_t seed) {
  if (trials < kMinFwerTrials) {
    throw Error(ErrorCode::InvalidTrialCount, "at least " + std::to_string(kMinFwerTrials) + " trials required");
  }
  const std::size_t m = config.true_null.size();
  if (m == 0) throw Error(ErrorCode::InvalidArgument, "family template is empty");
  std::vector<double> weights = config.weights;
  if (weights.empty()) weights.assign(m, 1.0 / static_cast<double>(m));
  if (weights.size() != m) throw Error(ErrorCode::InvalidArgument, "weights and null flags differ in length");

  HypothesisFamily family;
  family.alpha = config.alpha;
  family.hypotheses.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    family.hypotheses[i].id = "H" + std::to_string(i + 1);
    family.hypotheses[i].weight = weights[i];
  }

  std::size_t bad = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng(derive_seed(seed, t));
    for (std::size_t i = 0; i < m; ++i) {
      if (config.true_null[i]) {
        family.hypotheses[i].p_value = rng.uniform01();
      } else {
        const double z = rng.normal() + config.alternative_shift;
        family.hypotheses[i].p_value = 0.5 * std::erfc(z / std::numbers::sqrt2);
      }
    }
    const SequentialDecision d = apply_procedure(procedure, family);
    for (std::size_t i = 0; i < m; ++i) {
      if (config.true_null[i] && d.steps[i].decision == Decision::reject_H0) {
        ++bad;
        break;
      }
    }
  }
  FwerEstimate e;
  e.trials = trials;
  e.false_rejection_trials = bad;
  e.fwer = static_cast<double>(bad) / static_cast<double>(trials);
  e.std_error = std::sqrt(e.fwer * (1.0 - e.fwer) / static_cast<double>(trials));
  return e;
}

}  // namespace certkit
