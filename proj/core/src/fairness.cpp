#include "certkit/fairness.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "certkit/random.hpp"

namespace certkit {

GroupedOutcomes GroupedOutcomes::from_records(std::span<const OutcomeRecord> records) {
  GroupedOutcomes g;
  for (const auto& r : records) {
    const auto binary = [](int v) { return v == 0 || v == 1; };
    if (!binary(r.group) || !binary(r.label) || !binary(r.prediction)) {
      throw Error(ErrorCode::InvalidArgument, "fairness metrics need binary group, label and prediction");
    }
    ++g.counts[r.group][r.label][r.prediction];
  }
  return g;
}

GroupedOutcomes GroupedOutcomes::from_dataset(const Dataset& dataset) {
  const Schema& s = dataset.schema();
  if (!s.has_group) throw Error(ErrorCode::MissingColumn, "group attribute required");
  if (!s.has_label || !s.has_prediction) throw Error(ErrorCode::MissingColumn, "label and prediction required");
  if (s.task != TaskKind::classification) throw Error(ErrorCode::SchemaViolation, "classification task required");
  std::vector<OutcomeRecord> records;
  records.reserve(dataset.size());
  for (const auto& r : dataset.rows()) {
    records.push_back({*r.group, static_cast<int>(std::get<ClassIndex>(*r.label)),
                       static_cast<int>(std::get<ClassIndex>(*r.prediction))});
  }
  return from_records(records);
}

std::uint64_t GroupedOutcomes::group_size(int a) const noexcept { return cell_size(a, 0) + cell_size(a, 1); }

std::uint64_t GroupedOutcomes::cell_size(int a, int y) const noexcept { return counts[a][y][0] + counts[a][y][1]; }

namespace {

double rate(std::uint64_t num, std::uint64_t den) { return static_cast<double>(num) / static_cast<double>(den); }

double positive_rate(const GroupedOutcomes& g, int a) {
  if (g.group_size(a) == 0) throw Error(ErrorCode::EmptyGroup, "group a=" + std::to_string(a) + " is empty");
  return rate(g.counts[a][0][1] + g.counts[a][1][1], g.group_size(a));
}

double conditional_rate(const GroupedOutcomes& g, int a, int y) {
  if (g.cell_size(a, y) == 0) {
    throw Error(ErrorCode::EmptyCell, "no samples with a=" + std::to_string(a) + ", y=" + std::to_string(y));
  }
  return rate(g.counts[a][y][1], g.cell_size(a, y));
}

}  // namespace

double statistical_parity_diff(const GroupedOutcomes& outcomes) {
  return positive_rate(outcomes, 1) - positive_rate(outcomes, 0);
}

double equalized_odds_diff(const GroupedOutcomes& outcomes, OddsMode mode) {
  const double tpr_gap = std::abs(conditional_rate(outcomes, 1, 1) - conditional_rate(outcomes, 0, 1));
  if (mode == OddsMode::opportunity) return tpr_gap;
  const double fpr_gap = std::abs(conditional_rate(outcomes, 1, 0) - conditional_rate(outcomes, 0, 0));
  return std::max(tpr_gap, fpr_gap);
}

std::string_view to_string(FairnessMetric m) noexcept {
  switch (m) {
    case FairnessMetric::statistical_parity: return "statistical_parity";
    case FairnessMetric::equal_opportunity: return "equal_opportunity";
    case FairnessMetric::equalized_odds: return "equalized_odds";
  }
  return "statistical_parity";
}

FairnessMetric parse_fairness_metric(std::string_view text) {
  if (text == "statistical_parity") return FairnessMetric::statistical_parity;
  if (text == "equal_opportunity") return FairnessMetric::equal_opportunity;
  if (text == "equalized_odds") return FairnessMetric::equalized_odds;
  throw Error(ErrorCode::ConfigInvalid, "unknown fairness metric '" + std::string(text) + "'");
}

double fairness_violation(const GroupedOutcomes& outcomes, FairnessMetric metric) {
  switch (metric) {
    case FairnessMetric::statistical_parity: return std::abs(statistical_parity_diff(outcomes));
    case FairnessMetric::equal_opportunity: return equalized_odds_diff(outcomes, OddsMode::opportunity);
    case FairnessMetric::equalized_odds: return equalized_odds_diff(outcomes, OddsMode::odds);
  }
  return 0.0;
}

std::vector<ModelPoint> pareto_front(std::span<const ModelPoint> points) {
  std::vector<ModelPoint> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end(), [](const ModelPoint& a, const ModelPoint& b) {
    if (a.performance != b.performance) return a.performance > b.performance;
    if (a.fairness_violation != b.fairness_violation) return a.fairness_violation < b.fairness_violation;
    return a.model_id < b.model_id;
  });
  std::vector<ModelPoint> front;
  // Best violation among strictly better-performing points seen so far.
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].performance == sorted[i].performance) ++j;
    const double group_min = sorted[i].fairness_violation;
    for (std::size_t t = i; t < j && sorted[t].fairness_violation == group_min; ++t) {
      if (group_min < best) front.push_back(sorted[t]);
    }
    best = std::min(best, group_min);
    i = j;
  }
  return front;
}

std::vector<FairnessCheck> fairness_mpr_check(const GroupedOutcomes& outcomes, std::span<const FairnessMpr> mprs,
                                              std::size_t n_bootstrap, double alpha, std::uint64_t seed) {
  if (n_bootstrap < kBootstrapMinResamples) {
    throw Error(ErrorCode::InvalidResampleCount,
                "at least " + std::to_string(kBootstrapMinResamples) + " resamples required");
  }
  for (const auto& m : mprs) {
    if (!(m.max_violation >= 0.0)) throw Error(ErrorCode::InvalidArgument, "max_violation must be non-negative");
  }

  // Replicate cubes are shared by all metrics so each metric sees the same
  // resamples.
  std::vector<GroupedOutcomes> replicates(n_bootstrap);
  for (std::size_t b = 0; b < n_bootstrap; ++b) {
    Rng rng(derive_seed(seed, b));
    GroupedOutcomes& rep = replicates[b];
    for (int a = 0; a < 2; ++a) {
      const std::uint64_t n_a = outcomes.group_size(a);
      const std::uint64_t c00 = outcomes.counts[a][0][0];
      const std::uint64_t c01 = c00 + outcomes.counts[a][0][1];
      const std::uint64_t c10 = c01 + outcomes.counts[a][1][0];
      for (std::uint64_t i = 0; i < n_a; ++i) {
        const std::uint64_t u = rng.uniform_index(n_a);
        if (u < c00) ++rep.counts[a][0][0];
        else if (u < c01) ++rep.counts[a][0][1];
        else if (u < c10) ++rep.counts[a][1][0];
        else ++rep.counts[a][1][1];
      }
    }
  }

  std::vector<FairnessCheck> out;
  for (const auto& mpr : mprs) {
    FairnessCheck check;
    check.metric = mpr.metric;
    check.violation = fairness_violation(outcomes, mpr.metric);
    check.signed_estimate = mpr.metric == FairnessMetric::statistical_parity ? statistical_parity_diff(outcomes)
                                                                             : check.violation;
    std::vector<double> stats;
    stats.reserve(n_bootstrap);
    for (const auto& rep : replicates) {
      try {
        stats.push_back(fairness_violation(rep, mpr.metric));
      } catch (const Error&) {
        stats.push_back(std::numeric_limits<double>::infinity());
      }
    }
    check.test = bootstrap_result_from_replicates("bootstrap_" + std::string(to_string(mpr.metric)), stats,
                                                  check.violation, mpr.max_violation, Direction::at_most, alpha,
                                                  outcomes.total(), seed);
    out.push_back(std::move(check));
  }
  return out;
}

bool has_incompatible_fairness_mprs(std::span<const FairnessMpr> mprs) noexcept {
  bool parity = false;
  bool odds = false;
  for (const auto& m : mprs) {
    parity = parity || m.metric == FairnessMetric::statistical_parity;
    odds = odds || m.metric != FairnessMetric::statistical_parity;
  }
  return parity && odds;
}

}  // namespace certkit
