#include "certkit/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>

#include <json.hpp>

namespace certkit {

void EnsemblePrediction::validate() const {
  if (members.empty()) throw Error(ErrorCode::InvalidSimplexRow, "ensemble has no members");
  const std::size_t c = members.front().size();
  if (c == 0) throw Error(ErrorCode::InvalidSimplexRow, "member distribution has no classes");
  for (std::size_t k = 0; k < members.size(); ++k) {
    const auto& row = members[k];
    if (row.size() != c) throw Error(ErrorCode::InvalidSimplexRow, "member " + std::to_string(k) + " has wrong arity");
    double sum = 0.0;
    for (double v : row) {
      if (!(v >= 0.0)) throw Error(ErrorCode::InvalidSimplexRow, "member " + std::to_string(k) + " has a negative entry");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw Error(ErrorCode::InvalidSimplexRow, "member " + std::to_string(k) + " does not sum to 1");
    }
  }
  if (!weights.empty()) {
    if (weights.size() != members.size()) throw Error(ErrorCode::InvalidSimplexRow, "weight count != member count");
    double sum = 0.0;
    for (double w : weights) {
      if (!(w >= 0.0)) throw Error(ErrorCode::InvalidSimplexRow, "negative member weight");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::InvalidSimplexRow, "member weights do not sum to 1");
  }
}

namespace {

double weight_of(const EnsemblePrediction& e, std::size_t k) {
  return e.weights.empty() ? 1.0 / static_cast<double>(e.members.size()) : e.weights[k];
}

}  // namespace

std::vector<double> EnsemblePrediction::predictive() const {
  std::vector<double> mean(num_classes(), 0.0);
  for (std::size_t k = 0; k < members.size(); ++k) {
    const double w = weight_of(*this, k);
    for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += w * members[k][c];
  }
  return mean;
}

double entropy(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return std::max(0.0, h);
}

UncertaintyDecomposition decompose(const EnsemblePrediction& ensemble) {
  ensemble.validate();
  UncertaintyDecomposition d;
  d.total = entropy(ensemble.predictive());
  for (std::size_t k = 0; k < ensemble.members.size(); ++k) {
    d.aleatoric += weight_of(ensemble, k) * entropy(ensemble.members[k]);
  }
  if (ensemble.members.size() == 1) d.aleatoric = d.total;
  // Jensen guarantees total >= aleatoric; rounding can put them a few ulps
  // apart in the wrong order, so clamp before taking the difference.
  d.aleatoric = std::min(d.aleatoric, d.total);
  d.epistemic = d.total - d.aleatoric;
  return d;
}

double epistemic_kl_form(const EnsemblePrediction& ensemble) {
  ensemble.validate();
  const auto mean = ensemble.predictive();
  double mi = 0.0;
  for (std::size_t k = 0; k < ensemble.members.size(); ++k) {
    double kl = 0.0;
    for (std::size_t c = 0; c < mean.size(); ++c) {
      const double p = ensemble.members[k][c];
      if (p > 0.0) kl += p * std::log(p / mean[c]);
    }
    mi += weight_of(ensemble, k) * kl;
  }
  return mi;
}

std::string_view to_string(FallbackAction a) noexcept { return a == FallbackAction::accept ? "accept" : "abstain"; }

FallbackAction uncertainty_fallback(const EnsemblePrediction& ensemble, const UncertaintyThresholds& thresholds) {
  for (const auto& t : {thresholds.total, thresholds.aleatoric, thresholds.epistemic}) {
    if (t && !(*t >= 0.0)) throw Error(ErrorCode::InvalidArgument, "uncertainty thresholds must be non-negative");
  }
  const auto d = decompose(ensemble);
  const auto exceeds = [](const std::optional<double>& t, double v) { return t && v > *t; };
  if (exceeds(thresholds.total, d.total) || exceeds(thresholds.aleatoric, d.aleatoric) ||
      exceeds(thresholds.epistemic, d.epistemic)) {
    return FallbackAction::abstain;
  }
  return FallbackAction::accept;
}

std::string_view to_string(QualityTask t) noexcept {
  switch (t) {
    case QualityTask::misclassification_detection: return "misclassification_detection";
    case QualityTask::ood_detection: return "ood_detection";
    case QualityTask::selective_prediction: return "selective_prediction";
  }
  return "misclassification_detection";
}

std::string_view to_string(UncertaintyComponent c) noexcept {
  switch (c) {
    case UncertaintyComponent::total: return "total";
    case UncertaintyComponent::aleatoric: return "aleatoric";
    case UncertaintyComponent::epistemic: return "epistemic";
  }
  return "total";
}

QualityTask parse_quality_task(std::string_view text) {
  if (text == "misclassification_detection") return QualityTask::misclassification_detection;
  if (text == "ood_detection") return QualityTask::ood_detection;
  if (text == "selective_prediction") return QualityTask::selective_prediction;
  throw Error(ErrorCode::ConfigInvalid, "unknown quality task '" + std::string(text) + "'");
}

UncertaintyComponent parse_uncertainty_component(std::string_view text) {
  if (text == "total") return UncertaintyComponent::total;
  if (text == "aleatoric") return UncertaintyComponent::aleatoric;
  if (text == "epistemic") return UncertaintyComponent::epistemic;
  throw Error(ErrorCode::ConfigInvalid, "unknown uncertainty component '" + std::string(text) + "'");
}

double component_value(const UncertaintyDecomposition& d, UncertaintyComponent c) noexcept {
  switch (c) {
    case UncertaintyComponent::total: return d.total;
    case UncertaintyComponent::aleatoric: return d.aleatoric;
    case UncertaintyComponent::epistemic: return d.epistemic;
  }
  return d.total;
}

double auroc(std::span<const double> scores, std::span<const bool> positive) {
  if (scores.size() != positive.size()) throw Error(ErrorCode::DegenerateFlags, "scores and flags differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mid-ranks over tie blocks.
  double positive_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (positive[order[t]]) {
        positive_rank_sum += mid_rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(ErrorCode::DegenerateFlags, "AUROC needs both flag classes");
  const double u = positive_rank_sum - static_cast<double>(n_pos) * static_cast<double>(n_pos + 1) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

QualityReport evaluate_uncertainty_quality(std::span<const UncertaintyDecomposition> decomps,
                                           std::span<const bool> flags, QualityTask task,
                                           UncertaintyComponent component) {
  if (decomps.size() != flags.size()) throw Error(ErrorCode::DegenerateFlags, "flags not aligned with inputs");
  if (decomps.empty()) throw Error(ErrorCode::DegenerateFlags, "no inputs");
  std::vector<double> scores;
  scores.reserve(decomps.size());
  for (const auto& d : decomps) scores.push_back(component_value(d, component));

  QualityReport report;
  report.task = task;
  report.component = component;
  const auto positives = static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true));
  const bool auroc_possible = positives >= 2 && flags.size() - positives >= 2;
  if (task != QualityTask::selective_prediction && !auroc_possible) {
    throw Error(ErrorCode::DegenerateFlags, "need at least two inputs of each flag value");
  }
  if (auroc_possible) report.auroc = auroc(scores, flags);

  if (task == QualityTask::selective_prediction) {
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    std::size_t errors = 0;
    for (std::size_t k = 0; k < n; ++k) {
      errors += flags[order[k]] ? 1 : 0;
      // Emit one point per distinct threshold (end of a tie block).
      if (k + 1 < n && scores[order[k + 1]] == scores[order[k]]) continue;
      report.risk_coverage.push_back({static_cast<double>(k + 1) / static_cast<double>(n),
                                      static_cast<double>(errors) / static_cast<double>(k + 1), scores[order[k]]});
    }
    double area = 0.0;
    double prev_cov = 0.0;
    double prev_risk = report.risk_coverage.front().risk;
    for (const auto& p : report.risk_coverage) {
      area += (p.coverage - prev_cov) * 0.5 * (p.risk + prev_risk);
      prev_cov = p.coverage;
      prev_risk = p.risk;
    }
    report.aurc = area;
  }
  return report;
}

std::vector<EnsembleRecord> read_ensemble_jsonl(std::istream& in) {
  using json = nlohmann::json;
  std::vector<EnsembleRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = "ensemble line " + std::to_string(lineno) + ": ";
    EnsembleRecord rec;
    try {
      const json obj = json::parse(line);
      rec.ensemble.members = obj.at("members").get<std::vector<std::vector<double>>>();
      if (obj.contains("weights")) rec.ensemble.weights = obj.at("weights").get<std::vector<double>>();
      if (obj.contains("label") && !obj.at("label").is_null()) rec.label = obj.at("label").get<long long>();
      if (obj.contains("ood") && !obj.at("ood").is_null()) rec.ood = obj.at("ood").get<bool>();
    } catch (const json::exception& e) {
      throw Error(ErrorCode::ParseError, where + e.what());
    }
    try {
      rec.ensemble.validate();
    } catch (const Error& e) {
      throw Error(e.code(), where + e.what());
    }
    out.push_back(std::move(rec));
  }
  return out;
}

}  // namespace certkit
