#include "certkit/core.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "certkit/hash.hpp"

namespace certkit {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UnknownMetric: return "UnknownMetric";
    case ErrorCode::UnknownLoss: return "UnknownLoss";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InsufficientStratum: return "InsufficientStratum";
    case ErrorCode::UnknownStrataKey: return "UnknownStrataKey";
    case ErrorCode::MissingWeights: return "MissingWeights";
    case ErrorCode::EmptyStratum: return "EmptyStratum";
    case ErrorCode::InvalidCount: return "InvalidCount";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::InvalidResampleCount: return "InvalidResampleCount";
    case ErrorCode::InvalidAlpha: return "InvalidAlpha";
    case ErrorCode::WeightSumInvalid: return "WeightSumInvalid";
    case ErrorCode::InvalidTrialCount: return "InvalidTrialCount";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateTable: return "DegenerateTable";
    case ErrorCode::SupportMismatch: return "SupportMismatch";
    case ErrorCode::DomainMismatch: return "DomainMismatch";
    case ErrorCode::NoShiftToClassify: return "NoShiftToClassify";
    case ErrorCode::InvalidSimplexRow: return "InvalidSimplexRow";
    case ErrorCode::DegenerateFlags: return "DegenerateFlags";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::EmptyCell: return "EmptyCell";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::MethodParamInvalid: return "MethodParamInvalid";
    case ErrorCode::SingularCovariance: return "SingularCovariance";
    case ErrorCode::EmptyValidation: return "EmptyValidation";
    case ErrorCode::DegenerateScores: return "DegenerateScores";
    case ErrorCode::BudgetZero: return "BudgetZero";
    case ErrorCode::MissingScenarioData: return "MissingScenarioData";
    case ErrorCode::ModelProcessError: return "ModelProcessError";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::DataLoadError: return "DataLoadError";
    case ErrorCode::FamilyAlphaExhausted: return "FamilyAlphaExhausted";
    case ErrorCode::StaleDataReuse: return "StaleDataReuse";
    case ErrorCode::LedgerCorrupt: return "LedgerCorrupt";
    case ErrorCode::NoReferenceBatch: return "NoReferenceBatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

std::string_view to_string(Direction d) noexcept {
  return d == Direction::at_least ? "at_least" : "at_most";
}

std::string_view to_string(SplitTag s) noexcept {
  switch (s) {
    case SplitTag::train: return "train";
    case SplitTag::validation: return "validation";
    case SplitTag::test: return "test";
    case SplitTag::production: return "production";
  }
  return "test";
}

std::string_view to_string(TaskKind t) noexcept {
  return t == TaskKind::classification ? "classification" : "regression";
}

std::string_view to_string(TestKind t) noexcept {
  return t == TestKind::exact_binomial ? "exact_binomial" : "bootstrap";
}

Direction parse_direction(std::string_view text) {
  if (text == "at_least") return Direction::at_least;
  if (text == "at_most") return Direction::at_most;
  throw Error(ErrorCode::ConfigInvalid, "unknown direction '" + std::string(text) + "'");
}

SplitTag parse_split_tag(std::string_view text) {
  if (text == "train") return SplitTag::train;
  if (text == "validation") return SplitTag::validation;
  if (text == "test") return SplitTag::test;
  if (text == "production") return SplitTag::production;
  throw Error(ErrorCode::ParseError, "unknown split tag '" + std::string(text) + "'");
}

TaskKind parse_task_kind(std::string_view text) {
  if (text == "classification") return TaskKind::classification;
  if (text == "regression") return TaskKind::regression;
  throw Error(ErrorCode::ConfigInvalid, "unknown task '" + std::string(text) + "'");
}

TestKind parse_test_kind(std::string_view text) {
  if (text == "exact_binomial") return TestKind::exact_binomial;
  if (text == "bootstrap") return TestKind::bootstrap;
  throw Error(ErrorCode::ConfigInvalid, "unknown test kind '" + std::string(text) + "'");
}

double target_value(const Target& t) noexcept {
  return std::visit([](auto v) { return static_cast<double>(v); }, t);
}

std::optional<std::size_t> Schema::feature_index(std::string_view name) const {
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].name == name) return i;
  }
  return std::nullopt;
}

std::string Schema::describe() const {
  std::ostringstream os;
  os << "task=" << to_string(task) << ";features=";
  for (const auto& f : features) {
    os << f.name << ':' << (f.kind == FeatureKind::real ? 'r' : 'c') << ',';
  }
  os << ";label=" << has_label << ";prediction=" << has_prediction << ";scores=" << has_scores
     << ";group=" << has_group << ";group_id=" << has_group_id << ";timestamp=" << has_timestamp
     << ";classes=" << num_classes;
  return os.str();
}

namespace {

void append_target(std::string& out, const std::optional<Target>& t) {
  if (!t) {
    out += "-";
  } else if (std::holds_alternative<ClassIndex>(*t)) {
    out += "c" + std::to_string(std::get<ClassIndex>(*t));
  } else {
    out += "r" + canonical_number(std::get<double>(*t));
  }
}

void check_target(const Schema& schema, const Target& t, std::size_t row, const char* role) {
  const bool is_class = std::holds_alternative<ClassIndex>(t);
  if ((schema.task == TaskKind::classification) != is_class) {
    throw Error(ErrorCode::SchemaViolation,
                "row " + std::to_string(row) + ": " + role + " type does not match task");
  }
  if (is_class) {
    const auto c = std::get<ClassIndex>(t);
    if (c < 0 || (schema.num_classes > 0 && static_cast<std::size_t>(c) >= schema.num_classes)) {
      throw Error(ErrorCode::SchemaViolation,
                  "row " + std::to_string(row) + ": " + role + " class index out of range");
    }
  } else if (!std::isfinite(std::get<double>(t))) {
    throw Error(ErrorCode::SchemaViolation,
                "row " + std::to_string(row) + ": non-finite " + role);
  }
}

void validate_row(const Schema& schema, const LabeledSample& s, std::size_t i) {
  const auto where = [i] { return "row " + std::to_string(i) + ": "; };
  if (s.features.size() != schema.features.size()) {
    throw Error(ErrorCode::SchemaViolation, where() + "feature arity mismatch");
  }
  const auto presence = [&](bool declared, bool present, const char* role) {
    if (declared != present) {
      throw Error(declared ? ErrorCode::MissingColumn : ErrorCode::SchemaViolation,
                  where() + role + (declared ? " missing" : " present but not declared"));
    }
  };
  presence(schema.has_label, s.label.has_value(), "label");
  presence(schema.has_prediction, s.prediction.has_value(), "prediction");
  presence(schema.has_scores, s.scores.has_value(), "scores");
  presence(schema.has_group, s.group.has_value(), "group");
  presence(schema.has_group_id, s.group_id.has_value(), "group_id");
  presence(schema.has_timestamp, s.timestamp.has_value(), "timestamp");
  if (s.label) check_target(schema, *s.label, i, "label");
  if (s.prediction) check_target(schema, *s.prediction, i, "prediction");
  if (s.scores) {
    double sum = 0.0;
    for (double v : *s.scores) {
      if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::SchemaViolation, where() + "score outside [0,1]");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error(ErrorCode::SchemaViolation, where() + "scores do not sum to 1");
    if (schema.num_classes > 0 && s.scores->size() != schema.num_classes) {
      throw Error(ErrorCode::SchemaViolation, where() + "score arity differs from class count");
    }
  }
  if (s.group && *s.group < 0) throw Error(ErrorCode::SchemaViolation, where() + "negative group code");
}

}  // namespace

std::string canonical_row(const Schema& schema, const LabeledSample& row) {
  std::string out;
  for (std::size_t j = 0; j < row.features.size(); ++j) {
    if (j) out += ',';
    out += canonical_number(row.features[j]);
  }
  out += '|';
  append_target(out, row.label);
  out += '|';
  append_target(out, row.prediction);
  out += '|';
  if (row.scores) {
    for (double v : *row.scores) out += canonical_number(v) + ",";
  }
  out += '|';
  out += row.group ? std::to_string(*row.group) : "-";
  out += '|';
  // Length-prefixed so that no identifier can forge a field separator.
  out += row.group_id ? std::to_string(row.group_id->size()) + ":" + *row.group_id : "-";
  out += '|';
  out += row.timestamp ? std::to_string(*row.timestamp) : "-";
  out += '|';
  out += to_string(row.split);
  (void)schema;
  return out;
}

Dataset::Dataset(Schema schema, std::vector<LabeledSample> rows, std::string provenance)
    : schema_(std::move(schema)), rows_(std::move(rows)), provenance_(std::move(provenance)) {
  std::string canonical = schema_.describe();
  canonical += '\n';
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    validate_row(schema_, rows_[i], i);
    canonical += canonical_row(schema_, rows_[i]);
    canonical += '\n';
  }
  hash_ = sha256_hex(canonical);
}

Dataset Dataset::subset(std::span<const std::size_t> indices, std::string provenance) const {
  std::vector<LabeledSample> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) out.push_back(rows_.at(i));
  return Dataset(schema_, std::move(out), std::move(provenance));
}

std::vector<double> Dataset::feature_column(std::size_t feature) const {
  if (feature >= schema_.features.size()) {
    throw Error(ErrorCode::MissingColumn, "feature index " + std::to_string(feature));
  }
  std::vector<double> col;
  col.reserve(rows_.size());
  for (const auto& r : rows_) col.push_back(r.features[feature]);
  return col;
}

namespace {

const std::vector<MetricInfo>& metric_table() {
  static const std::vector<MetricInfo> table = {
      {"accuracy", true, 0.0, 1.0, Direction::at_least},
      {"precision", true, 0.0, 1.0, Direction::at_least},
      {"recall", true, 0.0, 1.0, Direction::at_least},
      {"mse", false, 0.0, HUGE_VAL, Direction::at_most},
      {"rmse", false, 0.0, HUGE_VAL, Direction::at_most},
  };
  return table;
}

void require_nonempty(const Dataset& d) {
  if (d.empty()) throw Error(ErrorCode::EmptyDataset, "dataset has no rows");
}

void require_label_prediction(const Dataset& d) {
  if (!d.schema().has_label) throw Error(ErrorCode::MissingColumn, "label column required");
  if (!d.schema().has_prediction) throw Error(ErrorCode::MissingColumn, "prediction column required");
}

void require_classification(const Dataset& d, std::string_view metric) {
  if (d.schema().task != TaskKind::classification) {
    throw Error(ErrorCode::SchemaViolation, std::string(metric) + " requires a classification dataset");
  }
}

MetricValue proportion(std::string_view id, std::size_t k, std::vector<double> losses) {
  MetricValue m;
  m.metric_id = std::string(id);
  m.n = losses.size();
  if (m.n == 0) throw Error(ErrorCode::EmptyDataset, std::string(id) + " has an empty denominator");
  m.successes = k;
  m.value = static_cast<double>(k) / static_cast<double>(m.n);
  m.per_sample_losses = std::move(losses);
  return m;
}

}  // namespace

const MetricInfo& lookup_metric(std::string_view metric_id) {
  for (const auto& m : metric_table()) {
    if (m.id == metric_id) return m;
  }
  throw Error(ErrorCode::UnknownMetric, std::string(metric_id));
}

std::vector<std::string> registered_metrics() {
  std::vector<std::string> ids;
  for (const auto& m : metric_table()) ids.push_back(m.id);
  return ids;
}

MetricValue compute_metric(const Dataset& dataset, std::string_view metric_id) {
  const MetricInfo& info = lookup_metric(metric_id);
  require_label_prediction(dataset);
  require_nonempty(dataset);

  if (info.proportion) {
    require_classification(dataset, metric_id);
    std::size_t k = 0;
    std::vector<double> losses;
    losses.reserve(dataset.size());
    for (const auto& r : dataset.rows()) {
      const auto y = std::get<ClassIndex>(*r.label);
      const auto yhat = std::get<ClassIndex>(*r.prediction);
      bool counted = true;
      if (info.id == "precision") counted = (yhat == 1);
      if (info.id == "recall") counted = (y == 1);
      if (!counted) continue;
      const bool correct = (y == yhat);
      k += correct ? 1 : 0;
      losses.push_back(correct ? 0.0 : 1.0);
    }
    return proportion(info.id, k, std::move(losses));
  }

  MetricValue m;
  m.metric_id = info.id;
  m.n = dataset.size();
  m.per_sample_losses.reserve(m.n);
  double sum = 0.0;
  for (const auto& r : dataset.rows()) {
    const double e = target_value(*r.prediction) - target_value(*r.label);
    m.per_sample_losses.push_back(e * e);
    sum += e * e;
  }
  m.value = sum / static_cast<double>(m.n);
  if (info.id == "rmse") m.value = std::sqrt(m.value);
  return m;
}

MetricValue empirical_risk(const Dataset& dataset, std::string_view loss_id) {
  double (*loss)(const Target&, const Target&) = nullptr;
  if (loss_id == "zero_one") {
    loss = [](const Target& y, const Target& yhat) { return y == yhat ? 0.0 : 1.0; };
  } else if (loss_id == "squared") {
    loss = [](const Target& y, const Target& yhat) {
      const double e = target_value(yhat) - target_value(y);
      return e * e;
    };
  } else if (loss_id == "absolute") {
    loss = [](const Target& y, const Target& yhat) { return std::abs(target_value(yhat) - target_value(y)); };
  } else if (loss_id == "zero") {
    loss = [](const Target&, const Target&) { return 0.0; };
  } else {
    throw Error(ErrorCode::UnknownLoss, std::string(loss_id));
  }
  require_label_prediction(dataset);
  require_nonempty(dataset);

  MetricValue m;
  m.metric_id = "risk:" + std::string(loss_id);
  m.n = dataset.size();
  m.per_sample_losses.reserve(m.n);
  std::size_t hits = 0;
  double sum = 0.0;
  for (const auto& r : dataset.rows()) {
    const double l = loss(*r.label, *r.prediction);
    m.per_sample_losses.push_back(l);
    sum += l;
    hits += (l != 0.0) ? 1 : 0;
  }
  m.value = sum / static_cast<double>(m.n);
  if (loss_id == "zero_one") {
    m.successes = hits;
    m.value = static_cast<double>(hits) / static_cast<double>(m.n);
  }
  return m;
}

void MprSpec::validate() const {
  const MetricInfo& info = lookup_metric(metric_id);
  if (!(threshold >= info.lower && threshold <= info.upper)) {
    throw Error(ErrorCode::ConfigInvalid, "MPR '" + id + "': threshold outside the codomain of " + metric_id);
  }
  if (!(alpha_share >= 0.0 && alpha_share <= 1.0)) {
    throw Error(ErrorCode::ConfigInvalid, "MPR '" + id + "': alpha_share must lie in [0,1]");
  }
  if (test_kind == TestKind::exact_binomial && !info.proportion) {
    throw Error(ErrorCode::ConfigInvalid, "MPR '" + id + "': exact_binomial requires a proportion metric");
  }
}

void SaddRecord::validate() const {
  if (context.empty() || technical.empty() || sampling_text.empty()) {
    throw Error(ErrorCode::ConfigInvalid, "SADD record: all three parts must be non-empty");
  }
  if (sampling.strategy.empty()) {
    throw Error(ErrorCode::ConfigInvalid, "SADD record: sampling strategy id missing");
  }
}

std::string SaddRecord::content_hash() const {
  std::string canonical;
  for (const std::string* part : {&context, &technical, &sampling_text, &sampling.strategy}) {
    canonical += std::to_string(part->size()) + ":" + *part + ";";
  }
  for (const auto& [k, v] : sampling.parameters) {
    canonical += std::to_string(k.size()) + ":" + k + "=" + std::to_string(v.size()) + ":" + v + ";";
  }
  canonical += "v" + std::to_string(version);
  return sha256_hex(canonical);
}

void check_revision(const SaddRecord& previous, const SaddRecord& next) {
  if (next.version <= previous.version) {
    throw Error(ErrorCode::ConfigInvalid, "SADD version must strictly increase (" +
                                              std::to_string(previous.version) + " -> " +
                                              std::to_string(next.version) + ")");
  }
}

}  // namespace certkit
