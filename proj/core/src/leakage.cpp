#include "certkit/leakage.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <unordered_map>

#include "certkit/hash.hpp"
#include "certkit/random.hpp"

namespace certkit {

std::string_view to_string(LeakageSeverity s) noexcept {
  switch (s) {
    case LeakageSeverity::clean: return "clean";
    case LeakageSeverity::warning: return "warning";
    case LeakageSeverity::violation: return "violation";
  }
  return "clean";
}

std::string_view to_string(DuplicateKey k) noexcept {
  return k == DuplicateKey::exact_features ? "exact_features" : "feature_hash";
}

DuplicateKey parse_duplicate_key(std::string_view text) {
  if (text == "exact_features") return DuplicateKey::exact_features;
  if (text == "feature_hash") return DuplicateKey::feature_hash;
  throw Error(ErrorCode::ConfigInvalid, "unknown duplicate key '" + std::string(text) + "'");
}

std::string canonical_features(const LabeledSample& row) {
  std::string out;
  char buf[32];
  for (std::size_t j = 0; j < row.features.size(); ++j) {
    double v = row.features[j];
    if (v == 0.0) v = 0.0;
    std::snprintf(buf, sizeof buf, "%.12g", v);
    if (j > 0) out.push_back(',');
    out += buf;
  }
  return out;
}

namespace {

void finish(LeakageReport& report, bool violation) {
  if (report.evidence.empty()) report.severity = LeakageSeverity::clean;
  else report.severity = violation ? LeakageSeverity::violation : LeakageSeverity::warning;
}

void require_compatible(const Dataset& train, const Dataset& test) {
  const auto& a = train.schema().features;
  const auto& b = test.schema().features;
  bool same = a.size() == b.size();
  for (std::size_t j = 0; same && j < a.size(); ++j) same = a[j].name == b[j].name && a[j].kind == b[j].kind;
  if (!same) throw Error(ErrorCode::SchemaMismatch, "train and test declare different feature columns");
}

using KeyIndex = std::unordered_map<std::string, std::vector<std::size_t>>;

KeyIndex index_rows(const Dataset& data, DuplicateKey key) {
  KeyIndex index;
  for (std::size_t i = 0; i < data.size(); ++i) {
    std::string k = canonical_features(data.row(i));
    if (key == DuplicateKey::feature_hash) k = sha256_hex(k);
    index[std::move(k)].push_back(i);
  }
  return index;
}

void within_set(const KeyIndex& index, bool is_train, std::vector<LeakageEvidence>& out) {
  std::vector<std::vector<std::size_t>> groups;
  for (const auto& [k, rows] : index) {
    if (rows.size() > 1) groups.push_back(rows);
  }
  std::sort(groups.begin(), groups.end());
  for (auto& rows : groups) {
    LeakageEvidence e;
    e.kind = is_train ? "train_duplicate" : "test_duplicate";
    (is_train ? e.train_rows : e.test_rows) = std::move(rows);
    out.push_back(std::move(e));
  }
}

}  // namespace

LeakageReport duplicate_check(const Dataset& train, const Dataset& test, DuplicateKey key) {
  require_compatible(train, test);
  LeakageReport report;
  report.check_id = "duplicate_check";
  const KeyIndex train_index = index_rows(train, key);
  const KeyIndex test_index = index_rows(test, key);

  for (std::size_t i = 0; i < test.size(); ++i) {
    std::string k = canonical_features(test.row(i));
    if (key == DuplicateKey::feature_hash) k = sha256_hex(k);
    const auto it = train_index.find(k);
    if (it == train_index.end()) continue;
    LeakageEvidence e;
    e.kind = "cross_duplicate";
    e.test_rows = {i};
    e.train_rows = it->second;
    report.evidence.push_back(std::move(e));
  }
  const bool violation = !report.evidence.empty();
  within_set(train_index, true, report.evidence);
  within_set(test_index, false, report.evidence);
  finish(report, violation);

  std::size_t cross = 0;
  for (const auto& e : report.evidence) cross += e.kind == "cross_duplicate" ? 1 : 0;
  report.description = std::to_string(cross) + " test rows duplicate a train row (key " +
                       std::string(to_string(key)) + ", 12 significant digits)";
  return report;
}

LeakageReport group_leakage_check(const Dataset& train, const Dataset& test) {
  if (!train.schema().has_group_id || !test.schema().has_group_id) {
    throw Error(ErrorCode::MissingColumn, "group_id column required in both train and test");
  }
  std::map<std::string, LeakageEvidence> shared;
  std::map<std::string, std::vector<std::size_t>> train_ids;
  for (std::size_t i = 0; i < train.size(); ++i) train_ids[*train.row(i).group_id].push_back(i);
  for (std::size_t i = 0; i < test.size(); ++i) {
    const std::string& id = *test.row(i).group_id;
    const auto it = train_ids.find(id);
    if (it == train_ids.end()) continue;
    auto& e = shared[id];
    if (e.kind.empty()) {
      e.kind = "shared_group";
      e.item = id;
      e.train_rows = it->second;
    }
    e.test_rows.push_back(i);
  }
  LeakageReport report;
  report.check_id = "group_leakage_check";
  for (auto& [id, e] : shared) report.evidence.push_back(std::move(e));
  finish(report, true);
  report.description = std::to_string(report.evidence.size()) + " group ids occur in both train and test";
  return report;
}

LeakageReport temporal_split_check(const Dataset& train, const Dataset& test) {
  if (!train.schema().has_timestamp || !test.schema().has_timestamp) {
    throw Error(ErrorCode::MissingColumn, "timestamp column required in both train and test");
  }
  LeakageReport report;
  report.check_id = "temporal_split_check";
  if (train.empty() || test.empty()) {
    report.description = "nothing to compare";
    return report;
  }
  std::int64_t test_start = *test.row(0).timestamp;
  for (const auto& r : test.rows()) test_start = std::min(test_start, *r.timestamp);
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const std::int64_t ts = *train.row(i).timestamp;
    if (ts <= test_start) continue;
    if (report.evidence.empty()) lo = hi = ts;
    lo = std::min(lo, ts);
    hi = std::max(hi, ts);
    LeakageEvidence e;
    e.kind = "late_train_row";
    e.train_rows = {i};
    e.statistic = static_cast<double>(ts);
    report.evidence.push_back(std::move(e));
  }
  finish(report, true);
  report.parameters["test_start"] = static_cast<double>(test_start);
  if (report.evidence.empty()) {
    report.description = "all train timestamps precede the test start";
  } else {
    report.parameters["late_count"] = static_cast<double>(report.evidence.size());
    report.parameters["late_min"] = static_cast<double>(lo);
    report.parameters["late_max"] = static_cast<double>(hi);
    report.description = std::to_string(report.evidence.size()) + " train rows stamped in [" + std::to_string(lo) +
                         ", " + std::to_string(hi) + "], after the test start " + std::to_string(test_start);
  }
  return report;
}

namespace {

std::vector<double> mid_ranks(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = r;
    i = j;
  }
  return ranks;
}

struct Split {
  double threshold = 0.0;
  bool flipped = false;
};

// Best single threshold by balanced accuracy; predicts 1 iff s * x > t with
// s = -1 when flipped.
Split fit_split(std::span<const double> x, std::span<const int> y) {
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  const double pos = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const double neg = static_cast<double>(n) - pos;

  Split best{x[order.front()] - 1.0, false};
  double best_score = 0.5;
  double pos_below = 0.0;
  double neg_below = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && x[order[j]] == x[order[i]]) {
      (y[order[j]] == 1 ? pos_below : neg_below) += 1.0;
      ++j;
    }
    // Threshold at x[order[i]]: values <= it predicted 0.
    const double tpr = (pos - pos_below) / pos;
    const double tnr = neg_below / neg;
    const double up = 0.5 * (tpr + tnr);
    const double down = 1.0 - up;
    if (up > best_score) {
      best_score = up;
      best = {x[order[i]], false};
    }
    if (down > best_score) {
      best_score = down;
      best = {-x[order[i]], true};
    }
    i = j;
  }
  return best;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(ErrorCode::DimensionMismatch, "spearman: length mismatch");
  const auto rx = mid_ranks(x);
  const auto ry = mid_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return sxy / std::sqrt(sxx * syy);
}

LeakageReport target_proxy_screen(const Dataset& dataset, double auc_threshold, double holdout_fraction,
                                  std::uint64_t seed) {
  const Schema& schema = dataset.schema();
  if (!schema.has_label) throw Error(ErrorCode::MissingColumn, "target_proxy_screen needs labels");
  if (dataset.size() < kProxyMinRows) {
    throw Error(ErrorCode::TooFewSamples, "target_proxy_screen needs at least " + std::to_string(kProxyMinRows) +
                                              " rows, got " + std::to_string(dataset.size()));
  }
  if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "holdout_fraction must lie in (0, 1)");
  }
  if (!(auc_threshold > 0.5 && auc_threshold <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "auc_threshold must lie in (0.5, 1]");
  }
  const bool binary = schema.task == TaskKind::classification;
  const std::size_t n = dataset.size();
  std::vector<double> label(n);
  for (std::size_t i = 0; i < n; ++i) {
    label[i] = target_value(*dataset.row(i).label);
    if (binary && label[i] != 0.0 && label[i] != 1.0) {
      throw Error(ErrorCode::SchemaViolation, "target_proxy_screen supports binary class labels only");
    }
  }

  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(perm));
  const auto n_hold = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(holdout_fraction * static_cast<double>(n))), 1, n - 1);
  const std::span<const std::size_t> hold(perm.data(), n_hold);
  const std::span<const std::size_t> fit(perm.data() + n_hold, n - n_hold);

  LeakageReport report;
  report.check_id = "target_proxy_screen";
  report.parameters["auc_threshold"] = auc_threshold;
  report.parameters["correlation_threshold"] = kProxyCorrelationThreshold;
  report.parameters["holdout_fraction"] = holdout_fraction;
  report.parameters["seed"] = static_cast<double>(seed);

  const auto gather = [&](std::span<const std::size_t> idx, const std::vector<double>& src) {
    std::vector<double> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(src[i]);
    return out;
  };
  const auto count_pos = [&](std::span<const std::size_t> idx) {
    std::size_t k = 0;
    for (std::size_t i : idx) k += label[i] == 1.0 ? 1 : 0;
    return k;
  };
  if (binary) {
    const std::size_t fit_pos = count_pos(fit);
    const std::size_t hold_pos = count_pos(hold);
    if (fit_pos == 0 || fit_pos == fit.size() || hold_pos == 0 || hold_pos == hold.size()) {
      throw Error(ErrorCode::DegenerateFlags, "target_proxy_screen needs both classes in each split half");
    }
  }

  const auto y_fit_d = gather(fit, label);
  const auto y_hold_d = gather(hold, label);
  const std::vector<int> y_fit(y_fit_d.begin(), y_fit_d.end());
  const std::vector<int> y_hold(y_hold_d.begin(), y_hold_d.end());
  for (std::size_t j = 0; j < schema.features.size(); ++j) {
    const auto column = dataset.feature_column(j);
    const auto x_fit = gather(fit, column);
    const auto x_hold = gather(hold, column);
    double stat = 0.0;
    bool flagged = false;
    if (binary) {
      const Split split = fit_split(x_fit, y_fit);
      const double sign = split.flipped ? -1.0 : 1.0;
      double tp = 0.0;
      double tn = 0.0;
      double pos = 0.0;
      for (std::size_t i = 0; i < x_hold.size(); ++i) {
        const bool predicted = sign * x_hold[i] > split.threshold;
        if (y_hold[i] == 1) {
          pos += 1.0;
          tp += predicted ? 1.0 : 0.0;
        } else {
          tn += predicted ? 0.0 : 1.0;
        }
      }
      // AUC of a hard classifier is its balanced accuracy.
      stat = 0.5 * (tp / pos + tn / (static_cast<double>(x_hold.size()) - pos));
      flagged = stat >= auc_threshold;
    } else {
      stat = spearman(x_hold, y_hold_d);
      flagged = std::abs(stat) >= kProxyCorrelationThreshold;
    }
    report.parameters["holdout_" + std::string(binary ? "auc:" : "spearman:") + schema.features[j].name] = stat;
    if (flagged) {
      LeakageEvidence e;
      e.kind = "proxy_feature";
      e.item = schema.features[j].name;
      e.statistic = stat;
      report.evidence.push_back(std::move(e));
    }
  }
  finish(report, false);
  report.description = std::to_string(report.evidence.size()) + " of " + std::to_string(schema.features.size()) +
                       " features discriminate the label on the holdout above threshold";
  return report;
}

}  // namespace certkit
