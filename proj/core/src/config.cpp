#include "certkit/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "certkit/random.hpp"

namespace certkit {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(ErrorCode::ConfigInvalid, what); }

template <typename T>
T read(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key) || j[key].is_null()) return fallback;
  try {
    return j[key].get<T>();
  } catch (const json::exception&) {
    invalid(where + "." + key + ": wrong type");
  }
}

std::optional<std::string> read_opt_string(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_string()) invalid(where + "." + key + ": expected a string");
  return j[key].get<std::string>();
}

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) invalid(where + ": expected an object");
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) invalid(where + ": unknown key '" + key + "'");
  }
}

// Parsers from other modules report their own error codes; inside a config
// every such failure is a config error.
template <typename F>
auto config_parse(F&& f, const std::string& where) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigInvalid || e.code() == ErrorCode::MissingScenarioData) throw;
    invalid(where + ": " + e.what());
  }
}

void check_alpha(double a, const std::string& where) {
  if (!(a > 0.0 && a < 1.0)) invalid(where + ": alpha must lie in (0, 1)");
}

json opt_json(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }
json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

ColumnRoles parse_column_roles(const json& j) {
  const std::string where = "columns";
  require_object(j, where);
  reject_unknown(j,
                 {"features", "categorical_features", "label", "prediction", "scores", "group", "group_id",
                  "timestamp", "split_tag", "task", "num_classes", "label_dictionary", "default_split"},
                 where);
  ColumnRoles r;
  r.features = read<std::vector<std::string>>(j, "features", {}, where);
  r.categorical_features = read<std::vector<std::string>>(j, "categorical_features", {}, where);
  r.label = read_opt_string(j, "label", where);
  r.prediction = read_opt_string(j, "prediction", where);
  r.scores = read<std::vector<std::string>>(j, "scores", {}, where);
  r.group = read_opt_string(j, "group", where);
  r.group_id = read_opt_string(j, "group_id", where);
  r.timestamp = read_opt_string(j, "timestamp", where);
  r.split_tag = read_opt_string(j, "split_tag", where);
  const auto task = read<std::string>(j, "task", "classification", where);
  r.task = config_parse([&] { return parse_task_kind(task); }, where + ".task");
  r.num_classes = read<std::size_t>(j, "num_classes", 0, where);
  r.label_dictionary = read<std::vector<std::string>>(j, "label_dictionary", {}, where);
  const auto split = read<std::string>(j, "default_split", "test", where);
  r.default_split = config_parse([&] { return parse_split_tag(split); }, where + ".default_split");
  for (const auto& c : r.categorical_features) {
    if (std::find(r.features.begin(), r.features.end(), c) == r.features.end()) {
      invalid(where + ": categorical feature '" + c + "' is not a feature");
    }
  }
  return r;
}

json column_roles_json(const ColumnRoles& r) {
  return json{{"features", r.features},
              {"categorical_features", r.categorical_features},
              {"label", opt_json(r.label)},
              {"prediction", opt_json(r.prediction)},
              {"scores", r.scores},
              {"group", opt_json(r.group)},
              {"group_id", opt_json(r.group_id)},
              {"timestamp", opt_json(r.timestamp)},
              {"split_tag", opt_json(r.split_tag)},
              {"task", std::string(to_string(r.task))},
              {"num_classes", r.num_classes},
              {"label_dictionary", r.label_dictionary},
              {"default_split", std::string(to_string(r.default_split))}};
}

const DatasetBinding& AuditConfig::dataset(const std::string& name) const {
  const auto it = datasets.find(name);
  if (it == datasets.end()) invalid("no dataset bound to '" + name + "'");
  return it->second;
}

Dataset AuditConfig::load(const std::string& name) const {
  const auto& b = dataset(name);
  return load_dataset(b.resolved, b.roles);
}

AuditConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  require_object(j, "config");
  reject_unknown(j,
                 {"schema_version", "seed", "model_id", "sadd", "columns", "datasets", "family", "mprs", "fairness",
                  "recertification", "leakage", "drift", "uncertainty", "ood", "robustness"},
                 "config");
  AuditConfig c;
  c.base_dir = base_dir;
  const int version = read<int>(j, "schema_version", kConfigSchemaVersion, "config");
  if (version != kConfigSchemaVersion) invalid("unsupported schema_version " + std::to_string(version));
  c.seed = read<std::uint64_t>(j, "seed", 0, "config");
  if (!j.contains("seed")) c.warnings.push_back("no seed declared; using 0");
  c.model_id = read<std::string>(j, "model_id", "unnamed-model", "config");

  // SADD
  if (!j.contains("sadd")) invalid("config: sadd section is required");
  {
    const json& s = j["sadd"];
    require_object(s, "sadd");
    reject_unknown(s, {"context", "technical", "sampling_text", "sampling", "version"}, "sadd");
    c.sadd.context = read<std::string>(s, "context", "", "sadd");
    c.sadd.technical = read<std::string>(s, "technical", "", "sadd");
    c.sadd.sampling_text = read<std::string>(s, "sampling_text", "", "sadd");
    c.sadd.version = read<std::int64_t>(s, "version", 1, "sadd");
    if (s.contains("sampling")) {
      const json& sm = s["sampling"];
      require_object(sm, "sadd.sampling");
      c.sadd.sampling.strategy = read<std::string>(sm, "strategy", "", "sadd.sampling");
      c.sadd.sampling.parameters = read<std::map<std::string, std::string>>(sm, "parameters", {}, "sadd.sampling");
    }
    config_parse([&] { c.sadd.validate(); }, "sadd");
  }

  // Columns and datasets
  if (!j.contains("columns")) invalid("config: columns section is required");
  c.columns = parse_column_roles(j["columns"]);
  if (!j.contains("datasets")) invalid("config: datasets section is required");
  require_object(j["datasets"], "datasets");
  for (const auto& [name, value] : j["datasets"].items()) {
    DatasetBinding b;
    b.roles = c.columns;
    if (value.is_string()) {
      b.path = value.get<std::string>();
    } else if (value.is_object()) {
      reject_unknown(value, {"path", "columns"}, "datasets." + name);
      b.path = read<std::string>(value, "path", "", "datasets." + name);
      if (value.contains("columns")) b.roles = parse_column_roles(value["columns"]);
    } else {
      invalid("datasets." + name + ": expected a path or an object");
    }
    if (b.path.empty()) invalid("datasets." + name + ": empty path");
    b.resolved = std::filesystem::path(b.path).is_absolute() ? std::filesystem::path(b.path) : base_dir / b.path;
    c.datasets.emplace(name, std::move(b));
  }
  if (!c.has_dataset("test")) invalid("datasets: a 'test' binding is required");

  // Within-audit family
  if (j.contains("family")) {
    const json& f = j["family"];
    require_object(f, "family");
    reject_unknown(f, {"alpha", "procedure"}, "family");
    c.family.alpha = read<double>(f, "alpha", 0.05, "family");
    const auto proc = read<std::string>(f, "procedure", "fallback", "family");
    c.family.procedure = config_parse([&] { return parse_procedure(proc); }, "family.procedure");
  } else {
    c.warnings.push_back("no family declared; using alpha 0.05 with the fallback procedure");
  }
  check_alpha(c.family.alpha, "family");

  // MPRs
  bool any_share = false;
  std::set<std::string> ids;
  if (j.contains("mprs")) {
    if (!j["mprs"].is_array()) invalid("mprs: expected a list");
    for (std::size_t i = 0; i < j["mprs"].size(); ++i) {
      const json& m = j["mprs"][i];
      const std::string where = "mprs[" + std::to_string(i) + "]";
      require_object(m, where);
      reject_unknown(m, {"id", "metric", "threshold", "direction", "alpha_share", "test", "bootstrap_resamples"},
                     where);
      MprSpec spec;
      spec.metric_id = read<std::string>(m, "metric", "", where);
      spec.id = read<std::string>(m, "id", spec.metric_id, where);
      if (!m.contains("threshold")) invalid(where + ": threshold is required");
      spec.threshold = read<double>(m, "threshold", 0.0, where);
      const auto info = config_parse([&] { return lookup_metric(spec.metric_id); }, where + ".metric");
      const auto dir = read<std::string>(m, "direction", std::string(to_string(info.natural_direction)), where);
      spec.direction = config_parse([&] { return parse_direction(dir); }, where + ".direction");
      const auto test = read<std::string>(m, "test", info.proportion ? "exact_binomial" : "bootstrap", where);
      spec.test_kind = config_parse([&] { return parse_test_kind(test); }, where + ".test");
      spec.bootstrap_resamples = read<std::size_t>(m, "bootstrap_resamples", 2000, where);
      any_share = any_share || m.contains("alpha_share");
      spec.alpha_share = read<double>(m, "alpha_share", 0.0, where);
      config_parse([&] { spec.validate(); }, where);
      if (!ids.insert(spec.id).second) invalid(where + ": duplicate id '" + spec.id + "'");
      c.mprs.push_back(std::move(spec));
    }
  }

  // Fairness MPRs join the same family.
  if (j.contains("fairness")) {
    const json& f = j["fairness"];
    require_object(f, "fairness");
    reject_unknown(f, {"mprs", "bootstrap_resamples"}, "fairness");
    c.fairness.bootstrap_resamples = read<std::size_t>(f, "bootstrap_resamples", 2000, "fairness");
    if (c.fairness.bootstrap_resamples < kBootstrapMinResamples) {
      invalid("fairness.bootstrap_resamples must be at least " + std::to_string(kBootstrapMinResamples));
    }
    if (f.contains("mprs")) {
      if (!f["mprs"].is_array()) invalid("fairness.mprs: expected a list");
      for (std::size_t i = 0; i < f["mprs"].size(); ++i) {
        const json& m = f["mprs"][i];
        const std::string where = "fairness.mprs[" + std::to_string(i) + "]";
        require_object(m, where);
        reject_unknown(m, {"id", "metric", "max_violation", "alpha_share"}, where);
        FairnessMprConfig fm;
        const auto metric = read<std::string>(m, "metric", "", where);
        fm.mpr.metric = config_parse([&] { return parse_fairness_metric(metric); }, where + ".metric");
        fm.id = read<std::string>(m, "id", metric, where);
        if (!m.contains("max_violation")) invalid(where + ": max_violation is required");
        fm.mpr.max_violation = read<double>(m, "max_violation", 0.0, where);
        if (!(fm.mpr.max_violation >= 0.0)) invalid(where + ": max_violation must be >= 0");
        any_share = any_share || m.contains("alpha_share");
        fm.alpha_share = read<double>(m, "alpha_share", 0.0, where);
        if (!ids.insert(fm.id).second) invalid(where + ": duplicate id '" + fm.id + "'");
        c.fairness.mprs.push_back(std::move(fm));
      }
    }
    if (!c.fairness.mprs.empty() && !c.columns.group) invalid("fairness: a group column must be declared");
  }
  const std::size_t family_size = c.mprs.size() + c.fairness.mprs.size();
  if (family_size == 0) invalid("config: at least one MPR or fairness MPR is required");
  if (!any_share) {
    const double share = 1.0 / static_cast<double>(family_size);
    for (auto& m : c.mprs) m.alpha_share = share;
    for (auto& m : c.fairness.mprs) m.alpha_share = share;
    if (family_size > 1) c.warnings.push_back("no alpha shares declared; splitting the family alpha uniformly");
  } else {
    double sum = 0.0;
    for (const auto& m : c.mprs) sum += m.alpha_share;
    for (const auto& m : c.fairness.mprs) sum += m.alpha_share;
    if (std::abs(sum - 1.0) > 1e-9) invalid("alpha shares sum to " + std::to_string(sum) + ", expected 1");
  }
  {
    std::vector<FairnessMpr> fm;
    for (const auto& m : c.fairness.mprs) fm.push_back(m.mpr);
    if (has_incompatible_fairness_mprs(fm)) {
      c.warnings.push_back(
          "statistical parity and an odds-type requirement are both configured; with unequal base rates they "
          "cannot in general hold together");
    }
  }

  // Re-certification family
  if (j.contains("recertification")) {
    const json& r = j["recertification"];
    require_object(r, "recertification");
    reject_unknown(r, {"alpha", "weights"}, "recertification");
    c.recertification.alpha = read<double>(r, "alpha", 0.05, "recertification");
    c.recertification.weights = read<std::vector<double>>(r, "weights", {}, "recertification");
    check_alpha(c.recertification.alpha, "recertification");
    double sum = 0.0;
    for (double w : c.recertification.weights) {
      if (!(w >= 0.0)) invalid("recertification.weights must be non-negative");
      sum += w;
    }
    if (!c.recertification.weights.empty() && std::abs(sum - 1.0) > 1e-12) {
      invalid("recertification.weights sum to " + std::to_string(sum) + ", expected 1");
    }
  }

  // Leakage
  c.leakage.group = c.columns.group_id.has_value();
  c.leakage.temporal = c.columns.timestamp.has_value();
  c.leakage.target_proxy = c.columns.label.has_value();
  if (j.contains("leakage")) {
    const json& l = j["leakage"];
    require_object(l, "leakage");
    reject_unknown(l, {"enabled", "duplicate_key", "group", "temporal", "target_proxy", "proxy_auc_threshold",
                       "holdout_fraction"},
                   "leakage");
    c.leakage.enabled = read<bool>(l, "enabled", true, "leakage");
    const auto key = read<std::string>(l, "duplicate_key", "exact_features", "leakage");
    c.leakage.duplicate_key = config_parse([&] { return parse_duplicate_key(key); }, "leakage.duplicate_key");
    c.leakage.group = read<bool>(l, "group", c.leakage.group, "leakage");
    c.leakage.temporal = read<bool>(l, "temporal", c.leakage.temporal, "leakage");
    c.leakage.target_proxy = read<bool>(l, "target_proxy", c.leakage.target_proxy, "leakage");
    c.leakage.proxy_auc_threshold = read<double>(l, "proxy_auc_threshold", kProxyAucThreshold, "leakage");
    c.leakage.holdout_fraction = read<double>(l, "holdout_fraction", 0.5, "leakage");
  }
  if (c.leakage.enabled) {
    if (c.leakage.group && !c.columns.group_id) invalid("leakage.group needs a group_id column");
    if (c.leakage.temporal && !c.columns.timestamp) invalid("leakage.temporal needs a timestamp column");
    if (c.leakage.target_proxy && !c.columns.label) invalid("leakage.target_proxy needs a label column");
  }

  // Drift
  if (j.contains("drift")) {
    const json& d = j["drift"];
    require_object(d, "drift");
    reject_unknown(d, {"enabled", "method", "alpha", "permutations", "window_size", "encoder_id"}, "drift");
    c.drift.enabled = read<bool>(d, "enabled", true, "drift");
    const auto method = read<std::string>(d, "method", "mmd_permutation", "drift");
    c.drift.method = config_parse([&] { return parse_shift_method(method); }, "drift.method");
    c.drift.alpha = read<double>(d, "alpha", 0.05, "drift");
    c.drift.permutations = read<std::size_t>(d, "permutations", 1000, "drift");
    c.drift.window_size = read<std::size_t>(d, "window_size", 0, "drift");
    c.drift.encoder_id = read<std::string>(d, "encoder_id", "identity", "drift");
    check_alpha(c.drift.alpha, "drift");
  }

  // Uncertainty
  if (j.contains("uncertainty")) {
    const json& u = j["uncertainty"];
    require_object(u, "uncertainty");
    reject_unknown(u, {"ensemble", "thresholds", "task", "component"}, "uncertainty");
    UncertaintyConfig uc;
    uc.ensemble = read_opt_string(u, "ensemble", "uncertainty");
    if (!uc.ensemble) invalid("uncertainty: an ensemble file is required");
    uc.ensemble_resolved = std::filesystem::path(*uc.ensemble).is_absolute() ? std::filesystem::path(*uc.ensemble)
                                                                              : base_dir / *uc.ensemble;
    if (u.contains("thresholds")) {
      const json& t = u["thresholds"];
      require_object(t, "uncertainty.thresholds");
      reject_unknown(t, {"total", "aleatoric", "epistemic"}, "uncertainty.thresholds");
      for (const char* k : {"total", "aleatoric", "epistemic"}) {
        if (!t.contains(k) || t[k].is_null()) continue;
        const double v = read<double>(t, k, 0.0, "uncertainty.thresholds");
        if (!(v >= 0.0)) invalid(std::string("uncertainty.thresholds.") + k + " must be >= 0");
        (k == std::string("total") ? uc.thresholds.total
                                   : k == std::string("aleatoric") ? uc.thresholds.aleatoric : uc.thresholds.epistemic) = v;
      }
    }
    const auto task = read<std::string>(u, "task", "misclassification_detection", "uncertainty");
    uc.task = config_parse([&] { return parse_quality_task(task); }, "uncertainty.task");
    const auto comp = read<std::string>(u, "component", "total", "uncertainty");
    uc.component = config_parse([&] { return parse_uncertainty_component(comp); }, "uncertainty.component");
    c.uncertainty = std::move(uc);
  }

  // OOD
  if (j.contains("ood")) {
    const json& o = j["ood"];
    require_object(o, "ood");
    reject_unknown(o, {"method", "knn_k", "kde_bandwidth_scale", "target_tpr", "scenarios"}, "ood");
    OodConfig oc;
    const auto method = read<std::string>(o, "method", "distance_centroid", "ood");
    oc.method = config_parse([&] { return parse_ood_method(method); }, "ood.method");
    oc.params.knn_k = read<std::size_t>(o, "knn_k", 5, "ood");
    oc.params.kde_bandwidth_scale = read<double>(o, "kde_bandwidth_scale", 1.0, "ood");
    oc.target_tpr = read<double>(o, "target_tpr", kDefaultTargetTpr, "ood");
    if (!(oc.target_tpr > 0.0 && oc.target_tpr <= 1.0)) invalid("ood.target_tpr must lie in (0, 1]");
    oc.scenarios = config_parse([&] { return describe_ood_scenarios(o.value("scenarios", json::array()), base_dir); },
                                "ood.scenarios");
    for (const auto& s : o.value("scenarios", json::array())) oc.scenario_paths.push_back(s["dataset"].get<std::string>());
    if (oc.method == OodMethod::distance_centroid && !c.columns.label) invalid("ood: distance_centroid needs labels");
    if (oc.method == OodMethod::max_softmax && c.columns.scores.empty()) invalid("ood: max_softmax needs score columns");
    if (!c.has_dataset("train") && !c.has_dataset("reference")) invalid("ood: needs a train or reference dataset");
    c.ood = std::move(oc);
  }

  // Robustness
  if (j.contains("robustness")) {
    const json& r = j["robustness"];
    require_object(r, "robustness");
    reject_unknown(r, {"model", "epsilon", "norm", "attack", "budget"}, "robustness");
    RobustnessConfig rc;
    rc.model_command = read<std::vector<std::string>>(r, "model", {}, "robustness");
    if (rc.model_command.empty()) invalid("robustness: a model command is required");
    rc.options.epsilon = read<double>(r, "epsilon", 0.0, "robustness");
    if (!(rc.options.epsilon >= 0.0)) invalid("robustness.epsilon must be >= 0");
    const auto norm = read<std::string>(r, "norm", "Linf", "robustness");
    rc.options.norm = config_parse([&] { return parse_norm(norm); }, "robustness.norm");
    const auto attack = read<std::string>(r, "attack", "coordinate_descent", "robustness");
    rc.options.attack = config_parse([&] { return parse_attack(attack); }, "robustness.attack");
    rc.options.budget = read<std::size_t>(r, "budget", 100, "robustness");
    if (rc.options.budget == 0) invalid("robustness.budget must be positive");
    rc.options.seed = derive_seed(c.seed, 0x0b5);
    if (!c.columns.label) invalid("robustness needs a label column");
    c.robustness = std::move(rc);
  }
  return c;
}

AuditConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) invalid("cannot open config '" + path.string() + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    invalid("config '" + path.string() + "': " + e.what());
  }
  return parse_config(j, path.parent_path());
}

json AuditConfig::echo() const {
  json j;
  j["schema_version"] = kConfigSchemaVersion;
  j["seed"] = seed;
  j["model_id"] = model_id;
  j["sadd"] = {{"context", sadd.context},
               {"technical", sadd.technical},
               {"sampling_text", sadd.sampling_text},
               {"sampling", {{"strategy", sadd.sampling.strategy}, {"parameters", sadd.sampling.parameters}}},
               {"version", sadd.version}};
  j["columns"] = column_roles_json(columns);
  json ds = json::object();
  for (const auto& [name, b] : datasets) ds[name] = {{"path", b.path}, {"columns", column_roles_json(b.roles)}};
  j["datasets"] = ds;
  j["family"] = {{"alpha", family.alpha}, {"procedure", std::string(to_string(family.procedure))}};
  json mj = json::array();
  for (const auto& m : mprs) {
    mj.push_back({{"id", m.id},
                  {"metric", m.metric_id},
                  {"threshold", m.threshold},
                  {"direction", std::string(to_string(m.direction))},
                  {"alpha_share", m.alpha_share},
                  {"test", std::string(to_string(m.test_kind))},
                  {"bootstrap_resamples", m.bootstrap_resamples}});
  }
  j["mprs"] = mj;
  json fj = json::array();
  for (const auto& m : fairness.mprs) {
    fj.push_back({{"id", m.id},
                  {"metric", std::string(to_string(m.mpr.metric))},
                  {"max_violation", m.mpr.max_violation},
                  {"alpha_share", m.alpha_share}});
  }
  j["fairness"] = {{"mprs", fj}, {"bootstrap_resamples", fairness.bootstrap_resamples}};
  j["recertification"] = {{"alpha", recertification.alpha}, {"weights", recertification.weights}};
  j["leakage"] = {{"enabled", leakage.enabled},
                  {"duplicate_key", std::string(to_string(leakage.duplicate_key))},
                  {"group", leakage.group},
                  {"temporal", leakage.temporal},
                  {"target_proxy", leakage.target_proxy},
                  {"proxy_auc_threshold", leakage.proxy_auc_threshold},
                  {"proxy_correlation_threshold", kProxyCorrelationThreshold},
                  {"holdout_fraction", leakage.holdout_fraction}};
  j["drift"] = {{"enabled", drift.enabled},
                {"method", std::string(to_string(drift.method))},
                {"alpha", drift.alpha},
                {"permutations", drift.permutations},
                {"window_size", drift.window_size},
                {"encoder_id", drift.encoder_id}};
  if (uncertainty) {
    j["uncertainty"] = {{"ensemble", *uncertainty->ensemble},
                        {"thresholds",
                         {{"total", opt_json(uncertainty->thresholds.total)},
                          {"aleatoric", opt_json(uncertainty->thresholds.aleatoric)},
                          {"epistemic", opt_json(uncertainty->thresholds.epistemic)}}},
                        {"task", std::string(to_string(uncertainty->task))},
                        {"component", std::string(to_string(uncertainty->component))},
                        {"units", "nats"}};
  } else {
    j["uncertainty"] = nullptr;
  }
  if (ood) {
    json sc = json::array();
    for (std::size_t i = 0; i < ood->scenarios.size(); ++i) {
      sc.push_back({{"name", ood->scenarios[i].name},
                    {"dataset", ood->scenario_paths[i]},
                    {"narrative", ood->scenarios[i].narrative}});
    }
    j["ood"] = {{"method", std::string(to_string(ood->method))},
                {"knn_k", ood->params.knn_k},
                {"kde_bandwidth_scale", ood->params.kde_bandwidth_scale},
                {"target_tpr", ood->target_tpr},
                {"scenarios", sc}};
  } else {
    j["ood"] = nullptr;
  }
  if (robustness) {
    j["robustness"] = {{"model", robustness->model_command},
                       {"epsilon", robustness->options.epsilon},
                       {"norm", std::string(to_string(robustness->options.norm))},
                       {"attack", std::string(to_string(robustness->options.attack))},
                       {"budget", robustness->options.budget},
                       {"seed", robustness->options.seed},
                       {"distance", "Lp on raw feature values; categorical features are not perturbed"}};
  } else {
    j["robustness"] = nullptr;
  }
  return j;
}

}  // namespace certkit
