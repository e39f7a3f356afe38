#include "certkit/report.hpp"

#include <cmath>
#include <sstream>

#include "certkit/hash.hpp"

namespace certkit {

using nlohmann::json;

namespace {

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

std::string fmt(const json& v, int precision = 4) {
  if (v.is_null()) return "n/a";
  if (v.is_number_float()) {
    std::ostringstream os;
    os.precision(precision);
    os << v.get<double>();
    return os.str();
  }
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

}  // namespace

json to_json(const TestResult& r) {
  json j{{"test_id", r.test_id},
         {"statistic", num(r.statistic)},
         {"p_value", num(r.p_value)},
         {"conf_bound", num(r.conf_bound)},
         {"alpha_used", r.alpha_used},
         {"decision", std::string(to_string(r.decision))},
         {"n", r.n},
         {"threshold", num(r.threshold)},
         {"direction", std::string(to_string(r.direction))}};
  j["successes"] = r.successes ? json(*r.successes) : json(nullptr);
  j["seed"] = r.seed ? json(*r.seed) : json(nullptr);
  j["resamples"] = r.resamples ? json(*r.resamples) : json(nullptr);
  return j;
}

json to_json(const MetricValue& m) {
  json j{{"metric", m.metric_id}, {"value", num(m.value)}, {"n", m.n}};
  j["successes"] = m.successes ? json(*m.successes) : json(nullptr);
  return j;
}

json to_json(const SequentialDecision& d) {
  json steps = json::array();
  for (const auto& s : d.steps) {
    steps.push_back({{"id", s.id},
                     {"p_value", num(s.p_value)},
                     {"alpha_allocated", s.alpha_allocated},
                     {"decision", std::string(to_string(s.decision))},
                     {"alpha_carried_forward", s.alpha_carried_forward}});
  }
  return {{"procedure", d.procedure}, {"family_alpha", d.family_alpha}, {"steps", steps}, {"alpha_trace", d.alpha_trace()}};
}

json to_json(const LeakageReport& r) {
  json ev = json::array();
  for (const auto& e : r.evidence) {
    json item{{"kind", e.kind}};
    if (!e.train_rows.empty()) item["train_rows"] = e.train_rows;
    if (!e.test_rows.empty()) item["test_rows"] = e.test_rows;
    if (!e.item.empty()) item["item"] = e.item;
    if (e.statistic) item["statistic"] = num(*e.statistic);
    ev.push_back(std::move(item));
  }
  json params = json::object();
  for (const auto& [k, v] : r.parameters) params[k] = num(v);
  return {{"check_id", r.check_id},
          {"severity", std::string(to_string(r.severity))},
          {"evidence", ev},
          {"description", r.description},
          {"parameters", params}};
}

json to_json(const ShiftVerdict& v) {
  json tests = json::array();
  for (const auto& t : v.per_feature) tests.push_back(to_json(t));
  return {{"method", std::string(to_string(v.method))},
          {"shift", v.shift},
          {"alpha", v.alpha},
          {"severity", v.severity ? num(*v.severity) : json(nullptr)},
          {"bandwidth", v.bandwidth ? num(*v.bandwidth) : json(nullptr)},
          {"permutations", v.permutations},
          {"seed", v.seed},
          {"encoder_id", v.encoder_id},
          {"tests", tests}};
}

json to_json(const QualityReport& q) {
  json curve = json::array();
  for (const auto& p : q.risk_coverage) {
    curve.push_back({{"coverage", p.coverage}, {"risk", p.risk}, {"threshold", num(p.threshold)}});
  }
  return {{"task", std::string(to_string(q.task))},
          {"component", std::string(to_string(q.component))},
          {"auroc", num(q.auroc)},
          {"aurc", num(q.aurc)},
          {"risk_coverage", curve}};
}

json to_json(const OodEvaluation& e) {
  return {{"auroc", num(e.auroc)},
          {"fpr_at_95tpr", num(e.fpr_at_95tpr)},
          {"detection_accuracy", num(e.detection_accuracy)},
          {"threshold", num(e.threshold)},
          {"n_id", e.n_id},
          {"n_ood", e.n_ood}};
}

json to_json(const RobustnessResult& r) {
  std::size_t flips = 0;
  for (bool f : r.flip_found) flips += f ? 1 : 0;
  std::vector<int> flags(r.flip_found.begin(), r.flip_found.end());
  return {{"epsilon", r.epsilon},
          {"norm", std::string(to_string(r.norm))},
          {"attack", std::string(to_string(r.attack))},
          {"clean_accuracy", r.clean_accuracy},
          {"robust_accuracy_lower_bound", r.robust_accuracy_lower_bound},
          {"attack_budget", r.attack_budget},
          {"queries_used", r.queries_used},
          {"seed", r.seed},
          {"flips_found", flips},
          {"flip_found", flags}};
}

json to_json(const DesignEstimate& e) {
  json strata = json::array();
  for (const auto& s : e.per_stratum) {
    strata.push_back({{"stratum", s.stratum}, {"estimate", num(s.estimate)}, {"n", s.n}, {"weight", s.weight}});
  }
  return {{"estimate", num(e.estimate)},
          {"std_error", num(e.std_error)},
          {"weighting", std::string(to_string(e.weighting))},
          {"fpc_applied", e.fpc_applied},
          {"per_stratum", strata}};
}

json to_json(const SaddRecord& s) {
  return {{"context", s.context},
          {"technical", s.technical},
          {"sampling_text", s.sampling_text},
          {"sampling", {{"strategy", s.sampling.strategy}, {"parameters", s.sampling.parameters}}},
          {"version", s.version},
          {"content_hash", s.content_hash()}};
}

std::string canonical_dump(const json& doc) { return doc.dump(2) + "\n"; }

void seal_report(json& doc) {
  doc.erase("report_hash");
  doc["report_hash"] = sha256_hex(doc.dump());
}

bool report_hash_valid(const json& doc) {
  if (!doc.contains("report_hash")) return false;
  json copy = doc;
  copy.erase("report_hash");
  return doc["report_hash"] == sha256_hex(copy.dump());
}

std::string render_markdown(const json& doc) {
  std::ostringstream md;
  const std::string kind = doc.value("report_kind", "audit");
  md << "# Conformance report: " << doc.value("model_id", "") << "\n\n";
  md << "| | |\n|---|---|\n";
  md << "| Kind | " << kind << " |\n";
  md << "| Verdict | **" << doc.value("verdict", "") << "** |\n";
  if (doc.contains("gate")) md << "| Leakage gate | " << fmt(doc["gate"].value("leakage", json())) << " |\n";
  md << "| Schema | " << doc.value("schema_version", "") << " |\n";
  md << "| Report hash | `" << doc.value("report_hash", "") << "` |\n\n";

  if (doc.contains("warnings") && !doc["warnings"].empty()) {
    md << "## Warnings\n\n";
    for (const auto& w : doc["warnings"]) md << "- " << w.get<std::string>() << "\n";
    md << "\n";
  }

  if (doc.contains("sadd")) {
    const auto& s = doc["sadd"];
    md << "## Application domain (version " << fmt(s["version"]) << ")\n\n";
    md << "- Context: " << fmt(s["context"]) << "\n";
    md << "- Technical: " << fmt(s["technical"]) << "\n";
    md << "- Sampling: " << fmt(s["sampling_text"]) << " (" << fmt(s["sampling"]["strategy"]) << ")\n\n";
  }

  if (doc.contains("leakage")) {
    const auto& l = doc["leakage"];
    md << "## Data leakage\n\n";
    if (l.contains("checks")) {
      md << "| Check | Severity | Evidence | Description |\n|---|---|---|---|\n";
      for (const auto& c : l["checks"]) {
        md << "| " << fmt(c["check_id"]) << " | " << fmt(c["severity"]) << " | " << c["evidence"].size() << " | "
           << fmt(c["description"]) << " |\n";
      }
      md << "\n";
    }
    if (l.contains("status")) md << "Status: " << fmt(l["status"]) << "\n\n";
    if (l.contains("checklist")) {
      md << "Process checklist (not detectable from data):\n\n";
      for (const auto& c : l["checklist"]) md << "- [ ] " << c.get<std::string>() << "\n";
      md << "\n";
    }
  }

  const auto hypotheses_table = [&](const json& hs) {
    md << "| Id | Metric | Estimate | Threshold | Bound | p-value | alpha | Decision |\n|---|---|---|---|---|---|---|---|\n";
    for (const auto& h : hs) {
      const auto& t = h["test"];
      md << "| " << fmt(h["id"]) << " | " << fmt(h["metric"]) << " | " << fmt(h["estimate"]) << " | "
         << (t["direction"] == "at_least" ? ">= " : "<= ") << fmt(t["threshold"]) << " | " << fmt(t["conf_bound"])
         << " | " << fmt(t["p_value"]) << " | " << fmt(t["alpha_used"]) << " | " << fmt(t["decision"]) << " |\n";
    }
    md << "\n";
  };

  if (doc.contains("requirements")) {
    const auto& r = doc["requirements"];
    md << "## Requirements\n\n";
    if (r.contains("status")) {
      md << "Status: " << fmt(r["status"]) << " (" << fmt(r.value("reason", json(""))) << ")\n\n";
    } else {
      md << "Procedure: " << fmt(r["procedure"]) << ", family alpha " << fmt(r["family_alpha"]) << "\n\n";
      hypotheses_table(r["hypotheses"]);
    }
  }

  if (doc.contains("fairness") && doc["fairness"].contains("documentation")) {
    md << "## Fairness\n\n" << fmt(doc["fairness"]["documentation"]) << "\n\n";
  }

  if (doc.contains("recertification")) {
    const auto& r = doc["recertification"];
    md << "## Re-certification\n\n";
    for (const auto& [k, v] : r.items()) {
      if (k == "hypotheses") continue;
      md << "- " << k << ": " << fmt(v) << "\n";
    }
    md << "\n";
    if (r.contains("hypotheses")) hypotheses_table(r["hypotheses"]);
  }

  for (const char* section : {"drift", "uncertainty", "ood", "robustness", "monitoring"}) {
    if (!doc.contains(section) || doc[section].is_null()) continue;
    md << "## " << static_cast<char>(std::toupper(section[0])) << (section + 1) << "\n\n";
    for (const auto& [k, v] : doc[section].items()) {
      if (v.is_array() || v.is_object()) continue;
      md << "- " << k << ": " << fmt(v) << "\n";
    }
    md << "\n";
  }

  if (doc.contains("environment")) {
    md << "## Environment\n\n";
    const auto& e = doc["environment"];
    md << "- seed: " << fmt(e["seed"]) << "\n";
    md << "- tool: " << fmt(e["tool_version"]) << "\n";
    if (e.contains("datasets")) {
      for (const auto& [name, d] : e["datasets"].items()) {
        md << "- dataset " << name << ": " << fmt(d["path"]) << ", " << fmt(d["rows"]) << " rows, sha256 `"
           << fmt(d["content_hash"]) << "`\n";
      }
    }
  }
  return md.str();
}

}  // namespace certkit
