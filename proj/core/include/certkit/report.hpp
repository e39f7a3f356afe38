#pragma once

#include <string>

#include <json.hpp>

#include "certkit/drift.hpp"
#include "certkit/fairness.hpp"
#include "certkit/leakage.hpp"
#include "certkit/multiplicity.hpp"
#include "certkit/robustness.hpp"
#include "certkit/sampling.hpp"
#include "certkit/uncertainty.hpp"

namespace certkit {

inline constexpr const char* kReportSchemaVersion = "1.0";
inline constexpr const char* kToolVersion = "0.1.0";

nlohmann::json to_json(const TestResult& r);
nlohmann::json to_json(const MetricValue& m);
nlohmann::json to_json(const SequentialDecision& d);
nlohmann::json to_json(const LeakageReport& r);
nlohmann::json to_json(const ShiftVerdict& v);
nlohmann::json to_json(const QualityReport& q);
nlohmann::json to_json(const OodEvaluation& e);
nlohmann::json to_json(const RobustnessResult& r);
nlohmann::json to_json(const DesignEstimate& e);
nlohmann::json to_json(const SaddRecord& s);

/// Serialization used for hashing and for files: sorted keys, two-space
/// indent, trailing newline.
std::string canonical_dump(const nlohmann::json& doc);

/// Sets "report_hash" to the SHA-256 of the document without that field.
void seal_report(nlohmann::json& doc);
bool report_hash_valid(const nlohmann::json& doc);

/// Human-readable rendering derived from the JSON report.
std::string render_markdown(const nlohmann::json& doc);

}  // namespace certkit
