#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "certkit/config.hpp"
#include "certkit/ledger.hpp"

namespace certkit {

enum class Verdict { pass, fail, inconclusive };

std::string_view to_string(Verdict v) noexcept;

/// Exit codes for CI pipelines.
enum ExitCode : int { kExitPass = 0, kExitFail = 1, kExitInvalid = 2, kExitLedger = 3 };

int exit_code_for(const Error& e) noexcept;

struct AuditReport {
  nlohmann::json document;
  Verdict verdict = Verdict::fail;

  int exit_code() const noexcept { return verdict == Verdict::pass ? kExitPass : kExitFail; }
  std::string dump() const;
};

/// Leakage screens first (a violation fails the audit with no requirement
/// tested), then every MPR and fairness MPR under the declared multiplicity
/// procedure, then the non-gating sections. No wall-clock data enters the
/// report, so identical inputs give a byte-identical report.
AuditReport run_audit(const AuditConfig& config);

/// Tests the next slot of the re-certification family on fresh data and
/// appends one ledger entry. All performance MPRs are combined into one
/// intersection-union hypothesis (p = max p_i) at the slot's level.
/// Exhausted families yield an inconclusive report and no entry.
AuditReport recertify(const AuditConfig& config, const std::filesystem::path& ledger_path,
                      const Dataset& updated_model_data);
AuditReport recertify(const AuditConfig& config, const std::filesystem::path& ledger_path);

enum class MonitorVerdict { ok, shift_benign, shift_malignant, shift_unclassified };

std::string_view to_string(MonitorVerdict v) noexcept;

/// Shift test of a production window against the reference binding
/// ("reference", else "train"). A detected shift with a labelled point
/// check spends the next re-certification slot on classify_shift.
AuditReport monitor_step(const AuditConfig& config, const std::filesystem::path& ledger_path, const Dataset& window,
                         const std::optional<Dataset>& point_check);

/// Roles for an unlabelled window: the features (and scores) of `roles`.
ColumnRoles feature_only_roles(const ColumnRoles& roles);

}  // namespace certkit
