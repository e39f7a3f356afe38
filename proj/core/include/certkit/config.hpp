#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "certkit/dataset_io.hpp"
#include "certkit/drift.hpp"
#include "certkit/fairness.hpp"
#include "certkit/leakage.hpp"
#include "certkit/multiplicity.hpp"
#include "certkit/robustness.hpp"
#include "certkit/uncertainty.hpp"

namespace certkit {

inline constexpr int kConfigSchemaVersion = 1;

struct DatasetBinding {
  /// As written in the config (echoed verbatim into reports).
  std::string path;
  /// Resolved against the config file's directory.
  std::filesystem::path resolved;
  ColumnRoles roles;
};

struct FamilyConfig {
  double alpha = 0.05;
  Procedure procedure = Procedure::fallback;
};

struct FairnessMprConfig {
  std::string id;
  FairnessMpr mpr;
  double alpha_share = 0.0;
};

struct FairnessConfig {
  std::vector<FairnessMprConfig> mprs;
  std::size_t bootstrap_resamples = 2000;
};

/// Family for sequential re-certification of model updates. Separate from
/// the within-audit family; its weights are frozen by the first ledger entry.
struct RecertificationConfig {
  double alpha = 0.05;
  std::vector<double> weights;
};

struct LeakageConfig {
  bool enabled = true;
  DuplicateKey duplicate_key = DuplicateKey::exact_features;
  bool group = false;
  bool temporal = false;
  bool target_proxy = true;
  double proxy_auc_threshold = kProxyAucThreshold;
  double holdout_fraction = 0.5;
};

struct DriftConfig {
  bool enabled = true;
  ShiftMethod method = ShiftMethod::mmd_permutation;
  double alpha = 0.05;
  std::size_t permutations = 1000;
  /// Most recent rows of a monitoring window to test; 0 = all.
  std::size_t window_size = 0;
  std::string encoder_id = "identity";
};

struct UncertaintyConfig {
  std::optional<std::string> ensemble;
  std::optional<std::filesystem::path> ensemble_resolved;
  UncertaintyThresholds thresholds;
  QualityTask task = QualityTask::misclassification_detection;
  UncertaintyComponent component = UncertaintyComponent::total;
};

struct OodConfig {
  OodMethod method = OodMethod::distance_centroid;
  OodParams params;
  double target_tpr = kDefaultTargetTpr;
  std::vector<OodScenario> scenarios;
  std::vector<std::string> scenario_paths;
};

struct RobustnessConfig {
  std::vector<std::string> model_command;
  RobustnessOptions options;
};

struct AuditConfig {
  std::filesystem::path base_dir;
  std::uint64_t seed = 0;
  std::string model_id;
  SaddRecord sadd;
  ColumnRoles columns;
  /// train, test, reference, validation and any other named bindings.
  std::map<std::string, DatasetBinding> datasets;
  FamilyConfig family;
  std::vector<MprSpec> mprs;
  FairnessConfig fairness;
  RecertificationConfig recertification;
  LeakageConfig leakage;
  DriftConfig drift;
  std::optional<UncertaintyConfig> uncertainty;
  std::optional<OodConfig> ood;
  std::optional<RobustnessConfig> robustness;
  /// Notes produced while filling defaults.
  std::vector<std::string> warnings;

  bool has_dataset(const std::string& name) const { return datasets.count(name) != 0; }
  const DatasetBinding& dataset(const std::string& name) const;
  Dataset load(const std::string& name) const;

  /// Effective configuration with every default spelled out.
  nlohmann::json echo() const;
};

ColumnRoles parse_column_roles(const nlohmann::json& j);
nlohmann::json column_roles_json(const ColumnRoles& roles);

/// Throws ConfigInvalid on any schema or consistency problem.
AuditConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
AuditConfig load_config(const std::filesystem::path& path);

}  // namespace certkit
