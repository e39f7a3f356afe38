#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "certkit/core.hpp"

namespace certkit {

// ---------------------------------------------------------------------------
// OOD scoring

enum class OodMethod { density_histogram, density_kde, distance_centroid, distance_knn, max_softmax };

std::string_view to_string(OodMethod m) noexcept;
OodMethod parse_ood_method(std::string_view text);

struct OodParams {
  /// distance_knn: distance to the k-th nearest reference row.
  std::size_t knn_k = 5;
  /// density_kde: per-dimension bandwidth scale applied to Scott's rule.
  double kde_bandwidth_scale = 1.0;
};

/// Higher score = more out-of-distribution, for every method.
///
///   density_histogram  -sum_d log density_d(x_d), Freedman-Diaconis bins
///                      per dimension (at least 2); empty or out-of-range
///                      cells are floored at half a count, and out-of-range
///                      values add their distance in bin widths.
///   density_kde        -log of a product-Gaussian KDE, Scott bandwidths.
///   distance_centroid  min over classes of the Mahalanobis distance with
///                      the pooled within-class covariance + lambda I,
///                      lambda = 1e-6 trace / d.
///   distance_knn       Euclidean distance to the k-th nearest reference row.
///   max_softmax        1 - max class score (needs score vectors).
class OodScorer {
 public:
  OodMethod method() const noexcept { return method_; }
  const OodParams& params() const noexcept { return params_; }
  double score(const LabeledSample& sample) const;
  std::vector<double> score(const Dataset& data) const;

  std::optional<double> threshold;
  /// Set when the covariance needed more than the default regularisation.
  bool regularised = false;

 private:
  friend OodScorer fit_ood_scorer(const Dataset&, OodMethod, const OodParams&);

  double score_features(std::span<const double> x) const;

  OodMethod method_ = OodMethod::max_softmax;
  OodParams params_;
  std::size_t dims_ = 0;
  // histogram
  std::vector<double> bin_lo_, bin_width_;
  std::vector<std::vector<double>> bin_count_;
  // kde / knn
  Eigen::MatrixXd reference_;
  std::vector<double> bandwidth_;
  // centroid
  Eigen::MatrixXd means_;
  Eigen::LLT<Eigen::MatrixXd> chol_;
  std::size_t fitted_rows_ = 0;
};

OodScorer fit_ood_scorer(const Dataset& reference, OodMethod method, const OodParams& params = {});

inline constexpr double kDefaultTargetTpr = 0.95;

/// Order statistic s_(k) of the ID scores with k = ceil(target_tpr * n), so
/// at least target_tpr of them satisfy score <= threshold (accepted as ID).
double calibrate_threshold(std::span<const double> id_scores, double target_tpr = kDefaultTargetTpr);
double calibrate_threshold(OodScorer& scorer, const Dataset& validation_id, double target_tpr = kDefaultTargetTpr);

struct OodEvaluation {
  /// OOD is the positive class.
  double auroc = 0.0;
  /// Fraction of OOD rows accepted at the threshold that accepts 95% of ID.
  double fpr_at_95tpr = 0.0;
  /// (ID accepted + OOD rejected) / total at the scorer's threshold (or the
  /// 95% threshold when uncalibrated).
  double detection_accuracy = 0.0;
  double threshold = 0.0;
  std::size_t n_id = 0;
  std::size_t n_ood = 0;
};

OodEvaluation evaluate_ood(std::span<const double> id_scores, std::span<const double> ood_scores,
                           std::optional<double> threshold = std::nullopt);
OodEvaluation evaluate_ood(const OodScorer& scorer, const Dataset& id_test, const Dataset& ood_test);

struct OodScenario {
  std::string name;
  std::filesystem::path dataset;
  std::string narrative;
};

/// Parses [{"name", "dataset", "narrative"}, ...]; relative paths resolve
/// against base_dir. No dataset -> MissingScenarioData; repeated or empty
/// names -> ConfigInvalid.
std::vector<OodScenario> describe_ood_scenarios(const nlohmann::json& scenarios,
                                                const std::filesystem::path& base_dir = {});

// ---------------------------------------------------------------------------
// Adversarial robustness (query-based, black box)

struct ModelOutput {
  ClassIndex label = 0;
  /// Optional per-class confidences, higher = more confident. Any monotone
  /// scale works (logits, margins, probabilities).
  std::vector<double> scores;
};

using PredictFn = std::function<ModelOutput(std::span<const double>)>;

enum class Norm { L1, L2, Linf };
enum class Attack { random_search, coordinate_descent, gradient_free_boundary };

std::string_view to_string(Norm n) noexcept;
std::string_view to_string(Attack a) noexcept;
Norm parse_norm(std::string_view text);
Attack parse_attack(std::string_view text);

double norm_of(std::span<const double> v, Norm norm);

struct RobustnessOptions {
  double epsilon = 0.0;
  Norm norm = Norm::Linf;
  Attack attack = Attack::coordinate_descent;
  /// Model queries per sample, excluding the clean query.
  std::size_t budget = 100;
  std::uint64_t seed = 0;
};

/// `robust_accuracy_lower_bound` is the fraction of rows that are correctly
/// classified and for which the attack found no label flip. Because the
/// attack may miss flips this over-estimates true robust accuracy; the name
/// refers to the attack's guarantee, which only ever lowers it.
struct RobustnessResult {
  double epsilon = 0.0;
  Norm norm = Norm::Linf;
  Attack attack = Attack::coordinate_descent;
  double clean_accuracy = 0.0;
  double robust_accuracy_lower_bound = 0.0;
  std::size_t attack_budget = 0;
  std::size_t queries_used = 0;
  std::uint64_t seed = 0;
  /// Per row: a perturbation inside the ball changed the predicted label.
  std::vector<bool> flip_found;
};

/// Per-row search for a label flip within the epsilon-ball; row i uses
/// Rng(derive_seed(seed, i)).
///
///   coordinate_descent      2d axis probes at +-eps e_j give a finite-
///                           difference margin gradient g (label-only models
///                           fall back to the probes' labels); then the
///                           ball's extreme point against g is queried
///                           (-eps sign(g) for Linf, -eps g/|g| for L2, the
///                           largest |g_j| axis for L1). Exact for linear
///                           models in all three norms. Remaining budget is
///                           spent on random extreme points.
///   random_search           random points on the ball's surface.
///   gradient_free_boundary  label-only boundary walk: finds an adversarial
///                           point on a ray (radius doubling up to 8 eps),
///                           bisects to the boundary and walks along it
///                           toward the input until inside the ball.
RobustnessResult robust_accuracy(const PredictFn& predict, const Dataset& dataset, const RobustnessOptions& options);

/// The model as a child process. Protocol: one CSV feature row per line on
/// stdin; one line back per row holding the class index, optionally
/// followed by per-class scores (comma or whitespace separated).
class PipeModel {
 public:
  explicit PipeModel(std::vector<std::string> argv);
  ~PipeModel();
  PipeModel(const PipeModel&) = delete;
  PipeModel& operator=(const PipeModel&) = delete;

  ModelOutput operator()(std::span<const double> features);
  PredictFn as_function();

 private:
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

}  // namespace certkit
