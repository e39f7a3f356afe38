#include "certkit/robustness.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <cstring>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <set>

#include <spdlog/spdlog.h>
#include <sys/wait.h>
#include <unistd.h>

#include "certkit/dataset_io.hpp"
#include "certkit/random.hpp"
#include "certkit/uncertainty.hpp"

namespace certkit {

std::string_view to_string(OodMethod m) noexcept {
  switch (m) {
    case OodMethod::density_histogram: return "density_histogram";
    case OodMethod::density_kde: return "density_kde";
    case OodMethod::distance_centroid: return "distance_centroid";
    case OodMethod::distance_knn: return "distance_knn";
    case OodMethod::max_softmax: return "max_softmax";
  }
  return "max_softmax";
}

OodMethod parse_ood_method(std::string_view text) {
  for (auto m : {OodMethod::density_histogram, OodMethod::density_kde, OodMethod::distance_centroid,
                 OodMethod::distance_knn, OodMethod::max_softmax}) {
    if (text == to_string(m)) return m;
  }
  throw Error(ErrorCode::MethodParamInvalid, "unknown OOD method '" + std::string(text) + "'");
}

namespace {

// Type-7 sample quantile of sorted data.
double quantile_sorted(const std::vector<double>& s, double q) {
  const double h = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

constexpr std::size_t kMaxHistogramBins = 4096;

Eigen::MatrixXd feature_matrix(const Dataset& data) {
  const std::size_t d = data.schema().features.size();
  Eigen::MatrixXd m(data.size(), d);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t j = 0; j < d; ++j) m(i, j) = data.row(i).features[j];
  }
  return m;
}

}  // namespace

OodScorer fit_ood_scorer(const Dataset& reference, OodMethod method, const OodParams& params) {
  if (reference.empty()) throw Error(ErrorCode::EmptyDataset, "OOD reference set is empty");
  OodScorer s;
  s.method_ = method;
  s.params_ = params;
  s.dims_ = reference.schema().features.size();
  s.fitted_rows_ = reference.size();
  const std::size_t n = reference.size();
  const std::size_t d = s.dims_;
  if (method != OodMethod::max_softmax && d == 0) {
    throw Error(ErrorCode::MethodParamInvalid, std::string(to_string(method)) + " needs at least one feature");
  }

  switch (method) {
    case OodMethod::density_histogram: {
      const double n_cbrt = std::cbrt(static_cast<double>(n));
      for (std::size_t j = 0; j < d; ++j) {
        auto col = reference.feature_column(j);
        std::sort(col.begin(), col.end());
        const double lo = col.front();
        const double range = col.back() - lo;
        const double fd_width = 2.0 * (quantile_sorted(col, 0.75) - quantile_sorted(col, 0.25)) / n_cbrt;
        std::size_t bins = 2;
        if (range > 0.0 && fd_width > 0.0) {
          bins = std::clamp<std::size_t>(static_cast<std::size_t>(std::ceil(range / fd_width)), 2, kMaxHistogramBins);
        }
        const double width = range > 0.0 ? range / static_cast<double>(bins) : 0.5;
        const double start = range > 0.0 ? lo : lo - 0.5;
        std::vector<double> counts(bins, 0.0);
        for (double v : col) {
          auto b = static_cast<std::size_t>(std::floor((v - start) / width));
          counts[std::min(b, bins - 1)] += 1.0;
        }
        s.bin_lo_.push_back(start);
        s.bin_width_.push_back(width);
        s.bin_count_.push_back(std::move(counts));
      }
      break;
    }
    case OodMethod::density_kde: {
      if (!(params.kde_bandwidth_scale > 0.0)) throw Error(ErrorCode::MethodParamInvalid, "kde bandwidth scale must be > 0");
      s.reference_ = feature_matrix(reference);
      const double factor = std::pow(static_cast<double>(n), -1.0 / (static_cast<double>(d) + 4.0));
      for (std::size_t j = 0; j < d; ++j) {
        const auto col = s.reference_.col(static_cast<Eigen::Index>(j));
        const double mean = col.mean();
        const double var = n > 1 ? (col.array() - mean).square().sum() / static_cast<double>(n - 1) : 0.0;
        const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
        s.bandwidth_.push_back(sd * factor * params.kde_bandwidth_scale);
      }
      break;
    }
    case OodMethod::distance_knn: {
      if (params.knn_k == 0 || params.knn_k > n) {
        throw Error(ErrorCode::MethodParamInvalid, "knn_k must lie in [1, reference size]");
      }
      s.reference_ = feature_matrix(reference);
      break;
    }
    case OodMethod::distance_centroid: {
      const Schema& schema = reference.schema();
      if (!schema.has_label) throw Error(ErrorCode::MissingColumn, "distance_centroid needs class labels");
      if (schema.task != TaskKind::classification) {
        throw Error(ErrorCode::MethodParamInvalid, "distance_centroid needs a classification task");
      }
      const Eigen::MatrixXd x = feature_matrix(reference);
      std::map<ClassIndex, std::vector<Eigen::Index>> by_class;
      for (std::size_t i = 0; i < n; ++i) {
        by_class[std::get<ClassIndex>(*reference.row(i).label)].push_back(static_cast<Eigen::Index>(i));
      }
      s.means_.resize(static_cast<Eigen::Index>(by_class.size()), static_cast<Eigen::Index>(d));
      Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
      Eigen::Index c = 0;
      for (const auto& [label, rows] : by_class) {
        Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(d));
        for (auto i : rows) mean += x.row(i);
        mean /= static_cast<double>(rows.size());
        s.means_.row(c++) = mean;
        for (auto i : rows) {
          const Eigen::RowVectorXd v = x.row(i) - mean;
          scatter.noalias() += v.transpose() * v;
        }
      }
      const auto dof = static_cast<double>(std::max<std::size_t>(1, n > by_class.size() ? n - by_class.size() : 1));
      Eigen::MatrixXd cov = scatter / dof;
      double lambda = 1e-6 * cov.trace() / static_cast<double>(d);
      if (!(lambda > 0.0)) lambda = 1e-6;
      const Eigen::MatrixXd identity = Eigen::MatrixXd::Identity(cov.rows(), cov.cols());
      for (int attempt = 0;; ++attempt) {
        s.chol_.compute(cov + lambda * identity);
        if (s.chol_.info() == Eigen::Success) break;
        if (attempt == 12) throw Error(ErrorCode::SingularCovariance, "pooled covariance could not be regularised");
        lambda *= 10.0;
        s.regularised = true;
      }
      if (s.regularised) {
        spdlog::warn("distance_centroid: singular pooled covariance, regularised with lambda = {}", lambda);
      }
      break;
    }
    case OodMethod::max_softmax: break;
  }
  return s;
}

double OodScorer::score_features(std::span<const double> x) const {
  if (x.size() != dims_) throw Error(ErrorCode::DimensionMismatch, "feature arity differs from the reference");
  switch (method_) {
    case OodMethod::density_histogram: {
      const double n = static_cast<double>(fitted_rows_);
      double score = 0.0;
      for (std::size_t j = 0; j < dims_; ++j) {
        const double w = bin_width_[j];
        const auto& counts = bin_count_[j];
        const double pos = (x[j] - bin_lo_[j]) / w;
        const double nb = static_cast<double>(counts.size());
        double c = 0.0;
        double outside = 0.0;
        if (pos < 0.0) {
          outside = -pos;
        } else if (pos > nb) {
          outside = pos - nb;
        } else {
          c = counts[std::min(static_cast<std::size_t>(pos), counts.size() - 1)];
        }
        score += -std::log(std::max(c, 0.5) / (n * w)) + outside;
      }
      return score;
    }
    case OodMethod::density_kde: {
      const Eigen::Index n = reference_.rows();
      double log_norm = std::log(static_cast<double>(n));
      for (double h : bandwidth_) log_norm += std::log(h * std::sqrt(2.0 * std::numbers::pi));
      std::vector<double> terms(static_cast<std::size_t>(n));
      double peak = -std::numeric_limits<double>::infinity();
      for (Eigen::Index i = 0; i < n; ++i) {
        double e = 0.0;
        for (std::size_t j = 0; j < dims_; ++j) {
          const double z = (x[j] - reference_(i, static_cast<Eigen::Index>(j))) / bandwidth_[j];
          e -= 0.5 * z * z;
        }
        terms[static_cast<std::size_t>(i)] = e;
        peak = std::max(peak, e);
      }
      double sum = 0.0;
      for (double e : terms) sum += std::exp(e - peak);
      return -(peak + std::log(sum) - log_norm);
    }
    case OodMethod::distance_knn: {
      const Eigen::Map<const Eigen::RowVectorXd> row(x.data(), static_cast<Eigen::Index>(dims_));
      std::vector<double> d2(static_cast<std::size_t>(reference_.rows()));
      for (Eigen::Index i = 0; i < reference_.rows(); ++i) {
        d2[static_cast<std::size_t>(i)] = (reference_.row(i) - row).squaredNorm();
      }
      const auto kth = d2.begin() + static_cast<std::ptrdiff_t>(params_.knn_k - 1);
      std::nth_element(d2.begin(), kth, d2.end());
      return std::sqrt(*kth);
    }
    case OodMethod::distance_centroid: {
      const Eigen::Map<const Eigen::RowVectorXd> row(x.data(), static_cast<Eigen::Index>(dims_));
      double best = std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < means_.rows(); ++c) {
        const Eigen::VectorXd v = (row - means_.row(c)).transpose();
        best = std::min(best, chol_.matrixL().solve(v).squaredNorm());
      }
      return std::sqrt(best);
    }
    case OodMethod::max_softmax: break;
  }
  return 0.0;
}

double OodScorer::score(const LabeledSample& sample) const {
  if (method_ != OodMethod::max_softmax) return score_features(sample.features);
  if (!sample.scores || sample.scores->empty()) throw Error(ErrorCode::MissingColumn, "max_softmax needs score vectors");
  return 1.0 - *std::max_element(sample.scores->begin(), sample.scores->end());
}

std::vector<double> OodScorer::score(const Dataset& data) const {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& r : data.rows()) out.push_back(score(r));
  return out;
}

double calibrate_threshold(std::span<const double> id_scores, double target_tpr) {
  if (id_scores.empty()) throw Error(ErrorCode::EmptyValidation, "no in-distribution validation scores");
  if (!(target_tpr > 0.0 && target_tpr <= 1.0)) throw Error(ErrorCode::InvalidArgument, "target_tpr must lie in (0, 1]");
  std::vector<double> s(id_scores.begin(), id_scores.end());
  const double n = static_cast<double>(s.size());
  // Guard against target_tpr * n landing a hair above an integer.
  auto k = static_cast<std::size_t>(std::ceil(target_tpr * n - 1e-9));
  k = std::clamp<std::size_t>(k, 1, s.size());
  std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(k - 1), s.end());
  return s[k - 1];
}

double calibrate_threshold(OodScorer& scorer, const Dataset& validation_id, double target_tpr) {
  if (validation_id.empty()) throw Error(ErrorCode::EmptyValidation, "validation set is empty");
  const double t = calibrate_threshold(scorer.score(validation_id), target_tpr);
  scorer.threshold = t;
  return t;
}

OodEvaluation evaluate_ood(std::span<const double> id_scores, std::span<const double> ood_scores,
                           std::optional<double> threshold) {
  if (id_scores.empty() || ood_scores.empty()) throw Error(ErrorCode::DegenerateScores, "ID and OOD sets must be nonempty");
  const std::size_t n = id_scores.size() + ood_scores.size();
  std::vector<double> all;
  all.reserve(n);
  all.insert(all.end(), id_scores.begin(), id_scores.end());
  all.insert(all.end(), ood_scores.begin(), ood_scores.end());
  if (!std::all_of(all.begin(), all.end(), [](double v) { return std::isfinite(v); })) {
    throw Error(ErrorCode::DegenerateScores, "non-finite OOD score");
  }
  auto is_ood = std::make_unique<bool[]>(n);
  for (std::size_t i = id_scores.size(); i < n; ++i) is_ood[i] = true;

  OodEvaluation ev;
  ev.n_id = id_scores.size();
  ev.n_ood = ood_scores.size();
  ev.auroc = auroc(all, std::span<const bool>(is_ood.get(), n));
  const double t95 = calibrate_threshold(id_scores, 0.95);
  const auto accepted = [](std::span<const double> s, double t) {
    return static_cast<double>(std::count_if(s.begin(), s.end(), [t](double v) { return v <= t; }));
  };
  ev.fpr_at_95tpr = accepted(ood_scores, t95) / static_cast<double>(ev.n_ood);
  ev.threshold = threshold.value_or(t95);
  const double correct = accepted(id_scores, ev.threshold) + static_cast<double>(ev.n_ood) -
                         accepted(ood_scores, ev.threshold);
  ev.detection_accuracy = correct / static_cast<double>(n);
  return ev;
}

OodEvaluation evaluate_ood(const OodScorer& scorer, const Dataset& id_test, const Dataset& ood_test) {
  return evaluate_ood(scorer.score(id_test), scorer.score(ood_test), scorer.threshold);
}

std::vector<OodScenario> describe_ood_scenarios(const nlohmann::json& scenarios, const std::filesystem::path& base_dir) {
  if (scenarios.is_null()) return {};
  if (!scenarios.is_array()) throw Error(ErrorCode::ConfigInvalid, "ood scenarios must be a list");
  std::vector<OodScenario> out;
  std::set<std::string> names;
  for (const auto& item : scenarios) {
    if (!item.is_object()) throw Error(ErrorCode::ConfigInvalid, "ood scenario must be an object");
    OodScenario sc;
    if (!item.contains("name") || !item["name"].is_string() || item["name"].get<std::string>().empty()) {
      throw Error(ErrorCode::ConfigInvalid, "ood scenario without a name");
    }
    sc.name = item["name"].get<std::string>();
    if (!names.insert(sc.name).second) throw Error(ErrorCode::ConfigInvalid, "duplicate ood scenario '" + sc.name + "'");
    if (!item.contains("dataset") || !item["dataset"].is_string() || item["dataset"].get<std::string>().empty()) {
      throw Error(ErrorCode::MissingScenarioData, "ood scenario '" + sc.name + "' has no dataset");
    }
    sc.dataset = item["dataset"].get<std::string>();
    if (sc.dataset.is_relative() && !base_dir.empty()) sc.dataset = base_dir / sc.dataset;
    if (item.contains("narrative")) sc.narrative = item["narrative"].get<std::string>();
    out.push_back(std::move(sc));
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Norm n) noexcept {
  switch (n) {
    case Norm::L1: return "L1";
    case Norm::L2: return "L2";
    case Norm::Linf: return "Linf";
  }
  return "Linf";
}

std::string_view to_string(Attack a) noexcept {
  switch (a) {
    case Attack::random_search: return "random_search";
    case Attack::coordinate_descent: return "coordinate_descent";
    case Attack::gradient_free_boundary: return "gradient_free_boundary";
  }
  return "coordinate_descent";
}

Norm parse_norm(std::string_view text) {
  if (text == "L1") return Norm::L1;
  if (text == "L2") return Norm::L2;
  if (text == "Linf") return Norm::Linf;
  throw Error(ErrorCode::ConfigInvalid, "unknown norm '" + std::string(text) + "'");
}

Attack parse_attack(std::string_view text) {
  for (auto a : {Attack::random_search, Attack::coordinate_descent, Attack::gradient_free_boundary}) {
    if (text == to_string(a)) return a;
  }
  throw Error(ErrorCode::ConfigInvalid, "unknown attack '" + std::string(text) + "'");
}

double norm_of(std::span<const double> v, Norm norm) {
  double acc = 0.0;
  for (double x : v) {
    switch (norm) {
      case Norm::L1: acc += std::abs(x); break;
      case Norm::L2: acc += x * x; break;
      case Norm::Linf: acc = std::max(acc, std::abs(x)); break;
    }
  }
  return norm == Norm::L2 ? std::sqrt(acc) : acc;
}

namespace {

std::optional<double> margin(const ModelOutput& out, ClassIndex c) {
  if (out.scores.size() < 2 || c < 0 || static_cast<std::size_t>(c) >= out.scores.size()) return std::nullopt;
  double other = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < out.scores.size(); ++k) {
    if (static_cast<ClassIndex>(k) != c) other = std::max(other, out.scores[k]);
  }
  return out.scores[static_cast<std::size_t>(c)] - other;
}

class Searcher {
 public:
  Searcher(const PredictFn& predict, std::span<const double> x, ClassIndex clean, const std::vector<bool>& mask,
           const RobustnessOptions& opt, std::uint64_t seed)
      : predict_(predict), x_(x.begin(), x.end()), clean_(clean), mask_(mask), opt_(opt), rng_(seed) {}

  bool run() {
    switch (opt_.attack) {
      case Attack::random_search: return random_points();
      case Attack::coordinate_descent: return coordinate();
      case Attack::gradient_free_boundary: return boundary();
    }
    return false;
  }

  std::size_t queries() const noexcept { return queries_; }

 private:
  bool exhausted() const noexcept { return queries_ >= opt_.budget; }

  ModelOutput query(const std::vector<double>& delta) {
    std::vector<double> z(x_);
    for (std::size_t j = 0; j < z.size(); ++j) z[j] += delta[j];
    ++queries_;
    return predict_(z);
  }

  bool flips(const std::vector<double>& delta) { return query(delta).label != clean_; }

  // Uniform random point on the surface of the radius-r ball.
  std::vector<double> surface_point(double r) {
    std::vector<double> v(x_.size(), 0.0);
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (!mask_[j]) continue;
      switch (opt_.norm) {
        case Norm::Linf: v[j] = rng_.bernoulli(0.5) ? 1.0 : -1.0; break;
        case Norm::L2: v[j] = rng_.normal(); break;
        case Norm::L1: v[j] = (rng_.bernoulli(0.5) ? 1.0 : -1.0) * -std::log(rng_.uniform_open()); break;
      }
    }
    const double len = norm_of(v, opt_.norm);
    if (len > 0.0) {
      for (double& e : v) e *= r / len;
    }
    return v;
  }

  bool random_points() {
    while (!exhausted()) {
      if (flips(surface_point(opt_.epsilon))) return true;
    }
    return false;
  }

  bool coordinate() {
    const std::size_t d = x_.size();
    const double eps = opt_.epsilon;
    std::vector<double> g(d, 0.0);
    bool have_gradient = true;
    std::vector<double> delta(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
      if (!mask_[j]) continue;
      if (queries_ + 2 > opt_.budget) {
        have_gradient = false;
        break;
      }
      delta[j] = eps;
      const ModelOutput up = query(delta);
      if (up.label != clean_) return true;
      delta[j] = -eps;
      const ModelOutput down = query(delta);
      if (down.label != clean_) return true;
      delta[j] = 0.0;
      const auto mu = margin(up, clean_);
      const auto md = margin(down, clean_);
      if (mu && md) g[j] = (*mu - *md) / (2.0 * eps);
      else have_gradient = false;
    }
    if (have_gradient && opt_.norm != Norm::L1 && !exhausted()) {
      // L1's extreme points are the axis probes already queried.
      const double gn = norm_of(g, Norm::L2);
      if (gn > 0.0) {
        for (std::size_t j = 0; j < d; ++j) {
          if (opt_.norm == Norm::Linf) delta[j] = g[j] > 0.0 ? -eps : (g[j] < 0.0 ? eps : 0.0);
          else delta[j] = -eps * g[j] / gn;
        }
        if (flips(delta)) return true;
      }
    }
    return random_points();
  }

  bool boundary() {
    const double eps = opt_.epsilon;
    const std::size_t per_radius = std::max<std::size_t>(1, opt_.budget / 8);
    std::vector<double> adv;
    for (double r = eps; r <= 8.0 * eps && adv.empty(); r *= 2.0) {
      for (std::size_t t = 0; t < per_radius && !exhausted(); ++t) {
        auto v = surface_point(r);
        if (flips(v)) {
          if (r == eps) return true;
          adv = std::move(v);
          break;
        }
      }
    }
    if (adv.empty()) return false;

    const auto scaled = [](const std::vector<double>& v, double s) {
      std::vector<double> out(v);
      for (double& e : out) e *= s;
      return out;
    };
    // Pull adv toward x along its ray while it stays adversarial.
    const auto bisect = [&](int steps) {
      double lo = 0.0;
      double hi = 1.0;
      for (int s = 0; s < steps && !exhausted(); ++s) {
        const double mid = 0.5 * (lo + hi);
        if (flips(scaled(adv, mid))) hi = mid;
        else lo = mid;
      }
      adv = scaled(adv, hi);
    };
    bisect(8);
    double step = 0.3;
    while (!exhausted()) {
      if (norm_of(adv, opt_.norm) <= eps) return true;
      const double len = norm_of(adv, Norm::L2);
      auto cand = adv;
      for (std::size_t j = 0; j < cand.size(); ++j) {
        if (mask_[j]) cand[j] = (cand[j] + step * len * rng_.normal() / std::sqrt(static_cast<double>(cand.size()))) * 0.9;
      }
      if (flips(cand)) {
        adv = std::move(cand);
        step = std::min(1.0, step * 1.1);
        if (norm_of(adv, opt_.norm) <= eps) return true;
        bisect(4);
      } else {
        step *= 0.9;
      }
    }
    return norm_of(adv, opt_.norm) <= eps;
  }

  const PredictFn& predict_;
  std::vector<double> x_;
  ClassIndex clean_;
  const std::vector<bool>& mask_;
  const RobustnessOptions& opt_;
  Rng rng_;
  std::size_t queries_ = 0;
};

}  // namespace

RobustnessResult robust_accuracy(const PredictFn& predict, const Dataset& dataset, const RobustnessOptions& options) {
  if (!(options.epsilon >= 0.0)) throw Error(ErrorCode::InvalidArgument, "epsilon must be >= 0");
  if (options.budget == 0) throw Error(ErrorCode::BudgetZero, "attack budget must be positive");
  const Schema& schema = dataset.schema();
  if (!schema.has_label || schema.task != TaskKind::classification) {
    throw Error(ErrorCode::MissingColumn, "robust_accuracy needs class labels");
  }
  if (dataset.empty()) throw Error(ErrorCode::EmptyDataset, "robust_accuracy on an empty dataset");

  std::vector<bool> mask;
  for (const auto& f : schema.features) mask.push_back(f.kind == FeatureKind::real);

  RobustnessResult res;
  res.epsilon = options.epsilon;
  res.norm = options.norm;
  res.attack = options.attack;
  res.attack_budget = options.budget;
  res.seed = options.seed;
  res.flip_found.assign(dataset.size(), false);
  std::size_t correct = 0;
  std::size_t robust = 0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto& row = dataset.row(i);
    const ClassIndex clean = predict(row.features).label;
    ++res.queries_used;
    const bool ok = clean == std::get<ClassIndex>(*row.label);
    correct += ok ? 1 : 0;
    if (options.epsilon > 0.0) {
      Searcher s(predict, row.features, clean, mask, options, derive_seed(options.seed, i));
      res.flip_found[i] = s.run();
      res.queries_used += s.queries();
    }
    robust += ok && !res.flip_found[i] ? 1 : 0;
  }
  const double n = static_cast<double>(dataset.size());
  res.clean_accuracy = static_cast<double>(correct) / n;
  res.robust_accuracy_lower_bound = static_cast<double>(robust) / n;
  return res;
}

// ---------------------------------------------------------------------------

PipeModel::PipeModel(std::vector<std::string> argv) {
  if (argv.empty()) throw Error(ErrorCode::ModelProcessError, "empty model command");
  int in_pipe[2];
  int out_pipe[2];
  if (pipe(in_pipe) != 0 || pipe(out_pipe) != 0) {
    throw Error(ErrorCode::ModelProcessError, std::string("pipe: ") + std::strerror(errno));
  }
  std::signal(SIGPIPE, SIG_IGN);
  const pid_t pid = fork();
  if (pid < 0) throw Error(ErrorCode::ModelProcessError, std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    dup2(in_pipe[0], STDIN_FILENO);
    dup2(out_pipe[1], STDOUT_FILENO);
    close(in_pipe[0]);
    close(in_pipe[1]);
    close(out_pipe[0]);
    close(out_pipe[1]);
    std::vector<char*> args;
    for (auto& a : argv) args.push_back(a.data());
    args.push_back(nullptr);
    execvp(args[0], args.data());
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  pid_ = pid;
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
}

PipeModel::~PipeModel() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    waitpid(pid_, &status, 0);
  }
}

ModelOutput PipeModel::operator()(std::span<const double> features) {
  std::string line;
  char buf[32];
  for (std::size_t j = 0; j < features.size(); ++j) {
    std::snprintf(buf, sizeof buf, "%.17g", features[j]);
    if (j > 0) line.push_back(',');
    line += buf;
  }
  line.push_back('\n');
  for (std::size_t off = 0; off < line.size();) {
    const ssize_t w = write(to_child_, line.data() + off, line.size() - off);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::ModelProcessError, std::string("write to model: ") + std::strerror(errno));
    }
    off += static_cast<std::size_t>(w);
  }
  std::size_t nl;
  while ((nl = buffer_.find('\n')) == std::string::npos) {
    char chunk[4096];
    const ssize_t r = read(from_child_, chunk, sizeof chunk);
    if (r < 0 && errno == EINTR) continue;
    if (r <= 0) throw Error(ErrorCode::ModelProcessError, "model process closed its output");
    buffer_.append(chunk, static_cast<std::size_t>(r));
  }
  std::string reply = buffer_.substr(0, nl);
  buffer_.erase(0, nl + 1);
  for (char& c : reply) {
    if (c == ',' || c == '\t' || c == '\r') c = ' ';
  }
  ModelOutput out;
  std::vector<std::string> tokens;
  for (std::size_t pos = 0; pos < reply.size();) {
    const std::size_t start = reply.find_first_not_of(' ', pos);
    if (start == std::string::npos) break;
    const std::size_t end = std::min(reply.find(' ', start), reply.size());
    tokens.push_back(reply.substr(start, end - start));
    pos = end;
  }
  if (tokens.empty()) throw Error(ErrorCode::ModelProcessError, "empty reply from model");
  try {
    const double label = parse_number(tokens[0], "model reply");
    if (label != std::floor(label)) throw Error(ErrorCode::ModelProcessError, "model reply is not a class index");
    out.label = static_cast<ClassIndex>(label);
    for (std::size_t t = 1; t < tokens.size(); ++t) out.scores.push_back(parse_number(tokens[t], "model reply"));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ModelProcessError) throw;
    throw Error(ErrorCode::ModelProcessError, e.what());
  }
  return out;
}

PredictFn PipeModel::as_function() {
  return [this](std::span<const double> x) { return (*this)(x); };
}

}  // namespace certkit
