#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "certkit/core.hpp"

namespace certkit {

enum class SamplingStrategy { simple_random, stratified, cluster, multistage };
enum class Allocation { proportional, equal, explicit_counts };

/// How a stratified estimate is reported: re-weighted to population stratum
/// shares, or as the plain pooled metric of the sample.
enum class Weighting { population, sample };

std::string_view to_string(SamplingStrategy s) noexcept;
std::string_view to_string(Allocation a) noexcept;
std::string_view to_string(Weighting w) noexcept;
SamplingStrategy parse_sampling_strategy(std::string_view text);
Allocation parse_allocation(std::string_view text);
Weighting parse_weighting(std::string_view text);

struct SamplingDesign {
  SamplingStrategy strategy = SamplingStrategy::simple_random;
  /// Strata key (stratified) or cluster key (cluster, multistage): a feature
  /// column name, or "group" / "group_id" for those roles.
  std::string key;
  Allocation allocation = Allocation::proportional;
  std::map<std::string, std::size_t> explicit_counts;
  std::uint64_t seed = 0;
  bool with_replacement = false;
  /// Multistage only: number of clusters drawn in the first stage.
  std::size_t primary_units = 0;
  /// Population size N; enables the finite-population correction.
  std::optional<std::size_t> population_size;
};

/// Stratum (or cluster) label of every row under `key`. Feature values are
/// rendered in canonical decimal form.
std::vector<std::string> stratum_labels(const Dataset& data, const std::string& key);

/// Largest-remainder apportionment of `total` over `shares` (need not be
/// normalised). Ties in the remainder go to the earlier entry.
std::vector<std::size_t> largest_remainder(std::size_t total, const std::vector<double>& shares);

/// Draws `n` rows (without replacement unless the design says otherwise).
///
/// Stratified draws handle strata in lexicographic label order; stratum s
/// is sampled with Rng(derive_seed(seed, s)). Cluster designs take whole
/// clusters in seeded random order until at least `n` rows are collected.
/// Multistage designs draw `primary_units` clusters, apportion `n` over
/// them by size, and subsample each.
Dataset draw_sample(const Dataset& population, const SamplingDesign& design, std::size_t n);

struct StratumEstimate {
  std::string stratum;
  double estimate = 0.0;
  std::size_t n = 0;
  double weight = 0.0;
};

struct DesignEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  std::vector<StratumEstimate> per_stratum;
  Weighting weighting = Weighting::population;
  bool fpc_applied = false;
};

/// Fraction above which the finite-population correction is applied.
inline constexpr double kFpcThreshold = 0.05;

/// Design-based estimate of a metric with its standard error.
///
///   simple random:  plain metric, se = sqrt(s^2 / n * fpc)
///   stratified:     sum_s W_s m_s, se = sqrt(sum_s W_s^2 s_s^2 / n_s * fpc_s)
///   cluster/multi:  ratio estimator over sampled clusters (first-stage
///                   "ultimate cluster" variance)
///
/// Stratified designs with non-proportional allocation need population
/// weights; with proportional allocation the sample shares are used when
/// none are given.
DesignEstimate estimate_with_design(const Dataset& sample, const SamplingDesign& design,
                                    std::string_view metric_id,
                                    const std::optional<std::map<std::string, double>>& population_weights,
                                    Weighting weighting = Weighting::population);

/// Metric the `unknown` stratum must reach for the weighted overall
/// metric to equal `target`, given the other strata's metrics.
double required_stratum_metric(double target, const std::map<std::string, double>& known_metrics,
                               const std::map<std::string, double>& weights, const std::string& unknown);

}  // namespace certkit
