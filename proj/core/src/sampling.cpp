#include "certkit/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "certkit/hash.hpp"
#include "certkit/random.hpp"

namespace certkit {

std::string_view to_string(SamplingStrategy s) noexcept {
  switch (s) {
    case SamplingStrategy::simple_random: return "simple_random";
    case SamplingStrategy::stratified: return "stratified";
    case SamplingStrategy::cluster: return "cluster";
    case SamplingStrategy::multistage: return "multistage";
  }
  return "simple_random";
}

std::string_view to_string(Allocation a) noexcept {
  switch (a) {
    case Allocation::proportional: return "proportional";
    case Allocation::equal: return "equal";
    case Allocation::explicit_counts: return "explicit";
  }
  return "proportional";
}

std::string_view to_string(Weighting w) noexcept {
  return w == Weighting::population ? "population" : "sample";
}

SamplingStrategy parse_sampling_strategy(std::string_view text) {
  if (text == "simple_random") return SamplingStrategy::simple_random;
  if (text == "stratified") return SamplingStrategy::stratified;
  if (text == "cluster") return SamplingStrategy::cluster;
  if (text == "multistage") return SamplingStrategy::multistage;
  throw Error(ErrorCode::ConfigInvalid, "unknown sampling strategy '" + std::string(text) + "'");
}

Allocation parse_allocation(std::string_view text) {
  if (text == "proportional") return Allocation::proportional;
  if (text == "equal") return Allocation::equal;
  if (text == "explicit") return Allocation::explicit_counts;
  throw Error(ErrorCode::ConfigInvalid, "unknown allocation '" + std::string(text) + "'");
}

Weighting parse_weighting(std::string_view text) {
  if (text == "population") return Weighting::population;
  if (text == "sample") return Weighting::sample;
  throw Error(ErrorCode::ConfigInvalid, "unknown weighting '" + std::string(text) + "'");
}

std::vector<std::string> stratum_labels(const Dataset& data, const std::string& key) {
  std::vector<std::string> labels;
  labels.reserve(data.size());
  if (const auto idx = data.schema().feature_index(key)) {
    for (const auto& r : data.rows()) labels.push_back(canonical_number(r.features[*idx]));
  } else if (key == "group" && data.schema().has_group) {
    for (const auto& r : data.rows()) labels.push_back(std::to_string(*r.group));
  } else if (key == "group_id" && data.schema().has_group_id) {
    for (const auto& r : data.rows()) labels.push_back(*r.group_id);
  } else {
    throw Error(ErrorCode::UnknownStrataKey, "'" + key + "' is neither a feature nor a declared group role");
  }
  return labels;
}

std::vector<std::size_t> largest_remainder(std::size_t total, const std::vector<double>& shares) {
  const double sum = std::accumulate(shares.begin(), shares.end(), 0.0);
  if (shares.empty() || !(sum > 0.0)) throw Error(ErrorCode::InvalidArgument, "shares must have positive sum");
  std::vector<std::size_t> out(shares.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < shares.size(); ++i) {
    const double quota = static_cast<double>(total) * shares[i] / sum;
    out[i] = static_cast<std::size_t>(std::floor(quota));
    assigned += out[i];
    remainders.emplace_back(quota - std::floor(quota), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t j = 0; assigned < total; ++j, ++assigned) out[remainders[j % remainders.size()].second] += 1;
  return out;
}

namespace {

/// Groups row indices by label, with groups in lexicographic label order.
std::map<std::string, std::vector<std::size_t>> group_rows(const std::vector<std::string>& labels) {
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(i);
  return groups;
}

/// Appends `count` draws from `pool` to `out`.
void draw_from(std::vector<std::size_t> pool, std::size_t count, bool with_replacement, Rng& rng,
               std::vector<std::size_t>& out) {
  if (with_replacement) {
    if (pool.empty() && count > 0) throw Error(ErrorCode::InsufficientStratum, "cannot draw from an empty stratum");
    for (std::size_t i = 0; i < count; ++i) out.push_back(pool[rng.uniform_index(pool.size())]);
    return;
  }
  if (count > pool.size()) {
    throw Error(ErrorCode::InsufficientStratum,
                "requested " + std::to_string(count) + " rows from a unit of " + std::to_string(pool.size()));
  }
  // Partial Fisher-Yates: the first `count` slots become the sample.
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t j = i + rng.uniform_index(pool.size() - i);
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
}

std::string provenance_of(const Dataset& population, const SamplingDesign& design, std::size_t n) {
  return "sample(" + std::string(to_string(design.strategy)) + ", n=" + std::to_string(n) +
         ", seed=" + std::to_string(design.seed) + ") of " + population.provenance();
}

}  // namespace

Dataset draw_sample(const Dataset& population, const SamplingDesign& design, std::size_t n) {
  std::vector<std::size_t> chosen;
  chosen.reserve(n);

  switch (design.strategy) {
    case SamplingStrategy::simple_random: {
      if (!design.with_replacement && n > population.size()) {
        throw Error(ErrorCode::InsufficientStratum, "sample size exceeds population size");
      }
      std::vector<std::size_t> all(population.size());
      std::iota(all.begin(), all.end(), 0);
      Rng rng(design.seed);
      draw_from(std::move(all), n, design.with_replacement, rng, chosen);
      break;
    }
    case SamplingStrategy::stratified: {
      const auto groups = group_rows(stratum_labels(population, design.key));
      std::vector<double> shares;
      std::vector<std::size_t> counts;
      if (design.allocation == Allocation::explicit_counts) {
        std::size_t total = 0;
        for (const auto& [label, rows] : groups) {
          const auto it = design.explicit_counts.find(label);
          counts.push_back(it == design.explicit_counts.end() ? 0 : it->second);
          total += counts.back();
        }
        for (const auto& [label, count] : design.explicit_counts) {
          if (!groups.contains(label)) {
            throw Error(ErrorCode::InsufficientStratum, "stratum '" + label + "' absent from population");
          }
        }
        if (total != n) throw Error(ErrorCode::InvalidArgument, "explicit allocation does not sum to n");
      } else {
        for (const auto& [label, rows] : groups) {
          shares.push_back(design.allocation == Allocation::equal ? 1.0 : static_cast<double>(rows.size()));
        }
        counts = largest_remainder(n, shares);
      }
      std::size_t s = 0;
      for (const auto& [label, rows] : groups) {
        Rng rng(derive_seed(design.seed, s));
        try {
          draw_from(rows, counts[s], design.with_replacement, rng, chosen);
        } catch (const Error&) {
          throw Error(ErrorCode::InsufficientStratum, "stratum '" + label + "' has " + std::to_string(rows.size()) +
                                                          " rows but was allocated " + std::to_string(counts[s]));
        }
        ++s;
      }
      break;
    }
    case SamplingStrategy::cluster: {
      if (n > population.size()) throw Error(ErrorCode::InsufficientStratum, "sample size exceeds population size");
      const auto groups = group_rows(stratum_labels(population, design.key));
      std::vector<const std::vector<std::size_t>*> clusters;
      for (const auto& [label, rows] : groups) clusters.push_back(&rows);
      Rng rng(design.seed);
      rng.shuffle(std::span(clusters));
      for (const auto* rows : clusters) {
        if (chosen.size() >= n) break;
        chosen.insert(chosen.end(), rows->begin(), rows->end());
      }
      break;
    }
    case SamplingStrategy::multistage: {
      const auto groups = group_rows(stratum_labels(population, design.key));
      if (design.primary_units == 0 || design.primary_units > groups.size()) {
        throw Error(ErrorCode::InvalidArgument, "primary_units must lie in [1, number of clusters]");
      }
      std::vector<const std::vector<std::size_t>*> clusters;
      for (const auto& [label, rows] : groups) clusters.push_back(&rows);
      Rng stage_one(design.seed);
      stage_one.shuffle(std::span(clusters));
      clusters.resize(design.primary_units);
      std::vector<double> sizes;
      for (const auto* rows : clusters) sizes.push_back(static_cast<double>(rows->size()));
      const auto counts = largest_remainder(n, sizes);
      for (std::size_t c = 0; c < clusters.size(); ++c) {
        Rng rng(derive_seed(design.seed, c + 1));
        draw_from(*clusters[c], counts[c], design.with_replacement, rng, chosen);
      }
      break;
    }
  }
  return population.subset(chosen, provenance_of(population, design, n));
}

namespace {

struct UnitSummary {
  double metric = 0.0;
  double variance = 0.0;  // sample variance of per-sample losses
  std::size_t n = 0;
};

UnitSummary summarize(const Dataset& part, std::string_view metric_id) {
  const MetricValue m = compute_metric(part, metric_id);
  UnitSummary s;
  s.n = m.per_sample_losses.size();
  s.metric = m.value;
  if (metric_id == "rmse") s.metric = m.value * m.value;  // aggregate on the mse scale
  if (s.n > 1) {
    const double mean = std::accumulate(m.per_sample_losses.begin(), m.per_sample_losses.end(), 0.0) /
                        static_cast<double>(s.n);
    double ss = 0.0;
    for (double v : m.per_sample_losses) ss += (v - mean) * (v - mean);
    s.variance = ss / static_cast<double>(s.n - 1);
  }
  return s;
}

/// Maps an mse-scale estimate back to rmse with a delta-method error.
void finish_scale(DesignEstimate& e, std::string_view metric_id) {
  if (metric_id != "rmse") return;
  const double root = std::sqrt(e.estimate);
  e.std_error = root > 0.0 ? e.std_error / (2.0 * root) : 0.0;
  e.estimate = root;
  for (auto& s : e.per_stratum) s.estimate = std::sqrt(s.estimate);
}

double fpc(std::size_t n, std::optional<double> population, bool& applied) {
  if (!population || *population <= 0.0) return 1.0;
  const double f = static_cast<double>(n) / *population;
  if (f <= kFpcThreshold) return 1.0;
  applied = true;
  return std::max(0.0, 1.0 - f);
}

}  // namespace

DesignEstimate estimate_with_design(const Dataset& sample, const SamplingDesign& design,
                                    std::string_view metric_id,
                                    const std::optional<std::map<std::string, double>>& population_weights,
                                    Weighting weighting) {
  lookup_metric(metric_id);
  if (sample.empty()) throw Error(ErrorCode::EmptyDataset, "sample has no rows");
  DesignEstimate out;
  out.weighting = weighting;

  const auto as_population = [&]() -> std::optional<double> {
    if (!design.population_size) return std::nullopt;
    return static_cast<double>(*design.population_size);
  };

  const bool plain = design.strategy == SamplingStrategy::simple_random ||
                     (design.strategy == SamplingStrategy::stratified && weighting == Weighting::sample);
  if (plain) {
    const UnitSummary s = summarize(sample, metric_id);
    out.estimate = s.metric;
    out.std_error = std::sqrt(s.variance / static_cast<double>(s.n) * fpc(s.n, as_population(), out.fpc_applied));
    finish_scale(out, metric_id);
    return out;
  }

  const auto groups = group_rows(stratum_labels(sample, design.key));

  if (design.strategy == SamplingStrategy::stratified) {
    std::map<std::string, double> weights;
    if (population_weights) {
      weights = *population_weights;
    } else if (design.allocation == Allocation::proportional) {
      for (const auto& [label, rows] : groups) {
        weights[label] = static_cast<double>(rows.size()) / static_cast<double>(sample.size());
      }
    } else {
      throw Error(ErrorCode::MissingWeights, "non-proportional stratified design needs population weights");
    }
    double total_weight = 0.0;
    for (const auto& [label, w] : weights) {
      if (w < 0.0) throw Error(ErrorCode::MissingWeights, "negative weight for stratum '" + label + "'");
      total_weight += w;
    }
    if (std::abs(total_weight - 1.0) > 1e-9) throw Error(ErrorCode::MissingWeights, "stratum weights must sum to 1");
    for (const auto& [label, rows] : groups) {
      if (!weights.contains(label)) throw Error(ErrorCode::MissingWeights, "no weight for stratum '" + label + "'");
    }

    double variance = 0.0;
    for (const auto& [label, w] : weights) {
      const auto it = groups.find(label);
      if (it == groups.end()) {
        if (w > 0.0) throw Error(ErrorCode::EmptyStratum, "stratum '" + label + "' has positive weight but no rows");
        continue;
      }
      UnitSummary s;
      try {
        s = summarize(sample.subset(it->second), metric_id);
      } catch (const Error& e) {
        if (e.code() == ErrorCode::EmptyDataset) {
          throw Error(ErrorCode::EmptyStratum, "stratum '" + label + "': " + e.what());
        }
        throw;
      }
      out.estimate += w * s.metric;
      std::optional<double> stratum_population;
      if (const auto N = as_population()) stratum_population = w * *N;
      variance += w * w * s.variance / static_cast<double>(s.n) * fpc(s.n, stratum_population, out.fpc_applied);
      out.per_stratum.push_back({label, s.metric, s.n, w});
    }
    out.std_error = std::sqrt(variance);
    finish_scale(out, metric_id);
    return out;
  }

  // Cluster / multistage: ratio estimator r = sum t_c / sum m_c.
  std::vector<double> totals;
  std::vector<double> sizes;
  for (const auto& [label, rows] : groups) {
    UnitSummary s;
    try {
      s = summarize(sample.subset(rows), metric_id);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::EmptyDataset) throw;
      continue;  // metric undefined on this cluster (e.g. no predicted positives)
    }
    totals.push_back(s.metric * static_cast<double>(s.n));
    sizes.push_back(static_cast<double>(s.n));
    out.per_stratum.push_back({label, s.metric, s.n, 0.0});
  }
  if (sizes.empty()) throw Error(ErrorCode::EmptyStratum, "no cluster supports the metric");
  const double sum_m = std::accumulate(sizes.begin(), sizes.end(), 0.0);
  const double ratio = std::accumulate(totals.begin(), totals.end(), 0.0) / sum_m;
  for (auto& s : out.per_stratum) s.weight = static_cast<double>(s.n) / sum_m;
  const std::size_t k = sizes.size();
  double ss = 0.0;
  for (std::size_t c = 0; c < k; ++c) ss += std::pow(totals[c] - ratio * sizes[c], 2);
  const double mean_size = sum_m / static_cast<double>(k);
  out.estimate = ratio;
  out.std_error = k > 1 ? std::sqrt(ss / (static_cast<double>(k) * static_cast<double>(k - 1))) / mean_size : 0.0;
  finish_scale(out, metric_id);
  return out;
}

double required_stratum_metric(double target, const std::map<std::string, double>& known_metrics,
                               const std::map<std::string, double>& weights, const std::string& unknown) {
  const auto wu = weights.find(unknown);
  if (wu == weights.end() || !(wu->second > 0.0)) {
    throw Error(ErrorCode::MissingWeights, "stratum '" + unknown + "' needs a positive weight");
  }
  double known = 0.0;
  for (const auto& [label, w] : weights) {
    if (label == unknown) continue;
    const auto it = known_metrics.find(label);
    if (it == known_metrics.end()) throw Error(ErrorCode::MissingWeights, "no metric for stratum '" + label + "'");
    known += w * it->second;
  }
  return (target - known) / wu->second;
}

}  // namespace certkit
