#include <cmath>
#include <set>

#include <gtest/gtest.h>

#include "certkit/sampling.hpp"
#include "fixtures.hpp"

namespace certkit {
namespace {

using testing::make_row;

// Feature f0 is the stratum colour (0 = blue, 1 = red), f1 a cluster id.
// The model is right on every blue row and wrong on every red row.
Dataset colour_population(std::size_t blue, std::size_t red, std::size_t clusters = 10) {
  std::vector<LabeledSample> rows;
  for (std::size_t i = 0; i < blue + red; ++i) {
    const bool is_red = i >= blue;
    const ClassIndex y = static_cast<ClassIndex>(i % 2);
    rows.push_back(make_row({is_red ? 1.0 : 0.0, static_cast<double>(i % clusters)}, y, is_red ? 1 - y : y));
  }
  return Dataset(testing::make_schema(2), std::move(rows), "colour population");
}

TEST(LargestRemainder, SumsAndTieBreak) {
  EXPECT_EQ(largest_remainder(10, {0.8, 0.2}), (std::vector<std::size_t>{8, 2}));
  EXPECT_EQ(largest_remainder(10, {1, 1, 1}), (std::vector<std::size_t>{4, 3, 3}));
  EXPECT_EQ(largest_remainder(7, {3, 1}), (std::vector<std::size_t>{5, 2}));
  EXPECT_CERTKIT_ERROR(largest_remainder(5, {0, 0}), ErrorCode::InvalidArgument);
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> shares(1 + rng.uniform_index(8));
    for (auto& s : shares) s = rng.uniform01() + 1e-3;
    const std::size_t total = rng.uniform_index(1000);
    const auto out = largest_remainder(total, shares);
    std::size_t sum = 0;
    for (auto v : out) sum += v;
    EXPECT_EQ(sum, total);
  }
}

TEST(DesignEstimate, ColourScenarioReweightsToPopulation) {
  // Equal allocation: 50 blue and 50 red rows in the sample.
  const auto sample = colour_population(50, 50);
  SamplingDesign design;
  design.strategy = SamplingStrategy::stratified;
  design.key = "f0";
  design.allocation = Allocation::equal;
  const std::map<std::string, double> weights{{"0", 0.8}, {"1", 0.2}};
  const auto e = estimate_with_design(sample, design, "accuracy", weights);
  EXPECT_EQ(e.estimate, 0.8);
  ASSERT_EQ(e.per_stratum.size(), 2u);
  EXPECT_EQ(e.per_stratum[0].estimate, 1.0);
  EXPECT_EQ(e.per_stratum[1].estimate, 0.0);

  const auto pooled = estimate_with_design(sample, design, "accuracy", weights, Weighting::sample);
  EXPECT_EQ(pooled.estimate, 0.5);
}

TEST(DesignEstimate, RequiredStratumMetric) {
  const double red = required_stratum_metric(0.8, {{"blue", 1.0}}, {{"blue", 0.5}, {"red", 0.5}}, "red");
  EXPECT_DOUBLE_EQ(red, 0.6);
  EXPECT_CERTKIT_ERROR(required_stratum_metric(0.8, {}, {{"blue", 0.5}, {"red", 0.5}}, "red"),
                       ErrorCode::MissingWeights);
  EXPECT_CERTKIT_ERROR(required_stratum_metric(0.8, {{"blue", 1.0}}, {{"blue", 1.0}}, "red"),
                       ErrorCode::MissingWeights);
}

TEST(DesignEstimate, StratifiedStandardErrorMatchesFormula) {
  Rng rng(4);
  std::vector<LabeledSample> rows;
  for (int i = 0; i < 90; ++i) {
    const double s = i < 60 ? 0.0 : 1.0;
    const ClassIndex y = 1;
    rows.push_back(make_row({s, 0.0}, y, rng.bernoulli(s == 0.0 ? 0.9 : 0.6) ? 1 : 0));
  }
  const Dataset sample(testing::make_schema(2), rows);
  SamplingDesign design;
  design.strategy = SamplingStrategy::stratified;
  design.key = "f0";
  const std::map<std::string, double> w{{"0", 0.7}, {"1", 0.3}};
  const auto e = estimate_with_design(sample, design, "accuracy", w);

  double est = 0.0, var = 0.0;
  for (const auto& [label, weight] : w) {
    std::vector<double> v;
    for (const auto& r : sample.rows()) {
      if ((r.features[0] == 0.0) == (label == "0")) v.push_back(r.label == r.prediction ? 1.0 : 0.0);
    }
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    est += weight * mean;
    var += weight * weight * ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size());
  }
  EXPECT_NEAR(e.estimate, est, 1e-14);
  EXPECT_NEAR(e.std_error, std::sqrt(var), 1e-14);
  EXPECT_FALSE(e.fpc_applied);

  design.population_size = 200;
  const auto corrected = estimate_with_design(sample, design, "accuracy", w);
  EXPECT_TRUE(corrected.fpc_applied);
  EXPECT_LT(corrected.std_error, e.std_error);
}

TEST(DesignEstimate, Errors) {
  const auto sample = colour_population(10, 10);
  SamplingDesign design;
  design.strategy = SamplingStrategy::stratified;
  design.key = "f0";
  design.allocation = Allocation::equal;
  EXPECT_CERTKIT_ERROR(estimate_with_design(sample, design, "accuracy", std::nullopt), ErrorCode::MissingWeights);
  EXPECT_CERTKIT_ERROR(estimate_with_design(sample, design, "accuracy", std::map<std::string, double>{{"0", 1.0}}),
                       ErrorCode::MissingWeights);
  EXPECT_CERTKIT_ERROR(
      estimate_with_design(sample, design, "accuracy", std::map<std::string, double>{{"0", 0.5}, {"1", 0.6}}),
      ErrorCode::MissingWeights);
  EXPECT_CERTKIT_ERROR(estimate_with_design(colour_population(10, 0), design, "accuracy",
                                            std::map<std::string, double>{{"0", 0.5}, {"1", 0.5}}),
                       ErrorCode::EmptyStratum);
  design.key = "nope";
  EXPECT_CERTKIT_ERROR(estimate_with_design(sample, design, "accuracy", std::map<std::string, double>{{"0", 1.0}}),
                       ErrorCode::UnknownStrataKey);
}

TEST(DrawSample, SimpleRandomIsDistinctAndSeeded) {
  const auto pop = colour_population(300, 100);
  SamplingDesign design;
  design.seed = 9;
  const auto a = draw_sample(pop, design, 120);
  const auto b = draw_sample(pop, design, 120);
  EXPECT_EQ(a.size(), 120u);
  EXPECT_EQ(a.content_hash(), b.content_hash());
  design.seed = 10;
  EXPECT_NE(draw_sample(pop, design, 120).content_hash(), a.content_hash());
  EXPECT_CERTKIT_ERROR(draw_sample(pop, design, 401), ErrorCode::InsufficientStratum);
  design.with_replacement = true;
  EXPECT_EQ(draw_sample(pop, design, 1000).size(), 1000u);
}

TEST(DrawSample, StratifiedAllocations) {
  const auto pop = colour_population(300, 100);
  SamplingDesign design;
  design.strategy = SamplingStrategy::stratified;
  design.key = "f0";
  const auto count_red = [](const Dataset& d) {
    std::size_t red = 0;
    for (const auto& r : d.rows()) red += r.features[0] == 1.0 ? 1 : 0;
    return red;
  };
  EXPECT_EQ(count_red(draw_sample(pop, design, 40)), 10u);
  design.allocation = Allocation::equal;
  EXPECT_EQ(count_red(draw_sample(pop, design, 40)), 20u);
  design.allocation = Allocation::explicit_counts;
  design.explicit_counts = {{"0", 5}, {"1", 35}};
  EXPECT_EQ(count_red(draw_sample(pop, design, 40)), 35u);
  EXPECT_CERTKIT_ERROR(draw_sample(pop, design, 41), ErrorCode::InvalidArgument);
  design.explicit_counts = {{"0", 5}, {"1", 101}};
  EXPECT_CERTKIT_ERROR(draw_sample(pop, design, 106), ErrorCode::InsufficientStratum);
}

TEST(DrawSample, ClusterTakesWholeClusters) {
  const auto pop = colour_population(200, 0, 20);  // 20 clusters of 10
  SamplingDesign design;
  design.strategy = SamplingStrategy::cluster;
  design.key = "f1";
  design.seed = 3;
  const auto s = draw_sample(pop, design, 35);
  EXPECT_EQ(s.size(), 40u);
  std::map<double, int> per_cluster;
  for (const auto& r : s.rows()) ++per_cluster[r.features[1]];
  EXPECT_EQ(per_cluster.size(), 4u);
  for (const auto& [c, k] : per_cluster) EXPECT_EQ(k, 10);

  const auto e = estimate_with_design(s, design, "accuracy", std::nullopt);
  EXPECT_DOUBLE_EQ(e.estimate, 1.0);
  EXPECT_DOUBLE_EQ(e.std_error, 0.0);
}

TEST(DrawSample, MultistageSubsamplesPrimaryUnits) {
  const auto pop = colour_population(200, 0, 20);
  SamplingDesign design;
  design.strategy = SamplingStrategy::multistage;
  design.key = "f1";
  design.primary_units = 5;
  design.seed = 8;
  const auto s = draw_sample(pop, design, 25);
  EXPECT_EQ(s.size(), 25u);
  std::set<double> clusters;
  for (const auto& r : s.rows()) clusters.insert(r.features[1]);
  EXPECT_EQ(clusters.size(), 5u);
  design.primary_units = 21;
  EXPECT_CERTKIT_ERROR(draw_sample(pop, design, 25), ErrorCode::InvalidArgument);
}

// Property: population-weighted stratified estimates are unbiased for the
// population metric under equal allocation.
TEST(DesignProperty, StratifiedEstimateUnbiased) {
  Rng rng(17);
  std::vector<LabeledSample> rows;
  for (int i = 0; i < 2000; ++i) {
    const bool red = i >= 1600;
    rows.push_back(make_row({red ? 1.0 : 0.0, 0.0}, 1, rng.bernoulli(red ? 0.55 : 0.95) ? 1 : 0));
  }
  const Dataset pop(testing::make_schema(2), rows);
  const double truth = compute_metric(pop, "accuracy").value;
  SamplingDesign design;
  design.strategy = SamplingStrategy::stratified;
  design.key = "f0";
  design.allocation = Allocation::equal;
  const std::map<std::string, double> w{{"0", 0.8}, {"1", 0.2}};
  double sum = 0.0, se_sum = 0.0;
  const int reps = 400;
  for (int r = 0; r < reps; ++r) {
    design.seed = static_cast<std::uint64_t>(r);
    const auto e = estimate_with_design(draw_sample(pop, design, 100), design, "accuracy", w);
    sum += e.estimate;
    se_sum += e.std_error;
  }
  const double mean_se = se_sum / reps;
  EXPECT_NEAR(sum / reps, truth, 4.0 * mean_se / std::sqrt(static_cast<double>(reps)));
}

}  // namespace
}  // namespace certkit
