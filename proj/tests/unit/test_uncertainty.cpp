#include <cmath>
#include <memory>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "certkit/random.hpp"
#include "certkit/uncertainty.hpp"
#include "fixtures.hpp"

namespace certkit {
namespace {

constexpr double kLn2 = std::numbers::ln2;

EnsemblePrediction random_ensemble(Rng& rng, std::size_t k, std::size_t c, bool weighted) {
  EnsemblePrediction e;
  for (std::size_t m = 0; m < k; ++m) {
    std::vector<double> row(c);
    double s = 0.0;
    for (auto& v : row) s += (v = -std::log(rng.uniform_open()));
    for (auto& v : row) v /= s;
    e.members.push_back(row);
  }
  if (weighted) {
    double s = 0.0;
    e.weights.resize(k);
    for (auto& w : e.weights) s += (w = rng.uniform_open());
    for (auto& w : e.weights) w /= s;
  }
  return e;
}

TEST(Entropy, Basics) {
  EXPECT_DOUBLE_EQ(entropy(std::vector<double>{0.5, 0.5}), kLn2);
  EXPECT_DOUBLE_EQ(entropy(std::vector<double>{1.0, 0.0}), 0.0);
  EXPECT_NEAR(entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}), 2.0 * kLn2, 1e-15);
  EXPECT_DOUBLE_EQ(to_bits(kLn2), 1.0);
}

TEST(Decompose, TrivialCases) {
  const auto same = decompose({{{0.5, 0.5}, {0.5, 0.5}}, {}});
  EXPECT_NEAR(same.total, kLn2, 1e-12);
  EXPECT_NEAR(same.aleatoric, kLn2, 1e-12);
  EXPECT_NEAR(same.epistemic, 0.0, 1e-12);
  const auto split = decompose({{{1.0, 0.0}, {0.0, 1.0}}, {}});
  EXPECT_NEAR(split.total, kLn2, 1e-12);
  EXPECT_NEAR(split.aleatoric, 0.0, 1e-12);
  EXPECT_NEAR(split.epistemic, kLn2, 1e-12);
}

TEST(DecomposeProperty, IdentityAndKlFormAgree) {
  Rng rng(51);
  for (int t = 0; t < 2000; ++t) {
    const auto e = random_ensemble(rng, 1 + rng.uniform_index(8), 2 + rng.uniform_index(6), t % 2 == 0);
    const auto d = decompose(e);
    EXPECT_NEAR(d.total, d.aleatoric + d.epistemic, 1e-10);
    EXPECT_GE(d.epistemic, -1e-12);
    EXPECT_LE(d.total, std::log(static_cast<double>(e.num_classes())) + 1e-12);
    EXPECT_NEAR(d.epistemic, epistemic_kl_form(e), 1e-10);
  }
}

TEST(Decompose, WeightsMatter) {
  EnsemblePrediction e{{{1.0, 0.0}, {0.0, 1.0}}, {0.9, 0.1}};
  const auto p = e.predictive();
  EXPECT_DOUBLE_EQ(p[0], 0.9);
  const auto d = decompose(e);
  EXPECT_NEAR(d.total, entropy(p), 1e-15);
}

TEST(Ensemble, Validation) {
  EXPECT_CERTKIT_ERROR(decompose({{}, {}}), ErrorCode::InvalidSimplexRow);
  EXPECT_CERTKIT_ERROR(decompose({{{0.5, 0.6}}, {}}), ErrorCode::InvalidSimplexRow);
  EXPECT_CERTKIT_ERROR(decompose({{{0.5, 0.5}, {1.0}}, {}}), ErrorCode::InvalidSimplexRow);
  EXPECT_CERTKIT_ERROR(decompose({{{1.5, -0.5}}, {}}), ErrorCode::InvalidSimplexRow);
  EXPECT_CERTKIT_ERROR(decompose({{{0.5, 0.5}}, {0.5, 0.5}}), ErrorCode::InvalidSimplexRow);
}

TEST(Fallback, AbstainsOnlyAboveThreshold) {
  const EnsemblePrediction split{{{1.0, 0.0}, {0.0, 1.0}}, {}};
  UncertaintyThresholds t;
  EXPECT_EQ(uncertainty_fallback(split, t), FallbackAction::accept);
  t.epistemic = kLn2;
  EXPECT_EQ(uncertainty_fallback(split, t), FallbackAction::accept);  // equal is not above
  t.epistemic = 0.5;
  EXPECT_EQ(uncertainty_fallback(split, t), FallbackAction::abstain);
  t.epistemic.reset();
  t.aleatoric = 0.1;
  EXPECT_EQ(uncertainty_fallback(split, t), FallbackAction::accept);
  t.total = -1.0;
  EXPECT_CERTKIT_ERROR(uncertainty_fallback(split, t), ErrorCode::InvalidArgument);
}

// Pairwise definition: P(score_pos > score_neg) + 0.5 P(equal).
double auroc_oracle(const std::vector<double>& s, const std::vector<bool>& pos) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (!pos[i] || pos[j]) continue;
      pairs += 1.0;
      wins += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return wins / pairs;
}

TEST(Auroc, MatchesPairwiseOracleWithTies) {
  Rng rng(52);
  for (int t = 0; t < 300; ++t) {
    const std::size_t n = 4 + rng.uniform_index(60);
    std::vector<double> s(n);
    std::vector<bool> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
      pos[i] = i < 2 ? true : (i < 4 ? false : rng.bernoulli(0.4));
      s[i] = t % 2 ? std::round(rng.uniform(0, 5)) : rng.normal() + (pos[i] ? 0.7 : 0.0);
    }
    std::unique_ptr<bool[]> buf(new bool[n]);
    for (std::size_t i = 0; i < n; ++i) buf[i] = pos[i];
    EXPECT_NEAR(auroc(s, std::span<const bool>(buf.get(), n)), auroc_oracle(s, pos), 1e-12);
  }
}

TEST(AurocProperty, InvariantUnderMonotoneTransform) {
  Rng rng(53);
  std::vector<double> s(200);
  std::unique_ptr<bool[]> pos(new bool[200]);
  for (std::size_t i = 0; i < 200; ++i) {
    pos[i] = i % 3 == 0;
    s[i] = rng.normal() + (pos[i] ? 1.0 : 0.0);
  }
  std::vector<double> t(200);
  for (std::size_t i = 0; i < 200; ++i) t[i] = std::exp(3.0 * s[i]) + 7.0;
  const std::span<const bool> flags(pos.get(), 200);
  EXPECT_DOUBLE_EQ(auroc(s, flags), auroc(t, flags));
}

TEST(Quality, SelectivePredictionCurve) {
  std::vector<UncertaintyDecomposition> d;
  for (double u : {0.1, 0.2, 0.3, 0.4}) d.push_back({u, u, 0.0});
  const bool flags[] = {false, false, true, true};
  const auto q = evaluate_uncertainty_quality(d, flags, QualityTask::selective_prediction);
  ASSERT_EQ(q.risk_coverage.size(), 4u);
  EXPECT_DOUBLE_EQ(q.risk_coverage[1].risk, 0.0);
  EXPECT_DOUBLE_EQ(q.risk_coverage[2].risk, 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(q.risk_coverage[3].risk, 0.5);
  EXPECT_DOUBLE_EQ(q.auroc, 1.0);
  // Trapezoid: 0.25*0 + 0.25*0 + 0.25*(1/6) + 0.25*(5/12)
  EXPECT_NEAR(q.aurc, 0.25 * (1.0 / 6.0) + 0.25 * (0.5 * (1.0 / 3.0 + 0.5)), 1e-15);
}

TEST(Quality, DegenerateFlags) {
  std::vector<UncertaintyDecomposition> d(3);
  const bool one[] = {true, false, false};
  EXPECT_CERTKIT_ERROR(evaluate_uncertainty_quality(d, one, QualityTask::misclassification_detection),
                       ErrorCode::DegenerateFlags);
  const bool two[] = {true, false};
  EXPECT_CERTKIT_ERROR(evaluate_uncertainty_quality(d, two, QualityTask::ood_detection), ErrorCode::DegenerateFlags);
}

TEST(EnsembleJsonl, ParsesAndValidates) {
  std::stringstream ok(R"({"members": [[0.2, 0.8], [0.4, 0.6]], "label": 1}
{"members": [[1, 0]], "ood": true, "weights": [1]}
)");
  const auto recs = read_ensemble_jsonl(ok);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(*recs[0].label, 1);
  EXPECT_TRUE(*recs[1].ood);
  std::stringstream bad("{\"members\": [[0.2, 0.9]]}\n");
  EXPECT_CERTKIT_ERROR(read_ensemble_jsonl(bad), ErrorCode::InvalidSimplexRow);
  std::stringstream junk("{members}\n");
  EXPECT_CERTKIT_ERROR(read_ensemble_jsonl(junk), ErrorCode::ParseError);
}

}  // namespace
}  // namespace certkit
