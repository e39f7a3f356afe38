#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "certkit/fairness.hpp"
#include "certkit/random.hpp"
#include "fixtures.hpp"

namespace certkit {
namespace {

std::vector<OutcomeRecord> expand(const std::uint64_t c[2][2][2]) {
  std::vector<OutcomeRecord> r;
  for (int a = 0; a < 2; ++a)
    for (int y = 0; y < 2; ++y)
      for (int p = 0; p < 2; ++p)
        for (std::uint64_t k = 0; k < c[a][y][p]; ++k) r.push_back({a, y, p});
  return r;
}

TEST(Fairness, HandCountedTable) {
  // a=0: TN 40, FP 10, FN 5, TP 45   a=1: TN 30, FP 30, FN 20, TP 20
  const std::uint64_t c[2][2][2] = {{{40, 10}, {5, 45}}, {{30, 30}, {20, 20}}};
  const auto g = GroupedOutcomes::from_records(expand(c));
  EXPECT_EQ(g.group_size(0), 100u);
  EXPECT_EQ(g.cell_size(1, 0), 60u);
  EXPECT_DOUBLE_EQ(statistical_parity_diff(g), 50.0 / 100.0 - 55.0 / 100.0);
  EXPECT_DOUBLE_EQ(equalized_odds_diff(g, OddsMode::opportunity), std::abs(20.0 / 40.0 - 45.0 / 50.0));
  EXPECT_DOUBLE_EQ(equalized_odds_diff(g, OddsMode::odds),
                   std::max(std::abs(20.0 / 40.0 - 45.0 / 50.0), std::abs(30.0 / 60.0 - 10.0 / 50.0)));
  EXPECT_EQ(fairness_violation(g, FairnessMetric::statistical_parity), std::abs(50.0 / 100.0 - 55.0 / 100.0));
}

TEST(Fairness, PlantedTablesMatchCountFormulas) {
  Rng rng(61);
  for (int t = 0; t < 20; ++t) {
    std::uint64_t c[2][2][2];
    for (auto& a : c)
      for (auto& y : a)
        for (auto& p : y) p = 1 + rng.uniform_index(50);
    const auto g = GroupedOutcomes::from_records(expand(c));
    const auto pos = [&](int a) {
      return static_cast<double>(c[a][0][1] + c[a][1][1]) / static_cast<double>(c[a][0][0] + c[a][0][1] + c[a][1][0] + c[a][1][1]);
    };
    const auto rate = [&](int a, int y) {
      return static_cast<double>(c[a][y][1]) / static_cast<double>(c[a][y][0] + c[a][y][1]);
    };
    EXPECT_EQ(statistical_parity_diff(g), pos(1) - pos(0));
    const double tpr = std::abs(rate(1, 1) - rate(0, 1));
    const double fpr = std::abs(rate(1, 0) - rate(0, 0));
    EXPECT_EQ(equalized_odds_diff(g, OddsMode::opportunity), tpr);
    EXPECT_EQ(equalized_odds_diff(g, OddsMode::odds), std::max(tpr, fpr));
  }
}

TEST(Fairness, EmptyGroupsAndCells) {
  const std::uint64_t one_group[2][2][2] = {{{5, 5}, {5, 5}}, {{0, 0}, {0, 0}}};
  const auto g = GroupedOutcomes::from_records(expand(one_group));
  EXPECT_CERTKIT_ERROR(statistical_parity_diff(g), ErrorCode::EmptyGroup);
  const std::uint64_t no_pos[2][2][2] = {{{5, 5}, {5, 5}}, {{5, 5}, {0, 0}}};
  const auto h = GroupedOutcomes::from_records(expand(no_pos));
  EXPECT_NO_THROW(statistical_parity_diff(h));
  EXPECT_CERTKIT_ERROR(equalized_odds_diff(h, OddsMode::opportunity), ErrorCode::EmptyCell);
  const std::vector<OutcomeRecord> bad{{2, 0, 0}};
  EXPECT_CERTKIT_ERROR(GroupedOutcomes::from_records(bad), ErrorCode::InvalidArgument);
  EXPECT_CERTKIT_ERROR(parse_fairness_metric("calibration"), ErrorCode::ConfigInvalid);
}

TEST(Fairness, FromDatasetNeedsGroup) {
  const auto d = testing::correctness_dataset(10, 8);
  EXPECT_CERTKIT_ERROR(GroupedOutcomes::from_dataset(d), ErrorCode::MissingColumn);
  Schema s = d.schema();
  s.has_group = true;
  std::vector<LabeledSample> rows(d.rows().begin(), d.rows().end());
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].group = static_cast<int>(i % 2);
  const auto g = GroupedOutcomes::from_dataset(Dataset(s, rows));
  EXPECT_EQ(g.total(), 10u);
}

// O(n^2) dominance oracle.
std::vector<ModelPoint> pareto_oracle(const std::vector<ModelPoint>& pts) {
  std::vector<ModelPoint> out;
  for (const auto& p : pts) {
    bool dominated = false;
    for (const auto& q : pts) {
      if (q.performance >= p.performance && q.fairness_violation <= p.fairness_violation &&
          (q.performance > p.performance || q.fairness_violation < p.fairness_violation)) {
        dominated = true;
        break;
      }
    }
    if (!dominated) out.push_back(p);
  }
  std::sort(out.begin(), out.end(), [](const ModelPoint& a, const ModelPoint& b) {
    if (a.performance != b.performance) return a.performance > b.performance;
    if (a.fairness_violation != b.fairness_violation) return a.fairness_violation < b.fairness_violation;
    return a.model_id < b.model_id;
  });
  return out;
}

TEST(ParetoFront, MatchesDominanceOracle) {
  Rng rng(62);
  for (int t = 0; t < 1000; ++t) {
    std::vector<ModelPoint> pts(1 + rng.uniform_index(30));
    for (std::size_t i = 0; i < pts.size(); ++i) {
      // Coarse grid so that ties on either axis are common.
      pts[i] = {"m" + std::to_string(i), static_cast<double>(rng.uniform_index(8)) / 8.0,
                static_cast<double>(rng.uniform_index(8)) / 8.0};
    }
    const auto got = pareto_front(pts);
    const auto want = pareto_oracle(pts);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_EQ(got[i].model_id, want[i].model_id);
  }
  EXPECT_TRUE(pareto_front({}).empty());
}

GroupedOutcomes balanced(std::uint64_t per_cell, std::uint64_t shift) {
  GroupedOutcomes g;
  for (int a = 0; a < 2; ++a) {
    for (int y = 0; y < 2; ++y) {
      const std::uint64_t extra = a == 1 ? shift : 0;
      g.counts[a][y][y] = per_cell + (y == 1 ? 0 : extra);
      g.counts[a][y][1 - y] = per_cell / 4 + (y == 1 ? extra : 0);
    }
  }
  return g;
}

TEST(FairnessMprCheck, FairModelPassesUnfairFails) {
  const std::vector<FairnessMpr> mprs{{FairnessMetric::statistical_parity, 0.1},
                                      {FairnessMetric::equalized_odds, 0.1}};
  const auto fair = fairness_mpr_check(balanced(400, 0), mprs, 1000, 0.05, 3);
  ASSERT_EQ(fair.size(), 2u);
  for (const auto& c : fair) {
    EXPECT_EQ(c.test.decision, Decision::reject_H0) << to_string(c.metric);
    EXPECT_EQ(c.test.direction, Direction::at_most);
    EXPECT_LE(c.test.conf_bound, 0.1);
    EXPECT_EQ(*c.test.resamples, 1000u);
  }
  const auto unfair = fairness_mpr_check(balanced(400, 300), mprs, 1000, 0.05, 3);
  for (const auto& c : unfair) EXPECT_EQ(c.test.decision, Decision::fail_to_reject) << to_string(c.metric);
  EXPECT_GT(unfair[1].violation, 0.1);
}

TEST(FairnessMprCheck, DeterministicAndEmptyCellsCountForNull) {
  const std::vector<FairnessMpr> odds{{FairnessMetric::equal_opportunity, 0.5}};
  // One positive in group 1: many replicates draw no positive at all.
  GroupedOutcomes g;
  g.counts[0][0][0] = 50;
  g.counts[0][1][1] = 50;
  g.counts[1][0][0] = 99;
  g.counts[1][1][1] = 1;
  const auto a = fairness_mpr_check(g, odds, 1000, 0.05, 9);
  const auto b = fairness_mpr_check(g, odds, 1000, 0.05, 9);
  EXPECT_EQ(a[0].test.p_value, b[0].test.p_value);
  // P(no positive drawn in 100 draws) = 0.99^100 ~ 0.366.
  EXPECT_GT(a[0].test.p_value, 0.25);
  EXPECT_EQ(a[0].test.decision, Decision::fail_to_reject);
  EXPECT_CERTKIT_ERROR(fairness_mpr_check(g, odds, 999, 0.05, 9), ErrorCode::InvalidResampleCount);
}

TEST(FairnessMprCheck, IncompatibilityFlag) {
  const std::vector<FairnessMpr> parity{{FairnessMetric::statistical_parity, 0.1}};
  const std::vector<FairnessMpr> both{{FairnessMetric::statistical_parity, 0.1}, {FairnessMetric::equalized_odds, 0.1}};
  const std::vector<FairnessMpr> odds{{FairnessMetric::equal_opportunity, 0.1}, {FairnessMetric::equalized_odds, 0.1}};
  EXPECT_FALSE(has_incompatible_fairness_mprs(parity));
  EXPECT_TRUE(has_incompatible_fairness_mprs(both));
  EXPECT_FALSE(has_incompatible_fairness_mprs(odds));
}

}  // namespace
}  // namespace certkit
