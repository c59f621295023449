#include "earlyrisk/metrics.hpp"

#include <cmath>
#include <random>
#include <tuple>

#include <gtest/gtest.h>

#include "earlyrisk/errors.hpp"

namespace earlyrisk {
namespace {

using Row = std::tuple<std::string, int, int, int>;  // user, gold, decision, delay

struct Fixture {
  std::vector<FinalDecision> decisions;
  GoldLabels gold;
};

Fixture make(const std::vector<Row>& rows) {
  Fixture f;
  for (const auto& [user, gold, decision, delay] : rows) {
    f.decisions.push_back({user, decision, delay});
    f.gold[user] = gold;
  }
  return f;
}

// Same rows as tests/oracles/oracles.py.
Fixture twelve_users() {
  return make({{"m01", 1, 1, 1}, {"m02", 1, 1, 3},  {"m03", 1, 1, 7},  {"m04", 1, 1, 30},
               {"m05", 1, 1, 55}, {"m06", 1, 0, 50}, {"m07", 0, 1, 4},  {"m08", 0, 1, 12},
               {"m09", 0, 0, 20}, {"m10", 0, 0, 33}, {"m11", 0, 0, 50}, {"m12", 0, 0, 9}});
}

TEST(Classification, TwelveUserFixture) {
  const auto f = twelve_users();
  const auto r = classification_report(f.decisions, f.gold);
  EXPECT_EQ(r.confusion, (ConfusionCounts{5, 2, 1, 4}));
  EXPECT_NEAR(r.accuracy, 3.0 / 4.0, 1e-15);
  EXPECT_NEAR(r.macro_p, 53.0 / 70.0, 1e-15);
  EXPECT_NEAR(r.macro_r, 3.0 / 4.0, 1e-15);
  EXPECT_NEAR(r.macro_f1, 107.0 / 143.0, 1e-15);
  EXPECT_NEAR(r.f1_positive, 10.0 / 13.0, 1e-15);
  EXPECT_NEAR(r.positive.precision, 5.0 / 7.0, 1e-15);
  EXPECT_NEAR(r.negative.recall, 4.0 / 6.0, 1e-15);
}

TEST(Classification, NeverPredictedClassScoresZero) {
  const auto f = make({{"a", 1, 0, 3}, {"b", 0, 0, 3}});
  const auto r = classification_report(f.decisions, f.gold);
  EXPECT_EQ(r.positive.precision, 0.0);
  EXPECT_EQ(r.positive.f1, 0.0);
  EXPECT_NEAR(r.negative.f1, 2.0 / 3.0, 1e-15);
}

TEST(Erde, TwelveUserFixture) {
  const auto f = twelve_users();
  EXPECT_NEAR(erde(f.decisions, f.gold, 5, 0.5), 0.41816551749568359, 1e-12);
  EXPECT_NEAR(erde(f.decisions, f.gold, 30, 0.5), 0.29166666667423874, 1e-12);
  EXPECT_NEAR(erde(f.decisions, f.gold, 50, 0.5), 0.24944226259473909, 1e-12);
  // Prevalence is 1/2 here, so the default agrees.
  EXPECT_NEAR(erde(f.decisions, f.gold, 30), 0.29166666667423874, 1e-12);
}

TEST(Erde, ExplicitFalsePositiveCost) {
  const auto f = make({{"t1", 1, 1, 3}, {"t2", 1, 1, 40}, {"fp", 0, 1, 6}, {"fn", 1, 0, 20},
                       {"n1", 0, 0, 20}, {"n2", 0, 0, 20}});
  EXPECT_NEAR(erde(f.decisions, f.gold, 30, 2.0 / 6.0), 0.38888132257775171, 1e-12);
  EXPECT_THROW(erde(f.decisions, f.gold, 30, 0.0), PreconditionError);
  EXPECT_THROW(erde(f.decisions, f.gold, 30, 1.5), PreconditionError);
}

TEST(Erde, PerDecisionCosts) {
  EXPECT_EQ(erde_cost(0, 0, 10, 5, 0.3), 0.0);
  EXPECT_EQ(erde_cost(1, 0, 10, 5, 0.3), 0.3);
  EXPECT_EQ(erde_cost(0, 1, 10, 5, 0.3), 1.0);
  EXPECT_NEAR(erde_cost(1, 1, 5, 5, 0.3), 0.5, 1e-15);
  EXPECT_NEAR(erde_cost(1, 1, 8, 5, 0.3), 1.0 - 1.0 / (1.0 + std::exp(3.0)), 1e-15);
}

TEST(Latency, TwelveUserFixture) {
  const auto f = twelve_users();
  const auto l = latency_weighted_f1(f.decisions, f.gold);
  ASSERT_TRUE(l.latency_tp && l.speed);
  EXPECT_EQ(*l.latency_tp, 7.0);
  EXPECT_NEAR(*l.speed, 0.97660427003276284, 1e-12);
  EXPECT_NEAR(l.latency_weighted_f1, 0.75123405387135611, 1e-12);
}

TEST(Latency, EvenNumberOfTruePositivesInterpolates) {
  const auto f = make({{"a", 1, 1, 2}, {"b", 1, 1, 8}, {"c", 1, 0, 10}, {"d", 0, 1, 5},
                       {"e", 0, 0, 10}});
  const auto l = latency_weighted_f1(f.decisions, f.gold);
  EXPECT_EQ(*l.latency_tp, 5.0);
  EXPECT_NEAR(*l.speed, 0.98440339994531267, 1e-12);
  EXPECT_NEAR(l.latency_weighted_f1, 0.65626893329687508, 1e-12);
}

TEST(Latency, NoTruePositives) {
  const auto f = make({{"a", 1, 0, 10}, {"b", 0, 1, 3}});
  const auto l = latency_weighted_f1(f.decisions, f.gold);
  EXPECT_FALSE(l.latency_tp);
  EXPECT_FALSE(l.speed);
  EXPECT_EQ(l.latency_weighted_f1, 0.0);
}

TEST(Latency, PenaltyShape) {
  EXPECT_EQ(latency_penalty(1, 0.0078), 0.0);
  EXPECT_LT(latency_penalty(2, 0.0078), latency_penalty(100, 0.0078));
  EXPECT_LT(latency_penalty(1000, 0.0078), 1.0);
}

TEST(Coverage, MismatchesAreDataErrors) {
  auto f = twelve_users();
  auto missing = f.decisions;
  missing.pop_back();
  EXPECT_THROW(check_coverage(missing, f.gold), DataError);
  auto extra = f.decisions;
  extra.push_back({"x", 0, 1});
  EXPECT_THROW(check_coverage(extra, f.gold), DataError);
  auto dup = f.decisions;
  dup.back().user_id = "m01";
  EXPECT_THROW(check_coverage(dup, f.gold), DataError);
  auto bad_delay = f.decisions;
  bad_delay[0].delay = 0;
  EXPECT_THROW(check_coverage(bad_delay, f.gold), DataError);
  auto bad_decision = f.decisions;
  bad_decision[0].decision = 2;
  EXPECT_THROW(evaluate(bad_decision, f.gold), DataError);
}

TEST(Evaluate, ReportAndSerialization) {
  const auto f = twelve_users();
  const auto r = evaluate(f.decisions, f.gold);
  EXPECT_EQ(r.n_users, 12u);
  EXPECT_EQ(r.c_fp, 0.5);
  EXPECT_EQ(r.erde.size(), 3u);
  const auto j = to_json(r);
  EXPECT_NEAR(j["erde"]["30"].get<double>(), 0.29166666667423874, 1e-12);
  EXPECT_EQ(j["confusion"]["tp"], 5);
  const auto header = csv_header(r);
  const auto row = csv_row(r, "run-a");
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(row.begin(), row.end(), ','));
  EXPECT_EQ(row.rfind("run-a,", 0), 0u);
}

Fixture random_fixture(std::mt19937& rng, int o_max) {
  std::uniform_int_distribution<int> bit(0, 1), delay(1, o_max);
  std::vector<Row> rows;
  for (int i = 0; i < 30; ++i) rows.emplace_back("u" + std::to_string(i), bit(rng), bit(rng), delay(rng));
  return make(rows);
}

TEST(ErdeProperty, LargerOIsNeverWorse) {
  std::mt19937 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    const auto f = random_fixture(rng, 120);
    const double e5 = erde(f.decisions, f.gold, 5, 0.4);
    const double e30 = erde(f.decisions, f.gold, 30, 0.4);
    const double e50 = erde(f.decisions, f.gold, 50, 0.4);
    EXPECT_GE(e5, e30);
    EXPECT_GE(e30, e50);
  }
}

TEST(ErdeProperty, DelayingATruePositiveNeverHelps) {
  std::mt19937 rng(32);
  for (int trial = 0; trial < 200; ++trial) {
    auto f = random_fixture(rng, 80);
    for (auto& d : f.decisions) {
      if (d.decision == 1 && f.gold[d.user_id] == 1) {
        const double before = erde(f.decisions, f.gold, 30, 0.4);
        d.delay += 5;
        EXPECT_GE(erde(f.decisions, f.gold, 30, 0.4), before);
        const auto l = latency_weighted_f1(f.decisions, f.gold);
        EXPECT_LE(l.latency_weighted_f1, classification_report(f.decisions, f.gold).f1_positive);
        break;
      }
    }
  }
}

}  // namespace
}  // namespace earlyrisk
