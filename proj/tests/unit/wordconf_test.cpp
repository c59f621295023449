#include "earlyrisk/wordconf.hpp"

#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "earlyrisk/errors.hpp"
#include "test_support.hpp"

namespace earlyrisk {
namespace {

LabeledSample pos(std::string text) { return {std::move(text), Label::positive, "p", -1}; }
LabeledSample neg(std::string text) { return {std::move(text), Label::negative, "n", -1}; }

// Same six samples as tests/oracles/oracles.py.
std::vector<LabeledSample> six_samples() {
  return {pos("ayuno ayuno cals hoy"), pos("atracones ayuno mal"), pos("cals atracones atracones"),
          neg("hoy cine amiga"),       neg("gracias amiga hoy"),   neg("mal cine cine")};
}

// Formula evaluated from raw counts, independent of the model class.
double oracle_confidence(double c_pos, double c_neg, double t_pos, double t_neg, double v,
                         double s) {
  const double x = std::log((c_pos + s) / (t_pos + s * v)) - std::log((c_neg + s) / (t_neg + s * v));
  return 1.0 / (1.0 + std::exp(-x));
}

TEST(WordConfFit, DirectCount) {
  const auto m = WordConfModel::fit({pos("ayuno ayuno"), neg("fiesta")}, 1.0);
  EXPECT_EQ(m.count("ayuno", Label::positive), 2u);
  EXPECT_EQ(m.count("ayuno", Label::negative), 0u);
  EXPECT_EQ(m.count("fiesta", Label::positive), 0u);
  EXPECT_EQ(m.count("fiesta", Label::negative), 1u);
  EXPECT_EQ(m.total(Label::positive), 2u);
  EXPECT_EQ(m.total(Label::negative), 1u);
}

TEST(WordConfFit, RequiresBothClasses) {
  EXPECT_THROW(WordConfModel::fit({neg("a b")}, 1.0), PreconditionError);
  EXPECT_THROW(WordConfModel::fit({pos("a b")}, 1.0), PreconditionError);
  EXPECT_THROW(WordConfModel::fit({pos("a"), neg("b")}, 0.0), PreconditionError);
}

TEST(WordConfFit, SixSampleHandTally) {
  const auto m = WordConfModel::fit(six_samples(), 1.0);
  const std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> tally{
      {"amiga", {0, 2}}, {"atracones", {3, 0}}, {"ayuno", {3, 0}}, {"cals", {2, 0}},
      {"cine", {0, 3}},  {"gracias", {0, 1}},   {"hoy", {1, 2}},   {"mal", {1, 1}}};
  EXPECT_EQ(m.vocabulary_size(), tally.size());
  for (const auto& [token, counts] : tally) {
    EXPECT_EQ(m.count(token, Label::positive), counts.first) << token;
    EXPECT_EQ(m.count(token, Label::negative), counts.second) << token;
  }
  EXPECT_EQ(m.total(Label::positive), 10u);
  EXPECT_EQ(m.total(Label::negative), 9u);
}

TEST(WordConfConfidence, UnseenTokenIsHalf) {
  const auto m = WordConfModel::fit(six_samples(), 1.0);
  EXPECT_EQ(m.confidence("desconocida"), 0.5);
}

TEST(WordConfConfidence, EqualRelativeFrequencyIsHalf) {
  // Equal class totals, so equal counts mean equal relative frequency.
  const auto m = WordConfModel::fit({pos("comer bien hoy"), neg("comer mal ayer")}, 1.0);
  EXPECT_EQ(m.confidence("comer"), 0.5);
}

TEST(WordConfConfidence, MatchesScriptedOracle) {
  const auto m = WordConfModel::fit(six_samples(), 1.0);
  // Values printed by tests/oracles/oracles.py.
  EXPECT_NEAR(m.confidence("ayuno"), 0.79069767441860472, 1e-15);
  EXPECT_NEAR(m.confidence("cals"), 0.73913043478260865, 1e-15);
  EXPECT_NEAR(m.confidence("mal"), 0.48571428571428565, 1e-15);
  EXPECT_NEAR(m.confidence("cine"), 0.19101123595505612, 1e-15);
  EXPECT_NEAR(m.confidence("hoy"), oracle_confidence(1, 2, 10, 9, 8, 1.0), 1e-15);
}

TEST(WordConfConfidence, SmoothingParameterIsUsed) {
  const auto m = WordConfModel::fit(six_samples(), 0.5);
  EXPECT_NEAR(m.confidence("cals"), oracle_confidence(2, 0, 10, 9, 8, 0.5), 1e-15);
}

TEST(ExtractVocabulary, UniqueMaximum) {
  auto samples = six_samples();
  samples.push_back(pos("atracones"));
  const auto m = WordConfModel::fit(samples, 1.0);
  // With 11 positive tokens: atracones (4,0) beats ayuno (3,0).
  ASSERT_GT(oracle_confidence(4, 0, 11, 9, 8, 1), oracle_confidence(3, 0, 11, 9, 8, 1));
  const auto top = m.extract_vocabulary(1);
  ASSERT_EQ(top.size(), 1u);
  EXPECT_EQ(top[0].token, "atracones");
}

TEST(ExtractVocabulary, FullVocabularySortedWithLexicographicTies) {
  const auto m = WordConfModel::fit(six_samples(), 1.0);
  const auto all = m.extract_vocabulary(m.vocabulary_size());
  std::vector<std::string> tokens;
  for (const auto& w : all) tokens.push_back(w.token);
  // atracones and ayuno tie at (3,0); order from the oracle script.
  EXPECT_EQ(tokens, (std::vector<std::string>{"atracones", "ayuno", "cals", "mal", "hoy",
                                               "gracias", "amiga", "cine"}));
  EXPECT_EQ(all[0].confidence, all[1].confidence);
}

TEST(ExtractVocabulary, RangeChecked) {
  const auto m = WordConfModel::fit(six_samples(), 1.0);
  EXPECT_THROW(m.extract_vocabulary(0), PreconditionError);
  EXPECT_THROW(m.extract_vocabulary(9), PreconditionError);
}

TEST(ScoreText, EmptyTextIsHalf) {
  const auto m = WordConfModel::fit(six_samples(), 1.0);
  EXPECT_EQ(m.score_text(NormalizedText("")), 0.5);
}

TEST(ScoreText, SingleTokenReturnsItsConfidence) {
  const auto m = WordConfModel::fit(six_samples(), 1.0);
  EXPECT_DOUBLE_EQ(m.score_text(NormalizedText("cals")), m.confidence("cals"));
}

TEST(ScoreText, FiveTokenFixtureMatchesOracle) {
  const auto m = WordConfModel::fit(six_samples(), 1.0);
  EXPECT_NEAR(m.score_text(NormalizedText("ayuno cals hoy cine desconocida")),
              0.52320898576678143, 1e-15);
}

TEST(WordConfJson, RoundTrip) {
  testing::TempDir dir;
  const auto m = WordConfModel::fit(six_samples(), 0.75);
  m.save(dir / "m.json");
  const auto back = WordConfModel::load(dir / "m.json");
  EXPECT_EQ(back.smoothing(), 0.75);
  EXPECT_EQ(back.positive_counts(), m.positive_counts());
  EXPECT_EQ(back.negative_counts(), m.negative_counts());
  EXPECT_EQ(back.confidence("ayuno"), m.confidence("ayuno"));
  EXPECT_THROW(WordConfModel::from_json(nlohmann::json{{"classes", {{"pos", {{"a", -1}}}}}}),
               DataError);
}

WordConfModel random_model(std::mt19937& rng) {
  const auto& words = testing::spanish_words();
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
  std::uniform_int_distribution<int> len(1, 12);
  std::vector<LabeledSample> samples;
  for (int i = 0, n = len(rng); i < n; ++i) {
    for (auto label : {Label::positive, Label::negative}) {
      std::string text;
      for (int w = 0, k = len(rng); w < k; ++w) text += words[pick(rng)] + " ";
      samples.push_back({text, label, "u", -1});
    }
  }
  return WordConfModel::fit(samples, std::uniform_real_distribution<double>(0.1, 2.0)(rng));
}

TEST(WordConfProperty, MonotoneInPositiveCount) {
  std::mt19937 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = random_model(rng);
    for (const auto& token : m.vocabulary()) {
      auto bumped = m.positive_counts();
      ++bumped[token];
      const WordConfModel more(bumped, m.negative_counts(), m.smoothing());
      EXPECT_GE(more.confidence(token), m.confidence(token)) << token;
    }
  }
}

TEST(WordConfProperty, ClassSwapIsAntisymmetric) {
  std::mt19937 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    const auto m = random_model(rng);
    const auto s = m.swapped();
    for (const auto& token : m.vocabulary()) {
      EXPECT_NEAR(s.confidence(token), 1.0 - m.confidence(token), 1e-12);
    }
  }
}

TEST(WordConfProperty, PrefixConsistentVocabulary) {
  std::mt19937 rng(10);
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = random_model(rng);
    const auto full = m.extract_vocabulary(m.vocabulary_size());
    for (std::size_t k = 1; k < m.vocabulary_size(); ++k) {
      const auto a = m.extract_vocabulary(k);
      const auto b = m.extract_vocabulary(k + 1);
      ASSERT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
      ASSERT_TRUE(std::equal(b.begin(), b.end(), full.begin()));
    }
  }
}

TEST(WordConfProperty, ScoreTextInUnitInterval) {
  std::mt19937 rng(12);
  const auto& words = testing::spanish_words();
  std::uniform_int_distribution<std::size_t> pick(0, words.size() - 1);
  for (int trial = 0; trial < 100; ++trial) {
    const auto m = random_model(rng);
    std::string text;
    for (int i = 0; i < 30; ++i) text += words[pick(rng)] + " ";
    const double s = m.score_text(normalize(text));
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}

}  // namespace
}  // namespace earlyrisk
