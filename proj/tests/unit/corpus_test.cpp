#include "earlyrisk/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "earlyrisk/errors.hpp"
#include "test_support.hpp"

namespace earlyrisk {
namespace {

using testing::TempDir;

std::filesystem::path write_text(const TempDir& dir, const std::string& name,
                                 const std::string& text) {
  const auto path = dir / name;
  std::ofstream(path) << text;
  return path;
}

UserHistory user_with_posts(const std::string& id, Label label, int n) {
  UserHistory u{id, label, {}};
  for (int i = 0; i < n; ++i) u.posts.push_back({i, "p" + std::to_string(i), std::nullopt});
  return u;
}

TEST(LoadCorpus, ParsesTwoUsers) {
  TempDir dir;
  const auto path = write_text(dir, "t.json", R"([
    {"user_id": "a", "label": 1, "posts": [{"order": 0, "text": "hola", "date": null}]},
    {"user_id": "b", "label": 0, "posts": [{"order": 0, "text": "chau", "date": "2023-01-02"}]}
  ])");
  const auto c = load_corpus(path, Split::train);
  ASSERT_EQ(c.users.size(), 2u);
  EXPECT_EQ(c.task_id, "t");
  EXPECT_EQ(c.users[0].label, Label::positive);
  EXPECT_EQ(c.users[1].label, Label::negative);
  EXPECT_EQ(c.users[1].posts[0].date, "2023-01-02");
}

TEST(LoadCorpus, DuplicateUserNamesTheIdAndLine) {
  TempDir dir;
  const auto path = write_text(dir, "dup.json",
                               "[\n"
                               "{\"user_id\": \"x\", \"label\": 1, \"posts\": [{\"order\": 0, \"text\": \"a\"}]},\n"
                               "{\"user_id\": \"x\", \"label\": 0, \"posts\": [{\"order\": 0, \"text\": \"b\"}]}\n"
                               "]\n");
  try {
    load_corpus(path, Split::train);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("'x'"), std::string::npos) << what;
    EXPECT_NE(what.find("duplicate"), std::string::npos) << what;
    EXPECT_NE(what.find(":3:"), std::string::npos) << what;
  }
}

TEST(LoadCorpus, RejectsMalformedRecords) {
  TempDir dir;
  const std::vector<std::pair<std::string, std::string>> cases{
      {"[]", "empty corpus"},
      {"{}", "array"},
      {R"([{"user_id": "a", "label": 1, "posts": []}])", "non-empty"},
      {R"([{"user_id": "a", "label": 2, "posts": [{"order": 0, "text": "x"}]}])", "label"},
      {R"([{"user_id": "a", "label": null, "posts": [{"order": 0, "text": "x"}]}])", "null label"},
      {R"([{"user_id": "a", "label": 1, "posts": [{"order": 0, "text": "   "}]}])", "empty text"},
      {R"([{"user_id": "a", "label": 1, "posts": [{"order": 1, "text": "x"}]}])", "consecutive"},
      {R"([{"user_id": "a", "label": 1, "posts": [{"order": 0, "text": "x"}, {"order": 0, "text": "y"}]}])",
       "consecutive"},
      {R"([{"label": 1, "posts": [{"order": 0, "text": "x"}]}])", "user_id"},
      {"[{\"user_id\": ", "invalid JSON"},
  };
  for (const auto& [text, needle] : cases) {
    const auto path = write_text(dir, "bad.json", text);
    try {
      load_corpus(path, Split::train);
      ADD_FAILURE() << "accepted: " << text;
    } catch (const DataError& e) {
      EXPECT_NE(std::string(e.what()).find(needle), std::string::npos)
          << "message '" << e.what() << "' lacks '" << needle << "'";
    }
  }
}

TEST(LoadCorpus, MissingFile) {
  EXPECT_THROW(load_corpus("/nonexistent/corpus.json", Split::train), DataError);
}

TEST(LoadCorpus, UnknownLabelsOnlyInTestSplit) {
  TempDir dir;
  const auto path = write_text(dir, "test.json",
                               R"([{"user_id": "a", "label": null, "posts": [{"order": 0, "text": "x"}]}])");
  const auto c = load_corpus(path, Split::test);
  EXPECT_EQ(c.users[0].label, Label::unknown);
  EXPECT_THROW(load_corpus(path, Split::trial), DataError);
}

TEST(LoadCorpus, PostsAreOrderedByOrderField) {
  TempDir dir;
  const auto path = write_text(
      dir, "o.json",
      R"([{"user_id": "a", "label": 0, "posts": [{"order": 1, "text": "second"}, {"order": 0, "text": "first"}]}])");
  const auto c = load_corpus(path, Split::train);
  EXPECT_EQ(c.users[0].posts[0].text, "first");
  EXPECT_EQ(c.users[0].posts[1].text, "second");
}

TEST(LoadCorpus, SaveRoundTrip) {
  TempDir dir;
  const auto corpus = testing::synthetic_corpus(5, 1, 6, 3, "rt");
  save_corpus(corpus, dir / "rt.json");
  const auto back = load_corpus(dir / "rt.json", Split::train);
  EXPECT_EQ(back.users, corpus.users);
}

TEST(Gold, LoadAndValidate) {
  TempDir dir;
  const auto ok = write_text(dir, "g.json", R"({"a": 1, "b": 0})");
  const auto gold = load_gold(ok);
  EXPECT_EQ(gold.at("a"), 1);
  EXPECT_EQ(gold.at("b"), 0);
  EXPECT_THROW(load_gold(write_text(dir, "g2.json", R"({"a": 2})")), DataError);
  EXPECT_THROW(load_gold(write_text(dir, "g3.json", R"([1])")), DataError);
}

TEST(Median, OddAndEven) {
  EXPECT_EQ(median({11, 35, 50}), 35.0);
  EXPECT_EQ(median({2, 4}), 3.0);
  EXPECT_EQ(median({50, 18, 47, 50}), 48.5);
  EXPECT_THROW(median({}), PreconditionError);
}

TEST(CorpusStats, TwoPostMedian) {
  Corpus c{"t", Split::train, {{"a", Label::positive, {{0, "uno dos", {}}, {1, "a b c d", {}}}}}};
  const auto r = corpus_stats(c);
  EXPECT_EQ(r.words_per_post, (Summary{3, 2, 4}));
}

TEST(CorpusStats, OddUserCountMedian) {
  Corpus c{"t", Split::train,
           {user_with_posts("a", Label::positive, 11), user_with_posts("b", Label::negative, 35),
            user_with_posts("c", Label::negative, 50)}};
  EXPECT_EQ(corpus_stats(c).posts_per_user, (Summary{35, 11, 50}));
}

// Expected values tallied from the word-count table in
// tests/oracles/oracles.py, which generated the fixture.
TEST(CorpusStats, FixtureMatchesHandTally) {
  const auto c = load_corpus(testing::fixture("stats_corpus.json"), Split::train);
  const auto r = corpus_stats(c);
  EXPECT_EQ(r.n_users, 10u);
  EXPECT_EQ(r.n_pos, 4u);
  EXPECT_EQ(r.n_neg, 6u);
  EXPECT_EQ(r.n_posts, 50u);
  EXPECT_EQ(r.posts_per_user, (Summary{5.5, 2, 7}));
  EXPECT_EQ(r.words_per_post, (Summary{4, 1, 12}));
}

TEST(CorpusStats, InvariantUnderUserPermutation) {
  auto c = testing::synthetic_corpus(15, 1, 30, 9);
  const auto reference = corpus_stats(c);
  std::mt19937 rng(4);
  for (int i = 0; i < 20; ++i) {
    std::shuffle(c.users.begin(), c.users.end(), rng);
    EXPECT_EQ(corpus_stats(c), reference);
  }
}

TEST(AugmentSplit, ExactDivision) {
  const auto parts = augment_split(user_with_posts("u", Label::positive, 9), 3);
  ASSERT_EQ(parts.size(), 3u);
  EXPECT_EQ(parts[0].text, "p0 p1 p2");
  EXPECT_EQ(parts[1].text, "p3 p4 p5");
  EXPECT_EQ(parts[2].text, "p6 p7 p8");
  EXPECT_EQ(parts[2].part_index, 2);
  EXPECT_EQ(parts[2].origin_user, "u");
}

TEST(AugmentSplit, RemainderGoesToEarliestParts) {
  const auto parts = augment_split(user_with_posts("u", Label::negative, 11), 3);
  ASSERT_EQ(parts.size(), 3u);
  EXPECT_EQ(count_words(parts[0].text), 4u);
  EXPECT_EQ(count_words(parts[1].text), 4u);
  EXPECT_EQ(count_words(parts[2].text), 3u);
  EXPECT_EQ(parts[0].text + " " + parts[1].text + " " + parts[2].text,
            whole_history_sample(user_with_posts("u", Label::negative, 11)).text);
}

TEST(AugmentSplit, ShortHistoryYieldsOnePerPost) {
  const auto parts = augment_split(user_with_posts("u", Label::positive, 2), 3);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[0].text, "p0");
  EXPECT_EQ(parts[1].text, "p1");
}

TEST(AugmentSplit, UnknownLabelRejected) {
  EXPECT_THROW(augment_split(user_with_posts("u", Label::unknown, 4)), PreconditionError);
}

TEST(AugmentSplit, PropertyRoundTripAndBalance) {
  std::mt19937 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    const int n = std::uniform_int_distribution<int>(1, 120)(rng);
    const int k = std::uniform_int_distribution<int>(1, 7)(rng);
    const auto user = user_with_posts("u", Label::positive, n);
    const auto parts = augment_split(user, k);
    ASSERT_EQ(static_cast<int>(parts.size()), std::min(n, k));
    std::string joined;
    std::size_t lo = SIZE_MAX, hi = 0;
    for (const auto& p : parts) {
      if (!joined.empty()) joined += ' ';
      joined += p.text;
      lo = std::min(lo, count_words(p.text));
      hi = std::max(hi, count_words(p.text));
    }
    EXPECT_EQ(joined, whole_history_sample(user).text);
    EXPECT_LE(hi - lo, 1u);
  }
}

TEST(TrainingSamples, AugmentedSlicesAreAddedToWholeHistories) {
  const auto c = testing::synthetic_corpus(6, 4, 9, 2);
  const auto samples = build_training_samples(c, 3);
  EXPECT_EQ(samples.size(), 6u + 18u);
  EXPECT_EQ(std::count_if(samples.begin(), samples.end(),
                          [](const LabeledSample& s) { return s.part_index == -1; }),
            6);
}

std::vector<LabeledSample> balanced_samples(int pos, int neg) {
  std::vector<LabeledSample> out;
  for (int i = 0; i < pos; ++i) out.push_back({"p" + std::to_string(i), Label::positive, "p", -1});
  for (int i = 0; i < neg; ++i) out.push_back({"n" + std::to_string(i), Label::negative, "n", -1});
  return out;
}

TEST(TrainValidSplit, EightyFiveFifteen) {
  const auto samples = balanced_samples(50, 50);
  const auto split = train_valid_split(samples, 0.15, 7);
  EXPECT_EQ(split.train.size(), 85u);
  EXPECT_EQ(split.valid.size(), 15u);
  const auto valid_pos = std::count_if(split.valid.begin(), split.valid.end(),
                                       [](const LabeledSample& s) { return s.label == Label::positive; });
  EXPECT_TRUE(valid_pos == 7 || valid_pos == 8) << valid_pos;
  EXPECT_TRUE(split.stratified);
}

TEST(TrainValidSplit, DeterministicForSeed) {
  const auto samples = balanced_samples(40, 23);
  const auto a = train_valid_split(samples, 0.15, 99);
  const auto b = train_valid_split(samples, 0.15, 99);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.valid, b.valid);
}

TEST(TrainValidSplit, FractionBounds) {
  const auto samples = balanced_samples(5, 5);
  EXPECT_THROW(train_valid_split(samples, 0.0, 1), PreconditionError);
  EXPECT_THROW(train_valid_split(samples, 1.0, 1), PreconditionError);
}

TEST(TrainValidSplit, SingleClassFallsBack) {
  const auto split = train_valid_split(balanced_samples(20, 0), 0.25, 3);
  EXPECT_FALSE(split.stratified);
  EXPECT_EQ(split.valid.size(), 5u);
}

TEST(TrainValidSplit, PropertyPartitionAndStratification) {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int pos = std::uniform_int_distribution<int>(1, 80)(rng);
    const int neg = std::uniform_int_distribution<int>(1, 80)(rng);
    const double f = std::uniform_real_distribution<double>(0.05, 0.6)(rng);
    const auto samples = balanced_samples(pos, neg);
    const auto split = train_valid_split(samples, f, trial);

    std::multiset<std::string> all, got;
    for (const auto& s : samples) all.insert(s.text);
    for (const auto& s : split.train) got.insert(s.text);
    for (const auto& s : split.valid) got.insert(s.text);
    EXPECT_EQ(all, got);

    const auto vpos = std::count_if(split.valid.begin(), split.valid.end(),
                                    [](const LabeledSample& s) { return s.label == Label::positive; });
    const auto vneg = static_cast<long>(split.valid.size()) - vpos;
    EXPECT_LE(std::abs(vpos - f * pos), 1.0);
    EXPECT_LE(std::abs(vneg - f * neg), 1.0);
  }
}

}  // namespace
}  // namespace earlyrisk
