#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace earlyrisk {

enum class Label { negative = 0, positive = 1, unknown = 2 };
enum class Split { train, trial, test };

std::string to_string(Label label);
std::string to_string(Split split);
Split parse_split(const std::string& name);

struct Post {
  int order = 0;
  std::string text;
  std::optional<std::string> date;

  friend bool operator==(const Post&, const Post&) = default;
};

struct UserHistory {
  std::string user_id;
  Label label = Label::unknown;
  std::vector<Post> posts;

  friend bool operator==(const UserHistory&, const UserHistory&) = default;
};

struct Corpus {
  std::string task_id;
  Split split = Split::train;
  std::vector<UserHistory> users;

  const UserHistory* find(const std::string& user_id) const;
  std::size_t max_posts() const;
};

// One training example. `part_index` is the slice number for augmented
// samples and -1 for a user's whole history.
struct LabeledSample {
  std::string text;
  Label label = Label::negative;
  std::string origin_user;
  int part_index = -1;

  friend bool operator==(const LabeledSample&, const LabeledSample&) = default;
};

struct Summary {
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;

  friend bool operator==(const Summary&, const Summary&) = default;
};

struct StatsReport {
  std::size_t n_users = 0;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
  std::size_t n_posts = 0;
  Summary posts_per_user;
  Summary words_per_post;

  friend bool operator==(const StatsReport&, const StatsReport&) = default;
};

using GoldLabels = std::map<std::string, int>;

/// Reads a corpus file (JSON array of user objects). Malformed entries are
/// rejected with a DataError naming the offending user and the line in the
/// file where its record starts. `task_id` defaults to the file stem.
Corpus load_corpus(const std::filesystem::path& path, Split split,
                   std::optional<std::string> task_id = std::nullopt);

/// Parses corpus JSON text; `source` is only used in diagnostics.
Corpus parse_corpus(const std::string& text, Split split, std::string task_id,
                    const std::string& source = "<memory>");

void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
nlohmann::json corpus_to_json(const Corpus& corpus);

/// Gold-label sidecar: JSON object user_id -> 0|1.
GoldLabels load_gold(const std::filesystem::path& path);
GoldLabels gold_from_corpus(const Corpus& corpus);
void save_gold(const GoldLabels& gold, const std::filesystem::path& path);

/// Median with interpolation of the two middle values on even lengths.
double median(std::vector<double> values);

std::size_t count_words(const std::string& text);

StatsReport corpus_stats(const Corpus& corpus);
nlohmann::json stats_to_json(const StatsReport& report);

/// Splits a user's history into `parts` contiguous slices whose sizes differ
/// by at most one; the earliest slices take the remainder. Histories shorter
/// than `parts` yield one sample per post.
std::vector<LabeledSample> augment_split(const UserHistory& user, int parts = 3);

/// Whole-history sample: every post joined with a single space.
LabeledSample whole_history_sample(const UserHistory& user);

/// Whole-history samples for every labeled user followed by their augmented
/// slices.
std::vector<LabeledSample> build_training_samples(const Corpus& corpus,
                                                  int parts = 3);

struct TrainValidSplit {
  std::vector<LabeledSample> train;
  std::vector<LabeledSample> valid;
  // Set when the input had a single class and the split fell back to an
  // unstratified shuffle.
  bool stratified = true;
};

TrainValidSplit train_valid_split(const std::vector<LabeledSample>& samples,
                                  double valid_fraction, std::uint64_t seed);

}  // namespace earlyrisk
