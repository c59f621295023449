#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "earlyrisk/corpus.hpp"
#include "earlyrisk/preprocess.hpp"

namespace earlyrisk {

struct WordScore {
  std::string token;
  double confidence = 0.5;

  friend bool operator==(const WordScore&, const WordScore&) = default;
};

// Per-class token counts with additive smoothing. A token's confidence is
// the logistic of its smoothed log-likelihood ratio between the positive and
// the negative class; class priors are left out so the score only reflects
// how the token is distributed.
class WordConfModel {
 public:
  using Counts = std::map<std::string, std::uint64_t, std::less<>>;

  WordConfModel() = default;
  WordConfModel(Counts positive, Counts negative, double smoothing = 1.0);

  /// Counts whitespace tokens of already normalized samples. Throws
  /// PreconditionError unless both classes are present.
  static WordConfModel fit(const std::vector<LabeledSample>& samples,
                           double smoothing = 1.0);

  /// Smoothed log-likelihood ratio; 0 for tokens outside the vocabulary.
  double log_ratio(std::string_view token) const;

  /// logistic(log_ratio(token)), in [0, 1].
  double confidence(std::string_view token) const;

  /// Top `k` tokens by confidence, ties broken lexicographically.
  std::vector<WordScore> extract_vocabulary(std::size_t k) const;

  /// logistic(mean log_ratio over tokens); 0.5 for empty text.
  double score_text(const NormalizedText& text) const;

  /// Same model with the class roles exchanged.
  WordConfModel swapped() const;

  std::uint64_t count(std::string_view token, Label label) const;
  std::uint64_t total(Label label) const;
  std::size_t vocabulary_size() const noexcept { return vocabulary_.size(); }
  const std::vector<std::string>& vocabulary() const noexcept { return vocabulary_; }
  double smoothing() const noexcept { return smoothing_; }
  const Counts& positive_counts() const noexcept { return positive_; }
  const Counts& negative_counts() const noexcept { return negative_; }

  nlohmann::json to_json() const;
  static WordConfModel from_json(const nlohmann::json& value);

  void save(const std::filesystem::path& path) const;
  static WordConfModel load(const std::filesystem::path& path);

 private:
  Counts positive_;
  Counts negative_;
  std::uint64_t positive_total_ = 0;
  std::uint64_t negative_total_ = 0;
  double smoothing_ = 1.0;
  std::vector<std::string> vocabulary_;
};

inline constexpr std::size_t kDefaultVocabularySize = 25;

double logistic(double x);

}  // namespace earlyrisk
