#pragma once

#include <chrono>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "earlyrisk/corpus.hpp"
#include "earlyrisk/preprocess.hpp"
#include "earlyrisk/wordconf.hpp"

namespace earlyrisk {

// Positive-class probability. Construction rejects NaN and values outside
// [0, 1]; nothing is clamped.
class ProbabilityEstimate {
 public:
  explicit ProbabilityEstimate(double p);
  double value() const noexcept { return p_; }

  friend bool operator==(const ProbabilityEstimate&, const ProbabilityEstimate&) = default;

 private:
  double p_;
};

enum class ClassifierKind {
  builtin,   // word-confidence model loaded from JSON
  external,  // HTTP POST /predict
  constant,  // fixed probability, for dry runs
  oracle,    // reads gold labels, for harness checks
};

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::builtin;
  std::optional<std::filesystem::path> model_path;  // builtin
  std::optional<std::string> endpoint;              // external
  std::optional<double> constant;                   // constant
  std::optional<std::filesystem::path> gold_path;   // oracle
  int timeout_ms = 30000;
  int max_batch = 64;
  int max_retries = 2;
  int max_in_flight = 1;

  /// Throws PreconditionError when the fields required by `kind` are missing
  /// or fields of another kind are set.
  void validate() const;

  /// Parses "builtin:<model.json>", "external:<url>", "constant:<p>" or
  /// "oracle:<gold.json>".
  static ClassifierSpec parse(const std::string& text);
  std::string to_string() const;

  nlohmann::json to_json() const;
  static ClassifierSpec from_json(const nlohmann::json& value);
};

// One item of a scoring batch. `user_id` is ignored by every estimator but
// the oracle.
struct ScoringRequest {
  std::string user_id;
  NormalizedText text;
};

class ProbabilityEstimator {
 public:
  virtual ~ProbabilityEstimator() = default;

  /// Returns one estimate per request, in request order, or throws; partial
  /// results are never returned.
  virtual std::vector<ProbabilityEstimate> predict(
      std::span<const ScoringRequest> batch) = 0;
};

class BuiltinEstimator final : public ProbabilityEstimator {
 public:
  explicit BuiltinEstimator(std::shared_ptr<const WordConfModel> model);
  std::vector<ProbabilityEstimate> predict(std::span<const ScoringRequest> batch) override;

 private:
  std::shared_ptr<const WordConfModel> model_;
};

class ConstantEstimator final : public ProbabilityEstimator {
 public:
  explicit ConstantEstimator(double p) : p_(p) {}
  std::vector<ProbabilityEstimate> predict(std::span<const ScoringRequest> batch) override;

 private:
  ProbabilityEstimate p_;
};

class OracleEstimator final : public ProbabilityEstimator {
 public:
  explicit OracleEstimator(GoldLabels gold) : gold_(std::move(gold)) {}
  std::vector<ProbabilityEstimate> predict(std::span<const ScoringRequest> batch) override;

 private:
  GoldLabels gold_;
};

struct ExternalOptions {
  std::chrono::milliseconds timeout{30000};
  std::size_t max_batch = 64;
  int max_retries = 2;
  int max_in_flight = 1;
};

// Client for the external classifier protocol:
//   POST <endpoint>/predict  {"texts": [...]}  ->  {"probabilities": [...]}
// Transport failures are retried up to `max_retries` times; a wrong status,
// a length mismatch or an out-of-range probability fails immediately.
class ExternalEstimator final : public ProbabilityEstimator {
 public:
  ExternalEstimator(std::string endpoint, ExternalOptions options = {});
  ~ExternalEstimator() override;

  std::vector<ProbabilityEstimate> predict(std::span<const ScoringRequest> batch) override;

  /// Sends one chunk of texts; exposed for the conformance tests.
  std::vector<ProbabilityEstimate> post_texts(const std::vector<std::string>& texts);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::unique_ptr<ProbabilityEstimator> make_estimator(const ClassifierSpec& spec);

/// Scores a batch of texts with the estimator `spec` describes.
std::vector<ProbabilityEstimate> predict_batch(const ClassifierSpec& spec,
                                               std::span<const NormalizedText> inputs);

}  // namespace earlyrisk
