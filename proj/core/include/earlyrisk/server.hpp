#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "earlyrisk/corpus.hpp"
#include "earlyrisk/errors.hpp"
#include "earlyrisk/metrics.hpp"

namespace earlyrisk {

struct RoundMessage {
  std::string nick;
  std::string message;

  friend bool operator==(const RoundMessage&, const RoundMessage&) = default;
};

// What GET /{task}/getmessages/{token} returns. After the last round the
// batch is empty, `terminal` is set and `round` is one past the last round.
struct RoundBatch {
  int round = 1;
  bool terminal = false;
  std::vector<RoundMessage> messages;

  nlohmann::json to_json() const;
  static RoundBatch from_json(const nlohmann::json& value);

  friend bool operator==(const RoundBatch&, const RoundBatch&) = default;
};

struct Submission {
  int round = 1;
  std::vector<std::pair<std::string, int>> decisions;  // nick, 0|1

  nlohmann::json to_json() const;
};

// Rejected submission; `status()` is the HTTP status the server answers.
class SubmissionError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

/// Releases each user's posts one per round; users with fewer posts drop out
/// of later rounds. Round r (1-based) holds post r-1 of every user that has it.
class RoundPlan {
 public:
  explicit RoundPlan(std::shared_ptr<const Corpus> corpus);

  int total_rounds() const noexcept { return total_rounds_; }
  RoundBatch batch(int round) const;
  const Corpus& corpus() const noexcept { return *corpus_; }

 private:
  std::shared_ptr<const Corpus> corpus_;
  int total_rounds_ = 0;
};

// Protocol state of one participant token. Not synchronized; MockServer
// serializes access per token.
class EvaluationSession {
 public:
  EvaluationSession(std::shared_ptr<const RoundPlan> plan, std::string token);

  /// Batch for the round awaiting submission. Repeated calls return the same
  /// batch until a submission is accepted.
  RoundBatch current_batch() const;

  /// Validates and stores one round of decisions, then advances the round.
  /// Throws SubmissionError (4xx status) on any violation.
  void submit(const Submission& submission);

  /// Parses a raw request body first; malformed bodies become 400 errors.
  Submission parse_submission(const std::string& body) const;

  int current_round() const noexcept { return current_round_; }
  bool finished() const noexcept { return current_round_ > plan_->total_rounds(); }
  const std::string& token() const noexcept { return token_; }

  /// Decisions accepted so far, one map per submitted round.
  const std::vector<std::map<std::string, int>>& submissions() const noexcept {
    return submissions_;
  }

  /// Per-user outcome of the accepted rounds: the first round flagged 1, or
  /// 0 with the number of rounds the user was served.
  std::vector<FinalDecision> final_decisions() const;

  nlohmann::json snapshot() const;

 private:
  std::shared_ptr<const RoundPlan> plan_;
  std::string token_;
  int current_round_ = 1;
  std::vector<std::map<std::string, int>> submissions_;
  std::set<std::string> flagged_;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  std::optional<std::filesystem::path> runs_dir;
};

/// HTTP front end:
///   GET  /{task}/getmessages/{token}
///   POST /{task}/submit/{token}
/// Each accepted submission is snapshotted to runs_dir/<token>/round_<r>.json
/// when runs_dir is set.
class MockServer {
 public:
  MockServer(Corpus corpus, ServerOptions options = {});
  ~MockServer();
  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  /// Binds and starts serving on a background thread. Throws Error when the
  /// address cannot be bound.
  void start();
  void stop();
  /// Blocks until stop() is called from elsewhere.
  void wait();

  int port() const noexcept;
  std::string url() const;
  const std::string& task() const noexcept;
  int total_rounds() const noexcept;

  std::optional<std::vector<FinalDecision>> final_decisions(const std::string& token) const;
  std::optional<nlohmann::json> snapshot(const std::string& token) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Starts a MockServer over `corpus`.
std::unique_ptr<MockServer> serve(Corpus corpus, ServerOptions options = {});

}  // namespace earlyrisk
