#pragma once

#include <chrono>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "earlyrisk/classifier.hpp"
#include "earlyrisk/metrics.hpp"
#include "earlyrisk/policy.hpp"
#include "earlyrisk/preprocess.hpp"
#include "earlyrisk/server.hpp"

namespace earlyrisk {

inline constexpr std::size_t kDefaultPostsWindow = 10;

/// Joins the last min(window, history.size()) posts, oldest first, with one
/// space. The current post is history.back().
NormalizedText build_input(std::span<const NormalizedText> history,
                           std::size_t window = kDefaultPostsWindow);

struct TrajectoryPoint {
  int round = 1;
  std::optional<double> p_positive;  // empty when the user was not re-scored
  int decision = 0;

  friend bool operator==(const TrajectoryPoint&, const TrajectoryPoint&) = default;
};

struct UserRun {
  std::vector<TrajectoryPoint> trajectory;
  std::optional<UserDecision> final;

  friend bool operator==(const UserRun&, const UserRun&) = default;
};

struct RoundTiming {
  int round = 1;
  std::size_t n_users = 0;
  double duration_ms = 0.0;
};

// Everything a participant run produced. Timings are kept apart from the
// decision data so two runs can be compared with `same_outcome`.
struct RunRecord {
  std::string task;
  std::string token;
  nlohmann::json config = nlohmann::json::object();
  std::map<std::string, UserRun> users;
  std::vector<RoundTiming> rounds;
  double total_duration_ms = 0.0;
  bool complete = false;

  nlohmann::json to_json() const;
  static RunRecord from_json(const nlohmann::json& value);
  void save(const std::filesystem::path& path) const;
  static RunRecord load(const std::filesystem::path& path);

  /// Equal users, trajectories, final decisions and config.
  bool same_outcome(const RunRecord& other) const;
};

/// Finalized users of a run, as input for the metrics.
std::vector<FinalDecision> final_decisions(const RunRecord& record);

/// (round, p_positive) rows of one user's trajectory, rounds without a
/// score skipped.
std::vector<std::pair<int, double>> plot_rows(const RunRecord& record,
                                              const std::string& user_id);

// Thin HTTP client for the evaluation server protocol.
class ProtocolClient {
 public:
  ProtocolClient(const std::string& server_url, std::string task, std::string token,
                 std::chrono::milliseconds timeout = std::chrono::seconds(30));

  RoundBatch get_messages();
  /// Throws ProtocolError carrying the server's status and error message.
  void submit(const Submission& submission);

  struct RawReply {
    int status = 0;
    std::string body;
  };
  RawReply get_raw();
  RawReply post_raw(const std::string& body);

 private:
  std::string origin_;
  std::string get_path_;
  std::string submit_path_;
  std::chrono::milliseconds timeout_;
};

struct ClientOptions {
  std::size_t window = kDefaultPostsWindow;
  // Keep scoring users after their alarm, for trajectory plots only; the
  // submitted decision stays 1 either way.
  bool track_after_alarm = false;
  // Rewritten after every round when set.
  std::optional<std::filesystem::path> record_path;
  std::chrono::milliseconds http_timeout{30000};
};

/// Participant loop: fetch a round, normalize, window, score, step the
/// policy, submit; until the server reports the last round. A server or
/// classifier failure aborts the run after the partial record is persisted.
RunRecord run(const std::string& server_url, const std::string& token, const std::string& task,
              ProbabilityEstimator& estimator, const PolicyConfig& policy,
              const ClientOptions& options = {},
              nlohmann::json classifier_description = nullptr);

RunRecord run(const std::string& server_url, const std::string& token, const std::string& task,
              const ClassifierSpec& classifier, const PolicyConfig& policy,
              const ClientOptions& options = {});

struct SimulationResult {
  RunRecord record;
  std::vector<FinalDecision> server_decisions;
  nlohmann::json server_snapshot;
};

/// Starts a loopback MockServer over `corpus`, runs the client against it
/// and stops the server.
SimulationResult simulate(const Corpus& corpus, ProbabilityEstimator& estimator,
                          const PolicyConfig& policy, const ClientOptions& options = {},
                          nlohmann::json classifier_description = nullptr,
                          std::optional<std::filesystem::path> runs_dir = std::nullopt,
                          const std::string& token = "simulation");

}  // namespace earlyrisk
