#include "earlyrisk/client.hpp"

#include <algorithm>

#include <httplib.h>

#include "earlyrisk/errors.hpp"
#include "http_util.hpp"
#include "json_io.hpp"

namespace earlyrisk {

NormalizedText build_input(std::span<const NormalizedText> history, std::size_t window) {
  if (history.empty()) throw PreconditionError("build_input: empty history");
  if (window == 0) throw PreconditionError("build_input: window must be >= 1");
  const auto first = history.size() - std::min(window, history.size());
  std::string out;
  for (auto i = first; i < history.size(); ++i) {
    if (i != first) out += ' ';
    out += history[i].str();
  }
  return NormalizedText(std::move(out));
}

nlohmann::json RunRecord::to_json() const {
  nlohmann::json users_json = nlohmann::json::object();
  for (const auto& [id, user] : users) {
    auto trajectory = nlohmann::json::array();
    for (const auto& pt : user.trajectory) {
      trajectory.push_back({{"round", pt.round},
                            {"p_positive", pt.p_positive ? nlohmann::json(*pt.p_positive)
                                                         : nlohmann::json()},
                            {"decision", pt.decision}});
    }
    nlohmann::json final_json;
    if (user.final) final_json = {{"decision", user.final->decision}, {"delay", user.final->delay}};
    users_json[id] = {{"trajectory", trajectory}, {"final", final_json}};
  }
  auto rounds_json = nlohmann::json::array();
  for (const auto& r : rounds) {
    rounds_json.push_back(
        {{"round", r.round}, {"n_users", r.n_users}, {"duration_ms", r.duration_ms}});
  }
  return {{"format", "earlyrisk-run/1"},
          {"task", task},
          {"token", token},
          {"complete", complete},
          {"config", config},
          {"users", users_json},
          {"timing", {{"rounds", rounds_json}, {"total_duration_ms", total_duration_ms}}}};
}

RunRecord RunRecord::from_json(const nlohmann::json& value) {
  RunRecord r;
  try {
    r.task = value.at("task").get<std::string>();
    r.token = value.at("token").get<std::string>();
    r.complete = value.value("complete", false);
    r.config = value.value("config", nlohmann::json::object());
    for (const auto& [id, user] : value.at("users").items()) {
      UserRun u;
      for (const auto& pt : user.at("trajectory")) {
        TrajectoryPoint p;
        p.round = pt.at("round").get<int>();
        if (!pt.at("p_positive").is_null()) p.p_positive = pt["p_positive"].get<double>();
        p.decision = pt.at("decision").get<int>();
        u.trajectory.push_back(p);
      }
      if (const auto& f = user.at("final"); !f.is_null()) {
        u.final = UserDecision{f.at("decision").get<int>(), f.at("delay").get<int>()};
      }
      r.users.emplace(id, std::move(u));
    }
    if (value.contains("timing")) {
      const auto& timing = value["timing"];
      for (const auto& rt : timing.at("rounds")) {
        r.rounds.push_back({rt.at("round").get<int>(), rt.at("n_users").get<std::size_t>(),
                            rt.at("duration_ms").get<double>()});
      }
      r.total_duration_ms = timing.value("total_duration_ms", 0.0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("run record: ") + e.what());
  }
  return r;
}

void RunRecord::save(const std::filesystem::path& path) const {
  detail::write_json(path, to_json());
}

RunRecord RunRecord::load(const std::filesystem::path& path) {
  return from_json(detail::parse_json(detail::read_file(path), path.string()));
}

bool RunRecord::same_outcome(const RunRecord& other) const {
  return task == other.task && token == other.token && config == other.config &&
         users == other.users && complete == other.complete;
}

std::vector<FinalDecision> final_decisions(const RunRecord& record) {
  std::vector<FinalDecision> out;
  for (const auto& [id, user] : record.users) {
    if (!user.final) throw DataError("user '" + id + "' was never finalized");
    out.push_back({id, user.final->decision, user.final->delay});
  }
  return out;
}

std::vector<std::pair<int, double>> plot_rows(const RunRecord& record,
                                              const std::string& user_id) {
  const auto it = record.users.find(user_id);
  if (it == record.users.end()) throw DataError("no user '" + user_id + "' in run record");
  std::vector<std::pair<int, double>> rows;
  for (const auto& pt : it->second.trajectory) {
    if (pt.p_positive) rows.emplace_back(pt.round, *pt.p_positive);
  }
  return rows;
}

ProtocolClient::ProtocolClient(const std::string& server_url, std::string task,
                               std::string token, std::chrono::milliseconds timeout)
    : timeout_(timeout) {
  const auto url = detail::split_url(server_url);
  origin_ = url.origin;
  get_path_ = url.path + "/" + task + "/getmessages/" + token;
  submit_path_ = url.path + "/" + task + "/submit/" + token;
}

namespace {

httplib::Client make_client(const std::string& origin, std::chrono::milliseconds timeout) {
  httplib::Client client(origin);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  return client;
}

std::string error_message(const std::string& body) {
  try {
    const auto j = nlohmann::json::parse(body);
    if (j.is_object() && j.contains("error") && j["error"].is_string()) {
      return j["error"].get<std::string>();
    }
  } catch (const nlohmann::json::exception&) {
  }
  return body;
}

}  // namespace

ProtocolClient::RawReply ProtocolClient::get_raw() {
  auto client = make_client(origin_, timeout_);
  auto res = client.Get(get_path_);
  if (!res) {
    throw ProtocolError(0, "GET " + origin_ + get_path_ + " failed: " +
                               httplib::to_string(res.error()));
  }
  return {res->status, res->body};
}

ProtocolClient::RawReply ProtocolClient::post_raw(const std::string& body) {
  auto client = make_client(origin_, timeout_);
  auto res = client.Post(submit_path_, body, "application/json");
  if (!res) {
    throw ProtocolError(0, "POST " + origin_ + submit_path_ + " failed: " +
                               httplib::to_string(res.error()));
  }
  return {res->status, res->body};
}

RoundBatch ProtocolClient::get_messages() {
  const auto reply = get_raw();
  if (reply.status != 200) {
    throw ProtocolError(reply.status, "getmessages: HTTP " + std::to_string(reply.status) +
                                          ": " + error_message(reply.body));
  }
  try {
    return RoundBatch::from_json(nlohmann::json::parse(reply.body));
  } catch (const nlohmann::json::parse_error& e) {
    throw ProtocolError(reply.status, std::string("getmessages: invalid JSON: ") + e.what());
  }
}

void ProtocolClient::submit(const Submission& submission) {
  const auto reply = post_raw(submission.to_json().dump());
  if (reply.status != 200) {
    throw ProtocolError(reply.status, "submit round " + std::to_string(submission.round) +
                                          ": HTTP " + std::to_string(reply.status) + ": " +
                                          error_message(reply.body));
  }
}

namespace {

struct UserProgress {
  std::vector<NormalizedText> posts;
  PolicyState policy;
  UserRun* record = nullptr;
};

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since)
      .count();
}

}  // namespace

RunRecord run(const std::string& server_url, const std::string& token, const std::string& task,
              ProbabilityEstimator& estimator, const PolicyConfig& policy,
              const ClientOptions& options, nlohmann::json classifier_description) {
  policy.validate();
  if (options.window == 0) throw PreconditionError("posts window must be >= 1");

  RunRecord record;
  record.task = task;
  record.token = token;
  record.config = {{"policy", policy.to_json()},
                   {"classifier", classifier_description},
                   {"window", options.window},
                   {"track_after_alarm", options.track_after_alarm}};

  ProtocolClient client(server_url, task, token, options.http_timeout);
  std::map<std::string, UserProgress> progress;
  const auto started = std::chrono::steady_clock::now();
  int expected_round = 1;

  auto persist = [&] {
    record.total_duration_ms = elapsed_ms(started);
    if (options.record_path) record.save(*options.record_path);
  };

  try {
    while (true) {
      const auto batch = client.get_messages();
      if (batch.terminal) break;
      if (batch.round != expected_round) {
        throw ProtocolError(0, "server sent round " + std::to_string(batch.round) +
                                   ", expected " + std::to_string(expected_round));
      }
      const auto round_started = std::chrono::steady_clock::now();

      std::vector<ScoringRequest> requests;
      std::vector<UserProgress*> scored;
      for (const auto& msg : batch.messages) {
        auto& user = progress[msg.nick];
        if (!user.record) user.record = &record.users[msg.nick];
        user.posts.push_back(normalize(msg.message));
        if (user.policy.decided() && !options.track_after_alarm) continue;
        requests.push_back({msg.nick, build_input(user.posts, options.window)});
        scored.push_back(&user);
      }

      std::vector<ProbabilityEstimate> estimates;
      if (!requests.empty()) {
        estimates = estimator.predict(requests);
        if (estimates.size() != requests.size()) {
          throw ClassifierError("estimator returned " + std::to_string(estimates.size()) +
                                    " estimates for " + std::to_string(requests.size()) +
                                    " inputs",
                                false);
        }
      }
      for (std::size_t i = 0; i < scored.size(); ++i) {
        auto& user = *scored[i];
        if (!user.policy.decided()) {
          policy_step(user.policy, policy, estimates[i],
                      static_cast<int>(user.policy.history().size()) + 1);
        }
        user.record->trajectory.push_back(
            {batch.round, estimates[i].value(), user.policy.decided() ? 1 : 0});
      }

      Submission submission;
      submission.round = batch.round;
      for (const auto& msg : batch.messages) {
        auto& user = progress[msg.nick];
        const int decision = user.policy.decided() ? 1 : 0;
        auto& trajectory = user.record->trajectory;
        if (trajectory.empty() || trajectory.back().round != batch.round) {
          trajectory.push_back({batch.round, std::nullopt, decision});
        }
        submission.decisions.emplace_back(msg.nick, decision);
      }
      client.submit(submission);

      record.rounds.push_back({batch.round, batch.messages.size(), elapsed_ms(round_started)});
      persist();
      ++expected_round;
    }
  } catch (...) {
    persist();
    throw;
  }

  for (auto& [id, user] : progress) {
    user.record->final =
        finalize(user.policy, static_cast<int>(user.record->trajectory.size()));
  }
  record.complete = true;
  persist();
  return record;
}

RunRecord run(const std::string& server_url, const std::string& token, const std::string& task,
              const ClassifierSpec& classifier, const PolicyConfig& policy,
              const ClientOptions& options) {
  auto estimator = make_estimator(classifier);
  return run(server_url, token, task, *estimator, policy, options, classifier.to_json());
}

SimulationResult simulate(const Corpus& corpus, ProbabilityEstimator& estimator,
                          const PolicyConfig& policy, const ClientOptions& options,
                          nlohmann::json classifier_description,
                          std::optional<std::filesystem::path> runs_dir,
                          const std::string& token) {
  ServerOptions server_options;
  server_options.runs_dir = std::move(runs_dir);
  MockServer server(corpus, server_options);
  server.start();
  SimulationResult result;
  result.record = run(server.url(), token, corpus.task_id, estimator, policy, options,
                      std::move(classifier_description));
  result.server_decisions = server.final_decisions(token).value_or(std::vector<FinalDecision>{});
  result.server_snapshot = server.snapshot(token).value_or(nlohmann::json());
  server.stop();
  return result;
}

}  // namespace earlyrisk
