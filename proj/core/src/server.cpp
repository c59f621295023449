#include "earlyrisk/server.hpp"

#include <algorithm>
#include <cctype>
#include <condition_variable>
#include <thread>

#include <httplib.h>

#include "json_io.hpp"

namespace earlyrisk {

namespace {

constexpr int kBadRequest = 400;
constexpr int kNotFound = 404;
constexpr int kConflict = 409;
constexpr int kUnprocessable = 422;

bool valid_token(const std::string& token) {
  return !token.empty() && token.size() <= 128 &&
         std::all_of(token.begin(), token.end(), [](unsigned char c) {
           return std::isalnum(c) || c == '-' || c == '_' || c == '.';
         }) &&
         token != "." && token != "..";
}

}  // namespace

nlohmann::json RoundBatch::to_json() const {
  auto list = nlohmann::json::array();
  for (const auto& m : messages) list.push_back({{"nick", m.nick}, {"message", m.message}});
  return {{"round", round}, {"terminal", terminal}, {"messages", list}};
}

RoundBatch RoundBatch::from_json(const nlohmann::json& value) {
  RoundBatch batch;
  try {
    batch.round = value.at("round").get<int>();
    batch.terminal = value.at("terminal").get<bool>();
    for (const auto& m : value.at("messages")) {
      batch.messages.push_back(
          {m.at("nick").get<std::string>(), m.at("message").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw ProtocolError(0, std::string("malformed getmessages reply: ") + e.what());
  }
  return batch;
}

nlohmann::json Submission::to_json() const {
  auto list = nlohmann::json::array();
  for (const auto& [nick, d] : decisions) list.push_back({{"nick", nick}, {"decision", d}});
  return {{"round", round}, {"decisions", list}};
}

RoundPlan::RoundPlan(std::shared_ptr<const Corpus> corpus) : corpus_(std::move(corpus)) {
  if (!corpus_ || corpus_->users.empty()) {
    throw PreconditionError("mock server needs a non-empty corpus");
  }
  total_rounds_ = static_cast<int>(corpus_->max_posts());
}

RoundBatch RoundPlan::batch(int round) const {
  RoundBatch b;
  b.round = round;
  if (round > total_rounds_) {
    b.round = total_rounds_ + 1;
    b.terminal = true;
    return b;
  }
  const auto index = static_cast<std::size_t>(round - 1);
  for (const auto& user : corpus_->users) {
    if (index < user.posts.size()) {
      b.messages.push_back({user.user_id, user.posts[index].text});
    }
  }
  return b;
}

EvaluationSession::EvaluationSession(std::shared_ptr<const RoundPlan> plan, std::string token)
    : plan_(std::move(plan)), token_(std::move(token)) {}

RoundBatch EvaluationSession::current_batch() const { return plan_->batch(current_round_); }

Submission EvaluationSession::parse_submission(const std::string& body) const {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw SubmissionError(kBadRequest, std::string("malformed body: ") + e.what());
  }
  if (!j.is_object() || !j.contains("round") || !j["round"].is_number_integer() ||
      !j.contains("decisions") || !j["decisions"].is_array()) {
    throw SubmissionError(kBadRequest,
                          "malformed body: expected {\"round\": int, \"decisions\": [...]}");
  }
  Submission s;
  s.round = j["round"].get<int>();
  for (const auto& d : j["decisions"]) {
    if (!d.is_object() || !d.contains("nick") || !d["nick"].is_string() ||
        !d.contains("decision") || !d["decision"].is_number_integer()) {
      throw SubmissionError(kBadRequest,
                            "malformed body: each decision needs a string 'nick' and an "
                            "integer 'decision'");
    }
    const auto value = d["decision"].get<long long>();
    if (value != 0 && value != 1) {
      throw SubmissionError(kBadRequest, "malformed body: decision must be 0 or 1");
    }
    s.decisions.emplace_back(d["nick"].get<std::string>(), static_cast<int>(value));
  }
  return s;
}

void EvaluationSession::submit(const Submission& submission) {
  if (finished()) throw SubmissionError(kConflict, "run already finished");
  if (submission.round < current_round_) {
    throw SubmissionError(kConflict, "round already submitted");
  }
  if (submission.round != current_round_) {
    throw SubmissionError(kConflict, "wrong round: expected " + std::to_string(current_round_) +
                                         ", got " + std::to_string(submission.round));
  }
  const auto batch = current_batch();
  std::set<std::string> expected;
  for (const auto& m : batch.messages) expected.insert(m.nick);

  std::map<std::string, int> decisions;
  for (const auto& [nick, value] : submission.decisions) {
    if (!expected.contains(nick)) throw SubmissionError(kUnprocessable, "unknown user: " + nick);
    if (!decisions.emplace(nick, value).second) {
      throw SubmissionError(kBadRequest, "duplicate decision for user: " + nick);
    }
  }
  for (const auto& nick : expected) {
    if (!decisions.contains(nick)) throw SubmissionError(kUnprocessable, "missing user: " + nick);
  }
  for (const auto& [nick, value] : decisions) {
    if (value == 0 && flagged_.contains(nick)) {
      throw SubmissionError(kUnprocessable, "sticky decision violated: " + nick);
    }
  }
  for (const auto& [nick, value] : decisions) {
    if (value == 1) flagged_.insert(nick);
  }
  submissions_.push_back(std::move(decisions));
  ++current_round_;
}

std::vector<FinalDecision> EvaluationSession::final_decisions() const {
  std::vector<FinalDecision> out;
  for (const auto& user : plan_->corpus().users) {
    FinalDecision d{user.user_id, 0, 0};
    for (std::size_t r = 0; r < submissions_.size(); ++r) {
      const auto it = submissions_[r].find(user.user_id);
      if (it == submissions_[r].end()) continue;
      d.delay = static_cast<int>(r) + 1;
      if (it->second == 1) {
        d.decision = 1;
        break;
      }
    }
    if (d.delay > 0) out.push_back(std::move(d));
  }
  return out;
}

nlohmann::json EvaluationSession::snapshot() const {
  auto rounds = nlohmann::json::array();
  for (const auto& s : submissions_) rounds.push_back(s);
  return {{"task", plan_->corpus().task_id},
          {"token", token_},
          {"current_round", current_round_},
          {"total_rounds", plan_->total_rounds()},
          {"finished", finished()},
          {"submissions", rounds}};
}

struct MockServer::Impl {
  struct Slot {
    std::mutex mutex;
    EvaluationSession session;
    Slot(std::shared_ptr<const RoundPlan> plan, std::string token)
        : session(std::move(plan), std::move(token)) {}
  };

  std::shared_ptr<const RoundPlan> plan;
  ServerOptions options;
  httplib::Server http;
  std::thread worker;
  int bound_port = -1;

  mutable std::mutex sessions_mutex;
  std::map<std::string, std::shared_ptr<Slot>> sessions;

  std::mutex state_mutex;
  std::condition_variable stopped_cv;
  bool stopped = false;

  std::shared_ptr<Slot> slot(const std::string& token) {
    std::lock_guard lock(sessions_mutex);
    auto& s = sessions[token];
    if (!s) s = std::make_shared<Slot>(plan, token);
    return s;
  }

  std::shared_ptr<Slot> find(const std::string& token) const {
    std::lock_guard lock(sessions_mutex);
    const auto it = sessions.find(token);
    return it == sessions.end() ? nullptr : it->second;
  }

  static void reply_error(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(nlohmann::json{{"error", message}}.dump(), "application/json");
  }

  // Returns false (and fills the response) when the path does not name this
  // task or the token is unusable.
  bool check_route(const httplib::Request& req, httplib::Response& res) const {
    if (req.matches[1] != plan->corpus().task_id) {
      reply_error(res, kNotFound, "unknown task: " + std::string(req.matches[1]));
      return false;
    }
    if (!valid_token(req.matches[2])) {
      reply_error(res, kBadRequest, "invalid token");
      return false;
    }
    return true;
  }

  void persist(const EvaluationSession& session, const std::string& body_decisions) {
    if (!options.runs_dir) return;
    const int round = session.current_round() - 1;
    nlohmann::json record{{"task", plan->corpus().task_id},
                          {"token", session.token()},
                          {"round", round},
                          {"decisions", nlohmann::json::parse(body_decisions)}};
    detail::write_json(*options.runs_dir / session.token() /
                           ("round_" + std::to_string(round) + ".json"),
                       record);
  }

  void install_routes() {
    http.Get(R"(/([^/]+)/getmessages/([^/]+))",
             [this](const httplib::Request& req, httplib::Response& res) {
               if (!check_route(req, res)) return;
               auto s = slot(req.matches[2]);
               std::lock_guard lock(s->mutex);
               res.set_content(s->session.current_batch().to_json().dump(), "application/json");
             });
    http.Post(R"(/([^/]+)/submit/([^/]+))",
              [this](const httplib::Request& req, httplib::Response& res) {
                if (!check_route(req, res)) return;
                auto s = slot(req.matches[2]);
                std::lock_guard lock(s->mutex);
                try {
                  const auto submission = s->session.parse_submission(req.body);
                  s->session.submit(submission);
                  persist(s->session, nlohmann::json::parse(req.body)["decisions"].dump());
                  res.set_content(R"({"status": "ok"})", "application/json");
                } catch (const SubmissionError& e) {
                  reply_error(res, e.status(), e.what());
                } catch (const std::exception& e) {
                  reply_error(res, 500, e.what());
                }
              });
  }
};

MockServer::MockServer(Corpus corpus, ServerOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->plan =
      std::make_shared<const RoundPlan>(std::make_shared<const Corpus>(std::move(corpus)));
  impl_->options = std::move(options);
  impl_->install_routes();
}

MockServer::~MockServer() { stop(); }

void MockServer::start() {
  if (impl_->worker.joinable()) return;
  auto& http = impl_->http;
  const auto& opts = impl_->options;
  if (opts.port == 0) {
    impl_->bound_port = http.bind_to_any_port(opts.host);
  } else {
    impl_->bound_port = http.bind_to_port(opts.host, opts.port) ? opts.port : -1;
  }
  if (impl_->bound_port < 0) {
    throw Error("cannot bind " + opts.host + ":" + std::to_string(opts.port));
  }
  impl_->worker = std::thread([this] { impl_->http.listen_after_bind(); });
  http.wait_until_ready();
}

void MockServer::stop() {
  if (!impl_) return;
  impl_->http.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
  {
    std::lock_guard lock(impl_->state_mutex);
    impl_->stopped = true;
  }
  impl_->stopped_cv.notify_all();
}

void MockServer::wait() {
  std::unique_lock lock(impl_->state_mutex);
  impl_->stopped_cv.wait(lock, [this] { return impl_->stopped; });
}

int MockServer::port() const noexcept { return impl_->bound_port; }

std::string MockServer::url() const {
  return "http://" + impl_->options.host + ":" + std::to_string(impl_->bound_port);
}

const std::string& MockServer::task() const noexcept { return impl_->plan->corpus().task_id; }

int MockServer::total_rounds() const noexcept { return impl_->plan->total_rounds(); }

std::optional<std::vector<FinalDecision>> MockServer::final_decisions(
    const std::string& token) const {
  auto s = impl_->find(token);
  if (!s) return std::nullopt;
  std::lock_guard lock(s->mutex);
  return s->session.final_decisions();
}

std::optional<nlohmann::json> MockServer::snapshot(const std::string& token) const {
  auto s = impl_->find(token);
  if (!s) return std::nullopt;
  std::lock_guard lock(s->mutex);
  return s->session.snapshot();
}

std::unique_ptr<MockServer> serve(Corpus corpus, ServerOptions options) {
  auto server = std::make_unique<MockServer>(std::move(corpus), std::move(options));
  server->start();
  return server;
}

}  // namespace earlyrisk
