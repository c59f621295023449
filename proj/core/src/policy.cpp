#include "earlyrisk/policy.hpp"

#include <algorithm>
#include <cmath>

#include "earlyrisk/errors.hpp"

namespace earlyrisk {

void PolicyConfig::validate() const {
  if (window && *window < 1) throw PreconditionError("policy window must be >= 1 or 'all'");
  if (tolerance < 1) throw PreconditionError("policy tolerance must be >= 1");
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw PreconditionError("policy threshold must be in (0, 1)");
  }
  if (min_delay < 0) throw PreconditionError("policy min_delay must be >= 0");
}

nlohmann::json PolicyConfig::to_json() const {
  return {{"window", window ? nlohmann::json(*window) : nlohmann::json("all")},
          {"tolerance", tolerance},
          {"threshold", threshold},
          {"min_delay", min_delay}};
}

PolicyConfig PolicyConfig::from_json(const nlohmann::json& value) {
  if (value.is_string()) return preset(value.get<std::string>());
  if (!value.is_object()) throw DataError("policy config must be an object or a preset name");
  PolicyConfig cfg;
  try {
    if (value.contains("preset")) cfg = preset(value["preset"].get<std::string>());
    if (value.contains("window")) {
      const auto& w = value["window"];
      if (w.is_string()) {
        if (w.get<std::string>() != "all") {
          throw DataError("policy window must be an integer or \"all\"");
        }
        cfg.window.reset();
      } else {
        cfg.window = w.get<int>();
      }
    }
    cfg.tolerance = value.value("tolerance", cfg.tolerance);
    cfg.threshold = value.value("threshold", cfg.threshold);
    cfg.min_delay = value.value("min_delay", cfg.min_delay);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("policy config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

PolicyConfig PolicyConfig::preset(const std::string& name) {
  if (name == "historic_rule_t1") return {std::nullopt, 5, 0.7, 5};
  if (name == "historic_rule_t2") return {std::nullopt, 10, 0.7, 10};
  throw PreconditionError("unknown policy preset '" + name +
                          "' (historic_rule_t1|historic_rule_t2)");
}

PolicyAction policy_step(PolicyState& state, const PolicyConfig& config,
                         ProbabilityEstimate p, int round) {
  if (state.decided()) {
    throw PreconditionError("policy_step on a user already decided at round " +
                            std::to_string(*state.decision_round_));
  }
  if (round != static_cast<int>(state.history_.size()) + 1) {
    throw PreconditionError("policy_step: expected round " +
                            std::to_string(state.history_.size() + 1) + ", got " +
                            std::to_string(round));
  }
  auto& history = state.history_;
  history.push_back(p.value());

  if (static_cast<int>(history.size()) <= config.min_delay) return PolicyAction::proceed;
  if (!(p.value() > config.threshold)) return PolicyAction::proceed;

  auto first = history.begin();
  if (config.window && static_cast<std::size_t>(*config.window) < history.size()) {
    first = history.end() - *config.window;
  }
  const auto above = std::count_if(first, history.end(),
                                   [&](double v) { return v > config.threshold; });
  if (above < config.tolerance) return PolicyAction::proceed;

  state.decision_round_ = round;
  return PolicyAction::alarm;
}

UserDecision finalize(const PolicyState& state, int total_rounds) {
  if (state.decided()) return {1, *state.decision_round()};
  if (total_rounds < 1) throw PreconditionError("finalize: total_rounds must be >= 1");
  return {0, total_rounds};
}

}  // namespace earlyrisk
