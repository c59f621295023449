#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "earlyrisk/classifier.hpp"

namespace earlyrisk {

// Historic rule: raise the alarm once the current prediction exceeds
// `threshold` and at least `tolerance` of the predictions in the window
// (current one included) do too. The rule is inactive for the first
// `min_delay` predictions.
struct PolicyConfig {
  std::optional<int> window;  // nullopt: every past prediction
  int tolerance = 5;
  double threshold = 0.7;
  int min_delay = 5;

  void validate() const;

  nlohmann::json to_json() const;
  /// Accepts an object with the fields above (window may be "all") or a
  /// preset name string.
  static PolicyConfig from_json(const nlohmann::json& value);

  /// "historic_rule_t1" or "historic_rule_t2".
  static PolicyConfig preset(const std::string& name);

  friend bool operator==(const PolicyConfig&, const PolicyConfig&) = default;
};

enum class PolicyAction { proceed, alarm };

class PolicyState {
 public:
  const std::vector<double>& history() const noexcept { return history_; }
  bool decided() const noexcept { return decision_round_.has_value(); }
  std::optional<int> decision_round() const noexcept { return decision_round_; }

 private:
  friend PolicyAction policy_step(PolicyState&, const PolicyConfig&,
                                  ProbabilityEstimate, int);
  std::vector<double> history_;
  std::optional<int> decision_round_;
};

/// Consumes the prediction for `round`, which must equal
/// history().size() + 1. Stepping a decided state throws PreconditionError.
PolicyAction policy_step(PolicyState& state, const PolicyConfig& config,
                         ProbabilityEstimate p, int round);

struct UserDecision {
  int decision = 0;  // 1 positive, 0 negative
  int delay = 1;

  friend bool operator==(const UserDecision&, const UserDecision&) = default;
};

/// Closes a user's stream: positive at the alarm round, otherwise negative
/// with delay `total_rounds`.
UserDecision finalize(const PolicyState& state, int total_rounds);

}  // namespace earlyrisk
