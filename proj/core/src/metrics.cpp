#include "earlyrisk/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "earlyrisk/errors.hpp"

namespace earlyrisk {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

ClassMetrics class_metrics(std::size_t tp, std::size_t fp, std::size_t fn) {
  ClassMetrics m;
  m.precision = ratio(tp, tp + fp);
  m.recall = ratio(tp, tp + fn);
  const double sum = m.precision + m.recall;
  m.f1 = sum > 0.0 ? 2.0 * m.precision * m.recall / sum : 0.0;
  return m;
}

}  // namespace

void check_coverage(const std::vector<FinalDecision>& decisions, const GoldLabels& gold) {
  std::set<std::string> seen;
  for (const auto& d : decisions) {
    if (!seen.insert(d.user_id).second) {
      throw DataError("duplicate decision for user '" + d.user_id + "'");
    }
    if (!gold.contains(d.user_id)) {
      throw DataError("decision for user '" + d.user_id + "' not present in gold labels");
    }
    if (d.decision != 0 && d.decision != 1) {
      throw DataError("decision for user '" + d.user_id + "' must be 0 or 1");
    }
    if (d.delay < 1) throw DataError("delay for user '" + d.user_id + "' must be >= 1");
  }
  for (const auto& [user, label] : gold) {
    if (!seen.contains(user)) throw DataError("no decision for gold user '" + user + "'");
  }
}

ConfusionCounts confusion(const std::vector<FinalDecision>& decisions,
                          const GoldLabels& gold) {
  check_coverage(decisions, gold);
  ConfusionCounts c;
  for (const auto& d : decisions) {
    const int truth = gold.at(d.user_id);
    if (d.decision == 1) {
      (truth == 1 ? c.tp : c.fp)++;
    } else {
      (truth == 1 ? c.fn : c.tn)++;
    }
  }
  return c;
}

ClassificationReport classification_report(const std::vector<FinalDecision>& decisions,
                                           const GoldLabels& gold) {
  ClassificationReport r;
  r.confusion = confusion(decisions, gold);
  const auto& c = r.confusion;
  r.positive = class_metrics(c.tp, c.fp, c.fn);
  r.negative = class_metrics(c.tn, c.fn, c.fp);
  r.accuracy = ratio(c.tp + c.tn, c.tp + c.tn + c.fp + c.fn);
  r.macro_p = (r.positive.precision + r.negative.precision) / 2.0;
  r.macro_r = (r.positive.recall + r.negative.recall) / 2.0;
  r.macro_f1 = (r.positive.f1 + r.negative.f1) / 2.0;
  r.f1_positive = r.positive.f1;
  return r;
}

double erde_cost(int decision, int gold, int delay, int o, double c_fp) {
  if (decision == 1 && gold == 1) {
    return 1.0 - 1.0 / (1.0 + std::exp(static_cast<double>(delay) - o));
  }
  if (decision == 1) return c_fp;
  if (gold == 1) return 1.0;
  return 0.0;
}

double positive_prevalence(const GoldLabels& gold) {
  std::size_t pos = 0;
  for (const auto& [user, label] : gold) pos += label == 1 ? 1 : 0;
  return ratio(pos, gold.size());
}

double erde(const std::vector<FinalDecision>& decisions, const GoldLabels& gold, int o,
            std::optional<double> c_fp) {
  check_coverage(decisions, gold);
  if (o < 1) throw PreconditionError("erde: o must be a positive integer");
  if (c_fp && !(*c_fp > 0.0 && *c_fp <= 1.0)) {
    throw PreconditionError("erde: c_fp must be in (0, 1]");
  }
  const double cost_fp = c_fp.value_or(positive_prevalence(gold));
  double sum = 0.0;
  for (const auto& d : decisions) {
    sum += erde_cost(d.decision, gold.at(d.user_id), d.delay, o, cost_fp);
  }
  return sum / static_cast<double>(decisions.size());
}

double latency_penalty(int delay, double p) {
  return -1.0 + 2.0 / (1.0 + std::exp(-p * (static_cast<double>(delay) - 1.0)));
}

LatencyReport latency_weighted_f1(const std::vector<FinalDecision>& decisions,
                                  const GoldLabels& gold, double penalty) {
  if (!(penalty > 0.0)) throw PreconditionError("latency penalty must be positive");
  const auto report = classification_report(decisions, gold);
  std::vector<double> delays;
  std::vector<double> speeds;
  for (const auto& d : decisions) {
    if (d.decision == 1 && gold.at(d.user_id) == 1) {
      delays.push_back(static_cast<double>(d.delay));
      speeds.push_back(1.0 - latency_penalty(d.delay, penalty));
    }
  }
  LatencyReport r;
  if (delays.empty()) return r;
  r.latency_tp = median(delays);
  r.speed = median(speeds);
  r.latency_weighted_f1 = report.f1_positive * *r.speed;
  return r;
}

MetricsReport evaluate(const std::vector<FinalDecision>& decisions, const GoldLabels& gold,
                       const MetricsOptions& options) {
  MetricsReport r;
  r.classification = classification_report(decisions, gold);
  r.c_fp = options.c_fp.value_or(positive_prevalence(gold));
  r.penalty = options.penalty;
  for (int o : options.erde_o) r.erde[o] = erde(decisions, gold, o, options.c_fp);
  r.latency = latency_weighted_f1(decisions, gold, options.penalty);
  r.n_users = decisions.size();
  return r;
}

nlohmann::json to_json(const MetricsReport& r) {
  const auto& c = r.classification;
  nlohmann::json erde_values = nlohmann::json::object();
  for (const auto& [o, v] : r.erde) erde_values[std::to_string(o)] = v;
  auto optional = [](const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json();
  };
  return {{"n_users", r.n_users},
          {"confusion",
           {{"tp", c.confusion.tp}, {"fp", c.confusion.fp},
            {"fn", c.confusion.fn}, {"tn", c.confusion.tn}}},
          {"accuracy", c.accuracy},
          {"macro_p", c.macro_p},
          {"macro_r", c.macro_r},
          {"macro_f1", c.macro_f1},
          {"precision_positive", c.positive.precision},
          {"recall_positive", c.positive.recall},
          {"f1_positive", c.f1_positive},
          {"erde", erde_values},
          {"c_fp", r.c_fp},
          {"latency_tp", optional(r.latency.latency_tp)},
          {"speed", optional(r.latency.speed)},
          {"penalty", r.penalty},
          {"latency_weighted_f1", r.latency.latency_weighted_f1}};
}

std::string csv_header(const MetricsReport& report) {
  std::ostringstream out;
  out << "run,accuracy,macro_p,macro_r,macro_f1,f1_positive";
  for (const auto& [o, v] : report.erde) out << ",erde_" << o;
  out << ",latency_tp,speed,latency_weighted_f1";
  return out.str();
}

std::string csv_row(const MetricsReport& r, const std::string& run_name) {
  std::ostringstream out;
  out << std::setprecision(6) << std::fixed;
  const auto& c = r.classification;
  out << run_name << ',' << c.accuracy << ',' << c.macro_p << ',' << c.macro_r << ','
      << c.macro_f1 << ',' << c.f1_positive;
  for (const auto& [o, v] : r.erde) out << ',' << v;
  out << ',';
  if (r.latency.latency_tp) out << *r.latency.latency_tp;
  out << ',';
  if (r.latency.speed) out << *r.latency.speed;
  out << ',' << r.latency.latency_weighted_f1;
  return out.str();
}

}  // namespace earlyrisk
