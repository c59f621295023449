#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "earlyrisk/corpus.hpp"

namespace earlyrisk {

struct FinalDecision {
  std::string user_id;
  int decision = 0;  // 1 alarm raised, 0 not
  int delay = 1;     // posts seen when the decision was taken

  friend bool operator==(const FinalDecision&, const FinalDecision&) = default;
};

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  std::size_t tn = 0;

  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct ClassificationReport {
  ConfusionCounts confusion;
  ClassMetrics positive;
  ClassMetrics negative;
  double accuracy = 0.0;
  double macro_p = 0.0;
  double macro_r = 0.0;
  double macro_f1 = 0.0;
  double f1_positive = 0.0;
};

struct LatencyReport {
  std::optional<double> latency_tp;  // median delay over true positives
  std::optional<double> speed;       // median of 1 - penalty(delay)
  double latency_weighted_f1 = 0.0;
};

struct MetricsOptions {
  std::vector<int> erde_o{5, 30, 50};
  std::optional<double> c_fp;  // defaults to the positive prevalence in gold
  double penalty = 0.0078;
};

struct MetricsReport {
  ClassificationReport classification;
  std::map<int, double> erde;
  LatencyReport latency;
  double c_fp = 0.0;
  double penalty = 0.0;
  std::size_t n_users = 0;
};

/// Throws DataError unless `decisions` covers exactly the users in `gold`,
/// each once, with decisions in {0,1} and delays >= 1.
void check_coverage(const std::vector<FinalDecision>& decisions, const GoldLabels& gold);

ConfusionCounts confusion(const std::vector<FinalDecision>& decisions,
                          const GoldLabels& gold);

/// Per-class precision, recall and F1 plus their unweighted means. A class
/// never predicted gets precision 0; F1 is 0 when precision + recall is 0.
ClassificationReport classification_report(const std::vector<FinalDecision>& decisions,
                                           const GoldLabels& gold);

/// Cost of one decision under ERDE-o.
double erde_cost(int decision, int gold, int delay, int o, double c_fp);

/// Mean per-user ERDE-o cost: TN 0, FP c_fp, FN 1, and a TP at delay k pays
/// 1 - 1 / (1 + exp(k - o)). `c_fp` defaults to the gold prevalence.
double erde(const std::vector<FinalDecision>& decisions, const GoldLabels& gold, int o,
            std::optional<double> c_fp = std::nullopt);

double positive_prevalence(const GoldLabels& gold);

/// penalty(k) = -1 + 2 / (1 + exp(-p (k - 1))).
double latency_penalty(int delay, double p);

LatencyReport latency_weighted_f1(const std::vector<FinalDecision>& decisions,
                                  const GoldLabels& gold, double penalty = 0.0078);

MetricsReport evaluate(const std::vector<FinalDecision>& decisions, const GoldLabels& gold,
                       const MetricsOptions& options = {});

nlohmann::json to_json(const MetricsReport& report);
std::string csv_header(const MetricsReport& report);
std::string csv_row(const MetricsReport& report, const std::string& run_name);

}  // namespace earlyrisk
