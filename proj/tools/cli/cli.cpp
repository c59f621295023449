#include "cli.hpp"

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "earlyrisk/classifier.hpp"
#include "earlyrisk/client.hpp"
#include "earlyrisk/corpus.hpp"
#include "earlyrisk/errors.hpp"
#include "earlyrisk/metrics.hpp"
#include "earlyrisk/policy.hpp"
#include "earlyrisk/preprocess.hpp"
#include "earlyrisk/server.hpp"
#include "earlyrisk/wordconf.hpp"

#ifndef EARLYRISK_VERSION
#define EARLYRISK_VERSION "0.0.0"
#endif

namespace earlyrisk::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::atomic<bool> g_interrupted{false};

extern "C" void on_signal(int) { g_interrupted = true; }

// Turns a JSON config object into flags placed right after the subcommand
// name, so anything given explicitly on the command line comes later and
// wins under the take-last policy.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  if (args.empty()) return args;
  std::optional<std::string> config_path;
  std::vector<std::string> rest{args.front()};
  for (std::size_t i = 1; i < args.size(); ++i) {
    const auto& a = args[i];
    if (a == "--config") {
      if (i + 1 >= args.size()) throw CLI::ArgumentMismatch("--config needs a file argument");
      config_path = args[++i];
    } else if (a.starts_with("--config=")) {
      config_path = a.substr(9);
    } else {
      rest.push_back(a);
    }
  }
  if (!config_path) return rest;

  std::ifstream in(*config_path);
  if (!in) throw CLI::ValidationError("--config", "cannot open " + *config_path);
  json config;
  try {
    in >> config;
  } catch (const json::exception& e) {
    throw CLI::ValidationError("--config", e.what());
  }
  if (!config.is_object()) throw CLI::ValidationError("--config", "must hold a JSON object");

  std::vector<std::string> expanded{rest.front()};
  for (const auto& [key, value] : config.items()) {
    std::string flag = "--" + key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    if (value.is_boolean()) {
      if (value.get<bool>()) expanded.push_back(flag);
      continue;
    }
    std::string text;
    if (value.is_string()) {
      text = value.get<std::string>();
    } else if (value.is_array()) {
      for (const auto& v : value) {
        if (!text.empty()) text += ',';
        text += v.is_string() ? v.get<std::string>() : v.dump();
      }
    } else if (value.is_object()) {
      // Inline policy or classifier objects are written to a temp file.
      auto tmp = fs::temp_directory_path() /
                 ("earlyrisk_cfg_" + std::to_string(std::hash<std::string>{}(value.dump())) +
                  ".json");
      std::ofstream(tmp) << value.dump();
      text = tmp.string();
    } else {
      text = value.dump();
    }
    expanded.push_back(flag);
    expanded.push_back(text);
  }
  expanded.insert(expanded.end(), rest.begin() + 1, rest.end());
  return expanded;
}

PolicyConfig resolve_policy(const std::string& arg) {
  if (arg.starts_with("historic_rule_")) return PolicyConfig::preset(arg);
  std::ifstream in(arg);
  if (!in) throw PreconditionError("policy '" + arg + "' is neither a preset nor a readable file");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw DataError(arg + ": " + e.what());
  }
  return PolicyConfig::from_json(j);
}

std::vector<int> parse_int_list(const std::string& text) {
  std::vector<int> out;
  std::stringstream in(text);
  for (std::string item; std::getline(in, item, ',');) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw PreconditionError("expected a comma-separated list of positive integers, got '" +
                              text + "'");
    }
  }
  if (out.empty()) throw PreconditionError("empty integer list");
  return out;
}

Corpus normalized_copy(Corpus corpus) {
  for (auto& user : corpus.users) {
    for (auto& post : user.posts) post.text = normalize(post.text).str();
  }
  return corpus;
}

struct Common {
  bool json_output = false;
};

void add_common(CLI::App* sub, Common& common) {
  sub->add_flag("--json", common.json_output, "Machine-readable JSON output");
  sub->option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
}

}  // namespace

int dispatch(const std::vector<std::string>& raw_args, std::istream& in, std::ostream& out,
             std::ostream& err) {
  for (const auto& a : raw_args) {
    if (a == "--version") {
      out << "earlyrisk " << EARLYRISK_VERSION << "\n";
      return kOk;
    }
  }

  CLI::App app{"Early risk detection harness: corpus tools, mock evaluation server, client "
               "runner and metrics",
               "earlyrisk"};
  app.require_subcommand(1);
  app.set_version_flag("--version", EARLYRISK_VERSION);
  Common common;

  std::function<int()> action;

  // stats
  std::string corpus_path;
  std::string split_name = "train";
  std::string task_id;
  auto* stats = app.add_subcommand("stats", "Corpus statistics (users, posts, words per post)");
  add_common(stats, common);
  stats->add_option("--corpus", corpus_path, "Corpus JSON file")->required();
  stats->add_option("--split", split_name, "train|trial|test")->capture_default_str();
  stats->callback([&] {
    action = [&] {
      const auto corpus = load_corpus(corpus_path, parse_split(split_name));
      out << stats_to_json(corpus_stats(corpus)).dump(common.json_output ? -1 : 2) << "\n";
      return kOk;
    };
  });

  // preprocess
  auto* pre = app.add_subcommand("preprocess", "Normalize lines read from standard input");
  add_common(pre, common);
  pre->callback([&] {
    action = [&] {
      json lines = json::array();
      for (std::string line; std::getline(in, line);) {
        auto text = normalize(line).str();
        if (common.json_output) {
          lines.push_back(std::move(text));
        } else {
          out << text << "\n";
        }
      }
      if (common.json_output) out << lines.dump() << "\n";
      return kOk;
    };
  });

  // train-ss3
  std::string model_out;
  double smoothing = 1.0;
  int parts = 3;
  bool no_augment = false;
  double valid_fraction = 0.0;
  std::uint64_t seed = 7;
  auto* train = app.add_subcommand("train-ss3", "Fit the word-confidence model on a corpus");
  add_common(train, common);
  train->add_option("--corpus", corpus_path, "Labeled corpus JSON file")->required();
  train->add_option("--out", model_out, "Model JSON output path")->required();
  train->add_option("--split", split_name, "train|trial|test")->capture_default_str();
  train->add_option("--smoothing", smoothing, "Additive smoothing")->capture_default_str();
  train->add_option("--parts", parts, "Slices per user history for augmentation")
      ->capture_default_str();
  train->add_flag("--no-augment", no_augment, "Train on whole histories only");
  train->add_option("--valid-fraction", valid_fraction,
                    "Hold out this stratified fraction and report its F1+");
  train->add_option("--seed", seed, "Seed for the train/valid split")->capture_default_str();
  train->callback([&] {
    action = [&] {
      const auto corpus = normalized_copy(load_corpus(corpus_path, parse_split(split_name)));
      std::vector<LabeledSample> samples;
      if (no_augment) {
        for (const auto& u : corpus.users) {
          if (u.label != Label::unknown) samples.push_back(whole_history_sample(u));
        }
      } else {
        samples = build_training_samples(corpus, parts);
      }
      json summary{{"samples", samples.size()}};
      std::vector<LabeledSample> fit_on = samples;
      std::vector<LabeledSample> held_out;
      if (valid_fraction > 0.0) {
        auto split = train_valid_split(samples, valid_fraction, seed);
        if (!split.stratified) err << "warning: single-class input, split is not stratified\n";
        fit_on = std::move(split.train);
        held_out = std::move(split.valid);
      }
      const auto model = WordConfModel::fit(fit_on, smoothing);
      model.save(model_out);
      summary["train_samples"] = fit_on.size();
      summary["vocabulary_size"] = model.vocabulary_size();
      summary["model"] = model_out;
      if (!held_out.empty()) {
        std::vector<FinalDecision> decisions;
        GoldLabels gold;
        for (std::size_t i = 0; i < held_out.size(); ++i) {
          const auto id = std::to_string(i);
          const double p = model.score_text(NormalizedText(held_out[i].text));
          decisions.push_back({id, p > 0.5 ? 1 : 0, 1});
          gold[id] = held_out[i].label == Label::positive ? 1 : 0;
        }
        const auto report = classification_report(decisions, gold);
        summary["valid_samples"] = held_out.size();
        summary["valid_f1_positive"] = report.f1_positive;
      }
      if (common.json_output) {
        out << summary.dump() << "\n";
      } else {
        out << "wrote " << model_out << ": " << model.vocabulary_size() << " tokens from "
            << fit_on.size() << " samples";
        if (summary.contains("valid_f1_positive")) {
          out << ", valid F1+ " << summary["valid_f1_positive"].get<double>();
        }
        out << "\n";
      }
      return kOk;
    };
  });

  // extract-vocab
  std::string model_path;
  std::size_t top_k = kDefaultVocabularySize;
  auto* vocab = app.add_subcommand("extract-vocab", "Top positive-class words of a model");
  add_common(vocab, common);
  vocab->add_option("--model", model_path, "Model JSON file")->required();
  vocab->add_option("-k,--top", top_k, "Number of words")->capture_default_str();
  vocab->callback([&] {
    action = [&] {
      const auto model = WordConfModel::load(model_path);
      const auto words = model.extract_vocabulary(top_k);
      if (common.json_output) {
        json list = json::array();
        for (const auto& w : words) list.push_back({{"token", w.token}, {"confidence", w.confidence}});
        out << list.dump() << "\n";
      } else {
        out << std::setprecision(6) << std::fixed;
        for (const auto& w : words) out << w.token << "\t" << w.confidence << "\n";
      }
      return kOk;
    };
  });

  // serve
  int port = 0;
  std::string host = "127.0.0.1";
  std::string runs_dir = "runs";
  auto* srv = app.add_subcommand("serve", "Run the mock evaluation server over a corpus");
  add_common(srv, common);
  srv->add_option("--corpus", corpus_path, "Corpus JSON file")->required();
  srv->add_option("--port", port, "TCP port (0 picks a free one)")->capture_default_str();
  srv->add_option("--host", host, "Bind address")->capture_default_str();
  srv->add_option("--split", split_name, "train|trial|test")->capture_default_str();
  srv->add_option("--task", task_id, "Task id used in URLs (default: corpus file stem)");
  srv->add_option("--runs-dir", runs_dir, "Submission snapshot directory")->capture_default_str();
  srv->callback([&] {
    action = [&] {
      auto corpus = load_corpus(corpus_path, parse_split(split_name),
                                task_id.empty() ? std::nullopt : std::optional(task_id));
      ServerOptions options{host, port, fs::path(runs_dir)};
      MockServer server(std::move(corpus), options);
      server.start();
      const json info{{"url", server.url()},
                      {"task", server.task()},
                      {"total_rounds", server.total_rounds()}};
      if (common.json_output) {
        out << info.dump() << std::endl;
      } else {
        out << "serving task '" << server.task() << "' (" << server.total_rounds()
            << " rounds) at " << server.url() << std::endl;
      }
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
      server.stop();
      return kOk;
    };
  });

  // run / simulate share these.
  std::string server_url;
  std::string token = "earlyrisk";
  std::string classifier_arg;
  std::string policy_arg = "historic_rule_t1";
  std::size_t window = kDefaultPostsWindow;
  std::string record_out;
  bool track_after_alarm = false;
  int timeout_ms = 30000;
  int max_batch = 64;
  std::string erde_list = "5,30,50";
  std::optional<double> c_fp;
  double penalty = 0.0078;

  auto make_classifier = [&] {
    auto spec = ClassifierSpec::parse(classifier_arg);
    spec.timeout_ms = timeout_ms;
    spec.max_batch = max_batch;
    spec.validate();
    return spec;
  };
  auto metrics_options = [&] {
    MetricsOptions m;
    m.erde_o = parse_int_list(erde_list);
    m.c_fp = c_fp;
    m.penalty = penalty;
    return m;
  };
  auto add_client_flags = [&](CLI::App* sub) {
    sub->add_option("--classifier", classifier_arg,
                    "builtin:<model.json> | external:<url> | constant:<p> | oracle:<gold.json>")
        ->required();
    sub->add_option("--policy", policy_arg, "historic_rule_t1 | historic_rule_t2 | <config.json>")
        ->capture_default_str();
    sub->add_option("--window", window, "Posts window size")->capture_default_str();
    sub->add_option("--token", token, "Participant token")->capture_default_str();
    sub->add_flag("--track-after-alarm", track_after_alarm,
                  "Keep scoring users after their alarm (trajectory plots)");
    sub->add_option("--timeout-ms", timeout_ms, "External classifier timeout")
        ->capture_default_str();
    sub->add_option("--max-batch", max_batch, "External classifier batch size")
        ->capture_default_str();
  };
  auto client_options = [&](std::optional<fs::path> path) {
    ClientOptions o;
    o.window = window;
    o.track_after_alarm = track_after_alarm;
    o.record_path = std::move(path);
    return o;
  };

  auto* runner = app.add_subcommand("run", "Participate in a run against an evaluation server");
  add_common(runner, common);
  runner->add_option("--server", server_url, "Server base URL")->required();
  runner->add_option("--task", task_id, "Task id")->required();
  runner->add_option("--out", record_out, "Run record path (default runs/<token>/run.json)");
  add_client_flags(runner);
  runner->callback([&] {
    action = [&] {
      const auto spec = make_classifier();
      const auto policy = resolve_policy(policy_arg);
      const fs::path path =
          record_out.empty() ? fs::path("runs") / token / "run.json" : fs::path(record_out);
      const auto record = run(server_url, token, task_id, spec, policy, client_options(path));
      const json summary{{"record", path.string()},
                         {"users", record.users.size()},
                         {"rounds", record.rounds.size()},
                         {"duration_ms", record.total_duration_ms}};
      if (common.json_output) {
        out << summary.dump() << "\n";
      } else {
        out << "run complete: " << record.users.size() << " users, " << record.rounds.size()
            << " rounds, record at " << path.string() << "\n";
      }
      return kOk;
    };
  });

  std::string gold_path;
  std::string out_dir = "simulation";
  auto* sim = app.add_subcommand("simulate", "Mock server and client in one process over loopback");
  add_common(sim, common);
  sim->add_option("--corpus", corpus_path, "Corpus JSON file")->required();
  sim->add_option("--split", split_name, "train|trial|test")->capture_default_str();
  sim->add_option("--gold", gold_path, "Gold labels (default: corpus labels)");
  sim->add_option("--out-dir", out_dir, "Output directory")->capture_default_str();
  sim->add_option("--erde-o", erde_list, "ERDE cut-offs")->capture_default_str();
  sim->add_option("--cfp", c_fp, "ERDE false-positive cost (default: prevalence)");
  sim->add_option("--penalty", penalty, "Latency penalty slope")->capture_default_str();
  add_client_flags(sim);
  sim->callback([&] {
    action = [&] {
      const auto corpus = load_corpus(corpus_path, parse_split(split_name));
      const auto gold = gold_path.empty() ? gold_from_corpus(corpus) : load_gold(gold_path);
      const auto spec = make_classifier();
      const auto policy = resolve_policy(policy_arg);
      auto estimator = make_estimator(spec);
      const fs::path dir(out_dir);
      const auto result = simulate(corpus, *estimator, policy, client_options(dir / "run.json"),
                                   spec.to_json(), dir / "server_runs", token);
      const auto report = evaluate(final_decisions(result.record), gold, metrics_options());
      const auto metrics = to_json(report);
      std::ofstream(dir / "metrics.json") << metrics.dump(2) << "\n";
      if (common.json_output) {
        out << json{{"run", (dir / "run.json").string()},
                    {"metrics", metrics}}.dump() << "\n";
      } else {
        out << metrics.dump(2) << "\n";
      }
      return kOk;
    };
  });

  std::string run_path;
  std::string csv_path;
  std::string run_name;
  auto* eval = app.add_subcommand("evaluate", "Score a run record against gold labels");
  add_common(eval, common);
  eval->add_option("--run", run_path, "Run record JSON")->required();
  eval->add_option("--gold", gold_path, "Gold labels JSON")->required();
  eval->add_option("--erde-o", erde_list, "ERDE cut-offs")->capture_default_str();
  eval->add_option("--cfp", c_fp, "ERDE false-positive cost (default: prevalence)");
  eval->add_option("--penalty", penalty, "Latency penalty slope")->capture_default_str();
  eval->add_option("--csv", csv_path, "Append a ranking-table row to this CSV file");
  eval->add_option("--name", run_name, "Run name for the CSV row (default: token)");
  eval->callback([&] {
    action = [&] {
      const auto record = RunRecord::load(run_path);
      const auto report = evaluate(final_decisions(record), load_gold(gold_path), metrics_options());
      out << to_json(report).dump(common.json_output ? -1 : 2) << "\n";
      if (!csv_path.empty()) {
        const bool fresh = !fs::exists(csv_path) || fs::file_size(csv_path) == 0;
        std::ofstream csv(csv_path, std::ios::app);
        if (fresh) csv << csv_header(report) << "\n";
        csv << csv_row(report, run_name.empty() ? record.token : run_name) << "\n";
      }
      return kOk;
    };
  });

  std::string user_id;
  auto* plot = app.add_subcommand("plot-data", "Per-round probabilities of one user");
  add_common(plot, common);
  plot->add_option("run", run_path, "Run record JSON")->required();
  plot->add_option("--user", user_id, "User id")->required();
  plot->callback([&] {
    action = [&] {
      const auto rows = plot_rows(RunRecord::load(run_path), user_id);
      if (common.json_output) {
        json list = json::array();
        for (const auto& [round, p] : rows) list.push_back({{"round", round}, {"p_positive", p}});
        out << list.dump() << "\n";
      } else {
        out << "round\tp_positive\n" << std::setprecision(17);
        for (const auto& [round, p] : rows) out << round << "\t" << p << "\n";
      }
      return kOk;
    };
  });

  try {
    auto args = expand_config(raw_args);
    std::reverse(args.begin(), args.end());
    app.parse(args);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, err, err);
    const auto parsed = app.get_subcommands();
    err << (parsed.empty() ? app.help() : parsed.front()->help());
    return kUsage;
  }

  try {
    return action ? action() : kUsage;
  } catch (const PreconditionError& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntime;
  }
}

}  // namespace earlyrisk::cli
