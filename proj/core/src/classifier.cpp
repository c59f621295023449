#include "earlyrisk/classifier.hpp"

#include <cmath>
#include <semaphore>
#include <sstream>

#include <httplib.h>

#include "earlyrisk/errors.hpp"

namespace earlyrisk {

ProbabilityEstimate::ProbabilityEstimate(double p) : p_(p) {
  if (std::isnan(p) || p < 0.0 || p > 1.0) {
    std::ostringstream msg;
    msg << "probability out of range [0, 1]: " << p;
    throw ClassifierError(msg.str(), false);
  }
}

namespace {

std::string kind_name(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::builtin:
      return "builtin";
    case ClassifierKind::external:
      return "external";
    case ClassifierKind::constant:
      return "constant";
    case ClassifierKind::oracle:
      return "oracle";
  }
  return "builtin";
}

ClassifierKind parse_kind(const std::string& name) {
  if (name == "builtin") return ClassifierKind::builtin;
  if (name == "external") return ClassifierKind::external;
  if (name == "constant") return ClassifierKind::constant;
  if (name == "oracle") return ClassifierKind::oracle;
  throw PreconditionError("unknown classifier kind '" + name +
                          "' (builtin|external|constant|oracle)");
}

class InFlightSlot {
 public:
  explicit InFlightSlot(std::counting_semaphore<>& sem) : sem_(sem) { sem_.acquire(); }
  ~InFlightSlot() { sem_.release(); }
  InFlightSlot(const InFlightSlot&) = delete;
  InFlightSlot& operator=(const InFlightSlot&) = delete;

 private:
  std::counting_semaphore<>& sem_;
};

}  // namespace

void ClassifierSpec::validate() const {
  const bool want_model = kind == ClassifierKind::builtin;
  const bool want_endpoint = kind == ClassifierKind::external;
  const bool want_constant = kind == ClassifierKind::constant;
  const bool want_gold = kind == ClassifierKind::oracle;
  auto check = [&](bool wanted, bool present, const char* field) {
    if (wanted && !present) {
      throw PreconditionError(kind_name(kind) + " classifier requires '" + field + "'");
    }
    if (!wanted && present) {
      throw PreconditionError(kind_name(kind) + " classifier does not take '" + field + "'");
    }
  };
  check(want_model, model_path.has_value(), "model_path");
  check(want_endpoint, endpoint.has_value(), "endpoint");
  check(want_constant, constant.has_value(), "constant");
  check(want_gold, gold_path.has_value(), "gold_path");
  if (timeout_ms <= 0) throw PreconditionError("timeout_ms must be positive");
  if (max_batch <= 0) throw PreconditionError("max_batch must be positive");
  if (max_retries < 0) throw PreconditionError("max_retries must be non-negative");
  if (max_in_flight <= 0) throw PreconditionError("max_in_flight must be positive");
  if (constant && (std::isnan(*constant) || *constant < 0.0 || *constant > 1.0)) {
    throw PreconditionError("constant probability must be in [0, 1]");
  }
}

ClassifierSpec ClassifierSpec::parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos || colon + 1 == text.size()) {
    throw PreconditionError("classifier must look like <kind>:<argument>, got '" +
                            text + "'");
  }
  ClassifierSpec spec;
  spec.kind = parse_kind(text.substr(0, colon));
  const auto arg = text.substr(colon + 1);
  switch (spec.kind) {
    case ClassifierKind::builtin:
      spec.model_path = arg;
      break;
    case ClassifierKind::external:
      spec.endpoint = arg;
      break;
    case ClassifierKind::constant:
      try {
        std::size_t used = 0;
        spec.constant = std::stod(arg, &used);
        if (used != arg.size()) throw std::invalid_argument(arg);
      } catch (const std::exception&) {
        throw PreconditionError("constant classifier needs a number, got '" + arg + "'");
      }
      break;
    case ClassifierKind::oracle:
      spec.gold_path = arg;
      break;
  }
  spec.validate();
  return spec;
}

std::string ClassifierSpec::to_string() const {
  switch (kind) {
    case ClassifierKind::builtin:
      return "builtin:" + model_path.value_or("").string();
    case ClassifierKind::external:
      return "external:" + endpoint.value_or("");
    case ClassifierKind::constant: {
      std::ostringstream out;
      out << "constant:" << constant.value_or(0.0);
      return out.str();
    }
    case ClassifierKind::oracle:
      return "oracle:" + gold_path.value_or("").string();
  }
  return {};
}

nlohmann::json ClassifierSpec::to_json() const {
  nlohmann::json j{{"kind", kind_name(kind)},
                   {"timeout_ms", timeout_ms},
                   {"max_batch", max_batch},
                   {"max_retries", max_retries},
                   {"max_in_flight", max_in_flight}};
  if (model_path) j["model_path"] = model_path->string();
  if (endpoint) j["endpoint"] = *endpoint;
  if (constant) j["constant"] = *constant;
  if (gold_path) j["gold_path"] = gold_path->string();
  return j;
}

ClassifierSpec ClassifierSpec::from_json(const nlohmann::json& value) {
  if (value.is_string()) return parse(value.get<std::string>());
  if (!value.is_object() || !value.contains("kind")) {
    throw DataError("classifier spec must be a string or an object with 'kind'");
  }
  ClassifierSpec spec;
  try {
    spec.kind = parse_kind(value.at("kind").get<std::string>());
    if (value.contains("model_path")) spec.model_path = value["model_path"].get<std::string>();
    if (value.contains("endpoint")) spec.endpoint = value["endpoint"].get<std::string>();
    if (value.contains("constant")) spec.constant = value["constant"].get<double>();
    if (value.contains("gold_path")) spec.gold_path = value["gold_path"].get<std::string>();
    spec.timeout_ms = value.value("timeout_ms", spec.timeout_ms);
    spec.max_batch = value.value("max_batch", spec.max_batch);
    spec.max_retries = value.value("max_retries", spec.max_retries);
    spec.max_in_flight = value.value("max_in_flight", spec.max_in_flight);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("classifier spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

BuiltinEstimator::BuiltinEstimator(std::shared_ptr<const WordConfModel> model)
    : model_(std::move(model)) {
  if (!model_) throw PreconditionError("builtin estimator needs a model");
}

std::vector<ProbabilityEstimate> BuiltinEstimator::predict(
    std::span<const ScoringRequest> batch) {
  std::vector<ProbabilityEstimate> out;
  out.reserve(batch.size());
  for (const auto& item : batch) out.emplace_back(model_->score_text(item.text));
  return out;
}

std::vector<ProbabilityEstimate> ConstantEstimator::predict(
    std::span<const ScoringRequest> batch) {
  return std::vector<ProbabilityEstimate>(batch.size(), p_);
}

std::vector<ProbabilityEstimate> OracleEstimator::predict(
    std::span<const ScoringRequest> batch) {
  std::vector<ProbabilityEstimate> out;
  out.reserve(batch.size());
  for (const auto& item : batch) {
    const auto it = gold_.find(item.user_id);
    if (it == gold_.end()) {
      throw ClassifierError("oracle has no gold label for user '" + item.user_id + "'",
                            false);
    }
    out.emplace_back(it->second == 1 ? 1.0 : 0.0);
  }
  return out;
}

struct ExternalEstimator::Impl {
  std::string origin;  // scheme://host:port
  std::string path;    // .../predict
  ExternalOptions options;
  std::counting_semaphore<> in_flight;

  Impl(std::string o, std::string p, ExternalOptions opts)
      : origin(std::move(o)),
        path(std::move(p)),
        options(opts),
        in_flight(opts.max_in_flight) {}
};

ExternalEstimator::ExternalEstimator(std::string endpoint, ExternalOptions options) {
  if (options.max_batch == 0) throw PreconditionError("max_batch must be positive");
  if (options.max_in_flight <= 0) throw PreconditionError("max_in_flight must be positive");
  if (!endpoint.starts_with("http://")) {
    throw PreconditionError("external endpoint must be an http:// URL, got '" +
                            endpoint + "'");
  }
  const auto slash = endpoint.find('/', 7);
  std::string origin = endpoint.substr(0, slash);
  std::string path = slash == std::string::npos ? "" : endpoint.substr(slash);
  while (!path.empty() && path.back() == '/') path.pop_back();
  if (!path.ends_with("/predict")) path += "/predict";
  impl_ = std::make_unique<Impl>(std::move(origin), std::move(path), options);
}

ExternalEstimator::~ExternalEstimator() = default;

std::vector<ProbabilityEstimate> ExternalEstimator::post_texts(
    const std::vector<std::string>& texts) {
  const nlohmann::json request{{"texts", texts}};
  const auto body = request.dump();
  const auto& opts = impl_->options;

  std::string last_error;
  for (int attempt = 0; attempt <= opts.max_retries; ++attempt) {
    httplib::Result res;
    {
      InFlightSlot slot(impl_->in_flight);
      httplib::Client client(impl_->origin);
      client.set_connection_timeout(opts.timeout);
      client.set_read_timeout(opts.timeout);
      client.set_write_timeout(opts.timeout);
      res = client.Post(impl_->path, body, "application/json");
    }
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status != 200) {
      throw ClassifierError("external classifier " + impl_->origin + impl_->path +
                                " returned HTTP " + std::to_string(res->status) +
                                ": " + res->body,
                            false);
    }
    nlohmann::json reply;
    try {
      reply = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw ClassifierError(std::string("external classifier sent invalid JSON: ") +
                                e.what(),
                            false);
    }
    if (!reply.is_object() || !reply.contains("probabilities") ||
        !reply["probabilities"].is_array()) {
      throw ClassifierError("external classifier reply lacks a 'probabilities' array",
                            false);
    }
    const auto& probs = reply["probabilities"];
    if (probs.size() != texts.size()) {
      throw ClassifierError("external classifier returned " +
                                std::to_string(probs.size()) + " probabilities for " +
                                std::to_string(texts.size()) + " texts",
                            false);
    }
    std::vector<ProbabilityEstimate> out;
    out.reserve(probs.size());
    for (const auto& p : probs) {
      if (!p.is_number()) {
        throw ClassifierError("external classifier returned a non-numeric probability",
                              false);
      }
      out.emplace_back(p.get<double>());
    }
    return out;
  }
  throw ClassifierError("external classifier " + impl_->origin + impl_->path +
                            " unreachable after " + std::to_string(opts.max_retries + 1) +
                            " attempts: " + last_error,
                        true);
}

std::vector<ProbabilityEstimate> ExternalEstimator::predict(
    std::span<const ScoringRequest> batch) {
  std::vector<ProbabilityEstimate> out;
  out.reserve(batch.size());
  const auto chunk = impl_->options.max_batch;
  for (std::size_t begin = 0; begin < batch.size(); begin += chunk) {
    const auto end = std::min(batch.size(), begin + chunk);
    std::vector<std::string> texts;
    texts.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) texts.push_back(batch[i].text.str());
    auto part = post_texts(texts);
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

std::unique_ptr<ProbabilityEstimator> make_estimator(const ClassifierSpec& spec) {
  spec.validate();
  switch (spec.kind) {
    case ClassifierKind::builtin:
      return std::make_unique<BuiltinEstimator>(
          std::make_shared<const WordConfModel>(WordConfModel::load(*spec.model_path)));
    case ClassifierKind::external: {
      ExternalOptions options;
      options.timeout = std::chrono::milliseconds(spec.timeout_ms);
      options.max_batch = static_cast<std::size_t>(spec.max_batch);
      options.max_retries = spec.max_retries;
      options.max_in_flight = spec.max_in_flight;
      return std::make_unique<ExternalEstimator>(*spec.endpoint, options);
    }
    case ClassifierKind::constant:
      return std::make_unique<ConstantEstimator>(*spec.constant);
    case ClassifierKind::oracle:
      return std::make_unique<OracleEstimator>(load_gold(*spec.gold_path));
  }
  throw PreconditionError("unsupported classifier kind");
}

std::vector<ProbabilityEstimate> predict_batch(const ClassifierSpec& spec,
                                               std::span<const NormalizedText> inputs) {
  if (inputs.empty()) throw PreconditionError("predict_batch: no inputs");
  auto estimator = make_estimator(spec);
  std::vector<ScoringRequest> batch;
  batch.reserve(inputs.size());
  for (const auto& text : inputs) batch.push_back({{}, text});
  auto out = estimator->predict(batch);
  if (out.size() != inputs.size()) {
    throw ClassifierError("estimator returned a result of the wrong length", false);
  }
  return out;
}

}  // namespace earlyrisk
