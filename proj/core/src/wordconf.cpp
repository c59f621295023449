#include "earlyrisk/wordconf.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "earlyrisk/errors.hpp"
#include "json_io.hpp"

namespace earlyrisk {

double logistic(double x) {
  // Two branches keep exp() from overflowing at either tail.
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

WordConfModel::WordConfModel(Counts positive, Counts negative, double smoothing)
    : positive_(std::move(positive)),
      negative_(std::move(negative)),
      smoothing_(smoothing) {
  if (!(smoothing_ > 0.0) || !std::isfinite(smoothing_)) {
    throw PreconditionError("smoothing must be a positive number");
  }
  std::set<std::string, std::less<>> vocab;
  for (const auto& [token, n] : positive_) {
    positive_total_ += n;
    if (n > 0) vocab.insert(token);
  }
  for (const auto& [token, n] : negative_) {
    negative_total_ += n;
    if (n > 0) vocab.insert(token);
  }
  vocabulary_.assign(vocab.begin(), vocab.end());
}

WordConfModel WordConfModel::fit(const std::vector<LabeledSample>& samples,
                                 double smoothing) {
  Counts positive;
  Counts negative;
  bool has_pos = false;
  bool has_neg = false;
  for (const auto& sample : samples) {
    if (sample.label == Label::unknown) {
      throw PreconditionError("fit: sample from '" + sample.origin_user +
                              "' has no label");
    }
    auto& counts = sample.label == Label::positive ? positive : negative;
    (sample.label == Label::positive ? has_pos : has_neg) = true;
    std::istringstream in(sample.text);
    for (std::string token; in >> token;) ++counts[token];
  }
  if (!has_pos || !has_neg) {
    throw PreconditionError("fit: need at least one sample of each class");
  }
  return WordConfModel(std::move(positive), std::move(negative), smoothing);
}

std::uint64_t WordConfModel::count(std::string_view token, Label label) const {
  const auto& counts = label == Label::positive ? positive_ : negative_;
  const auto it = counts.find(token);
  return it == counts.end() ? 0 : it->second;
}

std::uint64_t WordConfModel::total(Label label) const {
  return label == Label::positive ? positive_total_ : negative_total_;
}

double WordConfModel::log_ratio(std::string_view token) const {
  const auto c_pos = count(token, Label::positive);
  const auto c_neg = count(token, Label::negative);
  if (c_pos == 0 && c_neg == 0) return 0.0;
  const double v = static_cast<double>(vocabulary_.size());
  const double s = smoothing_;
  const double pos = (static_cast<double>(c_pos) + s) /
                     (static_cast<double>(positive_total_) + s * v);
  const double neg = (static_cast<double>(c_neg) + s) /
                     (static_cast<double>(negative_total_) + s * v);
  return std::log(pos) - std::log(neg);
}

double WordConfModel::confidence(std::string_view token) const {
  return logistic(log_ratio(token));
}

std::vector<WordScore> WordConfModel::extract_vocabulary(std::size_t k) const {
  if (k < 1 || k > vocabulary_.size()) {
    throw PreconditionError("extract_vocabulary: k must be in [1, " +
                            std::to_string(vocabulary_.size()) + "], got " +
                            std::to_string(k));
  }
  std::vector<WordScore> scored;
  scored.reserve(vocabulary_.size());
  for (const auto& token : vocabulary_) scored.push_back({token, confidence(token)});
  auto order = [](const WordScore& a, const WordScore& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    return a.token < b.token;
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k),
                    scored.end(), order);
  scored.resize(k);
  return scored;
}

double WordConfModel::score_text(const NormalizedText& text) const {
  std::istringstream in(text.str());
  double sum = 0.0;
  std::size_t n = 0;
  for (std::string token; in >> token; ++n) sum += log_ratio(token);
  if (n == 0) return 0.5;
  return logistic(sum / static_cast<double>(n));
}

WordConfModel WordConfModel::swapped() const {
  return WordConfModel(negative_, positive_, smoothing_);
}

nlohmann::json WordConfModel::to_json() const {
  auto counts = [](const Counts& c) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [token, n] : c) j[token] = n;
    return j;
  };
  return {{"smoothing", smoothing_},
          {"classes", {{"pos", counts(positive_)}, {"neg", counts(negative_)}}}};
}

WordConfModel WordConfModel::from_json(const nlohmann::json& value) {
  if (!value.is_object() || !value.contains("classes") ||
      !value["classes"].is_object()) {
    throw DataError("word-confidence model: missing 'classes' object");
  }
  auto read = [&](const char* name) {
    const auto& classes = value["classes"];
    if (!classes.contains(name) || !classes[name].is_object()) {
      throw DataError(std::string("word-confidence model: missing class '") +
                      name + "'");
    }
    Counts c;
    for (const auto& [token, n] : classes[name].items()) {
      if (!n.is_number_unsigned() && !(n.is_number_integer() && n.get<long long>() >= 0)) {
        throw DataError("word-confidence model: count for '" + token +
                        "' must be a non-negative integer");
      }
      c.emplace(token, n.get<std::uint64_t>());
    }
    return c;
  };
  const double smoothing =
      value.contains("smoothing") ? value["smoothing"].get<double>() : 1.0;
  return WordConfModel(read("pos"), read("neg"), smoothing);
}

void WordConfModel::save(const std::filesystem::path& path) const {
  detail::write_json(path, to_json());
}

WordConfModel WordConfModel::load(const std::filesystem::path& path) {
  return from_json(detail::parse_json(detail::read_file(path), path.string()));
}

}  // namespace earlyrisk
