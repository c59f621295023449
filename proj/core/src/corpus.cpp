#include "earlyrisk/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "earlyrisk/errors.hpp"
#include "json_io.hpp"

namespace earlyrisk {

namespace {

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
           c == '\v';
  });
}

std::string join_posts(const std::vector<Post>& posts, std::size_t begin,
                       std::size_t end) {
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i != begin) out += ' ';
    out += posts[i].text;
  }
  return out;
}

[[noreturn]] void reject(const std::string& source, std::size_t line,
                         const std::string& user, const std::string& why) {
  std::ostringstream msg;
  msg << source;
  if (line > 0) msg << ':' << line;
  msg << ": ";
  if (!user.empty()) msg << "user '" << user << "': ";
  msg << why;
  throw DataError(msg.str());
}

Label parse_label(const nlohmann::json& value, bool allow_unknown,
                  const std::string& source, std::size_t line,
                  const std::string& user) {
  if (value.is_null()) {
    if (!allow_unknown) {
      reject(source, line, user, "null label outside a test corpus");
    }
    return Label::unknown;
  }
  if (value.is_number_integer()) {
    const auto v = value.get<long long>();
    if (v == 1) return Label::positive;
    if (v == 0) return Label::negative;
  }
  reject(source, line, user, "label must be 1, 0 or null");
}

Post parse_post(const nlohmann::json& value, const std::string& source,
                std::size_t line, const std::string& user) {
  if (!value.is_object()) reject(source, line, user, "post is not an object");
  Post post;
  const auto order = value.find("order");
  if (order == value.end() || !order->is_number_integer() ||
      order->get<long long>() < 0) {
    reject(source, line, user, "post 'order' must be a non-negative integer");
  }
  post.order = order->get<int>();
  const auto text = value.find("text");
  if (text == value.end() || !text->is_string()) {
    reject(source, line, user, "post 'text' must be a string");
  }
  post.text = text->get<std::string>();
  if (is_blank(post.text)) {
    reject(source, line, user,
           "post " + std::to_string(post.order) + " has empty text");
  }
  if (const auto date = value.find("date");
      date != value.end() && !date->is_null()) {
    if (!date->is_string()) reject(source, line, user, "post 'date' must be a string");
    post.date = date->get<std::string>();
  }
  return post;
}

}  // namespace

std::string to_string(Label label) {
  switch (label) {
    case Label::positive:
      return "positive";
    case Label::negative:
      return "negative";
    case Label::unknown:
      return "unknown";
  }
  return "unknown";
}

std::string to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::trial:
      return "trial";
    case Split::test:
      return "test";
  }
  return "train";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::train;
  if (name == "trial") return Split::trial;
  if (name == "test") return Split::test;
  throw PreconditionError("unknown split '" + name + "' (train|trial|test)");
}

const UserHistory* Corpus::find(const std::string& user_id) const {
  for (const auto& u : users) {
    if (u.user_id == user_id) return &u;
  }
  return nullptr;
}

std::size_t Corpus::max_posts() const {
  std::size_t n = 0;
  for (const auto& u : users) n = std::max(n, u.posts.size());
  return n;
}

Corpus parse_corpus(const std::string& text, Split split, std::string task_id,
                    const std::string& source) {
  const auto root = detail::parse_json(text, source);
  if (!root.is_array()) reject(source, 1, "", "corpus root must be a JSON array");
  if (root.empty()) reject(source, 0, "", "empty corpus");
  const auto lines = detail::top_level_element_lines(text);

  Corpus corpus;
  corpus.task_id = std::move(task_id);
  corpus.split = split;
  std::set<std::string> seen;
  for (std::size_t i = 0; i < root.size(); ++i) {
    const auto& entry = root[i];
    const std::size_t line = i < lines.size() ? lines[i] : 0;
    if (!entry.is_object()) reject(source, line, "", "user record is not an object");
    const auto id = entry.find("user_id");
    if (id == entry.end() || !id->is_string() || id->get<std::string>().empty()) {
      reject(source, line, "", "missing or empty 'user_id'");
    }
    UserHistory user;
    user.user_id = id->get<std::string>();
    if (!seen.insert(user.user_id).second) {
      reject(source, line, user.user_id, "duplicate user_id");
    }
    const auto label = entry.find("label");
    user.label = parse_label(label == entry.end() ? nlohmann::json() : *label,
                             split == Split::test, source, line, user.user_id);
    const auto posts = entry.find("posts");
    if (posts == entry.end() || !posts->is_array() || posts->empty()) {
      reject(source, line, user.user_id, "'posts' must be a non-empty array");
    }
    for (const auto& p : *posts) {
      user.posts.push_back(parse_post(p, source, line, user.user_id));
    }
    std::sort(user.posts.begin(), user.posts.end(),
              [](const Post& a, const Post& b) { return a.order < b.order; });
    for (std::size_t k = 0; k < user.posts.size(); ++k) {
      if (user.posts[k].order != static_cast<int>(k)) {
        reject(source, line, user.user_id,
               "post orders must be consecutive from 0 without duplicates");
      }
    }
    corpus.users.push_back(std::move(user));
  }
  return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, Split split,
                   std::optional<std::string> task_id) {
  if (!std::filesystem::exists(path)) {
    throw DataError("corpus file not found: " + path.string());
  }
  return parse_corpus(detail::read_file(path), split,
                      task_id.value_or(path.stem().string()), path.string());
}

nlohmann::json corpus_to_json(const Corpus& corpus) {
  auto root = nlohmann::json::array();
  for (const auto& u : corpus.users) {
    nlohmann::json posts = nlohmann::json::array();
    for (const auto& p : u.posts) {
      posts.push_back({{"order", p.order},
                       {"text", p.text},
                       {"date", p.date ? nlohmann::json(*p.date) : nlohmann::json()}});
    }
    nlohmann::json label;
    if (u.label != Label::unknown) label = u.label == Label::positive ? 1 : 0;
    root.push_back({{"user_id", u.user_id}, {"label", label}, {"posts", posts}});
  }
  return root;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  detail::write_json(path, corpus_to_json(corpus));
}

GoldLabels load_gold(const std::filesystem::path& path) {
  const auto root = detail::parse_json(detail::read_file(path), path.string());
  if (!root.is_object()) {
    throw DataError(path.string() + ": gold labels must be a JSON object");
  }
  GoldLabels gold;
  for (const auto& [user, value] : root.items()) {
    if (!value.is_number_integer() ||
        (value.get<long long>() != 0 && value.get<long long>() != 1)) {
      throw DataError(path.string() + ": gold label for '" + user +
                      "' must be 0 or 1");
    }
    gold.emplace(user, value.get<int>());
  }
  if (gold.empty()) throw DataError(path.string() + ": no gold labels");
  return gold;
}

GoldLabels gold_from_corpus(const Corpus& corpus) {
  GoldLabels gold;
  for (const auto& u : corpus.users) {
    if (u.label == Label::unknown) {
      throw DataError("user '" + u.user_id + "' has no gold label");
    }
    gold.emplace(u.user_id, u.label == Label::positive ? 1 : 0);
  }
  return gold;
}

void save_gold(const GoldLabels& gold, const std::filesystem::path& path) {
  nlohmann::json root = nlohmann::json::object();
  for (const auto& [user, label] : gold) root[user] = label;
  detail::write_json(path, root);
}

double median(std::vector<double> values) {
  if (values.empty()) throw PreconditionError("median of an empty list");
  std::sort(values.begin(), values.end());
  const auto n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return (values[n / 2 - 1] + values[n / 2]) / 2.0;
}

std::size_t count_words(const std::string& text) {
  std::istringstream in(text);
  std::size_t n = 0;
  for (std::string word; in >> word;) ++n;
  return n;
}

StatsReport corpus_stats(const Corpus& corpus) {
  if (corpus.users.empty()) throw PreconditionError("corpus_stats: empty corpus");
  StatsReport r;
  std::vector<double> per_user;
  std::vector<double> per_post;
  for (const auto& u : corpus.users) {
    ++r.n_users;
    if (u.label == Label::positive) ++r.n_pos;
    if (u.label == Label::negative) ++r.n_neg;
    r.n_posts += u.posts.size();
    per_user.push_back(static_cast<double>(u.posts.size()));
    for (const auto& p : u.posts) {
      per_post.push_back(static_cast<double>(count_words(p.text)));
    }
  }
  auto summarize = [](std::vector<double> v) {
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    return Summary{median(v), *lo, *hi};
  };
  r.posts_per_user = summarize(std::move(per_user));
  r.words_per_post = summarize(std::move(per_post));
  return r;
}

nlohmann::json stats_to_json(const StatsReport& r) {
  auto summary = [](const Summary& s) {
    return nlohmann::json{{"median", s.median}, {"min", s.min}, {"max", s.max}};
  };
  return {{"n_users", r.n_users},
          {"n_pos", r.n_pos},
          {"n_neg", r.n_neg},
          {"n_posts", r.n_posts},
          {"posts_per_user", summary(r.posts_per_user)},
          {"words_per_post", summary(r.words_per_post)}};
}

std::vector<LabeledSample> augment_split(const UserHistory& user, int parts) {
  if (user.label == Label::unknown) {
    throw PreconditionError("augment_split: user '" + user.user_id +
                            "' has no label");
  }
  if (parts < 1) throw PreconditionError("augment_split: parts must be >= 1");
  if (user.posts.empty()) {
    throw PreconditionError("augment_split: user '" + user.user_id +
                            "' has no posts");
  }
  const std::size_t n = user.posts.size();
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(parts), n);
  const std::size_t base = n / k;
  const std::size_t extra = n % k;
  std::vector<LabeledSample> out;
  out.reserve(k);
  std::size_t begin = 0;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t size = base + (i < extra ? 1 : 0);
    out.push_back({join_posts(user.posts, begin, begin + size), user.label,
                   user.user_id, static_cast<int>(i)});
    begin += size;
  }
  return out;
}

LabeledSample whole_history_sample(const UserHistory& user) {
  if (user.label == Label::unknown) {
    throw PreconditionError("user '" + user.user_id + "' has no label");
  }
  return {join_posts(user.posts, 0, user.posts.size()), user.label,
          user.user_id, -1};
}

std::vector<LabeledSample> build_training_samples(const Corpus& corpus,
                                                  int parts) {
  std::vector<LabeledSample> out;
  for (const auto& u : corpus.users) {
    if (u.label == Label::unknown) continue;
    out.push_back(whole_history_sample(u));
  }
  for (const auto& u : corpus.users) {
    if (u.label == Label::unknown) continue;
    auto slices = augment_split(u, parts);
    out.insert(out.end(), std::make_move_iterator(slices.begin()),
               std::make_move_iterator(slices.end()));
  }
  return out;
}

TrainValidSplit train_valid_split(const std::vector<LabeledSample>& samples,
                                  double valid_fraction, std::uint64_t seed) {
  if (!(valid_fraction > 0.0 && valid_fraction < 1.0)) {
    throw PreconditionError("train_valid_split: valid_fraction must be in (0, 1)");
  }
  if (samples.empty()) throw PreconditionError("train_valid_split: no samples");

  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    (samples[i].label == Label::positive ? pos : neg).push_back(i);
  }

  TrainValidSplit result;
  std::vector<std::vector<std::size_t>> groups;
  if (pos.empty() || neg.empty()) {
    result.stratified = false;
    std::vector<std::size_t> all(samples.size());
    std::iota(all.begin(), all.end(), 0);
    groups.push_back(std::move(all));
  } else {
    groups.push_back(std::move(pos));
    groups.push_back(std::move(neg));
  }

  // The validation total is fixed first; per-group quotas then follow the
  // largest-remainder rule so each group stays within one sample of its
  // exact share.
  const auto total_valid = static_cast<std::size_t>(
      std::llround(valid_fraction * static_cast<double>(samples.size())));
  std::vector<std::size_t> quota(groups.size());
  std::vector<double> remainder(groups.size());
  std::size_t assigned = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double exact = valid_fraction * static_cast<double>(groups[g].size());
    quota[g] = static_cast<std::size_t>(std::floor(exact));
    remainder[g] = exact - std::floor(exact);
    assigned += quota[g];
  }
  std::vector<std::size_t> by_remainder(groups.size());
  std::iota(by_remainder.begin(), by_remainder.end(), 0);
  std::stable_sort(by_remainder.begin(), by_remainder.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < total_valid && i < by_remainder.size(); ++i) {
    const auto g = by_remainder[i];
    if (quota[g] < groups[g].size()) {
      ++quota[g];
      ++assigned;
    }
  }

  std::mt19937_64 rng(seed);
  std::vector<bool> in_valid(samples.size(), false);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    auto members = groups[g];
    std::shuffle(members.begin(), members.end(), rng);
    for (std::size_t i = 0; i < quota[g]; ++i) in_valid[members[i]] = true;
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    (in_valid[i] ? result.valid : result.train).push_back(samples[i]);
  }
  return result;
}

}  // namespace earlyrisk
