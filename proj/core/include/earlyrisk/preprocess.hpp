#pragma once

#include <string>
#include <string_view>

namespace earlyrisk {

// Text that has gone through `normalize`. Construction from arbitrary
// strings is explicit so raw and normalized text are not mixed by accident.
class NormalizedText {
 public:
  NormalizedText() = default;
  explicit NormalizedText(std::string text) : text_(std::move(text)) {}

  const std::string& str() const noexcept { return text_; }
  bool empty() const noexcept { return text_.empty(); }

  friend bool operator==(const NormalizedText&, const NormalizedText&) = default;

 private:
  std::string text_;
};

inline constexpr std::string_view kWeblinkToken = "weblink";
inline constexpr std::string_view kNumberToken = "number";

/// Normalizes a raw post:
///  1. decodes HTML entities (named and numeric) and \uXXXX escapes,
///  2. lowercases (Latin, Greek, Cyrillic and Armenian letters; diacritics
///     are kept),
///  3. replaces http://, https:// and www. links with `weblink`,
///  4. replaces digit runs, including inner '.' or ',' separators, with
///     `number`,
///  5. drops a token identical to the one before it,
///  6. collapses whitespace to single spaces and trims.
/// Steps 1-2 repeat until no escape is left, which makes the whole function
/// idempotent. Invalid UTF-8 bytes become U+FFFD.
NormalizedText normalize(std::string_view raw);

/// Decoding step alone (step 1), exposed for inspection tools.
std::string decode_entities(std::string_view text);

/// Lowercasing step alone (step 2).
std::string to_lower_utf8(std::string_view text);

}  // namespace earlyrisk
