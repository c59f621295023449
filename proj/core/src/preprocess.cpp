#include "earlyrisk/preprocess.hpp"

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <vector>

namespace earlyrisk {

namespace {

constexpr char32_t kReplacement = 0xFFFD;

struct NamedEntity {
  std::string_view name;
  char32_t code;
};

// Latin-1 block plus the handful of punctuation entities common in scraped
// chat text. Sorted by name for binary search.
constexpr auto kEntities = [] {
  std::array<NamedEntity, 113> table{{
      {"AElig", 0xC6},   {"Aacute", 0xC1},  {"Acirc", 0xC2},   {"Agrave", 0xC0},
      {"Aring", 0xC5},   {"Atilde", 0xC3},  {"Auml", 0xC4},    {"Ccedil", 0xC7},
      {"ETH", 0xD0},     {"Eacute", 0xC9},  {"Ecirc", 0xCA},   {"Egrave", 0xC8},
      {"Euml", 0xCB},    {"Iacute", 0xCD},  {"Icirc", 0xCE},   {"Igrave", 0xCC},
      {"Iuml", 0xCF},    {"Ntilde", 0xD1},  {"OElig", 0x152},  {"Oacute", 0xD3},
      {"Ocirc", 0xD4},   {"Ograve", 0xD2},  {"Oslash", 0xD8},  {"Otilde", 0xD5},
      {"Ouml", 0xD6},    {"THORN", 0xDE},   {"Uacute", 0xDA},  {"Ucirc", 0xDB},
      {"Ugrave", 0xD9},  {"Uuml", 0xDC},    {"Yacute", 0xDD},  {"aacute", 0xE1},
      {"acirc", 0xE2},   {"acute", 0xB4},   {"aelig", 0xE6},   {"agrave", 0xE0},
      {"amp", 0x26},     {"apos", 0x27},    {"aring", 0xE5},   {"atilde", 0xE3},
      {"auml", 0xE4},    {"brvbar", 0xA6},  {"bull", 0x2022},  {"ccedil", 0xE7},
      {"cedil", 0xB8},   {"cent", 0xA2},    {"copy", 0xA9},    {"curren", 0xA4},
      {"deg", 0xB0},     {"divide", 0xF7},  {"eacute", 0xE9},  {"ecirc", 0xEA},
      {"egrave", 0xE8},  {"eth", 0xF0},     {"euml", 0xEB},    {"euro", 0x20AC},
      {"frac12", 0xBD},  {"frac14", 0xBC},  {"frac34", 0xBE},  {"gt", 0x3E},
      {"hellip", 0x2026}, {"iacute", 0xED}, {"icirc", 0xEE},   {"iexcl", 0xA1},
      {"igrave", 0xEC},  {"iquest", 0xBF},  {"iuml", 0xEF},    {"laquo", 0xAB},
      {"ldquo", 0x201C}, {"lsquo", 0x2018}, {"lt", 0x3C},      {"macr", 0xAF},
      {"mdash", 0x2014}, {"micro", 0xB5},   {"middot", 0xB7},  {"nbsp", 0xA0},
      {"ndash", 0x2013}, {"not", 0xAC},     {"ntilde", 0xF1},  {"oacute", 0xF3},
      {"ocirc", 0xF4},   {"oelig", 0x153},  {"ograve", 0xF2},  {"ordf", 0xAA},
      {"ordm", 0xBA},    {"oslash", 0xF8},  {"otilde", 0xF5},  {"ouml", 0xF6},
      {"para", 0xB6},    {"plusmn", 0xB1},  {"pound", 0xA3},   {"quot", 0x22},
      {"raquo", 0xBB},   {"rdquo", 0x201D}, {"reg", 0xAE},     {"rsquo", 0x2019},
      {"sect", 0xA7},    {"shy", 0xAD},     {"sup1", 0xB9},    {"sup2", 0xB2},
      {"sup3", 0xB3},    {"szlig", 0xDF},   {"thorn", 0xFE},   {"times", 0xD7},
      {"trade", 0x2122}, {"uacute", 0xFA},  {"ucirc", 0xFB},   {"ugrave", 0xF9},
      {"uml", 0xA8},     {"uuml", 0xFC},    {"yacute", 0xFD},  {"yen", 0xA5},
      {"yuml", 0xFF},
  }};
  std::sort(table.begin(), table.end(),
            [](const NamedEntity& a, const NamedEntity& b) { return a.name < b.name; });
  return table;
}();

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
}

// Decodes one code point at `i` and advances past it. Malformed, overlong
// and surrogate sequences consume one byte and yield U+FFFD.
char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  std::size_t len = 0;
  char32_t cp = 0;
  char32_t min = 0;
  if ((b0 & 0xE0) == 0xC0) {
    len = 2, cp = b0 & 0x1F, min = 0x80;
  } else if ((b0 & 0xF0) == 0xE0) {
    len = 3, cp = b0 & 0x0F, min = 0x800;
  } else if ((b0 & 0xF8) == 0xF0) {
    len = 4, cp = b0 & 0x07, min = 0x10000;
  } else {
    ++i;
    return kReplacement;
  }
  if (i + len > s.size()) {
    ++i;
    return kReplacement;
  }
  for (std::size_t k = 1; k < len; ++k) {
    const auto b = static_cast<unsigned char>(s[i + k]);
    if ((b & 0xC0) != 0x80) {
      ++i;
      return kReplacement;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
    ++i;
    return kReplacement;
  }
  i += len;
  return cp;
}

char32_t sanitize_code_point(std::uint32_t cp) {
  if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
    return kReplacement;
  }
  return cp;
}

std::string make_valid_utf8(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size();) append_utf8(out, next_code_point(s, i));
  return out;
}

bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }
bool is_ascii_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }

int hex_value(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

std::optional<std::uint32_t> read_hex4(std::string_view s, std::size_t at) {
  if (at + 4 > s.size()) return std::nullopt;
  std::uint32_t v = 0;
  for (std::size_t k = 0; k < 4; ++k) {
    const int h = hex_value(s[at + k]);
    if (h < 0) return std::nullopt;
    v = (v << 4) | static_cast<std::uint32_t>(h);
  }
  return v;
}

// Tries to decode "&...;" at s[i]. On success appends the character and
// returns the number of bytes consumed, else 0.
std::size_t decode_entity_at(std::string_view s, std::size_t i, std::string& out) {
  const auto window = s.substr(i + 1, 12);
  const auto offset = window.find(';');
  if (offset == std::string_view::npos) return 0;
  const auto semi = i + 1 + offset;
  const auto body = s.substr(i + 1, semi - i - 1);
  if (body.empty()) return 0;
  if (body[0] == '#') {
    std::uint32_t value = 0;
    std::size_t digits = 0;
    if (body.size() > 1 && (body[1] == 'x' || body[1] == 'X')) {
      for (char c : body.substr(2)) {
        const int h = hex_value(c);
        if (h < 0) return 0;
        value = (value << 4) | static_cast<std::uint32_t>(h);
        ++digits;
      }
    } else {
      for (char c : body.substr(1)) {
        if (!is_ascii_digit(c)) return 0;
        value = value * 10 + static_cast<std::uint32_t>(c - '0');
        ++digits;
      }
    }
    if (digits == 0 || digits > 8) return 0;
    append_utf8(out, sanitize_code_point(value));
    return semi - i + 1;
  }
  const auto it = std::lower_bound(
      kEntities.begin(), kEntities.end(), body,
      [](const NamedEntity& e, std::string_view name) { return e.name < name; });
  if (it == kEntities.end() || it->name != body) return 0;
  append_utf8(out, it->code);
  return semi - i + 1;
}

// Tries to decode "\uXXXX" (optionally a surrogate pair) at s[i].
std::size_t decode_escape_at(std::string_view s, std::size_t i, std::string& out) {
  if (i + 1 >= s.size() || s[i + 1] != 'u') return 0;
  const auto hi = read_hex4(s, i + 2);
  if (!hi) return 0;
  if (*hi >= 0xD800 && *hi <= 0xDBFF) {
    if (i + 12 <= s.size() && s[i + 6] == '\\' && s[i + 7] == 'u') {
      const auto lo = read_hex4(s, i + 8);
      if (lo && *lo >= 0xDC00 && *lo <= 0xDFFF) {
        append_utf8(out, 0x10000 + ((*hi - 0xD800) << 10) + (*lo - 0xDC00));
        return 12;
      }
    }
    append_utf8(out, kReplacement);
    return 6;
  }
  append_utf8(out, sanitize_code_point(*hi));
  return 6;
}

char32_t lower_code_point(char32_t c) {
  if (c < 0x80) return (c >= 'A' && c <= 'Z') ? c + 0x20 : c;
  if (c >= 0xC0 && c <= 0xDE && c != 0xD7) return c + 0x20;
  if (c >= 0x100 && c <= 0x17F) {
    if (c == 0x130) return U'i';
    if (c == 0x178) return 0xFF;
    const bool even_upper = (c <= 0x137) || (c >= 0x14A && c <= 0x177);
    const bool odd_upper = (c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17E);
    if (even_upper && c % 2 == 0) return c + 1;
    if (odd_upper && c % 2 == 1) return c + 1;
    return c;
  }
  if ((c >= 0x200 && c <= 0x21F) || (c >= 0x222 && c <= 0x233)) {
    return c % 2 == 0 ? c + 1 : c;
  }
  if (c >= 0x370 && c <= 0x3FF) {
    if (c == 0x386) return 0x3AC;
    if (c >= 0x388 && c <= 0x38A) return c + 37;
    if (c == 0x38C) return 0x3CC;
    if (c == 0x38E || c == 0x38F) return c + 63;
    if ((c >= 0x391 && c <= 0x3A1) || (c >= 0x3A3 && c <= 0x3AB)) return c + 32;
    return c;
  }
  if (c >= 0x400 && c <= 0x52F) {
    if (c <= 0x40F) return c + 80;
    if (c <= 0x42F) return c + 32;
    if (c == 0x4C0) return 0x4CF;
    if ((c >= 0x460 && c <= 0x481) || (c >= 0x48A && c <= 0x4BF) ||
        (c >= 0x4D0 && c <= 0x52F)) {
      return c % 2 == 0 ? c + 1 : c;
    }
    if (c >= 0x4C1 && c <= 0x4CE) return c % 2 == 1 ? c + 1 : c;
    return c;
  }
  if (c >= 0x531 && c <= 0x556) return c + 48;
  if (c >= 0x1E00 && c <= 0x1EFF) {
    if (c == 0x1E9E) return 0xDF;
    if (c <= 0x1E95 || c >= 0x1EA0) return c % 2 == 0 ? c + 1 : c;
    return c;
  }
  if (c >= 0xFF21 && c <= 0xFF3A) return c + 32;
  return c;
}

// Whitespace as far as tokenization is concerned: ASCII blanks plus the
// Unicode space separators that entity decoding can produce.
std::size_t space_length_at(std::string_view s, std::size_t i) {
  const auto b = static_cast<unsigned char>(s[i]);
  if (b == ' ' || b == '\t' || b == '\n' || b == '\r' || b == '\f' || b == '\v') {
    return 1;
  }
  if (b < 0x80) return 0;
  std::size_t j = i;
  const char32_t cp = next_code_point(s, j);
  const bool space = cp == 0xA0 || cp == 0x1680 || (cp >= 0x2000 && cp <= 0x200A) ||
                     cp == 0x2028 || cp == 0x2029 || cp == 0x202F || cp == 0x205F ||
                     cp == 0x3000;
  return space ? j - i : 0;
}

std::vector<std::string> split_tokens(std::string_view s) {
  std::vector<std::string> tokens;
  std::string current;
  for (std::size_t i = 0; i < s.size();) {
    if (const auto n = space_length_at(s, i); n > 0) {
      if (!current.empty()) tokens.push_back(std::move(current));
      current.clear();
      i += n;
    } else {
      current += s[i++];
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

// Non-ASCII bytes count as word characters so "www." inside a longer word
// with accents is not taken for a link.
bool is_word_byte(char c) {
  return is_ascii_alpha(c) || is_ascii_digit(c) ||
         static_cast<unsigned char>(c) >= 0x80;
}

void replace_links(std::string& token) {
  for (std::size_t p = 0; p < token.size(); ++p) {
    if (p > 0 && is_word_byte(token[p - 1])) continue;
    const std::string_view rest(token.data() + p, token.size() - p);
    if (rest.starts_with("http://") || rest.starts_with("https://") ||
        rest.starts_with("www.")) {
      token.replace(p, std::string::npos, kWeblinkToken);
      return;
    }
  }
}

void replace_numbers(std::string& token) {
  std::string out;
  for (std::size_t i = 0; i < token.size();) {
    if (!is_ascii_digit(token[i])) {
      out += token[i++];
      continue;
    }
    std::size_t j = i;
    while (j < token.size() && is_ascii_digit(token[j])) ++j;
    while (j + 1 < token.size() && (token[j] == '.' || token[j] == ',') &&
           is_ascii_digit(token[j + 1])) {
      ++j;
      while (j < token.size() && is_ascii_digit(token[j])) ++j;
    }
    out += kNumberToken;
    i = j;
  }
  token = std::move(out);
}

}  // namespace

std::string decode_entities(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    std::size_t used = 0;
    if (text[i] == '&') {
      used = decode_entity_at(text, i, out);
    } else if (text[i] == '\\') {
      used = decode_escape_at(text, i, out);
    }
    if (used > 0) {
      i += used;
    } else {
      out += text[i++];
    }
  }
  return out;
}

std::string to_lower_utf8(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size();) {
    const auto b = static_cast<unsigned char>(text[i]);
    if (b < 0x80) {
      out += static_cast<char>(lower_code_point(b));
      ++i;
    } else {
      append_utf8(out, lower_code_point(next_code_point(text, i)));
    }
  }
  return out;
}

NormalizedText normalize(std::string_view raw) {
  std::string text = make_valid_utf8(raw);
  // Decoding shrinks the text whenever it changes anything and lowercasing
  // never grows it, so this reaches a fixpoint; the bound is a backstop.
  for (int pass = 0; pass < 64; ++pass) {
    auto next = to_lower_utf8(decode_entities(text));
    if (next == text) break;
    text = std::move(next);
  }

  std::string out;
  std::string previous;
  bool first = true;
  for (auto& token : split_tokens(text)) {
    replace_links(token);
    replace_numbers(token);
    if (!first && token == previous) continue;
    if (!first) out += ' ';
    out += token;
    previous = std::move(token);
    first = false;
  }
  return NormalizedText(std::move(out));
}

}  // namespace earlyrisk
