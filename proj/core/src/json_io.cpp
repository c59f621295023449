#include "json_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <system_error>

#include "earlyrisk/errors.hpp"

namespace earlyrisk::detail {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DataError("cannot open file: " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::string& contents) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error("cannot write file: " + tmp.string());
    }
    out << contents;
    if (!out.flush()) {
      throw Error("short write: " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw Error("cannot rename " + tmp.string() + " to " + path.string() +
                ": " + ec.message());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::json& value,
                int indent) {
  write_file_atomic(path, value.dump(indent) + "\n");
}

nlohmann::json parse_json(const std::string& text, const std::string& source) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    std::size_t line = 1;
    const auto end = std::min<std::size_t>(e.byte, text.size());
    for (std::size_t i = 0; i < end; ++i) {
      if (text[i] == '\n') ++line;
    }
    throw DataError(source + ":" + std::to_string(line) +
                    ": invalid JSON: " + e.what());
  }
}

std::vector<std::size_t> top_level_element_lines(const std::string& text) {
  std::vector<std::size_t> lines;
  std::size_t line = 1;
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  bool expecting_element = false;
  bool seen_root = false;
  for (char ch : text) {
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (ch == '\\') {
        escaped = true;
      } else if (ch == '"') {
        in_string = false;
      }
      if (ch == '\n') ++line;
      continue;
    }
    const bool space = ch == ' ' || ch == '\t' || ch == '\r' || ch == '\n';
    if (depth == 1 && expecting_element && !space && ch != ']') {
      lines.push_back(line);
      expecting_element = false;
    }
    switch (ch) {
      case '\n':
        ++line;
        break;
      case '"':
        in_string = true;
        break;
      case '[':
      case '{':
        if (depth == 0) {
          if (ch != '[' || seen_root) return {};
          seen_root = true;
          expecting_element = true;
        }
        ++depth;
        break;
      case ']':
      case '}':
        --depth;
        break;
      case ',':
        if (depth == 1) expecting_element = true;
        break;
      default:
        break;
    }
  }
  return lines;
}

}  // namespace earlyrisk::detail
