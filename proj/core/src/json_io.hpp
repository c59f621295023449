#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace earlyrisk::detail {

std::string read_file(const std::filesystem::path& path);

// Writes through a sibling temporary and renames, so readers never observe a
// half-written file.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& contents);

void write_json(const std::filesystem::path& path, const nlohmann::json& value,
                int indent = 2);

nlohmann::json parse_json(const std::string& text, const std::string& source);

// 1-based line of each element of a top-level JSON array, in order. Returns
// an empty vector when the text is not an array.
std::vector<std::size_t> top_level_element_lines(const std::string& text);

}  // namespace earlyrisk::detail
