#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ticl/error.hpp"

namespace ticl::detail {

using json = nlohmann::json;

struct JsonLine {
    std::size_t line_number = 0; // 1-based
    json value;
};

/// Parses line-delimited JSON. Whitespace-only lines are skipped.
std::vector<JsonLine> parse_jsonl(std::string_view text, std::string_view source_name);
std::vector<JsonLine> read_jsonl(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view contents);

std::string required_string(const json& obj, std::string_view key, std::string_view where);
std::string optional_string(const json& obj, std::string_view key, std::string_view where);

} // namespace ticl::detail
