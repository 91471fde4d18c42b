#include "json_io.hpp"

#include <fstream>
#include <iterator>

namespace ticl::detail {

std::vector<JsonLine> parse_jsonl(std::string_view text, std::string_view source_name) {
    std::vector<JsonLine> out;
    std::size_t line_number = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

        json value = json::parse(line, nullptr, false);
        if (value.is_discarded()) {
            fail(ErrorCode::ParseError, std::string(source_name) + ":" + std::to_string(line_number) + ": malformed record");
        }
        if (!value.is_object()) {
            fail(ErrorCode::ParseError, std::string(source_name) + ":" + std::to_string(line_number) + ": record is not an object");
        }
        out.push_back({line_number, std::move(value)});
    }
    return out;
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::IoError, "cannot open " + path.string());
    return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_text_file(const std::filesystem::path& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::IoError, "cannot open " + path.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) fail(ErrorCode::IoError, "write failed for " + path.string());
}

std::vector<JsonLine> read_jsonl(const std::filesystem::path& path) {
    return parse_jsonl(read_text_file(path), path.filename().string());
}

std::string required_string(const json& obj, std::string_view key, std::string_view where) {
    auto it = obj.find(key);
    if (it == obj.end()) fail(ErrorCode::ParseError, std::string(where) + ": missing key \"" + std::string(key) + "\"");
    if (!it->is_string()) {
        fail(ErrorCode::ParseError, std::string(where) + ": key \"" + std::string(key) + "\" must be a string");
    }
    return it->get<std::string>();
}

std::string optional_string(const json& obj, std::string_view key, std::string_view where) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return {};
    if (!it->is_string()) {
        fail(ErrorCode::ParseError, std::string(where) + ": key \"" + std::string(key) + "\" must be a string");
    }
    return it->get<std::string>();
}

} // namespace ticl::detail
