#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace costroute {

using ordered_json = nlohmann::ordered_json;

std::string read_text_file(const std::filesystem::path& path);

/// Writes via a sibling temp file and rename so readers never see a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Parses one JSON value per non-blank line.
std::vector<nlohmann::json> parse_jsonl(std::string_view text, std::string_view source_name);
/// Same, keeping key order.
std::vector<ordered_json> parse_jsonl_ordered(std::string_view text, std::string_view source_name);
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);

std::string to_jsonl(const std::vector<ordered_json>& rows);

}  // namespace costroute
