#include "costroute/io.hpp"

#include <fstream>
#include <sstream>
#include <system_error>

#include "costroute/error.hpp"
#include "costroute/rng.hpp"

namespace costroute {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::Io, "cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  auto tmp = path;
  tmp += ".tmp" + std::to_string(hash_string(path.string()) & 0xffff);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::Io, "cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) fail(Errc::Io, "short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail(Errc::Io, "cannot rename into " + path.string());
  }
}

namespace {

template <typename Json>
std::vector<Json> parse_rows(std::string_view text, std::string_view source_name) {
  std::vector<Json> rows;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(pos, end - pos);
    ++line_no;
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) {
      try {
        rows.push_back(Json::parse(line));
      } catch (const nlohmann::json::exception& e) {
        fail(Errc::Parse, std::string(source_name) + ":" + std::to_string(line_no) + ": " + e.what());
      }
    }
    pos = end + 1;
  }
  return rows;
}

}  // namespace

std::vector<nlohmann::json> parse_jsonl(std::string_view text, std::string_view source_name) {
  return parse_rows<nlohmann::json>(text, source_name);
}

std::vector<ordered_json> parse_jsonl_ordered(std::string_view text, std::string_view source_name) {
  return parse_rows<ordered_json>(text, source_name);
}

std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path) {
  return parse_jsonl(read_text_file(path), path.string());
}

std::string to_jsonl(const std::vector<ordered_json>& rows) {
  std::string out;
  for (const auto& row : rows) {
    out += row.dump();
    out += '\n';
  }
  return out;
}

}  // namespace costroute
