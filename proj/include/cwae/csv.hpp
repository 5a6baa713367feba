#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace cwae {

/// Header plus string cells, exactly as read.
struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Comma-separated, first line is the header. Double-quoted fields may hold
/// commas, newlines and "" escapes. A trailing newline is optional; CRLF is
/// accepted. Throws ValidationError on an empty input or unterminated quote.
RawTable parse_csv(std::string_view text);

RawTable read_csv(const std::filesystem::path& path);

/// Quotes a field when it contains a comma, quote or newline.
std::string csv_escape(std::string_view field);

/// Reads a whole file; throws IoError.
std::string read_file(const std::filesystem::path& path);

/// Writes a whole file (binary mode); throws IoError.
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace cwae
