#pragma once

// Minimal RFC-4180-ish reader shared by the dataset, ingest and sweep code.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace ulab::detail {

std::vector<std::string> split_csv_line(std::string_view line);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Throws DataError on an unreadable or empty file and on ragged rows.
CsvTable read_csv(const std::filesystem::path& path);

/// Strict double parse of a whole cell; returns false on trailing garbage.
bool parse_double(std::string_view text, double& out);

std::string trim(std::string_view text);

/// Writes content to path via a sibling temporary and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

}  // namespace ulab::detail
