#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace choicecheck::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;  // cells exactly as read (quotes removed)

  // Index of a header name or -1.
  int find(const std::string& name) const;
};

// RFC-4180-ish reader: comma separator, optional double quotes with "" escape,
// LF or CRLF line endings, UTF-8 BOM skipped. Throws IoError / ParseError.
Table read(const std::filesystem::path& path, bool has_header = true);

std::string escape(const std::string& cell);

}  // namespace choicecheck::csv
