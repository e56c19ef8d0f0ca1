#include "csv.hpp"

#include <fstream>
#include <sstream>

#include "choicecheck/error.hpp"

namespace choicecheck::csv {

int Table::find(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

namespace {

std::vector<std::vector<std::string>> split_records(const std::string& text, const std::filesystem::path& path) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string cell;
  bool in_quotes = false;
  bool cell_started = false;
  std::size_t line = 1;

  auto end_cell = [&] {
    record.push_back(std::move(cell));
    cell.clear();
    cell_started = false;
  };
  auto end_record = [&] {
    end_cell();
    // A blank line yields a single empty cell; skip it.
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };

  std::size_t i = 0;
  if (text.rfind("\xEF\xBB\xBF", 0) == 0) i = 3;
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        cell.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!cell_started || cell.find_first_not_of(" \t") == std::string::npos) {
          cell.clear();
          in_quotes = true;
          cell_started = true;
        } else {
          cell.push_back(c);
        }
        break;
      case ',':
        end_cell();
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        break;
      default:
        cell.push_back(c);
        cell_started = true;
    }
  }
  if (in_quotes) throw ParseError(path.string() + ": unterminated quoted field near line " + std::to_string(line));
  if (cell_started || !cell.empty() || !record.empty()) end_record();
  return records;
}

}  // namespace

Table read(const std::filesystem::path& path, bool has_header) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  auto records = split_records(buf.str(), path);

  Table table;
  if (has_header) {
    if (records.empty()) throw ParseError(path.string() + ": missing header row");
    table.header = std::move(records.front());
    records.erase(records.begin());
  }
  const std::size_t width = has_header ? table.header.size() : (records.empty() ? 0 : records.front().size());
  for (std::size_t r = 0; r < records.size(); ++r) {
    if (records[r].size() != width) {
      throw ParseError(path.string() + ": row " + std::to_string(r + 1) + " has " + std::to_string(records[r].size()) +
                       " fields, expected " + std::to_string(width));
    }
  }
  table.rows = std::move(records);
  return table;
}

std::string escape(const std::string& cell) {
  if (cell.find_first_of(",\"\n\r") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace choicecheck::csv
