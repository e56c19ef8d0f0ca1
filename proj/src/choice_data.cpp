#include "choicecheck/choice_data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "choicecheck/error.hpp"
#include "csv.hpp"

namespace choicecheck {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::optional<double> parse_double(std::string_view s) {
  std::string t = trim(s);
  std::string_view v = t;
  if (!v.empty() && v.front() == '+') v.remove_prefix(1);
  if (v.empty()) return std::nullopt;
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc{} || ptr != v.data() + v.size()) return std::nullopt;
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string Column::cell(std::size_t row) const { return numeric ? format_double(values[row]) : text[row]; }

bool operator==(const Column& a, const Column& b) {
  return a.name == b.name && a.numeric == b.numeric && a.values == b.values && a.text == b.text;
}

bool operator==(const ChoiceDataset& a, const ChoiceDataset& b) {
  if (!std::ranges::equal(a.obs_ids(), b.obs_ids()) || !std::ranges::equal(a.alt_ids(), b.alt_ids()) ||
      !std::ranges::equal(a.choices(), b.choices())) {
    return false;
  }
  return a.columns() == b.columns();
}

ChoiceDataset ChoiceDataset::from_columns(std::vector<std::int64_t> obs_ids, std::vector<std::int64_t> alt_ids,
                                          std::vector<std::uint8_t> choices, std::vector<Column> columns) {
  const std::size_t n = obs_ids.size();
  if (alt_ids.size() != n || choices.size() != n) {
    throw ValidationError("obs_id, alt_id and choice columns differ in length");
  }
  ChoiceDataset ds;
  for (std::size_t c = 0; c < columns.size(); ++c) {
    const Column& col = columns[c];
    if (col.size() != n) throw ValidationError("column '" + col.name + "' has wrong length");
    if (!ds.column_index_.emplace(col.name, c).second) throw ValidationError("duplicate column '" + col.name + "'");
    if (col.numeric) {
      for (std::size_t r = 0; r < n; ++r) {
        if (!std::isfinite(col.values[r])) {
          throw ValidationError("column '" + col.name + "' has non-finite value at row " + std::to_string(r + 1));
        }
      }
    }
  }

  auto structure = std::make_shared<ChoiceStructure>();
  std::unordered_map<std::int64_t, std::size_t> set_of;
  structure->row_set.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    if (choices[r] > 1) throw ValidationError("choice must be 0 or 1 at row " + std::to_string(r + 1));
    auto [it, inserted] = set_of.emplace(obs_ids[r], structure->set_rows.size());
    if (inserted) {
      structure->set_rows.emplace_back();
      structure->set_obs_ids.push_back(obs_ids[r]);
    }
    structure->set_rows[it->second].push_back(r);
    structure->row_set[r] = it->second;
  }

  std::vector<std::int64_t> duplicate_obs;
  std::vector<std::int64_t> bad_choice_obs;
  std::vector<std::uint32_t> chosen(structure->n_sets());
  for (std::size_t s = 0; s < structure->n_sets(); ++s) {
    auto& rows = structure->set_rows[s];
    std::ranges::stable_sort(rows, {}, [&](std::size_t r) { return alt_ids[r]; });
    std::size_t n_chosen = 0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if (k > 0 && alt_ids[rows[k]] == alt_ids[rows[k - 1]]) {
        if (duplicate_obs.empty() || duplicate_obs.back() != structure->set_obs_ids[s]) {
          duplicate_obs.push_back(structure->set_obs_ids[s]);
        }
      }
      if (choices[rows[k]] == 1) {
        ++n_chosen;
        chosen[s] = static_cast<std::uint32_t>(rows[k]);
      }
    }
    if (n_chosen != 1) bad_choice_obs.push_back(structure->set_obs_ids[s]);
  }
  auto list = [](const std::vector<std::int64_t>& ids) {
    std::string out;
    for (std::size_t i = 0; i < ids.size() && i < 50; ++i) out += (i ? ", " : "") + std::to_string(ids[i]);
    if (ids.size() > 50) out += ", ... (" + std::to_string(ids.size()) + " total)";
    return out;
  };
  if (!duplicate_obs.empty()) {
    throw ValidationError("duplicate (obs_id, alt_id) pairs for obs_id " + list(duplicate_obs));
  }
  if (!bad_choice_obs.empty()) {
    throw ValidationError("choice sets without exactly one chosen alternative: obs_id " + list(bad_choice_obs));
  }

  ds.obs_ids_ = std::move(obs_ids);
  ds.alt_ids_ = std::move(alt_ids);
  ds.choices_ = std::move(choices);
  ds.columns_ = std::move(columns);
  ds.structure_ = std::move(structure);
  ds.chosen_rows_ = std::move(chosen);
  return ds;
}

bool ChoiceDataset::has_column(const std::string& name) const { return column_index_.contains(name); }

const Column& ChoiceDataset::column(const std::string& name) const {
  const auto it = column_index_.find(name);
  if (it == column_index_.end()) throw SpecError("unknown variable '" + name + "'");
  return columns_[it->second];
}

ChoiceDataset ChoiceDataset::with_numeric_column(const std::string& name, std::vector<double> values) const {
  const auto it = column_index_.find(name);
  if (it == column_index_.end()) throw SpecError("unknown variable '" + name + "'");
  if (!columns_[it->second].numeric) throw SpecError("variable '" + name + "' is categorical");
  if (values.size() != n_rows()) throw DimensionError("replacement column '" + name + "' has wrong length");
  for (double v : values) {
    if (!std::isfinite(v)) throw DomainError("replacement column '" + name + "' has non-finite values");
  }
  ChoiceDataset copy = *this;
  copy.columns_[it->second].values = std::move(values);
  return copy;
}

ChoiceDataset ChoiceDataset::subset_sets(std::span<const std::size_t> set_indices) const {
  std::vector<std::size_t> rows;
  for (std::size_t s : set_indices) {
    if (s >= n_sets()) throw DimensionError("choice-set index out of range");
    // original relative order inside the set
    std::vector<std::size_t> in_set = structure_->set_rows[s];
    std::ranges::sort(in_set);
    rows.insert(rows.end(), in_set.begin(), in_set.end());
  }
  std::vector<std::int64_t> obs, alt;
  std::vector<std::uint8_t> ch;
  obs.reserve(rows.size());
  alt.reserve(rows.size());
  ch.reserve(rows.size());
  for (std::size_t r : rows) {
    obs.push_back(obs_ids_[r]);
    alt.push_back(alt_ids_[r]);
    ch.push_back(choices_[r]);
  }
  std::vector<Column> cols;
  cols.reserve(columns_.size());
  for (const Column& c : columns_) {
    Column out{c.name, c.numeric, {}, {}};
    for (std::size_t r : rows) {
      if (c.numeric) {
        out.values.push_back(c.values[r]);
      } else {
        out.text.push_back(c.text[r]);
      }
    }
    cols.push_back(std::move(out));
  }
  return from_columns(std::move(obs), std::move(alt), std::move(ch), std::move(cols));
}

namespace {

ColumnTransforms transforms_from_json(const nlohmann::json& j) {
  ColumnTransforms t;
  if (j.contains("categorical")) t.categorical = j.at("categorical").get<std::vector<std::string>>();
  if (j.contains("value_maps")) {
    t.value_maps = j.at("value_maps").get<std::map<std::string, std::map<std::string, std::string>>>();
  }
  if (j.contains("derived")) {
    for (const auto& d : j.at("derived")) {
      ColumnTransforms::Derived out;
      out.name = d.at("name").get<std::string>();
      out.source = d.at("source").get<std::string>();
      out.scale = d.value("scale", 1.0);
      out.offset = d.value("offset", 0.0);
      t.derived.push_back(std::move(out));
    }
  }
  return t;
}

std::int64_t parse_int(const std::string& cell, const std::string& what, std::size_t line) {
  const std::string t = trim(cell);
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc{} || ptr != t.data() + t.size()) {
    throw ParseError(what + " is not an integer at line " + std::to_string(line) + ": '" + cell + "'");
  }
  return v;
}

// Cells of one raw variable plus the input line of each row, for messages.
struct RawColumn {
  std::string name;
  std::vector<std::string> cells;
};

Column infer_column(RawColumn raw, const std::vector<std::size_t>& lines, const ColumnTransforms& t) {
  if (const auto it = t.value_maps.find(raw.name); it != t.value_maps.end()) {
    for (auto& cell : raw.cells) {
      const auto m = it->second.find(trim(cell));
      if (m != it->second.end()) cell = m->second;
    }
  }
  Column col;
  col.name = raw.name;
  const bool forced_categorical = std::ranges::find(t.categorical, raw.name) != t.categorical.end();
  if (!forced_categorical) {
    std::vector<double> values(raw.cells.size());
    bool all_numeric = true;
    bool only_blanks_fail = true;
    std::optional<std::size_t> first_blank;
    std::size_t parsed = 0;
    for (std::size_t r = 0; r < raw.cells.size(); ++r) {
      if (const auto v = parse_double(raw.cells[r])) {
        values[r] = *v;
        ++parsed;
        continue;
      }
      all_numeric = false;
      if (trim(raw.cells[r]).empty()) {
        if (!first_blank) first_blank = r;
      } else {
        only_blanks_fail = false;
      }
    }
    // A numeric column with holes is missing data, not a categorical column.
    if (!all_numeric && only_blanks_fail && parsed > 0) {
      throw ParseError("empty numeric cell in column '" + raw.name + "' at line " +
                       std::to_string(lines[*first_blank]));
    }
    if (all_numeric) {
      for (std::size_t r = 0; r < values.size(); ++r) {
        if (!std::isfinite(values[r])) {
          throw ParseError("non-finite value in column '" + raw.name + "' at line " + std::to_string(lines[r]));
        }
      }
      col.numeric = true;
      col.values = std::move(values);
      return col;
    }
  }
  col.numeric = false;
  col.text.reserve(raw.cells.size());
  for (auto& cell : raw.cells) col.text.push_back(trim(cell));
  return col;
}

std::vector<Column> finish_columns(std::vector<RawColumn> raws, const std::vector<std::size_t>& lines,
                                   const ColumnTransforms& t) {
  std::vector<Column> cols;
  cols.reserve(raws.size() + t.derived.size());
  for (auto& raw : raws) cols.push_back(infer_column(std::move(raw), lines, t));
  for (const auto& d : t.derived) {
    const auto src = std::ranges::find(cols, d.source, &Column::name);
    if (src == cols.end()) throw SchemaError("derived column '" + d.name + "' references missing '" + d.source + "'");
    if (!src->numeric) throw SchemaError("derived column '" + d.name + "' needs numeric source '" + d.source + "'");
    if (std::ranges::find(cols, d.name, &Column::name) != cols.end()) {
      throw SchemaError("derived column '" + d.name + "' already exists");
    }
    Column out{d.name, true, {}, {}};
    out.values.reserve(src->values.size());
    for (double v : src->values) out.values.push_back(v * d.scale + d.offset);
    cols.push_back(std::move(out));
  }
  return cols;
}

std::uint8_t parse_choice(const std::string& cell, std::size_t line) {
  const auto v = parse_double(cell);
  if (!v || (*v != 0.0 && *v != 1.0)) {
    throw ParseError("choice must be 0 or 1 at line " + std::to_string(line) + ": '" + cell + "'");
  }
  return static_cast<std::uint8_t>(*v);
}

}  // namespace

LongSchema long_schema_from_json(const nlohmann::json& j) {
  LongSchema s;
  s.obs_id = j.value("obs_id", s.obs_id);
  s.alt_id = j.value("alt_id", s.alt_id);
  s.choice = j.value("choice", s.choice);
  s.transforms = transforms_from_json(j);
  return s;
}

WideSchema wide_schema_from_json(const nlohmann::json& j) {
  WideSchema s;
  try {
    s.obs_id = j.at("obs_id").get<std::string>();
    s.choice = j.value("choice", s.choice);
    s.choice_prefix = j.value("choice_prefix", std::string{});
    s.n_alternatives = j.at("n_alternatives").get<int>();
    s.alt_vars = j.value("alt_vars", std::vector<std::string>{});
    s.case_vars = j.value("case_vars", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("wide schema: ") + e.what());
  }
  if (s.n_alternatives < 1) throw SchemaError("wide schema: n_alternatives must be >= 1");
  s.transforms = transforms_from_json(j);
  return s;
}

ChoiceDataset load_long_csv(const std::filesystem::path& path, const LongSchema& schema) {
  const csv::Table table = csv::read(path);
  const int obs_col = table.find(schema.obs_id);
  const int alt_col = table.find(schema.alt_id);
  const int choice_col = table.find(schema.choice);
  std::string missing;
  for (const auto& [idx, name] : {std::pair{obs_col, schema.obs_id}, {alt_col, schema.alt_id}, {choice_col, schema.choice}}) {
    if (idx < 0) missing += (missing.empty() ? "" : ", ") + name;
  }
  if (!missing.empty()) throw SchemaError(path.string() + ": missing required column(s) " + missing);

  const std::size_t n = table.rows.size();
  std::vector<std::size_t> lines(n);
  std::vector<std::int64_t> obs(n), alt(n);
  std::vector<std::uint8_t> ch(n);
  for (std::size_t r = 0; r < n; ++r) {
    lines[r] = r + 2;
    const auto& row = table.rows[r];
    obs[r] = parse_int(row[obs_col], schema.obs_id, lines[r]);
    alt[r] = parse_int(row[alt_col], schema.alt_id, lines[r]);
    ch[r] = parse_choice(row[choice_col], lines[r]);
  }
  std::vector<RawColumn> raws;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (static_cast<int>(c) == obs_col || static_cast<int>(c) == alt_col || static_cast<int>(c) == choice_col) continue;
    RawColumn raw{trim(table.header[c]), {}};
    raw.cells.reserve(n);
    for (const auto& row : table.rows) raw.cells.push_back(row[c]);
    raws.push_back(std::move(raw));
  }
  auto cols = finish_columns(std::move(raws), lines, schema.transforms);
  return ChoiceDataset::from_columns(std::move(obs), std::move(alt), std::move(ch), std::move(cols));
}

ChoiceDataset load_wide_csv(const std::filesystem::path& path, const WideSchema& schema) {
  const csv::Table table = csv::read(path);
  const int obs_col = table.find(schema.obs_id);
  const int choice_col = table.find(schema.choice);
  std::vector<std::string> missing;
  if (obs_col < 0) missing.push_back(schema.obs_id);
  if (choice_col < 0) missing.push_back(schema.choice);
  std::vector<std::vector<int>> alt_cols(schema.alt_vars.size());
  for (std::size_t v = 0; v < schema.alt_vars.size(); ++v) {
    for (int j = 1; j <= schema.n_alternatives; ++j) {
      const std::string name = schema.alt_vars[v] + std::to_string(j);
      const int idx = table.find(name);
      if (idx < 0) missing.push_back(name);
      alt_cols[v].push_back(idx);
    }
  }
  std::vector<int> case_cols;
  for (const auto& name : schema.case_vars) {
    const int idx = table.find(name);
    if (idx < 0) missing.push_back(name);
    case_cols.push_back(idx);
  }
  if (!missing.empty()) {
    std::string msg;
    for (const auto& m : missing) msg += (msg.empty() ? "" : ", ") + m;
    throw SchemaError(path.string() + ": missing required column(s) " + msg);
  }

  const std::size_t J = static_cast<std::size_t>(schema.n_alternatives);
  const std::size_t n = table.rows.size() * J;
  std::vector<std::size_t> lines(n);
  std::vector<std::int64_t> obs(n), alt(n);
  std::vector<std::uint8_t> ch(n);
  std::vector<RawColumn> raws;
  for (const auto& v : schema.alt_vars) raws.push_back({v, {}});
  for (const auto& v : schema.case_vars) raws.push_back({v, {}});
  for (auto& raw : raws) raw.cells.reserve(n);

  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const std::size_t line = i + 2;
    const std::int64_t id = parse_int(row[obs_col], schema.obs_id, line);
    std::string choice_cell = trim(row[choice_col]);
    if (!schema.choice_prefix.empty()) {
      if (choice_cell.rfind(schema.choice_prefix, 0) != 0) {
        throw ParseError("choice value '" + choice_cell + "' lacks prefix '" + schema.choice_prefix + "' at line " +
                         std::to_string(line));
      }
      choice_cell = choice_cell.substr(schema.choice_prefix.size());
    }
    const std::int64_t chosen = parse_int(choice_cell, schema.choice, line);
    for (std::size_t j = 0; j < J; ++j) {
      const std::size_t r = i * J + j;
      lines[r] = line;
      obs[r] = id;
      alt[r] = static_cast<std::int64_t>(j + 1);
      ch[r] = chosen == static_cast<std::int64_t>(j + 1) ? 1 : 0;
      for (std::size_t v = 0; v < schema.alt_vars.size(); ++v) raws[v].cells.push_back(row[alt_cols[v][j]]);
      for (std::size_t v = 0; v < schema.case_vars.size(); ++v) {
        raws[schema.alt_vars.size() + v].cells.push_back(row[case_cols[v]]);
      }
    }
  }
  auto cols = finish_columns(std::move(raws), lines, schema.transforms);
  return ChoiceDataset::from_columns(std::move(obs), std::move(alt), std::move(ch), std::move(cols));
}

void write_long_csv(const ChoiceDataset& data, const std::filesystem::path& path, const LongSchema& schema) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << csv::escape(schema.obs_id) << ',' << csv::escape(schema.alt_id) << ',' << csv::escape(schema.choice);
  for (const auto& c : data.columns()) out << ',' << csv::escape(c.name);
  out << '\n';
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    out << data.obs_ids()[r] << ',' << data.alt_ids()[r] << ',' << int{data.choices()[r]};
    for (const auto& c : data.columns()) out << ',' << csv::escape(c.cell(r));
    out << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<std::uint8_t> match_rows(const ChoiceDataset& data, const std::string& variable, const std::string& value) {
  const Column& col = data.column(variable);
  std::vector<std::uint8_t> out(data.n_rows(), 0);
  if (col.numeric) {
    const auto target = parse_double(value);
    if (!target) return out;
    for (std::size_t r = 0; r < out.size(); ++r) out[r] = col.values[r] == *target;
  } else {
    const std::string target = trim(value);
    for (std::size_t r = 0; r < out.size(); ++r) out[r] = col.text[r] == target;
  }
  return out;
}

std::vector<std::string> distinct_values(const ChoiceDataset& data, const std::string& variable,
                                         std::span<const std::uint8_t> mask) {
  const Column& col = data.column(variable);
  auto selected = [&](std::size_t r) { return mask.empty() || mask[r]; };
  std::vector<std::string> out;
  if (col.numeric) {
    std::set<double> seen;
    for (std::size_t r = 0; r < col.values.size(); ++r) {
      if (selected(r)) seen.insert(col.values[r]);
    }
    for (double v : seen) out.push_back(format_double(v));
  } else {
    std::set<std::string> seen;
    for (std::size_t r = 0; r < col.text.size(); ++r) {
      if (selected(r)) seen.insert(col.text[r]);
    }
    out.assign(seen.begin(), seen.end());
  }
  return out;
}

}  // namespace choicecheck
