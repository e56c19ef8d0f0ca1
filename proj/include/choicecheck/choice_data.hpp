#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace choicecheck {

// A raw variable. Numeric columns hold finite doubles; categorical columns
// hold whitespace-trimmed strings.
struct Column {
  std::string name;
  bool numeric = true;
  std::vector<double> values;
  std::vector<std::string> text;

  std::size_t size() const { return numeric ? values.size() : text.size(); }
  // Cell rendered as text: the stored string, or the shortest round-trip form.
  std::string cell(std::size_t row) const;
};

// Grouping of dataset rows into choice sets. Sets are ordered by first
// appearance of their obs_id; rows inside a set are ordered by alt_id.
struct ChoiceStructure {
  std::vector<std::vector<std::size_t>> set_rows;
  std::vector<std::int64_t> set_obs_ids;
  std::vector<std::size_t> row_set;

  std::size_t n_sets() const { return set_rows.size(); }
  std::size_t n_rows() const { return row_set.size(); }
};

// Long-format choice data: one row per (decision-maker, alternative).
// Immutable after construction.
class ChoiceDataset {
 public:
  ChoiceDataset() = default;

  // Validates the choice-set invariants; throws ValidationError listing every
  // offending obs_id.
  static ChoiceDataset from_columns(std::vector<std::int64_t> obs_ids, std::vector<std::int64_t> alt_ids,
                                    std::vector<std::uint8_t> choices, std::vector<Column> columns);

  std::size_t n_rows() const { return obs_ids_.size(); }
  std::size_t n_sets() const { return structure_->n_sets(); }

  std::span<const std::int64_t> obs_ids() const { return obs_ids_; }
  std::span<const std::int64_t> alt_ids() const { return alt_ids_; }
  std::span<const std::uint8_t> choices() const { return choices_; }
  const std::shared_ptr<const ChoiceStructure>& structure() const { return structure_; }

  // Row index of the chosen alternative in each set.
  const std::vector<std::uint32_t>& chosen_rows() const { return chosen_rows_; }

  const std::vector<Column>& columns() const { return columns_; }
  bool has_column(const std::string& name) const;
  // Throws SpecError for unknown names.
  const Column& column(const std::string& name) const;

  // Copy with one numeric column's values replaced (same length).
  ChoiceDataset with_numeric_column(const std::string& name, std::vector<double> values) const;

  // Copy restricted to the given choice sets, in the given order.
  ChoiceDataset subset_sets(std::span<const std::size_t> set_indices) const;

 private:
  std::vector<std::int64_t> obs_ids_;
  std::vector<std::int64_t> alt_ids_;
  std::vector<std::uint8_t> choices_;
  std::vector<Column> columns_;
  std::map<std::string, std::size_t> column_index_;
  std::shared_ptr<const ChoiceStructure> structure_ = std::make_shared<ChoiceStructure>();
  std::vector<std::uint32_t> chosen_rows_;
};

bool operator==(const Column& a, const Column& b);
bool operator==(const ChoiceDataset& a, const ChoiceDataset& b);

// Column post-processing applied after reading: categorical relabelling and
// derived (scaled/shifted) numeric copies. Both long and wide loaders use it.
struct ColumnTransforms {
  struct Derived {
    std::string name;
    std::string source;
    double scale = 1.0;
    double offset = 0.0;
  };
  std::vector<std::string> categorical;  // forced categorical even if numeric-looking
  std::map<std::string, std::map<std::string, std::string>> value_maps;
  std::vector<Derived> derived;
};

struct LongSchema {
  std::string obs_id = "obs_id";
  std::string alt_id = "alt_id";
  std::string choice = "choice";
  ColumnTransforms transforms;
};

// Wide layout: one row per decision-maker; alternative-specific variables
// appear as <var><j> for j = 1..n_alternatives; the choice column holds
// <choice_prefix><j> (or plain j when the prefix is empty).
struct WideSchema {
  std::string obs_id;
  std::string choice = "choice";
  std::string choice_prefix;
  int n_alternatives = 0;
  std::vector<std::string> alt_vars;
  std::vector<std::string> case_vars;
  ColumnTransforms transforms;
};

LongSchema long_schema_from_json(const nlohmann::json& j);
WideSchema wide_schema_from_json(const nlohmann::json& j);

ChoiceDataset load_long_csv(const std::filesystem::path& path, const LongSchema& schema = {});
ChoiceDataset load_wide_csv(const std::filesystem::path& path, const WideSchema& schema);

// Writes obs_id, alt_id, choice (names from `schema`) followed by every column.
void write_long_csv(const ChoiceDataset& data, const std::filesystem::path& path, const LongSchema& schema = {});

// Rows whose `variable` equals `value`: numeric columns compare numerically
// against the parsed value, categorical columns by trimmed string equality.
std::vector<std::uint8_t> match_rows(const ChoiceDataset& data, const std::string& variable,
                                     const std::string& value);

// Distinct values of a column restricted to `mask` rows (all rows if empty),
// sorted numerically or lexicographically.
std::vector<std::string> distinct_values(const ChoiceDataset& data, const std::string& variable,
                                         std::span<const std::uint8_t> mask = {});

std::string trim(std::string_view s);
std::optional<double> parse_double(std::string_view s);
std::string format_double(double v);

}  // namespace choicecheck
