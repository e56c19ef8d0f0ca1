#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "choicecheck/choice_data.hpp"

namespace choicecheck {

enum class TermKind { kLinear, kPiecewise, kInteraction, kConstant };
enum class Segment { kBelow, kAbove };

// Below: min(x, knot). Above: max(x - knot, 0). The two always sum to x.
double piecewise_linear_value(double x, double knot, Segment segment) noexcept;

// One design column.
//
//   linear       variable
//   piecewise    segment of variable split at knot
//   interaction  base * 1(category_variable == category_value), where base is
//                the variable, its piecewise segment when a knot is given, or
//                1 when no variable is given (a pure indicator)
//   constant     1 (alternative-specific constant)
//
// Every term is zero on rows whose alt_id is outside `alternatives`; an empty
// list means all alternatives (not allowed for constants).
struct Term {
  TermKind kind = TermKind::kLinear;
  std::string name;
  std::string variable;
  std::optional<double> knot;
  Segment segment = Segment::kBelow;
  std::string category_variable;
  std::string category_value;
  std::vector<std::int64_t> alternatives;

  bool applies_to(std::int64_t alt_id) const;
};

struct DesignSpec {
  std::vector<Term> terms;

  std::vector<std::string> names() const;
  // Structural checks only (names unique, knots finite, required fields).
  void validate() const;
  // Structural checks plus every referenced variable exists in `data`.
  void validate_against(const ChoiceDataset& data) const;
};

DesignSpec design_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DesignSpec& spec);
DesignSpec load_design_spec(const std::filesystem::path& path);

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Rows aligned 1:1 (and in order) with the source dataset rows.
struct DesignMatrix {
  RowMatrix values;
  std::vector<std::string> column_names;
  std::vector<std::pair<std::int64_t, std::int64_t>> row_index;  // (obs_id, alt_id)
  std::shared_ptr<const ChoiceStructure> structure;
  std::vector<std::string> warnings;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return static_cast<std::size_t>(values.cols()); }
};

DesignMatrix build_design(const ChoiceDataset& data, const DesignSpec& spec);

// Restriction to a subset of choice sets (for cross-validation), preserving
// the given order.
DesignMatrix select_sets(const DesignMatrix& design, std::span<const std::size_t> set_indices);

// Copy with the listed columns removed.
DesignMatrix drop_columns(const DesignMatrix& design, std::span<const std::size_t> columns);

}  // namespace choicecheck
