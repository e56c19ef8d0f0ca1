#include "choicecheck/design.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "choicecheck/error.hpp"

namespace choicecheck {

double piecewise_linear_value(double x, double knot, Segment segment) noexcept {
  return segment == Segment::kBelow ? std::min(x, knot) : std::max(x - knot, 0.0);
}

bool Term::applies_to(std::int64_t alt_id) const {
  return alternatives.empty() || std::ranges::find(alternatives, alt_id) != alternatives.end();
}

std::vector<std::string> DesignSpec::names() const {
  std::vector<std::string> out;
  out.reserve(terms.size());
  for (const auto& t : terms) out.push_back(t.name);
  return out;
}

void DesignSpec::validate() const {
  std::set<std::string> seen;
  for (const auto& t : terms) {
    if (t.name.empty()) throw SpecError("term without a name");
    if (!seen.insert(t.name).second) throw SpecError("duplicate term name '" + t.name + "'");
    switch (t.kind) {
      case TermKind::kLinear:
        if (t.variable.empty()) throw SpecError("linear term '" + t.name + "' needs a variable");
        break;
      case TermKind::kPiecewise:
        if (t.variable.empty()) throw SpecError("piecewise term '" + t.name + "' needs a variable");
        if (!t.knot) throw SpecError("piecewise term '" + t.name + "' needs a knot");
        break;
      case TermKind::kInteraction:
        if (t.category_variable.empty()) {
          throw SpecError("interaction term '" + t.name + "' needs a category_variable");
        }
        if (t.knot && t.variable.empty()) throw SpecError("interaction term '" + t.name + "' has a knot but no variable");
        break;
      case TermKind::kConstant:
        if (t.alternatives.empty()) throw SpecError("constant term '" + t.name + "' needs explicit alternatives");
        break;
    }
    if (t.knot && !std::isfinite(*t.knot)) throw SpecError("term '" + t.name + "' has a non-finite knot");
  }
}

void DesignSpec::validate_against(const ChoiceDataset& data) const {
  validate();
  for (const auto& t : terms) {
    if (!t.variable.empty()) {
      const Column& c = data.column(t.variable);
      if (!c.numeric) throw SpecError("term '" + t.name + "' uses categorical variable '" + t.variable + "'");
    }
    if (t.kind == TermKind::kInteraction) data.column(t.category_variable);
  }
}

namespace {

TermKind kind_from_string(const std::string& s) {
  if (s == "linear") return TermKind::kLinear;
  if (s == "piecewise" || s == "piecewise_linear") return TermKind::kPiecewise;
  if (s == "interaction") return TermKind::kInteraction;
  if (s == "constant") return TermKind::kConstant;
  throw SpecError("unknown term kind '" + s + "'");
}

const char* kind_to_string(TermKind k) {
  switch (k) {
    case TermKind::kLinear:
      return "linear";
    case TermKind::kPiecewise:
      return "piecewise";
    case TermKind::kInteraction:
      return "interaction";
    case TermKind::kConstant:
      return "constant";
  }
  return "linear";
}

}  // namespace

DesignSpec design_spec_from_json(const nlohmann::json& j) {
  DesignSpec spec;
  const auto& arr = j.is_array() ? j : j.at("terms");
  try {
    for (const auto& e : arr) {
      Term t;
      t.kind = kind_from_string(e.at("kind").get<std::string>());
      t.name = e.at("name").get<std::string>();
      t.variable = e.value("variable", std::string{});
      if (e.contains("knot")) t.knot = e.at("knot").get<double>();
      const std::string seg = e.value("segment", std::string{"below"});
      if (seg == "below") {
        t.segment = Segment::kBelow;
      } else if (seg == "above") {
        t.segment = Segment::kAbove;
      } else {
        throw SpecError("term '" + t.name + "': segment must be 'below' or 'above'");
      }
      t.category_variable = e.value("category_variable", std::string{});
      if (e.contains("category_value")) {
        const auto& v = e.at("category_value");
        t.category_value = v.is_string() ? v.get<std::string>() : v.dump();
      }
      t.alternatives = e.value("alternatives", std::vector<std::int64_t>{});
      spec.terms.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("design spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

nlohmann::json to_json(const DesignSpec& spec) {
  nlohmann::json terms = nlohmann::json::array();
  for (const auto& t : spec.terms) {
    nlohmann::json e{{"kind", kind_to_string(t.kind)}, {"name", t.name}};
    if (!t.variable.empty()) e["variable"] = t.variable;
    if (t.knot) {
      e["knot"] = *t.knot;
      e["segment"] = t.segment == Segment::kBelow ? "below" : "above";
    }
    if (!t.category_variable.empty()) {
      e["category_variable"] = t.category_variable;
      e["category_value"] = t.category_value;
    }
    if (!t.alternatives.empty()) e["alternatives"] = t.alternatives;
    terms.push_back(std::move(e));
  }
  return {{"terms", terms}};
}

DesignSpec load_design_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open design spec " + path.string());
  try {
    return design_spec_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw SpecError(path.string() + ": " + e.what());
  }
}

DesignMatrix build_design(const ChoiceDataset& data, const DesignSpec& spec) {
  spec.validate_against(data);
  DesignMatrix dm;
  const std::size_t n = data.n_rows();
  const std::size_t k = spec.terms.size();
  dm.values = RowMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  dm.column_names = spec.names();
  dm.structure = data.structure();
  dm.row_index.reserve(n);
  for (std::size_t r = 0; r < n; ++r) dm.row_index.emplace_back(data.obs_ids()[r], data.alt_ids()[r]);

  for (std::size_t c = 0; c < k; ++c) {
    const Term& t = spec.terms[c];
    const std::vector<double>* base = t.variable.empty() ? nullptr : &data.column(t.variable).values;
    std::vector<std::uint8_t> indicator;
    if (t.kind == TermKind::kInteraction) {
      indicator = match_rows(data, t.category_variable, t.category_value);
      if (std::ranges::none_of(indicator, [](std::uint8_t v) { return v != 0; })) {
        dm.warnings.push_back("term '" + t.name + "': value '" + t.category_value + "' of '" + t.category_variable +
                              "' does not occur; column is all zeros");
      }
    }
    const bool use_knot = t.knot.has_value() && (t.kind == TermKind::kPiecewise || t.kind == TermKind::kInteraction);
    for (std::size_t r = 0; r < n; ++r) {
      if (!t.applies_to(data.alt_ids()[r])) continue;
      double v = 1.0;
      if (base) v = use_knot ? piecewise_linear_value((*base)[r], *t.knot, t.segment) : (*base)[r];
      if (!indicator.empty() && !indicator[r]) v = 0.0;
      dm.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
    }
  }
  return dm;
}

DesignMatrix select_sets(const DesignMatrix& design, std::span<const std::size_t> set_indices) {
  const ChoiceStructure& src = *design.structure;
  std::vector<std::size_t> rows;
  for (std::size_t s : set_indices) {
    if (s >= src.n_sets()) throw DimensionError("choice-set index out of range");
    std::vector<std::size_t> in_set = src.set_rows[s];
    std::ranges::sort(in_set);
    rows.insert(rows.end(), in_set.begin(), in_set.end());
  }
  std::vector<std::size_t> new_pos(design.rows(), SIZE_MAX);
  for (std::size_t i = 0; i < rows.size(); ++i) new_pos[rows[i]] = i;

  auto structure = std::make_shared<ChoiceStructure>();
  structure->row_set.resize(rows.size());
  for (std::size_t k = 0; k < set_indices.size(); ++k) {
    std::vector<std::size_t> mapped;
    for (std::size_t r : src.set_rows[set_indices[k]]) {
      mapped.push_back(new_pos[r]);
      structure->row_set[new_pos[r]] = k;
    }
    structure->set_rows.push_back(std::move(mapped));
    structure->set_obs_ids.push_back(src.set_obs_ids[set_indices[k]]);
  }

  DesignMatrix out;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), design.values.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.values.row(static_cast<Eigen::Index>(i)) = design.values.row(static_cast<Eigen::Index>(rows[i]));
    out.row_index.push_back(design.row_index[rows[i]]);
  }
  out.column_names = design.column_names;
  out.structure = std::move(structure);
  return out;
}

DesignMatrix drop_columns(const DesignMatrix& design, std::span<const std::size_t> columns) {
  std::vector<Eigen::Index> keep;
  for (std::size_t c = 0; c < design.cols(); ++c) {
    if (std::ranges::find(columns, c) == columns.end()) keep.push_back(static_cast<Eigen::Index>(c));
  }
  DesignMatrix out;
  out.values.resize(design.values.rows(), static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    out.values.col(static_cast<Eigen::Index>(k)) = design.values.col(keep[k]);
    out.column_names.push_back(design.column_names[static_cast<std::size_t>(keep[k])]);
  }
  out.row_index = design.row_index;
  out.structure = design.structure;
  out.warnings = design.warnings;
  return out;
}

}  // namespace choicecheck
