#include "choicecheck/forecast.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "choicecheck/error.hpp"
#include "csv.hpp"

namespace choicecheck {

namespace {

std::string json_scalar_text(const nlohmann::json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

nlohmann::json read_json(const std::filesystem::path& path, const char* what) {
  std::ifstream in(path);
  if (!in) throw IoError(std::string("cannot open ") + what + " " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw SpecError(path.string() + ": " + e.what());
  }
}

double percentile(std::vector<double> v, double q) {
  std::ranges::sort(v);
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const std::size_t j = std::min(i + 1, v.size() - 1);
  return v[i] + (pos - static_cast<double>(i)) * (v[j] - v[i]);
}

}  // namespace

Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  try {
    s.name = j.value("name", std::string{"scenario"});
    for (const auto& t : j.at("transforms")) {
      ScenarioTransform tr;
      tr.variable = t.at("variable").get<std::string>();
      tr.multiply = t.value("multiply", 1.0);
      tr.add = t.value("add", 0.0);
      if (t.contains("filter")) {
        for (const auto& [var, value] : t.at("filter").items()) {
          Condition c{var, {}};
          if (value.is_array()) {
            for (const auto& v : value) c.values.push_back(json_scalar_text(v));
          } else {
            c.values.push_back(json_scalar_text(value));
          }
          tr.filter.push_back(std::move(c));
        }
      }
      if (!std::isfinite(tr.multiply) || !std::isfinite(tr.add)) {
        throw SpecError("scenario transform on '" + tr.variable + "' is not finite");
      }
      s.transforms.push_back(std::move(tr));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("scenario: ") + e.what());
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) { return scenario_from_json(read_json(path, "scenario")); }

ScenarioOutcome apply_scenario(const ChoiceDataset& data, const Scenario& scenario) {
  ScenarioOutcome out{data, {}, {}};
  for (const auto& t : scenario.transforms) {
    const Column& col = out.data.column(t.variable);
    if (!col.numeric) throw SpecError("scenario variable '" + t.variable + "' is not numeric");
    std::vector<std::uint8_t> match(data.n_rows(), 1);
    for (const auto& c : t.filter) {
      std::vector<std::uint8_t> any(data.n_rows(), 0);
      for (const auto& v : c.values) {
        const auto m = match_rows(out.data, c.variable, v);
        for (std::size_t r = 0; r < any.size(); ++r) any[r] |= m[r];
      }
      for (std::size_t r = 0; r < match.size(); ++r) match[r] &= any[r];
    }
    std::vector<double> values = col.values;
    std::size_t matched = 0;
    for (std::size_t r = 0; r < values.size(); ++r) {
      if (!match[r]) continue;
      ++matched;
      if (t.multiply != 1.0) values[r] *= t.multiply;
      if (t.add != 0.0) values[r] += t.add;
      if (!std::isfinite(values[r])) throw DomainError("scenario produced a non-finite value of '" + t.variable + "'");
    }
    if (matched == 0) {
      out.warnings.push_back("scenario '" + scenario.name + "': transform of '" + t.variable + "' matched no rows");
    }
    out.matched_rows.push_back(matched);
    out.data = out.data.with_numeric_column(t.variable, std::move(values));
  }
  return out;
}

std::string CategoryMap::describe() const {
  if (!by_alt.empty()) return "alt_id lookup";
  std::string s;
  for (const auto& v : variables) s += (s.empty() ? "" : " x ") + v;
  return s;
}

std::vector<std::string> CategoryMap::row_categories(const ChoiceDataset& data) const {
  std::vector<std::string> out(data.n_rows());
  if (!by_alt.empty()) {
    for (std::size_t r = 0; r < data.n_rows(); ++r) {
      const auto it = by_alt.find(data.alt_ids()[r]);
      if (it == by_alt.end()) {
        throw CoverageError("category map does not cover alternative " + std::to_string(data.alt_ids()[r]));
      }
      out[r] = it->second;
    }
    return out;
  }
  if (variables.empty()) throw CoverageError("category map has neither variables nor an alt_id lookup");
  std::vector<const Column*> cols;
  for (const auto& v : variables) cols.push_back(&data.column(v));
  for (std::size_t r = 0; r < data.n_rows(); ++r) {
    std::string label;
    for (std::size_t k = 0; k < cols.size(); ++k) {
      std::string cell = cols[k]->cell(r);
      const auto labels = value_labels.find(variables[k]);
      if (labels != value_labels.end()) {
        const auto it = labels->second.find(cell);
        if (it == labels->second.end()) {
          throw CoverageError("category map has no label for " + variables[k] + " = " + cell);
        }
        cell = it->second;
      }
      if (k) label += separator;
      label += cell;
    }
    out[r] = std::move(label);
  }
  return out;
}

CategoryMap category_map_from_json(const nlohmann::json& j) {
  CategoryMap m;
  try {
    m.variables = j.value("variables", std::vector<std::string>{});
    m.separator = j.value("separator", std::string{" "});
    if (j.contains("labels")) {
      for (const auto& [var, table] : j.at("labels").items()) {
        for (const auto& [value, label] : table.items()) m.value_labels[var][value] = label.get<std::string>();
      }
    }
    if (j.contains("alternatives")) {
      for (const auto& [alt, label] : j.at("alternatives").items()) {
        const auto id = parse_double(alt);
        if (!id) throw SpecError("category map: alternative key '" + alt + "' is not an integer");
        m.by_alt[static_cast<std::int64_t>(*id)] = label.get<std::string>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("category map: ") + e.what());
  }
  return m;
}

CategoryMap load_category_map(const std::filesystem::path& path) {
  return category_map_from_json(read_json(path, "category map"));
}

const CategoryForecast* ForecastReport::find(const std::string& category) const {
  for (const auto& c : categories) {
    if (c.category == category) return &c;
  }
  return nullptr;
}

std::vector<CategoryForecast> ForecastReport::ranked() const {
  std::vector<CategoryForecast> out = categories;
  std::ranges::stable_sort(out, [](const auto& a, const auto& b) { return a.relative_change > b.relative_change; });
  return out;
}

namespace {

struct CategoryIndex {
  std::vector<std::string> names;
  std::vector<std::size_t> row_category;
};

CategoryIndex index_categories(const ChoiceDataset& data, const CategoryMap& map) {
  const auto labels = map.row_categories(data);
  CategoryIndex idx;
  std::set<std::string> unique(labels.begin(), labels.end());
  idx.names.assign(unique.begin(), unique.end());
  idx.row_category.resize(labels.size());
  for (std::size_t r = 0; r < labels.size(); ++r) {
    idx.row_category[r] =
        static_cast<std::size_t>(std::ranges::lower_bound(idx.names, labels[r]) - idx.names.begin());
  }
  return idx;
}

std::vector<double> category_shares(const CategoryIndex& idx, const Vector& p, std::size_t n_sets) {
  std::vector<long double> sum(idx.names.size(), 0.0L);
  for (std::size_t r = 0; r < idx.row_category.size(); ++r) sum[idx.row_category[r]] += p[static_cast<Eigen::Index>(r)];
  std::vector<double> out(sum.size());
  for (std::size_t c = 0; c < sum.size(); ++c) out[c] = static_cast<double>(sum[c] / static_cast<long double>(n_sets));
  return out;
}

ForecastReport build_report(const CategoryIndex& idx, const std::vector<double>& base,
                            const std::vector<double>& scen, const CategoryMap& map, const std::string& name) {
  ForecastReport report;
  report.scenario = name;
  report.category_definition = map.describe();
  for (std::size_t c = 0; c < idx.names.size(); ++c) {
    CategoryForecast f;
    f.category = idx.names[c];
    f.baseline_share = base[c];
    f.scenario_share = scen[c];
    f.relative_change = base[c] > 0.0 ? (scen[c] - base[c]) / base[c] : 0.0;
    report.categories.push_back(std::move(f));
  }
  return report;
}

void check_alignment(const ChoiceDataset& a, const ChoiceDataset& b) {
  if (a.n_rows() != b.n_rows() || !std::ranges::equal(a.obs_ids(), b.obs_ids()) ||
      !std::ranges::equal(a.alt_ids(), b.alt_ids())) {
    throw DimensionError("baseline and scenario datasets are not row-aligned");
  }
}

}  // namespace

ForecastReport forecast_shares(const FittedModel& model, const ChoiceDataset& baseline, const ChoiceDataset& scenario,
                               const DesignSpec& spec, const CategoryMap& categories, const ParameterDraws* draws,
                               const std::string& scenario_name) {
  check_alignment(baseline, scenario);
  if (spec.names() != model.term_names) throw SpecError("model was not fitted with the supplied design spec");
  const DesignMatrix base_design = build_design(baseline, spec);
  const DesignMatrix scen_design = build_design(scenario, spec);
  const CategoryIndex idx = index_categories(baseline, categories);
  const std::size_t n_sets = baseline.n_sets();

  ForecastReport report =
      build_report(idx, category_shares(idx, probabilities(base_design, model.beta), n_sets),
                   category_shares(idx, probabilities(scen_design, model.beta), n_sets), categories, scenario_name);
  report.warnings = base_design.warnings;

  if (draws && draws->count() > 0) {
    report.n_draws = draws->count();
    std::vector<std::vector<double>> changes(idx.names.size());
    for (std::size_t r = 0; r < draws->count(); ++r) {
      const Vector beta = draws->draw(r);
      const auto b = category_shares(idx, probabilities(base_design, beta), n_sets);
      const auto s = category_shares(idx, probabilities(scen_design, beta), n_sets);
      for (std::size_t c = 0; c < b.size(); ++c) changes[c].push_back(b[c] > 0.0 ? (s[c] - b[c]) / b[c] : 0.0);
    }
    for (std::size_t c = 0; c < changes.size(); ++c) {
      report.categories[c].change_p05 = percentile(changes[c], 0.05);
      report.categories[c].change_p95 = percentile(changes[c], 0.95);
    }
  }
  return report;
}

ForecastReport forecast_shares_from_probabilities(const ChoiceDataset& baseline, const Vector& baseline_probabilities,
                                                  const Vector& scenario_probabilities, const CategoryMap& categories,
                                                  const std::string& scenario_name) {
  const auto n = static_cast<Eigen::Index>(baseline.n_rows());
  if (baseline_probabilities.size() != n || scenario_probabilities.size() != n) {
    throw DimensionError("probability vectors must have one entry per dataset row");
  }
  const CategoryIndex idx = index_categories(baseline, categories);
  return build_report(idx, category_shares(idx, baseline_probabilities, baseline.n_sets()),
                      category_shares(idx, scenario_probabilities, baseline.n_sets()), categories, scenario_name);
}

Vector load_external_probabilities(const std::filesystem::path& path, const ChoiceDataset& data) {
  const csv::Table table = csv::read(path, true);
  const int obs_col = table.find("obs_id"), alt_col = table.find("alt_id");
  if (obs_col < 0 || alt_col < 0) throw SchemaError(path.string() + ": needs obs_id and alt_id columns");
  std::vector<std::size_t> p_cols;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (static_cast<int>(c) != obs_col && static_cast<int>(c) != alt_col) p_cols.push_back(c);
  }
  if (p_cols.empty()) throw SchemaError(path.string() + ": no probability columns");

  std::map<std::pair<std::int64_t, std::int64_t>, std::size_t> row_of;
  for (std::size_t r = 0; r < data.n_rows(); ++r) row_of[{data.obs_ids()[r], data.alt_ids()[r]}] = r;
  Vector p = Vector::Constant(static_cast<Eigen::Index>(data.n_rows()), -1.0);
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    const auto& row = table.rows[i];
    const auto obs = parse_double(trim(row[static_cast<std::size_t>(obs_col)]));
    const auto alt = parse_double(trim(row[static_cast<std::size_t>(alt_col)]));
    if (!obs || !alt) throw ParseError(path.string() + ": line " + std::to_string(i + 2) + ": bad obs_id/alt_id");
    const auto it = row_of.find({static_cast<std::int64_t>(*obs), static_cast<std::int64_t>(*alt)});
    if (it == row_of.end()) {
      throw ValidationError(path.string() + ": line " + std::to_string(i + 2) + ": (obs_id, alt_id) not in data");
    }
    long double sum = 0.0L;
    for (std::size_t c : p_cols) {
      const auto v = parse_double(trim(row[c]));
      if (!v || !std::isfinite(*v) || *v < 0.0 || *v > 1.0) {
        throw ParseError(path.string() + ": line " + std::to_string(i + 2) + ": probability must lie in [0, 1]");
      }
      sum += *v;
    }
    p[static_cast<Eigen::Index>(it->second)] = static_cast<double>(sum / static_cast<long double>(p_cols.size()));
  }
  for (Eigen::Index r = 0; r < p.size(); ++r) {
    if (p[r] < 0.0) throw CoverageError(path.string() + ": missing probability for obs_id " +
                                        std::to_string(data.obs_ids()[static_cast<std::size_t>(r)]));
  }
  const auto& sets = data.structure()->set_rows;
  for (std::size_t s = 0; s < sets.size(); ++s) {
    double sum = 0.0;
    for (std::size_t r : sets[s]) sum += p[static_cast<Eigen::Index>(r)];
    if (std::abs(sum - 1.0) > 1e-6) {
      throw ValidationError(path.string() + ": probabilities for obs_id " +
                            std::to_string(data.structure()->set_obs_ids[s]) + " sum to " + std::to_string(sum));
    }
  }
  return p;
}

nlohmann::json to_json(const ForecastReport& report) {
  nlohmann::json cats = nlohmann::json::array();
  for (const auto& c : report.categories) {
    nlohmann::json e{{"category", c.category},
                     {"baseline_share", c.baseline_share},
                     {"scenario_share", c.scenario_share},
                     {"relative_change_pct", 100.0 * c.relative_change}};
    if (c.change_p05) {
      e["relative_change_pct_p05"] = 100.0 * *c.change_p05;
      e["relative_change_pct_p95"] = 100.0 * *c.change_p95;
    }
    cats.push_back(std::move(e));
  }
  return {{"scenario", report.scenario},
          {"category_definition", report.category_definition},
          {"n_draws", report.n_draws},
          {"categories", cats},
          {"warnings", report.warnings}};
}

std::string forecast_report_text(const ForecastReport& report, std::size_t top_n,
                                 const std::vector<std::string>& focus) {
  std::ostringstream out;
  char line[256];
  out << "Scenario: " << report.scenario << "\n";
  out << "Categories: " << report.category_definition << "\n\n";
  for (const auto& name : focus) {
    if (const auto* c = report.find(name)) {
      std::snprintf(line, sizeof line, "%s: share %.4f -> %.4f (%+.2f%%)\n", name.c_str(), c->baseline_share,
                    c->scenario_share, 100.0 * c->relative_change);
      out << line;
    } else {
      out << name << ": no such category\n";
    }
  }
  if (!focus.empty()) out << '\n';
  const auto ranked = report.ranked();
  out << "Top-" << std::min(top_n, ranked.size()) << " categories forecasted to increase (% change)\n";
  for (std::size_t i = 0; i < top_n && i < ranked.size(); ++i) {
    const auto& c = ranked[i];
    if (c.change_p05) {
      std::snprintf(line, sizeof line, "%zu. %s (%.2f) [%.2f, %.2f]\n", i + 1, c.category.c_str(),
                    100.0 * c.relative_change, 100.0 * *c.change_p05, 100.0 * *c.change_p95);
    } else {
      std::snprintf(line, sizeof line, "%zu. %s (%.2f)\n", i + 1, c.category.c_str(), 100.0 * c.relative_change);
    }
    out << line;
  }
  for (const auto& w : report.warnings) out << "warning: " << w << '\n';
  return out.str();
}

}  // namespace choicecheck
