#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "choicecheck/choice_data.hpp"
#include "choicecheck/design.hpp"
#include "choicecheck/mnl.hpp"
#include "choicecheck/predictive_sim.hpp"

namespace choicecheck {

// Row filter term: `variable` equals one of `values` (numeric columns compare
// numerically). A transform's conditions are AND-ed.
struct Condition {
  std::string variable;
  std::vector<std::string> values;
};

// Matching rows get v * multiply + add.
struct ScenarioTransform {
  std::string variable;
  std::vector<Condition> filter;
  double multiply = 1.0;
  double add = 0.0;
};

struct Scenario {
  std::string name;
  std::vector<ScenarioTransform> transforms;
};

Scenario scenario_from_json(const nlohmann::json& j);
Scenario load_scenario(const std::filesystem::path& path);

struct ScenarioOutcome {
  ChoiceDataset data;
  std::vector<std::size_t> matched_rows;  // per transform
  std::vector<std::string> warnings;
};

// Only the named columns change; columns derived from them at load time are
// not recomputed.
ScenarioOutcome apply_scenario(const ChoiceDataset& data, const Scenario& scenario);

// Category of each long-format row: either an alt_id lookup or the values of
// one or more variables, optionally relabelled and joined with `separator`.
struct CategoryMap {
  std::vector<std::string> variables;
  std::map<std::string, std::map<std::string, std::string>> value_labels;
  std::string separator = " ";
  std::map<std::int64_t, std::string> by_alt;

  std::string describe() const;
  // Throws CoverageError when a row has no category.
  std::vector<std::string> row_categories(const ChoiceDataset& data) const;
};

CategoryMap category_map_from_json(const nlohmann::json& j);
CategoryMap load_category_map(const std::filesystem::path& path);

struct CategoryForecast {
  std::string category;
  double baseline_share = 0.0;
  double scenario_share = 0.0;
  double relative_change = 0.0;  // (scenario - baseline) / baseline
  std::optional<double> change_p05, change_p95;
};

struct ForecastReport {
  std::string scenario;
  std::string category_definition;
  std::vector<CategoryForecast> categories;  // sorted by category label
  std::size_t n_draws = 0;
  std::vector<std::string> warnings;

  const CategoryForecast* find(const std::string& category) const;
  // Categories ordered by relative change, largest increase first.
  std::vector<CategoryForecast> ranked() const;
};

// Category share = mean over choice sets of the summed within-category
// probabilities. The design is rebuilt from each dataset, so piecewise and
// interaction terms follow the scenario.
ForecastReport forecast_shares(const FittedModel& model, const ChoiceDataset& baseline, const ChoiceDataset& scenario,
                               const DesignSpec& spec, const CategoryMap& categories,
                               const ParameterDraws* draws = nullptr, const std::string& scenario_name = {});

// Same report from per-row probabilities computed elsewhere (e.g. a mixed
// logit): each vector is aligned with the dataset rows.
ForecastReport forecast_shares_from_probabilities(const ChoiceDataset& baseline, const Vector& baseline_probabilities,
                                                  const Vector& scenario_probabilities, const CategoryMap& categories,
                                                  const std::string& scenario_name = {});

// CSV with header obs_id,alt_id,<p columns...>; extra probability columns are
// simulation draws and are averaged. Rows are matched to `data` by
// (obs_id, alt_id) and each set must sum to 1.
Vector load_external_probabilities(const std::filesystem::path& path, const ChoiceDataset& data);

nlohmann::json to_json(const ForecastReport& report);
std::string forecast_report_text(const ForecastReport& report, std::size_t top_n = 4,
                                 const std::vector<std::string>& focus = {});

}  // namespace choicecheck
