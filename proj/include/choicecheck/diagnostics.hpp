#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "choicecheck/choice_data.hpp"
#include "choicecheck/design.hpp"
#include "choicecheck/mnl.hpp"
#include "choicecheck/predictive_sim.hpp"

namespace choicecheck {

// Observed statistic plus its simulated reference distribution. Scalar checks
// carry one observed value (market share: one per group) and p-values; curve
// checks carry a shared x grid and one curve per dataset.
struct CheckResult {
  std::string check_type;
  std::string label;
  std::string alt;
  std::string variable;
  std::optional<int> bins;
  std::optional<std::string> value;
  std::vector<std::string> groups;
  std::vector<double> x;
  std::vector<double> observed;
  std::vector<std::vector<double>> simulated;
  std::vector<std::vector<double>> expected_curve;
  std::vector<double> p_values;
  std::size_t skipped_draws = 0;
  std::uint64_t seed = 0;
  std::size_t R = 0;

  bool is_curve() const { return !x.empty(); }
};

nlohmann::json to_json(const CheckResult& result);
CheckResult check_result_from_json(const nlohmann::json& j);

// (#{T_r < T0} + 0.5 #{T_r == T0}) / R
double predictive_p_value(double observed, std::span<const double> simulated);

// Stable sort by key, then the first n mod K bins take one extra element.
// Returns positions into `keys`.
std::vector<std::vector<std::size_t>> equal_count_bins(std::span<const double> keys, int n_bins);

enum class VariableClass { kDiscrete, kContinuous };
VariableClass classify_variable(std::span<const double> values, std::size_t max_discrete = 12);

// Scott's rule with the degenerate-sample floor.
double scott_bandwidth(std::span<const double> values);
// Gaussian KDE of `values` on `grid` with bandwidth h.
std::vector<double> kde_curve(std::span<const double> values, std::span<const double> grid, double h);
// Right-continuous ECDF of `values` evaluated at each grid point.
std::vector<double> ecdf_curve(std::span<const double> values, std::span<const double> grid);

// Which long-format rows a check looks at: everything, one alt_id, or rows
// where a variable takes a value (proxy labels such as a fuel type).
struct RowSelector {
  enum class Kind { kAll, kAltId, kVariableEquals };
  Kind kind = Kind::kAll;
  std::int64_t alt_id = 0;
  std::string variable;
  std::string value;

  static RowSelector all();
  static RowSelector alternative(std::int64_t alt_id);
  static RowSelector where(std::string variable, std::string value);
  // "all", "alt=<id>", or "<variable>=<value>".
  static RowSelector parse(const std::string& text);

  std::string label() const;
  std::vector<std::uint8_t> mask(const ChoiceDataset& data) const;
};

// Everything a check needs; the ensemble must be built on `design`, and
// `design` on `data`.
struct CheckContext {
  const ChoiceDataset& data;
  const DesignMatrix& design;
  const Vector& beta;
  const SimulationEnsemble& ensemble;
  std::size_t threads = 0;
};

CheckResult log_predictive_check(const CheckContext& ctx);

// sum over chosen rows of ln of the draw-averaged probability.
double log_pointwise_predictive(const DesignMatrix& design, std::span<const std::uint8_t> y,
                                const ParameterDraws& draws);

// One group label per long-format row; rows with an empty label are ignored.
CheckResult market_share_check(const CheckContext& ctx, const std::vector<std::string>& row_groups,
                               const std::string& label = "market share");
// Grouping by the value of a variable, or by alt_id when `variable` is empty.
std::vector<std::string> groups_from_variable(const ChoiceDataset& data, const std::string& variable);

enum class ReliabilityKey { kPointEstimate, kPosteriorMean };

CheckResult binned_reliability_check(const CheckContext& ctx, const RowSelector& selection, int n_bins,
                                     ReliabilityKey key = ReliabilityKey::kPointEstimate);
CheckResult binned_marginal_model_check(const CheckContext& ctx, const RowSelector& selection,
                                        const std::string& x_variable, int n_bins);
CheckResult simulated_histogram_check(const CheckContext& ctx, const RowSelector& selection,
                                      const std::string& variable, const std::string& value);
CheckResult simulated_kde_check(const CheckContext& ctx, const RowSelector& selection, const std::string& variable);
CheckResult simulated_cdf_check(const CheckContext& ctx, const RowSelector& selection, const std::string& variable);

// One planned check; `run_check` evaluates it.
struct CheckRequest {
  std::string check_type;
  RowSelector selection;
  std::string variable;
  std::string value;
  int bins = 10;
  std::string group_variable;  // market share over a grouping; empty means alt_id

  std::string id() const;
};

nlohmann::json to_json(const CheckRequest& request);
CheckRequest check_request_from_json(const nlohmann::json& j);

CheckResult run_check(const CheckContext& ctx, const CheckRequest& request);

enum class LabelingMode { kLabeled, kProxy, kChosenVsNot };

struct Labeling {
  LabelingMode mode = LabelingMode::kLabeled;
  std::vector<std::int64_t> alternatives;  // labeled: alternatives of interest, empty = all
  std::string proxy_variable;              // proxy: discrete variable whose values act as labels

  // "labeled", "labeled:1,3", "proxy:<variable>", "chosen_vs_not".
  static Labeling parse(const std::string& text);
};

// Alternative-of-interest label -> related variables. Labels are alt ids
// ("3"), proxy values ("electric"), or "chosen".
using VariableMap = std::map<std::string, std::vector<std::string>>;

VariableMap default_variable_map(const ChoiceDataset& data, const DesignSpec& spec, const Labeling& labeling);
VariableMap variable_map_from_json(const nlohmann::json& j);

struct SuiteOptions {
  int bins = 10;
  std::size_t max_discrete = 12;
  std::vector<std::string> categorical;  // always treated as discrete
  bool include_log_predictive = false;
  bool include_overall_share = false;  // one grouped share check across all labels
  std::vector<CheckRequest> extra;
};

std::vector<CheckRequest> plan_check_suite(const ChoiceDataset& data, const Labeling& labeling,
                                           const VariableMap& variables, const SuiteOptions& options = {});

struct CheckSuite {
  std::vector<CheckRequest> requests;
  std::vector<std::optional<CheckResult>> results;
  std::vector<std::string> errors;  // empty string when the check succeeded
};

CheckSuite auto_check_suite(const CheckContext& ctx, const Labeling& labeling, const VariableMap& variables,
                            const SuiteOptions& options = {});

}  // namespace choicecheck
