#include "choicecheck/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>

#include "choicecheck/error.hpp"
#include "choicecheck/parallel.hpp"
#include "choicecheck/simd/kernels.hpp"

namespace choicecheck {

namespace {

constexpr int kKdeGridPoints = 256;

std::vector<std::size_t> masked_rows(std::span<const std::uint8_t> mask) {
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < mask.size(); ++r) {
    if (mask[r]) rows.push_back(r);
  }
  return rows;
}

const Column& numeric_column(const ChoiceDataset& data, const std::string& name) {
  const Column& c = data.column(name);
  if (!c.numeric) throw SpecError("variable '" + name + "' is not numeric");
  return c;
}

CheckResult base_result(const CheckContext& ctx, std::string type, std::string label) {
  CheckResult r;
  r.check_type = std::move(type);
  r.label = std::move(label);
  r.seed = ctx.ensemble.seed();
  r.R = ctx.ensemble.r_count();
  return r;
}

void take_scalar(CheckResult& out, StatisticResult&& stat) {
  out.observed = std::move(stat.observed);
  out.simulated = std::move(stat.simulated);
  out.skipped_draws = stat.skipped_draws;
  out.p_values.resize(out.observed.size());
  std::vector<double> column(out.simulated.size());
  for (std::size_t g = 0; g < out.observed.size(); ++g) {
    for (std::size_t r = 0; r < out.simulated.size(); ++r) column[r] = out.simulated[r][g];
    out.p_values[g] = column.empty() ? 0.5 : predictive_p_value(out.observed[g], column);
  }
}

bool all_numeric(const std::vector<std::string>& labels) {
  return std::ranges::all_of(labels, [](const std::string& s) { return parse_double(s).has_value(); });
}

std::vector<std::string> ordered_unique(std::vector<std::string> labels) {
  std::ranges::sort(labels);
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  if (all_numeric(labels)) {
    std::ranges::stable_sort(labels, [](const std::string& a, const std::string& b) {
      return *parse_double(a) < *parse_double(b);
    });
  }
  return labels;
}

std::vector<double> bin_means(const std::vector<std::vector<std::size_t>>& bins, std::span<const std::size_t> rows,
                              const auto& value_of_row) {
  std::vector<double> out(bins.size());
  for (std::size_t b = 0; b < bins.size(); ++b) {
    double sum = 0.0;
    for (std::size_t pos : bins[b]) sum += value_of_row(rows[pos]);
    out[b] = sum / static_cast<double>(bins[b].size());
  }
  return out;
}

std::string sanitize(const std::string& s) {
  std::string out;
  for (char c : s) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' || c == '=' || c == '_';
    out += ok ? c : '_';
  }
  return out;
}

}  // namespace

double predictive_p_value(double observed, std::span<const double> simulated) {
  if (simulated.empty()) throw DomainError("predictive p-value needs at least one simulated value");
  double less = 0.0, ties = 0.0;
  for (double t : simulated) {
    if (t < observed) {
      less += 1.0;
    } else if (t == observed) {
      ties += 1.0;
    }
  }
  return (less + 0.5 * ties) / static_cast<double>(simulated.size());
}

std::vector<std::vector<std::size_t>> equal_count_bins(std::span<const double> keys, int n_bins) {
  if (n_bins < 1) throw BinningError("number of bins must be at least 1");
  const std::size_t n = keys.size();
  const auto k = static_cast<std::size_t>(n_bins);
  if (k > n) {
    throw BinningError(std::to_string(n_bins) + " bins requested but only " + std::to_string(n) +
                       " eligible observations");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::ranges::stable_sort(order, [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  std::vector<std::vector<std::size_t>> bins(k);
  const std::size_t base = n / k, extra = n % k;
  std::size_t pos = 0;
  for (std::size_t b = 0; b < k; ++b) {
    const std::size_t size = base + (b < extra ? 1 : 0);
    bins[b].assign(order.begin() + static_cast<std::ptrdiff_t>(pos),
                   order.begin() + static_cast<std::ptrdiff_t>(pos + size));
    pos += size;
  }
  return bins;
}

VariableClass classify_variable(std::span<const double> values, std::size_t max_discrete) {
  std::set<double> distinct;
  for (double v : values) {
    distinct.insert(v);
    if (distinct.size() > max_discrete) return VariableClass::kContinuous;
  }
  return VariableClass::kDiscrete;
}

double scott_bandwidth(std::span<const double> values) {
  const auto n = static_cast<double>(values.size());
  if (values.empty()) throw DomainError("bandwidth of an empty sample");
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  const double floor = 1e-9 * std::max(1.0, std::abs(mean));
  return std::max(sd * std::pow(n, -0.2), floor);
}

std::vector<double> kde_curve(std::span<const double> values, std::span<const double> grid, double h) {
  if (!(h > 0.0)) throw DomainError("bandwidth must be positive");
  std::vector<double> out(grid.size(), 0.0);
  const auto& kern = simd::kernels();
  for (double v : values) kern.gauss_accumulate(grid.data(), grid.size(), v, 1.0 / h, out.data());
  const double norm = 1.0 / (static_cast<double>(values.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  for (double& v : out) v *= norm;
  return out;
}

std::vector<double> ecdf_curve(std::span<const double> values, std::span<const double> grid) {
  std::vector<double> sorted(values.begin(), values.end());
  std::ranges::sort(sorted);
  std::vector<double> out(grid.size());
  const auto n = static_cast<double>(sorted.size());
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto count = std::upper_bound(sorted.begin(), sorted.end(), grid[g]) - sorted.begin();
    out[g] = static_cast<double>(count) / n;
  }
  return out;
}

RowSelector RowSelector::all() { return {}; }

RowSelector RowSelector::alternative(std::int64_t alt_id) {
  RowSelector s;
  s.kind = Kind::kAltId;
  s.alt_id = alt_id;
  return s;
}

RowSelector RowSelector::where(std::string variable, std::string value) {
  RowSelector s;
  s.kind = Kind::kVariableEquals;
  s.variable = std::move(variable);
  s.value = std::move(value);
  return s;
}

RowSelector RowSelector::parse(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty() || t == "all") return all();
  const auto eq = t.find('=');
  if (eq == std::string::npos) throw SpecError("row selector '" + t + "' must be 'all', 'alt=<id>' or 'var=value'");
  const std::string lhs = trim(t.substr(0, eq));
  const std::string rhs = trim(t.substr(eq + 1));
  if (lhs == "alt" || lhs == "alt_id") {
    const auto v = parse_double(rhs);
    if (!v || *v != std::floor(*v)) throw SpecError("row selector '" + t + "': alt id must be an integer");
    return alternative(static_cast<std::int64_t>(*v));
  }
  return where(lhs, rhs);
}

std::string RowSelector::label() const {
  switch (kind) {
    case Kind::kAll:
      return "all";
    case Kind::kAltId:
      return "alt=" + std::to_string(alt_id);
    case Kind::kVariableEquals:
      return variable + "=" + value;
  }
  return "all";
}

std::vector<std::uint8_t> RowSelector::mask(const ChoiceDataset& data) const {
  switch (kind) {
    case Kind::kAll:
      return std::vector<std::uint8_t>(data.n_rows(), 1);
    case Kind::kAltId: {
      std::vector<std::uint8_t> m(data.n_rows(), 0);
      for (std::size_t r = 0; r < data.n_rows(); ++r) m[r] = data.alt_ids()[r] == alt_id;
      return m;
    }
    case Kind::kVariableEquals:
      return match_rows(data, variable, value);
  }
  return {};
}

CheckResult log_predictive_check(const CheckContext& ctx) {
  const Vector lp = log_probabilities(ctx.design, ctx.beta);
  const Statistic stat = [&](std::span<const std::uint32_t> chosen, std::size_t) {
    double ll = 0.0;
    for (std::uint32_t row : chosen) ll += lp[row];
    return std::optional<std::vector<double>>(std::vector<double>{ll});
  };
  CheckResult out = base_result(ctx, "log_predictive", "log-likelihood");
  out.alt = "all";
  take_scalar(out, evaluate_statistic(stat, StatisticKind::kScalar, ctx.data.chosen_rows(), ctx.ensemble, ctx.threads));
  return out;
}

double log_pointwise_predictive(const DesignMatrix& design, std::span<const std::uint8_t> y,
                                const ParameterDraws& draws) {
  if (draws.count() == 0) throw DomainError("log pointwise-predictive density needs at least one draw");
  const auto chosen = chosen_rows_from_indicator(design, y);
  std::vector<long double> sum(chosen.size(), 0.0L);
  for (std::size_t s = 0; s < draws.count(); ++s) {
    const Vector p = probabilities(design, draws.draw(s));
    for (std::size_t i = 0; i < chosen.size(); ++i) sum[i] += p[chosen[i]];
  }
  long double total = 0.0L;
  const auto S = static_cast<long double>(draws.count());
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    const long double avg = sum[i] / S;
    if (!(avg > 0.0L)) {
      throw DomainError("averaged probability of the chosen alternative is zero for obs_id " +
                        std::to_string(design.structure->set_obs_ids[i]));
    }
    total += std::log(avg);
  }
  return static_cast<double>(total);
}

std::vector<std::string> groups_from_variable(const ChoiceDataset& data, const std::string& variable) {
  std::vector<std::string> out(data.n_rows());
  if (variable.empty() || variable == "alt_id") {
    for (std::size_t r = 0; r < data.n_rows(); ++r) out[r] = std::to_string(data.alt_ids()[r]);
    return out;
  }
  const Column& c = data.column(variable);
  for (std::size_t r = 0; r < data.n_rows(); ++r) out[r] = c.cell(r);
  return out;
}

CheckResult market_share_check(const CheckContext& ctx, const std::vector<std::string>& row_groups,
                               const std::string& label) {
  if (row_groups.size() != ctx.data.n_rows()) throw DimensionError("grouping must have one label per row");
  std::vector<std::string> nonempty;
  for (const auto& g : row_groups) {
    if (!g.empty()) nonempty.push_back(g);
  }
  CheckResult out = base_result(ctx, "market_share", label);
  out.groups = ordered_unique(std::move(nonempty));
  std::map<std::string, std::size_t> index;
  for (std::size_t g = 0; g < out.groups.size(); ++g) index[out.groups[g]] = g;
  std::vector<int> row_group(row_groups.size(), -1);
  for (std::size_t r = 0; r < row_groups.size(); ++r) {
    if (!row_groups[r].empty()) row_group[r] = static_cast<int>(index[row_groups[r]]);
  }
  const std::size_t n_groups = out.groups.size();
  const Statistic stat = [&](std::span<const std::uint32_t> chosen, std::size_t) {
    std::vector<double> counts(n_groups, 0.0);
    for (std::uint32_t row : chosen) {
      if (row_group[row] >= 0) counts[static_cast<std::size_t>(row_group[row])] += 1.0;
    }
    return std::optional<std::vector<double>>(std::move(counts));
  };
  out.alt = "all";
  take_scalar(out, evaluate_statistic(stat, StatisticKind::kVector, ctx.data.chosen_rows(), ctx.ensemble, ctx.threads));
  return out;
}

CheckResult binned_reliability_check(const CheckContext& ctx, const RowSelector& selection, int n_bins,
                                     ReliabilityKey key) {
  const auto rows = masked_rows(selection.mask(ctx.data));
  Vector key_probs;
  if (key == ReliabilityKey::kPointEstimate) {
    key_probs = probabilities(ctx.design, ctx.beta);
  } else {
    key_probs = Vector::Zero(static_cast<Eigen::Index>(ctx.design.rows()));
    for (std::size_t r = 0; r < ctx.ensemble.r_count(); ++r) key_probs += ctx.ensemble.probabilities(r);
    key_probs /= static_cast<double>(ctx.ensemble.r_count());
  }
  std::vector<double> keys(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) keys[i] = key_probs[static_cast<Eigen::Index>(rows[i])];
  const auto bins = equal_count_bins(keys, n_bins);

  CheckResult out = base_result(ctx, "binned_reliability", "binned reliability: " + selection.label());
  out.alt = selection.label();
  out.bins = n_bins;
  if (key == ReliabilityKey::kPosteriorMean) out.variable = "posterior_mean_probability";
  out.x = bin_means(bins, rows, [&](std::size_t row) { return key_probs[static_cast<Eigen::Index>(row)]; });

  const std::size_t n_rows = ctx.design.rows();
  const Statistic stat = [&](std::span<const std::uint32_t> chosen, std::size_t) {
    std::vector<std::uint8_t> y(n_rows, 0);
    for (std::uint32_t row : chosen) y[row] = 1;
    return std::optional<std::vector<double>>(bin_means(bins, rows, [&](std::size_t row) { return double(y[row]); }));
  };
  auto stat_result = evaluate_statistic(stat, StatisticKind::kCurve, ctx.data.chosen_rows(), ctx.ensemble, ctx.threads);
  out.observed = std::move(stat_result.observed);
  out.simulated = std::move(stat_result.simulated);
  out.skipped_draws = stat_result.skipped_draws;
  return out;
}

CheckResult binned_marginal_model_check(const CheckContext& ctx, const RowSelector& selection,
                                        const std::string& x_variable, int n_bins) {
  const Column& xc = numeric_column(ctx.data, x_variable);
  const auto rows = masked_rows(selection.mask(ctx.data));
  std::vector<double> keys(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) keys[i] = xc.values[rows[i]];
  const auto bins = equal_count_bins(keys, n_bins);

  CheckResult out = base_result(ctx, "binned_marginal_model", "binned marginal model: " + selection.label());
  out.alt = selection.label();
  out.variable = x_variable;
  out.bins = n_bins;
  out.x = bin_means(bins, rows, [&](std::size_t row) { return xc.values[row]; });

  const std::size_t n_rows = ctx.design.rows();
  const Statistic stat = [&](std::span<const std::uint32_t> chosen, std::size_t) {
    std::vector<std::uint8_t> y(n_rows, 0);
    for (std::uint32_t row : chosen) y[row] = 1;
    return std::optional<std::vector<double>>(bin_means(bins, rows, [&](std::size_t row) { return double(y[row]); }));
  };
  auto stat_result = evaluate_statistic(stat, StatisticKind::kCurve, ctx.data.chosen_rows(), ctx.ensemble, ctx.threads);
  out.observed = std::move(stat_result.observed);
  out.simulated = std::move(stat_result.simulated);
  out.skipped_draws = stat_result.skipped_draws;

  out.expected_curve.resize(ctx.ensemble.r_count());
  parallel_for(ctx.ensemble.r_count(), resolve_threads(ctx.threads), [&](std::size_t r) {
    const Vector p = ctx.ensemble.probabilities(r);
    out.expected_curve[r] = bin_means(bins, rows, [&](std::size_t row) { return p[static_cast<Eigen::Index>(row)]; });
  });
  return out;
}

CheckResult simulated_histogram_check(const CheckContext& ctx, const RowSelector& selection,
                                      const std::string& variable, const std::string& value) {
  auto mask = selection.mask(ctx.data);
  const auto match = match_rows(ctx.data, variable, value);
  for (std::size_t r = 0; r < mask.size(); ++r) mask[r] = mask[r] && match[r];
  const Statistic stat = [&](std::span<const std::uint32_t> chosen, std::size_t) {
    double count = 0.0;
    for (std::uint32_t row : chosen) count += mask[row];
    return std::optional<std::vector<double>>(std::vector<double>{count});
  };
  CheckResult out = base_result(ctx, "simulated_histogram", "chose " + selection.label() + " with " + variable + " = " + value);
  out.alt = selection.label();
  out.variable = variable;
  out.value = value;
  take_scalar(out, evaluate_statistic(stat, StatisticKind::kScalar, ctx.data.chosen_rows(), ctx.ensemble, ctx.threads));
  return out;
}

namespace {

std::vector<double> chooser_values(std::span<const std::uint32_t> chosen, std::span<const std::uint8_t> mask,
                                   const std::vector<double>& values) {
  std::vector<double> out;
  for (std::uint32_t row : chosen) {
    if (mask[row]) out.push_back(values[row]);
  }
  return out;
}

}  // namespace

CheckResult simulated_kde_check(const CheckContext& ctx, const RowSelector& selection, const std::string& variable) {
  const Column& c = numeric_column(ctx.data, variable);
  const auto mask = selection.mask(ctx.data);
  const auto observed = chooser_values(ctx.data.chosen_rows(), mask, c.values);
  if (observed.empty()) throw CheckError("no observed choosers for " + selection.label());
  const double h_obs = scott_bandwidth(observed);
  const auto [lo, hi] = std::ranges::minmax(observed);
  const double a = lo - 3.0 * h_obs, b = hi + 3.0 * h_obs;

  CheckResult out = base_result(ctx, "simulated_kde", "KDE of " + variable + " among choosers of " + selection.label());
  out.alt = selection.label();
  out.variable = variable;
  out.x.resize(kKdeGridPoints);
  for (int g = 0; g < kKdeGridPoints; ++g) out.x[g] = a + (b - a) * g / (kKdeGridPoints - 1);

  const Statistic stat = [&](std::span<const std::uint32_t> chosen, std::size_t draw) -> std::optional<std::vector<double>> {
    const auto v = chooser_values(chosen, mask, c.values);
    if (draw != kObservedDraw && v.size() < 2) return std::nullopt;
    return kde_curve(v, out.x, scott_bandwidth(v));
  };
  auto r = evaluate_statistic(stat, StatisticKind::kCurve, ctx.data.chosen_rows(), ctx.ensemble, ctx.threads);
  if (r.simulated.empty()) throw CheckError("every simulated dataset had fewer than 2 choosers of " + selection.label());
  out.observed = std::move(r.observed);
  out.simulated = std::move(r.simulated);
  out.skipped_draws = r.skipped_draws;
  return out;
}

CheckResult simulated_cdf_check(const CheckContext& ctx, const RowSelector& selection, const std::string& variable) {
  const Column& c = numeric_column(ctx.data, variable);
  const auto mask = selection.mask(ctx.data);
  const auto observed = chooser_values(ctx.data.chosen_rows(), mask, c.values);
  if (observed.empty()) throw CheckError("no observed choosers for " + selection.label());

  CheckResult out = base_result(ctx, "simulated_cdf", "ECDF of " + variable + " among choosers of " + selection.label());
  out.alt = selection.label();
  out.variable = variable;
  for (std::size_t r = 0; r < mask.size(); ++r) {
    if (mask[r]) out.x.push_back(c.values[r]);
  }
  std::ranges::sort(out.x);
  out.x.erase(std::unique(out.x.begin(), out.x.end()), out.x.end());

  const Statistic stat = [&](std::span<const std::uint32_t> chosen, std::size_t) -> std::optional<std::vector<double>> {
    const auto v = chooser_values(chosen, mask, c.values);
    if (v.empty()) return std::nullopt;
    return ecdf_curve(v, out.x);
  };
  auto r = evaluate_statistic(stat, StatisticKind::kCurve, ctx.data.chosen_rows(), ctx.ensemble, ctx.threads);
  if (r.simulated.empty()) throw CheckError("no simulated dataset had a chooser of " + selection.label());
  out.observed = std::move(r.observed);
  out.simulated = std::move(r.simulated);
  out.skipped_draws = r.skipped_draws;
  return out;
}

std::string CheckRequest::id() const {
  std::string s = check_type + "__" + selection.label();
  if (!group_variable.empty()) s += "__by_" + group_variable;
  if (!variable.empty()) s += "__" + variable;
  if (!value.empty()) s += "=" + value;
  return sanitize(s);
}

nlohmann::json to_json(const CheckRequest& request) {
  nlohmann::json j{{"check_type", request.check_type}, {"selection", request.selection.label()}};
  if (!request.variable.empty()) j["variable"] = request.variable;
  if (!request.value.empty()) j["value"] = request.value;
  if (request.check_type == "binned_reliability" || request.check_type == "binned_marginal_model") {
    j["bins"] = request.bins;
  }
  if (!request.group_variable.empty()) j["group_variable"] = request.group_variable;
  return j;
}

CheckRequest check_request_from_json(const nlohmann::json& j) {
  try {
    CheckRequest r;
    r.check_type = j.at("check_type").get<std::string>();
    r.selection = RowSelector::parse(j.value("selection", std::string{"all"}));
    r.variable = j.value("variable", std::string{});
    if (j.contains("value")) {
      const auto& v = j.at("value");
      r.value = v.is_string() ? v.get<std::string>() : v.dump();
    }
    r.bins = j.value("bins", 10);
    r.group_variable = j.value("group_variable", std::string{});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("check request: ") + e.what());
  }
}

CheckResult run_check(const CheckContext& ctx, const CheckRequest& request) {
  const std::string& t = request.check_type;
  if (t == "log_predictive") return log_predictive_check(ctx);
  if (t == "market_share") {
    const auto mask = request.selection.mask(ctx.data);
    std::vector<std::string> groups;
    if (request.group_variable.empty() && request.selection.kind != RowSelector::Kind::kAll) {
      groups.assign(ctx.data.n_rows(), request.selection.label());
    } else {
      groups = groups_from_variable(ctx.data, request.group_variable);
    }
    for (std::size_t r = 0; r < groups.size(); ++r) {
      if (!mask[r]) groups[r].clear();
    }
    std::string label = "market share";
    if (!request.group_variable.empty()) label += " by " + request.group_variable;
    if (request.selection.kind != RowSelector::Kind::kAll) label += ": " + request.selection.label();
    CheckResult out = market_share_check(ctx, groups, label);
    out.alt = request.selection.label();
    out.variable = request.group_variable;
    return out;
  }
  if (t == "binned_reliability") return binned_reliability_check(ctx, request.selection, request.bins);
  if (t == "binned_reliability_posterior") {
    return binned_reliability_check(ctx, request.selection, request.bins, ReliabilityKey::kPosteriorMean);
  }
  if (t == "binned_marginal_model") {
    return binned_marginal_model_check(ctx, request.selection, request.variable, request.bins);
  }
  if (t == "simulated_histogram") {
    return simulated_histogram_check(ctx, request.selection, request.variable, request.value);
  }
  if (t == "simulated_kde") return simulated_kde_check(ctx, request.selection, request.variable);
  if (t == "simulated_cdf") return simulated_cdf_check(ctx, request.selection, request.variable);
  throw SpecError("unknown check type '" + t + "'");
}

Labeling Labeling::parse(const std::string& text) {
  const std::string t = trim(text);
  Labeling l;
  const auto colon = t.find(':');
  const std::string head = t.substr(0, colon);
  const std::string tail = colon == std::string::npos ? "" : trim(t.substr(colon + 1));
  if (head == "labeled") {
    l.mode = LabelingMode::kLabeled;
    std::size_t start = 0;
    while (start < tail.size()) {
      const auto comma = tail.find(',', start);
      const std::string item = trim(tail.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      const auto v = parse_double(item);
      if (!v || *v != std::floor(*v)) throw LabelingError("labeling: '" + item + "' is not an alternative id");
      l.alternatives.push_back(static_cast<std::int64_t>(*v));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  } else if (head == "proxy") {
    l.mode = LabelingMode::kProxy;
    if (tail.empty()) throw LabelingError("proxy labeling needs a variable: proxy:<variable>");
    l.proxy_variable = tail;
  } else if (head == "chosen_vs_not" || head == "chosen") {
    l.mode = LabelingMode::kChosenVsNot;
  } else {
    throw LabelingError("unknown labeling '" + t + "' (expected labeled, proxy:<var> or chosen_vs_not)");
  }
  return l;
}

namespace {

std::vector<std::int64_t> labeled_alternatives(const ChoiceDataset& data, const Labeling& labeling) {
  if (!labeling.alternatives.empty()) return labeling.alternatives;
  std::vector<std::int64_t> alts(data.alt_ids().begin(), data.alt_ids().end());
  std::ranges::sort(alts);
  alts.erase(std::unique(alts.begin(), alts.end()), alts.end());
  return alts;
}

void append_unique(std::vector<std::string>& v, const std::string& s) {
  if (!s.empty() && std::ranges::find(v, s) == v.end()) v.push_back(s);
}

bool is_discrete(const ChoiceDataset& data, const std::string& variable, std::span<const std::uint8_t> mask,
                 const SuiteOptions& options) {
  const Column& c = data.column(variable);
  if (!c.numeric || std::ranges::find(options.categorical, variable) != options.categorical.end()) return true;
  std::vector<double> values;
  for (std::size_t r = 0; r < mask.size(); ++r) {
    if (mask[r]) values.push_back(c.values[r]);
  }
  return classify_variable(values, options.max_discrete) == VariableClass::kDiscrete;
}

}  // namespace

VariableMap default_variable_map(const ChoiceDataset& data, const DesignSpec& spec, const Labeling& labeling) {
  VariableMap map;
  if (labeling.mode == LabelingMode::kLabeled) {
    for (std::int64_t alt : labeled_alternatives(data, labeling)) {
      auto& vars = map[std::to_string(alt)];
      for (const auto& t : spec.terms) {
        if (t.applies_to(alt)) append_unique(vars, t.variable);
      }
    }
    return map;
  }
  std::vector<std::string> vars;
  for (const auto& t : spec.terms) append_unique(vars, t.variable);
  if (labeling.mode == LabelingMode::kProxy) {
    for (const auto& v : distinct_values(data, labeling.proxy_variable)) map[v] = vars;
  } else {
    map["chosen"] = vars;
  }
  return map;
}

VariableMap variable_map_from_json(const nlohmann::json& j) {
  VariableMap map;
  try {
    for (const auto& [key, value] : j.items()) map[key] = value.get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("variable map: ") + e.what());
  }
  return map;
}

std::vector<CheckRequest> plan_check_suite(const ChoiceDataset& data, const Labeling& labeling,
                                           const VariableMap& variables, const SuiteOptions& options) {
  std::vector<std::pair<std::string, RowSelector>> targets;
  switch (labeling.mode) {
    case LabelingMode::kLabeled:
      for (std::int64_t alt : labeled_alternatives(data, labeling)) {
        targets.emplace_back(std::to_string(alt), RowSelector::alternative(alt));
      }
      break;
    case LabelingMode::kProxy: {
      const std::vector<std::uint8_t> everything(data.n_rows(), 1);
      if (!is_discrete(data, labeling.proxy_variable, everything, options)) {
        throw LabelingError("proxy labeling variable '" + labeling.proxy_variable + "' is not discrete");
      }
      for (const auto& v : distinct_values(data, labeling.proxy_variable)) {
        targets.emplace_back(v, RowSelector::where(labeling.proxy_variable, v));
      }
      break;
    }
    case LabelingMode::kChosenVsNot:
      targets.emplace_back("chosen", RowSelector::all());
      break;
  }

  std::vector<CheckRequest> plan;
  const auto request = [&](std::string type, RowSelector selector, std::string var = {}, std::string value = {}) {
    CheckRequest r;
    r.check_type = std::move(type);
    r.selection = std::move(selector);
    r.variable = std::move(var);
    r.value = std::move(value);
    r.bins = options.bins;
    return r;
  };
  if (options.include_log_predictive) plan.push_back(request("log_predictive", RowSelector::all()));
  if (options.include_overall_share && labeling.mode != LabelingMode::kChosenVsNot) {
    CheckRequest r = request("market_share", RowSelector::all());
    r.group_variable = labeling.mode == LabelingMode::kProxy ? labeling.proxy_variable : "alt_id";
    plan.push_back(r);
  }
  for (const auto& [label, selector] : targets) {
    plan.push_back(request("market_share", selector));
    plan.push_back(request("binned_reliability", selector));
    const auto it = variables.find(label);
    if (it == variables.end()) continue;
    const auto mask = selector.mask(data);
    for (const auto& var : it->second) {
      if (is_discrete(data, var, mask, options)) {
        for (const auto& value : distinct_values(data, var, mask)) {
          plan.push_back(request("simulated_histogram", selector, var, value));
        }
      } else {
        plan.push_back(request("simulated_kde", selector, var));
        plan.push_back(request("simulated_cdf", selector, var));
      }
    }
  }
  plan.insert(plan.end(), options.extra.begin(), options.extra.end());

  std::vector<CheckRequest> unique;
  std::set<std::string> seen;
  for (auto& r : plan) {
    if (seen.insert(r.id()).second) unique.push_back(std::move(r));
  }
  return unique;
}

CheckSuite auto_check_suite(const CheckContext& ctx, const Labeling& labeling, const VariableMap& variables,
                            const SuiteOptions& options) {
  CheckSuite suite;
  suite.requests = plan_check_suite(ctx.data, labeling, variables, options);
  for (const auto& request : suite.requests) {
    try {
      suite.results.emplace_back(run_check(ctx, request));
      suite.errors.emplace_back();
    } catch (const std::exception& e) {
      suite.results.emplace_back(std::nullopt);
      suite.errors.emplace_back(e.what());
    }
  }
  return suite;
}

nlohmann::json to_json(const CheckResult& r) {
  nlohmann::json j;
  j["check_type"] = r.check_type;
  j["label"] = r.label;
  j["alt"] = r.alt;
  if (!r.variable.empty()) j["variable"] = r.variable;
  if (r.bins) j["bins"] = *r.bins;
  if (r.value) j["value"] = *r.value;
  if (!r.groups.empty()) j["groups"] = r.groups;
  if (!r.x.empty()) j["x"] = r.x;
  const bool scalar = r.x.empty() && r.groups.empty() && r.observed.size() == 1;
  if (scalar) {
    j["observed"] = r.observed[0];
    std::vector<double> sims;
    for (const auto& s : r.simulated) sims.push_back(s.at(0));
    j["simulated"] = sims;
    j["p_value"] = r.p_values.at(0);
  } else {
    j["observed"] = r.observed;
    j["simulated"] = r.simulated;
    if (!r.p_values.empty()) j["p_values"] = r.p_values;
  }
  if (!r.expected_curve.empty()) j["expected_curve"] = r.expected_curve;
  j["skipped_draws"] = r.skipped_draws;
  j["seed"] = r.seed;
  j["R"] = r.R;
  return j;
}

CheckResult check_result_from_json(const nlohmann::json& j) {
  try {
    CheckResult r;
    r.check_type = j.at("check_type").get<std::string>();
    r.label = j.value("label", std::string{});
    r.alt = j.value("alt", std::string{});
    r.variable = j.value("variable", std::string{});
    if (j.contains("bins")) r.bins = j.at("bins").get<int>();
    if (j.contains("value")) r.value = j.at("value").get<std::string>();
    r.groups = j.value("groups", std::vector<std::string>{});
    r.x = j.value("x", std::vector<double>{});
    if (j.at("observed").is_number()) {
      r.observed = {j.at("observed").get<double>()};
      for (double v : j.at("simulated").get<std::vector<double>>()) r.simulated.push_back({v});
      r.p_values = {j.at("p_value").get<double>()};
    } else {
      r.observed = j.at("observed").get<std::vector<double>>();
      r.simulated = j.at("simulated").get<std::vector<std::vector<double>>>();
      r.p_values = j.value("p_values", std::vector<double>{});
    }
    r.expected_curve = j.value("expected_curve", std::vector<std::vector<double>>{});
    r.skipped_draws = j.value("skipped_draws", std::size_t{0});
    r.seed = j.value("seed", std::uint64_t{0});
    r.R = j.value("R", std::size_t{0});
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("check result JSON: ") + e.what());
  }
}

}  // namespace choicecheck
