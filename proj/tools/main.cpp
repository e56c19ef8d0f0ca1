// choice-check: estimate MNL models, run predictive-simulation checks,
// cross-validate, forecast scenarios and export simulated ensembles.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "choicecheck/choice_data.hpp"
#include "choicecheck/design.hpp"
#include "choicecheck/diagnostics.hpp"
#include "choicecheck/error.hpp"
#include "choicecheck/forecast.hpp"
#include "choicecheck/mnl.hpp"
#include "choicecheck/parallel.hpp"
#include "choicecheck/plot_emit.hpp"
#include "choicecheck/predictive_sim.hpp"
#include "choicecheck/rng.hpp"
#include "choicecheck/simd/kernels.hpp"

namespace fs = std::filesystem;
using namespace choicecheck;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNotConverged = 2;

struct Options {
  std::string data;
  std::string schema;
  std::string spec;
  std::size_t r_draws = 100;
  std::optional<std::uint64_t> seed;
  int bins = 10;
  std::string out = "out";
  std::string labeling;
  std::vector<std::string> scenarios;
  int folds = 10;
  std::string external_draws;
  std::string plan;
  std::string variables;
  std::string style;
  std::string categories;
  std::vector<std::string> external_probabilities;
  std::size_t threads = 0;
  int max_iter = 100;
  std::string long_out;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

json read_json_file(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw SpecError(path + ": " + e.what());
  }
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

// out/<command>-<hash of the configuration and input file contents>
fs::path output_dir(const Options& o, const std::string& command, const json& config,
                    const std::vector<std::string>& inputs) {
  std::uint64_t h = fnv1a(command);
  h = fnv1a(config.dump(), h);
  for (const auto& path : inputs) {
    if (!path.empty()) h = fnv1a(read_file(path), h);
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  const fs::path dir = fs::path(o.out) / (command + "-" + std::string(buf, 12));
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(1) + "\n"); }

ChoiceDataset load_dataset(const Options& o) {
  if (o.data.empty()) throw SchemaError("--data is required");
  if (!fs::exists(o.data)) throw IoError("data file not found: " + o.data);
  if (o.schema.empty()) return load_long_csv(o.data);
  const json schema = read_json_file(o.schema);
  const bool wide = schema.value("format", std::string{}) == "wide" || schema.contains("n_alternatives");
  return wide ? load_wide_csv(o.data, wide_schema_from_json(schema)) : load_long_csv(o.data, long_schema_from_json(schema));
}

DesignSpec load_spec(const Options& o) {
  if (o.spec.empty()) throw SpecError("--spec is required");
  return load_design_spec(o.spec);
}

std::uint64_t require_seed(const Options& o) {
  if (!o.seed) throw SpecError("--seed is required (no default seed)");
  return *o.seed;
}

json metadata(const std::string& command) {
  return {{"command", command},
          {"tool", "choice-check"},
          {"version", "0.1.0"},
          {"rng", std::string(rng_description())}};
}

json base_config(const Options& o) {
  json c{{"data", o.data}, {"schema", o.schema}, {"spec", o.spec}};
  if (o.seed) c["seed"] = *o.seed;
  c["max_iter"] = o.max_iter;
  return c;
}

json model_json(const FittedModel& m) {
  std::vector<std::vector<double>> cov(static_cast<std::size_t>(m.covariance.rows()));
  for (Eigen::Index i = 0; i < m.covariance.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.covariance.cols(); ++j) cov[static_cast<std::size_t>(i)].push_back(m.covariance(i, j));
  }
  return {{"term_names", m.term_names},
          {"beta", std::vector<double>(m.beta.data(), m.beta.data() + m.beta.size())},
          {"covariance", cov},
          {"loglik", m.loglik},
          {"converged", m.converged},
          {"spec", to_json(m.spec)}};
}

FittedModel fit(const ChoiceDataset& data, const DesignSpec& spec, const Options& o) {
  FitOptions fo;
  fo.max_iter = o.max_iter;
  return estimate(data, spec, fo);
}

int cmd_estimate(const Options& o) {
  const ChoiceDataset data = load_dataset(o);
  const DesignSpec spec = load_spec(o);
  const FittedModel model = fit(data, spec, o);
  const FitSummary summary = fit_summary(model, data);
  const fs::path dir = output_dir(o, "estimate", base_config(o), {o.data, o.schema, o.spec});
  json report = estimation_report_json(model, summary);
  report["metadata"] = metadata("estimate");
  write_json(dir / "estimate.json", report);
  const std::string text = estimation_report_text(model, summary);
  write_text(dir / "estimate.txt", text);
  write_json(dir / "model.json", model_json(model));
  std::cout << text << "output: " << dir.string() << '\n';
  if (!model.converged) {
    std::cerr << "error: estimation did not converge: " << model.message << '\n';
    return kExitNotConverged;
  }
  return kExitOk;
}

ParameterDraws make_draws(const FittedModel& model, const Options& o, std::uint64_t seed) {
  if (!o.external_draws.empty()) {
    ParameterDraws d = ingest_external_draws(o.external_draws, model.n_params);
    d.seed = seed;
    return d;
  }
  return draw_parameters(model, o.r_draws, seed);
}

int cmd_check(const Options& o) {
  const std::uint64_t seed = require_seed(o);
  if (o.r_draws < 1) throw DomainError("--r-draws must be at least 1");
  const ChoiceDataset data = load_dataset(o);
  const DesignSpec spec = load_spec(o);
  json plan = o.plan.empty() ? json::object() : read_json_file(o.plan);

  SuiteOptions so;
  so.bins = plan.value("bins", o.bins);
  if (o.bins != 10) so.bins = o.bins;
  so.include_log_predictive = plan.value("include_log_predictive", true);
  so.include_overall_share = plan.value("include_overall_share", true);
  so.max_discrete = plan.value("max_discrete", std::size_t{12});
  so.categorical = plan.value("categorical", std::vector<std::string>{});
  if (plan.contains("extra")) {
    for (const auto& e : plan.at("extra")) so.extra.push_back(check_request_from_json(e));
  }
  const std::string labeling_text = !o.labeling.empty() ? o.labeling : plan.value("labeling", std::string{"labeled"});
  const Labeling labeling = Labeling::parse(labeling_text);
  VariableMap variables;
  if (!o.variables.empty()) {
    variables = variable_map_from_json(read_json_file(o.variables));
  } else if (plan.contains("variables")) {
    variables = variable_map_from_json(plan.at("variables"));
  } else {
    variables = default_variable_map(data, spec, labeling);
  }
  const PlotStyle style = o.style.empty() ? PlotStyle{} : load_plot_style(o.style);

  json config = base_config(o);
  config["r_draws"] = o.r_draws;
  config["bins"] = so.bins;
  config["labeling"] = labeling_text;
  config["plan"] = plan;
  config["external_draws"] = o.external_draws;
  config["style"] = o.style;
  config["variables"] = o.variables;

  const FittedModel model = fit(data, spec, o);
  const fs::path dir =
      output_dir(o, "check", config, {o.data, o.schema, o.spec, o.external_draws, o.style, o.variables});
  write_json(dir / "model.json", model_json(model));
  if (!model.converged && o.external_draws.empty()) {
    std::cerr << "error: estimation did not converge: " << model.message << '\n';
    return kExitNotConverged;
  }
  auto design = std::make_shared<const DesignMatrix>(build_design(data, spec));
  const SimulationEnsemble ensemble =
      simulate_outcomes(design, make_draws(model, o, seed), seed, {.threads = o.threads});
  const CheckContext ctx{data, *design, model.beta, ensemble, o.threads};
  const CheckSuite suite = auto_check_suite(ctx, labeling, variables, so);
  json manifest = emit_suite(suite, dir / "checks", style);
  manifest["metadata"] = metadata("check");
  manifest["metadata"]["seed"] = seed;
  manifest["metadata"]["R"] = ensemble.r_count();
  manifest["metadata"]["draw_source"] = ensemble.draws().source == DrawSource::kExternal ? "external" : "asymptotic";
  manifest["log_pointwise_predictive"] =
      log_pointwise_predictive(*design, data.choices(), ensemble.draws());
  write_json(dir / "checks" / "manifest.json", manifest);

  std::printf("%-64s %-7s %s\n", "check", "status", "p-value(s)");
  for (std::size_t i = 0; i < suite.requests.size(); ++i) {
    std::string ps;
    if (suite.results[i] && !suite.results[i]->is_curve()) {
      for (double p : suite.results[i]->p_values) {
        char b[16];
        std::snprintf(b, sizeof b, "%.3f ", p);
        ps += b;
      }
    } else if (!suite.results[i]) {
      ps = suite.errors[i];
    }
    std::printf("%-64s %-7s %s\n", suite.requests[i].id().c_str(), suite.results[i] ? "ok" : "error", ps.c_str());
  }
  std::cout << "output: " << dir.string() << '\n';
  return kExitOk;
}

int cmd_cv(const Options& o) {
  const std::uint64_t seed = require_seed(o);
  const ChoiceDataset data = load_dataset(o);
  const DesignSpec spec = load_spec(o);
  json config = base_config(o);
  config["folds"] = o.folds;
  FitOptions fo;
  fo.max_iter = o.max_iter;
  const CrossValidationResult cv = cross_validate(data, spec, o.folds, seed, fo, o.threads);
  const fs::path dir = output_dir(o, "cv", config, {o.data, o.schema, o.spec});
  json report = to_json(cv);
  report["metadata"] = metadata("cv");
  write_json(dir / "cv.json", report);
  std::ostringstream text;
  char line[128];
  for (std::size_t f = 0; f < cv.fold_loglik.size(); ++f) {
    std::snprintf(line, sizeof line, "fold %2zu  n=%5zu  out-of-sample LL %12.3f%s\n", f + 1, cv.fold_sizes[f],
                  cv.fold_loglik[f], cv.fold_converged[f] ? "" : "  (not converged)");
    text << line;
  }
  std::snprintf(line, sizeof line, "mean out-of-sample LL over %d folds: %.3f\n", cv.folds, cv.mean_loglik);
  text << line;
  for (const auto& w : cv.warnings) text << "warning: " << w << '\n';
  write_text(dir / "cv.txt", text.str());
  std::cout << text.str() << "output: " << dir.string() << '\n';
  for (bool c : cv.fold_converged) {
    if (!c) return kExitNotConverged;
  }
  return kExitOk;
}

int cmd_forecast(const Options& o) {
  if (o.scenarios.empty()) throw SpecError("--scenario is required");
  if (o.categories.empty()) throw SpecError("--categories is required");
  const ChoiceDataset data = load_dataset(o);
  const json cat_json = read_json_file(o.categories);
  const CategoryMap categories = category_map_from_json(cat_json);
  const auto focus = cat_json.value("focus", std::vector<std::string>{});
  std::vector<Scenario> scenarios;
  for (const auto& path : o.scenarios) scenarios.push_back(load_scenario(path));

  json config = base_config(o);
  config["scenarios"] = o.scenarios;
  config["categories"] = o.categories;
  config["r_draws"] = o.r_draws;
  config["external_probabilities"] = o.external_probabilities;
  std::vector<std::string> inputs{o.data, o.schema, o.spec, o.categories};
  inputs.insert(inputs.end(), o.scenarios.begin(), o.scenarios.end());
  inputs.insert(inputs.end(), o.external_probabilities.begin(), o.external_probabilities.end());

  std::vector<ForecastReport> reports;
  int status = kExitOk;
  if (!o.external_probabilities.empty()) {
    if (o.external_probabilities.size() != 2 * scenarios.size()) {
      throw SpecError("--external-probabilities takes a baseline and a scenario file per --scenario");
    }
    for (std::size_t s = 0; s < scenarios.size(); ++s) {
      const Vector base = load_external_probabilities(o.external_probabilities[2 * s], data);
      const Vector scen = load_external_probabilities(o.external_probabilities[2 * s + 1], data);
      reports.push_back(forecast_shares_from_probabilities(data, base, scen, categories, scenarios[s].name));
    }
  } else {
    const DesignSpec spec = load_spec(o);
    const FittedModel model = fit(data, spec, o);
    if (!model.converged) {
      std::cerr << "error: estimation did not converge: " << model.message << '\n';
      status = kExitNotConverged;
    }
    std::optional<ParameterDraws> draws;
    if (o.r_draws > 0 && o.seed && model.converged) draws = draw_parameters(model, o.r_draws, *o.seed);
    for (const auto& sc : scenarios) {
      ScenarioOutcome applied = apply_scenario(data, sc);
      ForecastReport r =
          forecast_shares(model, data, applied.data, spec, categories, draws ? &*draws : nullptr, sc.name);
      r.warnings.insert(r.warnings.end(), applied.warnings.begin(), applied.warnings.end());
      reports.push_back(std::move(r));
    }
  }
  const fs::path dir = output_dir(o, "forecast", config, inputs);
  json all = json::array();
  std::string text;
  for (const auto& r : reports) {
    all.push_back(to_json(r));
    text += forecast_report_text(r, 4, focus) + "\n";
  }
  write_json(dir / "forecast.json", {{"reports", all}, {"metadata", metadata("forecast")}});
  write_text(dir / "forecast.txt", text);
  std::cout << text << "output: " << dir.string() << '\n';
  return status;
}

int cmd_simulate(const Options& o) {
  const std::uint64_t seed = require_seed(o);
  const ChoiceDataset data = load_dataset(o);
  const DesignSpec spec = load_spec(o);
  const FittedModel model = fit(data, spec, o);
  if (!model.converged && o.external_draws.empty()) {
    std::cerr << "error: estimation did not converge: " << model.message << '\n';
    return kExitNotConverged;
  }
  json config = base_config(o);
  config["r_draws"] = o.r_draws;
  config["external_draws"] = o.external_draws;
  auto design = std::make_shared<const DesignMatrix>(build_design(data, spec));
  const SimulationEnsemble ensemble =
      simulate_outcomes(design, make_draws(model, o, seed), seed, {.threads = o.threads});
  const fs::path dir = output_dir(o, "simulate", config, {o.data, o.schema, o.spec, o.external_draws});
  export_ensemble_csv(ensemble, dir / "ensemble.csv");
  std::ostringstream draws;
  for (std::size_t r = 0; r < ensemble.r_count(); ++r) {
    for (std::size_t k = 0; k < model.n_params; ++k) {
      draws << (k ? "," : "") << format_double(ensemble.draws().draws(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)));
    }
    draws << '\n';
  }
  write_text(dir / "draws.csv", draws.str());
  json meta = metadata("simulate");
  meta["seed"] = seed;
  meta["R"] = ensemble.r_count();
  meta["term_names"] = model.term_names;
  write_json(dir / "simulate.json", meta);
  std::cout << "simulated " << ensemble.r_count() << " datasets of " << ensemble.n_sets()
            << " choice sets\noutput: " << dir.string() << '\n';
  return kExitOk;
}

int cmd_convert(const Options& o) {
  if (o.long_out.empty()) throw SpecError("--long-out is required");
  const ChoiceDataset data = load_dataset(o);
  write_long_csv(data, o.long_out);
  std::cout << "wrote " << data.n_rows() << " rows (" << data.n_sets() << " choice sets) to " << o.long_out << '\n';
  return kExitOk;
}

void add_common(CLI::App* sub, Options& o) {
  sub->add_option("--data", o.data, "Choice data CSV (long format unless the schema says wide)");
  sub->add_option("--schema", o.schema, "Schema JSON (column names, wide layout, transforms)");
  sub->add_option("--out", o.out, "Output root; results go to <out>/<command>-<hash>")->capture_default_str();
  sub->add_option("--threads", o.threads, "Worker threads (default: CHOICE_CHECK_THREADS or all cores)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multinomial logit estimation and predictive-simulation model checks"};
  app.require_subcommand(1);
  Options o;

  auto* estimate_cmd = app.add_subcommand("estimate", "Fit an MNL model and write the estimation report");
  auto* check_cmd = app.add_subcommand("check", "Run the predictive-simulation check suite");
  auto* cv_cmd = app.add_subcommand("cv", "K-fold cross-validated out-of-sample log-likelihood");
  auto* forecast_cmd = app.add_subcommand("forecast", "Forecast market-share changes under scenarios");
  auto* simulate_cmd = app.add_subcommand("simulate", "Export parameter draws and simulated choices");
  auto* convert_cmd = app.add_subcommand("convert", "Convert a dataset to the long CSV format");

  for (auto* sub : {estimate_cmd, check_cmd, cv_cmd, forecast_cmd, simulate_cmd, convert_cmd}) add_common(sub, o);
  for (auto* sub : {estimate_cmd, check_cmd, cv_cmd, forecast_cmd, simulate_cmd}) {
    sub->add_option("--spec", o.spec, "Design spec JSON");
    sub->add_option("--seed", o.seed, "Master seed (required wherever randomness is used)");
    sub->add_option("--max-iter", o.max_iter, "Newton iteration cap")->capture_default_str();
  }
  for (auto* sub : {check_cmd, simulate_cmd, forecast_cmd}) {
    sub->add_option("--r-draws", o.r_draws, "Number of parameter draws R");
  }
  for (auto* sub : {check_cmd, simulate_cmd}) {
    sub->add_option("--external-draws", o.external_draws, "Headerless CSV of parameter draws (one per row)");
  }
  check_cmd->add_option("--bins", o.bins, "Bins for reliability and marginal-model checks")->capture_default_str();
  check_cmd->add_option("--labeling", o.labeling, "labeled[:ids] | proxy:<variable> | chosen_vs_not");
  check_cmd->add_option("--plan", o.plan, "Check plan JSON (labeling, variables, extra checks)");
  check_cmd->add_option("--variables", o.variables, "Variable map JSON: label -> related variables");
  check_cmd->add_option("--style", o.style, "Plot style JSON");
  cv_cmd->add_option("--folds", o.folds, "Number of folds")->capture_default_str();
  forecast_cmd->add_option("--scenario", o.scenarios, "Scenario JSON (repeatable)");
  forecast_cmd->add_option("--categories", o.categories, "Category map JSON");
  forecast_cmd->add_option("--external-probabilities", o.external_probabilities,
                           "Baseline and scenario probability CSVs per scenario (skips estimation)");
  convert_cmd->add_option("--long-out", o.long_out, "Destination long CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInput;
  }
  if (!check_cmd->count("--r-draws") && !simulate_cmd->count("--r-draws")) {
    if (forecast_cmd->parsed()) o.r_draws = forecast_cmd->count("--r-draws") ? o.r_draws : 0;
  }

  try {
    if (estimate_cmd->parsed()) return cmd_estimate(o);
    if (check_cmd->parsed()) return cmd_check(o);
    if (cv_cmd->parsed()) return cmd_cv(o);
    if (forecast_cmd->parsed()) return cmd_forecast(o);
    if (simulate_cmd->parsed()) return cmd_simulate(o);
    if (convert_cmd->parsed()) return cmd_convert(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInput;
  }
  return kExitInput;
}
