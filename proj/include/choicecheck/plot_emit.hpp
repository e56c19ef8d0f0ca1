#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "choicecheck/diagnostics.hpp"

namespace choicecheck {

struct PlotStyle {
  int width = 720;
  int height = 480;
  std::string observed_color = "#111111";
  double observed_width = 2.5;
  std::string simulated_color = "#6f9fd8";
  double simulated_alpha = 0.25;
  double simulated_width = 1.0;
  std::string expected_color = "#e08a3c";
  double expected_alpha = 0.35;
  std::string reference_color = "#777777";
  std::string reference_dash = "6,4";
  int font_size = 12;
  int title_font_size = 15;
  double padding = 0.05;
  std::optional<double> x_min, x_max, y_min, y_max;

  void validate() const;
};

PlotStyle plot_style_from_json(const nlohmann::json& j);
PlotStyle load_plot_style(const std::filesystem::path& path);

// Standalone SVG 1.1 document. Exactly one element carries class="observed".
std::string render_check(const CheckResult& result, const PlotStyle& style = {});
void write_svg(const CheckResult& result, const PlotStyle& style, const std::filesystem::path& out_path);

// .json writes the CheckResult schema; anything else writes long-format CSV:
//   scalar        series,draw,value          (series = observed | simulated)
//   market share  series,draw,group,value
//   curves        series,draw,x,y            (series = observed | simulated | expected)
void export_plot_data(const CheckResult& result, const std::filesystem::path& out_path);
CheckResult import_plot_data(const std::filesystem::path& json_path);

// Writes <id>.json, <id>.csv and <id>.svg per successful check plus
// manifest.json listing every planned check (failures carry their error).
nlohmann::json emit_suite(const CheckSuite& suite, const std::filesystem::path& dir, const PlotStyle& style = {});

}  // namespace choicecheck
