#include "choicecheck/plot_emit.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "choicecheck/error.hpp"
#include "csv.hpp"

namespace choicecheck {

void PlotStyle::validate() const {
  if (width <= 0 || height <= 0) throw DomainError("plot dimensions must be positive");
  if (simulated_alpha < 0.0 || simulated_alpha > 1.0 || expected_alpha < 0.0 || expected_alpha > 1.0) {
    throw DomainError("plot alpha must lie in [0, 1]");
  }
  if (padding < 0.0) throw DomainError("plot padding must be non-negative");
}

PlotStyle plot_style_from_json(const nlohmann::json& j) {
  PlotStyle s;
  try {
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.observed_color = j.value("observed_color", s.observed_color);
    s.observed_width = j.value("observed_width", s.observed_width);
    s.simulated_color = j.value("simulated_color", s.simulated_color);
    s.simulated_alpha = j.value("simulated_alpha", s.simulated_alpha);
    s.simulated_width = j.value("simulated_width", s.simulated_width);
    s.expected_color = j.value("expected_color", s.expected_color);
    s.expected_alpha = j.value("expected_alpha", s.expected_alpha);
    s.reference_color = j.value("reference_color", s.reference_color);
    s.reference_dash = j.value("reference_dash", s.reference_dash);
    s.font_size = j.value("font_size", s.font_size);
    s.title_font_size = j.value("title_font_size", s.title_font_size);
    s.padding = j.value("padding", s.padding);
    if (j.contains("x_min")) s.x_min = j.at("x_min").get<double>();
    if (j.contains("x_max")) s.x_max = j.at("x_max").get<double>();
    if (j.contains("y_min")) s.y_min = j.at("y_min").get<double>();
    if (j.contains("y_max")) s.y_max = j.at("y_max").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw SpecError(std::string("plot style: ") + e.what());
  }
  s.validate();
  return s;
}

PlotStyle load_plot_style(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open plot style " + path.string());
  try {
    return plot_style_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw SpecError(path.string() + ": " + e.what());
  }
}

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  if (s == "-0.00") s = "0.00";
  return s;
}

std::string label_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", v);
  std::string s = buf;
  if (s == "-0") s = "0";
  return s;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish(double padding, std::optional<double> force_lo, std::optional<double> force_hi) {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) {
      const double d = std::max(1e-6, std::abs(lo) * 0.05);
      lo -= d;
      hi += d;
    }
    const double pad = (hi - lo) * padding;
    lo -= pad;
    hi += pad;
    if (force_lo) lo = *force_lo;
    if (force_hi) hi = *force_hi;
  }
};

std::vector<double> nice_ticks(double lo, double hi) {
  const double span = hi - lo;
  const double raw = span / 5.0;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double m : {1.0, 2.0, 2.5, 5.0, 10.0}) {
    step = m * mag;
    if (span / step <= 6.0) break;
  }
  std::vector<double> ticks;
  for (double t = std::ceil(lo / step) * step; t <= hi + 1e-9 * step; t += step) {
    ticks.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  }
  return ticks;
}

class Canvas {
 public:
  Canvas(const PlotStyle& style, Range xr, Range yr) : style_(style), xr_(xr), yr_(yr) {
    left_ = 70.0;
    right_ = style.width - 20.0;
    top_ = 40.0;
    bottom_ = style.height - 55.0;
  }

  double px(double x) const { return left_ + (x - xr_.lo) / (xr_.hi - xr_.lo) * (right_ - left_); }
  double py(double y) const { return bottom_ - (y - yr_.lo) / (yr_.hi - yr_.lo) * (bottom_ - top_); }
  double clamp_y(double y) const { return std::clamp(py(y), top_, bottom_); }

  std::string polyline(const std::vector<double>& xs, const std::vector<double>& ys) const {
    std::string pts;
    for (std::size_t i = 0; i < xs.size() && i < ys.size(); ++i) {
      if (!pts.empty()) pts += ' ';
      pts += num(px(xs[i])) + "," + num(py(ys[i]));
    }
    return pts;
  }

  // Right-continuous step path through (xs, ys).
  std::string step_path(const std::vector<double>& xs, const std::vector<double>& ys) const {
    std::string d;
    for (std::size_t i = 0; i < xs.size() && i < ys.size(); ++i) {
      if (i == 0) {
        d += "M" + num(px(xs[0])) + "," + num(py(ys[0]));
      } else {
        d += " H" + num(px(xs[i])) + " V" + num(py(ys[i]));
      }
    }
    return d;
  }

  void axes(std::ostringstream& out, const std::string& x_label, const std::string& y_label,
            bool integer_x = false) const {
    out << "<g class=\"axes\" font-family=\"sans-serif\" font-size=\"" << style_.font_size << "\" fill=\"#333333\">\n";
    out << "<rect x=\"" << num(left_) << "\" y=\"" << num(top_) << "\" width=\"" << num(right_ - left_)
        << "\" height=\"" << num(bottom_ - top_) << "\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
    for (double t : nice_ticks(xr_.lo, xr_.hi)) {
      if (integer_x && t != std::floor(t)) continue;
      out << "<line x1=\"" << num(px(t)) << "\" y1=\"" << num(bottom_) << "\" x2=\"" << num(px(t)) << "\" y2=\""
          << num(bottom_ + 5) << "\" stroke=\"#333333\"/>\n";
      out << "<text x=\"" << num(px(t)) << "\" y=\"" << num(bottom_ + 8 + style_.font_size)
          << "\" text-anchor=\"middle\">" << label_num(t) << "</text>\n";
    }
    for (double t : nice_ticks(yr_.lo, yr_.hi)) {
      out << "<line x1=\"" << num(left_ - 5) << "\" y1=\"" << num(py(t)) << "\" x2=\"" << num(left_) << "\" y2=\""
          << num(py(t)) << "\" stroke=\"#333333\"/>\n";
      out << "<text x=\"" << num(left_ - 8) << "\" y=\"" << num(py(t) + style_.font_size / 3.0)
          << "\" text-anchor=\"end\">" << label_num(t) << "</text>\n";
    }
    out << "<text x=\"" << num((left_ + right_) / 2) << "\" y=\"" << num(style_.height - 12.0)
        << "\" text-anchor=\"middle\">" << xml_escape(x_label) << "</text>\n";
    out << "<text transform=\"translate(16," << num((top_ + bottom_) / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
        << xml_escape(y_label) << "</text>\n";
    out << "</g>\n";
  }

  double left() const { return left_; }
  double right() const { return right_; }
  double top() const { return top_; }
  double bottom() const { return bottom_; }

 private:
  const PlotStyle& style_;
  Range xr_, yr_;
  double left_, right_, top_, bottom_;
};

void header(std::ostringstream& out, const PlotStyle& s, const CheckResult& r) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << s.width << "\" height=\"" << s.height
      << "\" viewBox=\"0 0 " << s.width << ' ' << s.height << "\">\n";
  out << "<title>" << xml_escape(r.label) << "</title>\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  out << "<text x=\"" << s.width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\""
      << s.title_font_size << "\" fill=\"#111111\">" << xml_escape(r.label) << "</text>\n";
}

std::string sim_stroke(const PlotStyle& s) {
  return "stroke=\"" + s.simulated_color + "\" stroke-opacity=\"" + label_num(s.simulated_alpha) +
         "\" stroke-width=\"" + label_num(s.simulated_width) + "\" fill=\"none\"";
}

std::string obs_stroke(const PlotStyle& s) {
  return "stroke=\"" + s.observed_color + "\" stroke-width=\"" + label_num(s.observed_width) + "\" fill=\"none\"";
}

std::string p_text(const CheckResult& r, std::size_t g = 0) {
  if (g >= r.p_values.size()) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "p = %.3f", r.p_values[g]);
  return buf;
}

std::vector<double> column(const CheckResult& r, std::size_t g) {
  std::vector<double> v;
  v.reserve(r.simulated.size());
  for (const auto& s : r.simulated) v.push_back(s.at(g));
  return v;
}

double quantile(std::vector<double> v, double q) {
  std::ranges::sort(v);
  if (v.empty()) return 0.0;
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const std::size_t j = std::min(i + 1, v.size() - 1);
  return v[i] + (pos - static_cast<double>(i)) * (v[j] - v[i]);
}

void render_log_predictive(std::ostringstream& out, const CheckResult& r, const PlotStyle& s) {
  const auto sims = column(r, 0);
  const double obs = r.observed.at(0);
  std::vector<double> grid, dens;
  Range xr, yr;
  for (double v : sims) xr.add(v);
  xr.add(obs);
  if (sims.size() >= 2) {
    const double h = scott_bandwidth(sims);
    const auto [lo, hi] = std::ranges::minmax(sims);
    const double a = std::min(lo - 3 * h, obs), b = std::max(hi + 3 * h, obs);
    for (int g = 0; g < 256; ++g) grid.push_back(a + (b - a) * g / 255.0);
    dens = kde_curve(sims, grid, h);
    for (double v : grid) xr.add(v);
    for (double v : dens) yr.add(v);
  }
  yr.add(0.0);
  xr.finish(s.padding, s.x_min, s.x_max);
  yr.finish(s.padding, s.y_min, s.y_max);
  const Canvas c(s, xr, yr);
  header(out, s, r);
  c.axes(out, "log-likelihood of simulated outcomes", "density");
  if (!grid.empty()) {
    out << "<path class=\"simulated\" d=\"M" << num(c.px(grid.front())) << "," << num(c.py(0.0));
    for (std::size_t i = 0; i < grid.size(); ++i) out << " L" << num(c.px(grid[i])) << "," << num(c.py(dens[i]));
    out << " L" << num(c.px(grid.back())) << "," << num(c.py(0.0)) << " Z\" fill=\"" << s.simulated_color
        << "\" fill-opacity=\"" << label_num(s.simulated_alpha) << "\" stroke=\"" << s.simulated_color << "\"/>\n";
  }
  out << "<line class=\"observed\" x1=\"" << num(c.px(obs)) << "\" y1=\"" << num(c.top()) << "\" x2=\""
      << num(c.px(obs)) << "\" y2=\"" << num(c.bottom()) << "\" " << obs_stroke(s) << "/>\n";
  out << "<text x=\"" << num(c.px(obs) + 6) << "\" y=\"" << num(c.top() + 16)
      << "\" font-family=\"sans-serif\" font-size=\"" << s.font_size << "\">observed = " << label_num(obs) << ", "
      << p_text(r) << "</text>\n";
}

void render_market_share(std::ostringstream& out, const CheckResult& r, const PlotStyle& s) {
  const std::size_t n = r.groups.size();
  Range xr, yr;
  xr.lo = -0.5;
  xr.hi = static_cast<double>(n) - 0.5;
  for (std::size_t g = 0; g < n; ++g) {
    for (double v : column(r, g)) yr.add(v);
    yr.add(r.observed.at(g));
  }
  yr.finish(s.padding, s.y_min, s.y_max);
  Range fixed_x = xr;
  const Canvas c(s, fixed_x, yr);
  header(out, s, r);
  c.axes(out, "", "number of decision makers choosing", true);
  const double half = 0.25 * (c.right() - c.left()) / std::max<std::size_t>(n, 1);
  out << "<g class=\"simulated\" stroke=\"" << s.simulated_color << "\" fill=\"" << s.simulated_color
      << "\" fill-opacity=\"" << label_num(s.simulated_alpha) << "\">\n";
  for (std::size_t g = 0; g < n; ++g) {
    const auto v = column(r, g);
    const double cx = c.px(static_cast<double>(g));
    if (v.empty()) continue;
    const double q1 = quantile(v, 0.25), q2 = quantile(v, 0.5), q3 = quantile(v, 0.75);
    const double lo = *std::ranges::min_element(v), hi = *std::ranges::max_element(v);
    out << "<line x1=\"" << num(cx) << "\" y1=\"" << num(c.py(lo)) << "\" x2=\"" << num(cx) << "\" y2=\""
        << num(c.py(q1)) << "\"/>\n";
    out << "<line x1=\"" << num(cx) << "\" y1=\"" << num(c.py(q3)) << "\" x2=\"" << num(cx) << "\" y2=\""
        << num(c.py(hi)) << "\"/>\n";
    out << "<rect x=\"" << num(cx - half) << "\" y=\"" << num(c.py(q3)) << "\" width=\"" << num(2 * half)
        << "\" height=\"" << num(std::max(0.5, c.py(q1) - c.py(q3))) << "\"/>\n";
    out << "<line x1=\"" << num(cx - half) << "\" y1=\"" << num(c.py(q2)) << "\" x2=\"" << num(cx + half)
        << "\" y2=\"" << num(c.py(q2)) << "\" stroke-width=\"2\"/>\n";
  }
  out << "</g>\n";
  std::string d;
  for (std::size_t g = 0; g < n; ++g) {
    const double cx = c.px(static_cast<double>(g)), cy = c.py(r.observed[g]);
    d += (d.empty() ? "" : " ") + std::string("M") + num(cx - 7) + "," + num(cy) + " L" + num(cx) + "," +
         num(cy - 7) + " L" + num(cx + 7) + "," + num(cy) + " L" + num(cx) + "," + num(cy + 7) + " Z";
  }
  out << "<path class=\"observed\" d=\"" << d << "\" fill=\"" << s.observed_color << "\"/>\n";
  out << "<g font-family=\"sans-serif\" font-size=\"" << s.font_size << "\" text-anchor=\"middle\">\n";
  for (std::size_t g = 0; g < n; ++g) {
    const double cx = c.px(static_cast<double>(g));
    out << "<text x=\"" << num(cx) << "\" y=\"" << num(c.bottom() + 8 + s.font_size) << "\">" << xml_escape(r.groups[g])
        << "</text>\n";
    out << "<text x=\"" << num(cx) << "\" y=\"" << num(c.top() + 14) << "\">" << p_text(r, g) << "</text>\n";
  }
  out << "</g>\n";
}

void render_curves(std::ostringstream& out, const CheckResult& r, const PlotStyle& s) {
  const bool reliability = r.check_type.rfind("binned_reliability", 0) == 0;
  const bool marginal = r.check_type == "binned_marginal_model";
  const bool cdf = r.check_type == "simulated_cdf";
  const bool binned = reliability || marginal;
  Range xr, yr;
  for (double v : r.x) xr.add(v);
  for (const auto& curve : r.simulated) for (double v : curve) yr.add(v);
  for (const auto& curve : r.expected_curve) for (double v : curve) yr.add(v);
  for (double v : r.observed) yr.add(v);
  if (reliability) {
    for (double v : r.x) yr.add(v);
  }
  if (cdf) {
    yr.add(0.0);
    yr.add(1.0);
  }
  if (r.check_type == "simulated_kde") yr.add(0.0);
  xr.finish(s.padding, s.x_min, s.x_max);
  yr.finish(s.padding, s.y_min, s.y_max);
  const Canvas c(s, xr, yr);
  header(out, s, r);
  std::string x_label = r.variable.empty() ? "x" : r.variable;
  std::string y_label = "density";
  if (reliability) {
    x_label = "mean predicted probability";
    y_label = "observed share choosing";
  } else if (marginal) {
    x_label = "binned " + r.variable;
    y_label = "probability / share choosing";
  } else if (cdf) {
    y_label = "cumulative share of choosers";
  }
  c.axes(out, x_label, y_label);
  out << "<defs><clipPath id=\"plot-area\"><rect x=\"" << num(c.left()) << "\" y=\"" << num(c.top()) << "\" width=\""
      << num(c.right() - c.left()) << "\" height=\"" << num(c.bottom() - c.top()) << "\"/></clipPath></defs>\n";
  if (reliability) {
    const double lo = std::max(xr.lo, yr.lo), hi = std::min(xr.hi, yr.hi);
    out << "<line class=\"reference\" x1=\"" << num(c.px(lo)) << "\" y1=\"" << num(c.py(lo)) << "\" x2=\""
        << num(c.px(hi)) << "\" y2=\"" << num(c.py(hi)) << "\" stroke=\"" << s.reference_color
        << "\" stroke-dasharray=\"" << s.reference_dash << "\" stroke-width=\"1.5\"/>\n";
  }
  out << "<g clip-path=\"url(#plot-area)\">\n";
  out << "<g class=\"simulated\" " << sim_stroke(s) << ">\n";
  for (const auto& curve : r.simulated) {
    if (cdf) {
      out << "<path d=\"" << c.step_path(r.x, curve) << "\"/>\n";
    } else {
      out << "<polyline points=\"" << c.polyline(r.x, curve) << "\"/>\n";
    }
  }
  out << "</g>\n";
  if (!r.expected_curve.empty()) {
    out << "<g class=\"expected\" stroke=\"" << s.expected_color << "\" stroke-opacity=\""
        << label_num(s.expected_alpha) << "\" stroke-width=\"1\" fill=\"none\">\n";
    for (const auto& curve : r.expected_curve) out << "<polyline points=\"" << c.polyline(r.x, curve) << "\"/>\n";
    out << "</g>\n";
  }
  out << "</g>\n";
  out << "<g class=\"observed\" " << obs_stroke(s) << ">\n";
  if (cdf) {
    out << "<path d=\"" << c.step_path(r.x, r.observed) << "\"/>\n";
  } else {
    out << "<polyline points=\"" << c.polyline(r.x, r.observed) << "\"/>\n";
  }
  if (binned) {
    for (std::size_t i = 0; i < r.x.size(); ++i) {
      out << "<circle cx=\"" << num(c.px(r.x[i])) << "\" cy=\"" << num(c.py(r.observed[i])) << "\" r=\"3.5\" fill=\""
          << s.observed_color << "\"/>\n";
    }
  }
  out << "</g>\n";
  if (r.skipped_draws > 0) {
    out << "<text x=\"" << num(c.right() - 6) << "\" y=\"" << num(c.top() + 16)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"" << s.font_size << "\">" << r.skipped_draws
        << " of " << r.R << " draws skipped</text>\n";
  }
}

void render_histogram(std::ostringstream& out, const CheckResult& r, const PlotStyle& s) {
  const auto sims = column(r, 0);
  const double obs = r.observed.at(0);
  // Integer-valued counts get unit-width bars; wide ranges are grouped.
  double lo = obs, hi = obs;
  for (double v : sims) lo = std::min(lo, v), hi = std::max(hi, v);
  const double width = std::max(1.0, std::ceil((hi - lo + 1.0) / 60.0));
  std::map<double, std::size_t> bars;
  for (double v : sims) ++bars[std::floor((v - lo) / width) * width + lo];
  Range xr, yr;
  xr.add(lo - 0.5 * width);
  xr.add(hi + 0.5 * width);
  yr.add(0.0);
  for (const auto& [x, n] : bars) yr.add(static_cast<double>(n));
  xr.finish(s.padding, s.x_min, s.x_max);
  yr.finish(s.padding, s.y_min, s.y_max);
  const Canvas c(s, xr, yr);
  header(out, s, r);
  c.axes(out, "number choosing " + r.alt + " with " + r.variable + " = " + r.value.value_or(""), "simulated datasets");
  out << "<g class=\"simulated\" fill=\"" << s.simulated_color << "\" fill-opacity=\""
      << label_num(std::max(s.simulated_alpha, 0.6)) << "\" stroke=\"#ffffff\" stroke-width=\"0.5\">\n";
  for (const auto& [x, n] : bars) {
    const double x0 = c.px(x - 0.5), x1 = c.px(x + width - 0.5);
    out << "<rect x=\"" << num(x0) << "\" y=\"" << num(c.py(static_cast<double>(n))) << "\" width=\""
        << num(std::max(0.5, x1 - x0)) << "\" height=\"" << num(c.py(0.0) - c.py(static_cast<double>(n))) << "\"/>\n";
  }
  out << "</g>\n";
  out << "<line class=\"observed\" x1=\"" << num(c.px(obs)) << "\" y1=\"" << num(c.top()) << "\" x2=\""
      << num(c.px(obs)) << "\" y2=\"" << num(c.bottom()) << "\" " << obs_stroke(s) << "/>\n";
  const bool right_side = c.px(obs) < (c.left() + c.right()) / 2;
  out << "<text class=\"annotation\" x=\"" << num(c.px(obs) + (right_side ? 6 : -6)) << "\" y=\"" << num(c.top() + 16)
      << "\" text-anchor=\"" << (right_side ? "start" : "end") << "\" font-family=\"sans-serif\" font-size=\""
      << s.font_size << "\">observed = " << label_num(obs) << "</text>\n";
  char buf[96];
  std::snprintf(buf, sizeof buf, "%.1f%% of simulated datasets below observed", 100.0 * r.p_values.at(0));
  out << "<text class=\"annotation\" x=\"" << num(c.px(obs) + (right_side ? 6 : -6)) << "\" y=\""
      << num(c.top() + 18 + s.font_size) << "\" text-anchor=\"" << (right_side ? "start" : "end")
      << "\" font-family=\"sans-serif\" font-size=\"" << s.font_size << "\">" << buf << "</text>\n";
}

}  // namespace

std::string render_check(const CheckResult& result, const PlotStyle& style) {
  style.validate();
  std::ostringstream out;
  const std::string& t = result.check_type;
  if (t == "log_predictive") {
    render_log_predictive(out, result, style);
  } else if (t == "market_share") {
    render_market_share(out, result, style);
  } else if (t == "simulated_histogram") {
    render_histogram(out, result, style);
  } else if (t == "binned_reliability" || t == "binned_reliability_posterior" || t == "binned_marginal_model" ||
             t == "simulated_kde" || t == "simulated_cdf") {
    render_curves(out, result, style);
  } else {
    throw SpecError("cannot render check type '" + t + "'");
  }
  out << "</svg>\n";
  return out.str();
}

void write_svg(const CheckResult& result, const PlotStyle& style, const std::filesystem::path& out_path) {
  const std::string svg = render_check(result, style);
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw IoError("cannot write " + out_path.string());
  out << svg;
  if (!out) throw IoError("failed writing " + out_path.string());
}

void export_plot_data(const CheckResult& r, const std::filesystem::path& out_path) {
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw IoError("cannot write " + out_path.string());
  if (out_path.extension() == ".json") {
    out << to_json(r).dump(1) << '\n';
  } else if (r.is_curve()) {
    out << "series,draw,x,y\n";
    for (std::size_t i = 0; i < r.x.size(); ++i) {
      out << "observed,," << format_double(r.x[i]) << ',' << format_double(r.observed[i]) << '\n';
    }
    for (std::size_t d = 0; d < r.simulated.size(); ++d) {
      for (std::size_t i = 0; i < r.x.size(); ++i) {
        out << "simulated," << d << ',' << format_double(r.x[i]) << ',' << format_double(r.simulated[d][i]) << '\n';
      }
    }
    for (std::size_t d = 0; d < r.expected_curve.size(); ++d) {
      for (std::size_t i = 0; i < r.x.size(); ++i) {
        out << "expected," << d << ',' << format_double(r.x[i]) << ',' << format_double(r.expected_curve[d][i])
            << '\n';
      }
    }
  } else if (!r.groups.empty()) {
    out << "series,draw,group,value\n";
    for (std::size_t g = 0; g < r.groups.size(); ++g) {
      out << "observed,," << csv::escape(r.groups[g]) << ',' << format_double(r.observed[g]) << '\n';
    }
    for (std::size_t d = 0; d < r.simulated.size(); ++d) {
      for (std::size_t g = 0; g < r.groups.size(); ++g) {
        out << "simulated," << d << ',' << csv::escape(r.groups[g]) << ',' << format_double(r.simulated[d][g]) << '\n';
      }
    }
  } else {
    out << "series,draw,value\n";
    out << "observed,," << format_double(r.observed.at(0)) << '\n';
    for (std::size_t d = 0; d < r.simulated.size(); ++d) {
      out << "simulated," << d << ',' << format_double(r.simulated[d].at(0)) << '\n';
    }
  }
  if (!out) throw IoError("failed writing " + out_path.string());
}

CheckResult import_plot_data(const std::filesystem::path& json_path) {
  std::ifstream in(json_path);
  if (!in) throw IoError("cannot open " + json_path.string());
  try {
    return check_result_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(json_path.string() + ": " + e.what());
  }
}

nlohmann::json emit_suite(const CheckSuite& suite, const std::filesystem::path& dir, const PlotStyle& style) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  nlohmann::json checks = nlohmann::json::array();
  for (std::size_t i = 0; i < suite.requests.size(); ++i) {
    const std::string id = suite.requests[i].id();
    nlohmann::json entry{{"index", i}, {"id", id}, {"request", to_json(suite.requests[i])}};
    if (suite.results[i]) {
      const CheckResult& r = *suite.results[i];
      export_plot_data(r, dir / (id + ".json"));
      export_plot_data(r, dir / (id + ".csv"));
      write_svg(r, style, dir / (id + ".svg"));
      entry["status"] = "ok";
      entry["label"] = r.label;
      entry["files"] = {id + ".json", id + ".csv", id + ".svg"};
      if (!r.is_curve()) entry["p_values"] = r.p_values;
      entry["skipped_draws"] = r.skipped_draws;
    } else {
      entry["status"] = "error";
      entry["error"] = suite.errors[i];
    }
    checks.push_back(std::move(entry));
  }
  nlohmann::json manifest{{"checks", checks}, {"count", suite.requests.size()}};
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw IoError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(1) << '\n';
  return manifest;
}

}  // namespace choicecheck
