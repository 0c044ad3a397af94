#include "xfolio/report.hpp"

#include <algorithm>
#include <cmath>

#include "xfolio/text.hpp"

namespace xfolio::report {
namespace {

constexpr const char* kPositiveColor = "#c23b3b";
constexpr const char* kNegativeColor = "#3b6fc2";
constexpr const char* kNeutralColor = "#888888";

std::string svg_open(int width, int height) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"";
  s += std::to_string(width);
  s += "\" height=\"";
  s += std::to_string(height);
  s += "\" font-family=\"monospace\" font-size=\"12\">\n";
  return s;
}

void add_rect(std::string& s, double x, double y, double w, double h,
              const char* fill) {
  s += "<rect x=\"" + fmt_double(x) + "\" y=\"" + fmt_double(y) +
       "\" width=\"" + fmt_double(w) + "\" height=\"" + fmt_double(h) +
       "\" fill=\"" + fill + "\"/>\n";
}

void add_line(std::string& s, double x1, double y1, double x2, double y2) {
  s += "<line x1=\"" + fmt_double(x1) + "\" y1=\"" + fmt_double(y1) +
       "\" x2=\"" + fmt_double(x2) + "\" y2=\"" + fmt_double(y2) +
       "\" stroke=\"#333333\" stroke-width=\"1\"/>\n";
}

void add_text(std::string& s, double x, double y, const std::string& text,
              const char* anchor = "start") {
  s += "<text x=\"" + fmt_double(x) + "\" y=\"" + fmt_double(y) +
       "\" text-anchor=\"" + anchor + "\">" + text + "</text>\n";
}

}  // namespace

ForcePlotData make_force_plot(const explain::ShapValues& shap,
                              std::span<const std::string> names,
                              const std::string& only_feature) {
  if (names.size() != shap.phi.size()) {
    throw std::invalid_argument("make_force_plot: name count mismatch");
  }
  ForcePlotData data;
  data.base_value = shap.base_value;
  data.fx = shap.fx;
  data.feature_filter = only_feature;

  bool filter_seen = only_feature.empty();
  for (std::size_t j = 0; j < names.size(); ++j) {
    if (!only_feature.empty() && names[j] != only_feature) continue;
    filter_seen = true;
    const double phi = shap.phi[j];
    if (phi > 0.0) {
      data.positive.emplace_back(names[j], phi);
    } else if (phi < 0.0) {
      data.negative.emplace_back(names[j], phi);
    }
  }
  if (!filter_seen) {
    throw std::invalid_argument("make_force_plot: unknown feature '" +
                                only_feature + "'");
  }
  auto by_magnitude = [](const auto& a, const auto& b) {
    const double fa = std::fabs(a.second), fb = std::fabs(b.second);
    if (fa != fb) return fa > fb;
    return a.first < b.first;
  };
  std::sort(data.positive.begin(), data.positive.end(), by_magnitude);
  std::sort(data.negative.begin(), data.negative.end(), by_magnitude);
  return data;
}

std::string render_bar_chart_svg(
    const std::string& title,
    std::span<const std::pair<std::string, double>> items) {
  const int row_h = 20;
  const int label_w = 220;
  const int chart_w = 360;
  const int top = 30;
  const int height = top + row_h * static_cast<int>(items.size()) + 10;

  double max_v = 0.0;
  for (const auto& [name, v] : items) max_v = std::max(max_v, std::fabs(v));
  if (max_v == 0.0) max_v = 1.0;

  std::string s = svg_open(label_w + chart_w + 90, height);
  add_text(s, 8, 18, title);
  int row = 0;
  for (const auto& [name, v] : items) {
    const double y = top + row * row_h;
    add_text(s, 8, y + 14, name);
    const double w = chart_w * std::fabs(v) / max_v;
    add_rect(s, label_w, y + 3, w, row_h - 6,
             v >= 0.0 ? kPositiveColor : kNegativeColor);
    add_text(s, label_w + w + 6, y + 14, fmt_double(v));
    ++row;
  }
  s += "</svg>\n";
  return s;
}

std::string render_signed_bar_svg(
    const std::string& title,
    std::span<const std::pair<std::string, double>> items) {
  const int row_h = 20;
  const int label_w = 220;
  const int half_w = 200;
  const int top = 30;
  const int height = top + row_h * static_cast<int>(items.size()) + 10;
  const double center = label_w + half_w;

  double max_v = 0.0;
  for (const auto& [name, v] : items) max_v = std::max(max_v, std::fabs(v));
  if (max_v == 0.0) max_v = 1.0;

  std::string s = svg_open(label_w + 2 * half_w + 90, height);
  add_text(s, 8, 18, title);
  add_line(s, center, top - 4, center, height - 6);
  int row = 0;
  for (const auto& [name, v] : items) {
    const double y = top + row * row_h;
    add_text(s, 8, y + 14, name);
    const double w = half_w * std::fabs(v) / max_v;
    if (v >= 0.0) {
      add_rect(s, center, y + 3, w, row_h - 6, kPositiveColor);
      add_text(s, center + w + 6, y + 14, fmt_double(v));
    } else {
      add_rect(s, center - w, y + 3, w, row_h - 6, kNegativeColor);
      add_text(s, center - w - 6, y + 14, fmt_double(v), "end");
    }
    ++row;
  }
  s += "</svg>\n";
  return s;
}

std::string render_force_plot_svg(const std::string& title,
                                  const ForcePlotData& data) {
  // Horizontal strip: positive segments push right from the base, negative
  // segments pull back left toward fx.
  const int width = 760;
  const int strip_y = 60;
  const int strip_h = 26;
  const int label_rows =
      static_cast<int>(data.positive.size() + data.negative.size());
  const int height = strip_y + strip_h + 40 + 16 * label_rows + 10;

  double pos_sum = 0.0, neg_sum = 0.0;
  for (const auto& [n, v] : data.positive) pos_sum += v;
  for (const auto& [n, v] : data.negative) neg_sum += -v;

  const double lo = std::min({data.base_value, data.fx,
                              data.base_value + pos_sum - neg_sum});
  const double hi = std::max({data.base_value, data.base_value + pos_sum});
  const double span = std::max(hi - lo, 1e-12);
  const double margin = 0.08 * span;
  const double x0 = lo - margin;
  const double scale = (width - 80) / (span + 2 * margin);
  auto to_x = [&](double v) { return 40 + (v - x0) * scale; };

  std::string s = svg_open(width, height);
  add_text(s, 8, 18, title);
  add_text(s, 8, 36,
           "base=" + fmt_double(data.base_value) +
               " fx=" + fmt_double(data.fx) +
               (data.feature_filter.empty()
                    ? std::string()
                    : " feature=" + data.feature_filter));

  // Baseline marker.
  add_line(s, to_x(data.base_value), strip_y - 10, to_x(data.base_value),
           strip_y + strip_h + 10);
  add_text(s, to_x(data.base_value), strip_y - 14, "base", "middle");

  double cursor = data.base_value;
  for (const auto& [name, v] : data.positive) {
    add_rect(s, to_x(cursor), strip_y, v * scale, strip_h, kPositiveColor);
    cursor += v;
  }
  for (const auto& [name, v] : data.negative) {
    const double w = -v * scale;
    add_rect(s, to_x(cursor + v), strip_y, w, strip_h, kNegativeColor);
    cursor += v;
  }
  // End-of-stack marker (equals fx when unfiltered).
  add_line(s, to_x(cursor), strip_y - 6, to_x(cursor), strip_y + strip_h + 6);
  add_rect(s, to_x(data.fx) - 2, strip_y + strip_h + 2, 4, 6, kNeutralColor);
  add_text(s, to_x(data.fx), strip_y + strip_h + 20, "fx", "middle");

  int row = 0;
  const int legend_top = strip_y + strip_h + 40;
  for (const auto& [name, v] : data.positive) {
    add_rect(s, 12, legend_top + 16 * row, 10, 10, kPositiveColor);
    add_text(s, 28, legend_top + 16 * row + 9, name + " " + fmt_double(v));
    ++row;
  }
  for (const auto& [name, v] : data.negative) {
    add_rect(s, 12, legend_top + 16 * row, 10, 10, kNegativeColor);
    add_text(s, 28, legend_top + 16 * row + 9, name + " " + fmt_double(v));
    ++row;
  }
  s += "</svg>\n";
  return s;
}

}  // namespace xfolio::report
