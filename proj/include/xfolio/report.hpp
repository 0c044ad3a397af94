#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "xfolio/explain.hpp"

namespace xfolio::report {

struct MissingBundle : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Additive contributions split by sign around the base value, each side
// sorted by magnitude. Signed sum of all segments equals fx - base (only
// when no feature filter is applied).
struct ForcePlotData {
  double base_value = 0.0;
  double fx = 0.0;
  std::vector<std::pair<std::string, double>> positive;
  std::vector<std::pair<std::string, double>> negative;
  std::string feature_filter;  // empty = all features
};

ForcePlotData make_force_plot(const explain::ShapValues& shap,
                              std::span<const std::string> names,
                              const std::string& only_feature = "");

// Deterministic static SVG renderers (bytes depend only on inputs).
std::string render_bar_chart_svg(const std::string& title,
                                 std::span<const std::pair<std::string, double>>
                                     items);
std::string render_signed_bar_svg(const std::string& title,
                                  std::span<const std::pair<std::string,
                                                            double>>
                                      items);
std::string render_force_plot_svg(const std::string& title,
                                  const ForcePlotData& data);

}  // namespace xfolio::report
