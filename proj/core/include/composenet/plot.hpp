#pragma once

#include <string>
#include <vector>

#include "composenet/metrics.hpp"

namespace composenet {

// One plotted method: seed curves are averaged into a mean line with a
// min/max band across seeds.
struct PlotSeries {
  std::string label;
  std::vector<std::vector<MetricsRow>> seed_curves;
};

struct PlotOptions {
  std::string title;
  std::string y_label = "mean eval return";
  bool y_is_length = false;  // survival tasks report episode length
  int width = 720;
  int height = 440;
};

// Self-contained SVG line chart: x = environment steps, y = mean eval return
// (or episode length), one series per method. Throws ConfigError when there
// is nothing to plot.
void emit_plot(const std::vector<PlotSeries>& series, const PlotOptions& options,
               const std::string& output_path);

}  // namespace composenet
