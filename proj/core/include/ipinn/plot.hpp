#pragma once

#include <string>
#include <vector>

#include "ipinn/trainers.hpp"

namespace ipinn {

struct PlotOptions {
  bool log_y = false;
  int width = 860;
  int height = 520;
};

// One named group of runs (typically one estimator), several seeds each.
struct MetricSeries {
  std::string label;
  std::vector<std::vector<MetricRecord>> seeds;
};

// Self-contained SVG with one mean curve per series and a mean +- standard
// error band when a series has more than one seed.
std::string render_metric_svg(const std::vector<MetricSeries>& series, const std::string& metric,
                              const PlotOptions& options);

// Reads a run directory (metrics_seed*.csv directly, or one subdirectory per
// method) and writes <metric>.svg files next to the data. Returns the paths
// written. Throws UsageError when no metrics are found.
std::vector<std::string> plot_run_dir(const std::string& dir, const PlotOptions& options);

}  // namespace ipinn
