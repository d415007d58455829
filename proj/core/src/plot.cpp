#include "ipinn/plot.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "ipinn/experiment.hpp"

namespace ipinn {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

double metric_value(const MetricRecord& r, const std::string& metric) {
  if (metric == "eval_mse") return r.eval_mse;
  if (metric == "train_loss") return r.train_loss;
  if (metric == "excess_variance") return r.excess_variance;
  throw UsageError("unknown plot metric: " + metric);
}

struct Band {
  std::vector<double> x, mean, lo, hi;
};

// Mean and standard error across seeds at every epoch the seeds share.
Band aggregate(const MetricSeries& series, const std::string& metric) {
  std::map<int, std::vector<double>> by_epoch;
  for (const auto& run : series.seeds)
    for (const auto& r : run) by_epoch[r.epoch].push_back(metric_value(r, metric));
  const size_t n_seeds = series.seeds.size();
  Band band;
  for (const auto& [epoch, vals] : by_epoch) {
    if (vals.size() != n_seeds) continue;  // diverged runs may stop early
    double mean = 0.0;
    for (const double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double se = 0.0;
    if (vals.size() > 1) {
      double var = 0.0;
      for (const double v : vals) var += (v - mean) * (v - mean);
      var /= static_cast<double>(vals.size() - 1);
      se = std::sqrt(var / static_cast<double>(vals.size()));
    }
    band.x.push_back(epoch);
    band.mean.push_back(mean);
    band.lo.push_back(mean - se);
    band.hi.push_back(mean + se);
  }
  return band;
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(6);
  out << v;
  return out.str();
}

}  // namespace

std::string render_metric_svg(const std::vector<MetricSeries>& series, const std::string& metric,
                              const PlotOptions& options) {
  std::vector<Band> bands;
  double x_min = std::numeric_limits<double>::max(), x_max = -x_min;
  double y_min = std::numeric_limits<double>::max(), y_max = -y_min;
  for (const auto& s : series) {
    Band b = aggregate(s, metric);
    if (options.log_y) {
      // Log scale drops non-positive values instead of failing the plot.
      Band kept;
      for (size_t i = 0; i < b.x.size(); ++i)
        if (b.mean[i] > 0) {
          kept.x.push_back(b.x[i]);
          kept.mean.push_back(std::log10(b.mean[i]));
          kept.lo.push_back(std::log10(std::max(b.lo[i], b.mean[i] * 1e-3)));
          kept.hi.push_back(std::log10(std::max(b.hi[i], b.mean[i])));
        }
      b = std::move(kept);
    }
    for (size_t i = 0; i < b.x.size(); ++i) {
      x_min = std::min(x_min, b.x[i]);
      x_max = std::max(x_max, b.x[i]);
      y_min = std::min(y_min, b.lo[i]);
      y_max = std::max(y_max, b.hi[i]);
    }
    bands.push_back(std::move(b));
  }
  if (x_min > x_max) throw UsageError("nothing to plot for metric " + metric);
  if (x_max == x_min) x_max = x_min + 1;
  if (y_max == y_min) {
    y_min -= 1;
    y_max += 1;
  }
  const double pad_y = 0.05 * (y_max - y_min);
  y_min -= pad_y;
  y_max += pad_y;

  const double ml = 70, mr = 20, mt = 40, mb = 50;
  const double pw = options.width - ml - mr, ph = options.height - mt - mb;
  auto sx = [&](double x) { return ml + pw * (x - x_min) / (x_max - x_min); };
  auto sy = [&](double y) { return mt + ph * (1.0 - (y - y_min) / (y_max - y_min)); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width << "\" height=\""
      << options.height << "\" viewBox=\"0 0 " << options.width << ' ' << options.height
      << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << ml << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">"
      << metric << (options.log_y ? " (log10)" : "") << "</text>\n";

  // Axes with 5 ticks per side.
  svg << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double xv = x_min + (x_max - x_min) * i / 5.0;
    const double yv = y_min + (y_max - y_min) * i / 5.0;
    svg << "<line x1=\"" << fmt(sx(xv)) << "\" y1=\"" << fmt(mt) << "\" x2=\"" << fmt(sx(xv))
        << "\" y2=\"" << fmt(mt + ph) << "\" stroke=\"#ddd\"/>\n";
    svg << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(sy(yv)) << "\" x2=\"" << fmt(ml + pw)
        << "\" y2=\"" << fmt(sy(yv)) << "\" stroke=\"#ddd\"/>\n";
    svg << "<text x=\"" << fmt(sx(xv)) << "\" y=\"" << fmt(mt + ph + 16)
        << "\" text-anchor=\"middle\">" << fmt(xv) << "</text>\n";
    svg << "<text x=\"" << fmt(ml - 6) << "\" y=\"" << fmt(sy(yv) + 4)
        << "\" text-anchor=\"end\">" << fmt(yv) << "</text>\n";
  }
  svg << "<text x=\"" << fmt(ml + pw / 2) << "\" y=\"" << fmt(options.height - 12)
      << "\" text-anchor=\"middle\">epoch</text>\n";
  svg << "</g>\n";

  for (size_t s = 0; s < bands.size(); ++s) {
    const Band& b = bands[s];
    if (b.x.empty()) continue;
    const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
    const bool has_band = series[s].seeds.size() > 1;
    if (has_band) {
      svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
      for (size_t i = 0; i < b.x.size(); ++i)
        svg << fmt(sx(b.x[i])) << ',' << fmt(sy(b.hi[i])) << ' ';
      for (size_t i = b.x.size(); i-- > 0;)
        svg << fmt(sx(b.x[i])) << ',' << fmt(sy(b.lo[i])) << ' ';
      svg << "\"/>\n";
    }
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < b.x.size(); ++i)
      svg << fmt(sx(b.x[i])) << ',' << fmt(sy(b.mean[i])) << ' ';
    svg << "\"/>\n";
    const double ly = mt + 16 + 16 * static_cast<double>(s);
    svg << "<line x1=\"" << fmt(ml + pw - 150) << "\" y1=\"" << fmt(ly) << "\" x2=\""
        << fmt(ml + pw - 130) << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << fmt(ml + pw - 124) << "\" y=\"" << fmt(ly + 4)
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << series[s].label << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<std::string> plot_run_dir(const std::string& dir, const PlotOptions& options) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw UsageError("not a directory: " + dir);

  auto collect = [](const fs::path& d) {
    std::vector<std::vector<MetricRecord>> runs;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(d)) {
      const std::string name = entry.path().filename().string();
      if (entry.is_regular_file() && name.rfind("metrics_seed", 0) == 0 &&
          entry.path().extension() == ".csv")
        files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) runs.push_back(read_metrics_csv(f.string()));
    return runs;
  };

  std::vector<MetricSeries> series;
  auto direct = collect(dir);
  if (!direct.empty()) {
    series.push_back({fs::path(dir).filename().string(), std::move(direct)});
  } else {
    std::vector<fs::path> subdirs;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_directory()) subdirs.push_back(entry.path());
    std::sort(subdirs.begin(), subdirs.end());
    for (const auto& sub : subdirs) {
      auto runs = collect(sub);
      if (!runs.empty()) series.push_back({sub.filename().string(), std::move(runs)});
    }
  }
  if (series.empty()) throw UsageError("no metrics_seed*.csv files under " + dir);

  std::vector<std::string> written;
  for (const char* metric : {"eval_mse", "train_loss", "excess_variance"}) {
    const std::string svg = render_metric_svg(series, metric, options);
    const std::string path = (fs::path(dir) / (std::string(metric) + ".svg")).string();
    std::ofstream out(path);
    if (!out) throw UsageError("cannot write " + path);
    out << svg;
    written.push_back(path);
  }
  return written;
}

}  // namespace ipinn
