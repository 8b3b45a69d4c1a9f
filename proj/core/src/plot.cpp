#include "composenet/plot.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "composenet/errors.hpp"

namespace composenet {

namespace {

constexpr std::array<const char*, 6> kPalette = {"#1f77b4", "#d62728", "#2ca02c",
                                                 "#9467bd", "#ff7f0e", "#8c564b"};

struct BandPoint {
  double x, mean, lo, hi;
};

// Per-step mean/min/max across seed curves, at the union of step values.
std::vector<BandPoint> band_of(const PlotSeries& s, bool y_is_length) {
  std::map<long long, std::vector<double>> by_step;
  for (const auto& curve : s.seed_curves)
    for (const MetricsRow& r : curve)
      by_step[r.steps].push_back(y_is_length ? r.mean_length : r.mean_return);
  std::vector<BandPoint> out;
  for (const auto& [step, vals] : by_step) {
    BandPoint p{static_cast<double>(step), 0.0, vals[0], vals[0]};
    for (double v : vals) {
      p.mean += v;
      p.lo = std::min(p.lo, v);
      p.hi = std::max(p.hi, v);
    }
    p.mean /= static_cast<double>(vals.size());
    out.push_back(p);
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(6);
  os << v;
  return os.str();
}

std::string step_label(double v) {
  std::ostringstream os;
  if (v >= 1e6) {
    os << v / 1e6 << "M";
  } else if (v >= 1e3) {
    os << v / 1e3 << "k";
  } else {
    os << v;
  }
  return os.str();
}

}  // namespace

void emit_plot(const std::vector<PlotSeries>& series, const PlotOptions& options,
               const std::string& output_path) {
  std::vector<std::vector<BandPoint>> bands;
  for (const PlotSeries& s : series) {
    auto b = band_of(s, options.y_is_length);
    if (!b.empty()) bands.push_back(std::move(b));
  }
  if (bands.empty()) throw ConfigError("emit_plot: no metrics rows to plot");

  double xmin = bands[0][0].x, xmax = xmin, ymin = bands[0][0].lo, ymax = bands[0][0].hi;
  for (const auto& b : bands)
    for (const BandPoint& p : b) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.lo);
      ymax = std::max(ymax, p.hi);
    }
  if (xmax == xmin) xmax = xmin + 1.0;  // degenerate single-point series
  if (ymax == ymin) {
    ymax += 0.5;
    ymin -= 0.5;
  }
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  const double ml = 64, mr = 16, mt = options.title.empty() ? 16 : 36, mb = 44;
  const double pw = options.width - ml - mr, ph = options.height - mt - mb;
  auto X = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
  auto Y = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << options.width
      << "\" height=\"" << options.height << "\" viewBox=\"0 0 " << options.width << " "
      << options.height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!options.title.empty())
    svg << "<text x=\"" << options.width / 2 << "\" y=\"22\" text-anchor=\"middle\" "
        << "font-family=\"sans-serif\" font-size=\"15\">" << options.title << "</text>\n";

  // axes + ticks
  svg << "<g stroke=\"#333\" stroke-width=\"1\">\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
      << mt + ph << "\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
      << "\"/>\n";
  svg << "</g>\n";
  svg << "<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#333\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double x = xmin + (xmax - xmin) * i / 5.0;
    svg << "<text x=\"" << X(x) << "\" y=\"" << mt + ph + 16
        << "\" text-anchor=\"middle\">" << step_label(x) << "</text>\n";
    const double y = ymin + (ymax - ymin) * i / 5.0;
    svg << "<text x=\"" << ml - 6 << "\" y=\"" << Y(y) + 4 << "\" text-anchor=\"end\">"
        << fmt(std::round(y * 1000.0) / 1000.0) << "</text>\n";
  }
  svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << options.height - 8
      << "\" text-anchor=\"middle\">environment steps</text>\n";
  svg << "<text x=\"14\" y=\"" << mt + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 14 "
      << mt + ph / 2 << ")\">" << options.y_label << "</text>\n";
  svg << "</g>\n";

  for (size_t i = 0; i < bands.size(); ++i) {
    const char* color = kPalette[i % kPalette.size()];
    const auto& b = bands[i];
    // min/max band
    svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
    for (const BandPoint& p : b) svg << fmt(X(p.x)) << "," << fmt(Y(p.hi)) << " ";
    for (auto it = b.rbegin(); it != b.rend(); ++it)
      svg << fmt(X(it->x)) << "," << fmt(Y(it->lo)) << " ";
    svg << "\"/>\n";
    // mean line
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const BandPoint& p : b) svg << fmt(X(p.x)) << "," << fmt(Y(p.mean)) << " ";
    svg << "\"/>\n";
    // single-point series still get a visible marker
    if (b.size() == 1)
      svg << "<circle cx=\"" << fmt(X(b[0].x)) << "\" cy=\"" << fmt(Y(b[0].mean))
          << "\" r=\"3\" fill=\"" << color << "\"/>\n";
  }

  // legend
  svg << "<g font-family=\"sans-serif\" font-size=\"12\">\n";
  double ly = mt + 8;
  for (size_t i = 0; i < series.size() && i < bands.size(); ++i) {
    const char* color = kPalette[i % kPalette.size()];
    svg << "<rect x=\"" << ml + pw - 150 << "\" y=\"" << ly - 9
        << "\" width=\"18\" height=\"4\" fill=\"" << color << "\"/>\n";
    svg << "<text x=\"" << ml + pw - 126 << "\" y=\"" << ly - 3 << "\">" << series[i].label
        << "</text>\n";
    ly += 16;
  }
  svg << "</g>\n</svg>\n";

  const std::filesystem::path p(output_path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream f(output_path);
  if (!f) throw ConfigError("emit_plot: cannot write " + output_path);
  f << svg.str();
}

}  // namespace composenet
