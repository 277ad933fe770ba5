#include "slamags/report.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "slamags/sweep.hpp"

namespace slamags {
namespace {

constexpr double kWidth = 720, kHeight = 480;
constexpr double kLeft = 70, kRight = 560, kTop = 48, kBottom = 420;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf"};
constexpr int kPaletteSize = sizeof(kPalette) / sizeof(kPalette[0]);

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

struct PointStat {
  double mean = 0.0;
  double std = 0.0;
};

}  // namespace

std::string svg_metric_chart(const std::vector<AggregateRecord>& rows,
                             ChartMetric metric, const std::string& title) {
  // Categories: witness rates descending. Series: methods in first-appearance
  // order, which run_sweep's canonical results order makes the config order.
  std::vector<double> rates;
  std::vector<std::string> methods;
  std::map<std::string, std::map<double, PointStat>> series;
  for (const AggregateRecord& r : rows) {
    if (std::find(rates.begin(), rates.end(), r.witness_rate) == rates.end())
      rates.push_back(r.witness_rate);
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
      methods.push_back(r.method);
    const PointStat p = metric == ChartMetric::F1
                            ? PointStat{r.f1_mean, r.f1_std}
                            : PointStat{r.recall_mean, r.recall_std};
    series[r.method][r.witness_rate] = p;
  }
  std::sort(rates.begin(), rates.end(), std::greater<>());

  double y_max = 1.0;
  for (const auto& [method, points] : series)
    for (const auto& [rate, p] : points) y_max = std::max(y_max, p.mean + p.std);

  auto x_of = [&](size_t i) {
    if (rates.size() <= 1) return (kLeft + kRight) / 2;
    return kLeft + (kRight - kLeft) * double(i) / double(rates.size() - 1);
  };
  auto y_of = [&](double v) { return kBottom - (kBottom - kTop) * (v / y_max); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth
      << "\" height=\"" << kHeight << "\" viewBox=\"0 0 " << kWidth << " "
      << kHeight << "\">\n";
  svg << "<rect width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << (kLeft + kRight) / 2 << "\" y=\"24\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"16\">"
      << title << "</text>\n";

  // Horizontal grid and y ticks every 0.2 units.
  for (double v = 0.0; v <= y_max + 1e-9; v += 0.2) {
    const double y = y_of(v);
    svg << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(y) << "\" x2=\""
        << num(kRight) << "\" y2=\"" << num(y)
        << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(y + 4)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">"
        << num(v) << "</text>\n";
  }
  // Axes.
  svg << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop) << "\" x2=\""
      << num(kLeft) << "\" y2=\"" << num(kBottom)
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  svg << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kBottom) << "\" x2=\""
      << num(kRight) << "\" y2=\"" << num(kBottom)
      << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
  for (size_t i = 0; i < rates.size(); ++i) {
    const double x = x_of(i);
    svg << "<line x1=\"" << num(x) << "\" y1=\"" << num(kBottom) << "\" x2=\""
        << num(x) << "\" y2=\"" << num(kBottom + 5)
        << "\" stroke=\"black\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << num(x) << "\" y=\"" << num(kBottom + 20)
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
        << format_witness_rate(rates[i]) << "</text>\n";
  }
  svg << "<text x=\"" << (kLeft + kRight) / 2 << "\" y=\"" << num(kBottom + 42)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
         "witness rate</text>\n";
  const std::string y_label = metric == ChartMetric::F1 ? "F1" : "Recall@K";
  svg << "<text x=\"18\" y=\"" << (kTop + kBottom) / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
         "transform=\"rotate(-90 18 "
      << (kTop + kBottom) / 2 << ")\">" << y_label << "</text>\n";

  for (size_t m = 0; m < methods.size(); ++m) {
    const std::string& method = methods[m];
    const char* color = kPalette[m % kPaletteSize];
    const auto& points = series[method];

    // Runs of consecutive present categories become polyline segments;
    // absent categories break the line.
    std::vector<std::pair<double, double>> segment;
    auto flush = [&]() {
      if (segment.size() >= 2) {
        svg << "<polyline fill=\"none\" stroke=\"" << color
            << "\" stroke-width=\"2\" points=\"";
        for (size_t i = 0; i < segment.size(); ++i) {
          if (i) svg << " ";
          svg << num(segment[i].first) << "," << num(segment[i].second);
        }
        svg << "\"/>\n";
      }
      segment.clear();
    };
    for (size_t i = 0; i < rates.size(); ++i) {
      const auto it = points.find(rates[i]);
      if (it == points.end()) {
        flush();
        continue;
      }
      segment.emplace_back(x_of(i), y_of(it->second.mean));
    }
    flush();

    for (size_t i = 0; i < rates.size(); ++i) {
      const auto it = points.find(rates[i]);
      if (it == points.end()) continue;
      const double x = x_of(i);
      const double y = y_of(it->second.mean);
      const double y_lo = y_of(std::max(0.0, it->second.mean - it->second.std));
      const double y_hi = y_of(it->second.mean + it->second.std);
      svg << "<line x1=\"" << num(x) << "\" y1=\"" << num(y_lo) << "\" x2=\""
          << num(x) << "\" y2=\"" << num(y_hi) << "\" stroke=\"" << color
          << "\" stroke-width=\"1\"/>\n";
      svg << "<line x1=\"" << num(x - 4) << "\" y1=\"" << num(y_lo) << "\" x2=\""
          << num(x + 4) << "\" y2=\"" << num(y_lo) << "\" stroke=\"" << color
          << "\" stroke-width=\"1\"/>\n";
      svg << "<line x1=\"" << num(x - 4) << "\" y1=\"" << num(y_hi) << "\" x2=\""
          << num(x + 4) << "\" y2=\"" << num(y_hi) << "\" stroke=\"" << color
          << "\" stroke-width=\"1\"/>\n";
      svg << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"3\" fill=\""
          << color << "\"/>\n";
    }

    const double ly = kTop + 18.0 * double(m);
    svg << "<line x1=\"" << num(kRight + 16) << "\" y1=\"" << num(ly) << "\" x2=\""
        << num(kRight + 40) << "\" y2=\"" << num(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << num(kRight + 46) << "\" y=\"" << num(ly + 4)
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << method
        << "</text>\n";
  }

  svg << "</svg>\n";
  return svg.str();
}

ReportPaths write_report(const std::string& results_path, const std::string& out_dir) {
  namespace fs = std::filesystem;
  const std::vector<MetricsRecord> records = load_results_csv(results_path);
  const std::vector<AggregateRecord> rows = aggregate(records);
  fs::create_directories(out_dir);

  ReportPaths paths;
  paths.aggregate_csv = (fs::path(out_dir) / "aggregate.csv").string();
  paths.f1_svg = (fs::path(out_dir) / "f1_vs_witness_rate.svg").string();
  paths.recall_svg = (fs::path(out_dir) / "recall_vs_witness_rate.svg").string();
  save_aggregate_csv(paths.aggregate_csv, rows);

  auto write_file = [](const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("report: cannot write " + path);
    out << text;
    if (!out) throw std::runtime_error("report: failed writing " + path);
  };
  write_file(paths.f1_svg, svg_metric_chart(rows, ChartMetric::F1,
                                            "Bag classification vs witness rate"));
  write_file(paths.recall_svg,
             svg_metric_chart(rows, ChartMetric::RecallAtK,
                              "Key-instance retrieval vs witness rate"));
  return paths;
}

}  // namespace slamags
