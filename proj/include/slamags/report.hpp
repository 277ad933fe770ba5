#pragma once

#include <string>
#include <vector>

#include "slamags/eval.hpp"

namespace slamags {

enum class ChartMetric { F1, RecallAtK };

// Self-contained SVG line chart over aggregated rows: x = witness rate
// descending (evenly spaced), y = metric mean with one-standard-deviation
// error bars, one series per method. Methods missing a witness rate leave a
// gap in their line rather than failing.
std::string svg_metric_chart(const std::vector<AggregateRecord>& rows,
                             ChartMetric metric, const std::string& title);

struct ReportPaths {
  std::string aggregate_csv;
  std::string f1_svg;
  std::string recall_svg;
};

// Aggregates a results CSV and writes aggregate.csv plus the two charts
// (f1_vs_witness_rate.svg, recall_vs_witness_rate.svg) into out_dir.
ReportPaths write_report(const std::string& results_path, const std::string& out_dir);

}  // namespace slamags
