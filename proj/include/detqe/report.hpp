// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

namespace detqe {

// Metric report: one sorted `key=value` line per entry. Doubles must be
// pre-formatted by the caller (format_double) so reruns stay byte-stable.
void write_report(const std::string& path,
                  std::vector<std::pair<std::string, std::string>> entries);
std::vector<std::pair<std::string, std::string>> read_report(const std::string& path);

// Plain CSV, comma separated; fields containing commas or quotes are quoted.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

// Self-contained SVG line chart for one or more named series. Purely a
// convenience view of CSV data; nothing reads it back.
struct ChartSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};
void write_svg_chart(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<ChartSeries>& series);

}  // namespace detqe
