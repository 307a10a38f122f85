// Copyright 2026 detqe authors
// SPDX-License-Identifier: Apache-2.0
#include "detqe/report.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "detqe/common.hpp"

namespace detqe {
namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
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

std::string coord(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

void write_report(const std::string& path,
                  std::vector<std::pair<std::string, std::string>> entries) {
  std::sort(entries.begin(), entries.end());
  std::vector<std::string> lines;
  lines.reserve(entries.size());
  for (const auto& [k, v] : entries) lines.push_back(k + "=" + v);
  write_lines(path, lines);
}

std::vector<std::pair<std::string, std::string>> read_report(const std::string& path) {
  std::vector<std::pair<std::string, std::string>> entries;
  for (const std::string& line : read_lines(path)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw input_error("bad report line in " + path + ": " + line);
    entries.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  return entries;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::string> lines;
  lines.reserve(rows.size() + 1);
  auto render = [](const std::vector<std::string>& fields) {
    std::string line;
    for (size_t i = 0; i < fields.size(); ++i) {
      if (i) line += ',';
      line += csv_field(fields[i]);
    }
    return line;
  };
  lines.push_back(render(header));
  for (const auto& row : rows) {
    if (row.size() != header.size())
      throw input_error("csv row has " + std::to_string(row.size()) + " fields, header has " +
                        std::to_string(header.size()));
    lines.push_back(render(row));
  }
  write_lines(path, lines);
}

void write_svg_chart(const std::string& path, const std::string& title,
                     const std::string& x_label, const std::string& y_label,
                     const std::vector<ChartSeries>& series) {
  const double width = 720, height = 440;
  const double left = 70, right = 24, top = 40, bottom = 52;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;

  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool first = true;
  for (const ChartSeries& s : series) {
    for (const auto& [x, y] : s.points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      if (first) {
        xmin = xmax = x;
        ymin = ymax = y;
        first = false;
      } else {
        xmin = std::min(xmin, x);
        xmax = std::max(xmax, x);
        ymin = std::min(ymin, y);
        ymax = std::max(ymax, y);
      }
    }
  }
  if (xmax <= xmin) xmax = xmin + 1.0;
  if (ymax <= ymin) ymax = ymin + 1.0;
  auto px = [&](double x) { return left + (x - xmin) / (xmax - xmin) * plot_w; };
  auto py = [&](double y) { return top + plot_h - (y - ymin) / (ymax - ymin) * plot_h; };

  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                  "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << width << " " << height
      << "\" font-family=\"sans-serif\" font-size=\"13\">\n";
  out << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  out << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"16\">"
      << xml_escape(title) << "</text>\n";
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w << "\" height=\""
      << plot_h << "\" fill=\"none\" stroke=\"#333\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fx = xmin + (xmax - xmin) * i / 4.0;
    const double fy = ymin + (ymax - ymin) * i / 4.0;
    out << "<text x=\"" << coord(px(fx)) << "\" y=\"" << coord(top + plot_h + 18)
        << "\" text-anchor=\"middle\">" << format_double(fx, 3) << "</text>\n";
    out << "<text x=\"" << coord(left - 8) << "\" y=\"" << coord(py(fy) + 4)
        << "\" text-anchor=\"end\">" << format_double(fy, 3) << "</text>\n";
    if (i > 0 && i < 4) {
      out << "<line x1=\"" << coord(px(fx)) << "\" y1=\"" << top << "\" x2=\"" << coord(px(fx))
          << "\" y2=\"" << coord(top + plot_h) << "\" stroke=\"#ddd\"/>\n";
      out << "<line x1=\"" << left << "\" y1=\"" << coord(py(fy)) << "\" x2=\""
          << coord(left + plot_w) << "\" y2=\"" << coord(py(fy)) << "\" stroke=\"#ddd\"/>\n";
    }
  }
  out << "<text x=\"" << width / 2 << "\" y=\"" << height - 12
      << "\" text-anchor=\"middle\">" << xml_escape(x_label) << "</text>\n";
  out << "<text x=\"18\" y=\"" << height / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
      << height / 2 << ")\">" << xml_escape(y_label) << "</text>\n";

  for (size_t si = 0; si < series.size(); ++si) {
    const char* color = kColors[si % (sizeof kColors / sizeof kColors[0])];
    std::string pts;
    for (const auto& [x, y] : series[si].points) {
      if (!std::isfinite(x) || !std::isfinite(y)) continue;
      if (!pts.empty()) pts += ' ';
      pts += coord(px(x)) + "," + coord(py(y));
    }
    out << "<polyline points=\"" << pts << "\" fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.8\"/>\n";
    const double ly = top + 16 + 18 * static_cast<double>(si);
    out << "<line x1=\"" << coord(left + plot_w - 130) << "\" y1=\"" << coord(ly) << "\" x2=\""
        << coord(left + plot_w - 108) << "\" y2=\"" << coord(ly) << "\" stroke=\"" << color
        << "\" stroke-width=\"1.8\"/>\n";
    out << "<text x=\"" << coord(left + plot_w - 102) << "\" y=\"" << coord(ly + 4) << "\">"
        << xml_escape(series[si].name) << "</text>\n";
  }
  out << "</svg>\n";
  write_file(path, out.str());
}

}  // namespace detqe
