// Copyright 2026 The sl3obs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// CSV tables and log-scale SVG line plots.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "sl3obs/app/config.hpp"
#include "sl3obs/errors.hpp"

namespace sl3obs::app {

/// Shortest text that reads back to the same double; "nan" for NaN.
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct CsvTable {
  std::vector<std::string> comments;  // without the leading "# "
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  std::size_t column(const std::string& name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw IoError("CSV has no column '" + name + "'");
    return static_cast<std::size_t>(it - columns.begin());
  }
};

inline void write_csv(std::ostream& out, const CsvTable& t) {
  for (const auto& c : t.comments) out << "# " << c << '\n';
  for (std::size_t i = 0; i < t.columns.size(); ++i) out << (i ? "," : "") << t.columns[i];
  out << '\n';
  for (const auto& row : t.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << fmt(row[i]);
    out << '\n';
  }
}

inline void write_csv(const std::string& path, const CsvTable& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open for writing");
  write_csv(out, t);
  if (!out) throw IoError(path + ": write failed");
}

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path + ": cannot open");
  CsvTable t;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      t.comments.push_back(trim(line.substr(1)));
      continue;
    }
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(trim(cell));
    if (t.columns.empty()) {
      t.columns = cells;
      continue;
    }
    if (cells.size() != t.columns.size())
      throw IoError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.columns.size()) + " fields");
    std::vector<double> row;
    for (const auto& c : cells) {
      if (c == "nan") {
        row.push_back(std::numeric_limits<double>::quiet_NaN());
        continue;
      }
      try {
        std::size_t pos = 0;
        row.push_back(std::stod(c, &pos));
        if (pos != c.size()) throw std::invalid_argument(c);
      } catch (const std::exception&) {
        throw IoError(path + ":" + std::to_string(lineno) + ": bad number '" + c + "'");
      }
    }
    t.rows.push_back(std::move(row));
  }
  if (t.columns.empty()) throw IoError(path + ": missing header row");
  return t;
}

// ---------------------------------------------------------------------------
// SVG

struct PlotSeries {
  std::string label;
  std::string color;
  std::vector<double> x;
  std::vector<double> y;
};

struct PlotPanel {
  std::string title;
  std::vector<PlotSeries> series;
};

namespace detail {

inline std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string svg_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

/// Stacked panels sharing the x axis, each with a log10 y axis. Non-positive
/// and non-finite points are dropped.
inline std::string render_log_plot(const std::vector<PlotPanel>& panels, const std::string& x_label = "t [s]") {
  using detail::svg_num;
  constexpr double kWidth = 640, kPanelH = 220, kLeft = 70, kRight = 20, kTop = 30, kBottom = 40;
  const double height = kPanelH * static_cast<double>(panels.size());
  std::ostringstream s;
  s << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
    << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << svg_num(kWidth) << "\" height=\""
    << svg_num(height) << "\" font-family=\"sans-serif\" font-size=\"11\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  for (std::size_t p = 0; p < panels.size(); ++p) {
    const PlotPanel& panel = panels[p];
    const double y0 = kPanelH * static_cast<double>(p);
    const double px0 = kLeft, px1 = kWidth - kRight, py0 = y0 + kTop, py1 = y0 + kPanelH - kBottom;

    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
    double lmin = xmin, lmax = -xmin;
    for (const auto& ser : panel.series)
      for (std::size_t i = 0; i < ser.x.size() && i < ser.y.size(); ++i) {
        if (!std::isfinite(ser.x[i])) continue;
        xmin = std::min(xmin, ser.x[i]);
        xmax = std::max(xmax, ser.x[i]);
        if (ser.y[i] > 0.0 && std::isfinite(ser.y[i])) {
          lmin = std::min(lmin, std::log10(ser.y[i]));
          lmax = std::max(lmax, std::log10(ser.y[i]));
        }
      }
    if (!std::isfinite(xmin)) xmin = 0.0, xmax = 1.0;
    if (xmax <= xmin) xmax = xmin + 1.0;
    if (!std::isfinite(lmin)) lmin = -1.0, lmax = 0.0;
    lmin = std::floor(lmin);
    lmax = std::ceil(lmax);
    if (lmax <= lmin) lmax = lmin + 1.0;
    auto sx = [&](double x) { return px0 + (x - xmin) / (xmax - xmin) * (px1 - px0); };
    auto sy = [&](double l) { return py1 - (l - lmin) / (lmax - lmin) * (py1 - py0); };

    s << "<g>\n<text x=\"" << svg_num(px0) << "\" y=\"" << svg_num(y0 + 18) << "\" font-size=\"13\">"
      << detail::svg_escape(panel.title) << "</text>\n";
    s << "<rect x=\"" << svg_num(px0) << "\" y=\"" << svg_num(py0) << "\" width=\"" << svg_num(px1 - px0)
      << "\" height=\"" << svg_num(py1 - py0) << "\" fill=\"none\" stroke=\"black\"/>\n";
    const int step = std::max(1, static_cast<int>(std::ceil((lmax - lmin) / 8.0)));
    for (int d = static_cast<int>(lmin); d <= static_cast<int>(lmax); d += step) {
      const double y = sy(d);
      s << "<line x1=\"" << svg_num(px0) << "\" y1=\"" << svg_num(y) << "\" x2=\"" << svg_num(px1) << "\" y2=\""
        << svg_num(y) << "\" stroke=\"#dddddd\"/>\n"
        << "<text x=\"" << svg_num(px0 - 6) << "\" y=\"" << svg_num(y + 4) << "\" text-anchor=\"end\">1e" << d
        << "</text>\n";
    }
    for (int i = 0; i <= 6; ++i) {
      const double x = xmin + (xmax - xmin) * i / 6.0;
      s << "<text x=\"" << svg_num(sx(x)) << "\" y=\"" << svg_num(py1 + 15) << "\" text-anchor=\"middle\">"
        << svg_num(x) << "</text>\n";
    }
    s << "<text x=\"" << svg_num((px0 + px1) / 2) << "\" y=\"" << svg_num(py1 + 32) << "\" text-anchor=\"middle\">"
      << detail::svg_escape(x_label) << "</text>\n";

    for (std::size_t k = 0; k < panel.series.size(); ++k) {
      const PlotSeries& ser = panel.series[k];
      s << "<polyline fill=\"none\" stroke=\"" << ser.color << "\" stroke-width=\"1.5\" points=\"";
      bool first = true;
      for (std::size_t i = 0; i < ser.x.size() && i < ser.y.size(); ++i) {
        if (!(ser.y[i] > 0.0) || !std::isfinite(ser.y[i]) || !std::isfinite(ser.x[i])) continue;
        s << (first ? "" : " ") << svg_num(sx(ser.x[i])) << "," << svg_num(sy(std::log10(ser.y[i])));
        first = false;
      }
      s << "\"/>\n";
      const double ly = py0 + 14 + 14 * static_cast<double>(k);
      s << "<line x1=\"" << svg_num(px1 - 110) << "\" y1=\"" << svg_num(ly - 4) << "\" x2=\"" << svg_num(px1 - 90)
        << "\" y2=\"" << svg_num(ly - 4) << "\" stroke=\"" << ser.color << "\" stroke-width=\"1.5\"/>\n"
        << "<text x=\"" << svg_num(px1 - 85) << "\" y=\"" << svg_num(ly) << "\">" << detail::svg_escape(ser.label)
        << "</text>\n";
    }
    s << "</g>\n";
  }
  s << "</svg>\n";
  return s.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << text;
  if (!out) throw IoError(path + ": write failed");
}

}  // namespace sl3obs::app
