#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "qdyn/errors.hpp"
#include "qdyn/rational.hpp"

namespace qdyn::cli {

// --- CSV ---------------------------------------------------------------

inline std::string csv_field(const std::string& field) {
  bool needs_quotes = field.find_first_of(",\"\n\r") != std::string::npos;
  if (!needs_quotes) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

/// RFC-4180-style CSV with the header row first. Rational cells are the
/// caller's concern and conventionally rendered as "num/den".
inline std::string emit_table(const std::vector<std::string>& header,
                              const std::vector<std::vector<std::string>>& rows) {
  if (header.empty()) throw UsageError("emit_table needs a non-empty schema");
  std::string out;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) out += ',';
    out += csv_field(header[i]);
  }
  out += "\r\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != header.size())
      throw UsageError("row " + std::to_string(r) + " has " + std::to_string(rows[r].size()) +
                       " fields, schema has " + std::to_string(header.size()));
    for (std::size_t i = 0; i < rows[r].size(); ++i) {
      if (i) out += ',';
      out += csv_field(rows[r][i]);
    }
    out += "\r\n";
  }
  return out;
}

// --- SVG ---------------------------------------------------------------

struct PlotSeries {
  std::string label;
  std::vector<Rational> values;  // y values; x is the index
};

namespace detail {

/// Exact rational -> fixed 3-decimal string; keeps the SVG byte-stable
/// without ever converting through floating point.
inline std::string fixed3(const Rational& x) {
  Rational scaled = x * Rational(1000);
  Integer m = scaled.floor();
  bool negative = m < 0;
  if (negative) m = -m;
  Integer whole = m / 1000, frac = m % 1000;
  std::string f = frac.str();
  while (f.size() < 3) f.insert(f.begin(), '0');
  return (negative ? "-" : "") + whole.str() + "." + f;
}

inline const char* series_color(std::size_t i) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"};
  return palette[i % 5];
}

}  // namespace detail

/// Standalone step/line chart. Output is a pure function of the input:
/// coordinates are computed with rational arithmetic and printed with a
/// fixed number of decimals.
inline std::string emit_plot(const std::vector<PlotSeries>& series, const std::string& title = "") {
  if (series.empty()) throw UsageError("emit_plot needs at least one series");
  std::size_t max_len = 0;
  for (const auto& s : series) {
    if (s.values.empty()) throw UsageError("series '" + s.label + "' is empty");
    max_len = std::max(max_len, s.values.size());
  }
  Rational lo = series[0].values[0], hi = lo;
  for (const auto& s : series)
    for (const auto& v : s.values) {
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  if (lo == hi) {  // flat data still deserves a visible line
    lo -= 1;
    hi += 1;
  }

  const int width = 640, height = 400, margin = 48;
  const Rational plot_w(width - 2 * margin), plot_h(height - 2 * margin);
  auto x_px = [&](std::size_t i, std::size_t n) {
    Rational t = n > 1 ? Rational(Integer(i), Integer(n - 1)) : Rational(1, 2);
    return Rational(margin) + t * plot_w;
  };
  auto y_px = [&](const Rational& v) {
    return Rational(margin) + (hi - v) / (hi - lo) * plot_h;
  };

  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
         "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " + std::to_string(width) +
         " " + std::to_string(height) + "\">\n";
  svg += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(width) + "\" height=\"" +
         std::to_string(height) + "\" fill=\"white\"/>\n";
  svg += "<rect x=\"" + std::to_string(margin) + "\" y=\"" + std::to_string(margin) +
         "\" width=\"" + std::to_string(width - 2 * margin) + "\" height=\"" +
         std::to_string(height - 2 * margin) + "\" fill=\"none\" stroke=\"#cccccc\"/>\n";
  if (!title.empty())
    svg += "<text x=\"" + std::to_string(width / 2) + "\" y=\"28\" font-family=\"sans-serif\" "
           "font-size=\"15\" text-anchor=\"middle\">" + title + "</text>\n";
  svg += "<text x=\"6\" y=\"" + std::to_string(margin + 4) +
         "\" font-family=\"sans-serif\" font-size=\"11\">" + detail::fixed3(hi) + "</text>\n";
  svg += "<text x=\"6\" y=\"" + std::to_string(height - margin) +
         "\" font-family=\"sans-serif\" font-size=\"11\">" + detail::fixed3(lo) + "</text>\n";

  for (std::size_t s = 0; s < series.size(); ++s) {
    const auto& vals = series[s].values;
    std::string pts;
    for (std::size_t i = 0; i < vals.size(); ++i) {
      if (i) pts += ' ';
      pts += detail::fixed3(x_px(i, vals.size())) + "," + detail::fixed3(y_px(vals[i]));
    }
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(detail::series_color(s)) +
           "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    svg += "<text x=\"" + std::to_string(margin + 8) + "\" y=\"" +
           std::to_string(margin + 16 + 14 * static_cast<int>(s)) +
           "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"" +
           detail::series_color(s) + "\">" + series[s].label + "</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace qdyn::cli
