// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

#include "dual/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dual/error.hpp"

namespace dual::plot {

namespace {

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 60;

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string text(double x, double y, const std::string& s, const char* anchor = "middle",
                 int size = 12, const char* extra = "") {
  return "<text x=\"" + fmt(x) + "\" y=\"" + fmt(y) + "\" font-size=\"" + std::to_string(size) +
         "\" text-anchor=\"" + anchor + "\" font-family=\"sans-serif\"" + extra + ">" + escape(s) +
         "</text>\n";
}

std::string frame(const std::string& title, const std::string& x_title, const std::string& y_title,
                  double y_min, double y_max) {
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fmt(kWidth) +
                  "\" height=\"" + fmt(kHeight) + "\" viewBox=\"0 0 " + fmt(kWidth) + " " +
                  fmt(kHeight) + "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += text(kLeft + pw / 2, 24, title, "middle", 15);
  s += text(kLeft + pw / 2, kHeight - 14, x_title);
  s += "<text x=\"18\" y=\"" + fmt(kTop + ph / 2) + "\" font-size=\"12\" text-anchor=\"middle\" "
       "font-family=\"sans-serif\" transform=\"rotate(-90 18 " + fmt(kTop + ph / 2) + ")\">" +
       escape(y_title) + "</text>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = y_min + (y_max - y_min) * i / 5.0;
    const double y = kTop + ph - ph * i / 5.0;
    s += "<line x1=\"" + fmt(kLeft) + "\" y1=\"" + fmt(y) + "\" x2=\"" + fmt(kLeft + pw) +
         "\" y2=\"" + fmt(y) + "\" stroke=\"#ddd\"/>\n";
    s += text(kLeft - 8, y + 4, fmt(v), "end", 11);
  }
  s += "<rect x=\"" + fmt(kLeft) + "\" y=\"" + fmt(kTop) + "\" width=\"" + fmt(pw) +
       "\" height=\"" + fmt(ph) + "\" fill=\"none\" stroke=\"#333\"/>\n";
  return s;
}

}  // namespace

std::string line_chart(const std::string& title, const std::string& x_title,
                       const std::string& y_title, const std::vector<std::string>& x_labels,
                       const std::vector<Series>& series, double y_min, double y_max) {
  require(!x_labels.empty(), ErrorCode::kInvalidArgument, "line chart needs x labels");
  require(y_max > y_min, ErrorCode::kInvalidArgument, "line chart needs y_max > y_min");
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  const std::size_t n = x_labels.size();
  auto px = [&](std::size_t i) { return kLeft + pw * (static_cast<double>(i) + 0.5) / static_cast<double>(n); };
  auto py = [&](double v) { return kTop + ph - ph * (std::clamp(v, y_min, y_max) - y_min) / (y_max - y_min); };

  std::string s = frame(title, x_title, y_title, y_min, y_max);
  for (std::size_t i = 0; i < n; ++i) s += text(px(i), kTop + ph + 18, x_labels[i], "middle", 11);
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& ser = series[k];
    require(ser.values.size() == n, ErrorCode::kInvalidArgument,
            "series '" + ser.name + "' length differs from the x labels");
    std::string path;
    bool pen_down = false;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::isnan(ser.values[i])) {
        pen_down = false;
        continue;
      }
      path += (pen_down ? " L " : " M ") + fmt(px(i)) + " " + fmt(py(ser.values[i]));
      pen_down = true;
      s += "<circle cx=\"" + fmt(px(i)) + "\" cy=\"" + fmt(py(ser.values[i])) + "\" r=\"3.5\" fill=\"" +
           ser.color + "\"/>\n";
    }
    if (!path.empty())
      s += "<path d=\"" + path.substr(1) + "\" fill=\"none\" stroke=\"" + ser.color +
           "\" stroke-width=\"2\"/>\n";
    const double ly = kTop + 14 + 20.0 * static_cast<double>(k);
    s += "<rect x=\"" + fmt(kWidth - kRight + 14) + "\" y=\"" + fmt(ly - 9) +
         "\" width=\"12\" height=\"12\" fill=\"" + ser.color + "\"/>\n";
    s += text(kWidth - kRight + 32, ly + 1, ser.name, "start", 12);
  }
  return s + "</svg>\n";
}

std::string histogram(const std::string& title, const std::string& x_title,
                      const std::vector<double>& values, std::size_t bins, double lo, double hi) {
  require(bins >= 1 && hi > lo, ErrorCode::kInvalidArgument, "histogram needs bins >= 1 and hi > lo");
  std::vector<std::size_t> counts(bins, 0);
  for (double v : values) {
    if (std::isnan(v)) continue;
    const double f = (v - lo) / (hi - lo) * static_cast<double>(bins);
    const auto b = static_cast<std::size_t>(std::clamp(f, 0.0, static_cast<double>(bins - 1)));
    ++counts[b];
  }
  const double top = std::max<double>(1.0, static_cast<double>(*std::max_element(counts.begin(), counts.end())));
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  std::string s = frame(title, x_title, "examples", 0.0, top);
  const double bw = pw / static_cast<double>(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    const double h = ph * static_cast<double>(counts[b]) / top;
    s += "<rect x=\"" + fmt(kLeft + bw * static_cast<double>(b) + 1) + "\" y=\"" + fmt(kTop + ph - h) +
         "\" width=\"" + fmt(std::max(bw - 2, 1.0)) + "\" height=\"" + fmt(h) +
         "\" fill=\"#4878a8\"/>\n";
  }
  for (std::size_t i = 0; i <= bins; i += std::max<std::size_t>(1, bins / 5))
    s += text(kLeft + bw * static_cast<double>(i), kTop + ph + 18,
              fmt(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins)), "middle", 11);
  return s + "</svg>\n";
}

}  // namespace dual::plot
