// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

// Minimal headless SVG charts for reports.

#pragma once

#include <string>
#include <vector>

namespace dual::plot {

struct Series {
  std::string name;
  std::vector<double> values;  // one per x label; NaN leaves a gap
  std::string color;
};

std::string line_chart(const std::string& title, const std::string& x_title,
                       const std::string& y_title, const std::vector<std::string>& x_labels,
                       const std::vector<Series>& series, double y_min = 0.0, double y_max = 1.0);

// Equal-width bins over [lo, hi]; values outside are clamped into the end bins.
std::string histogram(const std::string& title, const std::string& x_title,
                      const std::vector<double>& values, std::size_t bins, double lo = 0.0,
                      double hi = 1.0);

}  // namespace dual::plot
