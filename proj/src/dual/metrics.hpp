// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

// Span-overlap metrics (frame-level F1 and audio overlapping score) and word
// error rate.

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dual/unitizer.hpp"

namespace dual {

// Frame-level F1: both spans are rasterised with frame_range() and compared as
// frame sets. If either side rasterises to nothing the score is 0 and
// *degenerate is set.
double ff1(const TimeSpan& pred, const TimeSpan& gold, double frame_period,
           bool* degenerate = nullptr);

// Temporal intersection over union, in continuous time.
double aos(const TimeSpan& pred, const TimeSpan& gold);

// Lowercases, strips punctuation and splits on whitespace.
std::vector<std::string> tokenize_words(const std::string& text);

struct EditCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t total() const { return substitutions + deletions + insertions; }
};

// Unit-cost Levenshtein alignment of hyp against ref.
EditCounts align_words(std::span<const std::string> ref, std::span<const std::string> hyp);
std::size_t edit_distance(std::span<const std::string> a, std::span<const std::string> b);

double wer(std::span<const std::string> ref, std::span<const std::string> hyp);
double wer(const std::string& ref, const std::string& hyp);

struct ExampleScore {
  std::string id;
  double ff1 = 0.0;
  double aos = 0.0;
  bool missing = false;
  std::optional<double> wer;
};

struct EvalResult {
  std::vector<ExampleScore> examples;  // ordered by id
  double ff1 = 0.0;                    // macro means
  double aos = 0.0;
  double ff1_micro = 0.0;  // pooled frame counts
  double aos_micro = 0.0;  // pooled seconds
  std::vector<std::string> missing_ids;
};

// Every prediction must name a gold id (kInvalidArgument otherwise, listing the
// offenders). Golds without a prediction score 0 and are listed in missing_ids.
EvalResult evaluate(const std::map<std::string, TimeSpan>& predictions,
                    const std::map<std::string, TimeSpan>& golds, double frame_period);

}  // namespace dual
