// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

// Simulated cascade baseline: a word-level noise channel standing in for ASR,
// an edit-distance answer matcher standing in for text QA, and WER-bucketed
// comparison against the textless system.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dual/unitizer.hpp"

namespace dual {

struct TimedWord {
  std::string text;
  double start = 0.0;
  double end = 0.0;
  bool operator==(const TimedWord&) const = default;
};

struct TimedTranscript {
  std::vector<TimedWord> words;
  std::vector<std::string> texts() const;
  bool operator==(const TimedTranscript&) const = default;
};

// Words must be temporally ordered, non-overlapping and have start < end.
void validate(const TimedTranscript& t);

struct NoiseSpec {
  double target_wer = 0.0;
  double p_sub = 1.0 / 3.0;  // mix of error types, sums to 1
  double p_del = 1.0 / 3.0;
  double p_ins = 1.0 / 3.0;
  std::vector<std::string> vocabulary;  // replacement and insertion words
  std::uint64_t seed = 0;

  void validate() const;
};

// Each reference word independently suffers one error event with probability
// target_wer; the event type is drawn from the mix. A substitution keeps the
// word's timing, a deletion drops it, an insertion adds a word after it and
// splits its interval in half. Each event costs exactly one edit, so the
// expected WER equals target_wer up to alignment shortcuts.
TimedTranscript corrupt(const TimedTranscript& t, const NoiseSpec& spec);

// Contiguous word window closest in word edit distance to `answer`; ties go to
// the earliest window, then the shortest. Returns (first start, last end).
TimeSpan oracle_qa(const TimedTranscript& passage, const std::vector<std::string>& answer);

struct BucketInput {
  double realized_wer = 0.0;
  double ff1_cascade = 0.0;
  double ff1_dual = 0.0;
};

struct Bucket {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double ff1_cascade = 0.0;
  double ff1_dual = 0.0;
};

struct BucketReport {
  std::vector<Bucket> buckets;  // non-empty buckets only, in edge order
  std::size_t uncovered = 0;    // examples outside [edges.front(), edges.back())
};

// Half-open buckets [edges[i], edges[i+1]); edges must be strictly increasing.
BucketReport bucket_analysis(const std::vector<BucketInput>& examples,
                             const std::vector<double>& edges);

// 0, 0.1, ..., 0.7
std::vector<double> default_bucket_edges();

}  // namespace dual
