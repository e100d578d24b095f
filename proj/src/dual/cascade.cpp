// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

#include "dual/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "dual/error.hpp"

namespace dual {

std::vector<std::string> TimedTranscript::texts() const {
  std::vector<std::string> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(w.text);
  return out;
}

void validate(const TimedTranscript& t) {
  for (std::size_t i = 0; i < t.words.size(); ++i) {
    const auto& w = t.words[i];
    require(w.start < w.end, ErrorCode::kInvalidArgument,
            "word " + std::to_string(i) + " has start >= end");
    if (i > 0)
      require(t.words[i - 1].end <= w.start + 1e-9, ErrorCode::kInvalidArgument,
              "words " + std::to_string(i - 1) + " and " + std::to_string(i) + " overlap");
  }
}

void NoiseSpec::validate() const {
  require(target_wer >= 0.0 && target_wer <= 1.0, ErrorCode::kInvalidArgument,
          "target_wer must lie in [0, 1]");
  require(p_sub >= 0.0 && p_del >= 0.0 && p_ins >= 0.0 && p_sub <= 1.0 && p_del <= 1.0 &&
              p_ins <= 1.0,
          ErrorCode::kInvalidArgument, "error-type probabilities must lie in [0, 1]");
  require(std::abs(p_sub + p_del + p_ins - 1.0) < 1e-9, ErrorCode::kInvalidArgument,
          "error-type probabilities must sum to 1");
  if (target_wer > 0.0 && (p_sub > 0.0 || p_ins > 0.0))
    require(!vocabulary.empty(), ErrorCode::kInvalidArgument,
            "substitutions and insertions need a vocabulary");
}

TimedTranscript corrupt(const TimedTranscript& t, const NoiseSpec& spec) {
  spec.validate();
  validate(t);
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> pick(0, spec.vocabulary.empty() ? 0 : spec.vocabulary.size() - 1);

  auto replacement = [&](const std::string& avoid) {
    // Bounded retries; a vocabulary made only of `avoid` yields `avoid`.
    for (int tries = 0; tries < 64; ++tries) {
      const std::string& w = spec.vocabulary[pick(rng)];
      if (w != avoid) return w;
    }
    for (const auto& w : spec.vocabulary)
      if (w != avoid) return w;
    return avoid;
  };

  TimedTranscript out;
  out.words.reserve(t.words.size());
  for (const auto& w : t.words) {
    if (u01(rng) >= spec.target_wer) {
      out.words.push_back(w);
      continue;
    }
    const double r = u01(rng) * (spec.p_sub + spec.p_del + spec.p_ins);
    if (r < spec.p_sub) {
      out.words.push_back({replacement(w.text), w.start, w.end});
    } else if (r < spec.p_sub + spec.p_del) {
      // deleted
    } else {
      const double mid = 0.5 * (w.start + w.end);
      out.words.push_back({w.text, w.start, mid});
      out.words.push_back({replacement(w.text), mid, w.end});
    }
  }
  return out;
}

TimeSpan oracle_qa(const TimedTranscript& passage, const std::vector<std::string>& answer) {
  require(!passage.words.empty(), ErrorCode::kInvalidArgument, "passage transcript is empty");
  const std::size_t n = passage.words.size(), m = answer.size();
  std::size_t best = std::numeric_limits<std::size_t>::max();
  std::size_t best_i = 0, best_j = 0;
  // For each window start, grow the window one word at a time and extend the
  // edit-distance table by one row.
  std::vector<std::size_t> prev(m + 1), cur(m + 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k <= m; ++k) prev[k] = k;
    for (std::size_t j = i; j < n; ++j) {
      cur[0] = j - i + 1;
      for (std::size_t k = 1; k <= m; ++k)
        cur[k] = std::min({prev[k - 1] + (passage.words[j].text == answer[k - 1] ? 0u : 1u),
                           prev[k] + 1, cur[k - 1] + 1});
      std::swap(prev, cur);
      if (prev[m] < best) {
        best = prev[m];
        best_i = i;
        best_j = j;
      }
    }
  }
  return {passage.words[best_i].start, passage.words[best_j].end};
}

BucketReport bucket_analysis(const std::vector<BucketInput>& examples,
                             const std::vector<double>& edges) {
  require(edges.size() >= 2, ErrorCode::kInvalidArgument, "need at least two bucket edges");
  for (std::size_t i = 1; i < edges.size(); ++i)
    require(edges[i] > edges[i - 1], ErrorCode::kInvalidArgument,
            "bucket edges must be strictly increasing");

  std::vector<Bucket> all(edges.size() - 1);
  for (std::size_t b = 0; b < all.size(); ++b) {
    all[b].lo = edges[b];
    all[b].hi = edges[b + 1];
  }
  BucketReport report;
  for (const auto& ex : examples) {
    auto it = std::upper_bound(edges.begin(), edges.end(), ex.realized_wer);
    if (it == edges.begin() || it == edges.end()) {
      ++report.uncovered;
      continue;
    }
    Bucket& b = all[static_cast<std::size_t>(std::distance(edges.begin(), it)) - 1];
    ++b.count;
    b.ff1_cascade += ex.ff1_cascade;
    b.ff1_dual += ex.ff1_dual;
  }
  for (auto& b : all) {
    if (b.count == 0) continue;
    b.ff1_cascade /= static_cast<double>(b.count);
    b.ff1_dual /= static_cast<double>(b.count);
    report.buckets.push_back(b);
  }
  return report;
}

std::vector<double> default_bucket_edges() {
  return {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7};
}

}  // namespace dual
