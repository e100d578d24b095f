// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

#include "dual/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "dual/error.hpp"

namespace dual {
namespace {

struct FrameOverlap {
  std::int64_t pred = 0;
  std::int64_t gold = 0;
  std::int64_t inter = 0;
};

FrameOverlap frame_overlap(const TimeSpan& pred, const TimeSpan& gold, double period) {
  // No frames exist before time 0.
  auto [ps, pe] = frame_range(pred, period);
  auto [gs, ge] = frame_range(gold, period);
  ps = std::max<std::int64_t>(ps, 0);
  gs = std::max<std::int64_t>(gs, 0);
  FrameOverlap o;
  o.pred = std::max<std::int64_t>(0, pe - ps + 1);
  o.gold = std::max<std::int64_t>(0, ge - gs + 1);
  o.inter = std::max<std::int64_t>(0, std::min(pe, ge) - std::max(ps, gs) + 1);
  if (o.pred == 0 || o.gold == 0) o.inter = 0;
  return o;
}

double overlap_seconds(const TimeSpan& a, const TimeSpan& b) {
  return std::max(0.0, std::min(a.end, b.end) - std::max(a.start, b.start));
}

double union_seconds(const TimeSpan& a, const TimeSpan& b) {
  return std::max(0.0, a.length()) + std::max(0.0, b.length()) - overlap_seconds(a, b);
}

}  // namespace

double ff1(const TimeSpan& pred, const TimeSpan& gold, double frame_period, bool* degenerate) {
  const FrameOverlap o = frame_overlap(pred, gold, frame_period);
  if (degenerate) *degenerate = o.pred == 0 || o.gold == 0;
  if (o.inter == 0) return 0.0;
  const double precision = static_cast<double>(o.inter) / static_cast<double>(o.pred);
  const double recall = static_cast<double>(o.inter) / static_cast<double>(o.gold);
  return 2.0 * precision * recall / (precision + recall);
}

double aos(const TimeSpan& pred, const TimeSpan& gold) {
  const double uni = union_seconds(pred, gold);
  if (!(uni > 0.0)) return 0.0;
  return overlap_seconds(pred, gold) / uni;
}

std::vector<std::string> tokenize_words(const std::string& text) {
  std::vector<std::string> words;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isspace(c)) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else if (!std::ispunct(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

EditCounts align_words(std::span<const std::string> ref, std::span<const std::string> hyp) {
  const std::size_t n = ref.size(), m = hyp.size();
  // cost table with backtrace; small inputs, so a full table is fine.
  std::vector<std::size_t> cost((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return cost[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      at(i, j) = std::min({at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0u : 1u),
                           at(i - 1, j) + 1, at(i, j - 1) + 1});

  EditCounts e;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0u : 1u)) {
      if (ref[i - 1] != hyp[j - 1]) ++e.substitutions;
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++e.deletions;
      --i;
    } else {
      ++e.insertions;
      --j;
    }
  }
  return e;
}

std::size_t edit_distance(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j - 1] + (a[i - 1] == b[j - 1] ? 0u : 1u), prev[j] + 1, cur[j - 1] + 1});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double wer(std::span<const std::string> ref, std::span<const std::string> hyp) {
  require(!ref.empty(), ErrorCode::kInvalidArgument, "WER needs a non-empty reference");
  return static_cast<double>(edit_distance(ref, hyp)) / static_cast<double>(ref.size());
}

double wer(const std::string& ref, const std::string& hyp) {
  const auto r = tokenize_words(ref);
  const auto h = tokenize_words(hyp);
  return wer(std::span<const std::string>(r), std::span<const std::string>(h));
}

EvalResult evaluate(const std::map<std::string, TimeSpan>& predictions,
                    const std::map<std::string, TimeSpan>& golds, double frame_period) {
  std::vector<std::string> orphans;
  for (const auto& [id, span] : predictions)
    if (!golds.contains(id)) orphans.push_back(id);
  if (!orphans.empty()) {
    std::ostringstream msg;
    msg << "predictions without gold answers:";
    for (const auto& id : orphans) msg << ' ' << id;
    fail(ErrorCode::kInvalidArgument, msg.str());
  }

  EvalResult r;
  double inter_frames = 0, pred_frames = 0, gold_frames = 0;
  double inter_sec = 0, union_sec = 0;
  for (const auto& [id, gold] : golds) {
    ExampleScore s;
    s.id = id;
    auto it = predictions.find(id);
    if (it == predictions.end()) {
      s.missing = true;
      r.missing_ids.push_back(id);
      const auto [gs, ge] = frame_range(gold, frame_period);
      gold_frames += static_cast<double>(std::max<std::int64_t>(0, ge - gs + 1));
      union_sec += std::max(0.0, gold.length());
    } else {
      const TimeSpan& pred = it->second;
      s.ff1 = ff1(pred, gold, frame_period);
      s.aos = aos(pred, gold);
      const FrameOverlap o = frame_overlap(pred, gold, frame_period);
      inter_frames += static_cast<double>(o.inter);
      pred_frames += static_cast<double>(o.pred);
      gold_frames += static_cast<double>(o.gold);
      inter_sec += overlap_seconds(pred, gold);
      union_sec += union_seconds(pred, gold);
    }
    r.examples.push_back(std::move(s));
  }
  if (!r.examples.empty()) {
    double f = 0, a = 0;
    for (const auto& s : r.examples) {
      f += s.ff1;
      a += s.aos;
    }
    r.ff1 = f / static_cast<double>(r.examples.size());
    r.aos = a / static_cast<double>(r.examples.size());
  }
  if (pred_frames + gold_frames > 0) r.ff1_micro = 2.0 * inter_frames / (pred_frames + gold_frames);
  if (union_sec > 0) r.aos_micro = inter_sec / union_sec;
  return r;
}

}  // namespace dual
