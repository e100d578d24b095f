// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

#include "dual/unitizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dual/error.hpp"

namespace dual {
namespace {

constexpr double kSnap = 1e-9;

double snapped(double x) {
  const double r = std::round(x);
  return std::abs(x - r) <= kSnap * std::max(1.0, std::abs(x)) ? r : x;
}

// prefix[i] = frames before dense unit i; prefix.back() = total frames.
std::vector<std::uint64_t> prefix_frames(const UnitSequence& u) {
  std::vector<std::uint64_t> prefix(u.counts.size() + 1, 0);
  for (std::size_t i = 0; i < u.counts.size(); ++i) prefix[i + 1] = prefix[i] + u.counts[i];
  return prefix;
}

std::uint32_t unit_at_frame(const std::vector<std::uint64_t>& prefix, std::uint64_t frame) {
  auto it = std::upper_bound(prefix.begin(), prefix.end(), frame);
  return static_cast<std::uint32_t>(std::distance(prefix.begin(), it) - 1);
}

}  // namespace

std::uint64_t UnitSequence::total_frames() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

void validate(const UnitSequence& u) {
  require(u.units.size() == u.counts.size(), ErrorCode::kInvalidArgument,
          "unit and count sequences differ in length");
  require(u.frame_period_us > 0, ErrorCode::kInvalidArgument, "frame period must be > 0");
  for (std::size_t i = 0; i < u.units.size(); ++i) {
    require(u.counts[i] >= 1, ErrorCode::kInvalidArgument,
            "repetition count at " + std::to_string(i) + " is zero");
    if (i > 0)
      require(u.units[i] != u.units[i - 1], ErrorCode::kInvalidArgument,
              "adjacent units at " + std::to_string(i - 1) + " and " + std::to_string(i) +
                  " are equal");
  }
}

UnitSequence merge_repeats(std::span<const UnitId> frame_units, std::uint32_t frame_period_us) {
  UnitSequence u;
  u.frame_period_us = frame_period_us;
  for (UnitId id : frame_units) {
    if (!u.units.empty() && u.units.back() == id) {
      ++u.counts.back();
    } else {
      u.units.push_back(id);
      u.counts.push_back(1);
    }
  }
  return u;
}

std::vector<UnitId> expand(const UnitSequence& u) {
  std::vector<UnitId> out;
  out.reserve(u.total_frames());
  for (std::size_t i = 0; i < u.units.size(); ++i) out.insert(out.end(), u.counts[i], u.units[i]);
  return out;
}

std::pair<std::int64_t, std::int64_t> frame_range(const TimeSpan& span, double frame_period) {
  require(frame_period > 0.0, ErrorCode::kInvalidArgument, "frame period must be > 0");
  const auto first = static_cast<std::int64_t>(std::floor(snapped(span.start / frame_period)));
  const auto last = static_cast<std::int64_t>(std::ceil(snapped(span.end / frame_period))) - 1;
  return {first, last};
}

IndexSpan time_to_index(const TimeSpan& span, const UnitSequence& u) {
  require(std::isfinite(span.start) && std::isfinite(span.end) && span.start < span.end,
          ErrorCode::kInvalidArgument, "time span must satisfy start < end");
  const auto prefix = prefix_frames(u);
  const auto total = static_cast<std::int64_t>(prefix.back());
  auto [first, last] = frame_range(span, u.frame_period());
  if (total == 0 || first >= total || last < 0)
    fail(ErrorCode::kOutOfRange, "time span [" + std::to_string(span.start) + ", " +
                                     std::to_string(span.end) + ") lies outside the " +
                                     std::to_string(total) + "-frame sequence");
  first = std::clamp<std::int64_t>(first, 0, total - 1);
  last = std::clamp<std::int64_t>(last, first, total - 1);
  return {unit_at_frame(prefix, static_cast<std::uint64_t>(first)),
          unit_at_frame(prefix, static_cast<std::uint64_t>(last))};
}

TimeSpan index_to_time(const IndexSpan& idx, const UnitSequence& u) {
  if (idx.start_idx > idx.end_idx || idx.end_idx >= u.size())
    fail(ErrorCode::kOutOfRange, "index span (" + std::to_string(idx.start_idx) + ", " +
                                     std::to_string(idx.end_idx) + ") invalid for " +
                                     std::to_string(u.size()) + " units");
  const auto prefix = prefix_frames(u);
  const double p = u.frame_period();
  return {static_cast<double>(prefix[idx.start_idx]) * p,
          static_cast<double>(prefix[idx.end_idx + 1]) * p};
}

}  // namespace dual
