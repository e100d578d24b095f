// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

// Run-length merging of frame-level unit ids and the conversions between
// answer times (seconds) and dense-unit indices.
//
// Conventions: time spans are half-open [start, end); index spans are closed.
// A time span covers frames floor(start/period) .. ceil(end/period) - 1, so a
// span ending exactly on a frame boundary does not claim the next frame.

#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "dual/featio.hpp"

namespace dual {

struct UnitSequence {
  std::vector<UnitId> units;
  std::vector<std::uint32_t> counts;
  std::uint32_t frame_period_us = kDefaultFramePeriodUs;

  double frame_period() const { return frame_period_us * 1e-6; }
  std::size_t size() const { return units.size(); }
  std::uint64_t total_frames() const;
  bool operator==(const UnitSequence&) const = default;
};

struct TimeSpan {
  double start = 0.0;
  double end = 0.0;
  double length() const { return end - start; }
  bool operator==(const TimeSpan&) const = default;
};

struct IndexSpan {
  std::uint32_t start_idx = 0;
  std::uint32_t end_idx = 0;
  bool operator==(const IndexSpan&) const = default;
};

// Throws kInvalidArgument unless lengths agree, counts are positive and no two
// adjacent units are equal.
void validate(const UnitSequence& u);

UnitSequence merge_repeats(std::span<const UnitId> frame_units,
                           std::uint32_t frame_period_us = kDefaultFramePeriodUs);
std::vector<UnitId> expand(const UnitSequence& u);

// Inclusive frame range [first, last] covered by a time span, before any
// clamping. Frame boundaries within 1e-9 frames are snapped so that exact
// multiples of the period survive floating-point division.
std::pair<std::int64_t, std::int64_t> frame_range(const TimeSpan& span, double frame_period);

IndexSpan time_to_index(const TimeSpan& span, const UnitSequence& u);
TimeSpan index_to_time(const IndexSpan& idx, const UnitSequence& u);

}  // namespace dual
