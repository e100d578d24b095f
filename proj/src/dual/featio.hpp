// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

// Frame-level feature matrices and the FEAT container.
//
// FEAT layout (all little-endian):
//   "FEAT" | u32 version=1 | u32 n_frames | u32 dim | u32 frame_period_us |
//   n_frames*dim float32, row-major

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace dual {

using UnitId = std::uint32_t;
using RowMatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline constexpr std::uint32_t kDefaultFramePeriodUs = 20000;

struct FeatureMatrix {
  std::uint32_t n_frames = 0;
  std::uint32_t dim = 1;
  std::uint32_t frame_period_us = kDefaultFramePeriodUs;
  std::vector<float> data;

  double frame_period() const { return frame_period_us * 1e-6; }
  std::span<const float> row(std::size_t t) const {
    return {data.data() + t * dim, dim};
  }
  bool operator==(const FeatureMatrix&) const = default;
};

// Throws kInvalidArgument on shape problems and kNonFinite on NaN/Inf.
void validate(const FeatureMatrix& m);

std::string encode_features(const FeatureMatrix& m);
FeatureMatrix decode_features(std::string_view bytes, const std::string& origin = "<memory>");

void write_features(const FeatureMatrix& m, const std::string& path);
FeatureMatrix read_features(const std::string& path);

// Frame t is anchors.row(frame_units[t]) plus isotropic N(0, noise_sigma^2)
// noise drawn from a generator seeded with `seed`.
FeatureMatrix synth_features(std::span<const UnitId> frame_units,
                             const RowMatrixF& anchors, double noise_sigma,
                             std::uint64_t seed,
                             std::uint32_t frame_period_us = kDefaultFramePeriodUs);

}  // namespace dual
