// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

#include "dual/featio.hpp"

#include <cmath>
#include <random>

#include "dual/binio.hpp"
#include "dual/error.hpp"

namespace dual {
namespace {

constexpr char kMagic[] = "FEAT";
constexpr std::uint32_t kVersion = 1;

}  // namespace

void validate(const FeatureMatrix& m) {
  require(m.dim >= 1, ErrorCode::kInvalidArgument, "feature dim must be >= 1");
  require(m.frame_period_us > 0, ErrorCode::kInvalidArgument, "frame period must be > 0");
  require(m.data.size() == static_cast<std::size_t>(m.n_frames) * m.dim,
          ErrorCode::kInvalidArgument,
          "feature payload has " + std::to_string(m.data.size()) + " values, expected " +
              std::to_string(static_cast<std::size_t>(m.n_frames) * m.dim));
  for (std::size_t i = 0; i < m.data.size(); ++i) {
    if (!std::isfinite(m.data[i]))
      fail(ErrorCode::kNonFinite, "non-finite feature value at frame " +
                                      std::to_string(i / m.dim) + ", dim " +
                                      std::to_string(i % m.dim));
  }
}

std::string encode_features(const FeatureMatrix& m) {
  validate(m);
  binio::Writer w;
  w.magic(kMagic);
  w.u32(kVersion);
  w.u32(m.n_frames);
  w.u32(m.dim);
  w.u32(m.frame_period_us);
  w.bytes(m.data.data(), m.data.size() * sizeof(float));
  return w.buffer();
}

FeatureMatrix decode_features(std::string_view bytes, const std::string& origin) {
  binio::Reader r(bytes, origin);
  if (r.magic(4) != kMagic) fail(ErrorCode::kBadMagic, origin + ": not a FEAT file");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    fail(ErrorCode::kVersionMismatch,
         origin + ": FEAT version " + std::to_string(version) + " unsupported");
  FeatureMatrix m;
  m.n_frames = r.u32();
  m.dim = r.u32();
  m.frame_period_us = r.u32();
  require(m.dim >= 1, ErrorCode::kInvalidArgument, origin + ": dim must be >= 1");
  require(m.frame_period_us > 0, ErrorCode::kInvalidArgument, origin + ": frame period must be > 0");
  const std::size_t count = static_cast<std::size_t>(m.n_frames) * m.dim;
  if (r.remaining() < count * sizeof(float))
    fail(ErrorCode::kTruncated, origin + ": header promises " + std::to_string(m.n_frames) +
                                    " frames but payload holds " +
                                    std::to_string(r.remaining() / (sizeof(float) * m.dim)));
  m.data.resize(count);
  r.take(m.data.data(), count * sizeof(float));
  validate(m);
  return m;
}

void write_features(const FeatureMatrix& m, const std::string& path) {
  binio::write_file_atomic(path, encode_features(m));
}

FeatureMatrix read_features(const std::string& path) {
  return decode_features(binio::read_file(path), path);
}

FeatureMatrix synth_features(std::span<const UnitId> frame_units, const RowMatrixF& anchors,
                             double noise_sigma, std::uint64_t seed,
                             std::uint32_t frame_period_us) {
  require(anchors.rows() >= 1 && anchors.cols() >= 1, ErrorCode::kInvalidArgument,
          "anchor matrix is empty");
  require(noise_sigma >= 0.0, ErrorCode::kInvalidArgument, "noise_sigma must be >= 0");
  for (Eigen::Index a = 0; a < anchors.rows(); ++a)
    for (Eigen::Index b = a + 1; b < anchors.rows(); ++b)
      require(anchors.row(a) != anchors.row(b), ErrorCode::kInvalidArgument,
              "anchor rows " + std::to_string(a) + " and " + std::to_string(b) + " coincide");

  FeatureMatrix m;
  m.n_frames = static_cast<std::uint32_t>(frame_units.size());
  m.dim = static_cast<std::uint32_t>(anchors.cols());
  m.frame_period_us = frame_period_us;
  m.data.resize(frame_units.size() * m.dim);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t t = 0; t < frame_units.size(); ++t) {
    const UnitId u = frame_units[t];
    if (u >= anchors.rows())
      fail(ErrorCode::kOutOfRange, "unit id " + std::to_string(u) + " at frame " +
                                       std::to_string(t) + " exceeds anchor count " +
                                       std::to_string(anchors.rows()));
    for (std::uint32_t d = 0; d < m.dim; ++d) {
      double v = anchors(u, d);
      if (noise_sigma > 0.0) v += noise_sigma * gauss(rng);
      m.data[t * m.dim + d] = static_cast<float>(v);
    }
  }
  return m;
}

}  // namespace dual
