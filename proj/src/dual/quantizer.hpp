// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

// k-means codebooks over feature frames and nearest-centroid encoding.
//
// CDBK layout (all little-endian):
//   "CDBK" | u32 version=1 | u32 K | u32 dim | f64 train_inertia |
//   K*dim float32 centroids, row-major

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dual/featio.hpp"

namespace dual {

struct Codebook {
  RowMatrixF centroids;  // K x dim
  double train_inertia = 0.0;

  std::uint32_t k() const { return static_cast<std::uint32_t>(centroids.rows()); }
  std::uint32_t dim() const { return static_cast<std::uint32_t>(centroids.cols()); }
  bool operator==(const Codebook& o) const {
    return centroids == o.centroids && train_inertia == o.train_inertia;
  }
};

struct KMeansOptions {
  std::uint32_t k = 64;
  std::uint32_t max_iters = 100;
  double rel_tol = 1e-6;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

struct KMeansTrace {
  // Inertia after every assignment step, in order.
  std::vector<double> inertia;
  std::uint32_t empty_repairs = 0;
};

Codebook train_codebook(std::span<const FeatureMatrix> features, const KMeansOptions& opts,
                        KMeansTrace* trace = nullptr);

// Nearest centroid by squared Euclidean distance; ties go to the lower index.
std::vector<UnitId> encode(const Codebook& cb, const FeatureMatrix& m);
UnitId nearest_centroid(const Codebook& cb, std::span<const float> frame);

std::string encode_codebook(const Codebook& cb);
Codebook decode_codebook(std::string_view bytes, const std::string& origin = "<memory>");
void write_codebook(const Codebook& cb, const std::string& path);
Codebook read_codebook(const std::string& path);

}  // namespace dual
