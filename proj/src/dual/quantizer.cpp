// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

#include "dual/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "dual/binio.hpp"
#include "dual/error.hpp"
#include "dual/parallel.hpp"

namespace dual {
namespace {

constexpr char kMagic[] = "CDBK";
constexpr std::uint32_t kVersion = 1;
// Reduction granularity. Fixed so partial sums combine in the same order no
// matter how many workers run.
constexpr std::size_t kBlock = 4096;

double sq_dist(const float* x, const double* c, std::size_t dim) {
  double s = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double diff = static_cast<double>(x[d]) - c[d];
    s += diff * diff;
  }
  return s;
}

double sq_dist(const float* x, const float* c, std::size_t dim) {
  double s = 0.0;
  for (std::size_t d = 0; d < dim; ++d) {
    const double diff = static_cast<double>(x[d]) - static_cast<double>(c[d]);
    s += diff * diff;
  }
  return s;
}

struct Frames {
  std::vector<float> data;
  std::size_t n = 0;
  std::size_t dim = 0;
  const float* row(std::size_t i) const { return data.data() + i * dim; }
};

Frames gather(std::span<const FeatureMatrix> features) {
  Frames f;
  require(!features.empty(), ErrorCode::kInvalidArgument, "no feature matrices supplied");
  f.dim = features.front().dim;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i].dim != f.dim)
      fail(ErrorCode::kDimMismatch, "feature matrix " + std::to_string(i) + " has dim " +
                                        std::to_string(features[i].dim) + ", expected " +
                                        std::to_string(f.dim));
    f.n += features[i].n_frames;
  }
  f.data.reserve(f.n * f.dim);
  for (const auto& m : features) f.data.insert(f.data.end(), m.data.begin(), m.data.end());
  return f;
}

double uniform01(std::mt19937_64& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

std::size_t sample_weighted(const std::vector<double>& weights, double total, std::mt19937_64& rng) {
  const double target = uniform01(rng) * total;
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (acc > target && weights[i] > 0.0) return i;
  }
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0.0) return i;
  return weights.size() - 1;
}

// Greedy k-means++: each round draws several D^2-weighted candidates and keeps
// the one that lowers the potential most.
std::vector<double> seed_centroids(const Frames& f, std::uint32_t k, std::mt19937_64& rng) {
  const std::size_t dim = f.dim;
  std::vector<double> centers(static_cast<std::size_t>(k) * dim);
  const std::size_t trials = 2 + static_cast<std::size_t>(std::log(static_cast<double>(k)));

  std::size_t first = std::uniform_int_distribution<std::size_t>(0, f.n - 1)(rng);
  for (std::size_t d = 0; d < dim; ++d) centers[d] = f.row(first)[d];

  std::vector<double> closest(f.n);
  double potential = 0.0;
  for (std::size_t i = 0; i < f.n; ++i) {
    closest[i] = sq_dist(f.row(i), centers.data(), dim);
    potential += closest[i];
  }

  std::vector<double> candidate_dist(f.n), best_dist(f.n);
  for (std::uint32_t c = 1; c < k; ++c) {
    if (!(potential > 0.0))
      fail(ErrorCode::kInvalidArgument,
           "data has fewer distinct frames than K=" + std::to_string(k));
    std::size_t best_idx = 0;
    double best_potential = std::numeric_limits<double>::infinity();
    for (std::size_t t = 0; t < trials; ++t) {
      const std::size_t cand = sample_weighted(closest, potential, rng);
      double pot = 0.0;
      for (std::size_t i = 0; i < f.n; ++i) {
        candidate_dist[i] = std::min(closest[i], sq_dist(f.row(i), f.row(cand), dim));
        pot += candidate_dist[i];
      }
      if (pot < best_potential) {
        best_potential = pot;
        best_idx = cand;
        best_dist.swap(candidate_dist);
      }
    }
    for (std::size_t d = 0; d < dim; ++d) centers[c * dim + d] = f.row(best_idx)[d];
    closest.swap(best_dist);
    potential = best_potential;
  }
  return centers;
}

struct Assignment {
  std::vector<std::uint32_t> label;
  std::vector<double> dist;
  double inertia = 0.0;
};

void assign(const Frames& f, const std::vector<double>& centers, std::uint32_t k,
            unsigned threads, Assignment& a) {
  const std::size_t dim = f.dim;
  a.label.resize(f.n);
  a.dist.resize(f.n);
  const std::size_t blocks = (f.n + kBlock - 1) / kBlock;
  std::vector<double> partial(blocks, 0.0);
  parallel_for(blocks, threads, [&](std::size_t b) {
    const std::size_t lo = b * kBlock, hi = std::min(f.n, lo + kBlock);
    double sum = 0.0;
    for (std::size_t i = lo; i < hi; ++i) {
      std::uint32_t best = 0;
      double best_d = sq_dist(f.row(i), centers.data(), dim);
      for (std::uint32_t c = 1; c < k; ++c) {
        const double d = sq_dist(f.row(i), centers.data() + c * dim, dim);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      a.label[i] = best;
      a.dist[i] = best_d;
      sum += best_d;
    }
    partial[b] = sum;
  });
  a.inertia = 0.0;
  for (double p : partial) a.inertia += p;
}

// Recomputes centroids as cluster means. Returns the number of clusters that
// were empty and had to be reseeded.
std::uint32_t update(const Frames& f, const Assignment& a, std::uint32_t k, unsigned threads,
                     std::vector<double>& centers) {
  const std::size_t dim = f.dim;
  const std::size_t blocks = (f.n + kBlock - 1) / kBlock;
  std::vector<std::vector<double>> sums(blocks);
  std::vector<std::vector<std::size_t>> counts(blocks);
  parallel_for(blocks, threads, [&](std::size_t b) {
    auto& s = sums[b];
    auto& c = counts[b];
    s.assign(static_cast<std::size_t>(k) * dim, 0.0);
    c.assign(k, 0);
    const std::size_t lo = b * kBlock, hi = std::min(f.n, lo + kBlock);
    for (std::size_t i = lo; i < hi; ++i) {
      const std::uint32_t l = a.label[i];
      ++c[l];
      for (std::size_t d = 0; d < dim; ++d) s[l * dim + d] += f.row(i)[d];
    }
  });
  std::vector<double> total(static_cast<std::size_t>(k) * dim, 0.0);
  std::vector<std::size_t> count(k, 0);
  for (std::size_t b = 0; b < blocks; ++b) {
    for (std::size_t j = 0; j < total.size(); ++j) total[j] += sums[b][j];
    for (std::uint32_t c = 0; c < k; ++c) count[c] += counts[b][c];
  }

  std::vector<std::size_t> by_distance;
  std::uint32_t repairs = 0;
  std::size_t next_far = 0;
  for (std::uint32_t c = 0; c < k; ++c) {
    if (count[c] > 0) {
      for (std::size_t d = 0; d < dim; ++d)
        centers[c * dim + d] = total[c * dim + d] / static_cast<double>(count[c]);
      continue;
    }
    if (by_distance.empty()) {
      by_distance.resize(f.n);
      for (std::size_t i = 0; i < f.n; ++i) by_distance[i] = i;
      std::stable_sort(by_distance.begin(), by_distance.end(),
                       [&](std::size_t x, std::size_t y) { return a.dist[x] > a.dist[y]; });
    }
    require(next_far < f.n, ErrorCode::kInternal, "ran out of frames for empty-cluster repair");
    const std::size_t far = by_distance[next_far++];
    for (std::size_t d = 0; d < dim; ++d) centers[c * dim + d] = f.row(far)[d];
    ++repairs;
  }
  return repairs;
}

}  // namespace

Codebook train_codebook(std::span<const FeatureMatrix> features, const KMeansOptions& opts,
                        KMeansTrace* trace) {
  require(opts.k >= 1, ErrorCode::kInvalidArgument, "K must be >= 1");
  require(opts.max_iters >= 1, ErrorCode::kInvalidArgument, "max_iters must be >= 1");
  Frames f = gather(features);
  if (f.n < opts.k)
    fail(ErrorCode::kInvalidArgument, "need at least K=" + std::to_string(opts.k) +
                                          " frames, got " + std::to_string(f.n));

  std::mt19937_64 rng(opts.seed);
  std::vector<double> centers = seed_centroids(f, opts.k, rng);

  KMeansTrace local;
  KMeansTrace& tr = trace ? *trace : local;
  tr = {};
  Assignment a;
  for (std::uint32_t it = 0; it < opts.max_iters; ++it) {
    assign(f, centers, opts.k, opts.threads, a);
    if (!tr.inertia.empty()) {
      const double prev = tr.inertia.back();
      // Lloyd steps cannot raise the objective; anything else is a bug.
      require(a.inertia <= prev * (1.0 + 1e-12) + 1e-300, ErrorCode::kInternal,
              "k-means inertia increased at iteration " + std::to_string(it));
      tr.inertia.push_back(a.inertia);
      if (prev - a.inertia <= opts.rel_tol * prev) break;
    } else {
      tr.inertia.push_back(a.inertia);
    }
    if (it + 1 == opts.max_iters) break;
    tr.empty_repairs += update(f, a, opts.k, opts.threads, centers);
  }

  Codebook cb;
  cb.centroids.resize(opts.k, static_cast<Eigen::Index>(f.dim));
  for (std::uint32_t c = 0; c < opts.k; ++c)
    for (std::size_t d = 0; d < f.dim; ++d)
      cb.centroids(c, static_cast<Eigen::Index>(d)) = static_cast<float>(centers[c * f.dim + d]);
  cb.train_inertia = a.inertia;
  return cb;
}

UnitId nearest_centroid(const Codebook& cb, std::span<const float> frame) {
  if (frame.size() != cb.dim())
    fail(ErrorCode::kDimMismatch, "frame dim " + std::to_string(frame.size()) +
                                      " does not match codebook dim " + std::to_string(cb.dim()));
  UnitId best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::uint32_t c = 0; c < cb.k(); ++c) {
    const double d = sq_dist(frame.data(), cb.centroids.row(c).data(), frame.size());
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best;
}

std::vector<UnitId> encode(const Codebook& cb, const FeatureMatrix& m) {
  if (m.dim != cb.dim())
    fail(ErrorCode::kDimMismatch, "features have dim " + std::to_string(m.dim) +
                                      " but codebook has dim " + std::to_string(cb.dim()));
  std::vector<UnitId> out(m.n_frames);
  for (std::uint32_t t = 0; t < m.n_frames; ++t) out[t] = nearest_centroid(cb, m.row(t));
  return out;
}

std::string encode_codebook(const Codebook& cb) {
  require(cb.k() >= 1 && cb.dim() >= 1, ErrorCode::kInvalidArgument, "empty codebook");
  for (Eigen::Index i = 0; i < cb.centroids.size(); ++i)
    require(std::isfinite(cb.centroids.data()[i]), ErrorCode::kNonFinite, "non-finite centroid");
  binio::Writer w;
  w.magic(kMagic);
  w.u32(kVersion);
  w.u32(cb.k());
  w.u32(cb.dim());
  w.f64(cb.train_inertia);
  w.bytes(cb.centroids.data(), static_cast<std::size_t>(cb.centroids.size()) * sizeof(float));
  return w.buffer();
}

Codebook decode_codebook(std::string_view bytes, const std::string& origin) {
  binio::Reader r(bytes, origin);
  if (r.magic(4) != kMagic) fail(ErrorCode::kBadMagic, origin + ": not a CDBK file");
  const std::uint32_t version = r.u32();
  if (version != kVersion)
    fail(ErrorCode::kVersionMismatch,
         origin + ": CDBK version " + std::to_string(version) + " unsupported");
  const std::uint32_t k = r.u32();
  const std::uint32_t dim = r.u32();
  require(k >= 1 && dim >= 1, ErrorCode::kInvalidArgument, origin + ": empty codebook");
  Codebook cb;
  cb.train_inertia = r.f64();
  const std::size_t count = static_cast<std::size_t>(k) * dim;
  if (r.remaining() < count * sizeof(float))
    fail(ErrorCode::kTruncated, origin + ": centroid payload truncated");
  cb.centroids.resize(k, dim);
  r.take(cb.centroids.data(), count * sizeof(float));
  for (std::size_t i = 0; i < count; ++i)
    require(std::isfinite(cb.centroids.data()[i]), ErrorCode::kNonFinite,
            origin + ": non-finite centroid value");
  return cb;
}

void write_codebook(const Codebook& cb, const std::string& path) {
  binio::write_file_atomic(path, encode_codebook(cb));
}

Codebook read_codebook(const std::string& path) {
  return decode_codebook(binio::read_file(path), path);
}

}  // namespace dual
