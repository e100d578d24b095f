// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <random>

#include "doctest.h"
#include "dual/binio.hpp"
#include "dual/error.hpp"
#include "dual/featio.hpp"
#include "oracles.hpp"

using namespace dual;

namespace {

FeatureMatrix random_matrix(std::uint32_t n, std::uint32_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd;
  FeatureMatrix m;
  m.n_frames = n;
  m.dim = dim;
  m.data.resize(std::size_t(n) * dim);
  for (auto& v : m.data) v = nd(rng);
  return m;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInternal;
}

}  // namespace

TEST_CASE("empty matrix encodes to a bare header") {
  FeatureMatrix m;
  m.dim = 4;
  const std::string bytes = encode_features(m);
  CHECK(bytes.size() == 20);
  CHECK(bytes.substr(0, 4) == "FEAT");
  CHECK(decode_features(bytes) == m);
}

TEST_CASE("zero matrix payload is all zero bytes") {
  FeatureMatrix m;
  m.n_frames = 2;
  m.dim = 3;
  m.data.assign(6, 0.0f);
  const std::string bytes = encode_features(m);
  REQUIRE(bytes.size() == 20 + 24);
  for (std::size_t i = 20; i < bytes.size(); ++i) CHECK(bytes[i] == '\0');
}

TEST_CASE("header fields are little-endian at fixed offsets") {
  FeatureMatrix m = random_matrix(3, 5, 1);
  m.frame_period_us = 12345;
  const std::string b = encode_features(m);
  auto u32_at = [&](std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(b[off + i]);
    return v;
  };
  CHECK(u32_at(4) == 1);
  CHECK(u32_at(8) == 3);
  CHECK(u32_at(12) == 5);
  CHECK(u32_at(16) == 12345);
}

TEST_CASE("file roundtrip is exact and rewrite is byte-identical") {
  testutil::TempDir dir("featio");
  const FeatureMatrix m = random_matrix(100, 16, 7);
  write_features(m, dir.file("a.feat"));
  const FeatureMatrix back = read_features(dir.file("a.feat"));
  CHECK(back == m);
  write_features(back, dir.file("b.feat"));
  CHECK(binio::read_file(dir.file("a.feat")) == binio::read_file(dir.file("b.feat")));
}

TEST_CASE("decoding rejects corrupt input") {
  const FeatureMatrix m = random_matrix(10, 4, 3);
  std::string bytes = encode_features(m);

  SUBCASE("bad magic") {
    std::string bad = bytes;
    bad.replace(0, 4, "XXXX");
    CHECK(code_of([&] { decode_features(bad); }) == ErrorCode::kBadMagic);
  }
  SUBCASE("short payload") {
    const std::string cut = bytes.substr(0, 20 + 5 * 4 * 4);
    CHECK(code_of([&] { decode_features(cut); }) == ErrorCode::kTruncated);
  }
  SUBCASE("unknown version") {
    std::string bad = bytes;
    bad[4] = 9;
    CHECK(code_of([&] { decode_features(bad); }) == ErrorCode::kVersionMismatch);
  }
  SUBCASE("non-finite payload") {
    FeatureMatrix nan = m;
    nan.data[5] = std::numeric_limits<float>::quiet_NaN();
    CHECK(code_of([&] { encode_features(nan); }) == ErrorCode::kNonFinite);
  }
  SUBCASE("missing file") {
    CHECK(code_of([&] { read_features("/nonexistent/dir/x.feat"); }) == ErrorCode::kIo);
  }
}

TEST_CASE("synth_features without noise copies anchor rows") {
  RowMatrixF anchors(2, 3);
  anchors << 1, 2, 3, -4, 5, -6;
  const std::vector<UnitId> units{1, 1, 0};
  const FeatureMatrix m = synth_features(units, anchors, 0.0, 42);
  REQUIRE(m.n_frames == 3);
  for (std::uint32_t t = 0; t < 3; ++t)
    for (std::uint32_t d = 0; d < 3; ++d) CHECK(m.row(t)[d] == anchors(units[t], d));
}

TEST_CASE("synth_features is deterministic per seed") {
  RowMatrixF anchors = RowMatrixF::Random(4, 8);
  const std::vector<UnitId> units{0, 1, 2, 3, 3, 2};
  CHECK(synth_features(units, anchors, 0.3, 9) == synth_features(units, anchors, 0.3, 9));
  CHECK_FALSE(synth_features(units, anchors, 0.3, 9) == synth_features(units, anchors, 0.3, 10));
}

TEST_CASE("synth_features noise averages out") {
  RowMatrixF anchors(1, 4);
  anchors << 0.5f, -1.0f, 2.0f, 0.0f;
  const std::vector<UnitId> units(10000, 0);
  const FeatureMatrix m = synth_features(units, anchors, 0.1, 5);
  for (std::uint32_t d = 0; d < 4; ++d) {
    double mean = 0;
    for (std::uint32_t t = 0; t < m.n_frames; ++t) mean += m.row(t)[d];
    mean /= m.n_frames;
    CHECK(std::abs(mean - anchors(0, d)) < 0.01);
  }
}

TEST_CASE("synth_features rejects unknown units") {
  RowMatrixF anchors = RowMatrixF::Random(2, 2);
  const std::vector<UnitId> units{0, 2};
  CHECK_THROWS_AS(synth_features(units, anchors, 0.0, 1), Error);
}
