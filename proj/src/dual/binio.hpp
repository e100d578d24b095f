// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

// Little-endian byte packing for the on-disk formats.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>
#include <vector>

#include "dual/error.hpp"

namespace dual::binio {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats assume a little-endian host");

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  void magic(std::string_view m) { bytes(m.data(), m.size()); }
  void u32(std::uint32_t v) { bytes(&v, sizeof v); }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void f32(float v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  const std::string& buffer() const { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view data, std::string what)
      : data_(data), what_(std::move(what)) {}

  void take(void* out, std::size_t n) {
    if (pos_ + n > data_.size())
      fail(ErrorCode::kTruncated, what_ + ": unexpected end of data at byte " +
                                      std::to_string(pos_));
    std::memcpy(out, data_.data() + pos_, n);
    pos_ += n;
  }
  std::string magic(std::size_t n) {
    std::string m(n, '\0');
    take(m.data(), n);
    return m;
  }
  std::uint32_t u32() { std::uint32_t v; take(&v, sizeof v); return v; }
  std::uint64_t u64() { std::uint64_t v; take(&v, sizeof v); return v; }
  float f32() { float v; take(&v, sizeof v); return v; }
  double f64() { double v; take(&v, sizeof v); return v; }
  std::string str() {
    std::uint32_t n = u32();
    std::string s(n, '\0');
    take(s.data(), n);
    return s;
  }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  std::string_view data_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::string& path);
// Writes through a temporary sibling and renames, so readers never observe a
// partially written file.
void write_file_atomic(const std::string& path, std::string_view data);

}  // namespace dual::binio
