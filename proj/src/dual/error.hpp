// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

#pragma once

#include <stdexcept>
#include <string>

namespace dual {

enum class ErrorCode {
  kInvalidArgument = 1,
  kIo,
  kBadMagic,
  kVersionMismatch,
  kTruncated,
  kNonFinite,
  kDimMismatch,
  kOutOfRange,
  kSchema,
  kDiverged,
  kInternal,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) fail(code, what);
}

}  // namespace dual
