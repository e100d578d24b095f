// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

#pragma once

#include <cmath>

#include "dual/error.hpp"

namespace dual {

namespace detail {

template <typename U, typename T>
EncoderWeights<U> cast_encoder(const EncoderWeights<T>& w) {
  EncoderWeights<U> o;
  o.tokens = w.tokens.template cast<U>();
  o.positions = w.positions.template cast<U>();
  o.lnf_g = w.lnf_g.template cast<U>();
  o.lnf_b = w.lnf_b.template cast<U>();
  o.layers.resize(w.layers.size());
  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    const auto& a = w.layers[l];
    auto& b = o.layers[l];
    b.ln1_g = a.ln1_g.template cast<U>();
    b.ln1_b = a.ln1_b.template cast<U>();
    b.wq = a.wq.template cast<U>();
    b.wk = a.wk.template cast<U>();
    b.wv = a.wv.template cast<U>();
    b.wo = a.wo.template cast<U>();
    b.bq = a.bq.template cast<U>();
    b.bk = a.bk.template cast<U>();
    b.bv = a.bv.template cast<U>();
    b.bo = a.bo.template cast<U>();
    b.ln2_g = a.ln2_g.template cast<U>();
    b.ln2_b = a.ln2_b.template cast<U>();
    b.w1 = a.w1.template cast<U>();
    b.b1 = a.b1.template cast<U>();
    b.w2 = a.w2.template cast<U>();
    b.b2 = a.b2.template cast<U>();
  }
  return o;
}

}  // namespace detail

template <typename U, typename T>
ModelParams<U> cast_params(const ModelParams<T>& p) {
  ModelParams<U> o;
  o.config = p.config;
  o.encoder = detail::cast_encoder<U>(p.encoder);
  o.span_w = p.span_w.template cast<U>();
  o.span_b = p.span_b.template cast<U>();
  return o;
}

template <typename U, typename T>
MaskedLmParams<U> cast_params(const MaskedLmParams<T>& p) {
  MaskedLmParams<U> o;
  o.config = p.config;
  o.encoder = detail::cast_encoder<U>(p.encoder);
  o.out_w = p.out_w.template cast<U>();
  o.out_b = p.out_b.template cast<U>();
  return o;
}

template <typename P>
void check_finite(const P& p, const std::string& what) {
  for_each_tensor(p, [&](const std::string& name, const auto& t, bool) {
    for (Eigen::Index i = 0; i < t.size(); ++i)
      if (!std::isfinite(static_cast<double>(t.data()[i])))
        fail(ErrorCode::kNonFinite, what + ": non-finite value in " + name);
  });
}

}  // namespace dual
