// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

// Transformer encoder over discrete-unit sequences with local-window plus
// global attention, a start/end span head, and a masked-unit prediction head
// used to pretrain donor encoders.
//
// Layout of a question-answering input:
//   [BOS] question units [SEP] passage units [EOS]
// [BOS] and the question units carry global attention. Every other position
// attends to positions within +-local_window and to all global positions.
//
// The encoder is pre-LayerNorm:
//   x = x + Dropout(Attn(LN1(x)));  x = x + Dropout(FFN(LN2(x)));  h = LNf(x)
// with FFN(y) = GELU(y W1 + b1) W2 + b2 and exact (erf) GELU.
//
// Everything is templated on the scalar type: float for training and
// inference, double for finite-difference gradient checks.

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "dual/unitizer.hpp"

namespace dual {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

using TokenId = std::uint32_t;

struct ModelConfig {
  std::uint32_t num_units = 64;  // K; special tokens follow
  std::uint32_t max_len = 512;
  std::uint32_t layers = 4;
  std::uint32_t model_dim = 128;
  std::uint32_t heads = 4;
  std::uint32_t ffn_dim = 512;
  std::uint32_t local_window = 32;  // one-sided
  double dropout = 0.0;

  std::uint32_t vocab_size() const { return num_units + 4; }
  TokenId bos() const { return num_units; }
  TokenId sep() const { return num_units + 1; }
  TokenId eos() const { return num_units + 2; }
  TokenId mask() const { return num_units + 3; }

  // Throws kInvalidArgument if the configuration is inconsistent.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct ModelInput {
  std::vector<TokenId> tokens;
  std::vector<std::uint8_t> passage_mask;
  std::vector<std::uint8_t> global_mask;
  std::optional<IndexSpan> target;  // token positions

  std::size_t size() const { return tokens.size(); }
};

void validate(const ModelInput& in, const ModelConfig& cfg);

template <typename T>
struct LayerWeights {
  RowVec<T> ln1_g, ln1_b;
  Mat<T> wq, wk, wv, wo;  // model_dim x model_dim, applied as x * W
  RowVec<T> bq, bk, bv, bo;
  RowVec<T> ln2_g, ln2_b;
  Mat<T> w1;  // model_dim x ffn_dim
  RowVec<T> b1;
  Mat<T> w2;  // ffn_dim x model_dim
  RowVec<T> b2;
};

template <typename T>
struct EncoderWeights {
  Mat<T> tokens;     // vocab_size x model_dim
  Mat<T> positions;  // max_len x model_dim
  std::vector<LayerWeights<T>> layers;
  RowVec<T> lnf_g, lnf_b;
};

// Span-prediction model: encoder plus a 2 x model_dim start/end projection.
template <typename T>
struct ModelParams {
  ModelConfig config;
  EncoderWeights<T> encoder;
  Mat<T> span_w;    // 2 x model_dim; row 0 start, row 1 end
  RowVec<T> span_b;  // 2
};

// Donor model: encoder plus an output projection over the vocabulary.
template <typename T>
struct MaskedLmParams {
  ModelConfig config;
  EncoderWeights<T> encoder;
  Mat<T> out_w;    // vocab_size x model_dim
  RowVec<T> out_b;  // vocab_size
};

// Visits every tensor as f(name, eigen_object, decays) where `decays` marks
// the matrices that receive weight decay (not biases, norms or embeddings).
template <typename W, typename F>
void for_each_tensor_encoder(W& enc, F&& f) {
  f(std::string("embed.tokens"), enc.tokens, false);
  f(std::string("embed.positions"), enc.positions, false);
  for (std::size_t l = 0; l < enc.layers.size(); ++l) {
    auto& L = enc.layers[l];
    const std::string p = "layers." + std::to_string(l) + ".";
    f(p + "ln1.g", L.ln1_g, false);
    f(p + "ln1.b", L.ln1_b, false);
    f(p + "attn.wq", L.wq, true);
    f(p + "attn.bq", L.bq, false);
    f(p + "attn.wk", L.wk, true);
    f(p + "attn.bk", L.bk, false);
    f(p + "attn.wv", L.wv, true);
    f(p + "attn.bv", L.bv, false);
    f(p + "attn.wo", L.wo, true);
    f(p + "attn.bo", L.bo, false);
    f(p + "ln2.g", L.ln2_g, false);
    f(p + "ln2.b", L.ln2_b, false);
    f(p + "ffn.w1", L.w1, true);
    f(p + "ffn.b1", L.b1, false);
    f(p + "ffn.w2", L.w2, true);
    f(p + "ffn.b2", L.b2, false);
  }
  f(std::string("final_ln.g"), enc.lnf_g, false);
  f(std::string("final_ln.b"), enc.lnf_b, false);
}

template <typename P, typename F>
void for_each_tensor(P& p, F&& f) {
  for_each_tensor_encoder(p.encoder, f);
  if constexpr (requires { p.span_w; }) {
    f(std::string("span_head.w"), p.span_w, true);
    f(std::string("span_head.b"), p.span_b, false);
  } else {
    f(std::string("mlm_head.w"), p.out_w, true);
    f(std::string("mlm_head.b"), p.out_b, false);
  }
}

template <typename P>
std::size_t parameter_count(const P& p) {
  std::size_t n = 0;
  for_each_tensor(p, [&](const std::string&, const auto& t, bool) { n += static_cast<std::size_t>(t.size()); });
  return n;
}

// Same shapes, all zeros; used as gradient accumulators.
template <typename P>
P zeros_like(const P& p) {
  P z = p;
  for_each_tensor(z, [](const std::string&, auto& t, bool) { t.setZero(); });
  return z;
}

template <typename P>
auto tensor_spans(P& p) {
  using S = typename std::remove_cvref_t<decltype(p.encoder.lnf_g)>::Scalar;
  using Elem = std::conditional_t<std::is_const_v<P>, const S, S>;
  std::vector<std::span<Elem>> out;
  for_each_tensor(p, [&](const std::string&, auto& t, bool) {
    out.emplace_back(t.data(), static_cast<std::size_t>(t.size()));
  });
  return out;
}

template <typename P>
void add_into(P& acc, const P& g) {
  auto dst = tensor_spans(acc);
  auto src = tensor_spans(g);
  for (std::size_t i = 0; i < dst.size(); ++i)
    for (std::size_t j = 0; j < dst[i].size(); ++j) dst[i][j] += src[i][j];
}

// Same parameters at another scalar precision.
template <typename U, typename T>
ModelParams<U> cast_params(const ModelParams<T>& p);
template <typename U, typename T>
MaskedLmParams<U> cast_params(const MaskedLmParams<T>& p);

// Random initialisation: N(0, 0.02^2) weights, zero biases, unit norms.
template <typename T>
ModelParams<T> init_model(const ModelConfig& cfg, std::uint64_t seed);
template <typename T>
MaskedLmParams<T> init_masked_lm(const ModelConfig& cfg, std::uint64_t seed);

enum class EmbeddingStrategy { kMostFrequent, kLeastFrequent, kRandom, kReInit, kScratch };

EmbeddingStrategy parse_strategy(const std::string& name);
std::string to_string(EmbeddingStrategy s);

struct EmbeddingAssignment {
  // Donor row used for each unit id (empty for re_init / scratch).
  std::vector<std::uint32_t> donor_rows;
  Mat<float> table;  // num_units x model_dim (empty for scratch)
  bool scratch = false;
};

// Maps the K unit ids onto donor embedding rows. `donor` is the donor's
// content vocabulary (V x model_dim, special tokens excluded) and
// `freq_ranking` lists donor rows most frequent first.
EmbeddingAssignment assign_embeddings(const Mat<float>& donor,
                                      std::span<const std::uint32_t> freq_ranking,
                                      EmbeddingStrategy strategy, std::uint32_t num_units,
                                      std::uint64_t seed);

// Builds a span model for `cfg`. With a donor, the encoder body, position
// table and special-token rows are copied and unit rows follow `assignment`;
// the span head is always freshly initialised.
ModelParams<float> build_model(const ModelConfig& cfg, const MaskedLmParams<float>* donor,
                               const EmbeddingAssignment& assignment, std::uint64_t seed);

// Sparse attention pattern: row i lists the key positions it may attend to,
// in increasing order.
struct AttentionPattern {
  std::vector<std::uint32_t> offsets;  // size L+1
  std::vector<std::uint32_t> cols;
  std::size_t rows() const { return offsets.size() - 1; }
  std::span<const std::uint32_t> row(std::size_t i) const {
    return {cols.data() + offsets[i], offsets[i + 1] - offsets[i]};
  }
};

AttentionPattern make_pattern(std::span<const std::uint8_t> global_mask, std::uint32_t window);

template <typename T>
struct NormCache {
  Mat<T> xhat;
  Eigen::Matrix<T, Eigen::Dynamic, 1> rstd;
};

template <typename T>
struct LayerCache {
  Mat<T> x_in;
  NormCache<T> ln1;
  Mat<T> a, q, k, v;
  std::vector<T> probs;  // heads x nnz(pattern)
  Mat<T> o, att;
  Mat<T> drop1;
  Mat<T> x_mid;
  NormCache<T> ln2;
  Mat<T> b, hpre, g, f;
  Mat<T> drop2;
};

template <typename T>
struct EncoderCache {
  std::vector<TokenId> tokens;
  AttentionPattern pattern;
  std::vector<LayerCache<T>> layers;
  Mat<T> x_final;
  NormCache<T> lnf;
  Mat<T> h;  // L x model_dim final hidden states
};

// Dropout is applied only when `rng` is non-null and cfg.dropout > 0.
template <typename T>
void encoder_forward(const ModelConfig& cfg, const EncoderWeights<T>& w,
                     std::span<const TokenId> tokens, std::span<const std::uint8_t> global_mask,
                     EncoderCache<T>& cache, std::mt19937_64* rng = nullptr);

// Accumulates parameter gradients given dL/dh.
template <typename T>
void encoder_backward(const ModelConfig& cfg, const EncoderWeights<T>& w,
                      const EncoderCache<T>& cache, const Mat<T>& dh, EncoderWeights<T>& grad);

template <typename T>
struct SpanLogits {
  std::vector<T> start;
  std::vector<T> end;
};

// Evaluation-mode forward pass.
template <typename T>
SpanLogits<T> forward(const ModelParams<T>& params, const ModelInput& input);

// -log softmax(start over passage)[target.start] - log softmax(end over passage)[target.end].
// When non-null, d_start/d_end receive dLoss/dlogits (zero off the passage).
template <typename T>
T span_loss(std::span<const T> start_logits, std::span<const T> end_logits, const IndexSpan& target,
            std::span<const std::uint8_t> passage_mask, std::vector<T>* d_start = nullptr,
            std::vector<T>* d_end = nullptr);

// Highest start+end score over passage pairs s <= e <= s + max_answer_len - 1;
// ties resolve to the smallest s, then the smallest e.
template <typename T>
IndexSpan decode_span(std::span<const T> start_logits, std::span<const T> end_logits,
                      std::span<const std::uint8_t> passage_mask, std::uint32_t max_answer_len);

// Span loss for input.target and its gradient, accumulated into `grad`.
// Returns the loss. Dropout is active when `rng` is non-null.
template <typename T>
T loss_and_gradient(const ModelParams<T>& params, const ModelInput& input, ModelParams<T>& grad,
                    std::mt19937_64* rng = nullptr);

// Analytic gradient of the span loss for input.target, evaluation mode.
template <typename T>
ModelParams<T> backward(const ModelParams<T>& params, const ModelInput& input);

// Span loss only, evaluation mode.
template <typename T>
T loss(const ModelParams<T>& params, const ModelInput& input);

// Masked-unit prediction: mean cross entropy at the positions listed in
// `targets` (position, original token). Accumulates into grad when non-null.
struct MaskedExample {
  ModelInput input;  // tokens already masked
  std::vector<std::pair<std::uint32_t, TokenId>> targets;
};

template <typename T>
T masked_lm_loss(const MaskedLmParams<T>& params, const MaskedExample& ex,
                 MaskedLmParams<T>* grad, std::mt19937_64* rng = nullptr);

// Throws kNonFinite if any parameter is NaN/Inf.
template <typename P>
void check_finite(const P& p, const std::string& what);

}  // namespace dual

#include "dual/model_inl.hpp"
