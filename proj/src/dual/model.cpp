// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

#include "dual/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "dual/error.hpp"

namespace dual {
namespace {

constexpr double kInitStd = 0.02;
constexpr double kNormEps = 1e-5;

template <typename T>
T gelu(T x) {
  return T(0.5) * x * (T(1) + std::erf(x * T(M_SQRT1_2)));
}

template <typename T>
T gelu_grad(T x) {
  const T cdf = T(0.5) * (T(1) + std::erf(x * T(M_SQRT1_2)));
  const T pdf = std::exp(T(-0.5) * x * x) * T(0.5 * M_2_SQRTPI * M_SQRT1_2);
  return cdf + x * pdf;
}

template <typename T>
void layer_norm_forward(const Mat<T>& x, const RowVec<T>& g, const RowVec<T>& b, NormCache<T>& c,
                        Mat<T>& y) {
  const Eigen::Index rows = x.rows(), d = x.cols();
  c.xhat.resize(rows, d);
  c.rstd.resize(rows);
  y.resize(rows, d);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const T mean = x.row(r).mean();
    const T var = (x.row(r).array() - mean).square().mean();
    const T rstd = T(1) / std::sqrt(var + T(kNormEps));
    c.rstd(r) = rstd;
    c.xhat.row(r) = (x.row(r).array() - mean) * rstd;
    y.row(r) = c.xhat.row(r).cwiseProduct(g) + b;
  }
}

template <typename T>
void layer_norm_backward(const Mat<T>& dy, const RowVec<T>& g, const NormCache<T>& c, Mat<T>& dx,
                         RowVec<T>& dg, RowVec<T>& db) {
  const Eigen::Index rows = dy.rows(), d = dy.cols();
  dx.resize(rows, d);
  dg += dy.cwiseProduct(c.xhat).colwise().sum();
  db += dy.colwise().sum();
  for (Eigen::Index r = 0; r < rows; ++r) {
    const RowVec<T> dxhat = dy.row(r).cwiseProduct(g);
    const T m1 = dxhat.mean();
    const T m2 = dxhat.cwiseProduct(c.xhat.row(r)).mean();
    dx.row(r) = c.rstd(r) * (dxhat.array() - m1 - c.xhat.row(r).array() * m2).matrix();
  }
}

template <typename T>
void attention_forward(const Mat<T>& q, const Mat<T>& k, const Mat<T>& v,
                       const AttentionPattern& pat, std::uint32_t heads, std::vector<T>& probs,
                       Mat<T>& o) {
  const std::size_t L = static_cast<std::size_t>(q.rows());
  const std::size_t d = static_cast<std::size_t>(q.cols());
  const std::size_t dh = d / heads;
  const T scale = T(1) / std::sqrt(T(dh));
  const std::size_t nnz = pat.cols.size();
  probs.assign(heads * nnz, T(0));
  o.setZero(q.rows(), q.cols());
  for (std::size_t h = 0; h < heads; ++h) {
    T* ph = probs.data() + h * nnz;
    for (std::size_t i = 0; i < L; ++i) {
      const auto cols = pat.row(i);
      T* p = ph + pat.offsets[i];
      const T* qi = q.data() + i * d + h * dh;
      T mx = -std::numeric_limits<T>::infinity();
      for (std::size_t c = 0; c < cols.size(); ++c) {
        const T* kj = k.data() + cols[c] * d + h * dh;
        T s = 0;
        for (std::size_t t = 0; t < dh; ++t) s += qi[t] * kj[t];
        p[c] = s * scale;
        mx = std::max(mx, p[c]);
      }
      T z = 0;
      for (std::size_t c = 0; c < cols.size(); ++c) {
        p[c] = std::exp(p[c] - mx);
        z += p[c];
      }
      T* oi = o.data() + i * d + h * dh;
      for (std::size_t c = 0; c < cols.size(); ++c) {
        p[c] /= z;
        const T* vj = v.data() + cols[c] * d + h * dh;
        for (std::size_t t = 0; t < dh; ++t) oi[t] += p[c] * vj[t];
      }
    }
  }
}

template <typename T>
void attention_backward(const Mat<T>& d_o, const Mat<T>& q, const Mat<T>& k, const Mat<T>& v,
                        const AttentionPattern& pat, std::uint32_t heads,
                        const std::vector<T>& probs, Mat<T>& dq, Mat<T>& dk, Mat<T>& dv) {
  const std::size_t L = static_cast<std::size_t>(q.rows());
  const std::size_t d = static_cast<std::size_t>(q.cols());
  const std::size_t dh = d / heads;
  const T scale = T(1) / std::sqrt(T(dh));
  const std::size_t nnz = pat.cols.size();
  dq.setZero(q.rows(), q.cols());
  dk.setZero(q.rows(), q.cols());
  dv.setZero(q.rows(), q.cols());
  std::vector<T> dp;
  for (std::size_t h = 0; h < heads; ++h) {
    const T* ph = probs.data() + h * nnz;
    for (std::size_t i = 0; i < L; ++i) {
      const auto cols = pat.row(i);
      const T* p = ph + pat.offsets[i];
      const T* doi = d_o.data() + i * d + h * dh;
      dp.resize(cols.size());
      T weighted = 0;
      for (std::size_t c = 0; c < cols.size(); ++c) {
        const std::size_t j = cols[c];
        const T* vj = v.data() + j * d + h * dh;
        T* dvj = dv.data() + j * d + h * dh;
        T s = 0;
        for (std::size_t t = 0; t < dh; ++t) {
          s += doi[t] * vj[t];
          dvj[t] += p[c] * doi[t];
        }
        dp[c] = s;
        weighted += p[c] * s;
      }
      const T* qi = q.data() + i * d + h * dh;
      T* dqi = dq.data() + i * d + h * dh;
      for (std::size_t c = 0; c < cols.size(); ++c) {
        const std::size_t j = cols[c];
        const T ds = p[c] * (dp[c] - weighted) * scale;
        const T* kj = k.data() + j * d + h * dh;
        T* dkj = dk.data() + j * d + h * dh;
        for (std::size_t t = 0; t < dh; ++t) {
          dqi[t] += ds * kj[t];
          dkj[t] += ds * qi[t];
        }
      }
    }
  }
}

template <typename T>
Mat<T> dropout_mask(Eigen::Index rows, Eigen::Index cols, double rate, std::mt19937_64& rng) {
  Mat<T> m(rows, cols);
  std::bernoulli_distribution keep(1.0 - rate);
  const T scale = T(1.0 / (1.0 - rate));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = keep(rng) ? scale : T(0);
  return m;
}

template <typename T>
void init_encoder(const ModelConfig& cfg, std::uint32_t vocab, EncoderWeights<T>& w) {
  const Eigen::Index d = cfg.model_dim, f = cfg.ffn_dim;
  w.tokens.resize(vocab, d);
  w.positions.resize(cfg.max_len, d);
  w.layers.resize(cfg.layers);
  for (auto& L : w.layers) {
    L.ln1_g.resize(d);
    L.ln1_b.resize(d);
    L.wq.resize(d, d);
    L.wk.resize(d, d);
    L.wv.resize(d, d);
    L.wo.resize(d, d);
    L.bq.resize(d);
    L.bk.resize(d);
    L.bv.resize(d);
    L.bo.resize(d);
    L.ln2_g.resize(d);
    L.ln2_b.resize(d);
    L.w1.resize(d, f);
    L.b1.resize(f);
    L.w2.resize(f, d);
    L.b2.resize(d);
  }
  w.lnf_g.resize(d);
  w.lnf_b.resize(d);
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

template <typename P>
void randomize(P& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, kInitStd);
  for_each_tensor(p, [&](const std::string& name, auto& t, bool) {
    using S = typename std::remove_cvref_t<decltype(t)>::Scalar;
    if (ends_with(name, ".g")) {
      t.setOnes();
    } else if (t.rows() == 1 && name.find("embed") == std::string::npos) {
      t.setZero();
    } else {
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = static_cast<S>(gauss(rng));
    }
  });
}

template <typename T>
Mat<T> span_logits(const ModelParams<T>& p, const Mat<T>& h) {
  Mat<T> logits = h * p.span_w.transpose();
  logits.rowwise() += p.span_b;
  return logits;
}

}  // namespace

void ModelConfig::validate() const {
  require(num_units >= 1, ErrorCode::kInvalidArgument, "num_units must be >= 1");
  require(layers >= 1 && model_dim >= 1 && heads >= 1 && ffn_dim >= 1,
          ErrorCode::kInvalidArgument, "layers, model_dim, heads and ffn_dim must be >= 1");
  require(model_dim % heads == 0, ErrorCode::kInvalidArgument,
          "model_dim " + std::to_string(model_dim) + " not divisible by heads " +
              std::to_string(heads));
  require(max_len >= 4, ErrorCode::kInvalidArgument, "max_len must be >= 4");
  require(max_len >= local_window, ErrorCode::kInvalidArgument, "max_len must be >= local_window");
  require(dropout >= 0.0 && dropout < 1.0, ErrorCode::kInvalidArgument, "dropout must lie in [0, 1)");
}

void validate(const ModelInput& in, const ModelConfig& cfg) {
  const std::size_t L = in.tokens.size();
  require(L >= 1, ErrorCode::kInvalidArgument, "empty model input");
  if (L > cfg.max_len)
    fail(ErrorCode::kOutOfRange, "input of " + std::to_string(L) + " tokens exceeds max_len " +
                                     std::to_string(cfg.max_len));
  require(in.passage_mask.size() == L && in.global_mask.size() == L, ErrorCode::kInvalidArgument,
          "mask lengths differ from token count");
  for (std::size_t i = 0; i < L; ++i) {
    if (in.tokens[i] >= cfg.vocab_size())
      fail(ErrorCode::kOutOfRange, "token " + std::to_string(in.tokens[i]) + " at position " +
                                       std::to_string(i) + " exceeds vocabulary");
    require(!(in.passage_mask[i] && in.global_mask[i]), ErrorCode::kInvalidArgument,
            "position " + std::to_string(i) + " is both passage and global");
  }
  if (in.target) {
    const auto& t = *in.target;
    require(t.start_idx <= t.end_idx && t.end_idx < L && in.passage_mask[t.start_idx] &&
                in.passage_mask[t.end_idx],
            ErrorCode::kOutOfRange, "target span lies outside the passage");
  }
}

AttentionPattern make_pattern(std::span<const std::uint8_t> global_mask, std::uint32_t window) {
  const std::size_t L = global_mask.size();
  std::vector<std::uint32_t> globals;
  for (std::size_t i = 0; i < L; ++i)
    if (global_mask[i]) globals.push_back(static_cast<std::uint32_t>(i));

  AttentionPattern p;
  p.offsets.reserve(L + 1);
  p.offsets.push_back(0);
  for (std::size_t i = 0; i < L; ++i) {
    if (global_mask[i]) {
      for (std::size_t j = 0; j < L; ++j) p.cols.push_back(static_cast<std::uint32_t>(j));
    } else {
      const std::size_t lo = i > window ? i - window : 0;
      const std::size_t hi = std::min(L - 1, i + window);
      auto g = globals.begin();
      for (; g != globals.end() && *g < lo; ++g) p.cols.push_back(*g);
      for (std::size_t j = lo; j <= hi; ++j) p.cols.push_back(static_cast<std::uint32_t>(j));
      for (; g != globals.end(); ++g)
        if (*g > hi) p.cols.push_back(*g);
    }
    p.offsets.push_back(static_cast<std::uint32_t>(p.cols.size()));
  }
  return p;
}

template <typename T>
ModelParams<T> init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  ModelParams<T> p;
  p.config = cfg;
  init_encoder(cfg, cfg.vocab_size(), p.encoder);
  p.span_w.resize(2, cfg.model_dim);
  p.span_b.resize(2);
  randomize(p, seed);
  return p;
}

template <typename T>
MaskedLmParams<T> init_masked_lm(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  MaskedLmParams<T> p;
  p.config = cfg;
  init_encoder(cfg, cfg.vocab_size(), p.encoder);
  p.out_w.resize(cfg.vocab_size(), cfg.model_dim);
  p.out_b.resize(cfg.vocab_size());
  randomize(p, seed);
  return p;
}

EmbeddingStrategy parse_strategy(const std::string& name) {
  if (name == "most_frequent") return EmbeddingStrategy::kMostFrequent;
  if (name == "least_frequent") return EmbeddingStrategy::kLeastFrequent;
  if (name == "random") return EmbeddingStrategy::kRandom;
  if (name == "re_init") return EmbeddingStrategy::kReInit;
  if (name == "scratch") return EmbeddingStrategy::kScratch;
  fail(ErrorCode::kInvalidArgument, "unknown embedding strategy '" + name + "'");
}

std::string to_string(EmbeddingStrategy s) {
  switch (s) {
    case EmbeddingStrategy::kMostFrequent: return "most_frequent";
    case EmbeddingStrategy::kLeastFrequent: return "least_frequent";
    case EmbeddingStrategy::kRandom: return "random";
    case EmbeddingStrategy::kReInit: return "re_init";
    case EmbeddingStrategy::kScratch: return "scratch";
  }
  return "unknown";
}

EmbeddingAssignment assign_embeddings(const Mat<float>& donor,
                                      std::span<const std::uint32_t> freq_ranking,
                                      EmbeddingStrategy strategy, std::uint32_t num_units,
                                      std::uint64_t seed) {
  EmbeddingAssignment a;
  std::mt19937_64 rng(seed);
  const auto V = static_cast<std::uint32_t>(donor.rows());
  switch (strategy) {
    case EmbeddingStrategy::kScratch:
      a.scratch = true;
      return a;
    case EmbeddingStrategy::kReInit: {
      std::normal_distribution<double> gauss(0.0, kInitStd);
      a.table.resize(num_units, donor.cols());
      for (Eigen::Index i = 0; i < a.table.size(); ++i)
        a.table.data()[i] = static_cast<float>(gauss(rng));
      return a;
    }
    default:
      break;
  }

  if (V < num_units)
    fail(ErrorCode::kInvalidArgument, "donor vocabulary of " + std::to_string(V) +
                                          " rows cannot cover " + std::to_string(num_units) +
                                          " units");
  std::vector<std::uint32_t> pool;
  if (strategy == EmbeddingStrategy::kRandom) {
    pool.resize(V);
    std::iota(pool.begin(), pool.end(), 0u);
    std::shuffle(pool.begin(), pool.end(), rng);
    pool.resize(num_units);
  } else {
    require(freq_ranking.size() >= num_units, ErrorCode::kInvalidArgument,
            "frequency ranking shorter than the unit count");
    for (std::uint32_t r : freq_ranking)
      require(r < V, ErrorCode::kOutOfRange, "frequency ranking names row " + std::to_string(r) +
                                                 " beyond donor vocabulary");
    if (strategy == EmbeddingStrategy::kMostFrequent)
      pool.assign(freq_ranking.begin(), freq_ranking.begin() + num_units);
    else
      pool.assign(freq_ranking.end() - num_units, freq_ranking.end());
    std::shuffle(pool.begin(), pool.end(), rng);
  }
  a.donor_rows = pool;
  a.table.resize(num_units, donor.cols());
  for (std::uint32_t u = 0; u < num_units; ++u) a.table.row(u) = donor.row(pool[u]);
  return a;
}

ModelParams<float> build_model(const ModelConfig& cfg, const MaskedLmParams<float>* donor,
                               const EmbeddingAssignment& assignment, std::uint64_t seed) {
  ModelParams<float> p = init_model<float>(cfg, seed);
  if (assignment.scratch || donor == nullptr) return p;

  const ModelConfig& dc = donor->config;
  require(dc.model_dim == cfg.model_dim && dc.layers == cfg.layers && dc.heads == cfg.heads &&
              dc.ffn_dim == cfg.ffn_dim && dc.max_len == cfg.max_len,
          ErrorCode::kDimMismatch, "donor architecture differs from the target configuration");
  require(assignment.table.rows() == cfg.num_units && assignment.table.cols() == cfg.model_dim,
          ErrorCode::kDimMismatch, "embedding assignment has the wrong shape");

  p.encoder.positions = donor->encoder.positions;
  p.encoder.layers = donor->encoder.layers;
  p.encoder.lnf_g = donor->encoder.lnf_g;
  p.encoder.lnf_b = donor->encoder.lnf_b;
  p.encoder.tokens.topRows(cfg.num_units) = assignment.table;
  for (std::uint32_t s = 0; s < 4; ++s)
    p.encoder.tokens.row(cfg.num_units + s) = donor->encoder.tokens.row(dc.num_units + s);
  return p;
}

template <typename T>
void encoder_forward(const ModelConfig& cfg, const EncoderWeights<T>& w,
                     std::span<const TokenId> tokens, std::span<const std::uint8_t> global_mask,
                     EncoderCache<T>& cache, std::mt19937_64* rng) {
  const Eigen::Index L = static_cast<Eigen::Index>(tokens.size());
  require(L >= 1 && tokens.size() <= cfg.max_len, ErrorCode::kOutOfRange,
          "sequence of " + std::to_string(tokens.size()) + " tokens exceeds max_len " +
              std::to_string(cfg.max_len));
  const bool drop = rng != nullptr && cfg.dropout > 0.0;
  cache.tokens.assign(tokens.begin(), tokens.end());
  cache.pattern = make_pattern(global_mask, cfg.local_window);
  cache.layers.resize(w.layers.size());

  Mat<T> x(L, cfg.model_dim);
  for (Eigen::Index i = 0; i < L; ++i) {
    require(tokens[i] < w.tokens.rows(), ErrorCode::kOutOfRange, "token id beyond vocabulary");
    x.row(i) = w.tokens.row(tokens[i]) + w.positions.row(i);
  }

  for (std::size_t l = 0; l < w.layers.size(); ++l) {
    const auto& W = w.layers[l];
    auto& c = cache.layers[l];
    c.x_in = x;
    layer_norm_forward(x, W.ln1_g, W.ln1_b, c.ln1, c.a);
    c.q.noalias() = c.a * W.wq;
    c.q.rowwise() += W.bq;
    c.k.noalias() = c.a * W.wk;
    c.k.rowwise() += W.bk;
    c.v.noalias() = c.a * W.wv;
    c.v.rowwise() += W.bv;
    attention_forward(c.q, c.k, c.v, cache.pattern, cfg.heads, c.probs, c.o);
    c.att.noalias() = c.o * W.wo;
    c.att.rowwise() += W.bo;
    if (drop) {
      c.drop1 = dropout_mask<T>(L, cfg.model_dim, cfg.dropout, *rng);
      x += c.att.cwiseProduct(c.drop1);
    } else {
      c.drop1.resize(0, 0);
      x += c.att;
    }
    c.x_mid = x;
    layer_norm_forward(x, W.ln2_g, W.ln2_b, c.ln2, c.b);
    c.hpre.noalias() = c.b * W.w1;
    c.hpre.rowwise() += W.b1;
    c.g = c.hpre.unaryExpr([](T v) { return gelu(v); });
    c.f.noalias() = c.g * W.w2;
    c.f.rowwise() += W.b2;
    if (drop) {
      c.drop2 = dropout_mask<T>(L, cfg.model_dim, cfg.dropout, *rng);
      x += c.f.cwiseProduct(c.drop2);
    } else {
      c.drop2.resize(0, 0);
      x += c.f;
    }
  }
  cache.x_final = x;
  layer_norm_forward(x, w.lnf_g, w.lnf_b, cache.lnf, cache.h);
}

template <typename T>
void encoder_backward(const ModelConfig& cfg, const EncoderWeights<T>& w,
                      const EncoderCache<T>& cache, const Mat<T>& dh, EncoderWeights<T>& grad) {
  Mat<T> dx, tmp;
  layer_norm_backward(dh, w.lnf_g, cache.lnf, dx, grad.lnf_g, grad.lnf_b);

  Mat<T> df, dg, dhpre, db, datt, d_o, dq, dk, dv, da;
  for (std::size_t l = w.layers.size(); l-- > 0;) {
    const auto& W = w.layers[l];
    const auto& c = cache.layers[l];
    auto& G = grad.layers[l];

    df = c.drop2.size() ? Mat<T>(dx.cwiseProduct(c.drop2)) : dx;
    G.w2.noalias() += c.g.transpose() * df;
    G.b2 += df.colwise().sum();
    dg.noalias() = df * W.w2.transpose();
    dhpre = dg.cwiseProduct(c.hpre.unaryExpr([](T v) { return gelu_grad(v); }));
    G.w1.noalias() += c.b.transpose() * dhpre;
    G.b1 += dhpre.colwise().sum();
    db.noalias() = dhpre * W.w1.transpose();
    layer_norm_backward(db, W.ln2_g, c.ln2, tmp, G.ln2_g, G.ln2_b);
    dx += tmp;

    datt = c.drop1.size() ? Mat<T>(dx.cwiseProduct(c.drop1)) : dx;
    G.wo.noalias() += c.o.transpose() * datt;
    G.bo += datt.colwise().sum();
    d_o.noalias() = datt * W.wo.transpose();
    attention_backward(d_o, c.q, c.k, c.v, cache.pattern, cfg.heads, c.probs, dq, dk, dv);
    G.wq.noalias() += c.a.transpose() * dq;
    G.bq += dq.colwise().sum();
    G.wk.noalias() += c.a.transpose() * dk;
    G.bk += dk.colwise().sum();
    G.wv.noalias() += c.a.transpose() * dv;
    G.bv += dv.colwise().sum();
    da.noalias() = dq * W.wq.transpose();
    da.noalias() += dk * W.wk.transpose();
    da.noalias() += dv * W.wv.transpose();
    layer_norm_backward(da, W.ln1_g, c.ln1, tmp, G.ln1_g, G.ln1_b);
    dx += tmp;
  }

  for (Eigen::Index i = 0; i < dx.rows(); ++i) {
    grad.tokens.row(cache.tokens[i]) += dx.row(i);
    grad.positions.row(i) += dx.row(i);
  }
}

template <typename T>
SpanLogits<T> forward(const ModelParams<T>& params, const ModelInput& input) {
  validate(input, params.config);
  EncoderCache<T> cache;
  encoder_forward(params.config, params.encoder, std::span<const TokenId>(input.tokens),
                  std::span<const std::uint8_t>(input.global_mask), cache);
  const Mat<T> logits = span_logits(params, cache.h);
  SpanLogits<T> out;
  out.start.resize(input.size());
  out.end.resize(input.size());
  for (std::size_t i = 0; i < input.size(); ++i) {
    out.start[i] = logits(static_cast<Eigen::Index>(i), 0);
    out.end[i] = logits(static_cast<Eigen::Index>(i), 1);
  }
  return out;
}

template <typename T>
T span_loss(std::span<const T> start_logits, std::span<const T> end_logits,
            const IndexSpan& target, std::span<const std::uint8_t> passage_mask,
            std::vector<T>* d_start, std::vector<T>* d_end) {
  const std::size_t L = passage_mask.size();
  require(start_logits.size() == L && end_logits.size() == L, ErrorCode::kInvalidArgument,
          "logit and mask lengths differ");
  if (target.start_idx >= L || target.end_idx >= L || !passage_mask[target.start_idx] ||
      !passage_mask[target.end_idx] || target.start_idx > target.end_idx)
    fail(ErrorCode::kOutOfRange, "target span lies outside the passage");

  auto track = [&](std::span<const T> logits, std::uint32_t gold, std::vector<T>* d) -> T {
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t i = 0; i < L; ++i)
      if (passage_mask[i]) mx = std::max(mx, logits[i]);
    T z = 0;
    for (std::size_t i = 0; i < L; ++i)
      if (passage_mask[i]) z += std::exp(logits[i] - mx);
    const T log_z = mx + std::log(z);
    if (d) {
      d->assign(L, T(0));
      for (std::size_t i = 0; i < L; ++i)
        if (passage_mask[i]) (*d)[i] = std::exp(logits[i] - log_z);
      (*d)[gold] -= T(1);
    }
    return log_z - logits[gold];
  };
  return track(start_logits, target.start_idx, d_start) + track(end_logits, target.end_idx, d_end);
}

template <typename T>
IndexSpan decode_span(std::span<const T> start_logits, std::span<const T> end_logits,
                      std::span<const std::uint8_t> passage_mask, std::uint32_t max_answer_len) {
  const std::size_t L = passage_mask.size();
  require(start_logits.size() == L && end_logits.size() == L, ErrorCode::kInvalidArgument,
          "logit and mask lengths differ");
  require(max_answer_len >= 1, ErrorCode::kInvalidArgument, "max_answer_len must be >= 1");
  bool found = false;
  IndexSpan best;
  T best_score = 0;
  for (std::size_t s = 0; s < L; ++s) {
    if (!passage_mask[s]) continue;
    const std::size_t last = std::min(L - 1, s + max_answer_len - 1);
    for (std::size_t e = s; e <= last; ++e) {
      if (!passage_mask[e]) continue;
      const T score = start_logits[s] + end_logits[e];
      if (!found || score > best_score) {
        found = true;
        best_score = score;
        best = {static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(e)};
      }
    }
  }
  require(found, ErrorCode::kInvalidArgument, "input has no passage positions");
  return best;
}

template <typename T>
T loss_and_gradient(const ModelParams<T>& params, const ModelInput& input, ModelParams<T>& grad,
                    std::mt19937_64* rng) {
  validate(input, params.config);
  require(input.target.has_value(), ErrorCode::kInvalidArgument, "example has no target span");
  EncoderCache<T> cache;
  encoder_forward(params.config, params.encoder, std::span<const TokenId>(input.tokens),
                  std::span<const std::uint8_t>(input.global_mask), cache, rng);
  const Mat<T> logits = span_logits(params, cache.h);
  const Eigen::Index L = logits.rows();
  std::vector<T> s(L), e(L), ds, de;
  for (Eigen::Index i = 0; i < L; ++i) {
    s[i] = logits(i, 0);
    e[i] = logits(i, 1);
  }
  const T value = span_loss(std::span<const T>(s), std::span<const T>(e), *input.target,
                            std::span<const std::uint8_t>(input.passage_mask), &ds, &de);
  if (!std::isfinite(static_cast<double>(value)))
    fail(ErrorCode::kNonFinite, "span loss is not finite");

  Mat<T> dlogits(L, 2);
  for (Eigen::Index i = 0; i < L; ++i) {
    dlogits(i, 0) = ds[i];
    dlogits(i, 1) = de[i];
  }
  grad.span_w.noalias() += dlogits.transpose() * cache.h;
  grad.span_b += dlogits.colwise().sum();
  const Mat<T> dh = dlogits * params.span_w;
  encoder_backward(params.config, params.encoder, cache, dh, grad.encoder);
  return value;
}

template <typename T>
ModelParams<T> backward(const ModelParams<T>& params, const ModelInput& input) {
  ModelParams<T> grad = zeros_like(params);
  loss_and_gradient(params, input, grad, nullptr);
  return grad;
}

template <typename T>
T loss(const ModelParams<T>& params, const ModelInput& input) {
  require(input.target.has_value(), ErrorCode::kInvalidArgument, "example has no target span");
  const SpanLogits<T> out = forward(params, input);
  return span_loss(std::span<const T>(out.start), std::span<const T>(out.end), *input.target,
                   std::span<const std::uint8_t>(input.passage_mask));
}

template <typename T>
T masked_lm_loss(const MaskedLmParams<T>& params, const MaskedExample& ex,
                 MaskedLmParams<T>* grad, std::mt19937_64* rng) {
  validate(ex.input, params.config);
  require(!ex.targets.empty(), ErrorCode::kInvalidArgument, "masked example has no targets");
  EncoderCache<T> cache;
  encoder_forward(params.config, params.encoder, std::span<const TokenId>(ex.input.tokens),
                  std::span<const std::uint8_t>(ex.input.global_mask), cache, rng);
  const T inv_n = T(1) / static_cast<T>(ex.targets.size());
  Mat<T> dh;
  if (grad) dh.setZero(cache.h.rows(), cache.h.cols());
  T total = 0;
  for (const auto& [pos, tok] : ex.targets) {
    require(pos < ex.input.size() && tok < params.config.vocab_size(), ErrorCode::kOutOfRange,
            "masked target out of range");
    RowVec<T> logits = cache.h.row(pos) * params.out_w.transpose() + params.out_b;
    const T mx = logits.maxCoeff();
    const T log_z = mx + std::log((logits.array() - mx).exp().sum());
    total += log_z - logits(tok);
    if (grad) {
      RowVec<T> dl = (logits.array() - log_z).exp().matrix();
      dl(tok) -= T(1);
      dl *= inv_n;
      grad->out_w.noalias() += dl.transpose() * cache.h.row(pos);
      grad->out_b += dl;
      dh.row(pos).noalias() += dl * params.out_w;
    }
  }
  const T value = total * inv_n;
  if (!std::isfinite(static_cast<double>(value)))
    fail(ErrorCode::kNonFinite, "masked-unit loss is not finite");
  if (grad) encoder_backward(params.config, params.encoder, cache, dh, grad->encoder);
  return value;
}

#define DUAL_INSTANTIATE(T)                                                                     \
  template ModelParams<T> init_model<T>(const ModelConfig&, std::uint64_t);                      \
  template MaskedLmParams<T> init_masked_lm<T>(const ModelConfig&, std::uint64_t);               \
  template void encoder_forward<T>(const ModelConfig&, const EncoderWeights<T>&,                 \
                                   std::span<const TokenId>, std::span<const std::uint8_t>,      \
                                   EncoderCache<T>&, std::mt19937_64*);                          \
  template void encoder_backward<T>(const ModelConfig&, const EncoderWeights<T>&,                \
                                    const EncoderCache<T>&, const Mat<T>&, EncoderWeights<T>&);  \
  template SpanLogits<T> forward<T>(const ModelParams<T>&, const ModelInput&);                   \
  template T span_loss<T>(std::span<const T>, std::span<const T>, const IndexSpan&,              \
                          std::span<const std::uint8_t>, std::vector<T>*, std::vector<T>*);      \
  template IndexSpan decode_span<T>(std::span<const T>, std::span<const T>,                      \
                                    std::span<const std::uint8_t>, std::uint32_t);               \
  template T loss_and_gradient<T>(const ModelParams<T>&, const ModelInput&, ModelParams<T>&,     \
                                  std::mt19937_64*);                                             \
  template ModelParams<T> backward<T>(const ModelParams<T>&, const ModelInput&);                 \
  template T loss<T>(const ModelParams<T>&, const ModelInput&);                                  \
  template T masked_lm_loss<T>(const MaskedLmParams<T>&, const MaskedExample&,                   \
                               MaskedLmParams<T>*, std::mt19937_64*);

DUAL_INSTANTIATE(float)
DUAL_INSTANTIATE(double)

#undef DUAL_INSTANTIATE

}  // namespace dual
