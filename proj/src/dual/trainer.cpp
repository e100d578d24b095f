// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

#include "dual/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dual/binio.hpp"
#include "dual/checkpoint.hpp"
#include "dual/error.hpp"
#include "dual/parallel.hpp"

namespace dual {
namespace {

std::mt19937_64 derived_rng(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
  return std::mt19937_64(seq);
}

// Example order: a fresh seeded permutation per epoch, consumed batch by batch.
class BatchSchedule {
 public:
  BatchSchedule(std::size_t n, std::uint64_t seed) : n_(n), seed_(seed) {}

  std::vector<std::size_t> batch(std::uint32_t step, std::uint32_t batch_size) {
    std::vector<std::size_t> out(batch_size);
    const std::uint64_t base = static_cast<std::uint64_t>(step - 1) * batch_size;
    for (std::uint32_t i = 0; i < batch_size; ++i) {
      const std::uint64_t pos = base + i;
      const std::uint64_t epoch = pos / n_;
      if (epoch != epoch_ || perm_.empty()) {
        perm_.resize(n_);
        std::iota(perm_.begin(), perm_.end(), std::size_t{0});
        auto rng = derived_rng(seed_, 0x5eed, epoch);
        std::shuffle(perm_.begin(), perm_.end(), rng);
        epoch_ = epoch;
      }
      out[i] = perm_[pos % n_];
    }
    return out;
  }

 private:
  std::size_t n_;
  std::uint64_t seed_;
  std::uint64_t epoch_ = 0;
  std::vector<std::size_t> perm_;
};

template <typename P>
void scale(P& p, float factor) {
  for (auto s : tensor_spans(p))
    for (auto& x : s) x *= factor;
}

template <typename P>
double global_norm(const P& p) {
  double sq = 0.0;
  for (auto s : tensor_spans(p))
    for (float x : s) sq += static_cast<double>(x) * x;
  return std::sqrt(sq);
}

template <typename P>
std::vector<bool> decay_flags(const P& p) {
  std::vector<bool> flags;
  for_each_tensor(p, [&](const std::string&, const auto&, bool decays) { flags.push_back(decays); });
  return flags;
}

template <typename P, typename GradFn>
TrainResult<P> run(TrainState<P> st, std::size_t n, const TrainConfig& cfg,
                   const TrainHooks<P>& hooks, GradFn&& example_grad) {
  cfg.validate();
  require(n > 0, ErrorCode::kInvalidArgument, "training set is empty");

  auto params = tensor_spans(st.params);
  const auto decays = decay_flags(st.params);
  if (st.adam_m.empty()) {
    for (auto s : params) {
      st.adam_m.emplace_back(s.size(), 0.0f);
      st.adam_v.emplace_back(s.size(), 0.0f);
    }
  }
  require(st.adam_m.size() == params.size() && st.adam_v.size() == params.size(),
          ErrorCode::kInvalidArgument, "optimiser state does not match the model");

  BatchSchedule schedule(n, cfg.seed);
  const std::uint32_t B = cfg.batch_size;
  std::vector<P> slots(B, zeros_like(st.params));
  std::vector<double> losses(B, 0.0);
  P total = zeros_like(st.params);

  TrainResult<P> result;
  while (st.step < cfg.total_steps) {
    if (hooks.stop_after && st.step >= *hooks.stop_after) break;
    const std::uint32_t step = st.step + 1;
    const auto batch = schedule.batch(step, B);

    parallel_for(B, cfg.threads, [&](std::size_t i) {
      for (auto s : tensor_spans(slots[i])) std::fill(s.begin(), s.end(), 0.0f);
      auto rng = derived_rng(cfg.seed, step, i);
      losses[i] = example_grad(st.params, batch[i], slots[i], rng);
    });

    // Reduce in example order so the sum is independent of worker count.
    for (auto s : tensor_spans(total)) std::fill(s.begin(), s.end(), 0.0f);
    double mean_loss = 0.0;
    for (std::uint32_t i = 0; i < B; ++i) {
      add_into(total, slots[i]);
      mean_loss += losses[i];
    }
    mean_loss /= B;
    if (!std::isfinite(mean_loss))
      fail(ErrorCode::kDiverged, "non-finite loss at step " + std::to_string(step) +
                                     " (lr " + std::to_string(lr_at(step, cfg)) + ")");
    scale(total, 1.0f / static_cast<float>(B));
    const double norm = global_norm(total);
    if (!std::isfinite(norm))
      fail(ErrorCode::kDiverged, "non-finite gradient norm at step " + std::to_string(step));
    if (cfg.grad_clip > 0.0 && norm > cfg.grad_clip)
      scale(total, static_cast<float>(cfg.grad_clip / norm));

    const double lr = lr_at(step, cfg);
    const double bc1 = 1.0 - std::pow(cfg.beta1, step);
    const double bc2 = 1.0 - std::pow(cfg.beta2, step);
    auto grads = tensor_spans(total);
    for (std::size_t t = 0; t < params.size(); ++t) {
      auto& m = st.adam_m[t];
      auto& v = st.adam_v[t];
      auto p = params[t];
      auto g = grads[t];
      const float wd = decays[t] ? static_cast<float>(cfg.weight_decay) : 0.0f;
      for (std::size_t j = 0; j < p.size(); ++j) {
        m[j] = static_cast<float>(cfg.beta1) * m[j] + static_cast<float>(1.0 - cfg.beta1) * g[j];
        v[j] = static_cast<float>(cfg.beta2) * v[j] +
               static_cast<float>(1.0 - cfg.beta2) * g[j] * g[j];
        const double mhat = m[j] / bc1;
        const double vhat = v[j] / bc2;
        const double update = mhat / (std::sqrt(vhat) + cfg.adam_eps) + wd * p[j];
        p[j] = static_cast<float>(p[j] - lr * update);
        if (!std::isfinite(p[j]))
          fail(ErrorCode::kDiverged, "non-finite parameter after step " + std::to_string(step));
      }
    }
    st.step = step;

    TrainLogEntry entry{step, mean_loss, lr, std::nullopt};
    if (hooks.validate && (step % cfg.eval_every == 0 || step == cfg.total_steps)) {
      const double score = hooks.validate(st.params);
      entry.eval_ff1 = score;
      if (score > st.best_score) {
        st.best_score = score;
        st.best_step = step;
        st.best = st.params;
      }
    }
    result.log.push_back(entry);
    if (hooks.on_log) hooks.on_log(entry);
  }

  result.params = (hooks.validate && st.best) ? *st.best : st.params;
  result.best_step = hooks.validate ? st.best_step : st.step;
  result.best_score = st.best_score;
  result.state = std::move(st);
  return result;
}

template <typename P>
TrainState<P> fresh_state(P model) {
  TrainState<P> st;
  st.params = std::move(model);
  return st;
}

}  // namespace

void TrainConfig::validate() const {
  require(peak_lr > 0.0, ErrorCode::kInvalidArgument, "peak_lr must be > 0");
  require(warmup_steps < total_steps, ErrorCode::kInvalidArgument,
          "warmup_steps must be < total_steps");
  require(batch_size >= 1, ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  require(eval_every >= 1, ErrorCode::kInvalidArgument, "eval_every must be >= 1");
  require(weight_decay >= 0.0 && grad_clip >= 0.0, ErrorCode::kInvalidArgument,
          "weight_decay and grad_clip must be >= 0");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, ErrorCode::kInvalidArgument,
          "Adam betas must lie in [0, 1)");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"peak_lr", c.peak_lr},       {"warmup_steps", c.warmup_steps},
          {"total_steps", c.total_steps}, {"batch_size", c.batch_size},
          {"seed", c.seed},             {"weight_decay", c.weight_decay},
          {"grad_clip", c.grad_clip},   {"eval_every", c.eval_every},
          {"beta1", c.beta1},           {"beta2", c.beta2},
          {"adam_eps", c.adam_eps}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) fail(ErrorCode::kSchema, "train config must be a JSON object");
  TrainConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "peak_lr") c.peak_lr = value.get<double>();
      else if (key == "warmup_steps") c.warmup_steps = value.get<std::uint32_t>();
      else if (key == "total_steps") c.total_steps = value.get<std::uint32_t>();
      else if (key == "batch_size") c.batch_size = value.get<std::uint32_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "weight_decay") c.weight_decay = value.get<double>();
      else if (key == "grad_clip") c.grad_clip = value.get<double>();
      else if (key == "eval_every") c.eval_every = value.get<std::uint32_t>();
      else if (key == "beta1") c.beta1 = value.get<double>();
      else if (key == "beta2") c.beta2 = value.get<double>();
      else if (key == "adam_eps") c.adam_eps = value.get<double>();
      else fail(ErrorCode::kSchema, "unknown train config key '" + key + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kSchema, std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

double lr_at(std::uint32_t step, const TrainConfig& cfg) {
  if (step >= cfg.total_steps) return 0.0;
  if (step <= cfg.warmup_steps) {
    if (cfg.warmup_steps == 0) return cfg.peak_lr;
    return cfg.peak_lr * static_cast<double>(step) / cfg.warmup_steps;
  }
  return cfg.peak_lr * static_cast<double>(cfg.total_steps - step) /
         static_cast<double>(cfg.total_steps - cfg.warmup_steps);
}

nlohmann::json to_json(const TrainLogEntry& e) {
  nlohmann::json j = {{"step", e.step}, {"loss", e.loss}, {"lr", e.lr}};
  if (e.eval_ff1) j["eval_ff1"] = *e.eval_ff1;
  return j;
}

TrainResult<ModelParams<float>> train(const std::vector<ModelInput>& dataset,
                                      ModelParams<float> model, const TrainConfig& cfg,
                                      const TrainHooks<ModelParams<float>>& hooks) {
  return resume(dataset, fresh_state(std::move(model)), cfg, hooks);
}

TrainResult<ModelParams<float>> resume(const std::vector<ModelInput>& dataset,
                                       TrainState<ModelParams<float>> state, const TrainConfig& cfg,
                                       const TrainHooks<ModelParams<float>>& hooks) {
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    require(dataset[i].target.has_value(), ErrorCode::kInvalidArgument,
            "training example " + std::to_string(i) + " has no target");
    validate(dataset[i], state.params.config);
  }
  return run(std::move(state), dataset.size(), cfg, hooks,
             [&](const ModelParams<float>& p, std::size_t idx, ModelParams<float>& g,
                 std::mt19937_64& rng) -> double {
               return loss_and_gradient(p, dataset[idx], g, &rng);
             });
}

MaskedExample mask_sequence(const MaskedCorpusItem& item, const ModelConfig& cfg,
                            std::mt19937_64& rng, double mask_rate) {
  MaskedExample ex;
  const std::size_t L = item.tokens.size();
  ex.input.tokens = item.tokens;
  ex.input.global_mask = item.global_mask;
  ex.input.passage_mask.assign(L, 0);
  std::vector<std::uint32_t> candidates;
  for (std::size_t i = 0; i < L; ++i)
    if (item.tokens[i] < cfg.num_units) candidates.push_back(static_cast<std::uint32_t>(i));
  if (candidates.empty()) return ex;

  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<TokenId> any_unit(0, cfg.num_units - 1);
  for (std::uint32_t pos : candidates) {
    if (u01(rng) >= mask_rate) continue;
    ex.targets.emplace_back(pos, item.tokens[pos]);
    const double r = u01(rng);
    if (r < 0.8) ex.input.tokens[pos] = cfg.mask();
    else if (r < 0.9) ex.input.tokens[pos] = any_unit(rng);
  }
  if (ex.targets.empty()) {
    const std::uint32_t pos =
        candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
    ex.targets.emplace_back(pos, item.tokens[pos]);
    ex.input.tokens[pos] = cfg.mask();
  }
  return ex;
}

TrainResult<MaskedLmParams<float>> pretrain_masked(const std::vector<MaskedCorpusItem>& corpus,
                                                   MaskedLmParams<float> model,
                                                   const TrainConfig& cfg,
                                                   const TrainHooks<MaskedLmParams<float>>& hooks) {
  const ModelConfig mc = model.config;
  return run(fresh_state(std::move(model)), corpus.size(), cfg, hooks,
             [&](const MaskedLmParams<float>& p, std::size_t idx, MaskedLmParams<float>& g,
                 std::mt19937_64& rng) -> double {
               const MaskedExample ex = mask_sequence(corpus[idx], mc, rng);
               return masked_lm_loss(p, ex, &g, &rng);
             });
}

std::string encode_train_state(const TrainState<ModelParams<float>>& s) {
  binio::Writer w;
  w.magic("DTRS");
  w.u32(1);
  nlohmann::json header = {{"step", s.step},
                           {"best_step", s.best_step},
                           {"best_score", s.best_score},
                           {"has_best", s.best.has_value()}};
  w.str(header.dump());
  w.str(encode_checkpoint(s.params));
  if (s.best) w.str(encode_checkpoint(*s.best));
  w.u32(static_cast<std::uint32_t>(s.adam_m.size()));
  for (std::size_t t = 0; t < s.adam_m.size(); ++t) {
    w.u32(static_cast<std::uint32_t>(s.adam_m[t].size()));
    w.bytes(s.adam_m[t].data(), s.adam_m[t].size() * sizeof(float));
    w.bytes(s.adam_v[t].data(), s.adam_v[t].size() * sizeof(float));
  }
  return w.buffer();
}

TrainState<ModelParams<float>> decode_train_state(std::string_view bytes, const std::string& origin) {
  binio::Reader r(bytes, origin);
  if (r.magic(4) != "DTRS") fail(ErrorCode::kBadMagic, origin + ": not a training state file");
  if (r.u32() != 1) fail(ErrorCode::kVersionMismatch, origin + ": unsupported training state version");
  TrainState<ModelParams<float>> s;
  const auto header = nlohmann::json::parse(r.str());
  s.step = header.at("step").get<std::uint32_t>();
  s.best_step = header.at("best_step").get<std::uint32_t>();
  s.best_score = header.at("best_score").get<double>();
  s.params = decode_model(r.str(), origin);
  if (header.at("has_best").get<bool>()) s.best = decode_model(r.str(), origin);
  const std::uint32_t n = r.u32();
  s.adam_m.resize(n);
  s.adam_v.resize(n);
  for (std::uint32_t t = 0; t < n; ++t) {
    const std::uint32_t size = r.u32();
    s.adam_m[t].resize(size);
    s.adam_v[t].resize(size);
    r.take(s.adam_m[t].data(), size * sizeof(float));
    r.take(s.adam_v[t].data(), size * sizeof(float));
  }
  return s;
}

GradCheckReport grad_check(const ModelParams<double>& model, const ModelInput& example,
                           const GradCheckOptions& opts) {
  require(example.target.has_value(), ErrorCode::kInvalidArgument, "example has no target");
  ModelParams<double> p = model;
  const ModelParams<double> grad = backward(p, example);
  auto ps = tensor_spans(p);
  const auto gs = tensor_spans(grad);
  std::vector<std::string> names;
  for_each_tensor(p, [&](const std::string& name, const auto&, bool) { names.push_back(name); });

  std::vector<std::size_t> selected;
  std::size_t total = 0;
  for (std::size_t t = 0; t < names.size(); ++t) {
    if (!opts.only_prefix.empty() && names[t].rfind(opts.only_prefix, 0) != 0) continue;
    selected.push_back(t);
    total += ps[t].size();
  }
  require(!selected.empty(), ErrorCode::kInvalidArgument, "no tensors selected for gradient check");

  GradCheckReport report;
  std::mt19937_64 rng(opts.seed);
  for (std::size_t t : selected) {
    const std::size_t size = ps[t].size();
    const auto share = static_cast<std::size_t>(
        std::ceil(static_cast<double>(opts.min_coords) * static_cast<double>(size) / total));
    const std::size_t k = std::min(size, std::max(opts.min_per_tensor, share));
    std::vector<std::size_t> idx(size);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(k);
    std::sort(idx.begin(), idx.end());
    for (std::size_t j : idx) {
      const double old = ps[t][j];
      ps[t][j] = old + opts.epsilon;
      const double up = loss(p, example);
      ps[t][j] = old - opts.epsilon;
      const double down = loss(p, example);
      ps[t][j] = old;
      const double numeric = (up - down) / (2.0 * opts.epsilon);
      const double analytic = gs[t][j];
      const double rel = std::abs(analytic - numeric) /
                         std::max({std::abs(analytic), std::abs(numeric), opts.floor});
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_tensor = names[t];
      }
      ++report.coords;
    }
    ++report.tensors;
  }
  return report;
}

}  // namespace dual
