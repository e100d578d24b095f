// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

// Optimisation loop: linear warmup / linear decay schedule, AdamW with
// decoupled weight decay, global-norm clipping, validation-based model
// selection, resumable state, and finite-difference gradient checking.

#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dual/model.hpp"
#include "json.hpp"

namespace dual {

struct TrainConfig {
  double peak_lr = 1e-4;
  std::uint32_t warmup_steps = 500;
  std::uint32_t total_steps = 5000;
  std::uint32_t batch_size = 16;
  std::uint64_t seed = 0;
  double weight_decay = 0.01;
  double grad_clip = 1.0;
  std::uint32_t eval_every = 500;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  unsigned threads = 1;

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

// 0 at step 0, peak at warmup_steps, 0 again at total_steps.
double lr_at(std::uint32_t step, const TrainConfig& cfg);

struct TrainLogEntry {
  std::uint32_t step = 0;
  double loss = 0.0;
  double lr = 0.0;
  std::optional<double> eval_ff1;
};

nlohmann::json to_json(const TrainLogEntry& e);

// Everything needed to continue a run bit-exactly.
template <typename P>
struct TrainState {
  P params;
  std::vector<std::vector<float>> adam_m, adam_v;
  std::uint32_t step = 0;
  std::optional<P> best;
  double best_score = -1.0;
  std::uint32_t best_step = 0;
};

template <typename P>
struct TrainResult {
  P params;  // best on validation when a validator is supplied, else final
  std::vector<TrainLogEntry> log;
  std::uint32_t best_step = 0;
  double best_score = -1.0;
  TrainState<P> state;  // final optimiser state
};

template <typename P>
struct TrainHooks {
  // Higher is better; called every eval_every steps and at the end.
  std::function<double(const P&)> validate;
  std::function<void(const TrainLogEntry&)> on_log;
  // Stop (with state intact) once this many steps have been taken.
  std::optional<std::uint32_t> stop_after;
};

// Span-prediction fine-tuning on prepared inputs (each must carry a target).
TrainResult<ModelParams<float>> train(const std::vector<ModelInput>& dataset,
                                      ModelParams<float> model, const TrainConfig& cfg,
                                      const TrainHooks<ModelParams<float>>& hooks = {});
TrainResult<ModelParams<float>> resume(const std::vector<ModelInput>& dataset,
                                       TrainState<ModelParams<float>> state, const TrainConfig& cfg,
                                       const TrainHooks<ModelParams<float>>& hooks = {});

// Masked-unit prediction pretraining. Each sequence is re-masked every time it
// is drawn: 15% of non-special positions, of which 80% become [MASK], 10% a
// random unit and 10% stay unchanged.
struct MaskedCorpusItem {
  std::vector<TokenId> tokens;
  std::vector<std::uint8_t> global_mask;
};

MaskedExample mask_sequence(const MaskedCorpusItem& item, const ModelConfig& cfg,
                            std::mt19937_64& rng, double mask_rate = 0.15);

TrainResult<MaskedLmParams<float>> pretrain_masked(const std::vector<MaskedCorpusItem>& corpus,
                                                   MaskedLmParams<float> model,
                                                   const TrainConfig& cfg,
                                                   const TrainHooks<MaskedLmParams<float>>& hooks = {});

std::string encode_train_state(const TrainState<ModelParams<float>>& s);
TrainState<ModelParams<float>> decode_train_state(std::string_view bytes, const std::string& origin);

// Finite-difference check of the span-loss gradient in double precision.
struct GradCheckOptions {
  double epsilon = 1e-5;
  std::size_t min_coords = 1000;
  std::size_t min_per_tensor = 4;
  std::uint64_t seed = 0;
  // Gradients smaller than this are compared in absolute terms.
  double floor = 1e-6;
  // When non-empty, only tensors whose name starts with this prefix.
  std::string only_prefix;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coords = 0;
  std::size_t tensors = 0;
  std::string worst_tensor;
};

GradCheckReport grad_check(const ModelParams<double>& model, const ModelInput& example,
                           const GradCheckOptions& opts = {});

}  // namespace dual
