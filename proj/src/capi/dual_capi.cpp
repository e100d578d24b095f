// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

#include "dual/dual.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <vector>

#include "dual/checkpoint.hpp"
#include "dual/datakit.hpp"
#include "dual/error.hpp"
#include "dual/featio.hpp"
#include "dual/metrics.hpp"
#include "dual/pipeline.hpp"
#include "dual/quantizer.hpp"
#include "dual/unitizer.hpp"

struct dual_features {
  dual::FeatureMatrix value;
};
struct dual_codebook {
  dual::Codebook value;
};
struct dual_model {
  dual::ModelParams<float> value;
};

namespace {

thread_local std::string t_last_error;

dual_status to_status(dual::ErrorCode code) {
  switch (code) {
    case dual::ErrorCode::kInvalidArgument: return DUAL_ERR_INVALID_ARGUMENT;
    case dual::ErrorCode::kIo: return DUAL_ERR_IO;
    case dual::ErrorCode::kBadMagic: return DUAL_ERR_BAD_MAGIC;
    case dual::ErrorCode::kVersionMismatch: return DUAL_ERR_VERSION_MISMATCH;
    case dual::ErrorCode::kTruncated: return DUAL_ERR_TRUNCATED;
    case dual::ErrorCode::kNonFinite: return DUAL_ERR_NON_FINITE;
    case dual::ErrorCode::kDimMismatch: return DUAL_ERR_DIM_MISMATCH;
    case dual::ErrorCode::kOutOfRange: return DUAL_ERR_OUT_OF_RANGE;
    case dual::ErrorCode::kSchema: return DUAL_ERR_SCHEMA;
    case dual::ErrorCode::kDiverged: return DUAL_ERR_DIVERGED;
    case dual::ErrorCode::kInternal: return DUAL_ERR_INTERNAL;
  }
  return DUAL_ERR_UNKNOWN;
}

template <typename Fn>
dual_status guarded(Fn&& fn) {
  t_last_error.clear();
  try {
    fn();
    return DUAL_OK;
  } catch (const dual::Error& e) {
    t_last_error = e.what();
    return to_status(e.code());
  } catch (const nlohmann::json::exception& e) {
    t_last_error = std::string("malformed JSON: ") + e.what();
    return DUAL_ERR_SCHEMA;
  } catch (const std::bad_alloc&) {
    t_last_error = "out of memory";
    return DUAL_ERR_INTERNAL;
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return DUAL_ERR_UNKNOWN;
  } catch (...) {
    t_last_error = "unknown error";
    return DUAL_ERR_UNKNOWN;
  }
}

void need(const void* p, const char* name) {
  if (p == nullptr) dual::fail(dual::ErrorCode::kInvalidArgument, std::string(name) + " is null");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

using Stage = nlohmann::json (*)(const nlohmann::json&, const std::string&);

dual_status run_stage(Stage stage, const char* config_json, const char* out_dir, char** summary) {
  return guarded([&] {
    need(config_json, "config_json");
    need(out_dir, "out_dir");
    const nlohmann::json cfg = nlohmann::json::parse(config_json);
    const nlohmann::json result = stage(cfg, out_dir);
    if (summary != nullptr) *summary = copy_string(result.dump());
  });
}

dual::UnitSequence make_sequence(const uint32_t* units, const uint32_t* counts, size_t n,
                                 uint32_t period_us) {
  need(units, "units");
  need(counts, "counts");
  dual::UnitSequence u;
  u.units.assign(units, units + n);
  u.counts.assign(counts, counts + n);
  u.frame_period_us = period_us;
  dual::validate(u);
  return u;
}

}  // namespace

extern "C" {

const char* dual_version(void) { return dual::kVersion; }

const char* dual_status_string(dual_status status) {
  switch (status) {
    case DUAL_OK: return "ok";
    case DUAL_ERR_INVALID_ARGUMENT: return "invalid argument";
    case DUAL_ERR_IO: return "i/o error";
    case DUAL_ERR_BAD_MAGIC: return "bad magic";
    case DUAL_ERR_VERSION_MISMATCH: return "version mismatch";
    case DUAL_ERR_TRUNCATED: return "truncated input";
    case DUAL_ERR_NON_FINITE: return "non-finite value";
    case DUAL_ERR_DIM_MISMATCH: return "dimension mismatch";
    case DUAL_ERR_OUT_OF_RANGE: return "out of range";
    case DUAL_ERR_SCHEMA: return "schema violation";
    case DUAL_ERR_DIVERGED: return "training diverged";
    case DUAL_ERR_INTERNAL: return "internal error";
    case DUAL_ERR_UNKNOWN: break;
  }
  return "unknown error";
}

const char* dual_last_error(void) { return t_last_error.c_str(); }

void dual_string_free(char* s) { std::free(s); }

void dual_set_verbosity(int level) { dual::set_verbosity(level); }

dual_status dual_run_synth(const char* c, const char* o, char** s) { return run_stage(dual::run_synth, c, o, s); }
dual_status dual_run_kmeans(const char* c, const char* o, char** s) { return run_stage(dual::run_kmeans, c, o, s); }
dual_status dual_run_pretrain(const char* c, const char* o, char** s) { return run_stage(dual::run_pretrain, c, o, s); }
dual_status dual_run_train(const char* c, const char* o, char** s) { return run_stage(dual::run_train, c, o, s); }
dual_status dual_run_eval(const char* c, const char* o, char** s) { return run_stage(dual::run_eval, c, o, s); }
dual_status dual_run_cascade(const char* c, const char* o, char** s) { return run_stage(dual::run_cascade, c, o, s); }
dual_status dual_run_buckets(const char* c, const char* o, char** s) { return run_stage(dual::run_buckets, c, o, s); }

// ---- features

dual_status dual_features_create(uint32_t n_frames, uint32_t dim, uint32_t frame_period_us,
                                 const float* data, dual_features** out) {
  return guarded([&] {
    need(out, "out");
    if (n_frames > 0) need(data, "data");
    dual::FeatureMatrix m;
    m.n_frames = n_frames;
    m.dim = dim;
    m.frame_period_us = frame_period_us;
    m.data.assign(data, data + static_cast<size_t>(n_frames) * dim);
    dual::validate(m);
    *out = new dual_features{std::move(m)};
  });
}

dual_status dual_features_read(const char* path, dual_features** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new dual_features{dual::read_features(path)};
  });
}

dual_status dual_features_write(const dual_features* f, const char* path) {
  return guarded([&] {
    need(f, "features");
    need(path, "path");
    dual::write_features(f->value, path);
  });
}

dual_status dual_features_shape(const dual_features* f, uint32_t* n_frames, uint32_t* dim,
                                uint32_t* frame_period_us) {
  return guarded([&] {
    need(f, "features");
    if (n_frames) *n_frames = f->value.n_frames;
    if (dim) *dim = f->value.dim;
    if (frame_period_us) *frame_period_us = f->value.frame_period_us;
  });
}

const float* dual_features_data(const dual_features* f) { return f ? f->value.data.data() : nullptr; }

void dual_features_free(dual_features* f) { delete f; }

// ---- codebook

dual_status dual_codebook_train(const dual_features* const* features, size_t count, uint32_t k,
                                uint32_t max_iters, uint64_t seed, unsigned threads,
                                dual_codebook** out) {
  return guarded([&] {
    need(out, "out");
    if (count > 0) need(features, "features");
    std::vector<dual::FeatureMatrix> mats;
    for (size_t i = 0; i < count; ++i) {
      need(features[i], "features[i]");
      mats.push_back(features[i]->value);
    }
    dual::KMeansOptions opts;
    opts.k = k;
    opts.max_iters = max_iters;
    opts.seed = seed;
    opts.threads = threads;
    *out = new dual_codebook{dual::train_codebook(mats, opts)};
  });
}

dual_status dual_codebook_read(const char* path, dual_codebook** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new dual_codebook{dual::read_codebook(path)};
  });
}

dual_status dual_codebook_write(const dual_codebook* cb, const char* path) {
  return guarded([&] {
    need(cb, "codebook");
    need(path, "path");
    dual::write_codebook(cb->value, path);
  });
}

dual_status dual_codebook_shape(const dual_codebook* cb, uint32_t* k, uint32_t* dim) {
  return guarded([&] {
    need(cb, "codebook");
    if (k) *k = cb->value.k();
    if (dim) *dim = cb->value.dim();
  });
}

dual_status dual_codebook_encode(const dual_codebook* cb, const dual_features* f, uint32_t* units,
                                 size_t capacity, size_t* written) {
  return guarded([&] {
    need(cb, "codebook");
    need(f, "features");
    need(written, "written");
    const std::vector<dual::UnitId> ids = dual::encode(cb->value, f->value);
    dual::require(capacity >= ids.size(), dual::ErrorCode::kInvalidArgument,
                  "output buffer holds " + std::to_string(capacity) + " ids but " +
                      std::to_string(ids.size()) + " are needed");
    if (!ids.empty()) need(units, "units");
    std::copy(ids.begin(), ids.end(), units);
    *written = ids.size();
  });
}

void dual_codebook_free(dual_codebook* cb) { delete cb; }

// ---- unit sequences

dual_status dual_merge_repeats(const uint32_t* frames, size_t n, uint32_t* units, uint32_t* counts,
                               size_t* merged) {
  return guarded([&] {
    need(merged, "merged");
    if (n > 0) {
      need(frames, "frames");
      need(units, "units");
      need(counts, "counts");
    }
    const dual::UnitSequence u = dual::merge_repeats(std::span<const uint32_t>(frames, n));
    std::copy(u.units.begin(), u.units.end(), units);
    std::copy(u.counts.begin(), u.counts.end(), counts);
    *merged = u.size();
  });
}

dual_status dual_time_to_index(const uint32_t* units, const uint32_t* counts, size_t n,
                               uint32_t frame_period_us, double start, double end,
                               uint32_t* start_idx, uint32_t* end_idx) {
  return guarded([&] {
    need(start_idx, "start_idx");
    need(end_idx, "end_idx");
    const dual::IndexSpan s =
        dual::time_to_index({start, end}, make_sequence(units, counts, n, frame_period_us));
    *start_idx = s.start_idx;
    *end_idx = s.end_idx;
  });
}

dual_status dual_index_to_time(const uint32_t* units, const uint32_t* counts, size_t n,
                               uint32_t frame_period_us, uint32_t start_idx, uint32_t end_idx,
                               double* start, double* end) {
  return guarded([&] {
    need(start, "start");
    need(end, "end");
    const dual::TimeSpan t =
        dual::index_to_time({start_idx, end_idx}, make_sequence(units, counts, n, frame_period_us));
    *start = t.start;
    *end = t.end;
  });
}

// ---- metrics

dual_status dual_ff1(double ps, double pe, double gs, double ge, double frame_period, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = dual::ff1({ps, pe}, {gs, ge}, frame_period);
  });
}

dual_status dual_aos(double ps, double pe, double gs, double ge, double* out) {
  return guarded([&] {
    need(out, "out");
    *out = dual::aos({ps, pe}, {gs, ge});
  });
}

dual_status dual_wer(const char* reference, const char* hypothesis, double* out) {
  return guarded([&] {
    need(reference, "reference");
    need(hypothesis, "hypothesis");
    need(out, "out");
    *out = dual::wer(std::string(reference), std::string(hypothesis));
  });
}

// ---- model

dual_status dual_model_load(const char* path, dual_model** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new dual_model{dual::load_model(path)};
  });
}

dual_status dual_model_num_units(const dual_model* m, uint32_t* num_units) {
  return guarded([&] {
    need(m, "model");
    need(num_units, "num_units");
    *num_units = m->value.config.num_units;
  });
}

dual_status dual_model_predict(const dual_model* m, const uint32_t* question, size_t question_len,
                               const uint32_t* passage, size_t passage_len, uint32_t max_answer_len,
                               uint32_t* start_idx, uint32_t* end_idx) {
  return guarded([&] {
    need(m, "model");
    need(start_idx, "start_idx");
    need(end_idx, "end_idx");
    if (question_len > 0) need(question, "question");
    need(passage, "passage");
    dual::require(passage_len > 0, dual::ErrorCode::kInvalidArgument, "passage is empty");
    dual::require(max_answer_len > 0, dual::ErrorCode::kInvalidArgument, "max_answer_len must be positive");
    dual::SqaExample e;
    e.id = "query";
    e.question.units.assign(question, question + question_len);
    e.question.counts.assign(question_len, 1);
    e.passage.units.assign(passage, passage + passage_len);
    e.passage.counts.assign(passage_len, 1);
    const dual::PreparedExample prep = dual::prepare(e, m->value.config);
    const auto logits = dual::forward(m->value, prep.input);
    const dual::IndexSpan s = dual::decode_span<float>(logits.start, logits.end,
                                                       prep.input.passage_mask, max_answer_len);
    *start_idx = s.start_idx - prep.passage_offset;
    *end_idx = s.end_idx - prep.passage_offset;
  });
}

void dual_model_free(dual_model* m) { delete m; }

}  // extern "C"
