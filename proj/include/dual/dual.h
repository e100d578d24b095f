/* Copyright 2026 The DUAL Authors.
 * Licensed under the Apache License, Version 2.0
 *
 * C interface to the DUAL library: textless spoken question answering over
 * discrete speech units.
 *
 * Every function returns a dual_status. On failure a thread-local message is
 * available from dual_last_error() until the next call on the same thread.
 * Objects are opaque handles released with their matching *_free function;
 * strings returned through char** are released with dual_string_free.
 */
#ifndef DUAL_DUAL_H_
#define DUAL_DUAL_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(DUAL_BUILDING_LIBRARY)
#define DUAL_API __declspec(dllexport)
#else
#define DUAL_API __declspec(dllimport)
#endif
#else
#define DUAL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dual_status {
  DUAL_OK = 0,
  DUAL_ERR_INVALID_ARGUMENT = 1,
  DUAL_ERR_IO = 2,
  DUAL_ERR_BAD_MAGIC = 3,
  DUAL_ERR_VERSION_MISMATCH = 4,
  DUAL_ERR_TRUNCATED = 5,
  DUAL_ERR_NON_FINITE = 6,
  DUAL_ERR_DIM_MISMATCH = 7,
  DUAL_ERR_OUT_OF_RANGE = 8,
  DUAL_ERR_SCHEMA = 9,
  DUAL_ERR_DIVERGED = 10,
  DUAL_ERR_INTERNAL = 11,
  DUAL_ERR_UNKNOWN = 99
} dual_status;

DUAL_API const char* dual_version(void);
DUAL_API const char* dual_status_string(dual_status status);
DUAL_API const char* dual_last_error(void);
DUAL_API void dual_string_free(char* s);
/* 0 = silent (default), 1 = progress lines on stderr. */
DUAL_API void dual_set_verbosity(int level);

/* ---- pipeline stages ----------------------------------------------------
 * `config_json` is a JSON object; unknown keys fail with DUAL_ERR_SCHEMA.
 * Outputs (and run.json) are written atomically into `out_dir`. When
 * `summary_json` is non-null it receives a JSON summary to be released with
 * dual_string_free. */
DUAL_API dual_status dual_run_synth(const char* config_json, const char* out_dir, char** summary_json);
DUAL_API dual_status dual_run_kmeans(const char* config_json, const char* out_dir, char** summary_json);
DUAL_API dual_status dual_run_pretrain(const char* config_json, const char* out_dir, char** summary_json);
DUAL_API dual_status dual_run_train(const char* config_json, const char* out_dir, char** summary_json);
DUAL_API dual_status dual_run_eval(const char* config_json, const char* out_dir, char** summary_json);
DUAL_API dual_status dual_run_cascade(const char* config_json, const char* out_dir, char** summary_json);
DUAL_API dual_status dual_run_buckets(const char* config_json, const char* out_dir, char** summary_json);

/* ---- features ---------------------------------------------------------- */
typedef struct dual_features dual_features;

DUAL_API dual_status dual_features_create(uint32_t n_frames, uint32_t dim, uint32_t frame_period_us,
                                          const float* data, dual_features** out);
DUAL_API dual_status dual_features_read(const char* path, dual_features** out);
DUAL_API dual_status dual_features_write(const dual_features* f, const char* path);
DUAL_API dual_status dual_features_shape(const dual_features* f, uint32_t* n_frames, uint32_t* dim,
                                         uint32_t* frame_period_us);
/* Row-major n_frames x dim; valid while the handle lives. */
DUAL_API const float* dual_features_data(const dual_features* f);
DUAL_API void dual_features_free(dual_features* f);

/* ---- codebook ---------------------------------------------------------- */
typedef struct dual_codebook dual_codebook;

DUAL_API dual_status dual_codebook_train(const dual_features* const* features, size_t count, uint32_t k,
                                         uint32_t max_iters, uint64_t seed, unsigned threads,
                                         dual_codebook** out);
DUAL_API dual_status dual_codebook_read(const char* path, dual_codebook** out);
DUAL_API dual_status dual_codebook_write(const dual_codebook* cb, const char* path);
DUAL_API dual_status dual_codebook_shape(const dual_codebook* cb, uint32_t* k, uint32_t* dim);
/* Writes one unit id per frame; `capacity` must be at least n_frames. */
DUAL_API dual_status dual_codebook_encode(const dual_codebook* cb, const dual_features* f,
                                          uint32_t* units, size_t capacity, size_t* written);
DUAL_API void dual_codebook_free(dual_codebook* cb);

/* ---- unit sequences and spans ------------------------------------------ */
/* Collapses runs of equal ids. `units` and `counts` need room for n ids. */
DUAL_API dual_status dual_merge_repeats(const uint32_t* frames, size_t n, uint32_t* units,
                                        uint32_t* counts, size_t* merged);
/* Half-open time span [start, end) in seconds to a closed dense-index span. */
DUAL_API dual_status dual_time_to_index(const uint32_t* units, const uint32_t* counts, size_t n,
                                        uint32_t frame_period_us, double start, double end,
                                        uint32_t* start_idx, uint32_t* end_idx);
DUAL_API dual_status dual_index_to_time(const uint32_t* units, const uint32_t* counts, size_t n,
                                        uint32_t frame_period_us, uint32_t start_idx, uint32_t end_idx,
                                        double* start, double* end);

/* ---- metrics ----------------------------------------------------------- */
DUAL_API dual_status dual_ff1(double pred_start, double pred_end, double gold_start, double gold_end,
                              double frame_period, double* out);
DUAL_API dual_status dual_aos(double pred_start, double pred_end, double gold_start, double gold_end,
                              double* out);
/* Whitespace-tokenised, case- and punctuation-insensitive. */
DUAL_API dual_status dual_wer(const char* reference, const char* hypothesis, double* out);

/* ---- model ------------------------------------------------------------- */
typedef struct dual_model dual_model;

DUAL_API dual_status dual_model_load(const char* path, dual_model** out);
DUAL_API dual_status dual_model_num_units(const dual_model* m, uint32_t* num_units);
/* Answer span over the deduplicated passage units, as a closed index span. */
DUAL_API dual_status dual_model_predict(const dual_model* m, const uint32_t* question, size_t question_len,
                                        const uint32_t* passage, size_t passage_len,
                                        uint32_t max_answer_len, uint32_t* start_idx, uint32_t* end_idx);
DUAL_API void dual_model_free(dual_model* m);

#ifdef __cplusplus
}
#endif

#endif /* DUAL_DUAL_H_ */
