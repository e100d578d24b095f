// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

// Dataset manifests, model-input preparation and the synthetic spoken-QA
// task generator.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dual/cascade.hpp"
#include "dual/model.hpp"
#include "dual/quantizer.hpp"
#include "dual/trainer.hpp"
#include "dual/unitizer.hpp"
#include "json.hpp"

namespace dual {

struct SqaExample {
  std::string id;
  UnitSequence question;
  UnitSequence passage;
  TimeSpan answer;
  std::optional<TimedTranscript> transcript;
  std::optional<std::vector<std::string>> answer_text;
};

// Answer inside the passage duration; a transcript, when present, must end
// within one frame of the passage end.
void validate(const SqaExample& e);

// One manifest line. Feature paths are relative to the manifest's directory.
struct ManifestRecord {
  std::string id;
  std::string question_feat;
  std::string passage_feat;
  TimeSpan answer;
  std::optional<TimedTranscript> transcript;
  std::optional<std::vector<std::string>> answer_text;
};

nlohmann::json to_json(const ManifestRecord& r);
// kSchema with the offending field named, e.g. "answer.end_sec".
ManifestRecord manifest_record_from_json(const nlohmann::json& j);

// Parses and checks every line (unique ids); does not touch feature files.
std::vector<ManifestRecord> read_manifest(const std::string& path);
void write_manifest(const std::vector<ManifestRecord>& records, const std::string& path);

// Reads features, quantises them with `codebook` and merges repeats.
std::vector<SqaExample> load_manifest(const std::string& path, const Codebook& codebook,
                                      unsigned threads = 1);

struct PreparedExample {
  ModelInput input;
  bool dropped = false;             // answer start lost to truncation
  std::uint32_t passage_offset = 0; // token position of passage unit 0
  std::uint32_t passage_kept = 0;   // passage units that survived truncation
};

// [BOS] question [SEP] passage [EOS], truncating the passage tail to max_len.
// BOS and the question tokens attend globally. The answer maps to an index span
// shifted by passage_offset; an end past the cutoff is pulled back to the last
// kept unit, a start past it marks the example dropped and leaves no target.
// An empty answer span yields an unlabelled input.
PreparedExample prepare(const SqaExample& e, const ModelConfig& cfg);

// Maps a predicted token span back to passage time.
TimeSpan span_to_time(const IndexSpan& token_span, const PreparedExample& prep,
                      const SqaExample& e);

struct SynthConfig {
  std::uint32_t vocab_words = 50;
  std::uint32_t min_units_per_word = 2;
  std::uint32_t max_units_per_word = 4;
  std::uint32_t num_units = 64;
  std::uint32_t n_train = 2000;
  std::uint32_t n_dev = 200;
  std::uint32_t n_test = 0;
  std::uint32_t passage_words = 12;
  std::uint32_t min_repeat = 1;
  std::uint32_t max_repeat = 4;
  double noise_sigma = 0.05;
  std::uint32_t dim = 16;
  double zipf_exponent = 1.0;
  std::uint32_t frame_period_us = kDefaultFramePeriodUs;
  std::uint64_t seed = 0;

  void validate() const;
};

nlohmann::json to_json(const SynthConfig& c);
SynthConfig synth_config_from_json(const nlohmann::json& j);

struct SynthSummary {
  std::vector<std::vector<UnitId>> lexicon;
  std::uint32_t train = 0, dev = 0, test = 0;
};

// Writes train/dev/test manifests, feats/*.feat, truth.jsonl (frame-level
// ground-truth units per example) and meta.json into `dir`.
SynthSummary gen_synthetic_task(const SynthConfig& cfg, const std::string& dir);

// Masked-unit pretraining corpus over an unrelated vocabulary:
// [BOS] segment [SEP] passage [EOS]. The segment is i.i.d. Zipfian tokens; the
// passage holds the segment cut into short chunks, shuffled, with filler
// tokens between them. Most masked tokens are recoverable only by matching a
// chunk against its source in the segment.
struct DonorCorpusConfig {
  std::uint32_t vocab_size = 128;  // donor content tokens
  std::uint32_t min_segment = 6;
  std::uint32_t max_segment = 12;
  std::uint32_t min_chunk = 2;
  std::uint32_t max_chunk = 4;
  std::uint32_t passage_tokens = 36;  // chunks plus filler
  std::uint32_t sequences = 4000;
  double zipf_exponent = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

nlohmann::json to_json(const DonorCorpusConfig& c);
DonorCorpusConfig donor_corpus_config_from_json(const nlohmann::json& j);

struct DonorCorpus {
  std::vector<MaskedCorpusItem> items;
  // Donor content tokens, most frequent first (ties by token id).
  std::vector<std::uint32_t> frequency_ranking;
};

DonorCorpus gen_donor_corpus(const DonorCorpusConfig& cfg, const ModelConfig& model);

}  // namespace dual
