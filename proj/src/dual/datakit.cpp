// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

#include "dual/datakit.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "dual/binio.hpp"
#include "dual/error.hpp"
#include "dual/featio.hpp"
#include "dual/parallel.hpp"

namespace dual {

namespace fs = std::filesystem;
using nlohmann::json;

void validate(const SqaExample& e) {
  validate(e.question);
  validate(e.passage);
  const double duration = static_cast<double>(e.passage.total_frames()) * e.passage.frame_period();
  require(e.answer.start >= 0.0 && e.answer.start < e.answer.end &&
              e.answer.end <= duration + 1e-9,
          ErrorCode::kOutOfRange, "example '" + e.id + "': answer lies outside the passage");
  if (e.transcript) {
    validate(*e.transcript);
    if (!e.transcript->words.empty())
      require(e.transcript->words.back().end <= duration + e.passage.frame_period() + 1e-9,
              ErrorCode::kOutOfRange,
              "example '" + e.id + "': transcript extends past the passage");
  }
}

// ---------------------------------------------------------------------------
// Manifest schema

namespace {

const json& field(const json& j, const std::string& key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) fail(ErrorCode::kSchema, "missing field '" + path + "'");
  return *it;
}

std::string string_field(const json& j, const std::string& key, const std::string& path) {
  const json& v = field(j, key, path);
  if (!v.is_string()) fail(ErrorCode::kSchema, "field '" + path + "' must be a string");
  return v.get<std::string>();
}

double number_field(const json& j, const std::string& key, const std::string& path) {
  const json& v = field(j, key, path);
  if (!v.is_number()) fail(ErrorCode::kSchema, "field '" + path + "' must be a number");
  const double x = v.get<double>();
  if (!std::isfinite(x)) fail(ErrorCode::kSchema, "field '" + path + "' must be finite");
  return x;
}

std::vector<std::string> word_list(const json& v, const std::string& path) {
  if (!v.is_array()) fail(ErrorCode::kSchema, "field '" + path + "' must be an array");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_string())
      fail(ErrorCode::kSchema, "field '" + path + "[" + std::to_string(i) + "]' must be a string");
    out.push_back(v[i].get<std::string>());
  }
  return out;
}

}  // namespace

json to_json(const ManifestRecord& r) {
  json j = {{"id", r.id},
            {"question_feat", r.question_feat},
            {"passage_feat", r.passage_feat},
            {"answer", {{"start_sec", r.answer.start}, {"end_sec", r.answer.end}}}};
  if (r.transcript) {
    json words = json::array();
    for (const auto& w : r.transcript->words)
      words.push_back({{"text", w.text}, {"start", w.start}, {"end", w.end}});
    j["transcript"] = std::move(words);
  }
  if (r.answer_text) j["answer_text"] = *r.answer_text;
  return j;
}

ManifestRecord manifest_record_from_json(const json& j) {
  if (!j.is_object()) fail(ErrorCode::kSchema, "record must be an object");
  ManifestRecord r;
  r.id = string_field(j, "id", "id");
  require(!r.id.empty(), ErrorCode::kSchema, "field 'id' must be non-empty");
  r.question_feat = string_field(j, "question_feat", "question_feat");
  r.passage_feat = string_field(j, "passage_feat", "passage_feat");
  const json& ans = field(j, "answer", "answer");
  if (!ans.is_object()) fail(ErrorCode::kSchema, "field 'answer' must be an object");
  r.answer.start = number_field(ans, "start_sec", "answer.start_sec");
  r.answer.end = number_field(ans, "end_sec", "answer.end_sec");
  require(r.answer.start >= 0.0 && r.answer.start < r.answer.end, ErrorCode::kSchema,
          "field 'answer' needs 0 <= start_sec < end_sec");
  if (auto it = j.find("transcript"); it != j.end()) {
    if (!it->is_array()) fail(ErrorCode::kSchema, "field 'transcript' must be an array");
    TimedTranscript t;
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string p = "transcript[" + std::to_string(i) + "]";
      const json& w = (*it)[i];
      if (!w.is_object()) fail(ErrorCode::kSchema, "field '" + p + "' must be an object");
      t.words.push_back({string_field(w, "text", p + ".text"), number_field(w, "start", p + ".start"),
                         number_field(w, "end", p + ".end")});
    }
    try {
      validate(t);
    } catch (const Error& e) {
      fail(ErrorCode::kSchema, std::string("field 'transcript': ") + e.what());
    }
    r.transcript = std::move(t);
  }
  if (auto it = j.find("answer_text"); it != j.end()) r.answer_text = word_list(*it, "answer_text");
  return r;
}

std::vector<ManifestRecord> read_manifest(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::kIo, "cannot open manifest '" + path + "'");
  std::vector<ManifestRecord> out;
  std::set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path + ":" + std::to_string(lineno) + ": ";
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      fail(ErrorCode::kSchema, where + "malformed JSON: " + e.what());
    }
    try {
      out.push_back(manifest_record_from_json(j));
    } catch (const Error& e) {
      fail(e.code(), where + e.what());
    }
    require(seen.insert(out.back().id).second, ErrorCode::kSchema,
            where + "duplicate id '" + out.back().id + "'");
  }
  return out;
}

void write_manifest(const std::vector<ManifestRecord>& records, const std::string& path) {
  std::string body;
  for (const auto& r : records) {
    body += to_json(r).dump();
    body += '\n';
  }
  binio::write_file_atomic(path, body);
}

std::vector<SqaExample> load_manifest(const std::string& path, const Codebook& codebook,
                                      unsigned threads) {
  const auto records = read_manifest(path);
  const fs::path base = fs::path(path).parent_path();
  std::vector<SqaExample> out(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i) {
    const ManifestRecord& r = records[i];
    auto quantise = [&](const std::string& rel) {
      const std::string file = (base / rel).string();
      require(fs::exists(file), ErrorCode::kIo,
              "example '" + r.id + "': feature file '" + file + "' does not exist");
      FeatureMatrix m = read_features(file);
      require(m.dim == codebook.dim(), ErrorCode::kDimMismatch,
              "example '" + r.id + "': features have dim " + std::to_string(m.dim) +
                  " but the codebook expects " + std::to_string(codebook.dim()));
      return merge_repeats(encode(codebook, m), m.frame_period_us);
    };
    SqaExample& e = out[i];
    e.id = r.id;
    e.question = quantise(r.question_feat);
    e.passage = quantise(r.passage_feat);
    e.answer = r.answer;
    e.transcript = r.transcript;
    e.answer_text = r.answer_text;
    validate(e);
  });
  return out;
}

// ---------------------------------------------------------------------------
// Model inputs

PreparedExample prepare(const SqaExample& e, const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t q = e.question.size();
  require(q + 3 < cfg.max_len, ErrorCode::kInvalidArgument,
          "example '" + e.id + "': question of " + std::to_string(q) +
              " units leaves no room for the passage within max_len " +
              std::to_string(cfg.max_len));
  require(!e.passage.units.empty(), ErrorCode::kInvalidArgument,
          "example '" + e.id + "': empty passage");
  PreparedExample out;
  out.passage_offset = static_cast<std::uint32_t>(q + 2);
  out.passage_kept = static_cast<std::uint32_t>(std::min<std::size_t>(e.passage.size(), cfg.max_len - q - 3));

  ModelInput& in = out.input;
  const std::size_t L = q + 3 + out.passage_kept;
  in.tokens.reserve(L);
  in.tokens.push_back(cfg.bos());
  for (UnitId u : e.question.units) {
    require(u < cfg.num_units, ErrorCode::kOutOfRange, "example '" + e.id + "': unit id out of range");
    in.tokens.push_back(u);
  }
  in.tokens.push_back(cfg.sep());
  for (std::uint32_t i = 0; i < out.passage_kept; ++i) {
    const UnitId u = e.passage.units[i];
    require(u < cfg.num_units, ErrorCode::kOutOfRange, "example '" + e.id + "': unit id out of range");
    in.tokens.push_back(u);
  }
  in.tokens.push_back(cfg.eos());
  in.passage_mask.assign(L, 0);
  std::fill(in.passage_mask.begin() + out.passage_offset,
            in.passage_mask.begin() + out.passage_offset + out.passage_kept, 1);
  in.global_mask.assign(L, 0);
  std::fill(in.global_mask.begin(), in.global_mask.begin() + out.passage_offset - 1, 1);

  if (!(e.answer.end > e.answer.start)) return out;  // unlabelled
  const IndexSpan idx = time_to_index(e.answer, e.passage);
  if (idx.start_idx >= out.passage_kept) {
    out.dropped = true;
    return out;
  }
  const std::uint32_t end = std::min(idx.end_idx, out.passage_kept - 1);
  in.target = IndexSpan{idx.start_idx + out.passage_offset, end + out.passage_offset};
  return out;
}

TimeSpan span_to_time(const IndexSpan& token_span, const PreparedExample& prep,
                      const SqaExample& e) {
  require(token_span.start_idx >= prep.passage_offset &&
              token_span.end_idx < prep.passage_offset + prep.passage_kept &&
              token_span.start_idx <= token_span.end_idx,
          ErrorCode::kOutOfRange, "token span lies outside the passage");
  return index_to_time({token_span.start_idx - prep.passage_offset,
                        token_span.end_idx - prep.passage_offset},
                       e.passage);
}

// ---------------------------------------------------------------------------
// Synthetic task

namespace {

using Lexicon = std::vector<std::vector<UnitId>>;

// Distinct words of min_len..max_len symbols over [0, alphabet) with no
// adjacent repeats; every symbol appears in some word.
Lexicon make_lexicon(std::uint32_t words, std::uint32_t alphabet, std::uint32_t min_len,
                     std::uint32_t max_len, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint32_t> len_dist(min_len, max_len);
  std::uniform_int_distribution<UnitId> sym(0, alphabet - 1);

  // Lengths first, lengthened until every symbol fits at least once.
  std::vector<std::uint32_t> lengths(words);
  std::size_t total = 0;
  for (auto& n : lengths) total += (n = len_dist(rng));
  for (std::size_t i = 0; total < alphabet; i = (i + 1) % words)
    if (lengths[i] < max_len) ++lengths[i], ++total;

  // The first `alphabet` slots take a permutation of all symbols; the rest
  // are random. Only words with random slots can collide, and those redraw.
  std::vector<UnitId> perm(alphabet);
  std::iota(perm.begin(), perm.end(), 0u);
  std::shuffle(perm.begin(), perm.end(), rng);
  Lexicon lex(words);
  std::set<std::vector<UnitId>> seen;
  std::size_t slot = 0;
  for (std::uint32_t w = 0; w < words; ++w) {
    const std::size_t first = slot;
    slot += lengths[w];
    for (int attempt = 0;; ++attempt) {
      require(attempt < 10000, ErrorCode::kInvalidArgument,
              "cannot build a lexicon of distinct words with this configuration");
      auto& word = lex[w];
      word.assign(lengths[w], 0);
      for (std::size_t k = 0; k < word.size(); ++k) {
        if (first + k < alphabet) {
          word[k] = perm[first + k];
        } else {
          do word[k] = sym(rng);
          while ((k > 0 && word[k] == word[k - 1]) ||
                 (k + 1 < word.size() && first + k + 1 < alphabet && word[k] == perm[first + k + 1]));
        }
      }
      if (seen.insert(word).second) break;
    }
  }
  return lex;
}

std::discrete_distribution<std::uint32_t> zipf(std::uint32_t n, double exponent) {
  std::vector<double> weights(n);
  for (std::uint32_t r = 0; r < n; ++r) weights[r] = 1.0 / std::pow(static_cast<double>(r + 1), exponent);
  return {weights.begin(), weights.end()};
}

bool contains_once(const std::vector<UnitId>& hay, const std::vector<UnitId>& needle) {
  std::size_t hits = 0;
  auto it = hay.begin();
  while ((it = std::search(it, hay.end(), needle.begin(), needle.end())) != hay.end()) {
    ++hits;
    ++it;
  }
  return hits == 1;
}

// Passage of `n` words with `query` at a random slot exactly once. Adjacent
// words never share a boundary symbol, so word edges stay unit edges, and the
// query's symbol string occurs nowhere else.
std::vector<std::uint32_t> make_passage(const Lexicon& lex, std::uint32_t query, std::uint32_t n,
                                        std::discrete_distribution<std::uint32_t>& word_dist,
                                        std::mt19937_64& rng) {
  std::uniform_int_distribution<std::uint32_t> slot_dist(0, n - 1);
  for (int attempt = 0; attempt < 10000; ++attempt) {
    const std::uint32_t slot = slot_dist(rng);
    std::vector<std::uint32_t> words(n);
    bool ok = true;
    for (std::uint32_t i = 0; i < n && ok; ++i) {
      if (i == slot) {
        words[i] = query;
      } else {
        int tries = 0;
        do words[i] = word_dist(rng);
        while (words[i] == query && ++tries < 1000);
        ok = words[i] != query;
      }
      if (ok && i > 0 && lex[words[i - 1]].back() == lex[words[i]].front()) ok = false;
    }
    if (!ok) continue;
    std::vector<UnitId> units;
    for (auto w : words) units.insert(units.end(), lex[w].begin(), lex[w].end());
    if (contains_once(units, lex[query])) return words;
  }
  fail(ErrorCode::kInvalidArgument, "cannot place the query word unambiguously; lexicon too small");
}

std::string word_text(std::uint32_t w) {
  std::ostringstream s;
  s << 'w' << std::setw(3) << std::setfill('0') << w;
  return s.str();
}

}  // namespace

void SynthConfig::validate() const {
  auto check = [](bool ok, const std::string& what) {
    require(ok, ErrorCode::kInvalidArgument, "synthetic task: " + what);
  };
  check(vocab_words >= 2, "vocab_words must be at least 2");
  check(min_units_per_word >= 1 && min_units_per_word <= max_units_per_word,
        "units_per_word range is empty");
  check(num_units >= 2, "K must be at least 2");
  check(static_cast<std::uint64_t>(vocab_words) * max_units_per_word >= num_units,
        "the lexicon cannot use all K units");
  check(passage_words >= 2, "passage_words must be at least 2");
  check(min_repeat >= 1 && min_repeat <= max_repeat, "repeat_range is empty");
  check(noise_sigma >= 0.0 && std::isfinite(noise_sigma), "noise_sigma must be >= 0");
  check(dim >= 1, "dim must be positive");
  check(zipf_exponent >= 0.0, "zipf_exponent must be >= 0");
  check(frame_period_us > 0, "frame_period_us must be positive");
  check(n_train + n_dev + n_test > 0, "no examples requested");
}

json to_json(const SynthConfig& c) {
  return {{"vocab_words", c.vocab_words},
          {"units_per_word", {c.min_units_per_word, c.max_units_per_word}},
          {"K", c.num_units},
          {"n_train", c.n_train},
          {"n_dev", c.n_dev},
          {"n_test", c.n_test},
          {"passage_words", c.passage_words},
          {"repeat_range", {c.min_repeat, c.max_repeat}},
          {"noise_sigma", c.noise_sigma},
          {"dim", c.dim},
          {"zipf_exponent", c.zipf_exponent},
          {"frame_period_us", c.frame_period_us},
          {"seed", c.seed}};
}

namespace {

std::pair<std::uint32_t, std::uint32_t> range_field(const json& v, const std::string& name) {
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_unsigned() || !v[1].is_number_unsigned())
    fail(ErrorCode::kSchema, "field '" + name + "' must be [min, max]");
  return {v[0].get<std::uint32_t>(), v[1].get<std::uint32_t>()};
}

template <typename Config, typename Handlers>
Config apply_fields(const json& j, Config c, const Handlers& handlers, const std::string& what) {
  if (!j.is_object()) fail(ErrorCode::kSchema, what + " must be an object");
  for (const auto& [key, value] : j.items()) {
    auto it = handlers.find(key);
    if (it == handlers.end()) fail(ErrorCode::kSchema, what + ": unknown field '" + key + "'");
    try {
      it->second(c, value);
    } catch (const json::exception&) {
      fail(ErrorCode::kSchema, what + ": field '" + key + "' has the wrong type");
    }
  }
  return c;
}

}  // namespace

SynthConfig synth_config_from_json(const json& j) {
  using H = std::function<void(SynthConfig&, const json&)>;
  static const std::map<std::string, H> handlers = {
      {"vocab_words", [](SynthConfig& c, const json& v) { c.vocab_words = v.get<std::uint32_t>(); }},
      {"units_per_word",
       [](SynthConfig& c, const json& v) {
         std::tie(c.min_units_per_word, c.max_units_per_word) = range_field(v, "units_per_word");
       }},
      {"K", [](SynthConfig& c, const json& v) { c.num_units = v.get<std::uint32_t>(); }},
      {"n_train", [](SynthConfig& c, const json& v) { c.n_train = v.get<std::uint32_t>(); }},
      {"n_dev", [](SynthConfig& c, const json& v) { c.n_dev = v.get<std::uint32_t>(); }},
      {"n_test", [](SynthConfig& c, const json& v) { c.n_test = v.get<std::uint32_t>(); }},
      {"passage_words", [](SynthConfig& c, const json& v) { c.passage_words = v.get<std::uint32_t>(); }},
      {"repeat_range",
       [](SynthConfig& c, const json& v) {
         std::tie(c.min_repeat, c.max_repeat) = range_field(v, "repeat_range");
       }},
      {"noise_sigma", [](SynthConfig& c, const json& v) { c.noise_sigma = v.get<double>(); }},
      {"dim", [](SynthConfig& c, const json& v) { c.dim = v.get<std::uint32_t>(); }},
      {"zipf_exponent", [](SynthConfig& c, const json& v) { c.zipf_exponent = v.get<double>(); }},
      {"frame_period_us", [](SynthConfig& c, const json& v) { c.frame_period_us = v.get<std::uint32_t>(); }},
      {"seed", [](SynthConfig& c, const json& v) { c.seed = v.get<std::uint64_t>(); }},
  };
  SynthConfig c = apply_fields(j, SynthConfig{}, handlers, "synth config");
  c.validate();
  return c;
}

SynthSummary gen_synthetic_task(const SynthConfig& cfg, const std::string& dir) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  SynthSummary summary;
  summary.lexicon = make_lexicon(cfg.vocab_words, cfg.num_units, cfg.min_units_per_word,
                                 cfg.max_units_per_word, rng);
  const Lexicon& lex = summary.lexicon;

  RowMatrixF anchors(cfg.num_units, cfg.dim);
  {
    std::normal_distribution<float> gauss(0.0f, 1.0f);
    for (Eigen::Index i = 0; i < anchors.size(); ++i) anchors.data()[i] = gauss(rng);
  }

  fs::create_directories(fs::path(dir) / "feats");
  auto word_dist = zipf(cfg.vocab_words, cfg.zipf_exponent);
  std::uniform_int_distribution<std::uint32_t> repeat_dist(cfg.min_repeat, cfg.max_repeat);
  const std::uint32_t period = cfg.frame_period_us;
  auto seconds = [period](std::uint64_t frame) {
    return static_cast<double>(frame * period) * 1e-6;
  };
  auto frames_of = [&](const std::vector<UnitId>& units, std::vector<UnitId>& frames) {
    for (UnitId u : units) frames.insert(frames.end(), repeat_dist(rng), u);
  };

  std::string truth;
  const std::pair<const char*, std::uint32_t> splits[] = {
      {"train", cfg.n_train}, {"dev", cfg.n_dev}, {"test", cfg.n_test}};
  for (const auto& [split, count] : splits) {
    std::vector<ManifestRecord> records;
    for (std::uint32_t n = 0; n < count; ++n) {
      char id_buf[64];
      std::snprintf(id_buf, sizeof id_buf, "%s-%05u", split, n);
      const std::string id = id_buf;
      const std::uint32_t query = word_dist(rng);
      const auto words = make_passage(lex, query, cfg.passage_words, word_dist, rng);

      std::vector<UnitId> q_frames, p_frames;
      frames_of(lex[query], q_frames);
      ManifestRecord r;
      r.id = id;
      TimedTranscript transcript;
      for (auto w : words) {
        const std::uint64_t start = p_frames.size();
        frames_of(lex[w], p_frames);
        transcript.words.push_back({word_text(w), seconds(start), seconds(p_frames.size())});
        if (w == query) r.answer = {seconds(start), seconds(p_frames.size())};
      }
      r.transcript = std::move(transcript);
      r.answer_text = std::vector<std::string>{word_text(query)};
      r.question_feat = "feats/" + id + ".q.feat";
      r.passage_feat = "feats/" + id + ".p.feat";
      const std::uint64_t q_seed = rng(), p_seed = rng();
      write_features(synth_features(q_frames, anchors, cfg.noise_sigma, q_seed, period),
                     (fs::path(dir) / r.question_feat).string());
      write_features(synth_features(p_frames, anchors, cfg.noise_sigma, p_seed, period),
                     (fs::path(dir) / r.passage_feat).string());
      truth += json{{"id", id}, {"question_units", q_frames}, {"passage_units", p_frames}}.dump();
      truth += '\n';
      records.push_back(std::move(r));
    }
    write_manifest(records, (fs::path(dir) / (std::string(split) + ".jsonl")).string());
  }
  summary.train = cfg.n_train;
  summary.dev = cfg.n_dev;
  summary.test = cfg.n_test;
  binio::write_file_atomic((fs::path(dir) / "truth.jsonl").string(), truth);

  json words = json::array();
  for (std::uint32_t w = 0; w < lex.size(); ++w) words.push_back({{"text", word_text(w)}, {"units", lex[w]}});
  json meta = {{"generator", "synthetic_sqa"}, {"config", to_json(cfg)}, {"seed", cfg.seed}, {"lexicon", words}};
  binio::write_file_atomic((fs::path(dir) / "meta.json").string(), meta.dump(2) + "\n");
  return summary;
}

// ---------------------------------------------------------------------------
// Donor corpus

void DonorCorpusConfig::validate() const {
  auto check = [](bool ok, const std::string& what) {
    require(ok, ErrorCode::kInvalidArgument, "donor corpus: " + what);
  };
  check(vocab_size >= 2, "vocab_size must be at least 2");
  check(min_segment >= 1 && min_segment <= max_segment, "segment range is empty");
  check(min_chunk >= 1 && min_chunk <= max_chunk, "chunk range is empty");
  check(passage_tokens >= max_segment, "passage_tokens must hold the longest segment");
  check(sequences >= 1, "sequences must be positive");
  check(zipf_exponent >= 0.0, "zipf_exponent must be >= 0");
}

json to_json(const DonorCorpusConfig& c) {
  return {{"vocab_size", c.vocab_size},
          {"segment", {c.min_segment, c.max_segment}},
          {"chunk", {c.min_chunk, c.max_chunk}},
          {"passage_tokens", c.passage_tokens},
          {"sequences", c.sequences},
          {"zipf_exponent", c.zipf_exponent},
          {"seed", c.seed}};
}

DonorCorpusConfig donor_corpus_config_from_json(const json& j) {
  using H = std::function<void(DonorCorpusConfig&, const json&)>;
  static const std::map<std::string, H> handlers = {
      {"vocab_size", [](DonorCorpusConfig& c, const json& v) { c.vocab_size = v.get<std::uint32_t>(); }},
      {"segment",
       [](DonorCorpusConfig& c, const json& v) {
         std::tie(c.min_segment, c.max_segment) = range_field(v, "segment");
       }},
      {"chunk",
       [](DonorCorpusConfig& c, const json& v) {
         std::tie(c.min_chunk, c.max_chunk) = range_field(v, "chunk");
       }},
      {"passage_tokens", [](DonorCorpusConfig& c, const json& v) { c.passage_tokens = v.get<std::uint32_t>(); }},
      {"sequences", [](DonorCorpusConfig& c, const json& v) { c.sequences = v.get<std::uint32_t>(); }},
      {"zipf_exponent", [](DonorCorpusConfig& c, const json& v) { c.zipf_exponent = v.get<double>(); }},
      {"seed", [](DonorCorpusConfig& c, const json& v) { c.seed = v.get<std::uint64_t>(); }},
  };
  DonorCorpusConfig c = apply_fields(j, DonorCorpusConfig{}, handlers, "donor corpus config");
  c.validate();
  return c;
}

DonorCorpus gen_donor_corpus(const DonorCorpusConfig& cfg, const ModelConfig& model) {
  cfg.validate();
  model.validate();
  require(model.num_units == cfg.vocab_size, ErrorCode::kDimMismatch,
          "donor model vocabulary differs from the corpus vocabulary");
  require(cfg.max_segment + cfg.passage_tokens + 3 <= model.max_len, ErrorCode::kInvalidArgument,
          "donor sequences would exceed max_len");
  std::mt19937_64 rng(cfg.seed);
  auto token_dist = zipf(cfg.vocab_size, cfg.zipf_exponent);
  std::uniform_int_distribution<std::uint32_t> seg_len(cfg.min_segment, cfg.max_segment);
  std::uniform_int_distribution<std::uint32_t> chunk_len(cfg.min_chunk, cfg.max_chunk);
  auto draw = [&](std::vector<TokenId>& out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
      TokenId t;
      do t = token_dist(rng);
      while (!out.empty() && t == out.back());
      out.push_back(t);
    }
  };

  DonorCorpus corpus;
  std::vector<std::uint64_t> counts(cfg.vocab_size, 0);
  for (std::uint32_t n = 0; n < cfg.sequences; ++n) {
    std::vector<TokenId> segment;
    draw(segment, seg_len(rng));
    std::vector<std::vector<TokenId>> chunks;
    for (std::size_t at = 0; at < segment.size();) {
      const std::size_t len = std::min<std::size_t>(chunk_len(rng), segment.size() - at);
      chunks.emplace_back(segment.begin() + at, segment.begin() + at + len);
      at += len;
    }
    std::shuffle(chunks.begin(), chunks.end(), rng);
    // Filler counts for the chunks.size() + 1 gaps.
    std::vector<std::size_t> gaps(chunks.size() + 1, 0);
    std::uniform_int_distribution<std::size_t> gap_pick(0, chunks.size());
    for (std::size_t f = segment.size(); f < cfg.passage_tokens; ++f) ++gaps[gap_pick(rng)];
    std::vector<TokenId> passage;
    for (std::size_t c = 0; c <= chunks.size(); ++c) {
      draw(passage, gaps[c]);
      if (c < chunks.size()) passage.insert(passage.end(), chunks[c].begin(), chunks[c].end());
    }

    MaskedCorpusItem item;
    item.tokens.push_back(model.bos());
    item.tokens.insert(item.tokens.end(), segment.begin(), segment.end());
    item.global_mask.assign(item.tokens.size(), 1);
    item.tokens.push_back(model.sep());
    item.tokens.insert(item.tokens.end(), passage.begin(), passage.end());
    item.tokens.push_back(model.eos());
    item.global_mask.resize(item.tokens.size(), 0);
    for (TokenId t : item.tokens)
      if (t < cfg.vocab_size) ++counts[t];
    corpus.items.push_back(std::move(item));
  }
  corpus.frequency_ranking.resize(cfg.vocab_size);
  std::iota(corpus.frequency_ranking.begin(), corpus.frequency_ranking.end(), 0u);
  std::stable_sort(corpus.frequency_ranking.begin(), corpus.frequency_ranking.end(),
                   [&](std::uint32_t a, std::uint32_t b) { return counts[a] > counts[b]; });
  return corpus;
}

}  // namespace dual
