// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

#include "dual/pipeline.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>
#include <random>
#include <set>

#include "dual/binio.hpp"
#include "dual/cascade.hpp"
#include "dual/checkpoint.hpp"
#include "dual/datakit.hpp"
#include "dual/error.hpp"
#include "dual/metrics.hpp"
#include "dual/model.hpp"
#include "dual/parallel.hpp"
#include "dual/plot.hpp"
#include "dual/quantizer.hpp"
#include "dual/trainer.hpp"

namespace dual {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::atomic<int> g_verbosity{0};

template <typename... Args>
void progress(const char* fmt, Args... args) {
  if (g_verbosity.load() <= 0) return;
  std::fprintf(stderr, "[dual] ");
  std::fprintf(stderr, fmt, args...);
  std::fputc('\n', stderr);
}

// Reads keys from a config object, records the effective value of each, and
// rejects keys nobody asked for.
class ConfigReader {
 public:
  ConfigReader(const json& j, std::string what) : src_(j), what_(std::move(what)) {
    if (!j.is_object()) fail(ErrorCode::kSchema, what_ + " must be a JSON object");
  }

  template <typename T>
  T get(const std::string& key, T fallback) {
    used_.insert(key);
    T value = fallback;
    if (auto it = src_.find(key); it != src_.end() && !it->is_null()) value = convert<T>(key, *it);
    effective_[key] = value;
    return value;
  }

  template <typename T>
  T require_key(const std::string& key) {
    used_.insert(key);
    auto it = src_.find(key);
    if (it == src_.end() || it->is_null())
      fail(ErrorCode::kSchema, what_ + ": missing field '" + key + "'");
    T value = convert<T>(key, *it);
    effective_[key] = value;
    return value;
  }

  template <typename T>
  std::optional<T> optional(const std::string& key) {
    used_.insert(key);
    auto it = src_.find(key);
    if (it == src_.end() || it->is_null()) return std::nullopt;
    T value = convert<T>(key, *it);
    effective_[key] = value;
    return value;
  }

  // Nested object handed to a module parser; `effective` replaces the echo.
  json object(const std::string& key) {
    used_.insert(key);
    auto it = src_.find(key);
    if (it == src_.end() || it->is_null()) return json::object();
    if (!it->is_object()) fail(ErrorCode::kSchema, what_ + ": field '" + key + "' must be an object");
    return *it;
  }
  void set_effective(const std::string& key, json value) { effective_[key] = std::move(value); }

  json finish() {
    for (const auto& [key, value] : src_.items())
      if (!used_.contains(key)) fail(ErrorCode::kSchema, what_ + ": unknown field '" + key + "'");
    return effective_;
  }

 private:
  template <typename T>
  T convert(const std::string& key, const json& v) {
    try {
      if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
        // Literals built in C++ are stored signed; parsed ones are unsigned.
        if (!v.is_number_integer() || v.get<std::int64_t>() < 0)
          throw std::invalid_argument("not a non-negative integer");
        if (v.get<std::uint64_t>() > std::numeric_limits<T>::max()) throw std::out_of_range("too large");
      }
      return v.get<T>();
    } catch (const std::exception&) {
      fail(ErrorCode::kSchema, what_ + ": field '" + key + "' has the wrong type");
    }
  }

  json src_;  // owned: callers often pass temporaries
  std::string what_;
  std::set<std::string> used_;
  json effective_ = json::object();
};

std::string path_in(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void prepare_out_dir(const std::string& out_dir) {
  require(!out_dir.empty(), ErrorCode::kInvalidArgument, "output directory is empty");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  require(!ec && fs::is_directory(out_dir), ErrorCode::kIo,
          "cannot create output directory '" + out_dir + "'");
}

void write_run_record(const std::string& out_dir, const std::string& command,
                      const json& effective, std::uint64_t seed) {
  json rec = {{"command", command}, {"config", effective}, {"seed", seed}, {"version", kVersion}};
  binio::write_file_atomic(path_in(out_dir, "run.json"), rec.dump(2) + "\n");
}

std::string jsonl(const std::vector<json>& records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

std::vector<json> read_jsonl(const std::string& path) {
  const std::string text = binio::read_file(path);
  std::vector<json> out;
  std::size_t lineno = 0, pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    const std::string line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      fail(ErrorCode::kSchema, path + ":" + std::to_string(lineno) + ": malformed JSON");
    }
  }
  return out;
}

json span_json(const TimeSpan& s) { return json::array({s.start, s.end}); }

struct Predictor {
  ModelParams<float> model;
  std::uint32_t max_answer_len;

  TimeSpan operator()(const SqaExample& e) const {
    const PreparedExample prep = prepare(e, model.config);
    const SpanLogits<float> logits = forward(model, prep.input);
    const IndexSpan span = decode_span<float>(logits.start, logits.end, prep.input.passage_mask,
                                              max_answer_len);
    return span_to_time(span, prep, e);
  }
};

std::map<std::string, TimeSpan> predict_all(const Predictor& predict,
                                            const std::vector<SqaExample>& examples,
                                            unsigned threads) {
  std::vector<TimeSpan> spans(examples.size());
  parallel_for(examples.size(), threads, [&](std::size_t i) { spans[i] = predict(examples[i]); });
  std::map<std::string, TimeSpan> out;
  for (std::size_t i = 0; i < examples.size(); ++i) out[examples[i].id] = spans[i];
  return out;
}

std::map<std::string, TimeSpan> golds_of(const std::vector<SqaExample>& examples) {
  std::map<std::string, TimeSpan> out;
  for (const auto& e : examples) out[e.id] = e.answer;
  return out;
}

double frame_period_of(const std::vector<SqaExample>& examples) {
  return examples.empty() ? kDefaultFramePeriodUs * 1e-6 : examples.front().passage.frame_period();
}

json summary_record(const EvalResult& r) {
  return {{"summary", true},
          {"examples", r.examples.size()},
          {"ff1", r.ff1},
          {"aos", r.aos},
          {"ff1_micro", r.ff1_micro},
          {"aos_micro", r.aos_micro},
          {"missing", r.missing_ids.size()}};
}

}  // namespace

void set_verbosity(int level) { g_verbosity.store(level); }

std::vector<std::string> expand_glob(const std::string& pattern) {
  const fs::path p(pattern);
  const std::string leaf = p.filename().string();
  if (leaf.find_first_of("*?[") == std::string::npos) {
    require(fs::is_regular_file(p), ErrorCode::kIo, "input '" + pattern + "' does not exist");
    return {pattern};
  }
  const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  require(fs::is_directory(dir), ErrorCode::kIo, "directory '" + dir.string() + "' does not exist");
  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.is_regular_file() && fnmatch(leaf.c_str(), entry.path().filename().c_str(), 0) == 0)
      out.push_back((p.has_parent_path() ? dir / entry.path().filename() : entry.path().filename()).string());
  std::sort(out.begin(), out.end());
  require(!out.empty(), ErrorCode::kIo, "pattern '" + pattern + "' matched no files");
  return out;
}

// ---------------------------------------------------------------------------

json run_synth(const json& cfg, const std::string& out_dir) {
  json body = cfg;
  if (body.is_object()) body.erase("threads");
  const SynthConfig sc = synth_config_from_json(body);
  prepare_out_dir(out_dir);
  progress("synth: %u/%u/%u examples into %s", sc.n_train, sc.n_dev, sc.n_test, out_dir.c_str());
  const SynthSummary s = gen_synthetic_task(sc, out_dir);
  write_run_record(out_dir, "synth", to_json(sc), sc.seed);
  return {{"train", s.train}, {"dev", s.dev}, {"test", s.test}, {"lexicon_words", s.lexicon.size()}};
}

json run_kmeans(const json& cfg, const std::string& out_dir) {
  ConfigReader r(cfg, "kmeans config");
  const auto inputs = r.require_key<std::vector<std::string>>("inputs");
  KMeansOptions opts;
  opts.k = r.get<std::uint32_t>("k", 64);
  opts.max_iters = r.get<std::uint32_t>("max_iters", 100);
  opts.rel_tol = r.get<double>("rel_tol", 1e-6);
  opts.seed = r.get<std::uint64_t>("seed", 0);
  opts.threads = r.get<unsigned>("threads", 1);
  json effective = r.finish();
  effective.erase("threads");

  std::vector<std::string> files;
  for (const auto& pattern : inputs)
    for (auto& f : expand_glob(pattern)) files.push_back(std::move(f));
  require(!files.empty(), ErrorCode::kInvalidArgument, "kmeans: no input features");
  std::vector<FeatureMatrix> feats(files.size());
  parallel_for(files.size(), opts.threads, [&](std::size_t i) { feats[i] = read_features(files[i]); });

  prepare_out_dir(out_dir);
  progress("kmeans: K=%u over %zu files", opts.k, files.size());
  KMeansTrace trace;
  const Codebook cb = train_codebook(feats, opts, &trace);
  write_codebook(cb, path_in(out_dir, "codebook.cdbk"));
  std::vector<json> lines;
  for (std::size_t i = 0; i < trace.inertia.size(); ++i)
    lines.push_back({{"iteration", i}, {"inertia", trace.inertia[i]}});
  binio::write_file_atomic(path_in(out_dir, "kmeans_trace.jsonl"), jsonl(lines));
  write_run_record(out_dir, "kmeans", effective, opts.seed);
  std::uint64_t frames = 0;
  for (const auto& f : feats) frames += f.n_frames;
  return {{"k", cb.k()},
          {"dim", cb.dim()},
          {"files", files.size()},
          {"frames", frames},
          {"iterations", trace.inertia.size()},
          {"inertia", cb.train_inertia},
          {"empty_repairs", trace.empty_repairs}};
}

json run_pretrain(const json& cfg, const std::string& out_dir) {
  ConfigReader r(cfg, "pretrain config");
  const std::uint64_t seed = r.get<std::uint64_t>("seed", 0);
  const unsigned threads = r.get<unsigned>("threads", 1);
  DonorCorpusConfig cc = donor_corpus_config_from_json(r.object("corpus"));
  json model_json = r.object("model");
  if (model_json.contains("num_units") && model_json["num_units"] != cc.vocab_size)
    fail(ErrorCode::kDimMismatch, "pretrain: model.num_units must equal corpus.vocab_size");
  model_json["num_units"] = cc.vocab_size;
  const ModelConfig mc = model_config_from_json(model_json);
  json train_json = r.object("train");
  TrainConfig tc = train_config_from_json(train_json);
  tc.seed = seed;
  tc.threads = threads;
  r.set_effective("corpus", to_json(cc));
  r.set_effective("model", to_json(mc));
  json tj = to_json(tc);
  tj.erase("threads");
  r.set_effective("train", tj);
  json effective = r.finish();
  effective.erase("threads");

  prepare_out_dir(out_dir);
  const DonorCorpus corpus = gen_donor_corpus(cc, mc);
  progress("pretrain: %zu sequences, %u steps", corpus.items.size(), tc.total_steps);
  std::vector<json> log;
  TrainHooks<MaskedLmParams<float>> hooks;
  hooks.on_log = [&](const TrainLogEntry& e) {
    log.push_back(to_json(e));
    if (e.step % 500 == 0) progress("pretrain step %u loss %.4f", e.step, e.loss);
  };
  const auto result = pretrain_masked(corpus.items, init_masked_lm<float>(mc, seed), tc, hooks);
  json meta = {{"frequency_ranking", corpus.frequency_ranking}, {"corpus", to_json(cc)}};
  save_masked_lm(result.params, path_in(out_dir, "donor.ckpt"), meta);
  binio::write_file_atomic(path_in(out_dir, "pretrain_log.jsonl"), jsonl(log));
  write_run_record(out_dir, "pretrain", effective, seed);
  return {{"steps", tc.total_steps},
          {"final_loss", log.empty() ? 0.0 : log.back()["loss"].get<double>()},
          {"sequences", corpus.items.size()}};
}

json run_train(const json& cfg, const std::string& out_dir) {
  ConfigReader r(cfg, "train config");
  const std::uint64_t seed = r.get<std::uint64_t>("seed", 0);
  const unsigned threads = r.get<unsigned>("threads", 1);
  const auto manifest = r.require_key<std::string>("manifest");
  const auto dev_manifest = r.optional<std::string>("dev_manifest");
  const auto codebook_path = r.require_key<std::string>("codebook");
  const auto donor_path = r.optional<std::string>("donor");
  const auto resume_path = r.optional<std::string>("resume");
  const auto stop_after = r.optional<std::uint32_t>("stop_after");
  const std::string embedding = r.get<std::string>("embedding", donor_path ? "most_frequent" : "scratch");
  const std::uint32_t max_answer_len = r.get<std::uint32_t>("max_answer_len", 64);
  const EmbeddingStrategy strategy = parse_strategy(embedding);

  const Codebook cb = read_codebook(codebook_path);
  json model_json = r.object("model");
  if (model_json.contains("num_units") && model_json["num_units"] != cb.k())
    fail(ErrorCode::kDimMismatch, "train: model.num_units differs from the codebook size");
  model_json["num_units"] = cb.k();
  const ModelConfig mc = model_config_from_json(model_json);
  TrainConfig tc = train_config_from_json(r.object("train"));
  tc.seed = seed;
  tc.threads = threads;
  r.set_effective("model", to_json(mc));
  json tj = to_json(tc);
  tj.erase("threads");
  r.set_effective("train", tj);
  json effective = r.finish();
  effective.erase("threads");
  require(max_answer_len >= 1, ErrorCode::kInvalidArgument, "max_answer_len must be positive");

  const auto train_examples = load_manifest(manifest, cb, threads);
  std::vector<ModelInput> dataset;
  std::size_t dropped = 0;
  for (const auto& e : train_examples) {
    PreparedExample p = prepare(e, mc);
    if (p.dropped) {
      ++dropped;
      continue;
    }
    dataset.push_back(std::move(p.input));
  }
  progress("train: %zu examples (%zu dropped by truncation)", dataset.size(), dropped);
  require(!dataset.empty(), ErrorCode::kInvalidArgument, "train: no usable training examples");

  std::vector<SqaExample> dev;
  if (dev_manifest) dev = load_manifest(*dev_manifest, cb, threads);
  const auto dev_golds = golds_of(dev);
  const double period = frame_period_of(dev);

  prepare_out_dir(out_dir);
  std::vector<json> log;
  TrainHooks<ModelParams<float>> hooks;
  hooks.stop_after = stop_after;
  if (!dev.empty())
    hooks.validate = [&](const ModelParams<float>& m) {
      return evaluate(predict_all({m, max_answer_len}, dev, threads), dev_golds, period).ff1;
    };
  hooks.on_log = [&](const TrainLogEntry& e) {
    log.push_back(to_json(e));
    if (e.eval_ff1) progress("train step %u loss %.4f dev_ff1 %.4f", e.step, e.loss, *e.eval_ff1);
  };

  TrainResult<ModelParams<float>> result;
  if (resume_path) {
    TrainState<ModelParams<float>> state = decode_train_state(binio::read_file(*resume_path), *resume_path);
    require(state.params.config == mc, ErrorCode::kDimMismatch,
            "train: resume state was produced with a different model config");
    result = resume(dataset, std::move(state), tc, hooks);
  } else {
    ModelParams<float> init;
    if (donor_path && strategy != EmbeddingStrategy::kScratch) {
      json meta;
      const MaskedLmParams<float> donor = load_masked_lm(*donor_path, &meta);
      const std::uint32_t V = donor.config.num_units;
      const std::vector<std::uint32_t> ranking =
          meta.value("frequency_ranking", std::vector<std::uint32_t>{});
      const Mat<float> table = donor.encoder.tokens.topRows(V);
      const EmbeddingAssignment assignment =
          assign_embeddings(table, ranking, strategy, mc.num_units, seed + 1);
      init = build_model(mc, &donor, assignment, seed);
    } else {
      init = init_model<float>(mc, seed);
    }
    result = train(dataset, std::move(init), tc, hooks);
  }

  json meta = {{"max_answer_len", max_answer_len}, {"embedding", to_string(strategy)},
               {"best_step", result.best_step}};
  save_model(result.params, path_in(out_dir, "model.ckpt"), meta);
  binio::write_file_atomic(path_in(out_dir, "train_state.bin"), encode_train_state(result.state));
  binio::write_file_atomic(path_in(out_dir, "train_log.jsonl"), jsonl(log));
  write_run_record(out_dir, "train", effective, seed);
  json summary = {{"examples", dataset.size()},
                  {"dropped", dropped},
                  {"steps", result.state.step},
                  {"best_step", result.best_step},
                  {"final_loss", log.empty() ? 0.0 : log.back()["loss"].get<double>()}};
  if (!dev.empty()) summary["best_dev_ff1"] = result.best_score;
  return summary;
}

json run_eval(const json& cfg, const std::string& out_dir) {
  ConfigReader r(cfg, "eval config");
  const std::uint64_t seed = r.get<std::uint64_t>("seed", 0);
  const unsigned threads = r.get<unsigned>("threads", 1);
  const auto manifest = r.require_key<std::string>("manifest");
  const auto codebook_path = r.require_key<std::string>("codebook");
  const auto checkpoint = r.require_key<std::string>("checkpoint");
  const auto max_answer_len_opt = r.optional<std::uint32_t>("max_answer_len");
  const std::uint32_t bins = r.get<std::uint32_t>("histogram_bins", 20);
  json effective = r.finish();
  effective.erase("threads");

  json meta;
  ModelParams<float> model = load_model(checkpoint, &meta);
  const std::uint32_t max_answer_len =
      max_answer_len_opt.value_or(meta.value("max_answer_len", std::uint32_t{64}));
  const Codebook cb = read_codebook(codebook_path);
  require(cb.k() == model.config.num_units, ErrorCode::kDimMismatch,
          "eval: codebook has " + std::to_string(cb.k()) + " units but the model expects " +
              std::to_string(model.config.num_units));
  const auto examples = load_manifest(manifest, cb, threads);
  progress("eval: %zu examples", examples.size());

  const auto preds = predict_all({std::move(model), max_answer_len}, examples, threads);
  const auto golds = golds_of(examples);
  const EvalResult result = evaluate(preds, golds, frame_period_of(examples));

  prepare_out_dir(out_dir);
  std::vector<json> lines;
  std::vector<double> ff1s;
  for (const auto& s : result.examples) {
    lines.push_back({{"id", s.id},
                     {"pred", span_json(preds.at(s.id))},
                     {"gold", span_json(golds.at(s.id))},
                     {"ff1", s.ff1},
                     {"aos", s.aos}});
    ff1s.push_back(s.ff1);
  }
  const json summary = summary_record(result);
  lines.push_back(summary);
  binio::write_file_atomic(path_in(out_dir, "eval_report.jsonl"), jsonl(lines));
  binio::write_file_atomic(path_in(out_dir, "ff1_hist.svg"),
                           plot::histogram("Per-example FF1", "FF1", ff1s, bins));
  write_run_record(out_dir, "eval", effective, seed);
  return summary;
}

json run_cascade(const json& cfg, const std::string& out_dir) {
  ConfigReader r(cfg, "cascade config");
  const std::uint64_t seed = r.get<std::uint64_t>("seed", 0);
  const unsigned threads = r.get<unsigned>("threads", 1);
  const auto manifest = r.require_key<std::string>("manifest");
  ConfigReader noise(r.object("noise"), "cascade noise config");
  const auto fixed = noise.optional<double>("target_wer");
  const auto range = noise.optional<std::vector<double>>("target_wer_range");
  const double p_sub = noise.get<double>("sub", 1.0 / 3.0);
  const double p_del = noise.get<double>("del", 1.0 / 3.0);
  const double p_ins = noise.get<double>("ins", 1.0 / 3.0);
  auto vocabulary = noise.optional<std::vector<std::string>>("vocabulary");
  r.set_effective("noise", noise.finish());
  json effective = r.finish();
  effective.erase("threads");
  require(fixed.has_value() != range.has_value(), ErrorCode::kSchema,
          "cascade noise config: give exactly one of 'target_wer' and 'target_wer_range'");
  double lo = fixed.value_or(0.0), hi = lo;
  if (range) {
    require(range->size() == 2 && (*range)[0] <= (*range)[1], ErrorCode::kSchema,
            "cascade noise config: 'target_wer_range' must be [lo, hi] with lo <= hi");
    lo = (*range)[0];
    hi = (*range)[1];
  }

  const auto records = read_manifest(manifest);
  const fs::path base = fs::path(manifest).parent_path();
  for (const auto& rec : records)
    require(rec.transcript && rec.answer_text, ErrorCode::kSchema,
            "cascade: record '" + rec.id + "' lacks 'transcript' or 'answer_text'");
  if (!vocabulary) {
    std::set<std::string> words;
    for (const auto& rec : records)
      for (const auto& w : rec.transcript->words) words.insert(w.text);
    vocabulary.emplace(words.begin(), words.end());
  }
  double period = kDefaultFramePeriodUs * 1e-6;
  if (!records.empty())
    period = read_features((base / records.front().passage_feat).string()).frame_period();

  struct Row {
    double target = 0, wer = 0;
    TimeSpan pred;
  };
  std::vector<Row> rows(records.size());
  parallel_for(records.size(), threads, [&](std::size_t i) {
    const ManifestRecord& rec = records[i];
    std::seed_seq sseq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(i), 0xca5cu};
    std::mt19937_64 rng(sseq);
    NoiseSpec spec;
    spec.target_wer = lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
    spec.p_sub = p_sub;
    spec.p_del = p_del;
    spec.p_ins = p_ins;
    spec.vocabulary = *vocabulary;
    spec.seed = rng();
    const TimedTranscript noisy = corrupt(*rec.transcript, spec);
    rows[i].target = spec.target_wer;
    rows[i].wer = wer(rec.transcript->texts(), noisy.texts());
    // An empty hypothesis has nothing to point at; the prediction is empty.
    rows[i].pred = noisy.words.empty() ? TimeSpan{0.0, 0.0} : oracle_qa(noisy, *rec.answer_text);
  });

  std::map<std::string, TimeSpan> preds, golds;
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (rows[i].pred.end > rows[i].pred.start) preds[records[i].id] = rows[i].pred;
    golds[records[i].id] = records[i].answer;
    index[records[i].id] = i;
  }
  const EvalResult result = evaluate(preds, golds, period);

  prepare_out_dir(out_dir);
  std::vector<json> lines;
  for (const auto& s : result.examples) {
    const Row& row = rows[index.at(s.id)];
    json line = {{"id", s.id},
                 {"gold", span_json(golds.at(s.id))},
                 {"ff1", s.ff1},
                 {"aos", s.aos},
                 {"target_wer", row.target},
                 {"wer", row.wer}};
    line["pred"] = s.missing ? json(nullptr) : span_json(row.pred);
    lines.push_back(std::move(line));
  }
  json summary = summary_record(result);
  double mean_wer = 0.0;
  for (const auto& row : rows) mean_wer += row.wer;
  summary["wer"] = rows.empty() ? 0.0 : mean_wer / static_cast<double>(rows.size());
  lines.push_back(summary);
  binio::write_file_atomic(path_in(out_dir, "cascade_report.jsonl"), jsonl(lines));
  write_run_record(out_dir, "cascade", effective, seed);
  return summary;
}

json run_buckets(const json& cfg, const std::string& out_dir) {
  ConfigReader r(cfg, "buckets config");
  const std::uint64_t seed = r.get<std::uint64_t>("seed", 0);
  r.get<unsigned>("threads", 1);
  const auto dual_report = r.require_key<std::string>("dual_report");
  const auto cascade_report = r.require_key<std::string>("cascade_report");
  const auto edges = r.get<std::vector<double>>("edges", default_bucket_edges());
  json effective = r.finish();
  effective.erase("threads");

  auto per_example = [](const std::string& path) {
    std::map<std::string, json> out;
    for (auto& line : read_jsonl(path)) {
      if (line.value("summary", false)) continue;
      require(line.contains("id") && line.contains("ff1"), ErrorCode::kSchema,
              path + ": report line without 'id' and 'ff1'");
      std::string id = line["id"].get<std::string>();
      out[std::move(id)] = std::move(line);
    }
    return out;
  };
  const auto dual = per_example(dual_report);
  const auto cascade = per_example(cascade_report);
  std::vector<std::string> unmatched;
  for (const auto& [id, _] : dual)
    if (!cascade.contains(id)) unmatched.push_back(id);
  for (const auto& [id, _] : cascade)
    if (!dual.contains(id)) unmatched.push_back(id);
  if (!unmatched.empty()) {
    std::string list;
    for (std::size_t i = 0; i < std::min<std::size_t>(unmatched.size(), 5); ++i)
      list += (i ? ", " : "") + unmatched[i];
    fail(ErrorCode::kInvalidArgument, "buckets: reports cover different examples (" +
                                          std::to_string(unmatched.size()) + " unmatched, e.g. " +
                                          list + ")");
  }
  std::vector<BucketInput> inputs;
  for (const auto& [id, c] : cascade) {
    require(c.contains("wer"), ErrorCode::kSchema, cascade_report + ": line '" + id + "' lacks 'wer'");
    inputs.push_back({c["wer"].get<double>(), c["ff1"].get<double>(), dual.at(id)["ff1"].get<double>()});
  }
  const BucketReport report = bucket_analysis(inputs, edges);

  prepare_out_dir(out_dir);
  std::vector<json> lines;
  std::string table = "WER bucket      n   cascade FF1   DUAL FF1\n";
  for (const auto& b : report.buckets) {
    lines.push_back({{"lo", b.lo}, {"hi", b.hi}, {"count", b.count},
                     {"ff1_cascade", b.ff1_cascade}, {"ff1_dual", b.ff1_dual}});
    char buf[128];
    std::snprintf(buf, sizeof buf, "[%4.0f%%,%4.0f%%) %6zu   %11.4f   %8.4f\n", 100 * b.lo, 100 * b.hi,
                  b.count, b.ff1_cascade, b.ff1_dual);
    table += buf;
  }
  json summary = {{"summary", true}, {"buckets", report.buckets.size()},
                  {"examples", inputs.size()}, {"uncovered", report.uncovered}};
  lines.push_back(summary);
  binio::write_file_atomic(path_in(out_dir, "buckets.jsonl"), jsonl(lines));

  std::vector<std::string> labels;
  std::vector<double> casc(edges.size() - 1, std::nan("")), du(edges.size() - 1, std::nan(""));
  for (std::size_t i = 0; i + 1 < edges.size(); ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.0f-%.0f%%", 100 * edges[i], 100 * edges[i + 1]);
    labels.push_back(buf);
    for (const auto& b : report.buckets)
      if (b.lo == edges[i]) {
        casc[i] = b.ff1_cascade;
        du[i] = b.ff1_dual;
      }
  }
  binio::write_file_atomic(
      path_in(out_dir, "buckets.svg"),
      plot::line_chart("FF1 by transcript WER", "WER bucket", "FF1", labels,
                       {{"cascade", casc, "#c0504d"}, {"DUAL", du, "#4f81bd"}}));
  binio::write_file_atomic(path_in(out_dir, "buckets.txt"), table);
  write_run_record(out_dir, "buckets", effective, seed);
  summary["table"] = table;
  return summary;
}

}  // namespace dual
