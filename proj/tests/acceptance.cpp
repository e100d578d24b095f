// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.
//
//   dual_acceptance --work DIR [--only 1,5,7]

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "cli_runner.hpp"
#include "dual/checkpoint.hpp"
#include "dual/datakit.hpp"
#include "dual/featio.hpp"
#include "dual/metrics.hpp"
#include "dual/model.hpp"
#include "dual/pipeline.hpp"
#include "dual/quantizer.hpp"
#include "dual/trainer.hpp"
#include "dual/unitizer.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void note(const std::string& line) {
  std::fprintf(stderr, "  .. %s\n", line.c_str());
  std::fflush(stderr);
}

std::vector<json> read_jsonl(const std::string& path) {
  std::vector<json> out;
  std::ifstream in(path);
  for (std::string line; std::getline(in, line);)
    if (!line.empty()) out.push_back(json::parse(line));
  return out;
}

fs::path g_work;

// ---------------------------------------------------------------------------
// 1. Codec exactness.

Outcome codec_exactness() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  std::size_t failures = 0, longest = 0, merged_total = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const std::uint32_t alphabet = 2 + rng() % 511;
    const std::size_t len = rng() % 5001;
    longest = std::max(longest, len);
    // Runs of random length so that merging has work to do.
    std::vector<dual::UnitId> x;
    x.reserve(len);
    while (x.size() < len) {
      const auto unit = static_cast<dual::UnitId>(rng() % alphabet);
      const std::size_t run = 1 + rng() % 6;
      for (std::size_t r = 0; r < run && x.size() < len; ++r) x.push_back(unit);
    }
    const dual::UnitSequence u = dual::merge_repeats(x);
    merged_total += u.size();
    if (dual::expand(u) != x || u.counts != oracle::run_lengths(x)) ++failures;
  }
  for (int trial = 0; trial < 10000; ++trial) {
    std::vector<dual::UnitId> frames(1 + rng() % 400);
    const std::uint32_t alphabet = 2 + rng() % 511;
    for (auto& f : frames) f = static_cast<dual::UnitId>(rng() % alphabet);
    if (rng() % 2)  // stretch into runs
      for (std::size_t i = 1; i < frames.size(); ++i)
        if (rng() % 3) frames[i] = frames[i - 1];
    const std::uint32_t period_us = 5000 + static_cast<std::uint32_t>(rng() % 45001);
    const dual::UnitSequence u = dual::merge_repeats(frames, period_us);
    std::uint32_t s = static_cast<std::uint32_t>(rng() % u.size());
    std::uint32_t e = static_cast<std::uint32_t>(rng() % u.size());
    if (s > e) std::swap(s, e);
    const dual::IndexSpan span{s, e};
    try {
      if (!(dual::time_to_index(dual::index_to_time(span, u), u) == span)) ++failures;
    } catch (const std::exception&) {
      ++failures;
    }
  }
  const double secs = seconds_since(t0);
  return {failures == 0 && secs < 30.0,
          std::to_string(failures) + " failures over 20000 cases (longest sequence " + std::to_string(longest) +
              " frames), " + fmt("%.2f s", secs)};
}

// ---------------------------------------------------------------------------
// 2. Metric oracles.

Outcome metric_oracles() {
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double worst_ff1 = 0, worst_aos = 0, worst_wer = 0;
  const double periods[] = {0.01, 0.02, 0.025, 0.04};
  auto random_span = [&](double p) {
    double a, b;
    if (rng() % 3 == 0) {  // frame-aligned endpoints
      a = double(rng() % 200) * p;
      b = a + double(1 + rng() % 60) * p;
    } else {
      a = unif(rng) * 4.0;
      b = a + 0.001 + unif(rng) * 1.5;
    }
    return dual::TimeSpan{a, b};
  };
  for (int i = 0; i < 1000; ++i) {
    const double p = rng() % 2 ? periods[rng() % 4] : 0.005 + unif(rng) * 0.045;
    dual::TimeSpan pred = random_span(p), gold = random_span(p);
    if (rng() % 4 == 0) pred = {gold.start + (unif(rng) - 0.5) * 0.2, gold.end + (unif(rng) - 0.5) * 0.2};
    if (pred.end <= pred.start) pred.end = pred.start + 0.01;
    const double lib = dual::ff1(pred, gold, p);
    const double ref = oracle::ff1(pred.start, pred.end, gold.start, gold.end, p);
    worst_ff1 = std::max(worst_ff1, std::abs(lib - ref));
  }
  for (int i = 0; i < 1000; ++i) {
    const dual::TimeSpan pred = random_span(0.02), gold = random_span(0.02);
    const double lib = dual::aos(pred, gold);
    worst_aos = std::max(worst_aos, std::abs(lib - oracle::aos(pred.start, pred.end, gold.start, gold.end)));
  }
  for (int i = 0; i < 1000; ++i) {
    const std::size_t vocab = 2 + rng() % 4;
    std::vector<std::string> ref(1 + rng() % 8), hyp(rng() % 9);
    for (auto& w : ref) w = "w" + std::to_string(rng() % vocab);
    for (auto& w : hyp) w = "w" + std::to_string(rng() % vocab);
    worst_wer = std::max(worst_wer, std::abs(dual::wer(ref, hyp) - oracle::wer(ref, hyp)));
  }
  const bool hand = dual::ff1({1.0, 3.0}, {2.0, 4.0}, 0.02) == 0.5 &&
                    dual::aos({1.0, 3.0}, {2.0, 4.0}) == 1.0 / 3.0 &&
                    dual::wer("a b c", "a x c") == 1.0 / 3.0 && dual::wer("a b", "a b c") == 0.5;
  const double worst = std::max({worst_ff1, worst_aos, worst_wer});
  return {worst <= 1e-9 && hand, "max |lib - oracle|: ff1 " + fmt("%.3g", worst_ff1) + ", aos " +
                                     fmt("%.3g", worst_aos) + ", wer " + fmt("%.3g", worst_wer) +
                                     "; hand examples " + (hand ? "exact" : "WRONG")};
}

// ---------------------------------------------------------------------------
// 3. Gradient fidelity.

Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  dual::ModelConfig c;
  c.num_units = 10;
  c.max_len = 40;
  c.layers = 2;
  c.model_dim = 16;
  c.heads = 2;
  c.ffn_dim = 32;
  c.local_window = 4;
  auto params = dual::init_model<double>(c, 31);
  std::mt19937_64 rng(32);
  std::normal_distribution<double> nd(0.0, 0.3);
  // Away from the initial point so that no tensor sits at an exact zero.
  dual::for_each_tensor(params, [&](const std::string&, auto& t, bool) {
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] += nd(rng);
  });
  dual::ModelInput in;
  in.tokens = {c.bos(), 3, 7, 1, c.sep()};
  in.global_mask = {1, 1, 1, 1, 0};
  in.passage_mask = {0, 0, 0, 0, 0};
  for (int i = 0; i < 14; ++i) {
    in.tokens.push_back(static_cast<dual::TokenId>(rng() % c.num_units));
    in.global_mask.push_back(0);
    in.passage_mask.push_back(1);
  }
  in.tokens.push_back(c.eos());
  in.global_mask.push_back(0);
  in.passage_mask.push_back(0);
  in.target = dual::IndexSpan{8, 11};

  dual::GradCheckOptions opts;
  opts.min_coords = 1000;
  const dual::GradCheckReport r = dual::grad_check(params, in, opts);
  std::size_t tensors = 0;
  dual::for_each_tensor(params, [&](const std::string&, const auto&, bool) { ++tensors; });
  const double secs = seconds_since(t0);
  return {r.max_rel_error < 1e-4 && r.coords >= 1000 && r.tensors == tensors && secs < 120.0,
          "max relative error " + fmt("%.3g", r.max_rel_error) + " (worst tensor " + r.worst_tensor + ") over " +
              std::to_string(r.coords) + " coordinates in " + std::to_string(r.tensors) + "/" +
              std::to_string(tensors) + " tensors, " + fmt("%.1f s", secs)};
}

// ---------------------------------------------------------------------------
// 4. k-means invariants.

Outcome kmeans_invariants() {
  std::mt19937_64 rng(404);
  std::size_t increases = 0, iterations = 0;
  for (int ds = 0; ds < 20; ++ds) {
    const std::uint32_t dim = 1 + rng() % 16, k = 2 + rng() % 30, n = 200 + rng() % 1800;
    const std::uint32_t blobs = 1 + rng() % 12;
    std::normal_distribution<double> nd(0.0, 1.0);
    std::vector<std::vector<double>> centres(blobs, std::vector<double>(dim));
    for (auto& c : centres)
      for (auto& v : c) v = 4.0 * nd(rng);
    dual::FeatureMatrix m;
    m.n_frames = n;
    m.dim = dim;
    for (std::uint32_t t = 0; t < n; ++t) {
      const auto& c = centres[rng() % blobs];
      for (std::uint32_t d = 0; d < dim; ++d) m.data.push_back(static_cast<float>(c[d] + nd(rng)));
    }
    dual::KMeansOptions opts;
    opts.k = k;
    opts.seed = ds;
    opts.rel_tol = 0;
    opts.max_iters = 60;
    dual::KMeansTrace trace;
    dual::train_codebook(std::vector<dual::FeatureMatrix>{m}, opts, &trace);
    iterations += trace.inertia.size();
    for (std::size_t i = 1; i < trace.inertia.size(); ++i) increases += trace.inertia[i] > trace.inertia[i - 1];
  }

  std::size_t recovered = 0;
  const int recovery_sets = 5;
  double worst_ratio = 0;
  for (int set = 0; set < recovery_sets; ++set) {
    const std::uint32_t k = 4 + set * 7, dim = 8 + set * 2;  // 4..32 anchors
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    dual::RowMatrixF anchors(k, dim);
    for (Eigen::Index i = 0; i < anchors.size(); ++i) anchors.data()[i] = u(rng);
    double dmin = 1e300;
    for (std::uint32_t a = 0; a < k; ++a)
      for (std::uint32_t b = a + 1; b < k; ++b) dmin = std::min(dmin, double((anchors.row(a) - anchors.row(b)).norm()));
    const double sigma = 0.05 * dmin;
    worst_ratio = std::max(worst_ratio, sigma / dmin);
    std::vector<dual::UnitId> truth(k * 60);
    for (std::size_t t = 0; t < truth.size(); ++t) truth[t] = static_cast<dual::UnitId>(t % k);
    std::shuffle(truth.begin(), truth.end(), rng);
    const dual::FeatureMatrix m = dual::synth_features(truth, anchors, sigma, 500 + set);
    dual::KMeansOptions opts;
    opts.k = k;
    opts.seed = 9 + set;
    const dual::Codebook cb = dual::train_codebook(std::vector<dual::FeatureMatrix>{m}, opts);
    const auto labels = dual::encode(cb, m);
    std::map<dual::UnitId, dual::UnitId> fwd, back;
    bool ok = true;
    for (std::size_t t = 0; t < truth.size() && ok; ++t) {
      auto [i1, new1] = fwd.emplace(truth[t], labels[t]);
      auto [i2, new2] = back.emplace(labels[t], truth[t]);
      ok = i1->second == labels[t] && i2->second == truth[t];
    }
    recovered += ok;
  }
  return {increases == 0 && recovered == recovery_sets,
          std::to_string(increases) + " inertia increases over " + std::to_string(iterations) +
              " iterations on 20 datasets; exact recovery on " + std::to_string(recovered) + "/" +
              std::to_string(recovery_sets) + " anchor sets (sigma = " + fmt("%.2f", worst_ratio) +
              " x min anchor distance)"};
}

// ---------------------------------------------------------------------------
// Shared synthetic task for criteria 5-7.

json task_model() {
  return {{"max_len", 256}, {"layers", 2}, {"model_dim", 64}, {"heads", 4}, {"ffn_dim", 256}, {"local_window", 32}};
}

struct Task {
  std::string data, km, donor;
  double build_seconds = 0;  // synth + kmeans + donor pretraining
};

const Task& task() {
  static Task t = [] {
    Task t;
    const auto t0 = Clock::now();
    const fs::path dir = g_work / "task";
    t.data = (dir / "data").string();
    t.km = (dir / "km").string();
    const std::string pre = (dir / "pretrain").string();
    dual::run_synth({{"vocab_words", 50}, {"K", 64}, {"n_train", 2000}, {"n_dev", 200}, {"n_test", 1000},
                     {"passage_words", 12}, {"seed", 7}},
                    t.data);
    note("synth done " + fmt("%.1f s", seconds_since(t0)));
    dual::run_kmeans({{"inputs", json::array({t.data + "/feats/train-*.feat"})}, {"k", 64}, {"seed", 1}}, t.km);
    note("kmeans done " + fmt("%.1f s", seconds_since(t0)));
    dual::run_pretrain({{"seed", 5},
                        {"corpus", {{"vocab_size", 128}, {"sequences", 4000}, {"passage_tokens", 36}}},
                        {"model", task_model()},
                        {"train", {{"total_steps", 4000}, {"warmup_steps", 400}, {"peak_lr", 1e-3}, {"batch_size", 16}}}},
                       pre);
    t.donor = pre + "/donor.ckpt";
    t.build_seconds = seconds_since(t0);
    note("donor pretraining done " + fmt("%.1f s", t.build_seconds));
    return t;
  }();
  return t;
}

json train_config(const Task& t, std::uint64_t seed, std::uint32_t steps, bool donor) {
  json cfg = {{"seed", seed},
              {"manifest", t.data + "/train.jsonl"},
              {"dev_manifest", t.data + "/dev.jsonl"},
              {"codebook", t.km + "/codebook.cdbk"},
              {"model", task_model()},
              {"train", {{"total_steps", steps}, {"warmup_steps", 500}, {"peak_lr", 1e-4}, {"batch_size", 16},
                         {"eval_every", steps / 4}}}};
  if (donor) cfg["donor"] = t.donor;
  return cfg;
}

json eval_on(const Task& t, const std::string& split, const std::string& model_dir, const std::string& out) {
  return dual::run_eval({{"manifest", t.data + "/" + split + ".jsonl"},
                         {"codebook", t.km + "/codebook.cdbk"},
                         {"checkpoint", model_dir + "/model.ckpt"}},
                        out);
}

// ---------------------------------------------------------------------------
// 5. End-to-end learning.

std::string g_main_model;

Outcome end_to_end() {
  const auto t0 = Clock::now();
  const Task& t = task();
  const double build = t.build_seconds;
  const std::string tr = (g_work / "c5_train").string();
  const auto t1 = Clock::now();
  dual::run_train(train_config(t, 3, 5000, true), tr);
  note("training done " + fmt("%.1f s", seconds_since(t1)));
  const json dev = eval_on(t, "dev", tr, (g_work / "c5_eval_dev").string());
  // Shared-task build time counts even if an earlier criterion triggered it.
  const double total = build + seconds_since(t1);
  g_main_model = tr;
  (void)t0;

  // Overfit: 32 training examples, 500 steps, exact index spans on the same set.
  const auto t2 = Clock::now();
  const dual::Codebook cb = dual::read_codebook(t.km + "/codebook.cdbk");
  const auto examples = dual::load_manifest(t.data + "/train.jsonl", cb);
  dual::ModelConfig mc = dual::model_config_from_json([] {
    json m = task_model();
    m["num_units"] = 64;
    return m;
  }());
  std::vector<dual::ModelInput> subset;
  for (const auto& e : examples) {
    dual::PreparedExample p = dual::prepare(e, mc);
    if (!p.dropped) subset.push_back(std::move(p.input));
    if (subset.size() == 32) break;
  }
  dual::TrainConfig oc;
  oc.total_steps = 500;
  oc.warmup_steps = 50;
  oc.peak_lr = 1e-3;
  oc.batch_size = 16;
  oc.eval_every = 1000;
  oc.seed = 4;
  const auto fit = dual::train(subset, dual::init_model<float>(mc, 4), oc);
  std::size_t exact = 0;
  for (const auto& in : subset) {
    const auto lg = dual::forward(fit.state.params, in);
    exact += dual::decode_span<float>(lg.start, lg.end, in.passage_mask, 64) == *in.target;
  }
  const double exact_rate = double(exact) / double(subset.size());

  const double ff1 = dev["ff1"].get<double>(), aos = dev["aos"].get<double>();
  const bool pass = ff1 >= 0.80 && aos >= 0.70 && total < 600.0 && exact_rate >= 0.95;
  return {pass, "dev FF1 " + fmt("%.3f", ff1) + ", AOS " + fmt("%.3f", aos) + " after 5000 steps; pipeline " +
                    fmt("%.0f s", total) + " (incl. " + fmt("%.0f s", build) + " synth/kmeans/donor); overfit " +
                    std::to_string(exact) + "/32 exact spans in 500 steps (" +
                    fmt("%.0f s", seconds_since(t2)) + ")"};
}

// ---------------------------------------------------------------------------
// 6. Transfer direction.

Outcome transfer_direction() {
  const Task& t = task();
  int wins = 0;
  std::string detail;
  for (std::uint64_t seed : {11, 12, 13}) {
    double score[2];
    for (int donor = 0; donor < 2; ++donor) {
      const std::string tag = std::to_string(seed) + (donor ? "_donor" : "_scratch");
      const std::string tr = (g_work / ("c6_train_" + tag)).string();
      dual::run_train(train_config(t, seed, 1000, donor == 1), tr);
      score[donor] = eval_on(t, "dev", tr, (g_work / ("c6_eval_" + tag)).string())["ff1"].get<double>();
    }
    note("seed " + std::to_string(seed) + fmt(": donor %.3f", score[1]) + fmt(" scratch %.3f", score[0]));
    const bool win = score[1] - score[0] >= 0.10;
    wins += win;
    detail += (detail.empty() ? "" : "; ") + std::string("seed ") + std::to_string(seed) + " donor " +
              fmt("%.3f", score[1]) + " vs scratch " + fmt("%.3f", score[0]);
  }
  return {wins >= 2, std::to_string(wins) + "/3 seeds with a >= 10 point gain (" + detail + ")"};
}

// ---------------------------------------------------------------------------
// 7. Error-propagation curve.

Outcome error_propagation() {
  const Task& t = task();
  if (g_main_model.empty()) {
    g_main_model = (g_work / "c7_train").string();
    dual::run_train(train_config(t, 3, 5000, true), g_main_model);
  }
  const std::string ev = (g_work / "c7_eval_test").string(), ca = (g_work / "c7_cascade").string(),
                    bu = (g_work / "c7_buckets").string();
  eval_on(t, "test", g_main_model, ev);
  dual::run_cascade({{"manifest", t.data + "/test.jsonl"}, {"noise", {{"target_wer_range", {0.0, 0.8}}}}, {"seed", 17}},
                    ca);
  dual::run_buckets({{"dual_report", ev + "/eval_report.jsonl"}, {"cascade_report", ca + "/cascade_report.jsonl"}}, bu);

  std::vector<json> rows;
  for (auto& line : read_jsonl(bu + "/buckets.jsonl"))
    if (!line.value("summary", false)) rows.push_back(line);
  if (rows.size() != 7) return {false, "expected 7 populated buckets over 0-70%, got " + std::to_string(rows.size())};
  std::vector<double> cas, dua;
  for (const auto& r : rows) {
    cas.push_back(r["ff1_cascade"].get<double>());
    dua.push_back(r["ff1_dual"].get<double>());
  }
  int inversions = 0;
  for (std::size_t i = 1; i < cas.size(); ++i) inversions += cas[i] > cas[i - 1];
  const double spread = *std::max_element(dua.begin(), dua.end()) - *std::min_element(dua.begin(), dua.end());
  // First bucket from which DUAL stays ahead, preceded by one where it is not.
  int crossing = -1;
  for (int b = int(cas.size()) - 1; b >= 0 && dua[b] > cas[b]; --b) crossing = b;
  const bool crosses = crossing > 0;

  std::string curve;
  for (std::size_t i = 0; i < rows.size(); ++i)
    curve += (i ? " " : "") + fmt("%.0f%%:", 100 * rows[i]["lo"].get<double>()) + fmt("%.2f/", cas[i]) +
             fmt("%.2f", dua[i]);
  return {inversions <= 1 && spread < 0.10 && crosses,
          "cascade/DUAL FF1 by bucket [" + curve + "]; " + std::to_string(inversions) +
              " cascade inversions, DUAL spread " + fmt("%.3f", spread) +
              (crosses ? ", DUAL ahead from the " + fmt("%.0f%%", 10.0 * crossing) + " bucket on" : ", no crossing")};
}

// ---------------------------------------------------------------------------
// 8. Reproducibility through the CLI.

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).string()] = testutil::slurp(e.path());
  return out;
}

// Runs the whole CLI pipeline into `root` and reports the first failing step.
std::string cli_pipeline(const fs::path& root, const std::string& threads) {
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path cfgs = g_work / "c8_configs";
  fs::create_directories(cfgs);
  const json model = {{"max_len", 128}, {"layers", 1}, {"model_dim", 16}, {"heads", 2}, {"ffn_dim", 32},
                      {"local_window", 8}};
  std::ofstream(cfgs / "pretrain.json") << json{{"corpus", {{"vocab_size", 40}, {"sequences", 200}}},
                                                {"model", model}}.dump(2);
  std::ofstream(cfgs / "train.json") << json{{"model", model}, {"train", {{"eval_every", 50}}}}.dump(2);
  // Inputs are named relative to the run root, which is also the working
  // directory, so every run sees byte-identical configs.
  const std::string exe = DUAL_CLI_PATH, r = root.string();
  const std::string pre_cfg = (cfgs / "pretrain.json").string(), tr_cfg = (cfgs / "train.json").string();
  const std::vector<std::vector<std::string>> steps = {
      {"synth", "-o", "data", "--n-train", "120", "--n-dev", "30", "--n-test", "60", "--K", "24", "--vocab-words",
       "16", "--passage-words", "6", "--dim", "8", "--seed", "21"},
      {"kmeans", "data/feats/train-*.feat", "-k", "24", "--seed", "22", "-o", "km"},
      {"pretrain", "--config", pre_cfg, "--steps", "60", "--warmup", "6", "--lr", "1e-3", "--batch-size", "8",
       "--seed", "23", "-o", "pre"},
      {"train", "--config", tr_cfg, "--manifest", "data/train.jsonl", "--dev-manifest", "data/dev.jsonl",
       "--codebook", "km/codebook.cdbk", "--donor", "pre/donor.ckpt", "--steps", "150", "--warmup", "15", "--lr",
       "1e-3", "--batch-size", "8", "--seed", "24", "-o", "tr"},
      {"eval", "--manifest", "data/test.jsonl", "--codebook", "km/codebook.cdbk", "--checkpoint", "tr/model.ckpt",
       "-o", "ev"},
      {"cascade", "--manifest", "data/test.jsonl", "--wer-range", "0", "0.8", "--seed", "25", "-o", "ca"},
      {"buckets", "--dual-report", "ev/eval_report.jsonl", "--cascade-report", "ca/cascade_report.jsonl", "-o",
       "bu"},
  };
  const fs::path logs = g_work / ("c8_logs_" + root.filename().string());
  for (auto args : steps) {
    if (args[0] != "synth") args.insert(args.end(), {"--threads", threads});
    const auto res = testutil::run_cli(exe, args, logs, r, r);
    if (res.exit_code != 0) return args[0] + " exited " + std::to_string(res.exit_code) + ": " + res.err;
  }
  return "";
}

Outcome reproducibility() {
  struct Run {
    std::string name, threads;
  };
  const std::vector<Run> runs = {{"c8_run_t1", "1"}, {"c8_run_t2", "2"}, {"c8_run_t1_again", "1"}};
  std::vector<std::map<std::string, std::string>> trees;
  for (const auto& run : runs) {
    const std::string err = cli_pipeline(g_work / run.name, run.threads);
    if (!err.empty()) return {false, run.name + ": " + err};
    trees.push_back(snapshot(g_work / run.name));
  }
  std::vector<std::string> differing;
  for (std::size_t i = 1; i < trees.size(); ++i) {
    std::set<std::string> names;
    for (const auto& [k, v] : trees[0]) names.insert(k);
    for (const auto& [k, v] : trees[i]) names.insert(k);
    for (const auto& n : names) {
      auto a = trees[0].find(n), b = trees[i].find(n);
      if (a == trees[0].end() || b == trees[i].end() || a->second != b->second)
        differing.push_back(runs[i].name + ":" + n);
    }
  }
  std::string detail = std::to_string(trees[0].size()) + " files per run (reports, checkpoints, logs, run.json)";
  if (differing.empty()) return {true, detail + " bitwise identical across threads 1/2 and a rerun"};
  detail += "; differing: ";
  for (std::size_t i = 0; i < std::min<std::size_t>(differing.size(), 6); ++i) detail += (i ? ", " : "") + differing[i];
  return {false, detail};
}

}  // namespace

int main(int argc, char** argv) {
  std::string work = "acceptance_work";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--work" && i + 1 < argc) {
      work = argv[++i];
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
    } else {
      std::fprintf(stderr, "usage: %s [--work DIR] [--only 1,2,...]\n", argv[0]);
      return 2;
    }
  }
  g_work = fs::absolute(work);
  fs::remove_all(g_work);
  fs::create_directories(g_work);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"codec exactness", codec_exactness},
      {"metric oracles", metric_oracles},
      {"gradient fidelity", gradient_fidelity},
      {"k-means invariants", kmeans_invariants},
      {"end-to-end learning", end_to_end},
      {"transfer direction", transfer_direction},
      {"error-propagation curve", error_propagation},
      {"reproducibility", reproducibility},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = int(i) + 1;
    if (!only.empty() && !only.contains(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("criterion %d %s: %s: %s\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
