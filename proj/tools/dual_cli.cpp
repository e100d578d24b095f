// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

// Command-line front end. Each subcommand builds a JSON config from an
// optional --config file overlaid with flags, then calls the matching
// pipeline stage through the C API.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dual/dual.h"
#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using StageFn = dual_status (*)(const char*, const char*, char**);

struct Common {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool verbose = false;
};

// A flag bound to a JSON pointer in the config; applied only when given.
struct Override {
  std::string pointer;
  std::function<json()> value;
  CLI::Option* option = nullptr;
};

struct Command {
  std::string name;
  StageFn stage = nullptr;
  Common common;
  std::vector<Override> overrides;
  CLI::App* app = nullptr;
};

template <typename T>
void bind_flag(Command& cmd, const std::string& flag, const std::string& pointer, T& storage,
          const std::string& help) {
  Override o;
  o.pointer = pointer;
  o.value = [&storage] { return json(storage); };
  o.option = cmd.app->add_option(flag, storage, help);
  cmd.overrides.push_back(std::move(o));
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config file '" + path + "' is not valid JSON: " + e.what());
  }
  if (!j.is_object()) throw std::runtime_error("config file '" + path + "' must hold a JSON object");
  return j;
}

std::string resolve_out(const std::string& out) {
  fs::path p(out);
  if (p.is_relative()) {
    if (const char* root = std::getenv("DUAL_RUN_ROOT"); root != nullptr && *root != '\0')
      p = fs::path(root) / p;
  }
  return p.string();
}

int run(const Command& cmd) {
  json cfg = load_config(cmd.common.config_path);
  for (const auto& o : cmd.overrides)
    if (o.option->count() > 0) cfg[json::json_pointer(o.pointer)] = o.value();
  if (cmd.common.seed) cfg["seed"] = *cmd.common.seed;
  if (cmd.common.threads) cfg["threads"] = *cmd.common.threads;
  if (cmd.name == "synth") cfg.erase("threads");  // generation is sequential

  dual_set_verbosity(cmd.common.verbose ? 1 : 0);
  const std::string out = resolve_out(cmd.common.out);
  char* summary = nullptr;
  const dual_status st = cmd.stage(cfg.dump().c_str(), out.c_str(), &summary);
  if (st != DUAL_OK) {
    std::fprintf(stderr, "dual %s: error (%s): %s\n", cmd.name.c_str(), dual_status_string(st),
                 dual_last_error());
    return static_cast<int>(st);
  }
  json result = json::parse(summary);
  dual_string_free(summary);
  if (result.contains("table")) {
    std::cout << result["table"].get<std::string>();
    result.erase("table");
  }
  std::cout << result.dump(2) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DUAL: textless spoken question answering over discrete speech units"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(dual_version()));

  std::vector<std::unique_ptr<Command>> commands;
  auto add = [&](const std::string& name, StageFn stage, const std::string& help) -> Command& {
    auto cmd = std::make_unique<Command>();
    cmd->name = name;
    cmd->stage = stage;
    cmd->app = app.add_subcommand(name, help);
    cmd->app->add_option("--config", cmd->common.config_path, "JSON config file; flags override it")
        ->check(CLI::ExistingFile);
    cmd->app->add_option("--out,-o", cmd->common.out,
                         "run directory (relative paths resolve under $DUAL_RUN_ROOT)")
        ->required();
    cmd->app->add_option("--seed", cmd->common.seed, "random seed");
    cmd->app->add_option("--threads", cmd->common.threads, "worker threads; never changes results");
    cmd->app->add_flag("--verbose,-v", cmd->common.verbose, "progress on stderr");
    commands.push_back(std::move(cmd));
    return *commands.back();
  };

  // Storage for flag values lives as long as `main`.
  struct {
    std::uint32_t vocab_words, k, n_train, n_dev, n_test, passage_words, dim;
    std::vector<std::uint32_t> units_per_word, repeat_range;
    double noise_sigma;
  } synth{};
  Command& c_synth = add("synth", dual_run_synth, "generate a synthetic spoken-QA dataset");
  bind_flag(c_synth, "--vocab-words", "/vocab_words", synth.vocab_words, "lexicon size");
  bind_flag(c_synth, "--units-per-word", "/units_per_word", synth.units_per_word, "min max units per word");
  bind_flag(c_synth, "--K,--k", "/K", synth.k, "number of discrete units");
  bind_flag(c_synth, "--n-train", "/n_train", synth.n_train, "training examples");
  bind_flag(c_synth, "--n-dev", "/n_dev", synth.n_dev, "dev examples");
  bind_flag(c_synth, "--n-test", "/n_test", synth.n_test, "test examples");
  bind_flag(c_synth, "--passage-words", "/passage_words", synth.passage_words, "words per passage");
  bind_flag(c_synth, "--repeat-range", "/repeat_range", synth.repeat_range, "min max frames per unit");
  bind_flag(c_synth, "--noise-sigma", "/noise_sigma", synth.noise_sigma, "feature noise std-dev");
  bind_flag(c_synth, "--dim", "/dim", synth.dim, "feature dimension");

  struct {
    std::vector<std::string> inputs;
    std::uint32_t k, max_iters;
  } km{};
  Command& c_km = add("kmeans", dual_run_kmeans, "train a k-means codebook over FEAT files");
  bind_flag(c_km, "inputs,--inputs", "/inputs", km.inputs, "FEAT files or globs (e.g. data/feats/*.p.feat)");
  bind_flag(c_km, "--k,-k", "/k", km.k, "number of clusters");
  bind_flag(c_km, "--max-iters", "/max_iters", km.max_iters, "Lloyd iteration cap");

  struct {
    std::uint32_t steps, warmup, batch;
    double lr;
    std::uint32_t sequences;
  } pre{};
  Command& c_pre = add("pretrain", dual_run_pretrain, "pretrain a donor encoder by masked-unit prediction");
  bind_flag(c_pre, "--steps", "/train/total_steps", pre.steps, "optimiser steps");
  bind_flag(c_pre, "--warmup", "/train/warmup_steps", pre.warmup, "warmup steps");
  bind_flag(c_pre, "--batch-size", "/train/batch_size", pre.batch, "examples per step");
  bind_flag(c_pre, "--lr", "/train/peak_lr", pre.lr, "peak learning rate");
  bind_flag(c_pre, "--sequences", "/corpus/sequences", pre.sequences, "corpus size");

  struct {
    std::string manifest, dev_manifest, codebook, donor, embedding, resume;
    std::uint32_t steps, warmup, batch, eval_every, stop_after;
    double lr;
  } tr{};
  Command& c_tr = add("train", dual_run_train, "fine-tune a span-prediction model");
  bind_flag(c_tr, "--manifest", "/manifest", tr.manifest, "training manifest");
  bind_flag(c_tr, "--dev-manifest", "/dev_manifest", tr.dev_manifest, "validation manifest for model selection");
  bind_flag(c_tr, "--codebook", "/codebook", tr.codebook, "CDBK codebook");
  bind_flag(c_tr, "--donor", "/donor", tr.donor, "pretrained donor checkpoint");
  bind_flag(c_tr, "--embedding", "/embedding", tr.embedding,
       "most_frequent | least_frequent | random | re_init | scratch");
  bind_flag(c_tr, "--resume", "/resume", tr.resume, "train_state.bin to continue from");
  bind_flag(c_tr, "--stop-after", "/stop_after", tr.stop_after, "stop after this many steps");
  bind_flag(c_tr, "--steps", "/train/total_steps", tr.steps, "optimiser steps");
  bind_flag(c_tr, "--warmup", "/train/warmup_steps", tr.warmup, "warmup steps");
  bind_flag(c_tr, "--batch-size", "/train/batch_size", tr.batch, "examples per step");
  bind_flag(c_tr, "--eval-every", "/train/eval_every", tr.eval_every, "validation interval");
  bind_flag(c_tr, "--lr", "/train/peak_lr", tr.lr, "peak learning rate");

  struct {
    std::string manifest, codebook, checkpoint;
    std::uint32_t max_answer_len;
  } ev{};
  Command& c_ev = add("eval", dual_run_eval, "score a checkpoint with FF1 and AOS");
  bind_flag(c_ev, "--manifest", "/manifest", ev.manifest, "evaluation manifest");
  bind_flag(c_ev, "--codebook", "/codebook", ev.codebook, "CDBK codebook");
  bind_flag(c_ev, "--checkpoint", "/checkpoint", ev.checkpoint, "model checkpoint");
  bind_flag(c_ev, "--max-answer-len", "/max_answer_len", ev.max_answer_len, "longest span in units");

  struct {
    std::string manifest;
    double target_wer;
    std::vector<double> wer_range;
  } ca{};
  Command& c_ca = add("cascade", dual_run_cascade, "simulate the ASR + text-QA cascade");
  bind_flag(c_ca, "--manifest", "/manifest", ca.manifest, "manifest with transcripts");
  bind_flag(c_ca, "--target-wer", "/noise/target_wer", ca.target_wer, "fixed target WER");
  bind_flag(c_ca, "--wer-range", "/noise/target_wer_range", ca.wer_range, "per-example target WER range lo hi");

  struct {
    std::string dual_report, cascade_report;
    std::vector<double> edges;
  } bu{};
  Command& c_bu = add("buckets", dual_run_buckets, "compare DUAL and cascade FF1 by WER bucket");
  bind_flag(c_bu, "--dual-report", "/dual_report", bu.dual_report, "eval_report.jsonl");
  bind_flag(c_bu, "--cascade-report", "/cascade_report", bu.cascade_report, "cascade_report.jsonl");
  bind_flag(c_bu, "--edges", "/edges", bu.edges, "bucket edges (strictly increasing)");

  CLI11_PARSE(app, argc, argv);
  for (const auto& cmd : commands) {
    if (!cmd->app->parsed()) continue;
    try {
      return run(*cmd);
    } catch (const std::exception& e) {
      std::fprintf(stderr, "dual %s: error: %s\n", cmd->name.c_str(), e.what());
      return 2;
    }
  }
  return 1;
}
