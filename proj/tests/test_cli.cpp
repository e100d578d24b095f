// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "cli_runner.hpp"
#include "doctest.h"

namespace fs = std::filesystem;
using nlohmann::json;
using testutil::run_cli;

namespace {

const std::string kExe = DUAL_CLI_PATH;

// One working tree shared by the cases below, rebuilt on first use.
struct Workspace {
  fs::path root;
  Workspace() : root(fs::path(DUAL_TEST_WORK)) {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  fs::path scratch(const std::string& name) const { return root / "logs" / name; }
  std::string path(const std::string& rel) const { return (root / rel).string(); }
  void write(const std::string& rel, const json& j) const { std::ofstream(root / rel) << j.dump(2); }
};

Workspace& ws() {
  static Workspace w;
  return w;
}

json last_json(const std::string& text) { return json::parse(text.substr(text.find('{'))); }

const std::vector<std::string> kSynthFlags = {"--n-dev", "6", "--n-test", "8", "--K", "12",
                                              "--vocab-words", "8", "--passage-words", "4", "--dim", "6",
                                              "--seed", "3"};

void ensure_data() {
  static bool done = false;
  if (done) return;
  auto args = std::vector<std::string>{"synth", "-o", "data", "--n-train", "24"};
  args.insert(args.end(), kSynthFlags.begin(), kSynthFlags.end());
  const auto r = run_cli(kExe, args, ws().scratch("synth"), ws().root.string());
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  const auto km = run_cli(kExe, {"kmeans", ws().path("data/feats/*.feat"), "-k", "12", "--seed", "1", "-o", ws().path("km")},
                          ws().scratch("km"));
  REQUIRE_MESSAGE(km.exit_code == 0, km.err);
  ws().write("train.json", {{"manifest", ws().path("data/train.jsonl")},
                            {"dev_manifest", ws().path("data/dev.jsonl")},
                            {"codebook", ws().path("km/codebook.cdbk")},
                            {"model", {{"max_len", 64}, {"layers", 1}, {"model_dim", 8}, {"heads", 2},
                                       {"ffn_dim", 16}, {"local_window", 4}}},
                            {"train", {{"total_steps", 50}, {"warmup_steps", 1}, {"batch_size", 2}, {"eval_every", 3}}}});
  const auto tr = run_cli(kExe, {"train", "--config", ws().path("train.json"), "--steps", "6", "-o", ws().path("tr")},
                          ws().scratch("tr"));
  REQUIRE_MESSAGE(tr.exit_code == 0, tr.err);
  done = true;
}

}  // namespace

TEST_CASE("version flag") {
  const auto r = run_cli(kExe, {"--version"}, ws().scratch("version"));
  CHECK(r.exit_code == 0);
  CHECK(r.out.find('.') != std::string::npos);
}

TEST_CASE("synth resolves relative output under DUAL_RUN_ROOT") {
  ensure_data();
  CHECK(fs::exists(ws().path("data/train.jsonl")));
  const json run = json::parse(testutil::slurp(ws().path("data/run.json")));
  CHECK(run["command"] == "synth");
  CHECK(run["config"]["n_train"] == 24);
}

TEST_CASE("flags override the config file") {
  ensure_data();
  ws().write("synth.json", {{"n_train", 50}, {"n_dev", 2}});
  auto args = std::vector<std::string>{"synth", "--config", ws().path("synth.json"), "-o", ws().path("synth2"),
                                       "--n-train", "10"};
  args.insert(args.end(), kSynthFlags.begin(), kSynthFlags.end());
  const auto r = run_cli(kExe, args, ws().scratch("synth2"));
  REQUIRE_MESSAGE(r.exit_code == 0, r.err);
  CHECK(last_json(r.out)["train"] == 10);
  CHECK(last_json(r.out)["dev"] == 6);

  const json run = json::parse(testutil::slurp(ws().path("tr/run.json")));
  CHECK(run["config"]["train"]["total_steps"] == 6);
  CHECK(run["config"]["train"]["batch_size"] == 2);
}

TEST_CASE("eval, cascade and buckets from the command line") {
  ensure_data();
  const std::vector<std::string> eval_args = {"eval", "--manifest", ws().path("data/test.jsonl"), "--codebook",
                                              ws().path("km/codebook.cdbk"), "--checkpoint",
                                              ws().path("tr/model.ckpt")};
  auto a = eval_args;
  a.insert(a.end(), {"-o", ws().path("ev")});
  const auto ev = run_cli(kExe, a, ws().scratch("ev"));
  REQUIRE_MESSAGE(ev.exit_code == 0, ev.err);
  CHECK(last_json(ev.out)["examples"] == 8);

  SUBCASE("reruns are byte-identical across thread counts") {
    auto b = eval_args;
    b.insert(b.end(), {"-o", ws().path("ev_t2"), "--threads", "2"});
    REQUIRE(run_cli(kExe, b, ws().scratch("ev_t2")).exit_code == 0);
    CHECK(testutil::slurp(ws().path("ev/eval_report.jsonl")) == testutil::slurp(ws().path("ev_t2/eval_report.jsonl")));
    CHECK(testutil::slurp(ws().path("ev/ff1_hist.svg")) == testutil::slurp(ws().path("ev_t2/ff1_hist.svg")));
  }

  SUBCASE("cascade and buckets") {
    const auto ca = run_cli(kExe, {"cascade", "--manifest", ws().path("data/test.jsonl"), "--wer-range", "0", "0.7",
                                   "--seed", "2", "-o", ws().path("ca")},
                            ws().scratch("ca"));
    REQUIRE_MESSAGE(ca.exit_code == 0, ca.err);
    const auto bu = run_cli(kExe, {"buckets", "--dual-report", ws().path("ev/eval_report.jsonl"), "--cascade-report",
                                   ws().path("ca/cascade_report.jsonl"), "-o", ws().path("bu")},
                            ws().scratch("bu"));
    REQUIRE_MESSAGE(bu.exit_code == 0, bu.err);
    CHECK(bu.out.find("WER bucket") == 0);
    CHECK(fs::exists(ws().path("bu/buckets.svg")));
  }

  SUBCASE("a codebook of the wrong size fails cleanly") {
    REQUIRE(run_cli(kExe, {"kmeans", ws().path("data/feats/*.feat"), "-k", "5", "-o", ws().path("km5")},
                    ws().scratch("km5"))
                .exit_code == 0);
    auto b = eval_args;
    b[4] = ws().path("km5/codebook.cdbk");
    b.insert(b.end(), {"-o", ws().path("ev_bad")});
    const auto r = run_cli(kExe, b, ws().scratch("ev_bad"));
    CHECK(r.exit_code != 0);
    CHECK(r.err.rfind("dual eval: error (", 0) == 0);
    CHECK_FALSE(fs::exists(ws().path("ev_bad/run.json")));
  }
}

TEST_CASE("usage and config errors exit nonzero") {
  CHECK(run_cli(kExe, {}, ws().scratch("none")).exit_code != 0);
  CHECK(run_cli(kExe, {"eval"}, ws().scratch("noout")).exit_code != 0);
  ws().write("bad.json", {{"manifest", "x"}, {"nonsense", 1}});
  const auto r = run_cli(kExe, {"eval", "--config", ws().path("bad.json"), "-o", ws().path("bad")}, ws().scratch("bad"));
  CHECK(r.exit_code != 0);
  CHECK(r.err.find("dual eval: error") == 0);
}
