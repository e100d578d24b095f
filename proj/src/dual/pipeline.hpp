// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

// End-to-end pipeline stages. Each stage takes a JSON config (unknown keys are
// schema errors), writes its outputs atomically into `out_dir` together with
// run.json (effective config, seed, version), and returns a summary object.
// Reports never depend on the `threads` setting.

#pragma once

#include <string>

#include "json.hpp"

namespace dual {

inline constexpr const char* kVersion = "0.1.0";

// 0 silent, 1 progress lines on stderr.
void set_verbosity(int level);

nlohmann::json run_synth(const nlohmann::json& cfg, const std::string& out_dir);
nlohmann::json run_kmeans(const nlohmann::json& cfg, const std::string& out_dir);
nlohmann::json run_pretrain(const nlohmann::json& cfg, const std::string& out_dir);
nlohmann::json run_train(const nlohmann::json& cfg, const std::string& out_dir);
nlohmann::json run_eval(const nlohmann::json& cfg, const std::string& out_dir);
nlohmann::json run_cascade(const nlohmann::json& cfg, const std::string& out_dir);
nlohmann::json run_buckets(const nlohmann::json& cfg, const std::string& out_dir);

// Expands a path whose last component may hold * and ? wildcards; results are
// sorted. A pattern without wildcards must name an existing file.
std::vector<std::string> expand_glob(const std::string& pattern);

}  // namespace dual
