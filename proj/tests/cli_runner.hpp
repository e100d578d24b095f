// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

// Runs the dual executable through the shell and captures its output.

#pragma once

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace testutil {

struct CliResult {
  int exit_code = -1;
  std::string out, err;
};

inline std::string shell_quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

inline std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// `run_root` sets DUAL_RUN_ROOT for the child; empty clears it. A non-empty
// `cwd` is the child's working directory.
inline CliResult run_cli(const std::string& exe, const std::vector<std::string>& args,
                         const std::filesystem::path& scratch, const std::string& run_root = "",
                         const std::string& cwd = "") {
  std::filesystem::create_directories(scratch);
  const auto out = std::filesystem::absolute(scratch / "stdout.txt");
  const auto err = std::filesystem::absolute(scratch / "stderr.txt");
  std::string cmd = cwd.empty() ? "" : "cd " + shell_quote(cwd) + " && ";
  cmd += run_root.empty() ? "env -u DUAL_RUN_ROOT " : "env DUAL_RUN_ROOT=" + shell_quote(run_root) + " ";
  cmd += shell_quote(exe);
  for (const auto& a : args) cmd += " " + shell_quote(a);
  cmd += " >" + shell_quote(out.string()) + " 2>" + shell_quote(err.string());
  const int status = std::system(cmd.c_str());
  CliResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

}  // namespace testutil
