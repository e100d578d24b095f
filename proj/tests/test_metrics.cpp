// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

#include <random>

#include "doctest.h"
#include "dual/error.hpp"
#include "dual/metrics.hpp"
#include "oracles.hpp"

using namespace dual;

TEST_CASE("ff1 hand examples") {
  CHECK(ff1({1.0, 3.0}, {1.0, 3.0}, 0.02) == 1.0);
  CHECK(ff1({1.0, 3.0}, {2.0, 4.0}, 0.02) == 0.5);
  CHECK(ff1({0.0, 1.0}, {2.0, 3.0}, 0.02) == 0.0);
}

TEST_CASE("ff1 ignores time before zero") {
  CHECK(ff1({-0.5, 1.0}, {0.0, 1.0}, 0.02) == 1.0);
  CHECK(ff1({-0.06, 0.3}, {0.0, 0.35}, 0.025) ==
        doctest::Approx(oracle::ff1(-0.06, 0.3, 0.0, 0.35, 0.025)).epsilon(1e-12));
}

TEST_CASE("aos hand examples") {
  CHECK(aos({1.0, 3.0}, {1.0, 3.0}) == 1.0);
  CHECK(aos({1.0, 3.0}, {2.0, 4.0}) == 1.0 / 3.0);
  CHECK(aos({2.0, 3.0}, {1.0, 4.0}) == 1.0 / 3.0);
  CHECK(aos({0.0, 1.0}, {2.0, 3.0}) == 0.0);
}

TEST_CASE("wer hand examples") {
  CHECK(wer("a b c", "a x c") == 1.0 / 3.0);
  CHECK(wer("a b", "a b c") == 0.5);
  CHECK(wer("The cat, sat.", "the CAT sat") == 0.0);
  CHECK_THROWS_AS(wer("", "a"), Error);
}

TEST_CASE("edit counts split by type") {
  const std::vector<std::string> ref{"a", "b", "c", "d"};
  const std::vector<std::string> hyp{"a", "x", "d", "e"};
  const EditCounts c = align_words(ref, hyp);
  CHECK(c.total() == 3);
  CHECK(c.total() == oracle::edit_distance(ref, hyp));
}

TEST_CASE("metrics agree with brute-force oracles") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int i = 0; i < 300; ++i) {
    double a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    if (a > b) std::swap(a, b);
    if (c > d) std::swap(c, d);
    if (b - a < 1e-6 || d - c < 1e-6) continue;
    CHECK(ff1({a, b}, {c, d}, 0.02) == doctest::Approx(oracle::ff1(a, b, c, d, 0.02)).epsilon(1e-12));
    CHECK(aos({a, b}, {c, d}) == doctest::Approx(oracle::aos(a, b, c, d)).epsilon(1e-12));
    CHECK(ff1({a, b}, {c, d}, 0.02) == ff1({c, d}, {a, b}, 0.02));
    CHECK(aos({a, b}, {c, d}) == aos({c, d}, {a, b}));
  }
  const std::vector<std::string> alphabet{"a", "b", "c"};
  for (int i = 0; i < 300; ++i) {
    std::vector<std::string> ref(1 + rng() % 6), hyp(rng() % 7);
    for (auto& w : ref) w = alphabet[rng() % 3];
    for (auto& w : hyp) w = alphabet[rng() % 3];
    CHECK(wer(ref, hyp) == doctest::Approx(oracle::wer(ref, hyp)).epsilon(1e-12));
  }
}

TEST_CASE("evaluate aggregates") {
  std::map<std::string, TimeSpan> gold{{"a", {1.0, 2.0}}, {"b", {3.0, 4.0}}};
  SUBCASE("all exact") {
    const EvalResult r = evaluate(gold, gold, 0.02);
    CHECK(r.ff1 == 1.0);
    CHECK(r.aos == 1.0);
    CHECK(r.ff1_micro == 1.0);
    CHECK(r.missing_ids.empty());
  }
  SUBCASE("half exact, half disjoint") {
    std::map<std::string, TimeSpan> pred{{"a", {1.0, 2.0}}, {"b", {5.0, 6.0}}};
    const EvalResult r = evaluate(pred, gold, 0.02);
    CHECK(r.ff1 == 0.5);
    CHECK(r.aos == 0.5);
  }
  SUBCASE("missing predictions score zero") {
    std::map<std::string, TimeSpan> pred{{"a", {1.0, 2.0}}};
    const EvalResult r = evaluate(pred, gold, 0.02);
    CHECK(r.ff1 == 0.5);
    REQUIRE(r.missing_ids.size() == 1);
    CHECK(r.missing_ids[0] == "b");
  }
  SUBCASE("unknown prediction ids are rejected") {
    std::map<std::string, TimeSpan> pred{{"zzz", {1.0, 2.0}}};
    CHECK_THROWS_AS(evaluate(pred, gold, 0.02), Error);
  }
  SUBCASE("macro mean matches recomputation") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    std::map<std::string, TimeSpan> golds, preds;
    for (int i = 0; i < 50; ++i) {
      double a = u(rng), b = a + 0.1 + u(rng), c = u(rng), d = c + 0.1 + u(rng);
      golds["e" + std::to_string(i)] = {a, b};
      preds["e" + std::to_string(i)] = {c, d};
    }
    const EvalResult r = evaluate(preds, golds, 0.02);
    double f = 0, o = 0;
    for (const auto& [id, g] : golds) {
      f += oracle::ff1(preds[id].start, preds[id].end, g.start, g.end, 0.02);
      o += oracle::aos(preds[id].start, preds[id].end, g.start, g.end);
    }
    CHECK(r.ff1 == doctest::Approx(f / 50).epsilon(1e-12));
    CHECK(r.aos == doctest::Approx(o / 50).epsilon(1e-12));
  }
}
