// Copyright 2026 The DUAL Authors.
// Licensed under the Apache License, Version 2.0

#include <map>
#include <random>

#include "doctest.h"
#include "dual/cascade.hpp"
#include "dual/error.hpp"
#include "dual/metrics.hpp"
#include "oracles.hpp"

using namespace dual;

namespace {

TimedTranscript make_transcript(const std::vector<std::string>& words, double dur = 0.3) {
  TimedTranscript t;
  double at = 0;
  for (const auto& w : words) {
    t.words.push_back({w, at, at + dur});
    at += dur;
  }
  return t;
}

std::vector<std::string> random_words(std::size_t n, std::size_t vocab, std::mt19937_64& rng) {
  std::vector<std::string> out(n);
  for (auto& w : out) w = "w" + std::to_string(rng() % vocab);
  return out;
}

std::vector<std::string> vocab_of(std::size_t n) {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back("w" + std::to_string(i));
  return v;
}

}  // namespace

TEST_CASE("corrupt with zero WER is the identity") {
  std::mt19937_64 rng(1);
  const auto t = make_transcript(random_words(50, 20, rng));
  NoiseSpec spec;
  spec.vocabulary = vocab_of(20);
  CHECK(corrupt(t, spec) == t);
}

TEST_CASE("full substitution replaces every word and keeps timing") {
  std::mt19937_64 rng(2);
  const auto t = make_transcript(random_words(40, 10, rng));
  NoiseSpec spec;
  spec.target_wer = 1.0;
  spec.p_sub = 1;
  spec.p_del = 0;
  spec.p_ins = 0;
  spec.vocabulary = {"v0", "v1", "v2"};  // disjoint from the transcript
  const auto noisy = corrupt(t, spec);
  REQUIRE(noisy.words.size() == t.words.size());
  for (std::size_t i = 0; i < t.words.size(); ++i) {
    CHECK(noisy.words[i].text != t.words[i].text);
    CHECK(noisy.words[i].start == t.words[i].start);
    CHECK(noisy.words[i].end == t.words[i].end);
  }
  CHECK(wer(t.texts(), noisy.texts()) == 1.0);
}

TEST_CASE("insertions split the interval of the word they follow") {
  const auto t = make_transcript({"a", "b"});
  NoiseSpec spec;
  spec.target_wer = 1.0;
  spec.p_sub = 0;
  spec.p_del = 0;
  spec.p_ins = 1;
  spec.vocabulary = {"x"};
  const auto noisy = corrupt(t, spec);
  REQUIRE(noisy.words.size() == 4);
  CHECK(noisy.words[0] == TimedWord{"a", 0.0, 0.15});
  CHECK(noisy.words[1] == TimedWord{"x", 0.15, 0.3});
  CHECK_NOTHROW(validate(noisy));
}

TEST_CASE("realised WER tracks the target") {
  std::mt19937_64 rng(3);
  const auto t = make_transcript(random_words(2000, 200, rng), 0.1);
  for (double target : {0.1, 0.3, 0.5}) {
    NoiseSpec spec;
    spec.target_wer = target;
    spec.vocabulary = vocab_of(200);
    spec.seed = 7;
    const auto noisy = corrupt(t, spec);
    CHECK(std::abs(wer(t.texts(), noisy.texts()) - target) < 0.05);
  }
}

TEST_CASE("word count is balanced on average") {
  std::mt19937_64 rng(4);
  const auto t = make_transcript(random_words(100, 30, rng));
  double mean_delta = 0;
  const int runs = 400;
  for (int s = 0; s < runs; ++s) {
    NoiseSpec spec;
    spec.target_wer = 0.4;
    spec.vocabulary = vocab_of(30);
    spec.seed = std::uint64_t(s);
    mean_delta += double(corrupt(t, spec).words.size()) - 100.0;
  }
  CHECK(std::abs(mean_delta / runs) < 1.0);
}

TEST_CASE("corrupt is deterministic per seed") {
  std::mt19937_64 rng(5);
  const auto t = make_transcript(random_words(60, 15, rng));
  NoiseSpec spec;
  spec.target_wer = 0.5;
  spec.vocabulary = vocab_of(15);
  spec.seed = 11;
  CHECK(corrupt(t, spec) == corrupt(t, spec));
  spec.seed = 12;
  const auto other = corrupt(t, spec);
  spec.seed = 11;
  CHECK_FALSE(corrupt(t, spec) == other);
}

TEST_CASE("noise settings validation") {
  NoiseSpec spec;
  spec.vocabulary = {"a"};
  spec.target_wer = 1.5;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.target_wer = 0.2;
  spec.p_sub = 0.9;
  CHECK_THROWS_AS(spec.validate(), Error);
  spec.p_sub = 1.0 / 3;
  spec.vocabulary.clear();
  CHECK_THROWS_AS(spec.validate(), Error);
}

TEST_CASE("oracle_qa") {
  const auto t = make_transcript({"the", "red", "fox", "ran", "over", "the", "hill"});
  SUBCASE("verbatim phrase") {
    const TimeSpan s = oracle_qa(t, {"fox", "ran"});
    CHECK(s.start == doctest::Approx(0.6));
    CHECK(s.end == doctest::Approx(1.2));
  }
  SUBCASE("one substituted word still finds the window") {
    const TimeSpan s = oracle_qa(t, {"fox", "sat", "over"});
    CHECK(s.start == doctest::Approx(0.6));
    CHECK(s.end == doctest::Approx(1.5));
  }
  SUBCASE("ties go to the earliest window") {
    const TimeSpan s = oracle_qa(t, {"the"});
    CHECK(s.start == 0.0);
  }
  SUBCASE("empty passage") {
    CHECK_THROWS_AS(oracle_qa(TimedTranscript{}, {"a"}), Error);
  }
  SUBCASE("matches an exhaustive window scan") {
    std::mt19937_64 rng(6);
    for (int trial = 0; trial < 200; ++trial) {
      const auto words = random_words(1 + rng() % 9, 4, rng);
      const auto pass = make_transcript(words);
      const auto ans = random_words(1 + rng() % 3, 4, rng);
      std::size_t best = SIZE_MAX, bi = 0, bj = 0;
      for (std::size_t i = 0; i < words.size(); ++i)
        for (std::size_t j = i; j < words.size(); ++j) {
          const std::vector<std::string> win(words.begin() + long(i), words.begin() + long(j) + 1);
          const std::size_t d = oracle::edit_distance(win, ans);
          if (d < best) {  // strict: keeps earliest start, then shortest
            best = d;
            bi = i;
            bj = j;
          }
        }
      const TimeSpan got = oracle_qa(pass, ans);
      CHECK(got.start == pass.words[bi].start);
      CHECK(got.end == pass.words[bj].end);
    }
  }
}

TEST_CASE("bucket analysis") {
  SUBCASE("one bucket gives corpus means") {
    std::vector<BucketInput> ex{{0.1, 0.5, 1.0}, {0.2, 0.7, 0.0}, {0.9, 0.0, 0.5}};
    const auto r = bucket_analysis(ex, {0.0, 1.0});
    REQUIRE(r.buckets.size() == 1);
    CHECK(r.buckets[0].count == 3);
    CHECK(r.buckets[0].ff1_cascade == doctest::Approx(0.4));
    CHECK(r.buckets[0].ff1_dual == doctest::Approx(0.5));
  }
  SUBCASE("hand-built buckets, half-open edges and empty buckets absent") {
    std::vector<BucketInput> ex{{0.0, 1.0, 0.8}, {0.05, 0.5, 0.6}, {0.2, 0.2, 0.7}, {0.25, 0.4, 0.9}};
    const auto r = bucket_analysis(ex, {0.0, 0.1, 0.2, 0.3});
    REQUIRE(r.buckets.size() == 2);
    CHECK(r.buckets[0].lo == 0.0);
    CHECK(r.buckets[0].ff1_cascade == doctest::Approx(0.75));
    CHECK(r.buckets[0].ff1_dual == doctest::Approx(0.7));
    CHECK(r.buckets[1].lo == 0.2);
    CHECK(r.buckets[1].count == 2);
    CHECK(r.buckets[1].ff1_cascade == doctest::Approx(0.3));
    CHECK(r.buckets[1].ff1_dual == doctest::Approx(0.8));
    CHECK(r.uncovered == 0);
  }
  SUBCASE("random data matches a group-by") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<BucketInput> ex(500);
    for (auto& e : ex) e = {u(rng) * 0.8, u(rng), u(rng)};
    const auto edges = default_bucket_edges();
    CHECK(edges.size() == 8);
    CHECK(edges.back() == doctest::Approx(0.7));
    std::map<int, std::vector<const BucketInput*>> groups;
    std::size_t outside = 0;
    for (const auto& e : ex) {
      const int b = int(std::floor(e.realized_wer * 10 + 1e-12));
      if (b >= 7) ++outside;
      else groups[b].push_back(&e);
    }
    const auto r = bucket_analysis(ex, edges);
    CHECK(r.uncovered == outside);
    REQUIRE(r.buckets.size() == groups.size());
    std::size_t i = 0;
    for (const auto& [b, members] : groups) {
      double c = 0, d = 0;
      for (const auto* e : members) {
        c += e->ff1_cascade;
        d += e->ff1_dual;
      }
      CHECK(r.buckets[i].count == members.size());
      CHECK(r.buckets[i].ff1_cascade == doctest::Approx(c / members.size()).epsilon(1e-12));
      CHECK(r.buckets[i].ff1_dual == doctest::Approx(d / members.size()).epsilon(1e-12));
      ++i;
    }
  }
  SUBCASE("unordered edges are rejected") {
    CHECK_THROWS_AS(bucket_analysis({}, {0.0, 0.2, 0.1}), Error);
    CHECK_THROWS_AS(bucket_analysis({}, {0.0}), Error);
  }
}
