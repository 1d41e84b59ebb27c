// Copyright 2026 The dpopt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "dpopt/data.hpp"
#include "dpopt/leakscan.hpp"
#include "dpopt/rng.hpp"

using dpopt::Dataset;
using dpopt::RngStream;

namespace {

std::string random_sentence(RngStream& rng, int words) {
  std::string out;
  for (int i = 0; i < words; ++i) {
    if (i > 0) out += ' ';
    // 26^6 six-letter words; shared 6-grams across corpora are negligible.
    for (int c = 0; c < 6; ++c) {
      out += static_cast<char>('a' + rng.uniform_index(26));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("normalize_words lowercases and strips punctuation") {
  const auto words = dpopt::normalize_words("Don't Stop, believing!  OK?");
  REQUIRE(words.size() == 4);
  CHECK(words[0] == "dont");
  CHECK(words[1] == "stop");
  CHECK(words[2] == "believing");
  CHECK(words[3] == "ok");
}

TEST_CASE("longest_common_word_substring basics") {
  const std::vector<std::string> a = {"x", "a", "b", "c", "y"};
  const std::vector<std::string> b = {"a", "b", "c"};
  const auto common = dpopt::longest_common_word_substring(a, b);
  CHECK(common.length == 3);
  CHECK(common.a_begin == 1);

  CHECK(dpopt::longest_common_word_substring({}, b).length == 0);
  CHECK(dpopt::longest_common_word_substring(a, {}).length == 0);
}

TEST_CASE("overlap statistic is symmetric") {
  RngStream rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<std::string> a, b;
    const std::size_t na = 1 + rng.uniform_index(12);
    const std::size_t nb = 1 + rng.uniform_index(12);
    for (std::size_t i = 0; i < na; ++i) {
      a.push_back(std::string(1, static_cast<char>('a' + rng.uniform_index(4))));
    }
    for (std::size_t i = 0; i < nb; ++i) {
      b.push_back(std::string(1, static_cast<char>('a' + rng.uniform_index(4))));
    }
    CHECK(dpopt::longest_common_word_substring(a, b).length ==
          dpopt::longest_common_word_substring(b, a).length);
  }
}

TEST_CASE("scan finds a leaked fragment despite capitalization") {
  Dataset train = {
      {"completely unrelated sentence here", "positive"},
      {"buy the movie milk when the tv cow is free", "negative"},
  };
  const std::string prompt =
      "Some instruction. Buy the movie milk when the TV cow is free, then "
      "classify.";
  const auto matches = dpopt::scan(prompt, train, 6);
  REQUIRE(matches.size() == 1);
  CHECK(matches[0].train_example_index == 1);
  CHECK(matches[0].overlap_tokens == 10);
  CHECK(matches[0].prompt_span ==
        "buy the movie milk when the tv cow is free");
  CHECK(matches[0].jaccard > 0.0);
}

TEST_CASE("scan stays empty below the threshold or across vocabularies") {
  Dataset train = {{"alpha beta gamma delta", "positive"}};
  CHECK(dpopt::scan("epsilon zeta eta theta", train, 3).empty());
  CHECK(dpopt::scan("alpha beta unrelated", train, 3).empty());
  CHECK_THROWS(dpopt::scan("x", train, 2));
}

TEST_CASE("matches sort by overlap then index") {
  Dataset train = {
      {"one two three four five six seven", "positive"},
      {"one two three four five six seven eight nine", "positive"},
      {"one two three four five six", "positive"},
  };
  const std::string prompt = "one two three four five six seven eight nine";
  const auto matches = dpopt::scan(prompt, train, 6);
  REQUIRE(matches.size() == 3);
  CHECK(matches[0].train_example_index == 1);
  CHECK(matches[0].overlap_tokens == 9);
  CHECK(matches[1].train_example_index == 0);
  CHECK(matches[1].overlap_tokens == 7);
  CHECK(matches[2].train_example_index == 2);
  CHECK(matches[2].overlap_tokens == 6);
}

TEST_CASE("planted substrings are always recovered in full") {
  RngStream rng(32);
  for (int trial = 0; trial < 200; ++trial) {
    Dataset train;
    for (int i = 0; i < 20; ++i) {
      train.push_back({random_sentence(rng, 8), "positive"});
    }
    const std::size_t target = rng.uniform_index(train.size());
    const std::string prompt =
        random_sentence(rng, 4) + " " + train[target].text + " " +
        random_sentence(rng, 4);
    const auto matches = dpopt::scan(prompt, train, 6);
    bool found = false;
    for (const auto& m : matches) {
      if (m.train_example_index == target && m.overlap_tokens == 8) {
        found = true;
      }
    }
    CHECK(found);
  }
}

TEST_CASE("no false positives on independent random corpora") {
  RngStream rng(33);
  for (int trial = 0; trial < 100; ++trial) {
    Dataset train;
    for (int i = 0; i < 1000; ++i) {
      train.push_back({random_sentence(rng, 10), "positive"});
    }
    const std::string prompt = random_sentence(rng, 40);
    CHECK(dpopt::scan(prompt, train, 6).empty());
  }
}
