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

#include <cmath>
#include <limits>
#include <map>
#include <string>

#include "dpopt/mechanisms.hpp"
#include "dpopt/rng.hpp"

using dpopt::EventKind;
using dpopt::MechanismParams;
using dpopt::RngStream;
using dpopt::SensitivitySpec;
using dpopt::TokenHistogram;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("gumbel_sample closed-form points") {
  CHECK(dpopt::gumbel_sample(5.0, std::exp(-1.0)) == doctest::Approx(0.0));
  CHECK(dpopt::gumbel_sample(2.0, std::exp(-std::exp(1.0))) ==
        doctest::Approx(-2.0));
  CHECK_THROWS_AS(dpopt::gumbel_sample(1.0, 0.0), std::domain_error);
  CHECK_THROWS_AS(dpopt::gumbel_sample(1.0, 1.0), std::domain_error);
}

TEST_CASE("gumbel_sample mean matches the Euler-Mascheroni constant") {
  RngStream rng(17);
  double sum = 0.0;
  const int n = 1'000'000;
  for (int i = 0; i < n; ++i) sum += dpopt::gumbel_sample(1.0, rng.uniform_open());
  CHECK(std::abs(sum / n - 0.5772) < 0.005);
}

TEST_CASE("exp_mech_argmax symmetric scores are a fair coin") {
  std::map<std::string, double> scores{{"a", 5.0}, {"b", 5.0}};
  RngStream rng(3);
  int a_wins = 0;
  const int trials = 200'000;
  for (int i = 0; i < trials; ++i) {
    auto [tok, ev] = dpopt::exp_mech_argmax(scores, 1.0, 1.0, rng);
    if (tok == "a") ++a_wins;
  }
  CHECK(std::abs(static_cast<double>(a_wins) / trials - 0.5) < 0.005);
}

TEST_CASE("exp_mech_argmax matches the closed-form softmax") {
  // P(a) = exp(2*10/2) / (exp(2*10/2) + exp(0)) = e^10 / (e^10 + 1).
  std::map<std::string, double> scores{{"a", 10.0}, {"b", 0.0}};
  const double p_a = std::exp(10.0) / (std::exp(10.0) + 1.0);
  RngStream rng(4);
  int a_wins = 0;
  const int trials = 200'000;
  for (int i = 0; i < trials; ++i) {
    auto [tok, ev] = dpopt::exp_mech_argmax(scores, 2.0, 1.0, rng);
    if (tok == "a") ++a_wins;
  }
  CHECK(std::abs(static_cast<double>(a_wins) / trials - p_a) < 0.005);
}

TEST_CASE("exp_mech_argmax near-zero epsilon is close to uniform") {
  std::map<std::string, double> scores{{"a", 3.0}, {"b", 1.0}, {"c", 0.0}};
  RngStream rng(5);
  std::map<std::string, int> wins;
  const int trials = 90'000;
  for (int i = 0; i < trials; ++i) {
    auto [tok, ev] = dpopt::exp_mech_argmax(scores, 1e-4, 1.0, rng);
    ++wins[tok];
  }
  for (const auto& [tok, n] : wins) {
    CHECK(std::abs(static_cast<double>(n) / trials - 1.0 / 3.0) < 0.01);
  }
}

TEST_CASE("exp_mech_argmax event bookkeeping") {
  std::map<std::string, double> scores{{"a", 1.0}};
  RngStream rng(6);
  auto [tok, ev] = dpopt::exp_mech_argmax(scores, 0.7, 1.0, rng);
  REQUIRE(ev.has_value());
  CHECK(ev->kind == EventKind::kEm);
  CHECK(ev->epsilon0 == doctest::Approx(0.7));
  CHECK(ev->delta0 == 0.0);

  auto [tok2, ev2] =
      dpopt::exp_mech_argmax(scores, 0.7, 1.0, rng, /*monotonic_utility=*/true);
  REQUIRE(ev2.has_value());
  CHECK(ev2->kind == EventKind::kMonotonicEm);

  auto [tok3, ev3] = dpopt::exp_mech_argmax(scores, kInf, 1.0, rng);
  CHECK(tok3 == "a");
  CHECK_FALSE(ev3.has_value());

  CHECK_THROWS(dpopt::exp_mech_argmax({}, 1.0, 1.0, rng));
}

TEST_CASE("infinite-epsilon path equals brute-force argmax with tie-break") {
  RngStream seed_rng(7);
  for (int trial = 0; trial < 1000; ++trial) {
    std::map<std::string, double> scores;
    const int n = 1 + static_cast<int>(seed_rng.uniform_index(6));
    for (int i = 0; i < n; ++i) {
      // Coarse scores force frequent ties.
      scores["t" + std::to_string(i)] =
          static_cast<double>(seed_rng.uniform_index(3));
    }
    std::string expected;
    double best = -kInf;
    for (const auto& [tok, s] : scores) {
      if (s > best) {  // map order is lexicographic, first win is smallest key
        best = s;
        expected = tok;
      }
    }
    RngStream rng(trial);
    auto [tok, ev] = dpopt::exp_mech_argmax(scores, kInf, 1.0, rng);
    CHECK(tok == expected);
  }
}

TEST_CASE("limited_domain threshold value") {
  MechanismParams params;
  params.epsilon0 = 1.8;
  params.delta0 = 5e-7;
  params.k_bar = 10;
  SensitivitySpec sens;  // delta_zero = 2, delta_inf = 1
  const double h = dpopt::limited_domain_threshold(4, params, sens, 32000);
  // 4 + 1 + 2 ln(2 / 5e-7) / 1.8, with min{2, 10, 31990} = 2.
  CHECK(std::abs(h - 21.890894354537962) < 1e-6);
}

TEST_CASE("limited_domain returns a dominant token") {
  TokenHistogram h;
  h.counts = {{"t1", 100}};
  h.domain_size = 32000;
  MechanismParams params;
  params.epsilon0 = 1.8;
  params.delta0 = 5e-7;
  params.k_bar = 10;
  SensitivitySpec sens;
  RngStream rng(11);
  int wins = 0;
  const int trials = 2000;
  for (int i = 0; i < trials; ++i) {
    auto [outcome, ev] = dpopt::limited_domain(h, params, sens, rng);
    if (!outcome.failed() && *outcome.token == "t1") ++wins;
    CHECK(ev.kind == EventKind::kLimitedDomain);
    CHECK(ev.delta0 == doctest::Approx(5e-7));
  }
  CHECK(static_cast<double>(wins) / trials >= 0.99);
}

TEST_CASE("limited_domain fails on a flat histogram") {
  TokenHistogram h;
  for (int i = 0; i < 500; ++i) h.counts["tok" + std::to_string(i)] = 1;
  h.domain_size = 32000;
  MechanismParams params;
  params.epsilon0 = 1.8;
  params.delta0 = 5e-7;
  params.k_bar = 10;
  SensitivitySpec sens;
  RngStream rng(12);
  int failures = 0;
  const int trials = 2000;
  for (int i = 0; i < trials; ++i) {
    auto [outcome, ev] = dpopt::limited_domain(h, params, sens, rng);
    if (outcome.failed()) ++failures;
  }
  CHECK(static_cast<double>(failures) / trials >= 0.99);
}

TEST_CASE("limited_domain never releases a token outside the top k_bar") {
  RngStream gen(13);
  MechanismParams params;
  params.epsilon0 = 0.5;
  params.delta0 = 0.05;
  params.k_bar = 3;
  SensitivitySpec sens;
  for (int trial = 0; trial < 1000; ++trial) {
    TokenHistogram h;
    const int keys = 1 + static_cast<int>(gen.uniform_index(8));
    for (int i = 0; i < keys; ++i) {
      h.counts["k" + std::to_string(i)] =
          static_cast<long long>(gen.uniform_index(20));
    }
    h.domain_size = 100;

    // Rank counts descending to find the k_bar-th largest value.
    std::vector<long long> ranked;
    for (const auto& [tok, c] : h.counts) ranked.push_back(c);
    std::sort(ranked.rbegin(), ranked.rend());
    const long long cutoff =
        ranked.size() >= 3 ? ranked[2] : ranked.back();

    RngStream rng(trial);
    auto [outcome, ev] = dpopt::limited_domain(h, params, sens, rng);
    if (!outcome.failed()) {
      CHECK(h.counts.at(*outcome.token) >= cutoff);
    }
  }
}

TEST_CASE("limited_domain rejects k_bar >= domain size") {
  TokenHistogram h;
  h.counts = {{"a", 1}};
  h.domain_size = 5;
  MechanismParams params;
  params.epsilon0 = 1.0;
  params.delta0 = 0.01;
  params.k_bar = 5;
  SensitivitySpec sens;
  RngStream rng(1);
  CHECK_THROWS(dpopt::limited_domain(h, params, sens, rng));
}

TEST_CASE("mechanisms are deterministic under a fixed seed") {
  TokenHistogram h;
  h.counts = {{"a", 9}, {"b", 7}, {"c", 2}};
  h.domain_size = 50;
  MechanismParams params;
  params.epsilon0 = 1.0;
  params.delta0 = 0.01;
  params.k_bar = 3;
  SensitivitySpec sens;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    RngStream r1(seed), r2(seed);
    auto [o1, e1] = dpopt::limited_domain(h, params, sens, r1);
    auto [o2, e2] = dpopt::limited_domain(h, params, sens, r2);
    CHECK(o1.failed() == o2.failed());
    if (!o1.failed()) CHECK(*o1.token == *o2.token);

    std::map<std::string, double> scores{{"x", 1.0}, {"y", 0.5}};
    RngStream r3(seed), r4(seed);
    auto [t1, ev1] = dpopt::exp_mech_argmax(scores, 0.3, 1.0, r3);
    auto [t2, ev2] = dpopt::exp_mech_argmax(scores, 0.3, 1.0, r4);
    CHECK(t1 == t2);
  }
}
