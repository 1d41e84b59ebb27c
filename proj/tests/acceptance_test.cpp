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

// Release gate: one pass/fail line per criterion, nonzero exit on any
// failure. Each check uses an oracle independent of the implementation
// under test (closed forms, hand-computed constants, brute force).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dpopt/accountant.hpp"
#include "dpopt/backend.hpp"
#include "dpopt/data.hpp"
#include "dpopt/engine.hpp"
#include "dpopt/errors.hpp"
#include "dpopt/leakscan.hpp"
#include "dpopt/mechanisms.hpp"
#include "dpopt/rng.hpp"
#include "dpopt/templates.hpp"

namespace {

using dpopt::Dataset;
using dpopt::Engine;
using dpopt::EngineConfig;
using dpopt::EventKind;
using dpopt::Ledger;
using dpopt::MechanismParams;
using dpopt::Mode;
using dpopt::NgramBackend;
using dpopt::PrivacyEvent;
using dpopt::RdpCurve;
using dpopt::RngStream;
using dpopt::Scope;
using dpopt::SensitivitySpec;
using dpopt::TaskSpec;
using dpopt::Termination;
using dpopt::TokenHistogram;

int failures = 0;

void report(int number, const std::string& name, bool ok,
            const std::string& detail = "") {
  std::printf("%s  criterion %d: %s%s%s\n", ok ? "PASS" : "FAIL", number,
              name.c_str(), detail.empty() ? "" : " -- ", detail.c_str());
  if (!ok) ++failures;
}

std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

const std::string kFixtureDir = std::string(DPOPT_TEST_DIR) + "/fixtures/";
const std::string kGoldenDir = std::string(DPOPT_TEST_DIR) + "/golden/";

// ---------------------------------------------------------------- 1
void criterion_softmax_oracle() {
  const std::map<std::string, double> scores{{"a", 10.0}, {"b", 7.0},
                                             {"c", 3.0}};
  double z = 0.0;
  std::map<std::string, double> expected;
  for (const auto& [k, s] : scores) {
    expected[k] = std::exp(s / 2.0);  // epsilon = 1, sensitivity 1
    z += expected[k];
  }
  for (auto& [k, p] : expected) p /= z;

  const int trials = 200'000;
  std::map<std::string, int> hits;
  RngStream rng(101);
  for (int i = 0; i < trials; ++i) {
    auto [tok, ev] = dpopt::exp_mech_argmax(scores, 1.0, 1.0, rng);
    ++hits[tok];
  }
  double worst = 0.0;
  for (const auto& [k, p] : expected) {
    worst = std::max(worst,
                     std::abs(static_cast<double>(hits[k]) / trials - p));
  }
  char detail[64];
  std::snprintf(detail, sizeof(detail), "max deviation %.5f", worst);
  report(1, "Gumbel-max frequencies match the closed-form softmax",
         worst < 0.005, detail);
}

// ---------------------------------------------------------------- 2
void criterion_limited_domain_oracle() {
  // Tiny histogram: d = 5, k_bar = 3, counts {6, 4, 3, 1}; eps0 = 1,
  // delta0 = 0.2, Delta0 = 2 give the threshold 1 + 1 + 2 ln(2/0.2) = 6.6052.
  TokenHistogram h;
  h.counts = {{"t1", 6}, {"t2", 4}, {"t3", 3}, {"t4", 1}};
  h.domain_size = 5;
  MechanismParams params;
  params.epsilon0 = 1.0;
  params.delta0 = 0.2;
  params.k_bar = 3;
  SensitivitySpec sens;

  const double threshold = 2.0 + 2.0 * std::log(10.0);
  // Gumbel-max identity: the output law is a softmax at temperature
  // 2 * Delta_inf / eps0 = 2 over {6, 4, 3, threshold}.
  const double values[4] = {6.0, 4.0, 3.0, threshold};
  double expected[4];
  double z = 0.0;
  for (int i = 0; i < 4; ++i) z += std::exp(values[i] / 2.0);
  for (int i = 0; i < 4; ++i) expected[i] = std::exp(values[i] / 2.0) / z;

  const int trials = 100'000;
  int observed[4] = {0, 0, 0, 0};
  RngStream rng(102);
  for (int i = 0; i < trials; ++i) {
    auto [outcome, ev] = dpopt::limited_domain(h, params, sens, rng);
    if (outcome.failed()) {
      ++observed[3];
    } else if (*outcome.token == "t1") {
      ++observed[0];
    } else if (*outcome.token == "t2") {
      ++observed[1];
    } else if (*outcome.token == "t3") {
      ++observed[2];
    }
  }
  double chi2 = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double e = expected[i] * trials;
    chi2 += (observed[i] - e) * (observed[i] - e) / e;
  }
  // Chi-square with 3 degrees of freedom: p > 1e-3 iff chi2 < 16.266.
  const bool dist_ok = chi2 < 16.266;

  MechanismParams sst;
  sst.epsilon0 = 1.8;
  sst.delta0 = 5e-7;
  sst.k_bar = 10;
  const double h_bot = dpopt::limited_domain_threshold(4, sst, sens, 32000);
  const bool threshold_ok = std::abs(h_bot - 21.890894354537962) < 1e-6;

  char detail[96];
  std::snprintf(detail, sizeof(detail), "chi2 %.3f (limit 16.266), h_bot %.6f",
                chi2, h_bot);
  report(2, "LimitedDomain output law and threshold value",
         dist_ok && threshold_ok, detail);
}

// ---------------------------------------------------------------- 3
void criterion_accountant_consistency() {
  const double q = 1025.0 / 66674.0;
  Ledger ledger;
  for (int i = 0; i < 50; ++i) {
    PrivacyEvent e;
    e.kind = EventKind::kLimitedDomain;
    e.epsilon0 = 1.8;
    e.delta0 = 5e-7;
    e.subsample_rate = q;
    ledger.append(e);
  }
  const auto cost = dpopt::compose(ledger);
  const double eps =
      dpopt::to_eps_delta(cost.train, cost.train_delta0, 1.0 / 66674.0);
  const bool range_ok = eps <= 8.0 && eps > 0.1;

  PrivacyEvent plain;
  plain.kind = EventKind::kLimitedDomain;
  plain.epsilon0 = 1.8;
  const RdpCurve base = dpopt::base_curve(plain);
  const RdpCurve q1 = dpopt::subsample_amplify(base, 1.0);
  bool identity_ok = true;
  for (int a = RdpCurve::kMinOrder; a <= RdpCurve::kMaxOrder; ++a) {
    if (q1.at(a) != base.at(a)) identity_ok = false;
  }

  bool advcomp_ok = true;
  for (int m : {25, 100}) {
    for (double eps0 : {0.5, 1.8}) {
      Ledger l;
      for (int i = 0; i < m; ++i) {
        PrivacyEvent e;
        e.kind = EventKind::kLimitedDomain;
        e.epsilon0 = eps0;
        l.append(e);
      }
      const auto c = dpopt::compose(l);
      const double rdp_eps = dpopt::to_eps_delta(c.train, 0.0, 1e-5);
      const double adv =
          eps0 * std::sqrt(2.0 * m * std::log(1e5)) +
          m * eps0 * (std::exp(eps0) - 1.0);
      if (rdp_eps > adv) advcomp_ok = false;
    }
  }
  char detail[64];
  std::snprintf(detail, sizeof(detail), "train epsilon %.4f", eps);
  report(3, "accountant matches the subsampled configuration budget",
         range_ok && identity_ok && advcomp_ok, detail);
}

// ---------------------------------------------------------------- 4
void criterion_sqrt_growth() {
  auto converted = [](int m) {
    Ledger l;
    for (int i = 0; i < m; ++i) {
      PrivacyEvent e;
      e.kind = EventKind::kLimitedDomain;
      e.epsilon0 = 0.1;
      e.delta0 = 1e-9;
      l.append(e);
    }
    const auto c = dpopt::compose(l);
    return dpopt::to_eps_delta(c.train, c.train_delta0, 1e-5);
  };
  bool ok = true;
  double worst_ratio = 0.0;
  for (int m : {25, 100, 400}) {
    const double ratio = converted(4 * m) / converted(m);
    worst_ratio = std::max(worst_ratio, ratio);
    if (ratio > 2.5) ok = false;
  }
  char detail[64];
  std::snprintf(detail, sizeof(detail), "worst 4m/m ratio %.3f", worst_ratio);
  report(4, "converted epsilon grows like sqrt of the event count", ok,
         detail);
}

// ---------------------------------------------------------------- 5 & 6
EngineConfig toy_config(Mode mode) {
  EngineConfig cfg;
  cfg.mode = mode;
  cfg.num_candidates = 5;
  cfg.max_new_tokens = 20;
  cfg.subsample_rate = 0.3;
  cfg.demos_per_subset = 1;
  cfg.temperature = 0.2;
  cfg.epsilon0 = 0.6;
  cfg.delta0 = 1e-4;
  cfg.selection_epsilon = 1.0;
  cfg.k_bar = 10;
  cfg.budget = {2.0, 1.0 / 200.0};
  cfg.seed = 3;
  return cfg;
}

std::pair<Dataset, Dataset> toy_datasets() {
  const TaskSpec task = *dpopt::builtin_task("sst2");
  const Dataset full =
      dpopt::load_dataset(kFixtureDir + "toy_train.jsonl", task);
  RngStream rng(3);
  return dpopt::split_validation(full, 0.2, rng);  // 200 train / 50 val
}

void criterion_toy_run() {
  bool ok = true;
  std::string detail;
  try {
    const TaskSpec task = *dpopt::builtin_task("sst2");
    std::vector<std::string> corpus;
    {
      std::ifstream in(kFixtureDir + "toy_corpus.txt");
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty()) corpus.push_back(line);
      }
    }
    NgramBackend backend(corpus, 3);
    auto [train, val] = toy_datasets();

    const EngineConfig cfg = toy_config(Mode::kDpOpt);
    // Expected ensemble size: q |train| / s voters per round.
    if (cfg.subsample_rate * static_cast<double>(train.size()) < 20.0) {
      ok = false;
      detail = "ensemble smaller than 20";
    }

    Engine engine(cfg, task, backend);
    const auto rep = engine.tune(train, val);
    if (rep.chosen_prompt.empty()) {
      ok = false;
      detail = "empty chosen prompt";
    }
    if (rep.train_epsilon > 2.0) {
      ok = false;
      detail = "train epsilon above budget";
    }
    if (engine.ledger().count(Scope::kValidation) != 1) {
      ok = false;
      detail = "validation event count != 1";
    }

    // Ledger replay (criterion 6 support): every prefix of the train
    // ledger stays within the budget.
    Ledger replay;
    for (const PrivacyEvent& e : engine.ledger().events()) {
      if (e.scope != Scope::kTrain) continue;
      replay.append(e);
      const auto c = dpopt::compose(replay);
      if (dpopt::to_eps_delta(c.train, c.train_delta0,
                              cfg.budget.delta_max) > cfg.budget.epsilon_max) {
        ok = false;
        detail = "ledger prefix exceeds the budget";
      }
    }

    // OPT on the same seed must be byte-deterministic.
    auto run_opt = [&] {
      NgramBackend b(corpus, 3);
      Engine e(toy_config(Mode::kOpt), task, b);
      return e.tune(train, val).to_json().dump();
    };
    if (run_opt() != run_opt()) {
      ok = false;
      detail = "OPT runs differ";
    }
    if (ok) {
      std::ostringstream d;
      d << "chosen prompt \"" << rep.chosen_prompt << "\", train epsilon "
        << rep.train_epsilon;
      detail = d.str();
    }
  } catch (const std::exception& e) {
    ok = false;
    detail = e.what();
  }
  report(5, "end-to-end toy run over the n-gram backend", ok, detail);
}

void criterion_budget_enforcement() {
  bool ok = true;
  std::string detail;
  try {
    const TaskSpec task = *dpopt::builtin_task("sst2");
    std::vector<dpopt::PredictedExample> predicted;
    for (int i = 0; i < 40; ++i) {
      predicted.push_back({"x" + std::to_string(i), "positive", "negative"});
    }
    dpopt::MockBackend backend;
    backend.add_generation_rule("Improved Instruction: ",
                                {{dpopt::TokenText{" go", false}, 1.0}});
    backend.add_generation_rule(" go", {{dpopt::TokenText{" go", false}, 1.0}});
    backend.set_vocab_size(32000);

    EngineConfig cfg = toy_config(Mode::kDpOpt);
    cfg.budget = {0.001, 1.0 / 200.0};
    cfg.subsample_rate = 1.0;
    Engine engine(cfg, task, backend);
    const auto cand = engine.dp_ens_gen(predicted, "init", 0);
    if (cand.terminated_by != Termination::kBudget) {
      ok = false;
      detail = "termination reason is not budget";
    }
    if (!engine.ledger().events().empty()) {
      ok = false;
      detail = "events were appended past the budget";
    }
  } catch (const std::exception& e) {
    ok = false;
    detail = e.what();
  }
  report(6, "a tiny epsilon budget blocks generation up front", ok, detail);
}

// ---------------------------------------------------------------- 7
void criterion_leak_detection() {
  Dataset train = {
      {"an unrelated training sentence", "positive"},
      {"buy the movie milk when the tv cow is free", "negative"},
  };
  const std::string prompt =
      "Classify reviews. Buy the movie milk when the TV cow is free.";
  const auto matches = dpopt::scan(prompt, train, 6);
  bool found = matches.size() == 1 && matches[0].train_example_index == 1 &&
               matches[0].overlap_tokens == 10;

  bool clean = true;
  RngStream rng(107);
  auto random_sentence = [&rng](int words) {
    std::string out;
    for (int i = 0; i < words; ++i) {
      if (i > 0) out += ' ';
      for (int c = 0; c < 6; ++c) {
        out += static_cast<char>('a' + rng.uniform_index(26));
      }
    }
    return out;
  };
  for (int trial = 0; trial < 100 && clean; ++trial) {
    Dataset corpus;
    for (int i = 0; i < 1000; ++i) {
      corpus.push_back({random_sentence(10), "positive"});
    }
    if (!dpopt::scan(random_sentence(40), corpus, 6).empty()) clean = false;
  }
  report(7, "planted leak found at overlap 10, no random false positives",
         found && clean);
}

// ---------------------------------------------------------------- 8
void criterion_data_properties() {
  bool ok = true;
  RngStream gen(108);
  for (int trial = 0; trial < 1000 && ok; ++trial) {
    const std::size_t n = gen.uniform_index(60);
    const std::size_t s = 1 + gen.uniform_index(8);
    std::vector<dpopt::PredictedExample> batch(n);
    for (std::size_t i = 0; i < n; ++i) batch[i].text = std::to_string(i);

    RngStream r1(trial), r2(trial);
    const auto p1 = dpopt::partition(batch, s, r1);
    const auto p2 = dpopt::partition(batch, s, r2);

    std::set<std::string> seen;
    std::size_t assigned = 0;
    for (const auto& part : p1.partitions) {
      if (part.size() != s) ok = false;
      for (const auto& ex : part) {
        if (!seen.insert(ex.text).second) ok = false;
        ++assigned;
      }
    }
    if (assigned + p1.dropped != n) ok = false;
    if (p1.partitions.size() != n / s) ok = false;

    // Determinism: the replay under the same seed is identical.
    if (p1.partitions.size() != p2.partitions.size()) ok = false;
    for (std::size_t i = 0; ok && i < p1.partitions.size(); ++i) {
      for (std::size_t j = 0; j < s; ++j) {
        if (p1.partitions[i][j].text != p2.partitions[i][j].text) ok = false;
      }
    }

    std::vector<int> records(30);
    RngStream r3(trial), r4(trial);
    if (dpopt::poisson_sample(records, 0.4, r3) !=
        dpopt::poisson_sample(records, 0.4, r4)) {
      ok = false;
    }
  }
  report(8, "partition disjointness and sampling determinism", ok);
}

// ---------------------------------------------------------------- 9
void criterion_template_goldens() {
  const std::string forward = dpopt::render_forward(
      "Classify the input text as positive or negative.", "great movie");
  const bool forward_ok = forward == read_all(kGoldenDir + "forward.txt");

  std::vector<dpopt::PredictedExample> examples = {
      {"a delightful film", "positive", "positive"},
      {"a dreary slog", "negative", "positive"},
  };
  const std::string backward = dpopt::render_backward(
      examples, "Classify the input text as positive or negative.", "",
      dpopt::msg_options()[2]);
  const bool backward_ok = backward == read_all(kGoldenDir + "backward.txt");

  report(9, "forward and backward templates byte-match the golden files",
         forward_ok && backward_ok);
}

}  // namespace

int main() {
  criterion_softmax_oracle();
  criterion_limited_domain_oracle();
  criterion_accountant_consistency();
  criterion_sqrt_growth();
  criterion_toy_run();
  criterion_budget_enforcement();
  criterion_leak_detection();
  criterion_data_properties();
  criterion_template_goldens();
  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all 9 criteria passed\n");
  return 0;
}
