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

#ifndef DPOPT_ENGINE_HPP_
#define DPOPT_ENGINE_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dpopt/accountant.hpp"
#include "dpopt/backend.hpp"
#include "dpopt/data.hpp"
#include "dpopt/mechanisms.hpp"
#include "dpopt/templates.hpp"

namespace dpopt {

enum class Mode { kDpOpt, kOpt, kDln1 };

std::string to_string(Mode mode);

struct EngineConfig {
  Mode mode = Mode::kDpOpt;
  int num_candidates = 20;   // N
  int max_new_tokens = 50;   // L
  double subsample_rate = 0.01;  // Poisson rate q per voting round
  int demos_per_subset = 5;      // s
  double temperature = 1.1;
  double repetition_penalty = 1.0;
  double epsilon0 = 1.8;   // LimitedDomain per-token budget (DP-OPT)
  double delta0 = 5e-7;    // LimitedDomain failure mass
  double selection_epsilon = 1.8;  // DP-Argmax budget for prompt selection
  int k_bar = 10;
  Budget budget{8.0, 1e-5};
  std::uint64_t seed = 1;
  // Overrides the backend's vocabulary size when > 0 (remote backends).
  std::size_t domain_size_override = 0;

  void validate() const;
  bool dp_generation() const { return mode == Mode::kDpOpt; }
};

enum class Termination { kEos, kDoubleFailure, kTokenLimit, kBudget };

std::string to_string(Termination t);

struct PromptCandidate {
  std::string text;
  Mode mode = Mode::kDpOpt;
  int tokens_emitted = 0;
  std::optional<int> val_correct;
  Termination terminated_by = Termination::kTokenLimit;
};

struct TuneReport {
  std::string chosen_prompt;
  std::vector<PromptCandidate> candidates;
  double train_epsilon = 0.0;
  double validation_epsilon = 0.0;
  double train_delta = 0.0;
  double validation_delta = 0.0;
  int train_order = RdpCurve::kMinOrder;
  int validation_order = RdpCurve::kMinOrder;
  std::size_t train_events = 0;
  std::size_t validation_events = 0;
  std::uint64_t seed = 0;
  std::string mode;
  bool deterministic_backend = true;

  nlohmann::json to_json(const nlohmann::json& config_echo = {}) const;
};

// Which surface an outbound prompt left through; the confidentiality
// boundary test keys off this.
enum class PromptChannel {
  kForwardTrain,       // forward pass over the training set
  kBackward,           // meta-prompts carrying training text
  kForwardValidation,  // candidate scoring on the validation split
  kForwardEval,        // evaluation / transfer target
};

std::string to_string(PromptChannel channel);

using PromptObserver =
    std::function<void(PromptChannel, const std::string& prompt)>;

class Engine {
 public:
  Engine(EngineConfig config, TaskSpec task, LmBackend& backend);

  void set_observer(PromptObserver observer) { observer_ = std::move(observer); }

  const Ledger& ledger() const { return ledger_; }
  std::size_t limited_domain_invocations() const {
    return limited_domain_invocations_;
  }

  std::vector<PredictedExample> forward_pass(const Dataset& dataset,
                                             const std::string& pi,
                                             PromptChannel channel);

  // One candidate via per-token ensemble voting (Algorithm: sample batch,
  // partition, vote, release privately or by plain argmax when epsilon0 is
  // infinite). `candidate_index` keys the derived randomness.
  PromptCandidate dp_ens_gen(const std::vector<PredictedExample>& predicted,
                             const std::string& pi, int candidate_index);

  // Non-private single-meta-prompt generation at temperature 0.7.
  PromptCandidate dln1_generate(const std::vector<PredictedExample>& batch,
                                const std::string& pi, int candidate_index,
                                double temperature = 0.7);

  // Scores candidates on the validation set and picks one: DP-Argmax for
  // DP-OPT, plain argmax for OPT, mean gold-label logprob for DLN-1.
  std::size_t select_prompt(std::vector<PromptCandidate>& candidates,
                            const Dataset& val);

  TuneReport tune(const Dataset& train, const Dataset& val);

  double evaluate(const std::string& pi, const Dataset& dataset);

 private:
  TokenHistogram vote_histogram(
      const std::vector<std::vector<PredictedExample>>& partitions,
      const std::string& pi, const std::string& z, const std::string& msg,
      int candidate_index, int round);
  std::size_t domain_size() const;
  void observe(PromptChannel channel, const std::string& prompt) const;

  EngineConfig config_;
  TaskSpec task_;
  LmBackend& backend_;
  Ledger ledger_;
  RngStream root_rng_;
  PromptObserver observer_;
  std::size_t limited_domain_invocations_ = 0;
};

// Instruction followed by demonstrations in forward-template format.
std::string icl_prompt(const TaskSpec& task, const Dataset& demos);

}  // namespace dpopt

#endif  // DPOPT_ENGINE_HPP_
