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

#include "dpopt/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>
#include <stdexcept>

#include "dpopt/errors.hpp"

namespace dpopt {
namespace {

// Internal histogram key for the end-of-sequence vote; the leading control
// byte keeps it outside any token string a backend can emit.
const std::string kEosKey = "\x04<eos>";

// rng substream labels
constexpr std::uint64_t kMsgLabel = 0x6d73;
constexpr std::uint64_t kPoissonLabel = 1;
constexpr std::uint64_t kPartitionLabel = 2;
constexpr std::uint64_t kMechanismLabel = 3;
constexpr std::uint64_t kVoteLabel = 5;
constexpr std::uint64_t kSelectionLabel = 0x5e1;
constexpr std::uint64_t kDln1BatchLabel = 0xd1;

std::string encode_vote(const TokenText& token) {
  return token.eos ? kEosKey : token.text;
}

TokenText decode_vote(const std::string& key) {
  if (key == kEosKey) return TokenText::End();
  return TokenText{key, false};
}

std::string candidate_key(std::size_t index) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%06zu", index);
  return buf;
}

// Plain histogram argmax: highest count, ties toward the smallest token
// string with EOS last.
std::string histogram_argmax(const TokenHistogram& h) {
  if (h.counts.empty()) {
    throw std::invalid_argument("histogram_argmax: empty histogram");
  }
  const std::string* best = nullptr;
  long long best_count = std::numeric_limits<long long>::min();
  for (const auto& [key, count] : h.counts) {
    bool better = count > best_count;
    if (count == best_count && best != nullptr) {
      const bool a_eos = key == kEosKey;
      const bool b_eos = *best == kEosKey;
      better = a_eos != b_eos ? !a_eos : key < *best;
    }
    if (better) {
      best = &key;
      best_count = count;
    }
  }
  return *best;
}

}  // namespace

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::kDpOpt:
      return "dp-opt";
    case Mode::kOpt:
      return "opt";
    case Mode::kDln1:
      return "dln1";
  }
  return "unknown";
}

std::string to_string(Termination t) {
  switch (t) {
    case Termination::kEos:
      return "eos";
    case Termination::kDoubleFailure:
      return "double-failure";
    case Termination::kTokenLimit:
      return "token-limit";
    case Termination::kBudget:
      return "budget";
  }
  return "unknown";
}

std::string to_string(PromptChannel channel) {
  switch (channel) {
    case PromptChannel::kForwardTrain:
      return "forward-train";
    case PromptChannel::kBackward:
      return "backward";
    case PromptChannel::kForwardValidation:
      return "forward-validation";
    case PromptChannel::kForwardEval:
      return "forward-eval";
  }
  return "unknown";
}

void EngineConfig::validate() const {
  if (num_candidates < 1) throw ConfigError("config: N must be >= 1");
  if (max_new_tokens < 1) throw ConfigError("config: L must be >= 1");
  if (demos_per_subset < 1) throw ConfigError("config: s must be >= 1");
  if (!(subsample_rate >= 0.0) || !(subsample_rate <= 1.0)) {
    throw ConfigError("config: q must lie in [0, 1]");
  }
  if (!(temperature >= 0.0)) throw ConfigError("config: temperature < 0");
  if (repetition_penalty < 1.0) {
    throw ConfigError("config: repetition penalty must be >= 1");
  }
  if (mode == Mode::kDpOpt) {
    if (!(epsilon0 > 0.0) || std::isinf(epsilon0)) {
      throw ConfigError("config: dp-opt requires a finite positive epsilon0");
    }
    if (!(delta0 > 0.0) || !(delta0 < 1.0)) {
      throw ConfigError("config: delta0 must lie in (0, 1)");
    }
    if (!(selection_epsilon > 0.0)) {
      throw ConfigError("config: selection epsilon must be positive");
    }
    if (!(budget.epsilon_max > 0.0) || !(budget.delta_max > 0.0)) {
      throw ConfigError("config: dp-opt requires a positive privacy budget");
    }
    if (k_bar < 1) throw ConfigError("config: k_bar must be >= 1");
  }
}

nlohmann::json TuneReport::to_json(const nlohmann::json& config_echo) const {
  nlohmann::json candidates_json = nlohmann::json::array();
  for (const PromptCandidate& c : candidates) {
    nlohmann::json cj = {
        {"text", c.text},
        {"mode", to_string(c.mode)},
        {"tokens_emitted", c.tokens_emitted},
        {"terminated_by", to_string(c.terminated_by)},
    };
    if (c.val_correct.has_value()) cj["val_correct"] = *c.val_correct;
    candidates_json.push_back(cj);
  }
  nlohmann::json j = {
      {"chosen_prompt", chosen_prompt},
      {"mode", mode},
      {"seed", seed},
      {"deterministic_backend", deterministic_backend},
      {"candidates", candidates_json},
      {"privacy",
       {{"train",
         {{"epsilon", train_epsilon},
          {"delta", train_delta},
          {"order", train_order},
          {"events", train_events}}},
        {"validation",
         {{"epsilon", validation_epsilon},
          {"delta", validation_delta},
          {"order", validation_order},
          {"events", validation_events}}}}},
  };
  if (!config_echo.is_null()) j["config"] = config_echo;
  return j;
}

Engine::Engine(EngineConfig config, TaskSpec task, LmBackend& backend)
    : config_(std::move(config)),
      task_(std::move(task)),
      backend_(backend),
      root_rng_(config_.seed) {}

void Engine::observe(PromptChannel channel, const std::string& prompt) const {
  if (observer_) observer_(channel, prompt);
}

std::size_t Engine::domain_size() const {
  return config_.domain_size_override > 0 ? config_.domain_size_override
                                          : backend_.vocab_size();
}

std::vector<PredictedExample> Engine::forward_pass(const Dataset& dataset,
                                                   const std::string& pi,
                                                   PromptChannel channel) {
  std::vector<PredictedExample> predicted;
  predicted.reserve(dataset.size());
  for (const Example& ex : dataset) {
    const std::string prompt = render_forward(pi, ex.text);
    observe(channel, prompt);
    const std::string y_hat =
        argmax_label(backend_.score_labels(prompt, task_.classes));
    predicted.push_back({ex.text, ex.label, y_hat});
  }
  return predicted;
}

TokenHistogram Engine::vote_histogram(
    const std::vector<std::vector<PredictedExample>>& partitions,
    const std::string& pi, const std::string& z, const std::string& msg,
    int candidate_index, int round) {
  TokenHistogram h;
  h.domain_size = domain_size();
  const auto cand = static_cast<std::uint64_t>(candidate_index);
  const auto rnd = static_cast<std::uint64_t>(round);
  for (std::size_t j = 0; j < partitions.size(); ++j) {
    const std::string prompt = render_backward(partitions[j], pi, z, msg);
    observe(PromptChannel::kBackward, prompt);
    GenRequest req{prompt, config_.temperature, config_.repetition_penalty};
    RngStream vote_rng = root_rng_.fork({cand, rnd, kVoteLabel, j});
    const TokenText token = backend_.next_token(req, vote_rng);
    ++h.counts[encode_vote(token)];
  }
  return h;
}

PromptCandidate Engine::dp_ens_gen(
    const std::vector<PredictedExample>& predicted, const std::string& pi,
    int candidate_index) {
  const bool dp = config_.dp_generation();
  const auto cand = static_cast<std::uint64_t>(candidate_index);

  PromptCandidate out;
  out.mode = config_.mode;
  out.terminated_by = Termination::kTokenLimit;

  RngStream msg_rng = root_rng_.fork({kMsgLabel, cand});
  const std::string msg = pick_msg(msg_rng);

  std::string z;
  int consecutive_failures = 0;
  int empty_batch_retries = 0;
  int round = 0;
  PartitionedBatch parts;
  bool have_batch = false;

  while (out.tokens_emitted < config_.max_new_tokens) {
    ++round;
    const auto rnd = static_cast<std::uint64_t>(round);

    if (dp) {
      PrivacyEvent pending;
      pending.kind = EventKind::kLimitedDomain;
      pending.epsilon0 = config_.epsilon0;
      pending.delta0 = config_.delta0;
      pending.subsample_rate = config_.subsample_rate;
      pending.scope = Scope::kTrain;
      if (!budget_check(ledger_, pending, config_.budget)) {
        out.terminated_by = Termination::kBudget;
        break;
      }
    }

    // The non-private path reuses its first batch for the whole candidate;
    // the private path draws a fresh Poisson batch every round.
    if (dp || !have_batch) {
      RngStream poisson_rng = root_rng_.fork({cand, rnd, kPoissonLabel});
      auto batch =
          poisson_sample(predicted, config_.subsample_rate, poisson_rng);
      RngStream part_rng = root_rng_.fork({cand, rnd, kPartitionLabel});
      parts = partition(batch, config_.demos_per_subset, part_rng);
      have_batch = true;
    }
    if (parts.partitions.empty()) {
      std::cerr << "warning: voting round produced no partitions (batch of "
                << "size < s); retrying\n";
      have_batch = false;
      if (++empty_batch_retries >= 3) {
        out.terminated_by = Termination::kDoubleFailure;
        break;
      }
      continue;
    }
    empty_batch_retries = 0;

    TokenHistogram h =
        vote_histogram(parts.partitions, pi, z, msg, candidate_index, round);

    std::string selected_key;
    bool failed = false;
    if (dp) {
      MechanismParams params;
      params.epsilon0 = config_.epsilon0;
      params.delta0 = config_.delta0;
      params.k_bar = config_.k_bar;
      params.k = 1;
      RngStream mech_rng = root_rng_.fork({cand, rnd, kMechanismLabel});
      auto [outcome, event] =
          limited_domain(h, params, SensitivitySpec{}, mech_rng);
      event.subsample_rate = config_.subsample_rate;
      event.scope = Scope::kTrain;
      ledger_.append(event);
      ++limited_domain_invocations_;
      if (outcome.failed()) {
        failed = true;
      } else {
        selected_key = *outcome.token;
      }
    } else {
      selected_key = histogram_argmax(h);
    }

    if (failed) {
      // First failure at a position retries with a fresh batch; a second
      // consecutive failure means the partitions cannot agree.
      if (++consecutive_failures >= 2) {
        out.terminated_by = Termination::kDoubleFailure;
        break;
      }
      continue;
    }
    consecutive_failures = 0;

    const TokenText token = decode_vote(selected_key);
    if (token.eos) {
      out.terminated_by = Termination::kEos;
      break;
    }
    z += token.text;
    ++out.tokens_emitted;
  }

  out.text = z;
  return out;
}

PromptCandidate Engine::dln1_generate(
    const std::vector<PredictedExample>& batch, const std::string& pi,
    int candidate_index, double temperature) {
  if (batch.empty()) {
    throw std::invalid_argument("dln1_generate: batch must be non-empty");
  }
  const auto cand = static_cast<std::uint64_t>(candidate_index);
  PromptCandidate out;
  out.mode = Mode::kDln1;
  out.terminated_by = Termination::kTokenLimit;

  RngStream msg_rng = root_rng_.fork({kMsgLabel, cand});
  const std::string msg = pick_msg(msg_rng);

  std::string z;
  for (int l = 0; l < config_.max_new_tokens; ++l) {
    const std::string prompt = render_backward(batch, pi, z, msg);
    observe(PromptChannel::kBackward, prompt);
    GenRequest req{prompt, temperature, config_.repetition_penalty};
    RngStream rng = root_rng_.fork({cand, static_cast<std::uint64_t>(l),
                                    kVoteLabel});
    const TokenText token = backend_.next_token(req, rng);
    if (token.eos) {
      out.terminated_by = Termination::kEos;
      break;
    }
    z += token.text;
    ++out.tokens_emitted;
  }
  out.text = z;
  return out;
}

std::size_t Engine::select_prompt(std::vector<PromptCandidate>& candidates,
                                  const Dataset& val) {
  if (candidates.empty()) {
    throw std::invalid_argument("select_prompt: no candidates");
  }

  std::vector<double> mean_gold_logprob(candidates.size(), 0.0);
  const bool use_logprobs =
      config_.mode == Mode::kDln1 && backend_.supports_logprobs();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    int correct = 0;
    double gold_lp = 0.0;
    for (const Example& ex : val) {
      const std::string prompt = render_forward(candidates[i].text, ex.text);
      observe(PromptChannel::kForwardValidation, prompt);
      const auto scores = backend_.score_labels(prompt, task_.classes);
      if (argmax_label(scores) == ex.label) ++correct;
      if (use_logprobs) {
        for (const LabelScore& s : scores) {
          if (s.label == ex.label) gold_lp += s.logprob;
        }
      }
    }
    candidates[i].val_correct = correct;
    mean_gold_logprob[i] =
        val.empty() ? 0.0 : gold_lp / static_cast<double>(val.size());
  }

  if (config_.mode == Mode::kDpOpt) {
    PrivacyEvent pending;
    pending.kind = EventKind::kMonotonicEm;
    pending.epsilon0 = config_.selection_epsilon;
    pending.delta0 = 0.0;
    pending.subsample_rate = 1.0;
    pending.scope = Scope::kValidation;
    if (!budget_check(ledger_, pending, config_.budget)) {
      throw BudgetError(
          "select_prompt: private selection would exceed the validation "
          "privacy budget");
    }
    // Pr[j] proportional to exp(eps * correct_j / 2); the accountant prices
    // the mechanism on the tighter monotonic-utility curve.
    std::map<std::string, double> scores;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      scores[candidate_key(i)] = static_cast<double>(*candidates[i].val_correct);
    }
    RngStream rng = root_rng_.fork({kSelectionLabel});
    auto [winner, event] = exp_mech_argmax(scores, config_.selection_epsilon,
                                           1.0, rng, /*monotonic_utility=*/true,
                                           Scope::kValidation);
    ledger_.append(*event);
    return static_cast<std::size_t>(std::stoul(winner));
  }

  std::size_t best = 0;
  if (config_.mode == Mode::kDln1 && use_logprobs) {
    for (std::size_t i = 1; i < candidates.size(); ++i) {
      if (mean_gold_logprob[i] > mean_gold_logprob[best]) best = i;
    }
  } else {
    for (std::size_t i = 1; i < candidates.size(); ++i) {
      if (*candidates[i].val_correct > *candidates[best].val_correct) best = i;
    }
  }
  return best;
}

TuneReport Engine::tune(const Dataset& train, const Dataset& val) {
  config_.validate();

  auto predicted =
      forward_pass(train, task_.initial_instruction, PromptChannel::kForwardTrain);

  // DLN-1 draws one minibatch per tuning round; all N candidates see the
  // same meta-prompt and differ only through sampling temperature.
  std::vector<PredictedExample> dln1_batch;
  if (config_.mode == Mode::kDln1) {
    std::vector<PredictedExample> pool = predicted;
    RngStream rng = root_rng_.fork({kDln1BatchLabel});
    rng.shuffle(pool);
    const std::size_t take = std::min<std::size_t>(
        pool.size(), static_cast<std::size_t>(config_.demos_per_subset));
    dln1_batch.assign(pool.begin(), pool.begin() + take);
  }

  std::vector<PromptCandidate> candidates;
  for (int n = 0; n < config_.num_candidates; ++n) {
    candidates.push_back(config_.mode == Mode::kDln1
                             ? dln1_generate(dln1_batch,
                                             task_.initial_instruction, n)
                             : dp_ens_gen(predicted,
                                          task_.initial_instruction, n));
  }

  // Candidates that emitted no tokens are not prompts; they are reported
  // but never enter selection.
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (candidates[i].tokens_emitted > 0) eligible.push_back(i);
  }
  if (eligible.empty()) {
    const bool budget_bound = std::any_of(
        candidates.begin(), candidates.end(), [](const PromptCandidate& c) {
          return c.terminated_by == Termination::kBudget;
        });
    if (budget_bound) {
      throw BudgetError(
          "tune: privacy budget exhausted before any candidate was generated");
    }
    throw BudgetError("tune: no candidate emitted any token");
  }

  std::vector<PromptCandidate> selectable;
  for (std::size_t i : eligible) selectable.push_back(candidates[i]);
  const std::size_t chosen_local = select_prompt(selectable, val);
  for (std::size_t i = 0; i < eligible.size(); ++i) {
    candidates[eligible[i]].val_correct = selectable[i].val_correct;
  }
  const std::size_t chosen = eligible[chosen_local];

  TuneReport report;
  report.chosen_prompt = candidates[chosen].text;
  report.candidates = std::move(candidates);
  report.seed = config_.seed;
  report.mode = to_string(config_.mode);
  report.deterministic_backend = backend_.is_deterministic();

  const ComposedCost cost = compose(ledger_);
  report.train_events = ledger_.count(Scope::kTrain);
  report.validation_events = ledger_.count(Scope::kValidation);
  if (report.train_events > 0) {
    auto conv = to_eps_delta_detail(cost.train, cost.train_delta0,
                                    config_.budget.delta_max);
    report.train_epsilon = conv.epsilon;
    report.train_order = conv.order;
    report.train_delta = config_.budget.delta_max;
  }
  if (report.validation_events > 0) {
    auto conv = to_eps_delta_detail(cost.validation, cost.validation_delta0,
                                    config_.budget.delta_max);
    report.validation_epsilon = conv.epsilon;
    report.validation_order = conv.order;
    report.validation_delta = config_.budget.delta_max;
  }
  return report;
}

double Engine::evaluate(const std::string& pi, const Dataset& dataset) {
  if (dataset.empty()) return 0.0;
  int correct = 0;
  for (const Example& ex : dataset) {
    const std::string prompt = render_forward(pi, ex.text);
    observe(PromptChannel::kForwardEval, prompt);
    if (argmax_label(backend_.score_labels(prompt, task_.classes)) ==
        ex.label) {
      ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

std::string icl_prompt(const TaskSpec& task, const Dataset& demos) {
  std::string out = task.initial_instruction;
  for (const Example& demo : demos) {
    out += "\n\n";
    out += demo.text;
    out += "\n\nOutput: ";
    out += demo.label;
  }
  return out;
}

}  // namespace dpopt
