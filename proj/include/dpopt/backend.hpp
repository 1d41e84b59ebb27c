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

#ifndef DPOPT_BACKEND_HPP_
#define DPOPT_BACKEND_HPP_

#include <cstddef>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dpopt/rng.hpp"

namespace dpopt {

struct GenRequest {
  std::string prompt;
  double temperature = 1.0;
  double repetition_penalty = 1.0;  // >= 1; 1 disables the penalty
};

// One emitted token. Token strings preserve leading whitespace exactly as
// the backend produced them; voting equality is exact string equality.
struct TokenText {
  std::string text;
  bool eos = false;

  static TokenText End() { return TokenText{"", true}; }
  bool operator==(const TokenText& other) const {
    return eos == other.eos && text == other.text;
  }
};

struct LabelScore {
  std::string label;
  double logprob = 0.0;
};

// Highest-scoring label; ties break toward the lexicographically smallest.
std::string argmax_label(const std::vector<LabelScore>& scores);

class LmBackend {
 public:
  virtual ~LmBackend() = default;

  // Samples one token at the request's temperature; temperature 0 is greedy.
  virtual TokenText next_token(const GenRequest& req, RngStream& rng) = 0;

  // One score per candidate label; the argmax equals the backend's greedy
  // choice among the candidates. Logprobs are comparable within one call.
  virtual std::vector<LabelScore> score_labels(
      const std::string& prompt, const std::vector<std::string>& labels) = 0;

  // Vocabulary size d (including the EOS outcome) for limited-domain voting.
  virtual std::size_t vocab_size() const = 0;

  virtual bool is_deterministic() const { return true; }
  virtual bool supports_logprobs() const { return true; }
};

// Table-driven backend for tests: prompt-suffix rules map to next-token
// distributions and label scores. The longest matching suffix wins.
class MockBackend : public LmBackend {
 public:
  using TokenDist = std::vector<std::pair<TokenText, double>>;

  void add_generation_rule(std::string suffix, TokenDist dist);
  void add_score_rule(std::string suffix,
                      std::map<std::string, double> label_logprobs);
  void set_vocab_size(std::size_t d) { vocab_size_ = d; }

  TokenText next_token(const GenRequest& req, RngStream& rng) override;
  std::vector<LabelScore> score_labels(
      const std::string& prompt,
      const std::vector<std::string>& labels) override;
  std::size_t vocab_size() const override;

 private:
  struct GenRule {
    std::string suffix;
    TokenDist dist;
  };
  struct ScoreRule {
    std::string suffix;
    std::map<std::string, double> label_logprobs;
  };
  std::vector<GenRule> gen_rules_;
  std::vector<ScoreRule> score_rules_;
  std::size_t vocab_size_ = 0;
};

// Word-level order-n model with add-one smoothing; a desk-scale stand-in
// for a real language model. Words are emitted with a leading space so
// direct concatenation of tokens reconstructs text.
class NgramBackend : public LmBackend {
 public:
  NgramBackend(const std::vector<std::string>& corpus, int order);

  TokenText next_token(const GenRequest& req, RngStream& rng) override;
  std::vector<LabelScore> score_labels(
      const std::string& prompt,
      const std::vector<std::string>& labels) override;
  std::size_t vocab_size() const override;

  // Smoothed next-token law for the request's context, penalty applied.
  // Entries are (token, probability); the EOS entry has token.eos set.
  // Exposed so tests can check sampling against the exact distribution.
  std::vector<std::pair<TokenText, double>> next_token_distribution(
      const GenRequest& req) const;

 private:
  std::string context_key(const std::vector<std::string>& words) const;
  double smoothed_logprob(const std::string& ctx_key,
                          const std::string& word) const;

  int order_;
  std::vector<std::string> words_;  // sorted vocabulary
  std::unordered_map<std::string, std::unordered_map<std::string, long long>>
      counts_;
  std::unordered_map<std::string, long long> context_totals_;
};

std::vector<std::string> whitespace_tokens(const std::string& text);

}  // namespace dpopt

#endif  // DPOPT_BACKEND_HPP_
