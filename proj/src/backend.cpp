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

#include "dpopt/backend.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include "dpopt/errors.hpp"

namespace dpopt {
namespace {

// Sentinels outside any natural vocabulary.
const std::string kBos = "\x02";
const std::string kEosWord = "\x03";

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// Token ordering for greedy tie-breaks: text tokens in lexicographic order,
// EOS after all of them.
bool token_less(const TokenText& a, const TokenText& b) {
  if (a.eos != b.eos) return !a.eos;
  return a.text < b.text;
}

TokenText sample_dist(const std::vector<std::pair<TokenText, double>>& dist,
                      double temperature, RngStream& rng) {
  if (dist.empty()) {
    throw BackendError("backend: empty next-token distribution");
  }
  if (temperature == 0.0) {
    const TokenText* best = &dist.front().first;
    double best_p = dist.front().second;
    for (const auto& [tok, p] : dist) {
      if (p > best_p || (p == best_p && token_less(tok, *best))) {
        best = &tok;
        best_p = p;
      }
    }
    return *best;
  }
  std::vector<double> weights;
  weights.reserve(dist.size());
  double total = 0.0;
  for (const auto& [tok, p] : dist) {
    double w = p > 0.0 ? std::pow(p, 1.0 / temperature) : 0.0;
    total += w;
    weights.push_back(w);
  }
  if (total <= 0.0) {
    throw BackendError("backend: degenerate next-token distribution");
  }
  double u = rng.uniform_open() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    u -= weights[i];
    if (u <= 0.0) return dist[i].first;
  }
  return dist.back().first;
}

}  // namespace

std::vector<std::string> whitespace_tokens(const std::string& text) {
  std::vector<std::string> words;
  std::istringstream in(text);
  std::string w;
  while (in >> w) words.push_back(w);
  return words;
}

std::string argmax_label(const std::vector<LabelScore>& scores) {
  if (scores.empty()) {
    throw std::invalid_argument("argmax_label: empty score list");
  }
  const LabelScore* best = &scores.front();
  for (const LabelScore& s : scores) {
    if (s.logprob > best->logprob ||
        (s.logprob == best->logprob && s.label < best->label)) {
      best = &s;
    }
  }
  return best->label;
}

void MockBackend::add_generation_rule(std::string suffix, TokenDist dist) {
  gen_rules_.push_back({std::move(suffix), std::move(dist)});
}

void MockBackend::add_score_rule(std::string suffix,
                                 std::map<std::string, double> label_logprobs) {
  score_rules_.push_back({std::move(suffix), std::move(label_logprobs)});
}

TokenText MockBackend::next_token(const GenRequest& req, RngStream& rng) {
  const GenRule* match = nullptr;
  for (const GenRule& rule : gen_rules_) {
    if (ends_with(req.prompt, rule.suffix) &&
        (match == nullptr || rule.suffix.size() > match->suffix.size())) {
      match = &rule;
    }
  }
  if (match == nullptr) {
    throw BackendError("mock backend: no generation rule matches the prompt");
  }
  return sample_dist(match->dist, req.temperature, rng);
}

std::vector<LabelScore> MockBackend::score_labels(
    const std::string& prompt, const std::vector<std::string>& labels) {
  if (labels.empty()) {
    throw std::invalid_argument("score_labels: labels must be non-empty");
  }
  const ScoreRule* match = nullptr;
  for (const ScoreRule& rule : score_rules_) {
    if (ends_with(prompt, rule.suffix) &&
        (match == nullptr || rule.suffix.size() > match->suffix.size())) {
      match = &rule;
    }
  }
  std::vector<LabelScore> scores;
  scores.reserve(labels.size());
  for (const std::string& label : labels) {
    double lp = 0.0;
    if (match != nullptr) {
      auto it = match->label_logprobs.find(label);
      lp = it != match->label_logprobs.end() ? it->second : -1e9;
    }
    scores.push_back({label, lp});
  }
  return scores;
}

std::size_t MockBackend::vocab_size() const {
  if (vocab_size_ > 0) return vocab_size_;
  std::set<std::string> tokens;
  for (const GenRule& rule : gen_rules_) {
    for (const auto& [tok, p] : rule.dist) {
      if (!tok.eos) tokens.insert(tok.text);
    }
  }
  return tokens.size() + 1;  // + EOS
}

NgramBackend::NgramBackend(const std::vector<std::string>& corpus, int order)
    : order_(order) {
  if (order < 1) {
    throw std::invalid_argument("NgramBackend: order must be >= 1");
  }
  if (corpus.empty()) {
    throw std::invalid_argument("NgramBackend: corpus must be non-empty");
  }
  std::set<std::string> vocab;
  for (const std::string& line : corpus) {
    const std::vector<std::string> words = whitespace_tokens(line);
    for (const std::string& w : words) vocab.insert(w);
    std::vector<std::string> ctx(order_ - 1, kBos);
    for (std::size_t i = 0; i <= words.size(); ++i) {
      const std::string& next = i < words.size() ? words[i] : kEosWord;
      const std::string key = context_key(ctx);
      ++counts_[key][next];
      ++context_totals_[key];
      if (order_ > 1) {
        ctx.erase(ctx.begin());
        ctx.push_back(next);
      }
    }
  }
  words_.assign(vocab.begin(), vocab.end());
}

std::string NgramBackend::context_key(
    const std::vector<std::string>& words) const {
  std::string key;
  for (const std::string& w : words) {
    key += w;
    key += '\x1f';
  }
  return key;
}

double NgramBackend::smoothed_logprob(const std::string& ctx_key,
                                      const std::string& word) const {
  const double v = static_cast<double>(words_.size()) + 1.0;  // + EOS
  long long c = 0;
  long long total = 0;
  auto tot_it = context_totals_.find(ctx_key);
  if (tot_it != context_totals_.end()) {
    total = tot_it->second;
    auto ctx_it = counts_.find(ctx_key);
    auto w_it = ctx_it->second.find(word);
    if (w_it != ctx_it->second.end()) c = w_it->second;
  }
  return std::log((c + 1.0) / (static_cast<double>(total) + v));
}

std::vector<std::pair<TokenText, double>> NgramBackend::next_token_distribution(
    const GenRequest& req) const {
  std::vector<std::string> prompt_words = whitespace_tokens(req.prompt);
  std::vector<std::string> ctx;
  const std::size_t need = static_cast<std::size_t>(order_ - 1);
  if (prompt_words.size() < need) {
    ctx.assign(need - prompt_words.size(), kBos);
  }
  ctx.insert(ctx.end(),
             prompt_words.end() - std::min(need, prompt_words.size()),
             prompt_words.end());
  const std::string key = context_key(ctx);

  std::set<std::string> seen;
  if (req.repetition_penalty > 1.0) {
    seen.insert(prompt_words.begin(), prompt_words.end());
  }

  std::vector<std::pair<TokenText, double>> dist;
  dist.reserve(words_.size() + 1);
  std::vector<double> logits;
  logits.reserve(words_.size() + 1);
  for (const std::string& w : words_) {
    double lp = smoothed_logprob(key, w);
    // Log-probabilities are negative; the standard penalty convention
    // multiplies negative logits, pushing repeated words down.
    if (req.repetition_penalty > 1.0 && seen.count(w) > 0) {
      lp *= req.repetition_penalty;
    }
    dist.push_back({TokenText{" " + w, false}, 0.0});
    logits.push_back(lp);
  }
  dist.push_back({TokenText::End(), 0.0});
  logits.push_back(smoothed_logprob(key, kEosWord));

  const double inv_t =
      req.temperature > 0.0 ? 1.0 / req.temperature : 1.0;
  double max_logit = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    double p = std::exp((logits[i] - max_logit) * inv_t);
    dist[i].second = p;
    total += p;
  }
  for (auto& [tok, p] : dist) p /= total;
  return dist;
}

TokenText NgramBackend::next_token(const GenRequest& req, RngStream& rng) {
  auto dist = next_token_distribution(req);
  // The distribution is already tempered; sample_dist must not temper again.
  return sample_dist(dist, req.temperature == 0.0 ? 0.0 : 1.0, rng);
}

std::vector<LabelScore> NgramBackend::score_labels(
    const std::string& prompt, const std::vector<std::string>& labels) {
  if (labels.empty()) {
    throw std::invalid_argument("score_labels: labels must be non-empty");
  }
  std::vector<std::string> prompt_words = whitespace_tokens(prompt);
  const std::size_t need = static_cast<std::size_t>(order_ - 1);
  std::vector<LabelScore> scores;
  scores.reserve(labels.size());
  for (const std::string& label : labels) {
    std::vector<std::string> ctx;
    if (prompt_words.size() < need) {
      ctx.assign(need - prompt_words.size(), kBos);
    }
    ctx.insert(ctx.end(),
               prompt_words.end() - std::min(need, prompt_words.size()),
               prompt_words.end());
    double lp = 0.0;
    for (const std::string& w : whitespace_tokens(label)) {
      lp += smoothed_logprob(context_key(ctx), w);
      if (order_ > 1) {
        ctx.erase(ctx.begin());
        ctx.push_back(w);
      }
    }
    scores.push_back({label, lp});
  }
  return scores;
}

std::size_t NgramBackend::vocab_size() const { return words_.size() + 1; }

}  // namespace dpopt
