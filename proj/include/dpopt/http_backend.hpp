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

#ifndef DPOPT_HTTP_BACKEND_HPP_
#define DPOPT_HTTP_BACKEND_HPP_

#include <cstddef>
#include <memory>
#include <string>

#include "dpopt/backend.hpp"

namespace dpopt {

struct HttpEndpointConfig {
  std::string base_url;           // e.g. "http://localhost:8080"
  std::string model;
  std::string api_key_env = "DPOPT_API_KEY";
  std::size_t vocab_size = 50257;  // upper bound for limited-domain voting
  int max_attempts = 5;
  double initial_backoff_ms = 200.0;
  int score_max_tokens = 8;  // generate-and-match budget for score_labels
};

// Completions-API client: POST {base_url}/v1/completions with model,
// prompt, max_tokens, temperature, stop. Transient failures (connection
// errors, 429, 5xx) are retried with exponential backoff up to
// max_attempts. The provider's finish signal maps to EOS.
class HttpBackend : public LmBackend {
 public:
  explicit HttpBackend(HttpEndpointConfig config);
  ~HttpBackend() override;

  TokenText next_token(const GenRequest& req, RngStream& rng) override;

  // Remote providers do not expose per-label logprobs; scoring falls back
  // to generate-and-match: greedy-complete up to the longest verbalizer and
  // award the longest label that is a case-insensitive prefix of the
  // completion. Unmatched completions leave every label at the floor score.
  std::vector<LabelScore> score_labels(
      const std::string& prompt,
      const std::vector<std::string>& labels) override;

  std::size_t vocab_size() const override { return config_.vocab_size; }
  bool is_deterministic() const override { return false; }
  bool supports_logprobs() const override { return false; }

  // Attempts spent on the most recent request (for retry diagnostics).
  int last_attempts() const { return last_attempts_; }

 private:
  struct Completion {
    std::string text;
    std::string finish_reason;
  };
  Completion complete(const std::string& prompt, int max_tokens,
                      double temperature, double repetition_penalty);

  HttpEndpointConfig config_;
  std::string api_key_;
  int last_attempts_ = 0;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dpopt

#endif  // DPOPT_HTTP_BACKEND_HPP_
