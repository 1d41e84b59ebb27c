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

#include "dpopt/http_backend.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "dpopt/errors.hpp"

namespace dpopt {
namespace {

bool iequals_prefix(const std::string& text, const std::string& prefix) {
  if (text.size() < prefix.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(text[i])) !=
        std::tolower(static_cast<unsigned char>(prefix[i]))) {
      return false;
    }
  }
  return true;
}

std::string ltrim(const std::string& s) {
  std::size_t i = 0;
  while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
  return s.substr(i);
}

}  // namespace

struct HttpBackend::Impl {
  explicit Impl(const std::string& base_url) : client(base_url) {
    client.set_connection_timeout(30);
    client.set_read_timeout(120);
  }
  httplib::Client client;
};

HttpBackend::HttpBackend(HttpEndpointConfig config)
    : config_(std::move(config)) {
  if (config_.base_url.empty()) {
    throw ConfigError("http backend: base_url is required");
  }
  const char* key = std::getenv(config_.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw AuthError("http backend: credential environment variable '" +
                    config_.api_key_env + "' is not set");
  }
  api_key_ = key;
  impl_ = std::make_unique<Impl>(config_.base_url);
}

HttpBackend::~HttpBackend() = default;

HttpBackend::Completion HttpBackend::complete(const std::string& prompt,
                                              int max_tokens,
                                              double temperature,
                                              double repetition_penalty) {
  nlohmann::json body = {
      {"model", config_.model},
      {"prompt", prompt},
      {"max_tokens", max_tokens},
      {"temperature", temperature},
      {"stop", nullptr},
  };
  if (repetition_penalty != 1.0) {
    body["repetition_penalty"] = repetition_penalty;
  }
  const std::string payload = body.dump();

  httplib::Headers headers = {{"Authorization", "Bearer " + api_key_}};
  double backoff_ms = config_.initial_backoff_ms;
  std::string last_error;
  last_attempts_ = 0;
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    last_attempts_ = attempt;
    auto res = impl_->client.Post("/v1/completions", headers, payload,
                                  "application/json");
    if (!res) {
      last_error = "connection failure: " + httplib::to_string(res.error());
    } else if (res->status == 401 || res->status == 403) {
      throw AuthError("http backend: authentication rejected (HTTP " +
                      std::to_string(res->status) + ")");
    } else if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
    } else if (res->status != 200) {
      throw BackendError("http backend: unexpected HTTP " +
                         std::to_string(res->status));
    } else {
      nlohmann::json reply;
      try {
        reply = nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw BackendError(std::string("http backend: malformed response: ") +
                           e.what());
      }
      if (!reply.contains("choices") || !reply["choices"].is_array() ||
          reply["choices"].empty() ||
          !reply["choices"][0].contains("text")) {
        throw BackendError("http backend: response lacks choices[0].text");
      }
      Completion c;
      c.text = reply["choices"][0]["text"].get<std::string>();
      if (reply["choices"][0].contains("finish_reason") &&
          reply["choices"][0]["finish_reason"].is_string()) {
        c.finish_reason =
            reply["choices"][0]["finish_reason"].get<std::string>();
      }
      return c;
    }
    if (attempt < config_.max_attempts) {
      std::this_thread::sleep_for(
          std::chrono::duration<double, std::milli>(backoff_ms));
      backoff_ms *= 2.0;
    }
  }
  throw BackendError("http backend: giving up after " +
                         std::to_string(config_.max_attempts) +
                         " attempts; last error: " + last_error,
                     /*retriable=*/true);
}

TokenText HttpBackend::next_token(const GenRequest& req, RngStream& rng) {
  (void)rng;  // remote sampling; the provider owns the randomness
  Completion c =
      complete(req.prompt, 1, req.temperature, req.repetition_penalty);
  if (c.text.empty() && c.finish_reason == "stop") {
    return TokenText::End();
  }
  return TokenText{c.text, false};
}

std::vector<LabelScore> HttpBackend::score_labels(
    const std::string& prompt, const std::vector<std::string>& labels) {
  if (labels.empty()) {
    throw std::invalid_argument("score_labels: labels must be non-empty");
  }
  Completion c = complete(prompt, config_.score_max_tokens, 0.0, 1.0);
  const std::string completion = ltrim(c.text);

  const std::string* matched = nullptr;
  for (const std::string& label : labels) {
    if (iequals_prefix(completion, label) &&
        (matched == nullptr || label.size() > matched->size())) {
      matched = &label;
    }
  }
  std::vector<LabelScore> scores;
  scores.reserve(labels.size());
  for (const std::string& label : labels) {
    scores.push_back({label, matched != nullptr && label == *matched
                                 ? 0.0
                                 : -1e9});
  }
  return scores;
}

}  // namespace dpopt
