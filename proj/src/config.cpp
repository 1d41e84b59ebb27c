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

#include "dpopt/config.hpp"

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "dpopt/errors.hpp"
#include "dpopt/http_backend.hpp"

namespace dpopt {
namespace {

using nlohmann::json;

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& context) {
  if (!obj.is_object()) {
    throw ConfigError("config: '" + context + "' must be an object");
  }
  for (const auto& [key, value] : obj.items()) {
    if (allowed.count(key) == 0) {
      throw ConfigError("config: unknown field '" + context + "." + key + "'");
    }
  }
}

template <typename T>
T require(const json& obj, const std::string& key, const std::string& context) {
  if (!obj.contains(key)) {
    throw ConfigError("config: missing field '" + context + "." + key + "'");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: field '" + context + "." + key +
                      "' has the wrong type");
  }
}

template <typename T>
T optional_field(const json& obj, const std::string& key, T fallback,
                 const std::string& context) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: field '" + context + "." + key +
                      "' has the wrong type");
  }
}

TaskSpec parse_task(const json& doc) {
  const json& task = doc.at("task");
  if (task.is_string()) {
    auto spec = builtin_task(task.get<std::string>());
    if (!spec) {
      throw ConfigError("config: unknown built-in task '" +
                        task.get<std::string>() + "'");
    }
    return *spec;
  }
  check_keys(task, {"name", "classes", "initial_instruction"}, "task");
  TaskSpec spec;
  spec.name = require<std::string>(task, "name", "task");
  spec.classes = require<std::vector<std::string>>(task, "classes", "task");
  spec.initial_instruction =
      require<std::string>(task, "initial_instruction", "task");
  if (spec.classes.empty()) {
    throw ConfigError("config: task.classes must be non-empty");
  }
  std::set<std::string> distinct(spec.classes.begin(), spec.classes.end());
  if (distinct.size() != spec.classes.size()) {
    throw ConfigError("config: task.classes must be distinct");
  }
  return spec;
}

Mode parse_mode(const std::string& mode) {
  if (mode == "dp-opt") return Mode::kDpOpt;
  if (mode == "opt") return Mode::kOpt;
  if (mode == "dln1") return Mode::kDln1;
  throw ConfigError("config: mode must be one of dp-opt, opt, dln1");
}

void validate_backend_section(const json& backend) {
  const std::string type = require<std::string>(backend, "type", "backend");
  if (type == "ngram") {
    check_keys(backend, {"type", "corpus_path", "order"}, "backend");
    require<std::string>(backend, "corpus_path", "backend");
  } else if (type == "mock") {
    check_keys(backend, {"type", "vocab_size", "generation", "scores"},
               "backend");
    for (const json& rule :
         optional_field<json>(backend, "generation", json::array(), "backend")) {
      check_keys(rule, {"suffix", "dist"}, "backend.generation[]");
      for (const json& entry : require<json>(rule, "dist", "backend.generation[]")) {
        check_keys(entry, {"token", "eos", "p"}, "backend.generation[].dist[]");
      }
    }
    for (const json& rule :
         optional_field<json>(backend, "scores", json::array(), "backend")) {
      check_keys(rule, {"suffix", "labels"}, "backend.scores[]");
    }
  } else if (type == "http") {
    check_keys(backend,
               {"type", "base_url", "model", "api_key_env", "vocab_size",
                "max_attempts", "initial_backoff_ms", "score_max_tokens"},
               "backend");
    require<std::string>(backend, "base_url", "backend");
  } else {
    throw ConfigError("config: backend.type must be ngram, mock, or http");
  }
}

}  // namespace

RunConfig parse_run_config(const json& doc) {
  check_keys(doc,
             {"version", "seed", "output", "task", "data", "mode", "engine",
              "budget", "backend"},
             "$");
  const int version = optional_field<int>(doc, "version", 1, "$");
  if (version != RunConfig::kSchemaVersion) {
    throw ConfigError("config: unsupported schema version " +
                      std::to_string(version));
  }

  RunConfig config;
  config.echo = doc;
  if (!doc.contains("task")) throw ConfigError("config: missing field 'task'");
  config.task = parse_task(doc);

  const json& data = doc.contains("data") ? doc.at("data") : json::object();
  check_keys(data, {"train_path", "test_path", "val_fraction"}, "data");
  config.train_path = optional_field<std::string>(data, "train_path", "", "data");
  if (data.contains("test_path")) {
    config.test_path = require<std::string>(data, "test_path", "data");
  }
  config.val_fraction =
      optional_field<double>(data, "val_fraction", 0.05, "data");

  EngineConfig& eng = config.engine;
  eng.mode = parse_mode(optional_field<std::string>(doc, "mode", "dp-opt", "$"));
  const json& engine = doc.contains("engine") ? doc.at("engine") : json::object();
  check_keys(engine,
             {"num_candidates", "max_new_tokens", "subsample_rate",
              "demos_per_subset", "temperature", "repetition_penalty",
              "epsilon0", "delta0", "selection_epsilon", "k_bar",
              "domain_size"},
             "engine");
  eng.num_candidates =
      optional_field<int>(engine, "num_candidates", 20, "engine");
  eng.max_new_tokens =
      optional_field<int>(engine, "max_new_tokens", 50, "engine");
  eng.subsample_rate =
      optional_field<double>(engine, "subsample_rate", 0.01, "engine");
  eng.demos_per_subset =
      optional_field<int>(engine, "demos_per_subset", 5, "engine");
  eng.temperature = optional_field<double>(engine, "temperature", 1.1, "engine");
  eng.repetition_penalty =
      optional_field<double>(engine, "repetition_penalty", 1.0, "engine");
  eng.epsilon0 = optional_field<double>(engine, "epsilon0", 1.8, "engine");
  eng.delta0 = optional_field<double>(engine, "delta0", 5e-7, "engine");
  eng.selection_epsilon =
      optional_field<double>(engine, "selection_epsilon", 1.8, "engine");
  eng.k_bar = optional_field<int>(engine, "k_bar", 10, "engine");
  eng.domain_size_override = static_cast<std::size_t>(
      optional_field<long long>(engine, "domain_size", 0, "engine"));

  const json& budget = doc.contains("budget") ? doc.at("budget") : json::object();
  check_keys(budget, {"epsilon", "delta"}, "budget");
  eng.budget.epsilon_max = optional_field<double>(budget, "epsilon", 8.0, "budget");
  eng.budget.delta_max = optional_field<double>(budget, "delta", 1e-5, "budget");

  eng.seed = optional_field<std::uint64_t>(doc, "seed", 1, "$");
  config.output = optional_field<std::string>(doc, "output", "report.json", "$");

  if (!doc.contains("backend")) {
    throw ConfigError("config: missing field 'backend'");
  }
  validate_backend_section(doc.at("backend"));
  config.backend = doc.at("backend");
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("config: cannot open " + path.string());
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config: " + path.string() + ": " + e.what());
  }
  return parse_run_config(doc);
}

std::unique_ptr<LmBackend> make_backend(const RunConfig& config) {
  const json& backend = config.backend;
  const std::string type = backend.at("type").get<std::string>();
  if (type == "ngram") {
    const std::string corpus_path = backend.at("corpus_path").get<std::string>();
    std::ifstream in(corpus_path);
    if (!in) {
      throw ConfigError("config: cannot open corpus " + corpus_path);
    }
    std::vector<std::string> corpus;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) corpus.push_back(line);
    }
    if (corpus.empty()) {
      throw ConfigError("config: corpus " + corpus_path + " is empty");
    }
    const int order = backend.contains("order") ? backend.at("order").get<int>() : 3;
    return std::make_unique<NgramBackend>(corpus, order);
  }
  if (type == "mock") {
    auto mock = std::make_unique<MockBackend>();
    if (backend.contains("vocab_size")) {
      mock->set_vocab_size(backend.at("vocab_size").get<std::size_t>());
    }
    if (backend.contains("generation")) {
      for (const json& rule : backend.at("generation")) {
        MockBackend::TokenDist dist;
        for (const json& entry : rule.at("dist")) {
          TokenText tok;
          if (entry.contains("eos") && entry.at("eos").get<bool>()) {
            tok = TokenText::End();
          } else {
            tok = TokenText{entry.at("token").get<std::string>(), false};
          }
          dist.emplace_back(tok, entry.at("p").get<double>());
        }
        mock->add_generation_rule(rule.at("suffix").get<std::string>(),
                                  std::move(dist));
      }
    }
    if (backend.contains("scores")) {
      for (const json& rule : backend.at("scores")) {
        mock->add_score_rule(
            rule.at("suffix").get<std::string>(),
            rule.at("labels").get<std::map<std::string, double>>());
      }
    }
    return mock;
  }
  if (type == "http") {
    HttpEndpointConfig http;
    http.base_url = backend.at("base_url").get<std::string>();
    if (backend.contains("model")) {
      http.model = backend.at("model").get<std::string>();
    }
    if (backend.contains("api_key_env")) {
      http.api_key_env = backend.at("api_key_env").get<std::string>();
    }
    if (backend.contains("vocab_size")) {
      http.vocab_size = backend.at("vocab_size").get<std::size_t>();
    }
    if (backend.contains("max_attempts")) {
      http.max_attempts = backend.at("max_attempts").get<int>();
    }
    if (backend.contains("initial_backoff_ms")) {
      http.initial_backoff_ms = backend.at("initial_backoff_ms").get<double>();
    }
    if (backend.contains("score_max_tokens")) {
      http.score_max_tokens = backend.at("score_max_tokens").get<int>();
    }
    return std::make_unique<HttpBackend>(std::move(http));
  }
  throw ConfigError("config: unsupported backend type '" + type + "'");
}

}  // namespace dpopt
