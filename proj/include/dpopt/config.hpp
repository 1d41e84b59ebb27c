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

#ifndef DPOPT_CONFIG_HPP_
#define DPOPT_CONFIG_HPP_

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "dpopt/backend.hpp"
#include "dpopt/engine.hpp"
#include "dpopt/templates.hpp"

namespace dpopt {

// One config file fully describes a run; command-line flags may override
// only seed, output path, and backend selection. Unknown fields are
// rejected so typos fail loudly instead of silently using a default.
struct RunConfig {
  static constexpr int kSchemaVersion = 1;

  TaskSpec task;
  std::filesystem::path train_path;
  std::optional<std::filesystem::path> test_path;
  double val_fraction = 0.05;
  EngineConfig engine;
  nlohmann::json backend;  // validated backend section, kept for construction
  std::filesystem::path output = "report.json";
  nlohmann::json echo;  // the full parsed document, for report embedding
};

RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);

// Builds the configured backend. HTTP construction reads the credential
// environment variable and may throw AuthError.
std::unique_ptr<LmBackend> make_backend(const RunConfig& config);

}  // namespace dpopt

#endif  // DPOPT_CONFIG_HPP_
