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

#include "dpopt/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dpopt/errors.hpp"

namespace dpopt {

Dataset load_dataset(const std::filesystem::path& path, const TaskSpec& task) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("load_dataset: cannot open " + path.string());
  }
  Dataset data;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      std::ostringstream msg;
      msg << path.string() << ":" << line_no << ": parse error: " << e.what();
      throw ConfigError(msg.str());
    }
    if (!record.is_object() || !record.contains("text") ||
        !record.contains("label") || !record["text"].is_string() ||
        !record["label"].is_string()) {
      std::ostringstream msg;
      msg << path.string() << ":" << line_no
          << ": expected an object with string fields 'text' and 'label'";
      throw ConfigError(msg.str());
    }
    Example ex{record["text"].get<std::string>(),
               record["label"].get<std::string>()};
    if (!task.classes.empty() && !task.has_class(ex.label)) {
      std::ostringstream msg;
      msg << path.string() << ":" << line_no << ": unknown label '" << ex.label
          << "' for task '" << task.name << "'";
      throw ConfigError(msg.str());
    }
    data.push_back(std::move(ex));
  }
  if (data.empty()) {
    std::cerr << "warning: dataset " << path.string() << " is empty\n";
  }
  return data;
}

std::pair<Dataset, Dataset> split_validation(const Dataset& dataset,
                                             double fraction, RngStream& rng) {
  if (!(fraction > 0.0) || !(fraction < 1.0)) {
    throw std::domain_error("split_validation: fraction must lie in (0, 1)");
  }
  const std::size_t n = dataset.size();
  const std::size_t n_val = static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(n)));
  if (n_val == 0 || n_val >= n) {
    throw ConfigError("split_validation: degenerate split, one side is empty");
  }
  std::vector<std::size_t> indices(n);
  std::iota(indices.begin(), indices.end(), 0);
  rng.shuffle(indices);
  std::vector<bool> in_val(n, false);
  for (std::size_t i = 0; i < n_val; ++i) in_val[indices[i]] = true;
  Dataset train, val;
  train.reserve(n - n_val);
  val.reserve(n_val);
  for (std::size_t i = 0; i < n; ++i) {
    (in_val[i] ? val : train).push_back(dataset[i]);
  }
  return {std::move(train), std::move(val)};
}

PartitionedBatch partition(const std::vector<PredictedExample>& batch,
                           std::size_t demos_per_subset, RngStream& rng) {
  if (demos_per_subset == 0) {
    throw std::invalid_argument("partition: subset size must be >= 1");
  }
  std::vector<PredictedExample> shuffled = batch;
  rng.shuffle(shuffled);
  PartitionedBatch result;
  const std::size_t num_subsets = shuffled.size() / demos_per_subset;
  result.partitions.reserve(num_subsets);
  for (std::size_t j = 0; j < num_subsets; ++j) {
    result.partitions.emplace_back(
        shuffled.begin() + j * demos_per_subset,
        shuffled.begin() + (j + 1) * demos_per_subset);
  }
  result.dropped = shuffled.size() - num_subsets * demos_per_subset;
  return result;
}

Dataset balanced_demos(const Dataset& train, std::size_t k,
                       const TaskSpec& task, RngStream& rng) {
  if (k == 0) return {};
  const std::size_t num_classes = task.classes.size();
  if (num_classes == 0) {
    throw std::invalid_argument("balanced_demos: task has no classes");
  }

  std::map<std::string, std::vector<std::size_t>> pools;
  for (const std::string& cls : task.classes) pools[cls];
  for (std::size_t i = 0; i < train.size(); ++i) {
    auto it = pools.find(train[i].label);
    if (it != pools.end()) it->second.push_back(i);
  }

  // Distribute k across classes; the remainder goes to a seeded random
  // subset of classes so no class is systematically favored.
  std::vector<std::string> order = task.classes;
  rng.shuffle(order);
  const std::size_t base = k / num_classes;
  const std::size_t rem = k % num_classes;
  Dataset demos;
  for (std::size_t c = 0; c < num_classes; ++c) {
    const std::size_t want = base + (c < rem ? 1 : 0);
    auto& pool = pools[order[c]];
    if (pool.size() < want) {
      throw ConfigError("balanced_demos: class '" + order[c] + "' has only " +
                        std::to_string(pool.size()) + " examples, need " +
                        std::to_string(want));
    }
    rng.shuffle(pool);
    for (std::size_t i = 0; i < want; ++i) demos.push_back(train[pool[i]]);
  }
  rng.shuffle(demos);
  return demos;
}

}  // namespace dpopt
