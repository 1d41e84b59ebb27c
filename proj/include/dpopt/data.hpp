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

#ifndef DPOPT_DATA_HPP_
#define DPOPT_DATA_HPP_

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dpopt/rng.hpp"
#include "dpopt/templates.hpp"

namespace dpopt {

struct Example {
  std::string text;
  std::string label;
};

using Dataset = std::vector<Example>;

// Line-delimited JSON records {"text": ..., "label": ...}. Labels are
// validated against the task's class list; parse failures name the line.
Dataset load_dataset(const std::filesystem::path& path, const TaskSpec& task);

// Disjoint split with |val| = round(fraction * |dataset|). Membership is a
// seeded shuffle; both sides keep the original dataset order.
std::pair<Dataset, Dataset> split_validation(const Dataset& dataset,
                                             double fraction, RngStream& rng);

// Includes each record independently with probability q.
template <typename T>
std::vector<T> poisson_sample(const std::vector<T>& records, double q,
                              RngStream& rng);

struct PartitionedBatch {
  std::vector<std::vector<PredictedExample>> partitions;
  std::size_t dropped = 0;
};

// Shuffles and cuts consecutive blocks of size s; the leftover < s records
// are dropped, never padded (padding would double-count a record's vote).
PartitionedBatch partition(const std::vector<PredictedExample>& batch,
                           std::size_t demos_per_subset, RngStream& rng);

// k examples with per-class counts differing by at most one, shuffled.
Dataset balanced_demos(const Dataset& train, std::size_t k,
                       const TaskSpec& task, RngStream& rng);

template <typename T>
std::vector<T> poisson_sample(const std::vector<T>& records, double q,
                              RngStream& rng) {
  if (!(q >= 0.0) || !(q <= 1.0)) {
    throw std::domain_error("poisson_sample: q must lie in [0, 1]");
  }
  std::vector<T> out;
  for (const T& r : records) {
    if (rng.bernoulli(q)) out.push_back(r);
  }
  return out;
}

}  // namespace dpopt

#endif  // DPOPT_DATA_HPP_
