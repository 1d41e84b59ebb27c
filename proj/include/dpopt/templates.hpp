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

#ifndef DPOPT_TEMPLATES_HPP_
#define DPOPT_TEMPLATES_HPP_

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dpopt/rng.hpp"

namespace dpopt {

struct TaskSpec {
  std::string name;
  std::vector<std::string> classes;
  std::string initial_instruction;

  bool has_class(std::string_view label) const;
};

// Built-in specs: sst2, trec, mpqa, disaster.
std::optional<TaskSpec> builtin_task(std::string_view name);

struct PredictedExample {
  std::string text;
  std::string gold;
  std::string predicted;

  bool correct() const { return gold == predicted; }
};

// "{pi}\n\n{x}\n\nOutput: " -- the trailing space is part of the contract.
std::string render_forward(const std::string& pi, const std::string& x);

// Meta-prompt asking the model for an improved instruction. The partial
// generation z is appended directly after "Improved Instruction: " so the
// rendered string grows by exactly the selected token each step. The
// misspelling "Correct Ouput" in the errors section is intentional.
std::string render_backward(const std::vector<PredictedExample>& examples,
                            const std::string& pi, const std::string& z,
                            const std::string& msg);

const std::array<std::string, 4>& msg_options();
std::string pick_msg(RngStream& rng);

}  // namespace dpopt

#endif  // DPOPT_TEMPLATES_HPP_
