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

#include "dpopt/templates.hpp"

#include <algorithm>
#include <stdexcept>

namespace dpopt {
namespace {

constexpr std::string_view kBackwardPreamble =
    "A student is completing a task that requires producing a text output "
    "from a text input. The student receives an instruction that describes "
    "how to produce the output given each input. The student has made some "
    "errors. Your task is to improve the instruction such that the student "
    "can fix the errors.";

const std::array<std::string, 4> kMsgOptions = {
    "Clarify the instruction by adding few words or a short sentence. Be "
    "concise",
    "Improve the instruction by providing examples on how to solve the task. "
    "Be concise.",
    "Shorten the instruction by removing superflous words or sentences.",
    "Rewrite the instruction by providing detailed information to avoid "
    "ambiguity. Be concise",
};

}  // namespace

bool TaskSpec::has_class(std::string_view label) const {
  return std::find(classes.begin(), classes.end(), label) != classes.end();
}

std::optional<TaskSpec> builtin_task(std::string_view name) {
  if (name == "sst2") {
    return TaskSpec{"sst2",
                    {"negative", "positive"},
                    "Classify the input text as positive or negative."};
  }
  if (name == "trec") {
    return TaskSpec{"trec",
                    {"description", "entity", "expression", "human",
                     "location", "number"},
                    "Read the following question, then choose whether it is "
                    "about a description, entity, expression, human, location "
                    "or number."};
  }
  if (name == "mpqa") {
    return TaskSpec{"mpqa",
                    {"negative", "positive"},
                    "Read the following review, then choose whether it is "
                    "negative or positive."};
  }
  if (name == "disaster") {
    return TaskSpec{"disaster",
                    {"not relevant", "relevant"},
                    "Read the following sentence, then choose whether it is "
                    "relevant to a disaster."};
  }
  return std::nullopt;
}

std::string render_forward(const std::string& pi, const std::string& x) {
  std::string out;
  out.reserve(pi.size() + x.size() + 12);
  out += pi;
  out += "\n\n";
  out += x;
  out += "\n\nOutput: ";
  return out;
}

std::string render_backward(const std::vector<PredictedExample>& examples,
                            const std::string& pi, const std::string& z,
                            const std::string& msg) {
  if (examples.empty()) {
    throw std::invalid_argument("render_backward: examples must be non-empty");
  }
  std::string out(kBackwardPreamble);
  out += "\n\nThis was the instruction.\n\nInstruction: ";
  out += pi;
  out += "\n\n# Student successes\n";
  for (const PredictedExample& ex : examples) {
    if (!ex.correct()) continue;
    out += "Input: ";
    out += ex.text;
    out += "\nCorrect Output: ";
    out += ex.gold;
    out += "\n\n";
  }
  out += "# Student errors\n";
  for (const PredictedExample& ex : examples) {
    if (ex.correct()) continue;
    out += "Input: ";
    out += ex.text;
    out += "\nStudent Output: ";
    out += ex.predicted;
    out += "\nCorrect Ouput: ";
    out += ex.gold;
    out += "\n\n";
  }
  out += "Improve the instruction to fix the student errors. ";
  out += msg;
  out += "\nImproved Instruction: ";
  out += z;
  return out;
}

const std::array<std::string, 4>& msg_options() { return kMsgOptions; }

std::string pick_msg(RngStream& rng) {
  return kMsgOptions[rng.uniform_index(kMsgOptions.size())];
}

}  // namespace dpopt
