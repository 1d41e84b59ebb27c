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

#ifndef DPOPT_LEAKSCAN_HPP_
#define DPOPT_LEAKSCAN_HPP_

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "dpopt/data.hpp"

namespace dpopt {

struct LeakMatch {
  std::string prompt_span;  // matched words, space-joined
  std::size_t train_example_index = 0;
  std::size_t overlap_tokens = 0;  // longest common word-level substring
  double jaccard = 0.0;            // word 3-gram Jaccard similarity
};

// Lowercase words with punctuation stripped; the unit of comparison.
std::vector<std::string> normalize_words(std::string_view text);

// Length and position of the longest common word-level substring.
struct CommonSubstring {
  std::size_t length = 0;
  std::size_t a_begin = 0;  // start index in the first sequence
};
CommonSubstring longest_common_word_substring(
    const std::vector<std::string>& a, const std::vector<std::string>& b);

// Reports every training example sharing a common word substring of length
// >= min_overlap with the prompt, sorted by overlap descending then index
// ascending. Matching is case- and punctuation-insensitive.
std::vector<LeakMatch> scan(const std::string& prompt, const Dataset& train,
                            std::size_t min_overlap = 6);

}  // namespace dpopt

#endif  // DPOPT_LEAKSCAN_HPP_
