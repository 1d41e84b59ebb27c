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

#include "dpopt/leakscan.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <stdexcept>

namespace dpopt {
namespace {

std::set<std::string> word_trigrams(const std::vector<std::string>& words) {
  std::set<std::string> grams;
  for (std::size_t i = 0; i + 3 <= words.size(); ++i) {
    grams.insert(words[i] + ' ' + words[i + 1] + ' ' + words[i + 2]);
  }
  return grams;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 0.0;
  std::size_t inter = 0;
  for (const std::string& g : a) inter += b.count(g);
  const std::size_t uni = a.size() + b.size() - inter;
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

std::vector<std::string> normalize_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current += static_cast<char>(std::tolower(c));
    } else if (std::isspace(c)) {
      if (!current.empty()) {
        words.push_back(std::move(current));
        current.clear();
      }
    }
    // punctuation is dropped without splitting the word ("don't" -> "dont")
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

CommonSubstring longest_common_word_substring(
    const std::vector<std::string>& a, const std::vector<std::string>& b) {
  CommonSubstring best;
  if (a.empty() || b.empty()) return best;
  // Rolling DP row: lengths of common suffixes ending at (i, j).
  std::vector<std::size_t> prev(b.size() + 1, 0), curr(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      if (a[i - 1] == b[j - 1]) {
        curr[j] = prev[j - 1] + 1;
        if (curr[j] > best.length) {
          best.length = curr[j];
          best.a_begin = i - curr[j];
        }
      } else {
        curr[j] = 0;
      }
    }
    std::swap(prev, curr);
  }
  return best;
}

std::vector<LeakMatch> scan(const std::string& prompt, const Dataset& train,
                            std::size_t min_overlap) {
  if (min_overlap < 3) {
    throw std::invalid_argument("scan: min_overlap must be >= 3");
  }
  const std::vector<std::string> prompt_words = normalize_words(prompt);
  const std::set<std::string> prompt_grams = word_trigrams(prompt_words);

  std::vector<LeakMatch> matches;
  for (std::size_t i = 0; i < train.size(); ++i) {
    const std::vector<std::string> example_words =
        normalize_words(train[i].text);
    const CommonSubstring common =
        longest_common_word_substring(prompt_words, example_words);
    if (common.length < min_overlap) continue;

    LeakMatch match;
    match.train_example_index = i;
    match.overlap_tokens = common.length;
    for (std::size_t w = 0; w < common.length; ++w) {
      if (w > 0) match.prompt_span += ' ';
      match.prompt_span += prompt_words[common.a_begin + w];
    }
    match.jaccard = jaccard(prompt_grams, word_trigrams(example_words));
    matches.push_back(std::move(match));
  }
  std::sort(matches.begin(), matches.end(),
            [](const LeakMatch& a, const LeakMatch& b) {
              if (a.overlap_tokens != b.overlap_tokens) {
                return a.overlap_tokens > b.overlap_tokens;
              }
              return a.train_example_index < b.train_example_index;
            });
  return matches;
}

}  // namespace dpopt
