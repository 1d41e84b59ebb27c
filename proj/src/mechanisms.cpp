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

#include "dpopt/mechanisms.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace dpopt {

double gumbel_sample(double scale, double u) {
  if (!(scale > 0.0)) {
    throw std::domain_error("gumbel_sample: scale must be positive");
  }
  if (!(u > 0.0) || !(u < 1.0)) {
    throw std::domain_error("gumbel_sample: u must lie in (0, 1)");
  }
  return -scale * std::log(-std::log(u));
}

std::pair<std::string, std::optional<PrivacyEvent>> exp_mech_argmax(
    const std::map<std::string, double>& scores, double epsilon,
    double sensitivity, RngStream& rng, bool monotonic_utility, Scope scope) {
  if (scores.empty()) {
    throw std::invalid_argument("exp_mech_argmax: empty score map");
  }
  if (std::isinf(epsilon)) {
    // Non-private mode. std::map iterates in key order, so keeping the
    // first strict maximum breaks ties toward the smallest key.
    auto best = scores.begin();
    for (auto it = std::next(scores.begin()); it != scores.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    return {best->first, std::nullopt};
  }
  if (!(epsilon > 0.0)) {
    throw std::invalid_argument("exp_mech_argmax: epsilon must be positive");
  }
  if (!(sensitivity > 0.0)) {
    throw std::invalid_argument("exp_mech_argmax: sensitivity must be positive");
  }
  const double scale = 2.0 * sensitivity / epsilon;
  std::string winner;
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& [key, score] : scores) {
    double noisy = score + gumbel_sample(scale, rng.uniform_open());
    if (noisy > best) {
      best = noisy;
      winner = key;
    }
  }
  PrivacyEvent event;
  event.kind = monotonic_utility ? EventKind::kMonotonicEm : EventKind::kEm;
  event.epsilon0 = epsilon;
  event.delta0 = 0.0;
  event.subsample_rate = 1.0;
  event.scope = scope;
  return {winner, event};
}

double limited_domain_threshold(long long count_at_k_bar_plus_1,
                                const MechanismParams& params,
                                const SensitivitySpec& sens,
                                std::size_t domain_size) {
  const long long d = static_cast<long long>(domain_size);
  const long long cut =
      std::min({sens.delta_zero, static_cast<long long>(params.k_bar),
                d - params.k_bar});
  return static_cast<double>(count_at_k_bar_plus_1) + 1.0 +
         2.0 * std::log(static_cast<double>(cut) / params.delta0) /
             params.epsilon0;
}

std::pair<TopKOutcome, PrivacyEvent> limited_domain_topk(
    const TokenHistogram& h, const MechanismParams& params,
    const SensitivitySpec& sens, RngStream& rng) {
  if (params.k_bar >= static_cast<long long>(h.domain_size)) {
    throw std::invalid_argument(
        "limited_domain: k_bar must be smaller than the domain size");
  }
  if (!(params.epsilon0 > 0.0)) {
    throw std::invalid_argument("limited_domain: epsilon0 must be positive");
  }
  if (!(params.delta0 > 0.0) || !(params.delta0 < 1.0)) {
    throw std::invalid_argument("limited_domain: delta0 must lie in (0, 1)");
  }

  // Rank by count descending, token ascending; the token order only breaks
  // exact count ties and keeps runs reproducible.
  std::vector<std::pair<long long, std::string>> ranked;
  ranked.reserve(h.counts.size());
  for (const auto& [token, count] : h.counts) ranked.emplace_back(count, token);
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  const long long count_below =
      static_cast<std::size_t>(params.k_bar) < ranked.size()
          ? ranked[params.k_bar].first
          : 0;
  const double threshold =
      limited_domain_threshold(count_below, params, sens, h.domain_size);
  const double scale = 2.0 * static_cast<double>(sens.delta_inf) /
                       params.epsilon0;

  // The threshold draws its noise first, then the top-k_bar counts in rank
  // order; the draw order is part of the determinism contract.
  const double noisy_threshold =
      threshold + gumbel_sample(scale, rng.uniform_open());
  const std::size_t limit =
      std::min(ranked.size(), static_cast<std::size_t>(params.k_bar));
  std::vector<std::pair<double, std::string>> noisy;
  noisy.reserve(limit);
  for (std::size_t j = 0; j < limit; ++j) {
    noisy.emplace_back(
        static_cast<double>(ranked[j].first) +
            gumbel_sample(scale, rng.uniform_open()),
        ranked[j].second);
  }
  std::sort(noisy.begin(), noisy.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  TopKOutcome outcome;
  for (const auto& [value, token] : noisy) {
    if (value <= noisy_threshold ||
        outcome.tokens.size() >= static_cast<std::size_t>(params.k)) {
      break;
    }
    outcome.tokens.push_back(token);
  }
  outcome.truncated =
      outcome.tokens.size() < static_cast<std::size_t>(params.k);

  PrivacyEvent event;
  event.kind = EventKind::kLimitedDomain;
  event.epsilon0 = params.epsilon0;
  event.delta0 = params.delta0;
  event.subsample_rate = 1.0;
  event.scope = Scope::kTrain;
  return {outcome, event};
}

std::pair<SelectionOutcome, PrivacyEvent> limited_domain(
    const TokenHistogram& h, const MechanismParams& params,
    const SensitivitySpec& sens, RngStream& rng) {
  MechanismParams top1 = params;
  top1.k = 1;
  auto [outcome, event] = limited_domain_topk(h, top1, sens, rng);
  SelectionOutcome result;
  if (!outcome.truncated && !outcome.tokens.empty()) {
    result.token = outcome.tokens.front();
  }
  return {result, event};
}

}  // namespace dpopt
