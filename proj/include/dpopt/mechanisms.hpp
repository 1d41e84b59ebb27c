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

#ifndef DPOPT_MECHANISMS_HPP_
#define DPOPT_MECHANISMS_HPP_

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dpopt/accountant.hpp"
#include "dpopt/rng.hpp"

namespace dpopt {

// Vote counts over opaque token strings from disjoint-partition queries.
// domain_size is the size of the full vocabulary the backend could emit;
// tokens absent from `counts` rank with count 0.
struct TokenHistogram {
  std::map<std::string, long long> counts;
  std::size_t domain_size = 0;
};

struct SensitivitySpec {
  long long delta_zero = 2;  // l0 sensitivity: votes moved per record
  long long delta_inf = 1;   // linf sensitivity: max change per count
};

struct MechanismParams {
  double epsilon0 = 0.0;
  double delta0 = 0.0;
  int k_bar = 10;  // limited-domain size; must be < domain_size
  int k = 1;       // number of tokens released
};

// Top-1 release: a token among the k_bar highest counts, or failure.
struct SelectionOutcome {
  std::optional<std::string> token;
  bool failed() const { return !token.has_value(); }
};

// General top-k release. `truncated` means fewer than k tokens beat the
// noisy threshold and the output list ends in the failure symbol.
struct TopKOutcome {
  std::vector<std::string> tokens;
  bool truncated = false;
};

// Inverse-CDF Gumbel draw with location 0: -scale * ln(-ln u).
double gumbel_sample(double scale, double u);

// The exponential mechanism via the Gumbel-max trick: samples outcome i
// with probability proportional to exp(epsilon * s_i / (2 * sensitivity)).
// epsilon = +infinity selects the deterministic argmax with
// lexicographically-smallest-key tie-break and emits no event. When
// `monotonic_utility` is set the event is priced on the monotonic EM curve.
std::pair<std::string, std::optional<PrivacyEvent>> exp_mech_argmax(
    const std::map<std::string, double>& scores, double epsilon,
    double sensitivity, RngStream& rng, bool monotonic_utility = false,
    Scope scope = Scope::kTrain);

// Data-dependent threshold for the limited-domain mechanism:
// h_(k_bar+1) + 1 + 2*ln(min{delta_zero, k_bar, d - k_bar} / delta0) / eps0.
double limited_domain_threshold(long long count_at_k_bar_plus_1,
                                const MechanismParams& params,
                                const SensitivitySpec& sens,
                                std::size_t domain_size);

std::pair<TopKOutcome, PrivacyEvent> limited_domain_topk(
    const TokenHistogram& h, const MechanismParams& params,
    const SensitivitySpec& sens, RngStream& rng);

// Top-1 wrapper (k forced to 1).
std::pair<SelectionOutcome, PrivacyEvent> limited_domain(
    const TokenHistogram& h, const MechanismParams& params,
    const SensitivitySpec& sens, RngStream& rng);

}  // namespace dpopt

#endif  // DPOPT_MECHANISMS_HPP_
