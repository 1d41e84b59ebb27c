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

#ifndef DPOPT_ACCOUNTANT_HPP_
#define DPOPT_ACCOUNTANT_HPP_

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace dpopt {

enum class EventKind { kEm, kMonotonicEm, kLimitedDomain };
enum class Scope { kTrain, kValidation };

std::string to_string(EventKind kind);
std::string to_string(Scope scope);

// One mechanism invocation as seen by the accountant.
struct PrivacyEvent {
  EventKind kind = EventKind::kEm;
  double epsilon0 = 0.0;
  double delta0 = 0.0;
  double subsample_rate = 1.0;  // Poisson sampling rate q; 1 = no subsampling.
  Scope scope = Scope::kTrain;
};

// Renyi-DP cost evaluated on the integer order grid {2, ..., 64}.
class RdpCurve {
 public:
  static constexpr int kMinOrder = 2;
  static constexpr int kMaxOrder = 64;
  static constexpr int kNumOrders = kMaxOrder - kMinOrder + 1;

  RdpCurve() { eps_.fill(0.0); }

  double at(int alpha) const { return eps_[index(alpha)]; }
  void set(int alpha, double eps) { eps_[index(alpha)] = eps; }

  RdpCurve& operator+=(const RdpCurve& other) {
    for (int i = 0; i < kNumOrders; ++i) eps_[i] += other.eps_[i];
    return *this;
  }

  bool is_zero() const {
    for (double e : eps_)
      if (e != 0.0) return false;
    return true;
  }

 private:
  static int index(int alpha);
  std::array<double, kNumOrders> eps_;
};

// RDP curve of a single (unsubsampled) event. EM and LimitedDomain cost
// alpha * eps0^2 / 2; the monotonic-utility EM costs alpha * eps0^2 / 8.
RdpCurve base_curve(const PrivacyEvent& event);

// Integer-order Poisson-subsampling amplification bound, clamped at the
// unamplified curve. q=0 yields the zero curve; q=1 is the identity.
RdpCurve subsample_amplify(const RdpCurve& curve, double q);

// Append-only event log with separate train / validation scopes.
class Ledger {
 public:
  void append(const PrivacyEvent& event) { events_.push_back(event); }
  const std::vector<PrivacyEvent>& events() const { return events_; }
  std::size_t count(Scope scope) const;

 private:
  std::vector<PrivacyEvent> events_;
};

struct ComposedCost {
  RdpCurve train;
  RdpCurve validation;
  // Accumulated approximate-RDP failure mass per scope. Each LimitedDomain
  // event contributes q * delta0: Poisson subsampling amplifies the failure
  // mass of approximate RDP along with the divergence bound.
  double train_delta0 = 0.0;
  double validation_delta0 = 0.0;

  const RdpCurve& curve(Scope scope) const {
    return scope == Scope::kTrain ? train : validation;
  }
  double delta0(Scope scope) const {
    return scope == Scope::kTrain ? train_delta0 : validation_delta0;
  }
};

ComposedCost compose(const Ledger& ledger);

struct ConversionResult {
  double epsilon = 0.0;
  int order = RdpCurve::kMinOrder;  // grid order attaining the minimum
};

// Classic RDP-to-DP conversion: min over the grid of
// eps(alpha) + ln(1/(delta_target - delta0_total)) / (alpha - 1).
// Throws BudgetError when delta_target <= delta0_total.
ConversionResult to_eps_delta_detail(const RdpCurve& curve, double delta0_total,
                                     double delta_target);
double to_eps_delta(const RdpCurve& curve, double delta0_total,
                    double delta_target);

struct Budget {
  double epsilon_max = 0.0;
  double delta_max = 0.0;
};

// Would admitting `next_event` keep its scope within (eps_max, delta_max)?
// An infeasible conversion (delta exhausted) counts as deny.
bool budget_check(const Ledger& ledger, const PrivacyEvent& next_event,
                  const Budget& budget);

}  // namespace dpopt

#endif  // DPOPT_ACCOUNTANT_HPP_
