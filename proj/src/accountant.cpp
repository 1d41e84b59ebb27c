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

#include "dpopt/accountant.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dpopt/errors.hpp"

namespace dpopt {
namespace {

double log_binomial(int n, int k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double log_sum_exp(const std::vector<double>& terms) {
  double m = -std::numeric_limits<double>::infinity();
  for (double t : terms) m = std::max(m, t);
  if (std::isinf(m)) return m;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s);
}

}  // namespace

std::string to_string(EventKind kind) {
  switch (kind) {
    case EventKind::kEm:
      return "EM";
    case EventKind::kMonotonicEm:
      return "monotonicEM";
    case EventKind::kLimitedDomain:
      return "LimitedDomain";
  }
  return "unknown";
}

std::string to_string(Scope scope) {
  return scope == Scope::kTrain ? "train" : "validation";
}

int RdpCurve::index(int alpha) {
  if (alpha < kMinOrder || alpha > kMaxOrder) {
    throw std::out_of_range("RdpCurve: order outside the {2..64} grid");
  }
  return alpha - kMinOrder;
}

RdpCurve base_curve(const PrivacyEvent& event) {
  const double e2 = event.epsilon0 * event.epsilon0;
  const double slope =
      event.kind == EventKind::kMonotonicEm ? e2 / 8.0 : e2 / 2.0;
  RdpCurve curve;
  for (int alpha = RdpCurve::kMinOrder; alpha <= RdpCurve::kMaxOrder; ++alpha) {
    curve.set(alpha, slope * alpha);
  }
  return curve;
}

RdpCurve subsample_amplify(const RdpCurve& curve, double q) {
  if (!(q >= 0.0) || !(q <= 1.0)) {
    throw std::domain_error("subsample_amplify: q must lie in [0, 1]");
  }
  if (q == 0.0) return RdpCurve();
  if (q == 1.0) return curve;

  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  RdpCurve out;
  for (int alpha = RdpCurve::kMinOrder; alpha <= RdpCurve::kMaxOrder; ++alpha) {
    std::vector<double> log_terms;
    log_terms.reserve(alpha);
    // l = 0 and l = 1 collapse to (1-q)^(alpha-1) * (1 + (alpha-1) q).
    log_terms.push_back((alpha - 1) * log_1mq + std::log1p((alpha - 1) * q));
    for (int l = 2; l <= alpha; ++l) {
      log_terms.push_back(log_binomial(alpha, l) + (alpha - l) * log_1mq +
                          l * log_q + (l - 1) * curve.at(l));
    }
    double eps = log_sum_exp(log_terms) / (alpha - 1);
    // Subsampling never hurts: clamp at the unamplified curve.
    out.set(alpha, std::clamp(eps, 0.0, curve.at(alpha)));
  }
  return out;
}

std::size_t Ledger::count(Scope scope) const {
  std::size_t n = 0;
  for (const auto& e : events_)
    if (e.scope == scope) ++n;
  return n;
}

ComposedCost compose(const Ledger& ledger) {
  ComposedCost cost;
  for (const PrivacyEvent& event : ledger.events()) {
    RdpCurve curve = subsample_amplify(base_curve(event), event.subsample_rate);
    if (event.scope == Scope::kTrain) {
      cost.train += curve;
      cost.train_delta0 += event.subsample_rate * event.delta0;
    } else {
      cost.validation += curve;
      cost.validation_delta0 += event.subsample_rate * event.delta0;
    }
  }
  return cost;
}

ConversionResult to_eps_delta_detail(const RdpCurve& curve, double delta0_total,
                                     double delta_target) {
  if (!(delta_target > delta0_total)) {
    throw BudgetError(
        "to_eps_delta: delta target leaves no slack for RDP conversion");
  }
  const double log_inv_slack = -std::log(delta_target - delta0_total);
  ConversionResult result;
  result.epsilon = std::numeric_limits<double>::infinity();
  for (int alpha = RdpCurve::kMinOrder; alpha <= RdpCurve::kMaxOrder; ++alpha) {
    double eps = curve.at(alpha) + log_inv_slack / (alpha - 1);
    if (eps < result.epsilon) {
      result.epsilon = eps;
      result.order = alpha;
    }
  }
  return result;
}

double to_eps_delta(const RdpCurve& curve, double delta0_total,
                    double delta_target) {
  return to_eps_delta_detail(curve, delta0_total, delta_target).epsilon;
}

bool budget_check(const Ledger& ledger, const PrivacyEvent& next_event,
                  const Budget& budget) {
  Ledger tentative = ledger;
  tentative.append(next_event);
  ComposedCost cost = compose(tentative);
  const Scope scope = next_event.scope;
  try {
    double eps =
        to_eps_delta(cost.curve(scope), cost.delta0(scope), budget.delta_max);
    return eps <= budget.epsilon_max;
  } catch (const BudgetError&) {
    return false;  // delta mass alone already exhausts the budget
  }
}

}  // namespace dpopt
