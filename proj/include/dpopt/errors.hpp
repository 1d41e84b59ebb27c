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

#ifndef DPOPT_ERRORS_HPP_
#define DPOPT_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace dpopt {

// Error categories map one-to-one onto CLI exit codes.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AuthError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BudgetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BackendError : std::runtime_error {
  explicit BackendError(const std::string& what, bool retriable = false)
      : std::runtime_error(what), retriable(retriable) {}
  bool retriable;
};

namespace exit_code {
inline constexpr int kOk = 0;
inline constexpr int kConfig = 2;
inline constexpr int kAuth = 3;
inline constexpr int kBudget = 4;
inline constexpr int kBackend = 5;
}  // namespace exit_code

}  // namespace dpopt

#endif  // DPOPT_ERRORS_HPP_
