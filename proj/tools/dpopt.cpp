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

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dpopt/accountant.hpp"
#include "dpopt/config.hpp"
#include "dpopt/data.hpp"
#include "dpopt/engine.hpp"
#include "dpopt/errors.hpp"
#include "dpopt/leakscan.hpp"
#include "dpopt/rng.hpp"

namespace {

using dpopt::RunConfig;

constexpr std::uint64_t kSplitLabel = 0xda7a;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw dpopt::ConfigError("cannot open " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  std::string text = buf.str();
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) {
    text.pop_back();
  }
  return text;
}

// Worst-case ledger for the configured run: N*L limited-domain events on
// the train scope plus one private selection on the validation scope.
dpopt::Ledger worst_case_ledger(const dpopt::EngineConfig& cfg,
                                int max_new_tokens) {
  dpopt::Ledger ledger;
  const long long events = static_cast<long long>(cfg.num_candidates) *
                           static_cast<long long>(max_new_tokens);
  dpopt::PrivacyEvent gen;
  gen.kind = dpopt::EventKind::kLimitedDomain;
  gen.epsilon0 = cfg.epsilon0;
  gen.delta0 = cfg.delta0;
  gen.subsample_rate = cfg.subsample_rate;
  gen.scope = dpopt::Scope::kTrain;
  for (long long i = 0; i < events; ++i) ledger.append(gen);

  dpopt::PrivacyEvent sel;
  sel.kind = dpopt::EventKind::kMonotonicEm;
  sel.epsilon0 = cfg.selection_epsilon;
  sel.subsample_rate = 1.0;
  sel.scope = dpopt::Scope::kValidation;
  ledger.append(sel);
  return ledger;
}

// Rejects configurations whose accumulated failure mass alone already
// exceeds the delta budget, before any backend traffic.
void preflight(const dpopt::EngineConfig& cfg) {
  if (cfg.mode != dpopt::Mode::kDpOpt) return;
  const dpopt::ComposedCost cost = dpopt::compose(worst_case_ledger(cfg, 1));
  const double per_token_delta0 = cost.train_delta0;
  const double worst_delta0 = per_token_delta0 * cfg.max_new_tokens;
  if (worst_delta0 >= cfg.budget.delta_max) {
    std::ostringstream msg;
    msg << "pre-flight: worst-case accumulated delta0 ("
        << worst_delta0 << ") exhausts the delta budget ("
        << cfg.budget.delta_max << "); lower delta0, N, or L";
    throw dpopt::BudgetError(msg.str());
  }
}

std::pair<dpopt::Dataset, dpopt::Dataset> load_and_split(
    const RunConfig& config) {
  dpopt::Dataset full = dpopt::load_dataset(config.train_path, config.task);
  dpopt::RngStream split_rng = dpopt::RngStream(config.engine.seed)
                                   .fork({kSplitLabel});
  return dpopt::split_validation(full, config.val_fraction, split_rng);
}

int cmd_tune(const RunConfig& config) {
  preflight(config.engine);
  auto backend = dpopt::make_backend(config);
  auto [train, val] = load_and_split(config);

  dpopt::Engine engine(config.engine, config.task, *backend);
  dpopt::TuneReport report = engine.tune(train, val);

  std::ofstream out(config.output);
  if (!out) {
    throw dpopt::ConfigError("cannot write " + config.output.string());
  }
  out << report.to_json(config.echo).dump(2) << "\n";

  std::cout << "chosen prompt:\n" << report.chosen_prompt << "\n\n";
  std::cout << "train scope:      epsilon = " << report.train_epsilon
            << " at delta = " << report.train_delta << " (order "
            << report.train_order << ", " << report.train_events
            << " events)\n";
  std::cout << "validation scope: epsilon = " << report.validation_epsilon
            << " at delta = " << report.validation_delta << " (order "
            << report.validation_order << ", " << report.validation_events
            << " events)\n";
  std::cout << "report written to " << config.output.string() << "\n";
  return dpopt::exit_code::kOk;
}

int cmd_eval(const RunConfig& config, const std::string& prompt_file,
             const std::optional<std::string>& data_override,
             const std::optional<std::string>& output) {
  const std::string prompt = read_file(prompt_file);
  std::filesystem::path data_path;
  if (data_override) {
    data_path = *data_override;
  } else if (config.test_path) {
    data_path = *config.test_path;
  } else {
    throw dpopt::ConfigError(
        "eval: no dataset given (set data.test_path or pass --data)");
  }
  dpopt::Dataset dataset = dpopt::load_dataset(data_path, config.task);
  auto backend = dpopt::make_backend(config);
  dpopt::Engine engine(config.engine, config.task, *backend);
  const double accuracy = engine.evaluate(prompt, dataset);
  std::cout << "accuracy: " << accuracy << " over " << dataset.size()
            << " examples\n";
  if (output) {
    nlohmann::json report = {
        {"accuracy", accuracy},
        {"examples", dataset.size()},
        {"prompt", prompt},
        {"data", data_path.string()},
    };
    std::ofstream out(*output);
    out << report.dump(2) << "\n";
  }
  return dpopt::exit_code::kOk;
}

int cmd_account(const RunConfig& config) {
  const dpopt::EngineConfig& cfg = config.engine;
  const dpopt::ComposedCost cost =
      dpopt::compose(worst_case_ledger(cfg, cfg.max_new_tokens));
  const double delta = cfg.budget.delta_max;

  auto train = dpopt::to_eps_delta_detail(cost.train, cost.train_delta0, delta);
  auto val = dpopt::to_eps_delta_detail(cost.validation,
                                        cost.validation_delta0, delta);
  std::cout << "worst-case privacy cost for N = " << cfg.num_candidates
            << ", L = " << cfg.max_new_tokens << ", q = " << cfg.subsample_rate
            << ":\n";
  std::cout << "  train scope:      epsilon = " << train.epsilon
            << " at delta = " << delta << " (optimal order " << train.order
            << ")\n";
  std::cout << "  validation scope: epsilon = " << val.epsilon
            << " at delta = " << delta << " (optimal order " << val.order
            << ")\n";

  std::cout << "\ntoken-budget scaling (train scope):\n";
  std::cout << "  L      epsilon  order\n";
  for (int tokens : {25, 50, 100, 200}) {
    const dpopt::ComposedCost c =
        dpopt::compose(worst_case_ledger(cfg, tokens));
    try {
      auto conv = dpopt::to_eps_delta_detail(c.train, c.train_delta0, delta);
      std::printf("  %-5d  %-7.4f  %d\n", tokens, conv.epsilon, conv.order);
    } catch (const dpopt::BudgetError&) {
      std::printf("  %-5d  (delta budget exhausted)\n", tokens);
    }
  }
  return dpopt::exit_code::kOk;
}

int cmd_leakscan(const RunConfig& config, const std::string& prompt_file,
                 std::size_t min_overlap) {
  const std::string prompt = read_file(prompt_file);
  dpopt::Dataset train = dpopt::load_dataset(config.train_path, config.task);
  const auto matches = dpopt::scan(prompt, train, min_overlap);
  if (matches.empty()) {
    std::cout << "no training-set overlap of " << min_overlap
              << "+ words found\n";
    return dpopt::exit_code::kOk;
  }
  std::cout << matches.size() << " match(es):\n";
  for (const dpopt::LeakMatch& m : matches) {
    std::cout << "  example " << m.train_example_index << ": overlap "
              << m.overlap_tokens << " words, jaccard " << m.jaccard << "\n"
              << "    \"" << m.prompt_span << "\"\n";
  }
  return dpopt::exit_code::kOk;
}

int cmd_icl(const RunConfig& config, std::size_t shots) {
  auto backend = dpopt::make_backend(config);
  auto [train, val] = load_and_split(config);
  dpopt::RngStream demo_rng =
      dpopt::RngStream(config.engine.seed).fork({0x1c1});
  dpopt::Dataset demos =
      dpopt::balanced_demos(train, shots, config.task, demo_rng);
  const std::string prompt = dpopt::icl_prompt(config.task, demos);

  dpopt::Dataset eval_set =
      config.test_path ? dpopt::load_dataset(*config.test_path, config.task)
                       : val;
  dpopt::Engine engine(config.engine, config.task, *backend);
  const double accuracy = engine.evaluate(prompt, eval_set);
  std::cout << "prompt:\n" << prompt << "\n\n";
  std::cout << "accuracy: " << accuracy << " over " << eval_set.size()
            << " examples (" << shots << "-shot)\n";
  return dpopt::exit_code::kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentially-private offsite prompt tuning"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed_override;
  std::optional<std::string> output_override;
  std::string prompt_file;
  std::optional<std::string> data_override;
  std::optional<std::string> eval_output;
  std::size_t min_overlap = 6;
  std::size_t shots = 5;

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("config", config_path, "run configuration file")
        ->required();
    cmd->add_option("--seed", seed_override, "override the configured seed");
  };

  CLI::App* tune = app.add_subcommand("tune", "tune a prompt on local data");
  add_config(tune);
  tune->add_option("--output", output_override, "override the report path");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a prompt file");
  add_config(eval);
  eval->add_option("--prompt-file", prompt_file, "file holding the prompt")
      ->required();
  eval->add_option("--data", data_override, "dataset to evaluate on");
  eval->add_option("--output", eval_output, "write a JSON report here");

  CLI::App* account =
      app.add_subcommand("account", "print the privacy cost, no generation");
  add_config(account);

  CLI::App* leak = app.add_subcommand("leakscan",
                                      "scan a prompt for training-set text");
  add_config(leak);
  leak->add_option("--prompt-file", prompt_file, "file holding the prompt")
      ->required();
  leak->add_option("--min-overlap", min_overlap,
                   "minimum common word-substring length (>= 3)");

  CLI::App* icl = app.add_subcommand(
      "icl", "evaluate in-context learning with balanced demonstrations");
  add_config(icl);
  icl->add_option("--shots", shots, "number of demonstrations (0 = 0-shot)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : dpopt::exit_code::kConfig;
  }

  try {
    RunConfig config = dpopt::load_run_config(config_path);
    if (seed_override) config.engine.seed = *seed_override;
    if (output_override) config.output = *output_override;

    if (tune->parsed()) return cmd_tune(config);
    if (eval->parsed()) {
      return cmd_eval(config, prompt_file, data_override, eval_output);
    }
    if (account->parsed()) return cmd_account(config);
    if (leak->parsed()) return cmd_leakscan(config, prompt_file, min_overlap);
    if (icl->parsed()) return cmd_icl(config, shots);
  } catch (const dpopt::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return dpopt::exit_code::kConfig;
  } catch (const dpopt::AuthError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return dpopt::exit_code::kAuth;
  } catch (const dpopt::BudgetError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return dpopt::exit_code::kBudget;
  } catch (const dpopt::BackendError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return dpopt::exit_code::kBackend;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return dpopt::exit_code::kConfig;
  }
  return dpopt::exit_code::kOk;
}
