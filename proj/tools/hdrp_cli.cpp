/* Copyright 2026 The HDRP-SNN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

// hdrp-cli: experiment runner over the hdrp C API.
//
// Exit codes: 0 success, 2 config error, 3 validation failure, 4 I/O error,
// 1 anything else.

#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hdrp/hdrp.h"

namespace {

int exit_code(hdrp_status s) {
  switch (s) {
    case HDRP_OK: return 0;
    case HDRP_ERR_CONFIG:
    case HDRP_ERR_ARGUMENT: return 2;
    case HDRP_ERR_VALIDATION: return 3;
    case HDRP_ERR_IO: return 4;
    default: return 1;
  }
}

struct Options {
  std::string config;
  std::vector<std::string> sets;
  std::string out;
  std::string checkpoint;
  long long seed = -1;
  long long threads = -1;
  bool quiet = false;
};

std::string quoted(const std::string& s) { return nlohmann::json(s).dump(); }

hdrp_status make_experiment(const Options& opt, hdrp_experiment** exp) {
  std::vector<std::string> overrides = opt.sets;
  if (opt.seed >= 0) overrides.push_back("seed=" + std::to_string(opt.seed));
  if (opt.threads >= 0) overrides.push_back("threads=" + std::to_string(opt.threads));
  if (!opt.out.empty()) overrides.push_back("output_dir=" + quoted(opt.out));
  if (!opt.checkpoint.empty()) overrides.push_back("checkpoint=" + quoted(opt.checkpoint));
  std::vector<const char*> argv;
  for (const auto& o : overrides) argv.push_back(o.c_str());
  return hdrp_experiment_create(opt.config.empty() ? nullptr : opt.config.c_str(), argv.data(),
                                argv.size(), exp);
}

int run(const std::string& command, const Options& opt) {
  hdrp_experiment* exp = nullptr;
  hdrp_status s = make_experiment(opt, &exp);
  if (s != HDRP_OK) {
    std::fprintf(stderr, "hdrp-cli: %s\n", hdrp_last_error());
    return exit_code(s);
  }
  char* out = nullptr;
  if (command == "print-config") {
    s = hdrp_experiment_resolved(exp, &out);
  } else {
    s = hdrp_run(exp, command.c_str(), &out);
  }
  if (out) {
    if (!opt.quiet) std::printf("%s\n", out);
    hdrp_string_free(out);
  }
  if (s != HDRP_OK) std::fprintf(stderr, "hdrp-cli: %s\n", hdrp_last_error());
  hdrp_experiment_free(exp);
  return exit_code(s);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HDRP-LIF spiking network experiments"};
  app.set_version_flag("--version", std::string(hdrp_version()));
  app.require_subcommand(1);

  Options opt;
  std::string chosen;
  const std::vector<std::pair<std::string, std::string>> commands = {
      {"train", "Train per config; writes report and checkpoint"},
      {"eval", "Evaluate a checkpoint at noise.sigma"},
      {"ablate", "Refractory ablation grid (8 cells)"},
      {"noise-sweep", "Accuracy over the noise grid per variant"},
      {"energy-report", "Operation counts and energy of a checkpoint"},
      {"grad-check", "Analytic gradients against central differences"},
      {"print-config", "Print the resolved config"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", opt.config, "JSON config file");
    sub->add_option("--seed", opt.seed, "Seed")->check(CLI::NonNegativeNumber);
    sub->add_option("--out", opt.out, "Output directory");
    sub->add_option("--set", opt.sets, "Override key=value (dotted path)")->take_all();
    sub->add_option("--threads", opt.threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--checkpoint", opt.checkpoint, "Checkpoint path");
    sub->add_flag("-q,--quiet", opt.quiet, "Do not print the report");
    sub->callback([&chosen, name = name] { chosen = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  return run(chosen, opt);
}
