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

// Config-driven experiments.
//
// A config is a JSON object. Every key has a default (see default_config()),
// unknown keys are rejected, and "a.b.c=value" overrides address nested keys
// (array elements by index, e.g. "network.layers.1.units=64"). The
// top-level "neuron" and "refractory" objects apply to every spiking layer;
// a layer's own "neuron" / "refractory" keys take precedence.
//
// Each command writes into output_dir:
//   <cmd>_report.json  deterministic result (no wall-clock values); '-' in
//                      the command name becomes '_'
//   config.json        resolved config echo
//   <cmd>_timing.json  wall-clock times
//   train_log.jsonl  one record per epoch (train and the training cells)
//   checkpoint.bin   + checkpoint.bin.manifest.json
//   *.csv            tables and curves

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hdrp/data.hpp"
#include "hdrp/energy.hpp"
#include "hdrp/network.hpp"
#include "hdrp/training.hpp"

namespace hdrp {

using Json = nlohmann::ordered_json;

struct DataConfig {
  std::string source = "synthetic";  // "synthetic" or "idx"
  std::size_t classes = 4;
  std::size_t dim = 16;
  std::size_t train_per_class = 64;
  std::size_t test_per_class = 64;
  double margin = 2.0;
  double sigma = 0.15;             // cluster spread
  double train_noise_sigma = 0.0;  // optional corruption of the training set
  std::string train_images, train_labels, test_images, test_labels;
};

struct NoiseConfig {
  double sigma = 0.0;  // eval
  bool clip = true;
  std::uint64_t seed = 7;
  std::vector<double> grid = {0.0, 0.05, 0.1, 0.2, 0.3, 0.5};
};

struct GradCheckConfig {
  double h = 1e-5;
  double tolerance = 1e-4;
  double floor = 1e-6;
  std::size_t samples = 4;
  // Hidden dense widths of the checked network; empty uses network.layers.
  std::vector<std::size_t> hidden = {6, 5};
  bool corrupt = false;  // failure-injection hook
};

struct AblateConfig {
  std::vector<std::uint64_t> seeds;  // empty: {seed}
  double eval_sigma = 0.2;
};

struct NoiseSweepConfig {
  std::vector<std::string> variants = {"none", "hdrp"};
  std::vector<std::uint64_t> seeds;  // empty: {seed}
};

struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::size_t timesteps = 4;
  std::size_t threads = 1;
  std::string output_dir = "hdrp_out";
  std::string checkpoint;  // empty: <output_dir>/checkpoint.bin
  std::vector<LayerSpec> layers;
  NeuronParams neuron;
  RefractoryConfig refractory;
  LossConfig loss;
  OptimizerConfig optimizer;
  bool detach_normalization = false;
  DataConfig data;
  NoiseConfig noise;
  EnergyConstants energy;
  MacConvention macs;
  GradCheckConfig grad_check;
  AblateConfig ablate;
  NoiseSweepConfig noise_sweep;

  std::filesystem::path checkpoint_path() const;
};

// Defaults as a JSON object (the schema for key validation).
Json default_config_json();
ExperimentConfig default_config();

// Merges 'user' over the defaults and parses it. Throws ConfigError naming the
// offending field.
ExperimentConfig parse_config(const nlohmann::json& user);
// Reads and parses a JSON file; a missing or unreadable file is a ConfigError.
nlohmann::json read_config_file(const std::filesystem::path& path);
// Applies "dotted.key=value" to a user JSON object. The value is parsed as
// JSON when possible and taken as a string otherwise.
void apply_override(nlohmann::json& user, std::string_view assignment);

Json config_to_json(const ExperimentConfig& cfg);
// FNV-1a 64 of the compact resolved config, hex encoded.
std::string config_hash(const ExperimentConfig& cfg);

NetworkSpec network_spec(const ExperimentConfig& cfg);
// Sets the refractory mode (and its parameter) of every spiking layer.
void set_refractory(ExperimentConfig& cfg, const RefractoryConfig& r);

struct Datasets {
  Dataset train;
  Dataset test;
};
Datasets load_datasets(const ExperimentConfig& cfg);

struct CommandResult {
  Json report;
  bool validation_failed = false;
};

// Runs "train", "eval", "ablate", "noise-sweep", "energy-report" or
// "grad-check" and writes its outputs under cfg.output_dir.
CommandResult run_command(const ExperimentConfig& cfg, std::string_view command);

std::string_view version_string();

}  // namespace hdrp
