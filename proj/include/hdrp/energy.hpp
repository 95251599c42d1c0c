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

// Synaptic-operation accounting.
//
//   ACs  = sum_t sum_l sum_i f_i^l * s_i^l[t]   over spiking layers
//   MACs = encoder MACs + neuron state-update MACs
//   E    = MACs * e_mac + ACs * e_ac
//
// Encoder MACs are the real-valued products of the first weighted layer:
// sum_i f_i over input elements, every step. State-update MACs are
// state_update_macs per neuron per step. Both are multiplied by the neuron
// model's cost factor (1 for LIF and absolute refractoriness, 2 for the
// kernel-based refractory models, whose extra clock and kernel updates double
// the per-step multiply work). The factor of the first spiking layer applies
// to the encoder.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hdrp/network.hpp"

namespace hdrp {

struct EnergyConstants {
  double e_mac_pj = 4.6;
  double e_ac_pj = 0.9;

  void validate() const;
};

struct MacConvention {
  std::uint64_t state_update_macs = 1;
};

std::uint64_t mac_factor(RefractoryMode mode);

struct LayerOps {
  std::string name;
  std::uint64_t neurons = 0;   // spiking neurons (input elements for the encoder)
  std::uint64_t fanout = 0;    // sum of per-neuron fan-out
  std::uint64_t spikes = 0;
  std::uint64_t acs = 0;
  std::uint64_t macs = 0;
};

struct OpsReport {
  std::size_t timesteps = 0;
  std::uint64_t samples = 0;
  std::uint64_t parameters = 0;
  std::vector<LayerOps> layers;  // encoder first, then spiking layers
  std::uint64_t spikes = 0;
  std::uint64_t acs = 0;
  std::uint64_t macs = 0;

  // Adds another report over the same network (sample counts add up).
  void accumulate(const OpsReport& other);
};

// Operation counts for one forward pass. Throws ContractError when the trace
// does not cover exactly T steps or holds non-binary spikes.
OpsReport count_ops(const Network& net, const SpikeTrace& spikes, std::size_t T,
                    const MacConvention& macs = {});

double sop_energy_uj(double acs, double macs, const EnergyConstants& c = {});
double energy_uj(const OpsReport& report, const EnergyConstants& c = {});

// Mean spike value per spiking layer over neurons and steps.
std::vector<double> firing_rate(const SpikeTrace& spikes);

// Table row of per-sample operation counts (in millions) and energy.
struct EnergyRow {
  std::string label;
  std::size_t timesteps = 0;
  double parameters_m = 0.0;
  double acs_m = 0.0;
  double macs_m = 0.0;
  double energy_uj = 0.0;
};

EnergyRow energy_row(const std::string& label, const OpsReport& report,
                     const EnergyConstants& c = {});
std::string format_energy_table(const std::vector<EnergyRow>& rows);

}  // namespace hdrp
