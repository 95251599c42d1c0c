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

#include "hdrp/energy.hpp"

#include <cstdio>

#include "hdrp/errors.hpp"

namespace hdrp {

void EnergyConstants::validate() const {
  if (!(e_mac_pj > 0.0) || !(e_ac_pj > 0.0)) {
    throw ConfigError("energy constants must be > 0");
  }
}

std::uint64_t mac_factor(RefractoryMode mode) { return uses_kernel(mode) ? 2 : 1; }

void OpsReport::accumulate(const OpsReport& other) {
  if (layers.empty()) {
    *this = other;
    return;
  }
  if (other.layers.size() != layers.size() || other.timesteps != timesteps) {
    throw ContractError("cannot accumulate reports of different networks");
  }
  samples += other.samples;
  spikes += other.spikes;
  acs += other.acs;
  macs += other.macs;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].spikes += other.layers[i].spikes;
    layers[i].acs += other.layers[i].acs;
    layers[i].macs += other.layers[i].macs;
  }
}

OpsReport count_ops(const Network& net, const SpikeTrace& spikes, std::size_t T,
                    const MacConvention& conv) {
  if (spikes.timesteps != T || spikes.layers.size() != net.num_spiking()) {
    throw ContractError("spike trace does not match the network and T");
  }
  OpsReport r;
  r.timesteps = T;
  r.samples = 1;
  r.parameters = net.parameter_count();

  const std::uint64_t steps = T;
  LayerOps enc;
  enc.name = net.stages().front().spec.name;
  enc.neurons = net.encoder_fanout().size();
  for (auto f : net.encoder_fanout()) enc.fanout += f;
  const std::uint64_t enc_factor =
      net.num_spiking() ? mac_factor(net.spiking_stage(0).spec.refractory.mode) : 1;
  enc.macs = enc_factor * steps * enc.fanout;
  r.layers.push_back(enc);

  for (std::size_t l = 0; l < net.num_spiking(); ++l) {
    const auto& fan = net.fanout(l);
    const auto& steps_l = spikes.layers[l];
    if (steps_l.size() != T) throw ContractError("spike trace does not cover T steps");
    LayerOps op;
    op.name = net.spiking_stage(l).spec.name;
    op.neurons = fan.size();
    for (auto f : fan) op.fanout += f;
    for (const Tensor& s : steps_l) {
      if (s.size() != fan.size()) throw ContractError("spike tensor size mismatch");
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == 1.0) {
          ++op.spikes;
          op.acs += fan[i];
        } else if (s[i] != 0.0) {
          throw ContractError("non-binary spike in trace");
        }
      }
    }
    op.macs = mac_factor(net.spiking_stage(l).spec.refractory.mode) * steps *
              op.neurons * conv.state_update_macs;
    r.layers.push_back(op);
  }
  for (const auto& op : r.layers) {
    r.spikes += op.spikes;
    r.acs += op.acs;
    r.macs += op.macs;
  }
  return r;
}

double sop_energy_uj(double acs, double macs, const EnergyConstants& c) {
  return (macs * c.e_mac_pj + acs * c.e_ac_pj) * 1e-6;
}

double energy_uj(const OpsReport& report, const EnergyConstants& c) {
  return sop_energy_uj(static_cast<double>(report.acs),
                       static_cast<double>(report.macs), c);
}

std::vector<double> firing_rate(const SpikeTrace& spikes) {
  std::vector<double> rates;
  for (const auto& layer : spikes.layers) {
    double total = 0.0;
    std::size_t n = 0;
    for (const Tensor& s : layer) {
      for (double v : s.data()) total += v;
      n += s.size();
    }
    rates.push_back(n ? total / static_cast<double>(n) : 0.0);
  }
  return rates;
}

EnergyRow energy_row(const std::string& label, const OpsReport& report,
                     const EnergyConstants& c) {
  const double n = report.samples ? static_cast<double>(report.samples) : 1.0;
  EnergyRow row;
  row.label = label;
  row.timesteps = report.timesteps;
  row.parameters_m = static_cast<double>(report.parameters) * 1e-6;
  row.acs_m = static_cast<double>(report.acs) / n * 1e-6;
  row.macs_m = static_cast<double>(report.macs) / n * 1e-6;
  row.energy_uj = energy_uj(report, c) / n;
  return row;
}

std::string format_energy_table(const std::vector<EnergyRow>& rows) {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-24s %4s %16s %14s %14s %18s\n", "Neuron", "T",
                "Parameters (M)", "ACs (M)", "MACs (M)", "SOP Energy (uJ)");
  out += buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-24s %4zu %16.6f %14.6f %14.6f %18.6f\n",
                  r.label.c_str(), r.timesteps, r.parameters_m, r.acs_m, r.macs_m,
                  r.energy_uj);
    out += buf;
  }
  return out;
}

}  // namespace hdrp
