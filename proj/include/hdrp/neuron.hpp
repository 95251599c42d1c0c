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

// Neuron models: vanilla LIF and LIF with a historical dynamic refractory
// period (HDRP-LIF), plus the refractory ablation variants.
//
// One step of HDRP-LIF for a neuron with presynaptic drive d = W·s + b:
//
//   I   = d - g(tau_prev)                 g(tau) = u_th * tanh(A * tau)
//   U'  = -(U_prev - u_rest) / tau_m + I
//   H   = U_prev + U'
//   S   = [H >= u_th]
//   U   = H * (1 - S) + u_rest * S        hard reset
//   k   = clamp((U' - U'_min) / (U'_max - U'_min), 0, 1)
//   tau = min(k * tau_prev + S * (k * tau_L + tau_0), tau_max)
//
// Vanilla LIF is the same recurrence with g == 0 and no refractory clock.
// Time starts from U = u_rest, tau = 0, S = 0.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <utility>

#include "hdrp/tensor.hpp"

namespace hdrp {

class Rng;

struct NeuronParams {
  double tau_m = 2.0;        // membrane time constant in steps, > 1
  double u_th = 1.0;         // firing threshold
  double u_rest = 0.0;       // resting / reset potential
  double tau_ref0 = 1.0;     // minimum refractory period
  double tau_refL = 5.0;     // adjustable refractory range
  double tau_ref_max = 6.0;  // hard cap on the refractory clock
  double a_gain = 1.0;       // kernel gain A (learnable; initial value)
  double r_m = 1.0;          // membrane resistance, fixed

  // Throws ParameterError on any violated constraint.
  void validate() const;
};

enum class RefractoryMode {
  kNone,                // vanilla LIF
  kAbsolute,            // spikes blocked for absolute_len steps after a spike
  kRelativeNoHistory,   // tau = S * (k * tau_L + tau_0)
  kRelativeFixedDecay,  // HDRP with k replaced by fixed_decay
  kHdrp,
};

std::string_view to_string(RefractoryMode mode);
// Accepts "none", "absolute", "relative-no-history", "relative-fixed-decay",
// "hdrp". Throws ConfigError otherwise.
RefractoryMode parse_refractory_mode(std::string_view name);

struct RefractoryConfig {
  RefractoryMode mode = RefractoryMode::kHdrp;
  double fixed_decay = 0.5;
  int absolute_len = 1;

  void validate() const;
};

// Whether the mode subtracts the refractory kernel from the input current.
bool uses_kernel(RefractoryMode mode);
// Whether the refractory clock depends on the normalized derivative k(U').
bool uses_normalization(RefractoryMode mode);

// How the forward pass turns H into S. kHeaviside is the model. kRelaxed
// replaces the step by the antiderivative of the triangular surrogate, which
// makes the forward pass C^1 so finite differences can check the adjoint.
enum class SpikeFunction { kHeaviside, kRelaxed };

struct SpikeModel {
  SpikeFunction function = SpikeFunction::kHeaviside;
  double gamma = 1.0;  // surrogate half-width, used by kRelaxed
};

double spike_value(double h, double u_th, const SpikeModel& model);

struct LayerState {
  Tensor u;
  Tensor u_prime;
  Tensor h;
  Tensor tau_ref;
  Tensor s;

  static LayerState initial(const Shape& shape, const NeuronParams& params);
};

// Per-unit bounds. For dense layers a unit is one neuron; for convolutional
// layers a unit is one output channel, shared by its spatial positions.
struct DerivativeBounds {
  Tensor i_min, i_max;
  Tensor u_min, u_max;
  Tensor up_min, up_max;
};

// Current bounds of a layer from its weights; weights are [units × fan-in...]
// (a dense matrix or O×C×kH×kW kernels) and bias is [units].
std::pair<Tensor, Tensor> current_bounds(const Tensor& weights,
                                         const Tensor& bias);

// Bounds of U and U' given current bounds. 'kernel_sup' is the largest value
// the refractory kernel can subtract from the current (0 for LIF); it lowers
// the effective current floor to i_min - kernel_sup.
DerivativeBounds derivative_bounds(const Tensor& i_min, const Tensor& i_max,
                                   const NeuronParams& params,
                                   double kernel_sup = 0.0);

// sup over tau in [0, tau_ref_max] of the kernel, or 0 for kernel-free modes.
double kernel_sup(const NeuronParams& params, double a_gain,
                  RefractoryMode mode);

// Throws ConfigError if any unit has up_max <= up_min.
void require_nondegenerate(const DerivativeBounds& bounds);

double normalize_raw(double u_prime, double up_min, double up_max);
double normalize_clamped(double u_prime, double up_min, double up_max);

// Clamped min-max normalization. u_prime may hold several neurons per bound
// unit; neurons are grouped contiguously (channel-major for C×H×W).
Tensor normalize_derivative(const Tensor& u_prime, const DerivativeBounds& bounds);

double kernel_value(double tau_ref, double u_th, double a_gain);
Tensor refractory_kernel(const Tensor& tau_ref, const NeuronParams& params);

// Everything one neuron computes in one step; the backward pass reads these.
struct NeuronStep {
  double current = 0.0;
  double u_prime = 0.0;
  double h = 0.0;
  double s = 0.0;
  double u = 0.0;
  double tau_ref = 0.0;
  double k_raw = 0.0;
  double k = 0.0;
  bool tau_capped = false;  // the tau_ref_max cap was active
  bool suppressed = false;  // absolute mode blocked the spike
};

NeuronStep step_neuron(double u_prev, double tau_prev, double drive,
                       const NeuronParams& params, double up_min,
                       double up_max, const RefractoryConfig& cfg,
                       const SpikeModel& spike = {});

// Baseline LIF step on a whole layer.
LayerState lif_step(const LayerState& prev, const Tensor& input_current,
                    const NeuronParams& params);

// Refractory-aware step on a whole layer; presyn_drive = W·S_pre + b.
LayerState hdrp_step(const LayerState& prev, const Tensor& presyn_drive,
                     const NeuronParams& params, const DerivativeBounds& bounds,
                     const RefractoryConfig& cfg);

// The refractory update written factored, k (tau_prev + S tau_L) + S tau_0,
// and expanded, k tau_prev + S (k tau_L + tau_0).
double tau_update_factored(double k, double tau_prev, double s, double tau_l,
                           double tau_0);
double tau_update_expanded(double k, double tau_prev, double s, double tau_l,
                           double tau_0);

// Evaluates both forms on 'trials' random tuples and returns the largest
// absolute difference. Throws ValidationError if it exceeds 'tolerance'.
double check_tau_update_forms(Rng& rng, std::size_t trials,
                              double tolerance = 1e-12);

// One trace fixture record: {"t","n","I","U'","H","S","U","tau_ref"} with
// 12 significant digits.
std::string format_trace_record(std::size_t t, std::size_t neuron,
                                const NeuronStep& step);

}  // namespace hdrp
