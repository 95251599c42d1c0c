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

#include "hdrp/neuron.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "hdrp/errors.hpp"
#include "hdrp/rng.hpp"

namespace hdrp {

void NeuronParams::validate() const {
  if (!(tau_m > 1.0)) throw ParameterError("tau_m must be > 1");
  if (!(u_th > u_rest)) throw ParameterError("u_th must exceed u_rest");
  if (!(tau_ref0 >= 0.0)) throw ParameterError("tau_ref0 must be >= 0");
  if (!(tau_refL >= 0.0)) throw ParameterError("tau_refL must be >= 0");
  if (!(tau_ref_max >= 0.0)) throw ParameterError("tau_ref_max must be >= 0");
  if (tau_ref0 + tau_refL > tau_ref_max) {
    throw ParameterError("tau_ref0 + tau_refL must not exceed tau_ref_max");
  }
  if (!(a_gain > 0.0)) throw ParameterError("a_gain must be > 0");
  if (r_m != 1.0) throw ParameterError("r_m is fixed to 1");
}

std::string_view to_string(RefractoryMode mode) {
  switch (mode) {
    case RefractoryMode::kNone: return "none";
    case RefractoryMode::kAbsolute: return "absolute";
    case RefractoryMode::kRelativeNoHistory: return "relative-no-history";
    case RefractoryMode::kRelativeFixedDecay: return "relative-fixed-decay";
    case RefractoryMode::kHdrp: return "hdrp";
  }
  return "?";
}

RefractoryMode parse_refractory_mode(std::string_view name) {
  for (auto m : {RefractoryMode::kNone, RefractoryMode::kAbsolute,
                 RefractoryMode::kRelativeNoHistory,
                 RefractoryMode::kRelativeFixedDecay, RefractoryMode::kHdrp}) {
    if (to_string(m) == name) return m;
  }
  throw ConfigError("unknown refractory mode '" + std::string(name) + "'");
}

void RefractoryConfig::validate() const {
  if (!(fixed_decay >= 0.0 && fixed_decay <= 1.0)) {
    throw ConfigError("fixed_decay must lie in [0, 1]");
  }
  if (absolute_len < 0) throw ConfigError("absolute_len must be >= 0");
}

bool uses_kernel(RefractoryMode mode) {
  return mode == RefractoryMode::kRelativeNoHistory ||
         mode == RefractoryMode::kRelativeFixedDecay ||
         mode == RefractoryMode::kHdrp;
}

bool uses_normalization(RefractoryMode mode) {
  return mode == RefractoryMode::kRelativeNoHistory ||
         mode == RefractoryMode::kHdrp;
}

double spike_value(double h, double u_th, const SpikeModel& model) {
  const double x = h - u_th;
  if (model.function == SpikeFunction::kHeaviside) return x >= 0.0 ? 1.0 : 0.0;
  const double g = model.gamma;
  if (x <= -g) return 0.0;
  if (x >= g) return 1.0;
  if (x <= 0.0) return (x + g) * (x + g) / (2.0 * g * g);
  return 1.0 - (g - x) * (g - x) / (2.0 * g * g);
}

LayerState LayerState::initial(const Shape& shape, const NeuronParams& params) {
  LayerState st;
  st.u = Tensor(shape, params.u_rest);
  st.u_prime = Tensor(shape, 0.0);
  st.h = Tensor(shape, params.u_rest);
  st.tau_ref = Tensor(shape, 0.0);
  st.s = Tensor(shape, 0.0);
  return st;
}

std::pair<Tensor, Tensor> current_bounds(const Tensor& weights,
                                         const Tensor& bias) {
  if (weights.rank() < 2) throw ShapeError("current_bounds needs rank >= 2 weights");
  const std::size_t units = weights.dim(0);
  if (bias.size() != units) {
    throw ShapeError("bias " + shape_string(bias.shape()) +
                     " does not match weights " + shape_string(weights.shape()));
  }
  const std::size_t fan_in = weights.size() / std::max<std::size_t>(units, 1);
  Tensor i_min({units}), i_max({units});
  for (std::size_t n = 0; n < units; ++n) {
    double pos = 0.0, neg = 0.0;
    for (std::size_t j = 0; j < fan_in; ++j) {
      const double w = weights[n * fan_in + j];
      if (w > 0.0) pos += w;
      else neg += -w;
    }
    i_max[n] = pos + bias[n];
    i_min[n] = -neg + bias[n];
  }
  return {std::move(i_min), std::move(i_max)};
}

DerivativeBounds derivative_bounds(const Tensor& i_min, const Tensor& i_max,
                                   const NeuronParams& params,
                                   double kernel_sup) {
  if (!(params.tau_m > 1.0)) throw ParameterError("tau_m must be > 1");
  if (i_min.shape() != i_max.shape()) throw ShapeError("current bound shapes differ");
  const double tau = params.tau_m;
  const double rest = params.u_rest;
  DerivativeBounds b;
  b.i_min = i_min;
  b.i_max = i_max;
  b.u_min = Tensor(i_min.shape());
  b.u_max = Tensor(i_min.shape(), params.u_th);
  b.up_min = Tensor(i_min.shape());
  b.up_max = Tensor(i_min.shape());
  for (std::size_t n = 0; n < i_min.size(); ++n) {
    const double floor = i_min[n] - kernel_sup;
    // Fixed point of V <- (1 - 1/tau_m) V + floor with V = U - u_rest.
    b.u_min[n] = rest + tau * std::min(0.0, floor);
    b.up_max[n] = -(b.u_min[n] - rest) / tau + i_max[n];
    b.up_min[n] = -(b.u_max[n] - rest) / tau + floor;
  }
  return b;
}

double kernel_sup(const NeuronParams& params, double a_gain,
                  RefractoryMode mode) {
  if (!uses_kernel(mode)) return 0.0;
  return kernel_value(params.tau_ref_max, params.u_th, a_gain);
}

void require_nondegenerate(const DerivativeBounds& bounds) {
  for (std::size_t n = 0; n < bounds.up_min.size(); ++n) {
    if (!(bounds.up_max[n] > bounds.up_min[n])) {
      throw ConfigError("degenerate derivative bounds for unit " +
                        std::to_string(n));
    }
  }
}

double normalize_raw(double u_prime, double up_min, double up_max) {
  return (u_prime - up_min) / (up_max - up_min);
}

double normalize_clamped(double u_prime, double up_min, double up_max) {
  return std::clamp(normalize_raw(u_prime, up_min, up_max), 0.0, 1.0);
}

namespace {

std::size_t group_size(std::size_t neurons, std::size_t units) {
  if (units == 0 || neurons % units != 0) {
    throw ShapeError("neuron count " + std::to_string(neurons) +
                     " is not a multiple of bound units " + std::to_string(units));
  }
  return neurons / units;
}

}  // namespace

Tensor normalize_derivative(const Tensor& u_prime, const DerivativeBounds& bounds) {
  const std::size_t group = group_size(u_prime.size(), bounds.up_min.size());
  Tensor k(u_prime.shape());
  for (std::size_t i = 0; i < u_prime.size(); ++i) {
    const std::size_t unit = i / group;
    if (!(bounds.up_max[unit] > bounds.up_min[unit])) {
      throw ConfigError("degenerate derivative bounds");
    }
    k[i] = normalize_clamped(u_prime[i], bounds.up_min[unit], bounds.up_max[unit]);
  }
  return k;
}

double kernel_value(double tau_ref, double u_th, double a_gain) {
  return u_th * std::tanh(a_gain * tau_ref);
}

Tensor refractory_kernel(const Tensor& tau_ref, const NeuronParams& params) {
  Tensor g(tau_ref.shape());
  for (std::size_t i = 0; i < g.size(); ++i) {
    g[i] = kernel_value(tau_ref[i], params.u_th, params.a_gain);
  }
  return g;
}

double tau_update_factored(double k, double tau_prev, double s, double tau_l,
                           double tau_0) {
  return k * (tau_prev + s * tau_l) + s * tau_0;
}

double tau_update_expanded(double k, double tau_prev, double s, double tau_l,
                           double tau_0) {
  return k * tau_prev + s * (k * tau_l + tau_0);
}

NeuronStep step_neuron(double u_prev, double tau_prev, double drive,
                       const NeuronParams& p, double up_min, double up_max,
                       const RefractoryConfig& cfg, const SpikeModel& spike) {
  NeuronStep st;
  const double g = uses_kernel(cfg.mode) ? kernel_value(tau_prev, p.u_th, p.a_gain) : 0.0;
  st.current = drive - g;
  st.u_prime = -(u_prev - p.u_rest) / p.tau_m + st.current;
  st.h = u_prev + st.u_prime;
  st.suppressed = cfg.mode == RefractoryMode::kAbsolute && tau_prev > 0.0;
  st.s = st.suppressed ? 0.0 : spike_value(st.h, p.u_th, spike);
  st.u = st.h * (1.0 - st.s) + p.u_rest * st.s;

  if (uses_normalization(cfg.mode)) {
    st.k_raw = normalize_raw(st.u_prime, up_min, up_max);
    st.k = std::clamp(st.k_raw, 0.0, 1.0);
  }

  double tau = 0.0;
  switch (cfg.mode) {
    case RefractoryMode::kNone:
      break;
    case RefractoryMode::kAbsolute:
      if (st.suppressed) {
        tau = std::max(tau_prev - 1.0, 0.0);
      } else if (st.h >= p.u_th) {
        tau = static_cast<double>(cfg.absolute_len);
      }
      break;
    case RefractoryMode::kRelativeNoHistory:
      tau = st.s * (st.k * p.tau_refL + p.tau_ref0);
      break;
    case RefractoryMode::kRelativeFixedDecay:
      st.k_raw = st.k = cfg.fixed_decay;
      tau = tau_update_expanded(cfg.fixed_decay, tau_prev, st.s, p.tau_refL, p.tau_ref0);
      break;
    case RefractoryMode::kHdrp:
      tau = tau_update_expanded(st.k, tau_prev, st.s, p.tau_refL, p.tau_ref0);
      break;
  }
  if (cfg.mode != RefractoryMode::kAbsolute && tau > p.tau_ref_max) {
    tau = p.tau_ref_max;
    st.tau_capped = true;
  }
  st.tau_ref = tau;
  return st;
}

LayerState lif_step(const LayerState& prev, const Tensor& input_current,
                    const NeuronParams& params) {
  if (input_current.shape() != prev.u.shape()) {
    throw ShapeError("lif_step: current " + shape_string(input_current.shape()) +
                     " vs state " + shape_string(prev.u.shape()));
  }
  LayerState next = LayerState::initial(prev.u.shape(), params);
  for (std::size_t i = 0; i < input_current.size(); ++i) {
    const double u_prev = prev.u[i];
    const double up = -(u_prev - params.u_rest) / params.tau_m + input_current[i];
    const double h = u_prev + up;
    const double s = h - params.u_th >= 0.0 ? 1.0 : 0.0;
    next.u_prime[i] = up;
    next.h[i] = h;
    next.s[i] = s;
    next.u[i] = h * (1.0 - s) + params.u_rest * s;
    next.tau_ref[i] = 0.0;
  }
  return next;
}

LayerState hdrp_step(const LayerState& prev, const Tensor& presyn_drive,
                     const NeuronParams& params, const DerivativeBounds& bounds,
                     const RefractoryConfig& cfg) {
  if (presyn_drive.shape() != prev.u.shape()) {
    throw ShapeError("hdrp_step: drive " + shape_string(presyn_drive.shape()) +
                     " vs state " + shape_string(prev.u.shape()));
  }
  const std::size_t group = group_size(presyn_drive.size(), bounds.up_min.size());
  LayerState next = LayerState::initial(prev.u.shape(), params);
  for (std::size_t i = 0; i < presyn_drive.size(); ++i) {
    const std::size_t unit = i / group;
    const NeuronStep st =
        step_neuron(prev.u[i], prev.tau_ref[i], presyn_drive[i], params,
                    bounds.up_min[unit], bounds.up_max[unit], cfg);
    next.u_prime[i] = st.u_prime;
    next.h[i] = st.h;
    next.s[i] = st.s;
    next.u[i] = st.u;
    next.tau_ref[i] = st.tau_ref;
  }
  return next;
}

double check_tau_update_forms(Rng& rng, std::size_t trials, double tolerance) {
  double worst = 0.0;
  for (std::size_t i = 0; i < trials; ++i) {
    const double k = rng.uniform();
    const double tau_prev = rng.uniform(0.0, 6.0);
    const double s = rng.uniform() < 0.5 ? 0.0 : 1.0;
    const double tau_l = rng.uniform(0.0, 6.0);
    const double tau_0 = rng.uniform(0.0, 3.0);
    const double diff = std::fabs(tau_update_factored(k, tau_prev, s, tau_l, tau_0) -
                                  tau_update_expanded(k, tau_prev, s, tau_l, tau_0));
    worst = std::max(worst, diff);
  }
  if (worst > tolerance) {
    throw ValidationError("refractory update forms disagree by " +
                          std::to_string(worst));
  }
  return worst;
}

std::string format_trace_record(std::size_t t, std::size_t neuron,
                                const NeuronStep& st) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "{\"t\":%zu,\"n\":%zu,\"I\":%.12g,\"U'\":%.12g,\"H\":%.12g,"
                "\"S\":%.12g,\"U\":%.12g,\"tau_ref\":%.12g}",
                t, neuron, st.current, st.u_prime, st.h, st.s, st.u, st.tau_ref);
  return buf;
}

}  // namespace hdrp
