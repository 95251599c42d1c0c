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

// Layered spiking networks unrolled over T steps.
//
// A network is encoder -> (dense | conv2d | avgpool2d | flatten)* -> readout.
// The encoder presents the static input unchanged at every step (direct
// encoding). Dense and conv2d layers are spiking: their drive W·x + b feeds
// one neuron per output element. The readout is a non-spiking dense layer
// whose drive is averaged over the T steps to give the logits.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hdrp/neuron.hpp"
#include "hdrp/tensor.hpp"

namespace hdrp {

class Rng;

enum class LayerKind { kEncoder, kDense, kConv2d, kAvgPool2d, kFlatten, kReadout };

std::string_view to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view name);

struct LayerSpec {
  LayerKind kind = LayerKind::kDense;
  std::string name;          // filled in by build() when empty
  Shape shape;               // encoder: input shape, [D] or [C, H, W]
  std::size_t units = 0;     // dense / readout output size
  std::size_t in = 0;        // dense / readout: optional declared fan-in
  std::size_t channels = 0;  // conv2d output channels
  std::size_t kernel = 0;    // conv2d / avgpool2d window
  std::size_t stride = 1;
  std::size_t padding = 0;
  NeuronParams neuron;
  RefractoryConfig refractory;

  bool spiking() const {
    return kind == LayerKind::kDense || kind == LayerKind::kConv2d;
  }
  bool weighted() const { return spiking() || kind == LayerKind::kReadout; }
};

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  std::size_t timesteps = 4;
  std::uint64_t seed = 1;
};

// Trainable tensors of one weighted layer. 'gain' holds the kernel gain A as
// a one-element tensor for spiking layers and is empty for the readout.
struct ParamTensors {
  Tensor weights;
  Tensor bias;
  Tensor gain;
};

using Gradients = std::vector<ParamTensors>;

struct ParamStore {
  std::vector<std::string> names;     // one per weighted layer
  std::vector<ParamTensors> values;
  std::vector<ParamTensors> grads;    // same shapes as values

  void zero_grad();
  std::size_t parameter_count() const;
  Gradients zeros_like() const;
};

// Calls f(index, "layer.weights", value, grad) over every parameter tensor in
// a fixed order.
template <typename F>
void for_each_param(ParamStore& store, F&& f) {
  for (std::size_t i = 0; i < store.values.size(); ++i) {
    f(i, store.names[i] + ".weights", store.values[i].weights, store.grads[i].weights);
    f(i, store.names[i] + ".bias", store.values[i].bias, store.grads[i].bias);
    if (store.values[i].gain.size() > 0) {
      f(i, store.names[i] + ".gain", store.values[i].gain, store.grads[i].gain);
    }
  }
}

// Resolved layer with its shapes and indices into the parameter/bound lists.
struct Stage {
  LayerSpec spec;
  Shape in_shape;
  Shape out_shape;
  std::size_t param_index = 0;     // weighted stages
  std::size_t spiking_index = 0;   // spiking stages
};

// Snapshot of one spiking layer at one step, in the neuron recurrence order.
struct LayerStep {
  Tensor input;     // what the layer's weights multiplied
  Tensor tau_prev;
  Tensor u_prev;
  Tensor current;
  Tensor u_prime;
  Tensor h;
  Tensor s;
  Tensor u;
  Tensor tau_ref;
  Tensor k_raw;
  Tensor tau_capped;  // 0/1 masks
  Tensor suppressed;
};

struct ForwardTrace {
  std::size_t timesteps = 0;
  std::vector<std::vector<LayerStep>> layers;  // [spiking layer][t]
  std::vector<Tensor> readout_inputs;          // [t]
};

// Spikes of every spiking layer at every step, always recorded.
struct SpikeTrace {
  std::size_t timesteps = 0;
  std::vector<std::vector<Tensor>> layers;  // [spiking layer][t]
};

enum class ForwardMode { kInference, kTraining };

struct ForwardResult {
  Tensor logits;                     // [classes]
  SpikeTrace spikes;
  std::optional<ForwardTrace> trace; // training mode only
};

class Network {
 public:
  // Validates shapes, initializes parameters (uniform in ±sqrt(6 / fan_in),
  // zero bias, gain = neuron.a_gain) and computes every spiking layer's
  // derivative bounds. Throws ConfigError for incomposable specs.
  static Network build(const NetworkSpec& spec, Rng& rng, ParamStore& params);
  // Same validation without touching an RNG; params must match the layout.
  static Network from_params(const NetworkSpec& spec, const ParamStore& params);

  const NetworkSpec& spec() const { return spec_; }
  const std::vector<Stage>& stages() const { return stages_; }
  std::size_t timesteps() const { return spec_.timesteps; }
  const Shape& input_shape() const { return stages_.front().out_shape; }
  std::size_t num_classes() const { return stages_.back().out_shape[0]; }
  std::size_t num_spiking() const { return spiking_stages_.size(); }
  const Stage& spiking_stage(std::size_t i) const { return stages_[spiking_stages_[i]]; }
  const DerivativeBounds& bounds(std::size_t spiking) const { return bounds_[spiking]; }
  // Weights, biases and gains over all weighted layers.
  std::size_t parameter_count() const { return parameter_count_; }

  // Recomputes derivative bounds from the live weights, biases and gains.
  void refresh_bounds(const ParamStore& params);

  // Neuron parameters of a spiking layer with the live kernel gain.
  NeuronParams live_params(std::size_t spiking, const ParamStore& params) const;

  // Input current presented at step t (1-based) for a static input.
  static Tensor encode(const Tensor& image, std::size_t t);

  ForwardResult forward(const ParamStore& params, const Tensor& input,
                        ForwardMode mode = ForwardMode::kInference,
                        const SpikeModel& spike = {}) const;

  // Number of synapses each spiking neuron drives downstream, and each input
  // element drives in the first weighted layer.
  const std::vector<std::uint64_t>& fanout(std::size_t spiking) const { return fanout_[spiking]; }
  const std::vector<std::uint64_t>& encoder_fanout() const { return encoder_fanout_; }

 private:
  Network() = default;
  static Network resolve(const NetworkSpec& spec);
  void compute_fanouts();

  NetworkSpec spec_;
  std::vector<Stage> stages_;
  std::vector<std::size_t> spiking_stages_;
  std::vector<DerivativeBounds> bounds_;
  std::vector<std::vector<std::uint64_t>> fanout_;
  std::vector<std::uint64_t> encoder_fanout_;
  std::size_t parameter_count_ = 0;
};

// argmax with lowest-index tie-breaking.
std::size_t predict(const Tensor& logits);

// Checkpoint: concatenated tensors (weights, bias, gain per weighted layer)
// in the tensor binary format, plus '<path>.manifest.json' naming them.
void save_checkpoint(const std::filesystem::path& path, const ParamStore& params);
ParamStore load_checkpoint(const std::filesystem::path& path);

}  // namespace hdrp
