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

#include "hdrp/network.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "hdrp/errors.hpp"
#include "hdrp/rng.hpp"

namespace hdrp {

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::kEncoder: return "encoder";
    case LayerKind::kDense: return "dense";
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kAvgPool2d: return "avgpool2d";
    case LayerKind::kFlatten: return "flatten";
    case LayerKind::kReadout: return "readout";
  }
  return "?";
}

LayerKind parse_layer_kind(std::string_view name) {
  for (auto k : {LayerKind::kEncoder, LayerKind::kDense, LayerKind::kConv2d,
                 LayerKind::kAvgPool2d, LayerKind::kFlatten, LayerKind::kReadout}) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown layer kind '" + std::string(name) + "'");
}

void ParamStore::zero_grad() {
  for (auto& g : grads) {
    g.weights.fill(0.0);
    g.bias.fill(0.0);
    g.gain.fill(0.0);
  }
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& v : values) n += v.weights.size() + v.bias.size() + v.gain.size();
  return n;
}

Gradients ParamStore::zeros_like() const {
  Gradients g;
  g.reserve(values.size());
  for (const auto& v : values) {
    g.push_back({Tensor(v.weights.shape()), Tensor(v.bias.shape()),
                 Tensor(v.gain.shape())});
  }
  return g;
}

namespace {

std::string layer_error(const LayerSpec& layer, const std::string& msg) {
  return "layer '" + layer.name + "' (" + std::string(to_string(layer.kind)) +
         "): " + msg;
}

Shape weight_shape(const Stage& st) {
  switch (st.spec.kind) {
    case LayerKind::kDense:
    case LayerKind::kReadout:
      return {st.out_shape[0], st.in_shape[0]};
    case LayerKind::kConv2d:
      return {st.spec.channels, st.in_shape[0], st.spec.kernel, st.spec.kernel};
    default:
      return {};
  }
}

Tensor dense_drive(const Tensor& w, const Tensor& b, const Tensor& x) {
  Tensor y = matmul(w, x.reshaped({x.size(), 1}));
  Tensor out({w.dim(0)});
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = y[i] + b[i];
  return out;
}

Tensor conv_drive(const Stage& st, const Tensor& w, const Tensor& b,
                  const Tensor& x) {
  Tensor y = conv2d(x, w, st.spec.stride, st.spec.padding);
  const std::size_t plane = y.size() / st.spec.channels;
  for (std::size_t o = 0; o < st.spec.channels; ++o)
    for (std::size_t i = 0; i < plane; ++i) y[o * plane + i] += b[o];
  return y;
}

// Number of (output, tap) pairs that read each input element of a weighted
// stage.
Tensor input_fanout(const Stage& st) {
  if (st.spec.kind == LayerKind::kConv2d) {
    Tensor ones_out(st.out_shape, 1.0);
    Tensor ones_k(weight_shape(st), 1.0);
    return conv2d_input_grad(ones_out, ones_k, st.in_shape, st.spec.stride,
                             st.spec.padding);
  }
  return Tensor(st.in_shape, static_cast<double>(st.out_shape[0]));
}

}  // namespace

Network Network::resolve(const NetworkSpec& spec) {
  if (spec.timesteps < 1) throw ConfigError("timesteps must be >= 1");
  if (spec.layers.size() < 2) throw ConfigError("network needs an encoder and a readout");
  Network net;
  net.spec_ = spec;
  Shape shape;
  std::size_t weighted = 0, spiking = 0;
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    LayerSpec layer = spec.layers[li];
    if (layer.name.empty()) layer.name = std::string(to_string(layer.kind)) + std::to_string(li);
    const bool first = li == 0, last = li + 1 == spec.layers.size();
    if ((layer.kind == LayerKind::kEncoder) != first) {
      throw ConfigError(layer_error(layer, "exactly one encoder is allowed and it must come first"));
    }
    if ((layer.kind == LayerKind::kReadout) != last) {
      throw ConfigError(layer_error(layer, "exactly one readout is allowed and it must come last"));
    }
    Stage st;
    st.in_shape = shape;
    try {
      switch (layer.kind) {
        case LayerKind::kEncoder:
          if (layer.shape.size() != 1 && layer.shape.size() != 3) {
            throw ConfigError("encoder shape must be [D] or [C, H, W]");
          }
          for (auto d : layer.shape) if (d == 0) throw ConfigError("zero-sized encoder dimension");
          st.out_shape = layer.shape;
          break;
        case LayerKind::kDense:
        case LayerKind::kReadout:
          if (shape.size() != 1) {
            throw ConfigError("expects flat input, got " + shape_string(shape) + " (add a flatten layer)");
          }
          if (layer.in != 0 && layer.in != shape[0]) {
            throw ConfigError("declared fan-in " + std::to_string(layer.in) +
                              " does not match incoming size " + std::to_string(shape[0]));
          }
          if (layer.units == 0) throw ConfigError("units must be >= 1");
          st.out_shape = {layer.units};
          break;
        case LayerKind::kConv2d:
          if (shape.size() != 3) throw ConfigError("expects C×H×W input, got " + shape_string(shape));
          if (layer.channels == 0) throw ConfigError("channels must be >= 1");
          st.out_shape = {layer.channels,
                          window_output_size(shape[1], layer.kernel, layer.stride, layer.padding),
                          window_output_size(shape[2], layer.kernel, layer.stride, layer.padding)};
          break;
        case LayerKind::kAvgPool2d:
          if (shape.size() != 3) throw ConfigError("expects C×H×W input, got " + shape_string(shape));
          st.out_shape = {shape[0], window_output_size(shape[1], layer.kernel, layer.stride, 0),
                          window_output_size(shape[2], layer.kernel, layer.stride, 0)};
          break;
        case LayerKind::kFlatten:
          st.out_shape = {num_elements(shape)};
          break;
      }
      if (layer.spiking()) {
        layer.neuron.validate();
        layer.refractory.validate();
      }
    } catch (const Error& e) {
      throw ConfigError(layer_error(layer, e.what()));
    }
    st.spec = layer;
    if (layer.weighted()) {
      st.param_index = weighted++;
      const Shape ws = weight_shape(st);
      net.parameter_count_ += num_elements(ws) + ws[0] + (layer.spiking() ? 1 : 0);
    }
    if (layer.spiking()) {
      st.spiking_index = spiking++;
      net.spiking_stages_.push_back(net.stages_.size());
    }
    shape = st.out_shape;
    net.stages_.push_back(std::move(st));
  }
  net.bounds_.resize(spiking);
  net.compute_fanouts();
  return net;
}

void Network::compute_fanouts() {
  fanout_.assign(spiking_stages_.size(), {});
  Tensor f;  // fanout of the signal leaving stage j
  for (std::size_t j = stages_.size(); j-- > 0;) {
    const Stage& st = stages_[j];
    if (st.spec.spiking()) {
      auto& out = fanout_[st.spiking_index];
      out.resize(f.size());
      for (std::size_t i = 0; i < f.size(); ++i) out[i] = static_cast<std::uint64_t>(std::llround(f[i]));
    }
    if (st.spec.kind == LayerKind::kEncoder) {
      encoder_fanout_.resize(f.size());
      for (std::size_t i = 0; i < f.size(); ++i) {
        encoder_fanout_[i] = static_cast<std::uint64_t>(std::llround(f[i]));
      }
      break;
    }
    if (st.spec.weighted()) {
      f = input_fanout(st);
    } else if (st.spec.kind == LayerKind::kAvgPool2d) {
      const double area = static_cast<double>(st.spec.kernel * st.spec.kernel);
      f = scale(avgpool2d_grad(f, st.in_shape, st.spec.kernel, st.spec.stride), area);
    } else if (st.spec.kind == LayerKind::kFlatten) {
      f = f.reshaped(st.in_shape);
    }
  }
}

Network Network::build(const NetworkSpec& spec, Rng& rng, ParamStore& params) {
  Network net = resolve(spec);
  params = ParamStore{};
  for (const Stage& st : net.stages_) {
    if (!st.spec.weighted()) continue;
    const Shape ws = weight_shape(st);
    const std::size_t fan_in = num_elements(ws) / ws[0];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    ParamTensors p;
    p.weights = rng_uniform(rng, ws, -bound, bound);
    p.bias = Tensor({ws[0]});
    p.gain = st.spec.spiking() ? Tensor({1}, st.spec.neuron.a_gain) : Tensor();
    params.names.push_back(st.spec.name);
    params.values.push_back(std::move(p));
  }
  params.grads = params.zeros_like();
  net.refresh_bounds(params);
  return net;
}

Network Network::from_params(const NetworkSpec& spec, const ParamStore& params) {
  Network net = resolve(spec);
  std::size_t k = 0;
  for (const Stage& st : net.stages_) {
    if (!st.spec.weighted()) continue;
    if (k >= params.values.size()) throw ConfigError("checkpoint has too few layers");
    const auto& p = params.values[k];
    const Shape gain_shape = st.spec.spiking() ? Shape{1} : Shape{0};
    if (p.weights.shape() != weight_shape(st) || p.bias.shape() != Shape{weight_shape(st)[0]} ||
        p.gain.shape() != gain_shape) {
      throw ConfigError("checkpoint tensors for layer " + std::to_string(k) +
                        " do not match layer '" + st.spec.name + "'");
    }
    ++k;
  }
  if (k != params.values.size()) throw ConfigError("checkpoint has extra layers");
  net.refresh_bounds(params);
  return net;
}

NeuronParams Network::live_params(std::size_t spiking, const ParamStore& params) const {
  const Stage& st = spiking_stage(spiking);
  NeuronParams p = st.spec.neuron;
  p.a_gain = params.values[st.param_index].gain[0];
  return p;
}

void Network::refresh_bounds(const ParamStore& params) {
  for (std::size_t l = 0; l < spiking_stages_.size(); ++l) {
    const Stage& st = spiking_stage(l);
    const ParamTensors& p = params.values[st.param_index];
    const NeuronParams np = live_params(l, params);
    auto [i_min, i_max] = current_bounds(p.weights, p.bias);
    bounds_[l] = derivative_bounds(i_min, i_max, np,
                                   kernel_sup(np, np.a_gain, st.spec.refractory.mode));
    try {
      require_nondegenerate(bounds_[l]);
    } catch (const ConfigError& e) {
      throw ConfigError(layer_error(st.spec, e.what()));
    }
  }
}

Tensor Network::encode(const Tensor& image, std::size_t /*t*/) { return image; }

ForwardResult Network::forward(const ParamStore& params, const Tensor& input,
                               ForwardMode mode, const SpikeModel& spike) const {
  if (input.shape() != input_shape()) {
    throw ShapeError("input " + shape_string(input.shape()) +
                     " does not match encoder " + shape_string(input_shape()));
  }
  const std::size_t T = spec_.timesteps;
  const bool training = mode == ForwardMode::kTraining;

  std::vector<NeuronParams> nparams;
  std::vector<Tensor> u, tau;
  for (std::size_t l = 0; l < num_spiking(); ++l) {
    nparams.push_back(live_params(l, params));
    u.emplace_back(spiking_stage(l).out_shape, nparams.back().u_rest);
    tau.emplace_back(spiking_stage(l).out_shape, 0.0);
  }

  ForwardResult result;
  result.spikes.timesteps = T;
  result.spikes.layers.resize(num_spiking());
  if (training) {
    result.trace.emplace();
    result.trace->timesteps = T;
    result.trace->layers.resize(num_spiking());
  }
  Tensor acc({num_classes()});

  for (std::size_t t = 1; t <= T; ++t) {
    Tensor signal = encode(input, t);
    for (std::size_t j = 1; j < stages_.size(); ++j) {
      const Stage& st = stages_[j];
      switch (st.spec.kind) {
        case LayerKind::kDense:
        case LayerKind::kConv2d: {
          const std::size_t l = st.spiking_index;
          const ParamTensors& p = params.values[st.param_index];
          Tensor drive = st.spec.kind == LayerKind::kDense
                             ? dense_drive(p.weights, p.bias, signal)
                             : conv_drive(st, p.weights, p.bias, signal);
          const DerivativeBounds& b = bounds_[l];
          const std::size_t group = drive.size() / b.up_min.size();
          LayerStep rec;
          if (training) {
            rec.input = signal;
            rec.tau_prev = tau[l];
            rec.u_prev = u[l];
            rec.current = rec.u_prime = rec.h = rec.k_raw = rec.tau_capped =
                rec.suppressed = Tensor(st.out_shape);
          }
          Tensor s(st.out_shape);
          for (std::size_t i = 0; i < drive.size(); ++i) {
            const std::size_t unit = i / group;
            const NeuronStep ns = step_neuron(u[l][i], tau[l][i], drive[i], nparams[l],
                                              b.up_min[unit], b.up_max[unit],
                                              st.spec.refractory, spike);
            u[l][i] = ns.u;
            tau[l][i] = ns.tau_ref;
            s[i] = ns.s;
            if (training) {
              rec.current[i] = ns.current;
              rec.u_prime[i] = ns.u_prime;
              rec.h[i] = ns.h;
              rec.k_raw[i] = ns.k_raw;
              rec.tau_capped[i] = ns.tau_capped ? 1.0 : 0.0;
              rec.suppressed[i] = ns.suppressed ? 1.0 : 0.0;
            }
          }
          require_finite(u[l], "neuron update");
          if (training) {
            rec.s = s;
            rec.u = u[l];
            rec.tau_ref = tau[l];
            result.trace->layers[l].push_back(std::move(rec));
          }
          result.spikes.layers[l].push_back(s);
          signal = std::move(s);
          break;
        }
        case LayerKind::kAvgPool2d:
          signal = avgpool2d(signal, st.spec.kernel, st.spec.stride);
          break;
        case LayerKind::kFlatten:
          signal = signal.reshaped(st.out_shape);
          break;
        case LayerKind::kReadout: {
          const ParamTensors& p = params.values[st.param_index];
          Tensor drive = dense_drive(p.weights, p.bias, signal);
          for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += drive[i];
          if (training) result.trace->readout_inputs.push_back(signal);
          break;
        }
        case LayerKind::kEncoder:
          break;
      }
    }
  }
  const double inv_t = 1.0 / static_cast<double>(T);
  for (auto& v : acc.data()) v *= inv_t;
  result.logits = std::move(acc);
  return result;
}

std::size_t predict(const Tensor& logits) {
  if (logits.size() == 0) throw ShapeError("predict on empty logits");
  std::size_t best = 0;
  for (std::size_t i = 1; i < logits.size(); ++i) {
    if (logits[i] > logits[best]) best = i;
  }
  return best;
}

namespace {

std::filesystem::path manifest_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".manifest.json");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ParamStore& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  nlohmann::ordered_json manifest;
  manifest["format"] = "hdrp-checkpoint/1";
  manifest["entries"] = nlohmann::ordered_json::array();
  auto put = [&](const std::string& name, const Tensor& t) {
    write_tensor(out, t);
    manifest["entries"].push_back({{"name", name}, {"shape", t.shape()}});
  };
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    put(params.names[i] + ".weights", params.values[i].weights);
    put(params.names[i] + ".bias", params.values[i].bias);
    put(params.names[i] + ".gain", params.values[i].gain);
  }
  std::ofstream mf(manifest_path(path));
  if (!mf) throw IoError("cannot write checkpoint manifest");
  mf << manifest.dump(2) << '\n';
}

ParamStore load_checkpoint(const std::filesystem::path& path) {
  std::ifstream mf(manifest_path(path));
  std::ifstream in(path, std::ios::binary);
  if (!mf || !in) throw IoError("cannot open checkpoint " + path.string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(mf);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint manifest: ") + e.what());
  }
  if (manifest.value("format", "") != "hdrp-checkpoint/1" || !manifest.contains("entries")) {
    throw FormatError("unrecognized checkpoint manifest");
  }
  const auto& entries = manifest["entries"];
  if (entries.size() % 3 != 0) throw FormatError("checkpoint manifest entry count");
  ParamStore store;
  const std::string suffixes[3] = {".weights", ".bias", ".gain"};
  for (std::size_t i = 0; i < entries.size(); i += 3) {
    ParamTensors p;
    Tensor* slots[3] = {&p.weights, &p.bias, &p.gain};
    std::string layer;
    for (int k = 0; k < 3; ++k) {
      const std::string name = entries[i + k].at("name").get<std::string>();
      const Shape shape = entries[i + k].at("shape").get<Shape>();
      if (name.size() <= suffixes[k].size() ||
          name.compare(name.size() - suffixes[k].size(), suffixes[k].size(), suffixes[k]) != 0) {
        throw FormatError("unexpected checkpoint entry '" + name + "'");
      }
      layer = name.substr(0, name.size() - suffixes[k].size());
      *slots[k] = read_tensor(in);
      if (slots[k]->shape() != shape) {
        throw FormatError("checkpoint entry '" + name + "' shape mismatch");
      }
    }
    store.names.push_back(layer);
    store.values.push_back(std::move(p));
  }
  store.grads = store.zeros_like();
  return store;
}

}  // namespace hdrp
