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

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "hdrp/network.hpp"
#include "hdrp/rng.hpp"

namespace hdrp::test {

inline Tensor json_matrix(const nlohmann::json& j) {
  const std::size_t rows = j.size(), cols = j[0].size();
  Tensor t({rows, cols});
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) t.at({r, c}) = j[r][c].get<double>();
  return t;
}

inline Tensor json_vector(const nlohmann::json& j) {
  return Tensor::vector(j.get<std::vector<double>>());
}

inline LayerSpec layer(LayerKind kind) {
  LayerSpec s;
  s.kind = kind;
  return s;
}

// Dense stack with the given widths: encoder[in] -> dense... -> readout.
inline NetworkSpec dense_spec(std::size_t in, const std::vector<std::size_t>& hidden,
                              std::size_t classes, std::size_t T, RefractoryMode mode,
                              const NeuronParams& neuron = {}) {
  NetworkSpec spec;
  spec.timesteps = T;
  LayerSpec enc;
  enc.kind = LayerKind::kEncoder;
  enc.shape = {in};
  spec.layers.push_back(enc);
  for (std::size_t h : hidden) {
    LayerSpec d;
    d.kind = LayerKind::kDense;
    d.units = h;
    d.neuron = neuron;
    d.refractory.mode = mode;
    spec.layers.push_back(d);
  }
  LayerSpec r;
  r.kind = LayerKind::kReadout;
  r.units = classes;
  spec.layers.push_back(r);
  return spec;
}

// The 2 -> 3 -> 3 -> 2 network of network_2layer.json.
struct FixtureNet {
  Network net;
  ParamStore params;
};

inline FixtureNet fixture_net(const nlohmann::json& fx, RefractoryMode mode) {
  ParamStore params;
  Rng rng(0);
  Network net = Network::build(dense_spec(2, {3, 3}, 2, fx["timesteps"].get<std::size_t>(), mode), rng, params);
  params.values[0].weights = json_matrix(fx["w1"]);
  params.values[0].bias = json_vector(fx["b1"]);
  params.values[1].weights = json_matrix(fx["w2"]);
  params.values[1].bias = json_vector(fx["b2"]);
  params.values[2].weights = json_matrix(fx["w3"]);
  params.values[2].bias = json_vector(fx["b3"]);
  net.refresh_bounds(params);
  return {std::move(net), std::move(params)};
}

}  // namespace hdrp::test
