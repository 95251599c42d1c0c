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

#include "hdrp/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>

#include "hdrp/errors.hpp"
#include "hdrp/rng.hpp"

namespace hdrp {

namespace fs = std::filesystem;

std::string_view version_string() { return "hdrp 0.1.0"; }

fs::path ExperimentConfig::checkpoint_path() const {
  return checkpoint.empty() ? fs::path(output_dir) / "checkpoint.bin" : fs::path(checkpoint);
}

// ---- JSON <-> config -----------------------------------------------------------

namespace {

Json neuron_json(const NeuronParams& p) {
  return Json{{"tau_m", p.tau_m},       {"u_th", p.u_th},          {"u_rest", p.u_rest},
              {"tau_ref0", p.tau_ref0}, {"tau_refL", p.tau_refL},  {"tau_ref_max", p.tau_ref_max},
              {"a_gain", p.a_gain}};
}

Json refractory_json(const RefractoryConfig& r) {
  return Json{{"mode", std::string(to_string(r.mode))},
              {"fixed_decay", r.fixed_decay},
              {"absolute_len", r.absolute_len}};
}

// Keys of 'full' whose values differ from 'base'.
Json diff(const Json& full, const Json& base) {
  Json out = Json::object();
  for (auto it = full.begin(); it != full.end(); ++it) {
    if (base.at(it.key()) != it.value()) out[it.key()] = it.value();
  }
  return out;
}

Json default_layers_json() {
  return Json::array({Json{{"kind", "encoder"}, {"shape", {16}}},
                      Json{{"kind", "dense"}, {"units", 32}},
                      Json{{"kind", "readout"}, {"units", 4}}});
}

const char* kLayerKeys[] = {"kind",    "name",   "shape",   "units",  "in",        "channels",
                            "kernel",  "stride", "padding", "neuron", "refractory"};

[[noreturn]] void fail(const std::string& path, const std::string& msg) {
  throw ConfigError("config field '" + path + "': " + msg);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

bool same_kind(const nlohmann::json& a, const nlohmann::json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

void check_keys(const nlohmann::json& user, const Json& schema, const std::string& path) {
  if (!user.is_object()) fail(path, "expected an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string p = join(path, it.key());
    if (!schema.contains(it.key())) fail(p, "unknown key");
    if (!same_kind(schema.at(it.key()), it.value())) {
      fail(p, std::string("expected ") + schema.at(it.key()).type_name() + ", got " +
                  it.value().type_name());
    }
  }
}

void check_layer(const nlohmann::json& layer, const std::string& path) {
  if (!layer.is_object()) fail(path, "expected an object");
  for (auto it = layer.begin(); it != layer.end(); ++it) {
    const std::string p = join(path, it.key());
    if (std::find(std::begin(kLayerKeys), std::end(kLayerKeys), it.key()) == std::end(kLayerKeys)) {
      fail(p, "unknown key");
    }
  }
  if (!layer.contains("kind")) fail(join(path, "kind"), "missing");
  if (layer.contains("neuron")) check_keys(layer["neuron"], neuron_json({}), join(path, "neuron"));
  if (layer.contains("refractory")) {
    check_keys(layer["refractory"], refractory_json({}), join(path, "refractory"));
  }
}

// Deep merge of 'user' into 'base', rejecting keys the defaults do not have.
void merge_strict(Json& base, const nlohmann::json& user, const std::string& path) {
  if (!user.is_object()) fail(path.empty() ? "<root>" : path, "expected an object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string p = join(path, it.key());
    if (!base.contains(it.key())) fail(p, "unknown key");
    Json& slot = base[it.key()];
    if (p == "network.layers") {
      if (!it.value().is_array()) fail(p, "expected an array");
      for (std::size_t i = 0; i < it.value().size(); ++i) {
        check_layer(it.value()[i], p + "." + std::to_string(i));
      }
      slot = it.value();
      continue;
    }
    if (!same_kind(slot, it.value())) {
      fail(p, std::string("expected ") + slot.type_name() + ", got " + it.value().type_name());
    }
    if (slot.is_object()) {
      merge_strict(slot, it.value(), p);
    } else {
      slot = it.value();
    }
  }
}

template <typename T>
T get(const Json& j, const std::string& path) {
  const Json* cur = &j;
  std::string seg;
  std::istringstream ss(path);
  while (std::getline(ss, seg, '.')) {
    if (!cur->contains(seg)) fail(path, "missing");
    cur = &(*cur)[seg];
  }
  try {
    if constexpr (std::is_unsigned_v<T> && !std::is_same_v<T, bool>) {
      if (!cur->is_number_integer() || cur->get<long long>() < 0) {
        fail(path, "expected a non-negative integer");
      }
    }
    if constexpr (std::is_same_v<T, int>) {
      if (!cur->is_number_integer()) fail(path, "expected an integer");
    }
    return cur->get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(path, e.what());
  }
}

NeuronParams parse_neuron(const Json& j, NeuronParams p, const std::string& path) {
  auto num = [&](const char* key, double& out) {
    if (j.contains(key)) {
      if (!j[key].is_number()) fail(join(path, key), "expected a number");
      out = j[key].get<double>();
    }
  };
  num("tau_m", p.tau_m);
  num("u_th", p.u_th);
  num("u_rest", p.u_rest);
  num("tau_ref0", p.tau_ref0);
  num("tau_refL", p.tau_refL);
  num("tau_ref_max", p.tau_ref_max);
  num("a_gain", p.a_gain);
  return p;
}

RefractoryConfig parse_refractory(const Json& j, RefractoryConfig r, const std::string& path) {
  if (j.contains("absolute_len") && !j["absolute_len"].is_number_integer()) {
    fail(join(path, "absolute_len"), "expected an integer");
  }
  if (j.contains("fixed_decay") && !j["fixed_decay"].is_number()) {
    fail(join(path, "fixed_decay"), "expected a number");
  }
  if (j.contains("mode") && !j["mode"].is_string()) fail(join(path, "mode"), "expected a string");
  try {
    if (j.contains("mode")) r.mode = parse_refractory_mode(j["mode"].get<std::string>());
  } catch (const ConfigError& e) {
    fail(join(path, "mode"), e.what());
  }
  if (j.contains("fixed_decay")) r.fixed_decay = j["fixed_decay"].get<double>();
  if (j.contains("absolute_len")) r.absolute_len = j["absolute_len"].get<int>();
  return r;
}

std::size_t layer_size(const Json& j, const char* key, const std::string& path, std::size_t dflt) {
  if (!j.contains(key)) return dflt;
  const auto& v = j[key];
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    fail(join(path, key), "expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace

Json default_config_json() { return config_to_json(default_config()); }

ExperimentConfig default_config() {
  ExperimentConfig cfg;
  for (const auto& l : default_layers_json()) {
    LayerSpec s;
    s.kind = parse_layer_kind(l["kind"].get<std::string>());
    if (l.contains("shape")) s.shape = l["shape"].get<Shape>();
    if (l.contains("units")) s.units = l["units"].get<std::size_t>();
    cfg.layers.push_back(s);
  }
  return cfg;
}

Json config_to_json(const ExperimentConfig& c) {
  const Json global_neuron = neuron_json(c.neuron);
  const Json global_refr = refractory_json(c.refractory);
  Json layers = Json::array();
  for (const auto& l : c.layers) {
    Json j{{"kind", std::string(to_string(l.kind))}};
    if (!l.name.empty()) j["name"] = l.name;
    switch (l.kind) {
      case LayerKind::kEncoder:
        j["shape"] = l.shape;
        break;
      case LayerKind::kDense:
      case LayerKind::kReadout:
        j["units"] = l.units;
        if (l.in) j["in"] = l.in;
        break;
      case LayerKind::kConv2d:
        j["channels"] = l.channels;
        j["kernel"] = l.kernel;
        j["stride"] = l.stride;
        j["padding"] = l.padding;
        break;
      case LayerKind::kAvgPool2d:
        j["kernel"] = l.kernel;
        j["stride"] = l.stride;
        break;
      case LayerKind::kFlatten:
        break;
    }
    if (l.spiking()) {
      Json n = diff(neuron_json(l.neuron), global_neuron);
      Json r = diff(refractory_json(l.refractory), global_refr);
      if (!n.empty()) j["neuron"] = n;
      if (!r.empty()) j["refractory"] = r;
    }
    layers.push_back(j);
  }
  return Json{
      {"seed", c.seed},
      {"timesteps", c.timesteps},
      {"threads", c.threads},
      {"output_dir", c.output_dir},
      {"checkpoint", c.checkpoint},
      {"network", {{"layers", layers}}},
      {"neuron", global_neuron},
      {"refractory", global_refr},
      {"loss", {{"lambda", c.loss.lambda}, {"gamma", c.loss.gamma}}},
      {"optimizer",
       {{"eta", c.optimizer.eta},
        {"epochs", c.optimizer.epochs},
        {"batch_size", c.optimizer.batch_size},
        {"schedule", c.optimizer.schedule == Schedule::kStep ? "step" : "constant"},
        {"step_epochs", c.optimizer.step_epochs},
        {"step_factor", c.optimizer.step_factor}}},
      {"backward", {{"detach_normalization", c.detach_normalization}}},
      {"data",
       {{"source", c.data.source},
        {"classes", c.data.classes},
        {"dim", c.data.dim},
        {"train_per_class", c.data.train_per_class},
        {"test_per_class", c.data.test_per_class},
        {"margin", c.data.margin},
        {"sigma", c.data.sigma},
        {"train_noise_sigma", c.data.train_noise_sigma},
        {"train_images", c.data.train_images},
        {"train_labels", c.data.train_labels},
        {"test_images", c.data.test_images},
        {"test_labels", c.data.test_labels}}},
      {"noise",
       {{"sigma", c.noise.sigma}, {"clip", c.noise.clip}, {"seed", c.noise.seed}, {"grid", c.noise.grid}}},
      {"energy",
       {{"e_mac_pj", c.energy.e_mac_pj},
        {"e_ac_pj", c.energy.e_ac_pj},
        {"state_update_macs", c.macs.state_update_macs}}},
      {"grad_check",
       {{"h", c.grad_check.h},
        {"tolerance", c.grad_check.tolerance},
        {"floor", c.grad_check.floor},
        {"samples", c.grad_check.samples},
        {"hidden", c.grad_check.hidden},
        {"corrupt", c.grad_check.corrupt}}},
      {"ablate", {{"seeds", c.ablate.seeds}, {"eval_sigma", c.ablate.eval_sigma}}},
      {"noise_sweep", {{"variants", c.noise_sweep.variants}, {"seeds", c.noise_sweep.seeds}}},
  };
}

ExperimentConfig parse_config(const nlohmann::json& user) {
  Json j = default_config_json();
  merge_strict(j, user, "");

  ExperimentConfig c;
  c.seed = get<std::uint64_t>(j, "seed");
  c.timesteps = get<std::size_t>(j, "timesteps");
  c.threads = get<std::size_t>(j, "threads");
  c.output_dir = get<std::string>(j, "output_dir");
  c.checkpoint = get<std::string>(j, "checkpoint");
  c.neuron = parse_neuron(j["neuron"], NeuronParams{}, "neuron");
  c.refractory = parse_refractory(j["refractory"], RefractoryConfig{}, "refractory");

  const Json& layers = j["network"]["layers"];
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const Json& l = layers[i];
    const std::string p = "network.layers." + std::to_string(i);
    LayerSpec s;
    try {
      s.kind = parse_layer_kind(l["kind"].get<std::string>());
      if (l.contains("name")) s.name = l["name"].get<std::string>();
      if (l.contains("shape")) s.shape = l["shape"].get<Shape>();
    } catch (const nlohmann::json::exception& e) {
      fail(p, e.what());
    } catch (const ConfigError& e) {
      fail(p, e.what());
    }
    s.units = layer_size(l, "units", p, 0);
    s.in = layer_size(l, "in", p, 0);
    s.channels = layer_size(l, "channels", p, 0);
    s.kernel = layer_size(l, "kernel", p, 0);
    s.stride = layer_size(l, "stride", p, s.kind == LayerKind::kAvgPool2d ? s.kernel : 1);
    s.padding = layer_size(l, "padding", p, 0);
    s.neuron = c.neuron;
    s.refractory = c.refractory;
    if (l.contains("neuron")) s.neuron = parse_neuron(l["neuron"], c.neuron, p + ".neuron");
    if (l.contains("refractory")) {
      s.refractory = parse_refractory(l["refractory"], c.refractory, p + ".refractory");
    }
    c.layers.push_back(s);
  }

  c.loss.lambda = get<double>(j, "loss.lambda");
  c.loss.gamma = get<double>(j, "loss.gamma");
  c.optimizer.eta = get<double>(j, "optimizer.eta");
  c.optimizer.epochs = get<std::size_t>(j, "optimizer.epochs");
  c.optimizer.batch_size = get<std::size_t>(j, "optimizer.batch_size");
  const std::string sched = get<std::string>(j, "optimizer.schedule");
  if (sched == "constant") c.optimizer.schedule = Schedule::kConstant;
  else if (sched == "step") c.optimizer.schedule = Schedule::kStep;
  else fail("optimizer.schedule", "expected \"constant\" or \"step\"");
  c.optimizer.step_epochs = get<std::size_t>(j, "optimizer.step_epochs");
  c.optimizer.step_factor = get<double>(j, "optimizer.step_factor");
  c.detach_normalization = get<bool>(j, "backward.detach_normalization");

  c.data.source = get<std::string>(j, "data.source");
  c.data.classes = get<std::size_t>(j, "data.classes");
  c.data.dim = get<std::size_t>(j, "data.dim");
  c.data.train_per_class = get<std::size_t>(j, "data.train_per_class");
  c.data.test_per_class = get<std::size_t>(j, "data.test_per_class");
  c.data.margin = get<double>(j, "data.margin");
  c.data.sigma = get<double>(j, "data.sigma");
  c.data.train_noise_sigma = get<double>(j, "data.train_noise_sigma");
  c.data.train_images = get<std::string>(j, "data.train_images");
  c.data.train_labels = get<std::string>(j, "data.train_labels");
  c.data.test_images = get<std::string>(j, "data.test_images");
  c.data.test_labels = get<std::string>(j, "data.test_labels");

  c.noise.sigma = get<double>(j, "noise.sigma");
  c.noise.clip = get<bool>(j, "noise.clip");
  c.noise.seed = get<std::uint64_t>(j, "noise.seed");
  c.noise.grid = get<std::vector<double>>(j, "noise.grid");

  c.energy.e_mac_pj = get<double>(j, "energy.e_mac_pj");
  c.energy.e_ac_pj = get<double>(j, "energy.e_ac_pj");
  c.macs.state_update_macs = get<std::uint64_t>(j, "energy.state_update_macs");

  c.grad_check.h = get<double>(j, "grad_check.h");
  c.grad_check.tolerance = get<double>(j, "grad_check.tolerance");
  c.grad_check.floor = get<double>(j, "grad_check.floor");
  c.grad_check.samples = get<std::size_t>(j, "grad_check.samples");
  c.grad_check.hidden = get<std::vector<std::size_t>>(j, "grad_check.hidden");
  c.grad_check.corrupt = get<bool>(j, "grad_check.corrupt");
  c.ablate.seeds = get<std::vector<std::uint64_t>>(j, "ablate.seeds");
  c.ablate.eval_sigma = get<double>(j, "ablate.eval_sigma");
  c.noise_sweep.variants = get<std::vector<std::string>>(j, "noise_sweep.variants");
  c.noise_sweep.seeds = get<std::vector<std::uint64_t>>(j, "noise_sweep.seeds");

  // Semantic checks.
  if (c.timesteps < 1) fail("timesteps", "must be >= 1");
  if (c.threads < 1) fail("threads", "must be >= 1");
  try {
    c.loss.validate();
    c.optimizer.validate();
    c.energy.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (c.optimizer.epochs == 0) fail("optimizer.epochs", "must be >= 1");
  if (c.data.source != "synthetic" && c.data.source != "idx") {
    fail("data.source", "expected \"synthetic\" or \"idx\"");
  }
  if (c.data.source == "synthetic") {
    if (c.data.classes < 2) fail("data.classes", "must be >= 2");
    if (c.data.train_per_class == 0 || c.data.test_per_class == 0) fail("data", "sample counts must be >= 1");
    if (!(c.data.margin > 0.0)) fail("data.margin", "must be > 0");
    if (!(c.data.sigma >= 0.0)) fail("data.sigma", "must be >= 0");
    if (c.data.margin / std::sqrt(2.0 * static_cast<double>(c.data.dim / c.data.classes)) > 1.0) {
      fail("data.margin", "too large for [0, 1] inputs at this dim / classes");
    }
  } else if (c.data.train_images.empty() || c.data.train_labels.empty() ||
             c.data.test_images.empty() || c.data.test_labels.empty()) {
    fail("data", "idx source needs train_images, train_labels, test_images and test_labels");
  }
  if (!(c.data.train_noise_sigma >= 0.0)) fail("data.train_noise_sigma", "must be >= 0");
  if (!(c.noise.sigma >= 0.0)) fail("noise.sigma", "must be >= 0");
  if (c.noise.grid.empty()) fail("noise.grid", "must not be empty");
  for (double s : c.noise.grid) if (!(s >= 0.0)) fail("noise.grid", "entries must be >= 0");
  if (!(c.ablate.eval_sigma >= 0.0)) fail("ablate.eval_sigma", "must be >= 0");
  if (!(c.grad_check.h > 0.0)) fail("grad_check.h", "must be > 0");
  if (!(c.grad_check.tolerance > 0.0)) fail("grad_check.tolerance", "must be > 0");
  if (!(c.grad_check.floor > 0.0)) fail("grad_check.floor", "must be > 0");
  if (c.grad_check.samples == 0) fail("grad_check.samples", "must be >= 1");
  for (const auto& v : c.noise_sweep.variants) {
    try {
      parse_refractory_mode(v);
    } catch (const ConfigError& e) {
      fail("noise_sweep.variants", e.what());
    }
  }
  if (c.noise_sweep.variants.empty()) fail("noise_sweep.variants", "must not be empty");

  // Network composition.
  const NetworkSpec spec = network_spec(c);
  Rng probe(0);
  ParamStore tmp;
  try {
    Network::build(spec, probe, tmp);
  } catch (const Error& e) {
    throw ConfigError(std::string("config field 'network.layers': ") + e.what());
  }
  if (c.data.source == "synthetic") {
    if (num_elements(c.layers.front().shape) != c.data.dim) {
      fail("network.layers.0.shape", "must hold data.dim elements for synthetic data");
    }
    if (c.layers.back().units != c.data.classes) {
      fail("network.layers." + std::to_string(c.layers.size() - 1) + ".units",
           "must equal data.classes");
    }
  }
  return c;
}

nlohmann::json read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path.string() + "': " + e.what());
  }
}

void apply_override(nlohmann::json& user, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError("override '" + std::string(assignment) + "' is not key=value");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string text(assignment.substr(eq + 1));
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    value = text;
  }
  nlohmann::json* cur = &user;
  std::istringstream ss(key);
  std::string seg;
  std::vector<std::string> parts;
  while (std::getline(ss, seg, '.')) parts.push_back(seg);
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const bool last = i + 1 == parts.size();
    if (cur->is_array()) {
      std::size_t idx = 0;
      try {
        idx = std::stoul(parts[i]);
      } catch (const std::exception&) {
        throw ConfigError("override '" + key + "': '" + parts[i] + "' is not an array index");
      }
      if (idx >= cur->size()) throw ConfigError("override '" + key + "': index out of range");
      cur = &(*cur)[idx];
    } else {
      if (!cur->is_object()) throw ConfigError("override '" + key + "': '" + parts[i] + "' has no parent object");
      if (!last && !cur->contains(parts[i])) (*cur)[parts[i]] = nlohmann::json::object();
      cur = &(*cur)[parts[i]];
    }
    if (last) *cur = value;
  }
}

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string s = config_to_json(cfg).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

NetworkSpec network_spec(const ExperimentConfig& cfg) {
  NetworkSpec spec;
  spec.layers = cfg.layers;
  spec.timesteps = cfg.timesteps;
  spec.seed = cfg.seed;
  return spec;
}

void set_refractory(ExperimentConfig& cfg, const RefractoryConfig& r) {
  cfg.refractory = r;
  for (auto& l : cfg.layers) l.refractory = r;
}

Datasets load_datasets(const ExperimentConfig& cfg) {
  Datasets d;
  if (cfg.data.source == "synthetic") {
    Rng train_rng = Rng::substream(cfg.seed, 101);
    Rng test_rng = Rng::substream(cfg.seed, 202);
    d.train = synth_patterns(cfg.data.classes, cfg.data.train_per_class, cfg.data.dim,
                             cfg.data.margin, cfg.data.sigma, train_rng);
    d.test = synth_patterns(cfg.data.classes, cfg.data.test_per_class, cfg.data.dim,
                            cfg.data.margin, cfg.data.sigma, test_rng);
    d.train.split = "train";
    d.test.split = "test";
    // Flat patterns take the encoder's shape (e.g. [1, H, W] for conv stacks).
    for (Dataset* ds : {&d.train, &d.test}) {
      Shape s = cfg.layers.front().shape;
      s.insert(s.begin(), ds->size());
      ds->inputs = ds->inputs.reshaped(s);
    }
  } else {
    const std::size_t classes = cfg.layers.back().units;
    d.train = load_idx(cfg.data.train_images, cfg.data.train_labels, classes);
    d.test = load_idx(cfg.data.test_images, cfg.data.test_labels, classes);
    const Shape& want = cfg.layers.front().shape;
    if (d.train.sample_shape() != want || d.test.sample_shape() != want) {
      throw ConfigError("config field 'network.layers.0.shape': " + shape_string(want) +
                        " does not match the IDX samples " +
                        shape_string(d.train.sample_shape()));
    }
  }
  if (cfg.data.train_noise_sigma > 0.0) {
    d.train = apply_noise(d.train, {cfg.data.train_noise_sigma, cfg.noise.seed ^ 0x5eedULL,
                                    cfg.noise.clip});
  }
  return d;
}

// ---- commands --------------------------------------------------------------------

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("failed writing " + path.string());
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
}

Json header(const ExperimentConfig& cfg, std::string_view command) {
  return Json{{"command", std::string(command)},
              {"version", std::string(version_string())},
              {"config_hash", config_hash(cfg)},
              {"config", config_to_json(cfg)}};
}

Json ops_json(const OpsReport& r, const EnergyConstants& c) {
  Json layers = Json::array();
  for (const auto& l : r.layers) {
    layers.push_back({{"name", l.name}, {"neurons", l.neurons}, {"fanout", l.fanout},
                      {"spikes", l.spikes}, {"acs", l.acs}, {"macs", l.macs}});
  }
  const double n = r.samples ? static_cast<double>(r.samples) : 1.0;
  return Json{{"timesteps", r.timesteps},
              {"samples", r.samples},
              {"parameters", r.parameters},
              {"spikes", r.spikes},
              {"acs", r.acs},
              {"macs", r.macs},
              {"energy_uj", energy_uj(r, c)},
              {"energy_uj_per_sample", energy_uj(r, c) / n},
              {"layers", layers}};
}

Json eval_json(const EvalResult& r, const EnergyConstants& c) {
  return Json{{"accuracy", r.accuracy}, {"correct", r.correct}, {"total", r.total},
              {"loss", r.loss},         {"firing_rate", r.firing_rate},
              {"ops", ops_json(r.ops, c)}};
}

double mean_rate(const std::vector<double>& rates) {
  if (rates.empty()) return 0.0;
  return std::accumulate(rates.begin(), rates.end(), 0.0) / static_cast<double>(rates.size());
}

struct Trained {
  Network net;
  ParamStore params;
  std::vector<EpochLog> logs;
  EvalResult final;
  Json report;
  double wall_ms = 0.0;
};

// Trains per cfg and writes a full train run (report, logs, checkpoint) to
// cfg.output_dir. Shared by train and the multi-run commands.
Trained train_run(const ExperimentConfig& cfg, const Datasets& data) {
  const auto t0 = Clock::now();
  ensure_dir(cfg.output_dir);
  const NetworkSpec spec = network_spec(cfg);
  Rng init = Rng::substream(cfg.seed, 1);
  Rng shuffle = Rng::substream(cfg.seed, 2);
  ParamStore params;
  Network net = Network::build(spec, init, params);

  TrainOptions opt;
  opt.loss = cfg.loss;
  opt.optimizer = cfg.optimizer;
  opt.backward.gamma = cfg.loss.gamma;
  opt.backward.detach_normalization = cfg.detach_normalization;
  opt.threads = cfg.threads;
  std::ofstream log(fs::path(cfg.output_dir) / "train_log.jsonl");
  if (!log) throw IoError("cannot write train_log.jsonl in " + cfg.output_dir);
  opt.on_epoch = [&](const EpochLog& e) {
    log << Json{{"epoch", e.epoch}, {"loss", e.loss}, {"train_acc", e.train_acc},
                {"test_acc", e.test_acc}, {"firing_rate", e.firing_rate}, {"wall_ms", e.wall_ms}}
               .dump()
        << '\n';
  };
  std::vector<EpochLog> logs = train(net, params, data.train, data.test, opt, shuffle);
  EvalResult final = evaluate(net, params, data.test, cfg.threads, cfg.macs);

  save_checkpoint(cfg.checkpoint_path(), params);
  Json report = header(cfg, "train");
  Json epochs = Json::array();
  for (const auto& e : logs) {
    epochs.push_back({{"epoch", e.epoch}, {"eta", e.eta}, {"loss", e.loss},
                      {"train_acc", e.train_acc}, {"test_acc", e.test_acc},
                      {"firing_rate", e.firing_rate}});
  }
  report["epochs"] = epochs;
  report["final"] = eval_json(final, cfg.energy);
  report["data_checksum"] = {{"train", dataset_checksum(data.train)},
                             {"test", dataset_checksum(data.test)}};
  write_text(fs::path(cfg.output_dir) / "train_report.json", report.dump(2) + "\n");
  write_text(fs::path(cfg.output_dir) / "config.json", config_to_json(cfg).dump(2) + "\n");
  const double wall = ms_since(t0);
  Json timing{{"command", "train"}, {"wall_ms", wall}, {"epoch_wall_ms", Json::array()}};
  for (const auto& e : logs) timing["epoch_wall_ms"].push_back(e.wall_ms);
  write_text(fs::path(cfg.output_dir) / "train_timing.json", timing.dump(2) + "\n");
  return Trained{std::move(net), std::move(params), std::move(logs), std::move(final),
                 std::move(report), wall};
}

std::string stem(std::string_view command) {
  std::string s(command);
  std::replace(s.begin(), s.end(), '-', '_');
  return s;
}

void finish(const ExperimentConfig& cfg, std::string_view command, const Json& report,
            Clock::time_point t0) {
  ensure_dir(cfg.output_dir);
  write_text(fs::path(cfg.output_dir) / (stem(command) + "_report.json"), report.dump(2) + "\n");
  write_text(fs::path(cfg.output_dir) / "config.json", config_to_json(cfg).dump(2) + "\n");
  write_text(fs::path(cfg.output_dir) / (stem(command) + "_timing.json"),
             Json{{"command", std::string(command)}, {"wall_ms", ms_since(t0)}}.dump(2) + "\n");
}

std::pair<Network, ParamStore> load_model(const ExperimentConfig& cfg) {
  const fs::path path = cfg.checkpoint_path();
  if (!fs::exists(path)) throw IoError("checkpoint " + path.string() + " does not exist");
  ParamStore params = load_checkpoint(path);
  Network net = Network::from_params(network_spec(cfg), params);
  return {std::move(net), std::move(params)};
}

Dataset noisy(const Dataset& d, double sigma, const ExperimentConfig& cfg) {
  return apply_noise(d, {sigma, cfg.noise.seed, cfg.noise.clip});
}

CommandResult cmd_train(const ExperimentConfig& cfg) {
  Trained t = train_run(cfg, load_datasets(cfg));
  return {t.report, false};
}

CommandResult cmd_eval(const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  const Datasets data = load_datasets(cfg);
  auto [net, params] = load_model(cfg);
  const EvalResult r = evaluate(net, params, noisy(data.test, cfg.noise.sigma, cfg), cfg.threads, cfg.macs);
  Json report = header(cfg, "eval");
  report["checkpoint"] = cfg.checkpoint_path().string();
  report["sigma"] = cfg.noise.sigma;
  report["result"] = eval_json(r, cfg.energy);
  finish(cfg, "eval", report, t0);
  return {report, false};
}

struct AblationCell {
  std::string name;
  RefractoryConfig refractory;
  const char* period;
  const char* decay;
  const char* history;
};

std::vector<AblationCell> ablation_grid() {
  auto cell = [](std::string name, RefractoryMode m, double decay, int len, const char* period,
                 const char* dec, const char* hist) {
    RefractoryConfig r;
    r.mode = m;
    r.fixed_decay = decay;
    r.absolute_len = len;
    return AblationCell{std::move(name), r, period, dec, hist};
  };
  using M = RefractoryMode;
  return {
      cell("lif", M::kNone, 0.5, 1, "none", "-", "-"),
      cell("absolute-1", M::kAbsolute, 0.5, 1, "absolute (1)", "linear", "-"),
      cell("absolute-2", M::kAbsolute, 0.5, 2, "absolute (2)", "linear", "-"),
      cell("relative-no-history", M::kRelativeNoHistory, 0.5, 1, "relative", "adaptive", "no"),
      cell("fixed-decay-0.1", M::kRelativeFixedDecay, 0.1, 1, "relative", "fixed 0.1", "yes"),
      cell("fixed-decay-0.5", M::kRelativeFixedDecay, 0.5, 1, "relative", "fixed 0.5", "yes"),
      cell("fixed-decay-0.9", M::kRelativeFixedDecay, 0.9, 1, "relative", "fixed 0.9", "yes"),
      cell("hdrp", M::kHdrp, 0.5, 1, "relative", "adaptive", "yes"),
  };
}

std::vector<std::uint64_t> seeds_or_default(const std::vector<std::uint64_t>& seeds,
                                            std::uint64_t seed) {
  return seeds.empty() ? std::vector<std::uint64_t>{seed} : seeds;
}

CommandResult cmd_ablate(const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  ensure_dir(cfg.output_dir);
  const auto seeds = seeds_or_default(cfg.ablate.seeds, cfg.seed);
  Json report = header(cfg, "ablate");
  report["seeds"] = seeds;
  report["eval_sigma"] = cfg.ablate.eval_sigma;
  report["cells"] = Json::array();
  std::string csv = "cell,period,decay,history,seed,clean_acc,noisy_acc,firing_rate,acs_per_sample\n";
  char line[512];
  auto flush = [&] {
    write_text(fs::path(cfg.output_dir) / "ablation.csv", csv);
    write_text(fs::path(cfg.output_dir) / "ablate_report.json", report.dump(2) + "\n");
  };
  try {
    for (const AblationCell& cell : ablation_grid()) {
      Json c{{"name", cell.name}, {"mode", std::string(to_string(cell.refractory.mode))},
             {"fixed_decay", cell.refractory.fixed_decay},
             {"absolute_len", cell.refractory.absolute_len},
             {"period", cell.period}, {"decay", cell.decay}, {"history", cell.history},
             {"runs", Json::array()}};
      double clean = 0.0, noisy_acc = 0.0, rate = 0.0;
      for (std::uint64_t seed : seeds) {
        ExperimentConfig sub = cfg;
        sub.seed = seed;
        set_refractory(sub, cell.refractory);
        sub.output_dir = (fs::path(cfg.output_dir) / cell.name / ("seed-" + std::to_string(seed))).string();
        sub.checkpoint.clear();
        const Datasets data = load_datasets(sub);
        Trained t = train_run(sub, data);
        const EvalResult nr = evaluate(t.net, t.params, noisy(data.test, cfg.ablate.eval_sigma, sub),
                                       cfg.threads, cfg.macs);
        const double r = mean_rate(t.final.firing_rate);
        const double acs = static_cast<double>(t.final.ops.acs) / static_cast<double>(t.final.total);
        c["runs"].push_back({{"seed", seed}, {"clean_acc", t.final.accuracy},
                             {"noisy_acc", nr.accuracy}, {"firing_rate", t.final.firing_rate},
                             {"acs_per_sample", acs}});
        std::snprintf(line, sizeof line, "%s,%s,%s,%s,%llu,%.6f,%.6f,%.6f,%.3f\n", cell.name.c_str(),
                      cell.period, cell.decay, cell.history, static_cast<unsigned long long>(seed),
                      t.final.accuracy, nr.accuracy, r, acs);
        csv += line;
        clean += t.final.accuracy;
        noisy_acc += nr.accuracy;
        rate += r;
      }
      const double n = static_cast<double>(seeds.size());
      c["mean_clean_acc"] = clean / n;
      c["mean_noisy_acc"] = noisy_acc / n;
      c["mean_firing_rate"] = rate / n;
      report["cells"].push_back(c);
      flush();
    }
  } catch (const Error& e) {
    report["error"] = e.what();
    flush();
    throw;
  }

  std::string table;
  std::snprintf(line, sizeof line, "%-22s %-14s %-10s %-8s %10s %10s %8s\n", "Cell", "Period",
                "Decay", "History", "Clean (%)", "Noisy (%)", "Rate");
  table += line;
  for (const auto& c : report["cells"]) {
    std::snprintf(line, sizeof line, "%-22s %-14s %-10s %-8s %10.2f %10.2f %8.4f\n",
                  c["name"].get<std::string>().c_str(), c["period"].get<std::string>().c_str(),
                  c["decay"].get<std::string>().c_str(), c["history"].get<std::string>().c_str(),
                  100.0 * c["mean_clean_acc"].get<double>(), 100.0 * c["mean_noisy_acc"].get<double>(),
                  c["mean_firing_rate"].get<double>());
    table += line;
  }
  report["table"] = table;
  write_text(fs::path(cfg.output_dir) / "ablation.txt", table);
  finish(cfg, "ablate", report, t0);
  write_text(fs::path(cfg.output_dir) / "ablation.csv", csv);
  return {report, false};
}

Json sweep_points(const Network& net, const ParamStore& params, const Dataset& test,
                  const ExperimentConfig& cfg) {
  Json points = Json::array();
  for (double sigma : cfg.noise.grid) {
    const EvalResult r = evaluate(net, params, noisy(test, sigma, cfg), cfg.threads, cfg.macs);
    points.push_back({{"sigma", sigma}, {"accuracy", r.accuracy}, {"firing_rate", mean_rate(r.firing_rate)}});
  }
  return points;
}

CommandResult cmd_noise_sweep(const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  ensure_dir(cfg.output_dir);
  Json report = header(cfg, "noise-sweep");
  report["grid"] = cfg.noise.grid;
  report["variants"] = Json::array();
  std::string csv = "variant,seed,sigma,accuracy,firing_rate\n";
  char line[256];
  auto row = [&](const std::string& variant, const std::string& seed, const Json& p) {
    std::snprintf(line, sizeof line, "%s,%s,%.6g,%.6f,%.6f\n", variant.c_str(), seed.c_str(),
                  p["sigma"].get<double>(), p["accuracy"].get<double>(), p["firing_rate"].get<double>());
    csv += line;
  };

  if (!cfg.checkpoint.empty()) {
    const Datasets data = load_datasets(cfg);
    auto [net, params] = load_model(cfg);
    const Json points = sweep_points(net, params, data.test, cfg);
    const std::string name(to_string(cfg.refractory.mode));
    report["variants"].push_back({{"mode", name}, {"checkpoint", cfg.checkpoint},
                                  {"runs", Json::array({Json{{"seed", cfg.seed}, {"points", points}}})},
                                  {"mean", points}});
    for (const auto& p : points) row(name, std::to_string(cfg.seed), p);
  } else {
    const auto seeds = seeds_or_default(cfg.noise_sweep.seeds, cfg.seed);
    for (const std::string& variant : cfg.noise_sweep.variants) {
      RefractoryConfig r = cfg.refractory;
      r.mode = parse_refractory_mode(variant);
      Json v{{"mode", variant}, {"runs", Json::array()}};
      std::vector<double> acc(cfg.noise.grid.size(), 0.0), rate(cfg.noise.grid.size(), 0.0);
      for (std::uint64_t seed : seeds) {
        ExperimentConfig sub = cfg;
        sub.seed = seed;
        set_refractory(sub, r);
        sub.output_dir = (fs::path(cfg.output_dir) / variant / ("seed-" + std::to_string(seed))).string();
        const Datasets data = load_datasets(sub);
        Trained t = train_run(sub, data);
        const Json points = sweep_points(t.net, t.params, data.test, sub);
        for (std::size_t i = 0; i < points.size(); ++i) {
          acc[i] += points[i]["accuracy"].get<double>();
          rate[i] += points[i]["firing_rate"].get<double>();
          row(variant, std::to_string(seed), points[i]);
        }
        v["runs"].push_back({{"seed", seed}, {"points", points}});
      }
      Json mean = Json::array();
      const double n = static_cast<double>(seeds.size());
      for (std::size_t i = 0; i < acc.size(); ++i) {
        mean.push_back({{"sigma", cfg.noise.grid[i]}, {"accuracy", acc[i] / n}, {"firing_rate", rate[i] / n}});
        row(variant, "mean", mean.back());
      }
      v["mean"] = mean;
      report["variants"].push_back(v);
    }
  }
  write_text(fs::path(cfg.output_dir) / "curves.csv", csv);
  finish(cfg, "noise-sweep", report, t0);
  return {report, false};
}

CommandResult cmd_energy_report(const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  const Datasets data = load_datasets(cfg);
  auto [net, params] = load_model(cfg);
  const EvalResult r = evaluate(net, params, data.test, cfg.threads, cfg.macs);
  const std::string label =
      net.num_spiking() ? std::string(to_string(net.spiking_stage(0).spec.refractory.mode)) : "none";
  const EnergyRow er = energy_row(label, r.ops, cfg.energy);
  const std::string table = format_energy_table({er});
  Json report = header(cfg, "energy-report");
  report["checkpoint"] = cfg.checkpoint_path().string();
  report["accuracy"] = r.accuracy;
  report["firing_rate"] = r.firing_rate;
  report["ops"] = ops_json(r.ops, cfg.energy);
  report["row"] = {{"label", er.label}, {"timesteps", er.timesteps},
                   {"parameters_m", er.parameters_m}, {"acs_m", er.acs_m},
                   {"macs_m", er.macs_m}, {"energy_uj", er.energy_uj}};
  report["table"] = table;
  ensure_dir(cfg.output_dir);
  write_text(fs::path(cfg.output_dir) / "energy.txt", table);
  char line[256];
  std::snprintf(line, sizeof line, "%s,%zu,%.9g,%.9g,%.9g,%.9g\n", er.label.c_str(), er.timesteps,
                er.parameters_m, er.acs_m, er.macs_m, er.energy_uj);
  write_text(fs::path(cfg.output_dir) / "energy.csv",
             std::string("neuron,timesteps,parameters_m,acs_m,macs_m,energy_uj\n") + line);
  finish(cfg, "energy-report", report, t0);
  return {report, false};
}

Json grad_variant_json(const GradReport& r, const char* name) {
  std::vector<const GradEntry*> worst;
  for (const auto& e : r.entries) if (!e.excluded) worst.push_back(&e);
  std::stable_sort(worst.begin(), worst.end(),
                   [](const GradEntry* a, const GradEntry* b) { return a->rel_err > b->rel_err; });
  if (worst.size() > 5) worst.resize(5);
  Json w = Json::array();
  for (const GradEntry* e : worst) {
    w.push_back({{"name", e->name}, {"index", e->index}, {"analytic", e->analytic},
                 {"numeric", e->numeric}, {"rel_err", e->rel_err}});
  }
  return Json{{"variant", name},
              {"detach_normalization", r.detach_normalization},
              {"checked", r.checked},
              {"excluded", r.excluded},
              {"within_tolerance", r.within_tolerance},
              {"max_rel_err", r.max_rel_err},
              {"max_abs_err", r.max_abs_err},
              {"passed", r.passed},
              {"worst", w}};
}

CommandResult cmd_grad_check(const ExperimentConfig& cfg) {
  const auto t0 = Clock::now();
  ExperimentConfig gc = cfg;
  if (!cfg.grad_check.hidden.empty()) {
    LayerSpec enc = cfg.layers.front();
    LayerSpec ro = cfg.layers.back();
    gc.layers = {enc};
    for (std::size_t units : cfg.grad_check.hidden) {
      LayerSpec d;
      d.kind = LayerKind::kDense;
      d.units = units;
      d.neuron = cfg.neuron;
      d.refractory = cfg.refractory;
      gc.layers.push_back(d);
    }
    ro.in = 0;
    gc.layers.push_back(ro);
  }
  Rng init = Rng::substream(cfg.seed, 1);
  ParamStore params;
  Network net = Network::build(network_spec(gc), init, params);
  const Datasets data = load_datasets(cfg);
  Dataset batch = data.train;
  const std::size_t n = std::min(cfg.grad_check.samples, batch.size());
  const std::size_t per = num_elements(batch.sample_shape());
  Shape shape = batch.inputs.shape();
  shape[0] = n;
  batch.inputs = Tensor(shape, std::vector<double>(batch.inputs.data().begin(),
                                                   batch.inputs.data().begin() + n * per));
  batch.labels.resize(n);

  GradCheckOptions opt;
  opt.h = cfg.grad_check.h;
  opt.tolerance = cfg.grad_check.tolerance;
  opt.floor = cfg.grad_check.floor;
  if (cfg.grad_check.corrupt) {
    opt.corrupt = [](Gradients& g) { g[0].weights[0] += 1.0 + 10.0 * std::abs(g[0].weights[0]); };
  }
  const GradReport full = finite_diff_oracle(net, params, batch, cfg.loss, opt);
  opt.detach_normalization = true;
  const GradReport detached = finite_diff_oracle(net, params, batch, cfg.loss, opt);

  Json report = header(cfg, "grad-check");
  report["parameters"] = params.parameter_count();
  report["samples"] = n;
  report["variants"] = Json::array({grad_variant_json(full, "full"),
                                    grad_variant_json(detached, "detached-normalization")});
  report["passed"] = full.passed;
  std::string csv = "variant,name,index,analytic,numeric,rel_err,excluded\n";
  char line[256];
  for (const GradReport* r : {&full, &detached}) {
    for (const auto& e : r->entries) {
      std::snprintf(line, sizeof line, "%s,%s,%zu,%.17g,%.17g,%.6g,%d\n",
                    r->detach_normalization ? "detached-normalization" : "full", e.name.c_str(),
                    e.index, e.analytic, e.numeric, e.rel_err, e.excluded ? 1 : 0);
      csv += line;
    }
  }
  ensure_dir(cfg.output_dir);
  write_text(fs::path(cfg.output_dir) / "grad_entries.csv", csv);
  finish(cfg, "grad-check", report, t0);
  return {report, !full.passed};
}

}  // namespace

CommandResult run_command(const ExperimentConfig& cfg, std::string_view command) {
  if (command == "train") return cmd_train(cfg);
  if (command == "eval") return cmd_eval(cfg);
  if (command == "ablate") return cmd_ablate(cfg);
  if (command == "noise-sweep") return cmd_noise_sweep(cfg);
  if (command == "energy-report") return cmd_energy_report(cfg);
  if (command == "grad-check") return cmd_grad_check(cfg);
  throw ConfigError("unknown command '" + std::string(command) + "'");
}

}  // namespace hdrp
