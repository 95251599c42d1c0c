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

#include "hdrp/hdrp.h"

#include <cstring>
#include <new>
#include <optional>
#include <string>

#include "hdrp/energy.hpp"
#include "hdrp/errors.hpp"
#include "hdrp/experiment.hpp"
#include "hdrp/rng.hpp"

struct hdrp_experiment {
  hdrp::ExperimentConfig config;
};

struct hdrp_model {
  hdrp::Network net;
  hdrp::ParamStore params;
};

namespace {

thread_local std::string g_last_error;

hdrp_status status_of(hdrp::ErrorKind kind) {
  using K = hdrp::ErrorKind;
  switch (kind) {
    case K::kConfig:
    case K::kParameter: return HDRP_ERR_CONFIG;
    case K::kValidation: return HDRP_ERR_VALIDATION;
    case K::kIo: return HDRP_ERR_IO;
    case K::kShape: return HDRP_ERR_SHAPE;
    case K::kFormat: return HDRP_ERR_FORMAT;
    case K::kNumeric: return HDRP_ERR_NUMERIC;
    case K::kData: return HDRP_ERR_DATA;
    case K::kContract: return HDRP_ERR_INTERNAL;
  }
  return HDRP_ERR_INTERNAL;
}

hdrp_status fail(hdrp_status s, std::string msg) {
  g_last_error = std::move(msg);
  return s;
}

template <typename F>
hdrp_status guarded(F&& f) {
  try {
    g_last_error.clear();
    return f();
  } catch (const hdrp::Error& e) {
    return fail(status_of(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(HDRP_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(HDRP_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(HDRP_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = new char[s.size() + 1];
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

#define HDRP_REQUIRE(cond, what) \
  if (!(cond)) return fail(HDRP_ERR_ARGUMENT, what)

}  // namespace

extern "C" {

const char* hdrp_version(void) {
  static const std::string v(hdrp::version_string());
  return v.c_str();
}

const char* hdrp_last_error(void) { return g_last_error.c_str(); }

void hdrp_string_free(char* s) { delete[] s; }

hdrp_status hdrp_experiment_create_default(hdrp_experiment** out) {
  HDRP_REQUIRE(out, "null output handle");
  return guarded([&] {
    *out = new hdrp_experiment{hdrp::default_config()};
    return HDRP_OK;
  });
}

hdrp_status hdrp_experiment_load(const char* path, hdrp_experiment** out) {
  HDRP_REQUIRE(path && out, "null argument");
  return guarded([&] {
    *out = new hdrp_experiment{hdrp::parse_config(hdrp::read_config_file(path))};
    return HDRP_OK;
  });
}

hdrp_status hdrp_experiment_create(const char* path, const char* const* overrides,
                                   size_t num_overrides, hdrp_experiment** out) {
  HDRP_REQUIRE(out, "null output handle");
  HDRP_REQUIRE(overrides || num_overrides == 0, "null override list");
  return guarded([&] {
    nlohmann::json j = path ? hdrp::read_config_file(path) : nlohmann::json::object();
    if (num_overrides) {
      j = hdrp::config_to_json(hdrp::parse_config(j));
      for (size_t i = 0; i < num_overrides; ++i) {
        HDRP_REQUIRE(overrides[i], "null override");
        hdrp::apply_override(j, overrides[i]);
      }
    }
    *out = new hdrp_experiment{hdrp::parse_config(j)};
    return HDRP_OK;
  });
}

hdrp_status hdrp_experiment_parse(const char* json, hdrp_experiment** out) {
  HDRP_REQUIRE(json && out, "null argument");
  return guarded([&] {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(json);
    } catch (const nlohmann::json::exception& e) {
      throw hdrp::ConfigError(std::string("config: ") + e.what());
    }
    *out = new hdrp_experiment{hdrp::parse_config(j)};
    return HDRP_OK;
  });
}

hdrp_status hdrp_experiment_set(hdrp_experiment* exp, const char* key, const char* value) {
  HDRP_REQUIRE(exp && key && value, "null argument");
  return guarded([&] {
    nlohmann::json j = hdrp::config_to_json(exp->config);
    hdrp::apply_override(j, std::string(key) + "=" + value);
    exp->config = hdrp::parse_config(j);
    return HDRP_OK;
  });
}

hdrp_status hdrp_experiment_resolved(const hdrp_experiment* exp, char** json) {
  HDRP_REQUIRE(exp && json, "null argument");
  return guarded([&] {
    *json = dup_string(hdrp::config_to_json(exp->config).dump(2));
    return HDRP_OK;
  });
}

void hdrp_experiment_free(hdrp_experiment* exp) { delete exp; }

hdrp_status hdrp_run(hdrp_experiment* exp, const char* command, char** report_json) {
  HDRP_REQUIRE(exp && command, "null argument");
  return guarded([&] {
    hdrp::CommandResult r = hdrp::run_command(exp->config, command);
    if (report_json) *report_json = dup_string(r.report.dump(2));
    if (r.validation_failed) return fail(HDRP_ERR_VALIDATION, std::string(command) + ": validation failed");
    return HDRP_OK;
  });
}

hdrp_status hdrp_model_build(const hdrp_experiment* exp, hdrp_model** out) {
  HDRP_REQUIRE(exp && out, "null argument");
  return guarded([&] {
    hdrp::Rng init = hdrp::Rng::substream(exp->config.seed, 1);
    hdrp::ParamStore params;
    hdrp::Network net = hdrp::Network::build(hdrp::network_spec(exp->config), init, params);
    *out = new hdrp_model{std::move(net), std::move(params)};
    return HDRP_OK;
  });
}

hdrp_status hdrp_model_load(const hdrp_experiment* exp, const char* checkpoint, hdrp_model** out) {
  HDRP_REQUIRE(exp && checkpoint && out, "null argument");
  return guarded([&] {
    hdrp::ParamStore params = hdrp::load_checkpoint(checkpoint);
    hdrp::Network net = hdrp::Network::from_params(hdrp::network_spec(exp->config), params);
    *out = new hdrp_model{std::move(net), std::move(params)};
    return HDRP_OK;
  });
}

hdrp_status hdrp_model_save(const hdrp_model* model, const char* checkpoint) {
  HDRP_REQUIRE(model && checkpoint, "null argument");
  return guarded([&] {
    hdrp::save_checkpoint(checkpoint, model->params);
    return HDRP_OK;
  });
}

size_t hdrp_model_input_size(const hdrp_model* model) {
  return model ? hdrp::num_elements(model->net.input_shape()) : 0;
}

size_t hdrp_model_num_classes(const hdrp_model* model) {
  return model ? model->net.num_classes() : 0;
}

size_t hdrp_model_timesteps(const hdrp_model* model) {
  return model ? model->net.timesteps() : 0;
}

hdrp_status hdrp_model_forward(const hdrp_model* model, const double* input, size_t input_size,
                               double* logits, size_t num_classes) {
  HDRP_REQUIRE(model && input && logits, "null argument");
  return guarded([&] {
    const hdrp::Shape& shape = model->net.input_shape();
    if (input_size != hdrp::num_elements(shape)) {
      return fail(HDRP_ERR_SHAPE, "input size " + std::to_string(input_size) + " != " +
                                      std::to_string(hdrp::num_elements(shape)));
    }
    if (num_classes != model->net.num_classes()) {
      return fail(HDRP_ERR_SHAPE, "logits buffer size does not match the class count");
    }
    hdrp::Tensor x(shape, std::vector<double>(input, input + input_size));
    const hdrp::ForwardResult r = model->net.forward(model->params, x);
    std::memcpy(logits, r.logits.data().data(), num_classes * sizeof(double));
    return HDRP_OK;
  });
}

hdrp_status hdrp_model_predict(const hdrp_model* model, const double* input, size_t input_size,
                               size_t* label) {
  HDRP_REQUIRE(model && input && label, "null argument");
  std::vector<double> logits(model->net.num_classes());
  const hdrp_status s = hdrp_model_forward(model, input, input_size, logits.data(), logits.size());
  if (s != HDRP_OK) return s;
  *label = hdrp::predict(hdrp::Tensor::vector(logits));
  return HDRP_OK;
}

void hdrp_model_free(hdrp_model* model) { delete model; }

double hdrp_sop_energy_uj(double acs, double macs, double e_mac_pj, double e_ac_pj) {
  return hdrp::sop_energy_uj(acs, macs, hdrp::EnergyConstants{e_mac_pj, e_ac_pj});
}

}  // extern "C"
