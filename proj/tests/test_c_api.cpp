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

#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include <doctest.h>

#include "hdrp/hdrp.h"

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  hdrp_string_free(s);
  return out;
}

}  // namespace

TEST_CASE("version and error reporting") {
  CHECK(std::string(hdrp_version()).rfind("hdrp ", 0) == 0);
  hdrp_experiment* exp = nullptr;
  CHECK(hdrp_experiment_load("/nonexistent/config.json", &exp) == HDRP_ERR_CONFIG);
  CHECK(exp == nullptr);
  CHECK(std::strlen(hdrp_last_error()) > 0);
  CHECK(hdrp_experiment_parse("{\"bogus\": 1}", &exp) == HDRP_ERR_CONFIG);
  CHECK(std::string(hdrp_last_error()).find("bogus") != std::string::npos);
  CHECK(hdrp_experiment_parse("{not json", &exp) == HDRP_ERR_CONFIG);
  CHECK(hdrp_experiment_create_default(nullptr) == HDRP_ERR_ARGUMENT);
  REQUIRE(hdrp_experiment_create_default(&exp) == HDRP_OK);
  CHECK(std::string(hdrp_last_error()).empty());
  hdrp_experiment_free(exp);
  hdrp_experiment_free(nullptr);
}

TEST_CASE("overrides") {
  hdrp_experiment* exp = nullptr;
  REQUIRE(hdrp_experiment_create_default(&exp) == HDRP_OK);
  CHECK(hdrp_experiment_set(exp, "optimizer.eta", "0.25") == HDRP_OK);
  CHECK(hdrp_experiment_set(exp, "optimizer.eta", "-1") == HDRP_ERR_CONFIG);
  char* json = nullptr;
  REQUIRE(hdrp_experiment_resolved(exp, &json) == HDRP_OK);
  CHECK(take(json).find("\"eta\": 0.25") != std::string::npos);
  hdrp_experiment_free(exp);

  // Several overrides validated together.
  const char* sets[] = {"data.dim=8", "network.layers.0.shape=[8]"};
  CHECK(hdrp_experiment_create(nullptr, sets, 1, &exp) == HDRP_ERR_CONFIG);
  REQUIRE(hdrp_experiment_create(nullptr, sets, 2, &exp) == HDRP_OK);
  hdrp_experiment_free(exp);
}

TEST_CASE("models through the C interface") {
  hdrp_experiment* exp = nullptr;
  const char* sets[] = {"output_dir=\"c_api_out\"", "optimizer.epochs=2",
                        "data.train_per_class=8", "data.test_per_class=4"};
  REQUIRE(hdrp_experiment_create(nullptr, sets, 4, &exp) == HDRP_OK);

  hdrp_model* model = nullptr;
  REQUIRE(hdrp_model_build(exp, &model) == HDRP_OK);
  CHECK(hdrp_model_input_size(model) == 16);
  CHECK(hdrp_model_num_classes(model) == 4);
  CHECK(hdrp_model_timesteps(model) == 4);
  std::vector<double> x(16, 0.5), logits(4);
  CHECK(hdrp_model_forward(model, x.data(), x.size(), logits.data(), logits.size()) == HDRP_OK);
  CHECK(hdrp_model_forward(model, x.data(), 3, logits.data(), logits.size()) == HDRP_ERR_SHAPE);
  CHECK(hdrp_model_forward(model, x.data(), x.size(), logits.data(), 2) == HDRP_ERR_SHAPE);
  std::size_t label = 99;
  CHECK(hdrp_model_predict(model, x.data(), x.size(), &label) == HDRP_OK);
  CHECK(label < 4);
  CHECK(hdrp_model_save(model, "c_api_model.bin") == HDRP_OK);

  hdrp_model* back = nullptr;
  REQUIRE(hdrp_model_load(exp, "c_api_model.bin", &back) == HDRP_OK);
  std::vector<double> again(4);
  CHECK(hdrp_model_forward(back, x.data(), x.size(), again.data(), again.size()) == HDRP_OK);
  CHECK(again == logits);
  CHECK(hdrp_model_load(exp, "missing.bin", &back) == HDRP_ERR_IO);
  hdrp_model_free(back);
  hdrp_model_free(model);

  char* report = nullptr;
  CHECK(hdrp_run(exp, "train", &report) == HDRP_OK);
  CHECK(take(report).find("\"final\"") != std::string::npos);
  CHECK(hdrp_run(exp, "eval", nullptr) == HDRP_OK);
  CHECK(hdrp_run(exp, "launch", nullptr) == HDRP_ERR_CONFIG);
  CHECK(hdrp_experiment_set(exp, "grad_check.corrupt", "true") == HDRP_OK);
  CHECK(hdrp_run(exp, "grad-check", &report) == HDRP_ERR_VALIDATION);
  CHECK(take(report).find("\"variants\"") != std::string::npos);
  hdrp_experiment_free(exp);
}

TEST_CASE("SOP energy") {
  CHECK(hdrp_sop_energy_uj(128.27e6, 8.25e6, 4.6, 0.9) == doctest::Approx(153.393));
}
