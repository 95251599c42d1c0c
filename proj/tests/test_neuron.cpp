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

#include <cmath>

#include <doctest.h>

#include "hdrp/errors.hpp"
#include "hdrp/neuron.hpp"
#include "hdrp/rng.hpp"
#include "test_util.hpp"

using namespace hdrp;

TEST_CASE("trace fixture, two neurons over three steps") {
  const auto fx = test::load_fixture("trace_2neuron.json");
  const NeuronParams p;
  for (const auto& c : fx["cases"]) {
    RefractoryConfig cfg;
    cfg.mode = parse_refractory_mode(c["mode"].get<std::string>());
    cfg.fixed_decay = fx["fixed_decay"].get<double>();
    CAPTURE(c["mode"].get<std::string>());
    double u[2] = {p.u_rest, p.u_rest}, tau[2] = {0.0, 0.0};
    for (const auto& rec : c["steps"]) {
      const std::size_t t = rec["t"].get<std::size_t>(), n = rec["n"].get<std::size_t>();
      const double drive = fx["drives"][t - 1][n].get<double>();
      const auto bnd = fx["up_bounds"][n];
      const NeuronStep st = step_neuron(u[n], tau[n], drive, p, bnd[0].get<double>(),
                                        bnd[1].get<double>(), cfg);
      CHECK(st.current == doctest::Approx(rec["I"].get<double>()).epsilon(1e-12));
      CHECK(st.u_prime == doctest::Approx(rec["Up"].get<double>()).epsilon(1e-12));
      CHECK(st.h == doctest::Approx(rec["H"].get<double>()).epsilon(1e-12));
      CHECK(st.s == rec["S"].get<double>());
      CHECK(st.u == doctest::Approx(rec["U"].get<double>()).epsilon(1e-12));
      CHECK(st.tau_ref == doctest::Approx(rec["tau"].get<double>()).epsilon(1e-12));
      u[n] = st.u;
      tau[n] = st.tau_ref;
    }
  }
}

TEST_CASE("layer step agrees with the scalar step") {
  const NeuronParams p;
  const Tensor drive = Tensor::vector({1.3, 0.2, -0.4});
  DerivativeBounds b = derivative_bounds(Tensor::vector({-1, -1, -1}), Tensor::vector({2, 2, 2}), p,
                                         kernel_sup(p, p.a_gain, RefractoryMode::kHdrp));
  LayerState s = LayerState::initial({3}, p);
  RefractoryConfig cfg;
  for (int t = 0; t < 4; ++t) {
    const LayerState next = hdrp_step(s, drive, p, b, cfg);
    for (std::size_t i = 0; i < 3; ++i) {
      const NeuronStep st = step_neuron(s.u[i], s.tau_ref[i], drive[i], p, b.up_min[i], b.up_max[i], cfg);
      CHECK(next.u[i] == st.u);
      CHECK(next.tau_ref[i] == st.tau_ref);
      CHECK(next.s[i] == st.s);
    }
    s = next;
  }
  CHECK_THROWS_AS(hdrp_step(s, Tensor::vector({1, 2}), p, b, cfg), ShapeError);
}

TEST_CASE("mode none and zero refractory constants reduce to LIF bit-exactly") {
  NeuronParams p;
  Rng rng(5);
  NeuronParams zero = p;
  zero.tau_ref0 = 0.0;
  zero.tau_refL = 0.0;
  const Tensor i_min = Tensor::vector({-2, -2, -2, -2}), i_max = Tensor::vector({3, 3, 3, 3});
  const DerivativeBounds b = derivative_bounds(i_min, i_max, p, kernel_sup(p, 1.0, RefractoryMode::kHdrp));
  RefractoryConfig none{RefractoryMode::kNone};
  RefractoryConfig hdrp{RefractoryMode::kHdrp};
  LayerState lif = LayerState::initial({4}, p), a = lif, c = lif;
  for (int t = 0; t < 20; ++t) {
    const Tensor x = rng_uniform(rng, {4}, -1.0, 2.5);
    lif = lif_step(lif, x, p);
    a = hdrp_step(a, x, p, b, none);
    c = hdrp_step(c, x, zero, b, hdrp);
    CHECK(a.u == lif.u);
    CHECK(a.s == lif.s);
    CHECK(c.u == lif.u);
    CHECK(c.s == lif.s);
    CHECK(max(c.tau_ref) == 0.0);
  }
}

TEST_CASE("refractory kernel properties") {
  // Gains up to 2 keep tanh(A tau) resolvable from 1 in double precision
  // over tau in [0, 6].
  Rng rng(17);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = rng.uniform(0.01, 2.0), u_th = rng.uniform(0.1, 3.0);
    CHECK(kernel_value(0.0, u_th, a) == 0.0);
    double prev = 0.0;
    for (int i = 1; i <= 1000; ++i) {
      const double tau = 6.0 * i / 1000.0;
      const double g = kernel_value(tau, u_th, a);
      REQUIRE(g > prev);
      REQUIRE(g < u_th);
      prev = g;
    }
  }
}

TEST_CASE("tau update forms coincide") {
  CHECK(tau_update_factored(0.3, 2.0, 1.0, 5.0, 1.0) == doctest::Approx(0.3 * 7.0 + 1.0));
  CHECK(tau_update_expanded(0.3, 2.0, 1.0, 5.0, 1.0) == doctest::Approx(0.6 + 1.5 + 1.0));
  Rng rng(1);
  CHECK(check_tau_update_forms(rng, 1000) <= 1e-12);
}

TEST_CASE("derivative bounds") {
  NeuronParams p;
  const auto [lo, hi] = current_bounds(Tensor::matrix({{0.5, -0.25, 1.0}, {-1.0, -1.0, 0.0}}),
                                       Tensor::vector({0.1, 0.2}));
  CHECK(lo[0] == doctest::Approx(-0.15));
  CHECK(hi[0] == doctest::Approx(1.6));
  CHECK(lo[1] == doctest::Approx(-1.8));
  CHECK(hi[1] == doctest::Approx(0.2));
  const DerivativeBounds b = derivative_bounds(lo, hi, p, 0.5);
  // unit 0: floor = -0.65, u_min = -1.3
  CHECK(b.u_min[0] == doctest::Approx(-1.3));
  CHECK(b.up_max[0] == doctest::Approx(0.65 + 1.6));
  CHECK(b.up_min[0] == doctest::Approx(-0.5 - 0.65));
  // A positive floor leaves u_min at rest.
  const DerivativeBounds pos = derivative_bounds(Tensor::vector({0.5}), Tensor::vector({1.0}), p);
  CHECK(pos.u_min[0] == 0.0);
  CHECK_NOTHROW(require_nondegenerate(b));
  CHECK_THROWS_AS(current_bounds(Tensor::vector({1}), Tensor::vector({1})), ShapeError);
}

TEST_CASE("normalization clamps to the unit interval") {
  CHECK(normalize_raw(0.5, 0.0, 2.0) == 0.25);
  CHECK(normalize_clamped(3.0, 0.0, 2.0) == 1.0);
  CHECK(normalize_clamped(-3.0, 0.0, 2.0) == 0.0);
  DerivativeBounds b;
  b.up_min = Tensor::vector({0.0, -1.0});
  b.up_max = Tensor::vector({1.0, 1.0});
  const Tensor k = normalize_derivative(Tensor::vector({0.5, 2.0, 0.0, -2.0}), b);
  CHECK(k == Tensor::vector({0.5, 1.0, 0.5, 0.0}));
}

TEST_CASE("absolute refractoriness blocks spikes for the configured length") {
  NeuronParams p;
  RefractoryConfig cfg{RefractoryMode::kAbsolute, 0.5, 2};
  double u = 0.0, tau = 0.0;
  std::vector<double> spikes;
  for (int t = 0; t < 6; ++t) {
    const NeuronStep st = step_neuron(u, tau, 1.5, p, -1, 1, cfg);
    spikes.push_back(st.s);
    u = st.u;
    tau = st.tau_ref;
  }
  CHECK(spikes == std::vector<double>{1, 0, 0, 1, 0, 0});
}

TEST_CASE("the tau cap") {
  NeuronParams p;
  RefractoryConfig cfg{RefractoryMode::kRelativeFixedDecay, 1.0, 1};
  const NeuronStep st = step_neuron(0.0, 5.5, 10.0, p, -1, 1, cfg);
  CHECK(st.s == 1.0);
  CHECK(st.tau_capped);
  CHECK(st.tau_ref == p.tau_ref_max);
}

TEST_CASE("relaxed spike function") {
  SpikeModel m{SpikeFunction::kRelaxed, 1.0};
  CHECK(spike_value(-0.5, 1.0, m) == 0.0);
  CHECK(spike_value(1.0, 1.0, m) == 0.5);
  CHECK(spike_value(2.5, 1.0, m) == 1.0);
  CHECK(spike_value(0.5, 1.0, m) == doctest::Approx(0.125));
  CHECK(spike_value(1.0, 1.0, SpikeModel{}) == 1.0);
}

TEST_CASE("parameter validation") {
  NeuronParams p;
  CHECK_NOTHROW(p.validate());
  p.tau_m = 1.0;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  p = {};
  p.tau_ref0 = 3.0;
  p.tau_refL = 4.0;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  p = {};
  p.u_th = p.u_rest;
  CHECK_THROWS_AS(p.validate(), ParameterError);
  RefractoryConfig r;
  r.fixed_decay = 1.5;
  CHECK_THROWS_AS(r.validate(), ConfigError);
  CHECK_THROWS_AS(parse_refractory_mode("sometimes"), ConfigError);
  for (auto m : {RefractoryMode::kNone, RefractoryMode::kAbsolute, RefractoryMode::kRelativeNoHistory,
                 RefractoryMode::kRelativeFixedDecay, RefractoryMode::kHdrp}) {
    CHECK(parse_refractory_mode(to_string(m)) == m);
  }
}
