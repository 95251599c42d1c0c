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

// Spatio-temporal backpropagation for the networks in network.hpp.
//
// Loss: mean softmax cross-entropy over the batch plus (lambda / 2) * sum of
// squared parameters (weights, biases and kernel gains).
//
// backward() is reverse-mode over the exact forward recurrence. Per spiking
// layer, walking t = T..1 with adjoints dU (of U_t) and dTau (of tau_t):
//
//   dS  = dS_spatial + dU (u_rest - H) + dTau * dtau/dS
//   dH  = dS * sg'(H) + dU (1 - S)
//   dU' = dH + dTau * dtau/dk * dk/dU'
//   dI  = dU'                                 (also the drive gradient)
//   dU_prev   = dH - dU' / tau_m
//   dTau_prev = dTau * dtau/dtau_prev - dI * u_th A (1 - tanh^2(A tau_prev))
//   dA       += -dI * u_th tau_prev (1 - tanh^2(A tau_prev))
//
// sg' is the triangular surrogate max(0, gamma - |H - u_th|) / gamma^2, zero
// while absolute refractoriness blocks the spike. dk/dU' is
// 1 / (U'_max - U'_min) inside the clamp and 0 outside it; every tau partial
// is 0 while the tau_ref_max cap is active. Derivative bounds are treated as
// constants of the forward pass.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "hdrp/data.hpp"
#include "hdrp/energy.hpp"
#include "hdrp/network.hpp"

namespace hdrp {

class Rng;

struct LossConfig {
  double lambda = 1e-4;  // L2 coefficient, >= 0
  double gamma = 1.0;    // surrogate half-width, > 0

  void validate() const;
};

enum class Schedule { kConstant, kStep };

struct OptimizerConfig {
  double eta = 0.5;
  std::size_t epochs = 40;
  std::size_t batch_size = 16;
  Schedule schedule = Schedule::kConstant;
  std::size_t step_epochs = 20;  // step schedule: eta *= step_factor every step_epochs
  double step_factor = 0.5;

  // Learning rate for a 0-based epoch.
  double eta_at(std::size_t epoch) const;
  void validate() const;
};

struct BackwardOptions {
  double gamma = 1.0;
  // Drops the dk/dU' path (the refractory clock's dependence on the
  // normalized derivative).
  bool detach_normalization = false;
};

double surrogate_grad(double h, double u_th, double gamma);
Tensor surrogate_grad(const Tensor& h, double u_th, double gamma);

// Softmax cross-entropy of one sample. Throws DataError for a bad label.
double cross_entropy(const Tensor& logits, std::size_t label);
// Gradient of cross_entropy with respect to the logits: softmax - onehot.
Tensor cross_entropy_grad(const Tensor& logits, std::size_t label);
// (lambda / 2) * sum of squares over every parameter.
double l2_penalty(const ParamStore& params, double lambda);
// Mean cross-entropy over the batch plus the L2 penalty.
double loss(std::span<const Tensor> logits, std::span<const std::size_t> labels,
            const ParamStore& params, const LossConfig& cfg);

// Accumulates the parameter gradients of a scalar whose gradient with respect
// to the logits is 'logits_grad' into 'grads'. Throws ContractError when the
// forward result carries no training trace.
void backward(const Network& net, const ParamStore& params,
              const ForwardResult& forward, const Tensor& logits_grad,
              const BackwardOptions& options, Gradients& grads);

// Runs f(i) for i in [0, n) on up to 'threads' workers over contiguous blocks.
void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& f);

struct BatchStats {
  double loss_sum = 0.0;  // summed cross-entropy
  std::size_t correct = 0;
};

// Gradient of the mean cross-entropy over data[indices] (L2 excluded),
// written into grads. Per-sample gradients are reduced in index order, so
// the result does not depend on the thread count.
BatchStats batch_gradient(const Network& net, const ParamStore& params,
                          const Dataset& data, std::span<const std::size_t> indices,
                          const BackwardOptions& options, Gradients& grads,
                          const SpikeModel& spike = {}, std::size_t threads = 1);

// theta <- theta - eta * grad - eta * lambda * theta, then gains clamped to
// >= 1e-6 and, when net is given, bounds recomputed from the new weights.
void sgd_step(ParamStore& params, const Gradients& grads, double eta,
              double lambda, Network* net = nullptr);

// (f(x + h) - f(x - h)) / (2h).
double central_difference(const std::function<double(double)>& f, double x, double h);

struct GradCheckOptions {
  double h = 1e-5;
  double tolerance = 1e-4;
  double floor = 1e-6;  // relative-error denominator floor
  bool detach_normalization = false;
  // Test hook applied to the analytic gradients before comparison.
  std::function<void(Gradients&)> corrupt;
};

struct GradEntry {
  std::string name;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double abs_err = 0.0;
  double rel_err = 0.0;
  bool excluded = false;  // a non-smooth point lies within 2h
};

struct GradReport {
  std::vector<GradEntry> entries;
  std::size_t checked = 0;
  std::size_t excluded = 0;
  std::size_t within_tolerance = 0;
  double max_rel_err = 0.0;  // over checked entries
  double max_abs_err = 0.0;
  bool detach_normalization = false;
  bool passed = false;  // max_rel_err < tolerance and at least one entry checked
};

// Central differences of the full loss (relaxed spike function, bounds held
// fixed) against backward() + lambda * theta for every scalar parameter.
// Parameters whose perturbation by +-h or +-2h changes any neuron's
// surrogate segment, clamp state, cap state or blocking state are excluded.
GradReport finite_diff_oracle(const Network& net, const ParamStore& params,
                              const Dataset& batch, const LossConfig& loss_cfg,
                              const GradCheckOptions& options);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double eta = 0.0;
  double loss = 0.0;      // mean training cross-entropy over the epoch + L2
  double train_acc = 0.0; // on the batches as they were trained
  double test_acc = 0.0;
  std::vector<double> firing_rate;  // per spiking layer, on the test set
  double wall_ms = 0.0;
};

struct EvalResult {
  std::size_t total = 0;
  std::size_t correct = 0;
  double accuracy = 0.0;
  double loss = 0.0;  // mean cross-entropy
  std::vector<double> firing_rate;
  OpsReport ops;
  std::vector<std::size_t> predictions;
};

EvalResult evaluate(const Network& net, const ParamStore& params, const Dataset& data,
                    std::size_t threads = 1, const MacConvention& macs = {});

struct TrainOptions {
  LossConfig loss;
  OptimizerConfig optimizer;
  BackwardOptions backward;
  std::size_t threads = 1;
  std::function<void(const EpochLog&)> on_epoch;
};

// Shuffled mini-batch SGD. The shuffle draws from rng; nothing else does.
std::vector<EpochLog> train(Network& net, ParamStore& params, const Dataset& train_set,
                            const Dataset& test_set, const TrainOptions& options, Rng& rng);

}  // namespace hdrp
