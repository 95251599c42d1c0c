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

#include "hdrp/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "hdrp/errors.hpp"
#include "hdrp/rng.hpp"

namespace hdrp {

void LossConfig::validate() const {
  if (!(lambda >= 0.0)) throw ConfigError("loss.lambda must be >= 0");
  if (!(gamma > 0.0)) throw ConfigError("loss.gamma must be > 0");
}

double OptimizerConfig::eta_at(std::size_t epoch) const {
  if (schedule == Schedule::kConstant) return eta;
  return eta * std::pow(step_factor, static_cast<double>(epoch / step_epochs));
}

void OptimizerConfig::validate() const {
  if (!(eta > 0.0)) throw ConfigError("optimizer.eta must be > 0");
  if (batch_size == 0) throw ConfigError("optimizer.batch_size must be >= 1");
  if (schedule == Schedule::kStep) {
    if (step_epochs == 0) throw ConfigError("optimizer.step_epochs must be >= 1");
    if (!(step_factor > 0.0 && step_factor <= 1.0)) {
      throw ConfigError("optimizer.step_factor must be in (0, 1]");
    }
  }
}

double surrogate_grad(double h, double u_th, double gamma) {
  return std::max(0.0, gamma - std::abs(h - u_th)) / (gamma * gamma);
}

Tensor surrogate_grad(const Tensor& h, double u_th, double gamma) {
  Tensor out(h.shape());
  for (std::size_t i = 0; i < h.size(); ++i) out[i] = surrogate_grad(h[i], u_th, gamma);
  return out;
}

namespace {

void check_label(const Tensor& logits, std::size_t label) {
  if (label >= logits.size()) {
    throw DataError("label " + std::to_string(label) + " outside [0, " +
                    std::to_string(logits.size()) + ")");
  }
}

double log_sum_exp(const Tensor& z) {
  const double m = max(z);
  double s = 0.0;
  for (double v : z.data()) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace

double cross_entropy(const Tensor& logits, std::size_t label) {
  check_label(logits, label);
  return log_sum_exp(logits) - logits[label];
}

Tensor cross_entropy_grad(const Tensor& logits, std::size_t label) {
  check_label(logits, label);
  const double lse = log_sum_exp(logits);
  Tensor g(logits.shape());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::exp(logits[i] - lse);
  g[label] -= 1.0;
  return g;
}

double l2_penalty(const ParamStore& params, double lambda) {
  double s = 0.0;
  for (const auto& p : params.values) {
    for (const Tensor* t : {&p.weights, &p.bias, &p.gain})
      for (double v : t->data()) s += v * v;
  }
  return 0.5 * lambda * s;
}

double loss(std::span<const Tensor> logits, std::span<const std::size_t> labels,
            const ParamStore& params, const LossConfig& cfg) {
  if (logits.size() != labels.size() || logits.empty()) {
    throw DataError("loss needs one label per logits row");
  }
  double ce = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) ce += cross_entropy(logits[i], labels[i]);
  return ce / static_cast<double>(logits.size()) + l2_penalty(params, cfg.lambda);
}

// ---- backward ----------------------------------------------------------------

namespace {

struct TauPartials {
  double d_s = 0.0;
  double d_k = 0.0;
  double d_prev = 0.0;
};

TauPartials tau_partials(RefractoryMode mode, const NeuronParams& p,
                         const RefractoryConfig& cfg, double k, double s,
                         double tau_prev) {
  TauPartials d;
  switch (mode) {
    case RefractoryMode::kHdrp:
      d.d_s = k * p.tau_refL + p.tau_ref0;
      d.d_k = tau_prev + s * p.tau_refL;
      d.d_prev = k;
      break;
    case RefractoryMode::kRelativeFixedDecay:
      d.d_s = cfg.fixed_decay * p.tau_refL + p.tau_ref0;
      d.d_prev = cfg.fixed_decay;
      break;
    case RefractoryMode::kRelativeNoHistory:
      d.d_s = k * p.tau_refL + p.tau_ref0;
      d.d_k = s * p.tau_refL;
      break;
    case RefractoryMode::kNone:
    case RefractoryMode::kAbsolute:
      break;
  }
  return d;
}

Tensor dense_input_grad(const Tensor& w, const Tensor& g, const Shape& in_shape) {
  const std::size_t out = w.dim(0), in = w.dim(1);
  Tensor d(in_shape);
  for (std::size_t o = 0; o < out; ++o) {
    const double go = g[o];
    if (go == 0.0) continue;
    for (std::size_t i = 0; i < in; ++i) d[i] += w[o * in + i] * go;
  }
  return d;
}

void dense_param_grad(const Tensor& g, const Tensor& x, double scale, ParamTensors& grad) {
  const std::size_t out = g.size(), in = x.size();
  for (std::size_t o = 0; o < out; ++o) {
    const double go = g[o] * scale;
    grad.bias[o] += go;
    if (go == 0.0) continue;
    for (std::size_t i = 0; i < in; ++i) grad.weights[o * in + i] += go * x[i];
  }
}

}  // namespace

void backward(const Network& net, const ParamStore& params, const ForwardResult& forward,
              const Tensor& logits_grad, const BackwardOptions& options, Gradients& grads) {
  if (!forward.trace) throw ContractError("backward needs a training-mode forward trace");
  const ForwardTrace& tr = *forward.trace;
  const std::size_t T = tr.timesteps;
  if (T == 0 || tr.readout_inputs.size() != T || tr.layers.size() != net.num_spiking()) {
    throw ContractError("forward trace does not cover the network over T steps");
  }
  if (logits_grad.size() != net.num_classes()) throw ShapeError("logits gradient size");
  if (grads.size() != params.values.size()) throw ShapeError("gradient store does not match");
  if (!(options.gamma > 0.0)) throw ParameterError("surrogate gamma must be > 0");

  const auto& stages = net.stages();
  const double inv_t = 1.0 / static_cast<double>(T);

  // Readout: logits = mean_t (W x_t + b).
  const Stage& ro = stages.back();
  const ParamTensors& pro = params.values[ro.param_index];
  std::vector<Tensor> delta(T);  // gradient of the signal entering stage j
  for (std::size_t t = 0; t < T; ++t) {
    dense_param_grad(logits_grad, tr.readout_inputs[t], inv_t, grads[ro.param_index]);
    delta[t] = scale(dense_input_grad(pro.weights, logits_grad, ro.in_shape), inv_t);
  }

  for (std::size_t j = stages.size() - 2; j >= 1; --j) {
    const Stage& st = stages[j];
    const bool need_input_grad = j > 1;
    switch (st.spec.kind) {
      case LayerKind::kFlatten:
        for (auto& d : delta) d = d.reshaped(st.in_shape);
        break;
      case LayerKind::kAvgPool2d:
        for (auto& d : delta) d = avgpool2d_grad(d, st.in_shape, st.spec.kernel, st.spec.stride);
        break;
      case LayerKind::kDense:
      case LayerKind::kConv2d: {
        const std::size_t l = st.spiking_index;
        const auto& steps = tr.layers[l];
        if (steps.size() != T) throw ContractError("layer trace does not cover T steps");
        const NeuronParams np = net.live_params(l, params);
        const RefractoryConfig& cfg = st.spec.refractory;
        const DerivativeBounds& b = net.bounds(l);
        const ParamTensors& p = params.values[st.param_index];
        ParamTensors& g = grads[st.param_index];
        const std::size_t n = num_elements(st.out_shape);
        const std::size_t group = n / b.up_min.size();
        const bool kernel = uses_kernel(cfg.mode);
        const bool normalized = uses_normalization(cfg.mode) && !options.detach_normalization;

        std::vector<double> u_bar(n, 0.0), tau_bar(n, 0.0);
        double a_bar = 0.0;
        for (std::size_t t = T; t-- > 0;) {
          const LayerStep& r = steps[t];
          Tensor drive_grad(st.out_shape);
          for (std::size_t i = 0; i < n; ++i) {
            const std::size_t unit = i / group;
            const double h = r.h[i], s = r.s[i], tau_prev = r.tau_prev[i];
            const double sig = r.suppressed[i] != 0.0 ? 0.0 : surrogate_grad(h, np.u_th, options.gamma);
            const double k = std::clamp(r.k_raw[i], 0.0, 1.0);
            TauPartials dt;
            if (r.tau_capped[i] == 0.0) dt = tau_partials(cfg.mode, np, cfg, k, s, tau_prev);
            double dk_dup = 0.0;
            if (normalized && r.k_raw[i] > 0.0 && r.k_raw[i] < 1.0) {
              dk_dup = 1.0 / (b.up_max[unit] - b.up_min[unit]);
            }

            const double s_bar = delta[t][i] + u_bar[i] * (np.u_rest - h) + tau_bar[i] * dt.d_s;
            const double h_bar = s_bar * sig + u_bar[i] * (1.0 - s);
            const double up_bar = h_bar + tau_bar[i] * dt.d_k * dk_dup;
            drive_grad[i] = up_bar;
            u_bar[i] = h_bar - up_bar / np.tau_m;
            tau_bar[i] *= dt.d_prev;
            if (kernel) {
              const double th = std::tanh(np.a_gain * tau_prev);
              const double sech2 = 1.0 - th * th;
              tau_bar[i] -= up_bar * np.u_th * np.a_gain * sech2;
              a_bar -= up_bar * np.u_th * tau_prev * sech2;
            }
          }

          if (st.spec.kind == LayerKind::kDense) {
            dense_param_grad(drive_grad, r.input, 1.0, g);
            if (need_input_grad) delta[t] = dense_input_grad(p.weights, drive_grad, st.in_shape);
          } else {
            g.weights = add(g.weights, conv2d_kernel_grad(drive_grad, r.input, p.weights.shape(),
                                                          st.spec.stride, st.spec.padding));
            const std::size_t plane = n / st.spec.channels;
            for (std::size_t o = 0; o < st.spec.channels; ++o)
              for (std::size_t q = 0; q < plane; ++q) g.bias[o] += drive_grad[o * plane + q];
            if (need_input_grad) {
              delta[t] = conv2d_input_grad(drive_grad, p.weights, st.in_shape, st.spec.stride,
                                           st.spec.padding);
            }
          }
        }
        g.gain[0] += a_bar;
        break;
      }
      case LayerKind::kEncoder:
      case LayerKind::kReadout:
        break;
    }
    if (j == 1) break;
  }
}

// ---- batches and updates -------------------------------------------------------

void parallel_for(std::size_t n, std::size_t threads,
                  const std::function<void(std::size_t)>& f) {
  threads = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        const std::size_t end = std::min(n, (w + 1) * chunk);
        for (std::size_t i = w * chunk; i < end; ++i) f(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

namespace {

void add_into(Gradients& acc, const Gradients& g, double s) {
  for (std::size_t i = 0; i < acc.size(); ++i) {
    auto axpy = [s](Tensor& a, const Tensor& b) {
      for (std::size_t k = 0; k < a.size(); ++k) a[k] += s * b[k];
    };
    axpy(acc[i].weights, g[i].weights);
    axpy(acc[i].bias, g[i].bias);
    axpy(acc[i].gain, g[i].gain);
  }
}

void zero(Gradients& g) {
  for (auto& p : g) {
    p.weights.fill(0.0);
    p.bias.fill(0.0);
    p.gain.fill(0.0);
  }
}

}  // namespace

BatchStats batch_gradient(const Network& net, const ParamStore& params, const Dataset& data,
                          std::span<const std::size_t> indices, const BackwardOptions& options,
                          Gradients& grads, const SpikeModel& spike, std::size_t threads) {
  if (indices.empty()) throw DataError("empty batch");
  const std::size_t m = indices.size();
  std::vector<Gradients> per(m, params.zeros_like());
  std::vector<double> losses(m);
  std::vector<char> correct(m);
  parallel_for(m, threads, [&](std::size_t b) {
    const std::size_t i = indices[b];
    const Tensor x = data.sample(i);
    ForwardResult fwd = net.forward(params, x, ForwardMode::kTraining, spike);
    losses[b] = cross_entropy(fwd.logits, data.labels[i]);
    correct[b] = predict(fwd.logits) == data.labels[i];
    backward(net, params, fwd, cross_entropy_grad(fwd.logits, data.labels[i]), options, per[b]);
  });
  if (grads.size() != params.values.size()) grads = params.zeros_like();
  zero(grads);
  BatchStats stats;
  const double inv = 1.0 / static_cast<double>(m);
  for (std::size_t b = 0; b < m; ++b) {
    add_into(grads, per[b], inv);
    stats.loss_sum += losses[b];
    stats.correct += correct[b] ? 1 : 0;
  }
  return stats;
}

void sgd_step(ParamStore& params, const Gradients& grads, double eta, double lambda,
              Network* net) {
  if (grads.size() != params.values.size()) throw ShapeError("gradient store does not match");
  for (std::size_t i = 0; i < params.values.size(); ++i) {
    auto update = [&](Tensor& v, const Tensor& g) {
      if (v.shape() != g.shape()) throw ShapeError("gradient shape mismatch");
      for (std::size_t k = 0; k < v.size(); ++k) v[k] -= eta * g[k] + eta * lambda * v[k];
    };
    update(params.values[i].weights, grads[i].weights);
    update(params.values[i].bias, grads[i].bias);
    update(params.values[i].gain, grads[i].gain);
    for (auto& a : params.values[i].gain.data()) a = std::max(a, 1e-6);
  }
  if (net) net->refresh_bounds(params);
}

double central_difference(const std::function<double(double)>& f, double x, double h) {
  if (!(h > 0.0)) throw ParameterError("finite-difference step must be > 0");
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

// ---- finite-difference oracle --------------------------------------------------

namespace {

// One byte per neuron-step: surrogate segment, clamp side, cap and block flags.
void append_signature(const ForwardTrace& tr, const Network& net, const ParamStore& params,
                      double gamma, std::vector<std::uint8_t>& sig) {
  for (std::size_t l = 0; l < tr.layers.size(); ++l) {
    const double u_th = net.live_params(l, params).u_th;
    for (const LayerStep& r : tr.layers[l]) {
      for (std::size_t i = 0; i < r.h.size(); ++i) {
        const double x = r.h[i] - u_th;
        std::uint8_t seg = x < -gamma ? 0 : x < 0.0 ? 1 : x < gamma ? 2 : 3;
        const double k = r.k_raw[i];
        const std::uint8_t side = k <= 0.0 ? 0 : k >= 1.0 ? 2 : 1;
        sig.push_back(static_cast<std::uint8_t>(seg | side << 2 |
                                                (r.tau_capped[i] != 0.0) << 4 |
                                                (r.suppressed[i] != 0.0) << 5));
      }
    }
  }
}

struct Probe {
  double loss = 0.0;
  std::vector<std::uint8_t> signature;
};

Probe probe(const Network& net, const ParamStore& params, const Dataset& batch,
            const LossConfig& cfg) {
  const SpikeModel spike{SpikeFunction::kRelaxed, cfg.gamma};
  Probe p;
  double ce = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ForwardResult fwd = net.forward(params, batch.sample(i), ForwardMode::kTraining, spike);
    ce += cross_entropy(fwd.logits, batch.labels[i]);
    append_signature(*fwd.trace, net, params, cfg.gamma, p.signature);
  }
  p.loss = ce / static_cast<double>(batch.size()) + l2_penalty(params, cfg.lambda);
  return p;
}

}  // namespace

GradReport finite_diff_oracle(const Network& net, const ParamStore& params,
                              const Dataset& batch, const LossConfig& loss_cfg,
                              const GradCheckOptions& options) {
  if (!(options.h > 0.0)) throw ParameterError("finite-difference step must be > 0");
  loss_cfg.validate();
  batch.validate();

  Gradients analytic = params.zeros_like();
  std::vector<std::size_t> idx(batch.size());
  std::iota(idx.begin(), idx.end(), 0);
  const SpikeModel spike{SpikeFunction::kRelaxed, loss_cfg.gamma};
  const BackwardOptions bopt{loss_cfg.gamma, options.detach_normalization};
  batch_gradient(net, params, batch, idx, bopt, analytic, spike, 1);
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const auto& v = params.values[i];
    auto& g = analytic[i];
    for (std::size_t k = 0; k < g.weights.size(); ++k) g.weights[k] += loss_cfg.lambda * v.weights[k];
    for (std::size_t k = 0; k < g.bias.size(); ++k) g.bias[k] += loss_cfg.lambda * v.bias[k];
    for (std::size_t k = 0; k < g.gain.size(); ++k) g.gain[k] += loss_cfg.lambda * v.gain[k];
  }
  if (options.corrupt) options.corrupt(analytic);

  const std::vector<std::uint8_t> base = probe(net, params, batch, loss_cfg).signature;
  ParamStore work = params;
  GradReport report;
  report.detach_normalization = options.detach_normalization;
  const double h = options.h;
  for_each_param(work, [&](std::size_t layer, const std::string& name, Tensor& value, Tensor&) {
    const Tensor* grad = nullptr;
    const ParamTensors& a = analytic[layer];
    if (name.ends_with(".weights")) grad = &a.weights;
    else if (name.ends_with(".bias")) grad = &a.bias;
    else grad = &a.gain;
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double theta = value[k];
      bool kink = false;
      auto at = [&](double offset) {
        value[k] = theta + offset;
        Probe p = probe(net, work, batch, loss_cfg);
        kink = kink || p.signature != base;
        return p.loss;
      };
      const double plus = at(h), minus = at(-h);
      at(2.0 * h);
      at(-2.0 * h);
      value[k] = theta;

      GradEntry e;
      e.name = name;
      e.index = k;
      e.analytic = (*grad)[k];
      e.numeric = (plus - minus) / (2.0 * h);
      e.abs_err = std::abs(e.analytic - e.numeric);
      e.rel_err = e.abs_err /
                  std::max({std::abs(e.analytic), std::abs(e.numeric), options.floor});
      e.excluded = kink;
      if (kink) {
        ++report.excluded;
      } else {
        ++report.checked;
        if (e.rel_err < options.tolerance) ++report.within_tolerance;
        report.max_rel_err = std::max(report.max_rel_err, e.rel_err);
        report.max_abs_err = std::max(report.max_abs_err, e.abs_err);
      }
      report.entries.push_back(std::move(e));
    }
  });
  report.passed = report.checked > 0 && report.max_rel_err < options.tolerance;
  return report;
}

// ---- evaluation and training -----------------------------------------------------

EvalResult evaluate(const Network& net, const ParamStore& params, const Dataset& data,
                    std::size_t threads, const MacConvention& macs) {
  data.validate();
  const std::size_t n = data.size();
  std::vector<std::size_t> pred(n);
  std::vector<double> ce(n);
  std::vector<OpsReport> ops(n);
  std::vector<std::vector<double>> spikes(n);
  parallel_for(n, threads, [&](std::size_t i) {
    ForwardResult fwd = net.forward(params, data.sample(i));
    pred[i] = predict(fwd.logits);
    ce[i] = cross_entropy(fwd.logits, data.labels[i]);
    ops[i] = count_ops(net, fwd.spikes, net.timesteps(), macs);
  });
  EvalResult r;
  r.total = n;
  for (std::size_t i = 0; i < n; ++i) {
    r.correct += pred[i] == data.labels[i] ? 1 : 0;
    r.loss += ce[i];
    r.ops.accumulate(ops[i]);
  }
  r.accuracy = static_cast<double>(r.correct) / static_cast<double>(n);
  r.loss /= static_cast<double>(n);
  for (std::size_t l = 0; l < net.num_spiking(); ++l) {
    const double slots = static_cast<double>(r.ops.layers[l + 1].neurons) *
                         static_cast<double>(net.timesteps()) * static_cast<double>(n);
    r.firing_rate.push_back(static_cast<double>(r.ops.layers[l + 1].spikes) / slots);
  }
  r.predictions = std::move(pred);
  return r;
}

std::vector<EpochLog> train(Network& net, ParamStore& params, const Dataset& train_set,
                            const Dataset& test_set, const TrainOptions& options, Rng& rng) {
  options.loss.validate();
  options.optimizer.validate();
  train_set.validate();
  std::vector<EpochLog> logs;
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  Gradients grads = params.zeros_like();
  const BackwardOptions bopt{options.loss.gamma, options.backward.detach_normalization};
  const std::size_t bs = options.optimizer.batch_size;

  for (std::size_t epoch = 0; epoch < options.optimizer.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    rng.shuffle(std::span<std::size_t>(order));
    const double eta = options.optimizer.eta_at(epoch);
    double ce = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < order.size(); b += bs) {
      const std::size_t e = std::min(order.size(), b + bs);
      std::span<const std::size_t> idx(order.data() + b, e - b);
      BatchStats st = batch_gradient(net, params, train_set, idx, bopt, grads, {}, options.threads);
      ce += st.loss_sum;
      correct += st.correct;
      sgd_step(params, grads, eta, options.loss.lambda, &net);
    }
    EpochLog log;
    log.epoch = epoch + 1;
    log.eta = eta;
    log.loss = ce / static_cast<double>(order.size()) + l2_penalty(params, options.loss.lambda);
    log.train_acc = static_cast<double>(correct) / static_cast<double>(order.size());
    const EvalResult ev = evaluate(net, params, test_set, options.threads);
    log.test_acc = ev.accuracy;
    log.firing_rate = ev.firing_rate;
    log.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (options.on_epoch) options.on_epoch(log);
    logs.push_back(std::move(log));
  }
  return logs;
}

}  // namespace hdrp
