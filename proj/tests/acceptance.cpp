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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fixture_net.hpp"
#include "hdrp/energy.hpp"
#include "hdrp/errors.hpp"
#include "hdrp/experiment.hpp"
#include "hdrp/neuron.hpp"
#include "hdrp/rng.hpp"
#include "hdrp/training.hpp"
#include "lif_reference.hpp"

namespace fs = std::filesystem;
using namespace hdrp;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double budget_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

ExperimentConfig with(const fs::path& out, const std::vector<std::string>& sets) {
  nlohmann::json j = config_to_json(default_config());
  j["output_dir"] = out.string();
  for (const auto& s : sets) apply_override(j, s);
  return parse_config(j);
}

const std::vector<std::uint64_t> kSeeds = {1, 2, 3};

// ---- 1 ----
Outcome gradient_oracle(const fs::path& out) {
  const ExperimentConfig cfg = with(out / "grad", {});
  const CommandResult r = run_command(cfg, "grad-check");
  const auto& full = r.report["variants"][0];
  const std::size_t params = r.report["parameters"].get<std::size_t>();
  const double err = full["max_rel_err"].get<double>();
  const bool ok = full["passed"].get<bool>() && err < 1e-4 && params <= 200 &&
                  cfg.timesteps <= 4 && cfg.grad_check.hidden.size() == 2;
  return {ok, "max_rel_err=" + fmt("%.3g", err) + " params=" + std::to_string(params) +
                  " checked=" + std::to_string(full["checked"].get<std::size_t>()) +
                  " excluded=" + std::to_string(full["excluded"].get<std::size_t>()) +
                  " | detached variant max_rel_err=" +
                  fmt("%.3g", r.report["variants"][1]["max_rel_err"].get<double>())};
}

// ---- 2 ----
Outcome tau_identity() {
  Rng rng(2);
  double worst = 0.0;
  try {
    worst = check_tau_update_forms(rng, 10000, 1e-12);
  } catch (const ValidationError& e) {
    return {false, e.what()};
  }
  return {worst <= 1e-12, "max |diff|=" + fmt("%.3g", worst) + " over 10000 tuples"};
}

// ---- 3 ----
Outcome bound_soundness() {
  Rng rng(3);
  const RefractoryMode modes[] = {RefractoryMode::kNone, RefractoryMode::kRelativeNoHistory,
                                  RefractoryMode::kRelativeFixedDecay, RefractoryMode::kHdrp};
  std::size_t steps = 0, violations = 0, k_violations = 0, nets = 0;
  double worst = 0.0;
  while (steps < 100000) {
    NeuronParams np;
    np.tau_m = rng.uniform(1.2, 6.0);
    np.u_th = rng.uniform(0.3, 2.0);
    np.u_rest = rng.uniform(-0.5, 0.25) * np.u_th;
    np.tau_ref0 = rng.uniform(0.0, 2.0);
    np.tau_refL = rng.uniform(0.0, 4.0);
    np.tau_ref_max = np.tau_ref0 + np.tau_refL + rng.uniform(0.0, 2.0);
    np.a_gain = rng.uniform(0.1, 3.0);
    const RefractoryMode mode = modes[rng.uniform_index(4)];
    const std::size_t in = 2 + rng.uniform_index(6);
    std::vector<std::size_t> hidden(1 + rng.uniform_index(2));
    for (auto& h : hidden) h = 2 + rng.uniform_index(7);
    const std::size_t T = 2 + rng.uniform_index(7);
    NetworkSpec spec = test::dense_spec(in, hidden, 2, T, mode, np);
    for (auto& l : spec.layers) l.refractory.fixed_decay = rng.uniform();
    ParamStore params;
    Network net = Network::build(spec, rng, params);
    for (auto& v : params.values) {
      for (auto& w : v.weights.data()) w *= rng.uniform(0.5, 3.0);
      for (auto& b : v.bias.data()) b = rng.uniform(-1.0, 1.0);
    }
    net.refresh_bounds(params);
    ++nets;
    for (int sample = 0; sample < 4; ++sample) {
      const Tensor x = rng_uniform(rng, {in}, 0.0, 1.0);
      const ForwardResult fr = net.forward(params, x, ForwardMode::kTraining);
      for (std::size_t l = 0; l < net.num_spiking(); ++l) {
        const DerivativeBounds& b = net.bounds(l);
        for (const LayerStep& st : fr.trace->layers[l]) {
          for (std::size_t i = 0; i < st.u_prime.size(); ++i) {
            const double up = st.u_prime[i];
            const double lo = b.up_min[i], hi = b.up_max[i];
            const double excess = std::max(lo - up, up - hi);
            if (excess > 1e-12) {
              ++violations;
              worst = std::max(worst, excess);
            }
            const double k = normalize_clamped(up, lo, hi);
            if (!(k >= 0.0 && k <= 1.0)) ++k_violations;
            ++steps;
          }
        }
      }
    }
  }
  return {violations == 0 && k_violations == 0,
          std::to_string(steps) + " neuron-steps over " + std::to_string(nets) + " networks, " +
              std::to_string(violations) + " U' outside bounds (worst " + fmt("%.3g", worst) + "), " +
              std::to_string(k_violations) + " k outside [0,1]"};
}

// ---- 4 ----
Outcome lif_reduction() {
  double worst_grad = 0.0, worst_logit = 0.0;
  bool forward_exact = true;
  std::vector<Tensor> logits[2];
  for (bool zero_hdrp : {false, true}) {
    NeuronParams np;
    if (zero_hdrp) np.tau_ref0 = np.tau_refL = 0.0;
    const auto mode = zero_hdrp ? RefractoryMode::kHdrp : RefractoryMode::kNone;
    Rng init(41);
    ParamStore params;
    Network net = Network::build(test::dense_spec(8, {10, 7}, 4, 4, mode, np), init, params);
    for (auto& v : params.values)
      for (auto& b : v.bias.data()) b = 0.35;
    net.refresh_bounds(params);
    test::LifReference ref;
    for (const auto& v : params.values) {
      ref.w.push_back(test::to_mat(v.weights));
      ref.b.push_back(v.bias.values());
    }
    Rng rng(4);
    for (std::size_t trial = 0; trial < 20; ++trial) {
      const Tensor x = rng_uniform(rng, {8}, 0.0, 1.0);
      const std::size_t label = trial % 4;
      const ForwardResult fr = net.forward(params, x, ForwardMode::kTraining);
      const auto z = ref.logits(x.values(), 4);
      for (std::size_t c = 0; c < 4; ++c) worst_logit = std::max(worst_logit, std::abs(fr.logits[c] - z[c]));
      logits[zero_hdrp].push_back(fr.logits);
      // Bit-exact spikes against the baseline LIF layer step as well.
      {
        LayerState s = LayerState::initial({10}, np);
        for (std::size_t t = 0; t < 4; ++t) {
          Tensor drive = matmul(params.values[0].weights, x.reshaped({8, 1})).reshaped({10});
          drive = add(drive, params.values[0].bias);
          s = lif_step(s, drive, np);
          forward_exact &= s.s == fr.trace->layers[0][t].s && s.u == fr.trace->layers[0][t].u;
        }
      }
      Gradients g = params.zeros_like();
      backward(net, params, fr, cross_entropy_grad(fr.logits, label), BackwardOptions{}, g);
      ref.grad(x.values(), label, 4);
      for (std::size_t l = 0; l < g.size(); ++l) {
        for (std::size_t i = 0; i < ref.gw[l].size(); ++i) {
          for (std::size_t j = 0; j < ref.gw[l][i].size(); ++j)
            worst_grad = std::max(worst_grad, std::abs(g[l].weights.at({i, j}) - ref.gw[l][i][j]));
          worst_grad = std::max(worst_grad, std::abs(g[l].bias[i] - ref.gb[l][i]));
        }
        if (g[l].gain.size()) worst_grad = std::max(worst_grad, std::abs(g[l].gain[0]));
      }
    }
  }
  forward_exact &= logits[0] == logits[1];
  return {forward_exact && worst_logit <= 1e-12 && worst_grad <= 1e-10,
          std::string("forward vs LIF step ") + (forward_exact ? "bit-exact" : "MISMATCH") +
              ", reference max |logit diff|=" + fmt("%.3g", worst_logit) +
              ", max |grad diff|=" + fmt("%.3g", worst_grad) + " (mode none and zero refractory constants)"};
}

// ---- 5 ----
Outcome kernel_properties() {
  Rng rng(5);
  std::size_t bad = 0;
  double min_gap = 1e9;
  for (int trial = 0; trial < 100; ++trial) {
    const double a = rng.uniform(0.01, 2.0), u_th = rng.uniform(0.1, 3.0);
    NeuronParams np;
    np.u_th = u_th;
    if (kernel_value(0.0, u_th, a) != 0.0) ++bad;
    double prev = 0.0;
    for (int i = 1; i <= 1000; ++i) {
      const double tau = np.tau_ref_max * i / 1000.0;
      const double g = kernel_value(tau, u_th, a);
      if (!(g > prev) || !(g < u_th)) ++bad;
      prev = g;
    }
    const double sup = kernel_sup(np, a, RefractoryMode::kHdrp);
    if (!(sup < u_th)) ++bad;
    min_gap = std::min(min_gap, u_th - sup);
  }
  return {bad == 0, std::to_string(bad) + " violations over 100 (A, u_th) pairs x 1000 tau values; min(u_th - sup g)=" +
                        fmt("%.3g", min_gap)};
}

// ---- 6 ----
Outcome energy_table() {
  struct Row { const char* label; double acs_m, macs_m, energy; };
  const Row rows[] = {
      {"CIFAR10 ReLU", 0.00, 2191.20, 10079.52},   {"CIFAR10 LIF", 128.27, 8.25, 153.43},
      {"CIFAR10 HDRP", 105.85, 16.51, 171.23},     {"CIFAR100 ReLU", 0.00, 2191.20, 10079.52},
      {"CIFAR100 LIF", 142.10, 8.25, 165.87},      {"CIFAR100 HDRP", 120.68, 16.51, 184.58},
      {"ImageNet ReLU", 0.00, 3644.00, 16762.40},  {"ImageNet LIF", 323.38, 21.38, 389.40},
      {"ImageNet HDRP", 267.05, 42.76, 437.05},    {"CIFAR10-DVS LIF", 255.92, 3.41, 246.01},
      {"CIFAR10-DVS HDRP", 245.86, 6.82, 252.65},
  };
  double worst = 0.0;
  for (const Row& r : rows) {
    const double e = sop_energy_uj(r.acs_m * 1e6, r.macs_m * 1e6);
    worst = std::max(worst, std::abs(e - r.energy) / r.energy);
  }
  return {worst < 1e-3, "11 rows, max relative deviation " + fmt("%.4f", worst * 100) + "%"};
}

// ---- 7 ----
Outcome mac_ratio() {
  std::vector<NetworkSpec> specs;
  for (std::size_t T : {1, 4, 6}) {
    specs.push_back(test::dense_spec(16, {32}, 4, T, RefractoryMode::kNone));
    specs.push_back(test::dense_spec(10, {12, 9, 7}, 3, T, RefractoryMode::kNone));
    NetworkSpec conv;
    conv.timesteps = T;
    LayerSpec enc = test::layer(LayerKind::kEncoder);
    enc.shape = {2, 8, 8};
    LayerSpec c1 = test::layer(LayerKind::kConv2d);
    c1.channels = 4;
    c1.kernel = 3;
    c1.padding = 1;
    LayerSpec pool = test::layer(LayerKind::kAvgPool2d);
    pool.kernel = 2;
    pool.stride = 2;
    LayerSpec flat = test::layer(LayerKind::kFlatten);
    LayerSpec out = test::layer(LayerKind::kReadout);
    out.units = 5;
    conv.layers = {enc, c1, pool, flat, out};
    specs.push_back(conv);
  }
  std::size_t checked = 0, bad = 0;
  for (const NetworkSpec& base : specs) {
    Rng drng(7);
    Shape full = base.layers[0].shape;
    full.insert(full.begin(), 8);
    Dataset d;
    d.inputs = rng_uniform(drng, full, 0.0, 1.0);
    d.labels.assign(8, 0);
    d.classes = base.layers.back().units;
    std::uint64_t macs[2];
    int k = 0;
    for (auto mode : {RefractoryMode::kNone, RefractoryMode::kHdrp}) {
      NetworkSpec spec = base;
      for (auto& l : spec.layers) l.refractory.mode = mode;
      Rng init(1);
      ParamStore params;
      const Network net = Network::build(spec, init, params);
      macs[k++] = evaluate(net, params, d).ops.macs;
    }
    ++checked;
    if (macs[1] != 2 * macs[0]) ++bad;
  }
  return {bad == 0, std::to_string(checked) + " architecture/T pairs (dense, deep dense, conv; T in {1,4,6}), " +
                        std::to_string(bad) + " with MACs(HDRP) != 2 x MACs(LIF)"};
}

double mean_rate(const nlohmann::json& rates) {
  double s = 0.0;
  for (const auto& r : rates) s += r.get<double>();
  return rates.empty() ? 0.0 : s / static_cast<double>(rates.size());
}

// ---- 8 ----
Outcome spike_suppression(const fs::path& out) {
  double rate[2] = {0, 0};
  int k = 0;
  for (const char* mode : {"none", "hdrp"}) {
    for (auto seed : kSeeds) {
      const ExperimentConfig cfg =
          with(out / "rates" / mode / std::to_string(seed),
               {std::string("refractory.mode=") + mode, "seed=" + std::to_string(seed)});
      rate[k] += mean_rate(run_command(cfg, "train").report["final"]["firing_rate"]) / kSeeds.size();
    }
    ++k;
  }
  return {rate[1] <= rate[0] * 1.05, "mean firing rate over seeds 1-3: HDRP " + fmt("%.4f", rate[1]) + " vs LIF " +
                                         fmt("%.4f", rate[0]) + " (limit " + fmt("%.4f", rate[0] * 1.05) + ")"};
}

// ---- 9 ----
Outcome noise_robustness(const fs::path& out) {
  const ExperimentConfig cfg = with(out / "noise", {"noise_sweep.variants=[\"none\",\"hdrp\"]", "noise_sweep.seeds=[1,2,3]"});
  const CommandResult r = run_command(cfg, "noise-sweep");
  std::vector<double> curve[2];
  for (const auto& v : r.report["variants"]) {
    const int k = v["mode"] == "hdrp" ? 1 : 0;
    for (const auto& p : v["mean"]) curve[k].push_back(p["accuracy"].get<double>());
  }
  double worst_rise = 0.0;
  for (const auto& c : curve)
    for (std::size_t i = 1; i < c.size(); ++i) worst_rise = std::max(worst_rise, c[i] - c[i - 1]);
  const double lif = curve[0].back(), hdrp = curve[1].back();
  const double sigma = cfg.noise.grid.back();
  const bool ok = hdrp >= lif - 0.005 && worst_rise <= 0.02;
  return {ok, "sigma=" + fmt("%.2g", sigma) + ": HDRP " + fmt("%.2f", hdrp * 100) + "% vs LIF " +
                  fmt("%.2f", lif * 100) + "%; largest rise along a curve " + fmt("%.2f", worst_rise * 100) +
                  " points"};
}

// ---- 10 ----
Outcome ablation_grid(const fs::path& out) {
  const fs::path dir = out / "ablate";
  const ExperimentConfig cfg = with(dir, {"ablate.seeds=[1,2,3]"});
  const CommandResult r = run_command(cfg, "ablate");
  const auto& cells = r.report["cells"];
  std::set<std::string> names;
  double hdrp = -1, fd09 = -1;
  for (const auto& c : cells) {
    names.insert(c["name"].get<std::string>());
    if (c["name"] == "hdrp") hdrp = c["mean_noisy_acc"].get<double>();
    if (c["name"] == "fixed-decay-0.9") fd09 = c["mean_noisy_acc"].get<double>();
  }
  const std::set<std::string> expected = {"lif", "absolute-1", "absolute-2", "relative-no-history",
                                          "fixed-decay-0.1", "fixed-decay-0.5", "fixed-decay-0.9", "hdrp"};
  // Standalone LIF run with the first seed.
  const ExperimentConfig lif = with(out / "ablate_lif_standalone", {"refractory.mode=none", "ablate.seeds=[1,2,3]"});
  const CommandResult lr = run_command(lif, "train");
  const bool same_ckpt = read_file(lif.checkpoint_path()) == read_file(dir / "lif" / "seed-1" / "checkpoint.bin");
  const nlohmann::json cell_report = nlohmann::json::parse(read_file(dir / "lif" / "seed-1" / "train_report.json"));
  const bool same_final = cell_report["final"] == lr.report["final"] && cell_report["epochs"] == lr.report["epochs"];
  const bool ok = cells.size() == 8 && names == expected && same_ckpt && same_final && hdrp >= fd09;
  return {ok, std::to_string(cells.size()) + " cells; LIF cell vs standalone: checkpoint " +
                  (same_ckpt ? "identical" : "DIFFERENT") + ", log " + (same_final ? "identical" : "DIFFERENT") +
                  "; noisy acc HDRP " + fmt("%.2f", hdrp * 100) + "% vs fixed-decay-0.9 " +
                  fmt("%.2f", fd09 * 100) + "%"};
}

// ---- 11 ----
Outcome determinism(const fs::path& out) {
  const fs::path dir = out / "determinism";
  const ExperimentConfig cfg =
      with(dir, {"optimizer.epochs=5", "ablate.seeds=[1,2]", "noise_sweep.seeds=[1,2]", "threads=2"});
  const char* commands[] = {"train", "eval", "energy-report", "grad-check", "noise-sweep", "ablate"};
  std::vector<std::string> differing;
  std::size_t files = 0;
  for (const char* cmd : commands) {
    std::string stem(cmd);
    std::replace(stem.begin(), stem.end(), '-', '_');
    const fs::path report = dir / (stem + "_report.json");
    run_command(cfg, cmd);
    const std::string first = read_file(report);
    std::vector<std::pair<fs::path, std::string>> extra;
    for (const auto& e : fs::recursive_directory_iterator(dir)) {
      const std::string name = e.path().filename().string();
      if (e.is_regular_file() && name.find("timing") == std::string::npos && name != "train_log.jsonl")
        extra.emplace_back(e.path(), read_file(e.path()));
    }
    run_command(cfg, cmd);
    if (first.empty() || read_file(report) != first) differing.push_back(report.filename().string());
    for (const auto& [p, bytes] : extra) {
      ++files;
      if (read_file(p) != bytes) differing.push_back(fs::relative(p, dir).string());
    }
  }
  std::string detail = "6 commands run twice, " + std::to_string(files) + " output files compared";
  if (!differing.empty()) detail += "; differing: " + differing.front();
  return {differing.empty(), detail};
}

// ---- 12 ----
Outcome toy_learning(const fs::path& out) {
  const ExperimentConfig cfg = with(out / "toy", {});
  const CommandResult r = run_command(cfg, "train");
  const double acc = r.report["final"]["accuracy"].get<double>();
  const bool ok = acc >= 0.9 && cfg.optimizer.epochs <= 100 && cfg.timesteps == 4 &&
                  cfg.refractory.mode == RefractoryMode::kHdrp && cfg.data.classes == 4;
  return {ok, "test accuracy " + fmt("%.2f", acc * 100) + "% after " + std::to_string(cfg.optimizer.epochs) +
                  " epochs at T=4"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hdrp acceptance checks"};
  std::string out = "acceptance_out";
  std::vector<int> only;
  app.add_option("--out", out, "Scratch directory");
  app.add_option("--only", only, "Run only these criteria");
  CLI11_PARSE(app, argc, argv);

  const fs::path dir(out);
  fs::remove_all(dir);
  fs::create_directories(dir);

  const std::vector<Criterion> criteria = {
      {1, "gradient oracle", 10, [&] { return gradient_oracle(dir); }},
      {2, "refractory update identity", 1, tau_identity},
      {3, "derivative bound soundness", 30, bound_soundness},
      {4, "LIF reduction", 60, lif_reduction},
      {5, "refractory kernel properties", 60, kernel_properties},
      {6, "published energy arithmetic", 1, energy_table},
      {7, "MAC ratio", 60, mac_ratio},
      {8, "spike suppression direction", 300, [&] { return spike_suppression(dir); }},
      {9, "noise robustness direction", 600, [&] { return noise_robustness(dir); }},
      {10, "ablation grid shape and ordering", 1200, [&] { return ablation_grid(dir); }},
      {11, "determinism", 600, [&] { return determinism(dir); }},
      {12, "toy learning capability", 300, [&] { return toy_learning(dir); }},
  };

  int failures = 0;
  nlohmann::json summary = nlohmann::json::array();
  for (const Criterion& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    bool pass = o.pass;
    if (secs > c.budget_s) {
      pass = false;
      o.detail += "; over the " + fmt("%.0f", c.budget_s) + " s budget";
    }
    if (!pass) ++failures;
    std::printf("[%s] %2d %-34s %8.2f s  %s\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(), secs,
                o.detail.c_str());
    std::fflush(stdout);
    summary.push_back({{"id", c.id}, {"name", c.name}, {"pass", pass}, {"seconds", secs}, {"detail", o.detail}});
  }
  std::ofstream(dir / "acceptance.json") << summary.dump(2) << "\n";
  std::printf("%d of %zu criteria failed\n", failures, summary.size());
  return failures == 0 ? 0 : 1;
}
