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

#include <algorithm>
#include <cmath>
#include <vector>

#include "hdrp/tensor.hpp"

namespace hdrp::test {

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;

Mat to_mat(const Tensor& w) {
  Mat m(w.dim(0), Vec(w.dim(1)));
  for (std::size_t i = 0; i < w.dim(0); ++i)
    for (std::size_t j = 0; j < w.dim(1); ++j) m[i][j] = w.at({i, j});
  return m;
}

// Plain BPTT of softmax cross-entropy through a stack of LIF layers with a
// hard reset and an averaging readout; written against the recurrence only.
struct LifReference {
  std::vector<Mat> w;  // hidden layers, then the readout
  std::vector<Vec> b;
  double tau_m = 2.0, u_th = 1.0, u_rest = 0.0, gamma = 1.0;

  std::vector<Mat> gw;
  std::vector<Vec> gb;

  Vec logits(const Vec& x, std::size_t T) {
    grad(x, 0, T, false);
    return last_logits;
  }

  void grad(const Vec& x, std::size_t label, std::size_t T, bool backward = true) {
    const std::size_t L = w.size() - 1;
    // Forward, storing inputs and H per layer and step.
    std::vector<std::vector<Vec>> in(L), hs(L), ss(L);
    std::vector<Vec> u(L);
    for (std::size_t l = 0; l < L; ++l) u[l].assign(w[l].size(), u_rest);
    std::vector<Vec> top(T);
    Vec z(w[L].size(), 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      Vec sig = x;
      for (std::size_t l = 0; l < L; ++l) {
        Vec h(w[l].size()), s(w[l].size());
        for (std::size_t n = 0; n < w[l].size(); ++n) {
          double d = b[l][n];
          for (std::size_t j = 0; j < sig.size(); ++j) d += w[l][n][j] * sig[j];
          const double up = -(u[l][n] - u_rest) / tau_m + d;
          h[n] = u[l][n] + up;
          s[n] = h[n] >= u_th ? 1.0 : 0.0;
          u[l][n] = s[n] ? u_rest : h[n];
        }
        in[l].push_back(sig);
        hs[l].push_back(h);
        ss[l].push_back(s);
        sig = s;
      }
      top[t] = sig;
      for (std::size_t c = 0; c < z.size(); ++c) {
        double d = b[L][c];
        for (std::size_t j = 0; j < sig.size(); ++j) d += w[L][c][j] * sig[j];
        z[c] += d / static_cast<double>(T);
      }
    }
    last_logits = z;
    if (!backward) return;

    double zmax = z[0];
    for (double v : z) zmax = std::max(zmax, v);
    double norm = 0.0;
    for (double v : z) norm += std::exp(v - zmax);
    Vec dz(z.size());
    for (std::size_t c = 0; c < z.size(); ++c) dz[c] = std::exp(z[c] - zmax) / norm - (c == label);

    gw.assign(w.size(), {});
    gb.assign(b.size(), {});
    for (std::size_t l = 0; l <= L; ++l) {
      gw[l].assign(w[l].size(), Vec(w[l][0].size(), 0.0));
      gb[l].assign(w[l].size(), 0.0);
    }
    // Spatial gradient into each layer's spikes, per step.
    std::vector<std::vector<Vec>> ds(L, std::vector<Vec>(T));
    for (std::size_t t = 0; t < T; ++t) {
      ds[L - 1][t].assign(w[L][0].size(), 0.0);
      for (std::size_t c = 0; c < z.size(); ++c) {
        const double g = dz[c] / static_cast<double>(T);
        gb[L][c] += g;
        for (std::size_t j = 0; j < top[t].size(); ++j) {
          gw[L][c][j] += g * top[t][j];
          ds[L - 1][t][j] += g * w[L][c][j];
        }
      }
    }
    for (std::size_t l = L; l-- > 0;) {
      const std::size_t N = w[l].size();
      if (l > 0)
        for (std::size_t t = 0; t < T; ++t) ds[l - 1][t].assign(w[l][0].size(), 0.0);
      Vec du(N, 0.0);  // adjoint of U_t coming from step t + 1
      for (std::size_t t = T; t-- > 0;) {
        for (std::size_t n = 0; n < N; ++n) {
          const double h = hs[l][t][n], s = ss[l][t][n];
          const double sg = std::max(0.0, gamma - std::abs(h - u_th)) / (gamma * gamma);
          const double dS = ds[l][t][n] + du[n] * (u_rest - h);
          const double dH = dS * sg + du[n] * (1.0 - s);
          gb[l][n] += dH;
          for (std::size_t j = 0; j < in[l][t].size(); ++j) {
            gw[l][n][j] += dH * in[l][t][j];
            if (l > 0) ds[l - 1][t][j] += dH * w[l][n][j];
          }
          du[n] = dH * (1.0 - 1.0 / tau_m);
        }
      }
    }
  }

 private:
  Vec last_logits;
};

}  // namespace hdrp::test
