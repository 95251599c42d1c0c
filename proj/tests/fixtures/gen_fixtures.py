#!/usr/bin/env python3
# Copyright 2026 The HDRP-SNN Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Hand-checkable fixtures, computed in plain Python.

Usage: gen_fixtures.py [OUT_DIR]   (default: the directory of this script)
"""

import json
import math
import os
import sys

TAU_M, U_TH, U_REST = 2.0, 1.0, 0.0
TAU0, TAUL, TAU_MAX, A = 1.0, 5.0, 6.0, 1.0


def kernel(tau, a=A):
    return U_TH * math.tanh(a * tau)


def bounds(w_rows, bias, kernel_sup):
    out = []
    for row, b in zip(w_rows, bias):
        i_max = sum(x for x in row if x > 0) + b
        i_min = sum(x for x in row if x < 0) + b
        floor = i_min - kernel_sup
        u_min = U_REST + TAU_M * min(0.0, floor)
        u_max = U_TH
        up_max = -(u_min - U_REST) / TAU_M + i_max
        up_min = -(u_max - U_REST) / TAU_M + floor
        out.append((up_min, up_max))
    return out


def step(u, tau, drive, up_min, up_max, mode, decay=0.5):
    g = kernel(tau) if mode != "none" else 0.0
    i = drive - g
    up = -(u - U_REST) / TAU_M + i
    h = u + up
    s = 1.0 if h >= U_TH else 0.0
    u_new = U_REST if s else h
    if mode == "none":
        t_new = 0.0
    else:
        if mode == "relative-fixed-decay":
            k = decay
        else:
            k = min(1.0, max(0.0, (up - up_min) / (up_max - up_min)))
        if mode == "relative-no-history":
            t_new = s * (k * TAUL + TAU0)
        else:
            t_new = k * tau + s * (k * TAUL + TAU0)
        t_new = min(t_new, TAU_MAX)
    return dict(I=i, Up=up, H=h, S=s, U=u_new, tau=t_new)


def trace_fixture():
    # Two neurons, three steps, fixed drives and bounds.
    drives = [[1.3, 0.4], [0.9, 0.85], [1.6, 0.2]]
    up_bounds = [(-2.0, 2.5), (-1.5, 1.0)]
    cases = []
    for mode in ["none", "relative-no-history", "relative-fixed-decay", "hdrp"]:
        u, tau = [U_REST, U_REST], [0.0, 0.0]
        steps = []
        for t, d in enumerate(drives, start=1):
            for n in range(2):
                r = step(u[n], tau[n], d[n], *up_bounds[n], mode)
                u[n], tau[n] = r["U"], r["tau"]
                steps.append(dict(t=t, n=n, **r))
        cases.append(dict(mode=mode, steps=steps))
    return dict(drives=drives, up_bounds=up_bounds, fixed_decay=0.5, cases=cases)


def matvec(w, x, b):
    return [sum(wi * xi for wi, xi in zip(row, x)) + bi for row, bi in zip(w, b)]


def network_fixture():
    # encoder[2] -> dense(3) -> dense(3) -> readout(2), T = 3.
    x = [0.9, 0.35]
    w1 = [[1.2, 0.6], [-0.4, 1.5], [0.8, -0.3]]
    b1 = [0.1, 0.0, 0.25]
    w2 = [[0.9, -0.5, 0.7], [0.4, 0.8, -0.6], [-0.2, 0.3, 1.1]]
    b2 = [0.2, 0.05, 0.03]
    w3 = [[0.5, -0.3, 0.8], [-0.6, 0.9, 0.1]]
    b3 = [0.05, -0.1]
    T = 3
    cases = []
    for mode in ["none", "hdrp"]:
        sup = kernel(TAU_MAX) if mode != "none" else 0.0
        bnd = [bounds(w1, b1, sup), bounds(w2, b2, sup)]
        u = [[U_REST] * 3, [U_REST] * 3]
        tau = [[0.0] * 3, [0.0] * 3]
        logits = [0.0, 0.0]
        spikes = [[], []]
        for _ in range(T):
            signal = x
            for l, (w, b) in enumerate([(w1, b1), (w2, b2)]):
                drive = matvec(w, signal, b)
                s = []
                for n in range(3):
                    r = step(u[l][n], tau[l][n], drive[n], *bnd[l][n], mode)
                    u[l][n], tau[l][n] = r["U"], r["tau"]
                    s.append(r["S"])
                spikes[l].append(s)
                signal = s
            out = matvec(w3, signal, b3)
            logits = [a + o for a, o in zip(logits, out)]
        logits = [v / T for v in logits]
        # Operation counts per the accounting rules.
        factor = 2 if mode != "none" else 1
        fanout = [[3, 3, 3], [2, 2, 2]]
        acs = sum(sum(f * s for f, s in zip(fanout[l], st)) for l in range(2) for st in spikes[l])
        enc_macs = factor * T * (2 * 3)
        state_macs = factor * T * (3 + 3)
        macs = enc_macs + state_macs
        energy = (macs * 4.6 + acs * 0.9) * 1e-6
        cases.append(dict(mode=mode, logits=logits, spikes=spikes, acs=acs, macs=macs,
                          energy_uj=energy, up_bounds=bnd))
    return dict(input=x, timesteps=T, w1=w1, b1=b1, w2=w2, b2=b2, w3=w3, b3=b3, cases=cases)


def main():
    out = sys.argv[1] if len(sys.argv) > 1 else os.path.dirname(os.path.abspath(__file__))
    for name, data in [("trace_2neuron.json", trace_fixture()),
                       ("network_2layer.json", network_fixture())]:
        with open(os.path.join(out, name), "w") as f:
            json.dump(data, f, indent=1)
            f.write("\n")


if __name__ == "__main__":
    main()
