"""Shared independent oracles, written against the documented update rules
only (plain Python floats, no package internals)."""

from __future__ import annotations

import numpy as np


def oracle_lif_trace(alpha, beta, theta, drives):
    """Scalar LIF recurrence; returns list of (I, U, spike) per step."""
    current = 0.0
    membrane = 0.0
    prev_spike = 0.0
    out = []
    for d in drives:
        current = alpha * current + d
        membrane = (beta * membrane + current) * (1.0 - prev_spike)
        spike = 1.0 if membrane >= theta else 0.0
        out.append((current, membrane, spike))
        prev_spike = spike
    return out


def oracle_tde_trace(alpha, beta, gamma, w_fac, theta, fac, trig):
    """Scalar TDE recurrence; returns list of (G, I, U, spike) per step."""
    gain = 0.0
    current = 0.0
    membrane = 0.0
    prev_spike = 0.0
    out = []
    for f, tr in zip(fac, trig):
        gain = gamma * gain + w_fac * f
        current = alpha * current + gain * tr
        membrane = (beta * membrane + current) * (1.0 - prev_spike)
        spike = 1.0 if membrane >= theta else 0.0
        out.append((gain, current, membrane, spike))
        prev_spike = spike
    return out


def oracle_xcorr(a, b, max_lag):
    """Direct double-loop unbiased cross-correlation."""
    a = list(map(float, a))
    b = list(map(float, b))
    n = len(a)
    out = []
    for lag in range(-max_lag, max_lag + 1):
        total = 0.0
        count = n - abs(lag)
        for t in range(n):
            u = t + lag
            if 0 <= u < n:
                total += a[t] * b[u]
        out.append(total / count)
    return np.array(out)


def oracle_event_counts(kind, pairs, n_l0, n_l1, n_l2, l0_raster, l1_raster,
                        l2_raster):
    """Per-spike fanout accounting: walk every spike and add its deliveries.

    Returns (input_events[3], output_spikes[3]).
    """
    input_events = [0, 0, 0]
    output_spikes = [0, 0, 0]
    if kind == "tde":
        fanout_l0 = [0] * n_l0
        for a, b in pairs:
            fanout_l0[a] += 1
            fanout_l0[b] += 1
    for ch in range(n_l0):
        for t in range(l0_raster.shape[1]):
            if l0_raster[ch, t]:
                output_spikes[0] += 1
                input_events[1] += fanout_l0[ch] if kind == "tde" else n_l1
    for i in range(n_l1):
        for t in range(l1_raster.shape[1]):
            if l1_raster[i, t]:
                output_spikes[1] += 1
                input_events[2] += n_l2
                if kind == "lifrec":
                    input_events[1] += n_l1
    for c in range(n_l2):
        for t in range(l2_raster.shape[1]):
            if l2_raster[c, t]:
                output_spikes[2] += 1
    return np.array(input_events), np.array(output_spikes)


def finite_difference_grads(loss_fn, blocks, h=1e-4):
    """Central differences on a list of (name, array) parameter blocks."""
    grads = {}
    for name, block in blocks:
        g = np.zeros_like(block)
        it = np.nditer(block, flags=["multi_index"])
        for _ in it:
            ix = it.multi_index
            orig = block[ix]
            block[ix] = orig + h
            lp = loss_fn()
            block[ix] = orig - h
            lm = loss_fn()
            block[ix] = orig
            g[ix] = (lp - lm) / (2.0 * h)
        grads[name] = g
    return grads
