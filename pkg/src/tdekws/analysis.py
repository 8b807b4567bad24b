"""Pair-correlation ranking and pruning, SynOps accounting, spike-timing
information metrics, and the interpretability summary of trained nets."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .encoding import Dataset
from .topology import (
    TDE,
    EventLog,
    NetworkSpec,
    ParameterSet,
    enumerate_tde_pairs,
    softplus,
)

RANKED_CSV_HEADER = ["fac", "trig", "xcorr", "lag"]
INFO_CSV_HEADER = ["channel", "delta_t", "i_rate", "i_pattern"]
INTERPRET_FORMAT = "tdekws-interpret-v1"
DEFAULT_MAX_LAG = 33


def unbiased_xcorr(a, b, max_lag: int) -> np.ndarray:
    """Unbiased cross-correlation c(l) = sum_t a(t)*b(t+l) / (T - |l|) for
    l in [-max_lag, max_lag]; positive lags mean a leads b."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise ValueError(f"need equal-length 1-d trains, got {a.shape}, {b.shape}")
    n = a.shape[0]
    if not 1 <= max_lag < n:
        raise ValueError(f"max_lag must lie in [1, {n - 1}], got {max_lag}")
    out = np.empty(2 * max_lag + 1)
    for lag in range(-max_lag, max_lag + 1):
        if lag >= 0:
            s = a[: n - lag] @ b[lag:]
        else:
            s = a[-lag:] @ b[: n + lag]
        out[lag + max_lag] = s / (n - abs(lag))
    return out


def _lag_preference(max_lag: int) -> np.ndarray:
    """Lags ordered by (|l|, l): 0, -1, +1, -2, +2, ... for argmax tie-breaks."""
    lags = sorted(range(-max_lag, max_lag + 1), key=lambda l: (abs(l), l))
    return np.array(lags, dtype=np.int64)


def xcorr_peak(corr: np.ndarray, max_lag: int) -> tuple[float, int]:
    """(value, lag) of the maximum; ties resolve to the smallest |lag|,
    negative before positive."""
    if corr.shape != (2 * max_lag + 1,):
        raise ValueError("corr length does not match max_lag")
    pref = _lag_preference(max_lag)
    reordered = corr[pref + max_lag]
    k = int(np.argmax(reordered))
    return float(reordered[k]), int(pref[k])


@dataclass(frozen=True)
class PairCorrelation:
    """One ordered channel pair with its ranking statistic."""

    fac: int
    trig: int
    value: float
    best_lag: int


def rank_pairs(
    dataset: Dataset,
    max_lag: int = DEFAULT_MAX_LAG,
    threads: int = 1,
) -> list[PairCorrelation]:
    """Rank every ordered channel pair by class-wise correlation strength.

    Per sample, each pair takes the peak of its unbiased cross-correlation
    (with the tie-break of xcorr_peak); per class those peaks and their lags
    are averaged; a pair's statistic is the largest class mean, its lag the
    rounded mean lag within that class. Sorted descending, stable in
    (fac, trig) order.
    """
    n = dataset.n_neurons
    t_steps = dataset.n_steps
    if not 1 <= max_lag < t_steps:
        raise ValueError(f"max_lag must lie in [1, {t_steps - 1}], got {max_lag}")
    n_classes = dataset.n_classes
    pref = _lag_preference(max_lag)
    pref_pos = pref + max_lag

    def sample_peaks(raster) -> tuple[np.ndarray, np.ndarray]:
        a = raster.as_float()
        vals = np.empty((n, n, 2 * max_lag + 1))
        for lag in range(0, max_lag + 1):
            if lag == 0:
                m = (a @ a.T) / t_steps
            else:
                m = (a[:, :-lag] @ a[:, lag:].T) / (t_steps - lag)
            vals[:, :, max_lag + lag] = m
            vals[:, :, max_lag - lag] = m.T
        reordered = vals[:, :, pref_pos]
        k = reordered.argmax(axis=2)
        peak = np.take_along_axis(reordered, k[:, :, None], axis=2)[:, :, 0]
        lag = pref[k]
        return peak, lag

    def chunk_sums(indices) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        sum_val = np.zeros((n_classes, n, n))
        sum_lag = np.zeros((n_classes, n, n))
        count = np.zeros(n_classes)
        for i in indices:
            peak, lag = sample_peaks(dataset.rasters[i])
            c = dataset.labels[i]
            sum_val[c] += peak
            sum_lag[c] += lag
            count[c] += 1
        return sum_val, sum_lag, count

    indices = list(range(len(dataset)))
    if threads <= 1:
        chunks = [indices]
    else:
        size = math.ceil(len(indices) / threads)
        chunks = [indices[i : i + size] for i in range(0, len(indices), size)]
    from .training import parallel_map  # local import avoids a module cycle

    parts = parallel_map(chunk_sums, chunks, threads)
    sum_val = sum(p[0] for p in parts)
    sum_lag = sum(p[1] for p in parts)
    count = sum(p[2] for p in parts)
    present = count > 0
    mean_val = np.zeros_like(sum_val)
    mean_lag = np.zeros_like(sum_lag)
    mean_val[present] = sum_val[present] / count[present, None, None]
    mean_lag[present] = sum_lag[present] / count[present, None, None]
    best_class = mean_val.argmax(axis=0)
    ii, jj = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    value = mean_val[best_class, ii, jj]
    lag = np.rint(mean_lag[best_class, ii, jj]).astype(np.int64)
    pairs = [
        PairCorrelation(fac=a, trig=b, value=float(value[a, b]),
                        best_lag=int(lag[a, b]))
        for a, b in enumerate_tde_pairs(n)
    ]
    pairs.sort(key=lambda p: -p.value)  # stable: ties keep (fac, trig) order
    return pairs


def prune(
    ranked: list[PairCorrelation],
    n_keep: int,
    n_l0: int = 32,
    n_l2: int = 11,
) -> NetworkSpec:
    """TDE spec over the n_keep strongest pairs; cell i is ranked[i]'s pair."""
    if not 1 <= n_keep <= len(ranked):
        raise ValueError(f"n_keep must lie in [1, {len(ranked)}], got {n_keep}")
    pairs = tuple((p.fac, p.trig) for p in ranked[:n_keep])
    return NetworkSpec(kind=TDE, n_l1=n_keep, n_l0=n_l0, n_l2=n_l2,
                       tde_pairs=pairs)


def random_prune(
    n_keep: int,
    seed: int,
    n_l0: int = 32,
    n_l2: int = 11,
) -> NetworkSpec:
    """TDE spec over n_keep pairs drawn uniformly without replacement."""
    all_pairs = enumerate_tde_pairs(n_l0)
    if not 1 <= n_keep <= len(all_pairs):
        raise ValueError(
            f"n_keep must lie in [1, {len(all_pairs)}], got {n_keep}"
        )
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(all_pairs), size=n_keep, replace=False)
    pairs = tuple(all_pairs[i] for i in chosen)
    return NetworkSpec(kind=TDE, n_l1=n_keep, n_l0=n_l0, n_l2=n_l2,
                       tde_pairs=pairs)


def select_correlations(
    ranked: list[PairCorrelation], pairs
) -> list[PairCorrelation]:
    """The ranked entries of the given (fac, trig) pairs, in pair order."""
    table = {(p.fac, p.trig): p for p in ranked}
    out = []
    for a, b in pairs:
        if (a, b) not in table:
            raise KeyError(f"pair ({a}, {b}) missing from ranked table")
        out.append(table[(a, b)])
    return out


def init_tau_from_lags(
    correlations: list[PairCorrelation], dt: float
) -> np.ndarray:
    """Gain time constants tau = max(|best_lag|, 1) * dt, one per pair."""
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    lags = np.array([abs(p.best_lag) for p in correlations], dtype=np.float64)
    return np.maximum(lags, 1.0) * dt


@dataclass
class SynopsReport:
    """Synaptic-operation totals: per layer, deliveries in plus spikes out."""

    per_layer: np.ndarray
    total: int

    def per_keyword(self, n_samples: int) -> np.ndarray:
        return self.per_layer / n_samples


def count_synops(event_log: EventLog) -> SynopsReport:
    per_layer = event_log.input_events + event_log.output_spikes
    return SynopsReport(per_layer=per_layer, total=int(per_layer.sum()))


# --- spike-timing information -----------------------------------------------


def plug_in_mi(labels: np.ndarray, symbols: np.ndarray) -> float:
    """Plug-in mutual information (bits) between two discrete columns."""
    labels = np.asarray(labels)
    symbols = np.asarray(symbols)
    if labels.shape != symbols.shape or labels.ndim != 1:
        raise ValueError("labels and symbols must be equal-length 1-d arrays")
    n = labels.shape[0]
    _, li = np.unique(labels, return_inverse=True)
    _, si = np.unique(symbols, return_inverse=True)
    joint = np.zeros((li.max() + 1, si.max() + 1))
    np.add.at(joint, (li, si), 1.0)
    pxy = joint / n
    px = pxy.sum(axis=1, keepdims=True)
    py = pxy.sum(axis=0, keepdims=True)
    nz = pxy > 0
    return float((pxy[nz] * np.log2(pxy[nz] / (px @ py)[nz])).sum())


def _shuffle_corrected_mi(
    labels: np.ndarray, symbols: np.ndarray, n_shuffles: int, seed
) -> float:
    """MI minus the mean MI over label permutations.

    Pairs are canonically re-ordered first, so the estimate ignores the order
    samples arrive in.
    """
    _, sym_ids = np.unique(symbols, return_inverse=True)
    order = np.lexsort((labels, sym_ids))
    labels = np.asarray(labels)[order]
    sym_ids = sym_ids[order]
    mi = plug_in_mi(labels, sym_ids)
    if n_shuffles < 1:
        return mi
    rng = np.random.default_rng(seed)
    bias = 0.0
    for _ in range(n_shuffles):
        bias += plug_in_mi(labels[rng.permutation(labels.shape[0])], sym_ids)
    return mi - bias / n_shuffles


@dataclass
class InfoResult:
    """Per-channel information values (bits) with their aggregates."""

    per_channel: np.ndarray
    mean: float
    std: float
    window: float
    delta_t: float | None = None

    @classmethod
    def from_values(cls, values: np.ndarray, window: float,
                    delta_t: float | None = None) -> "InfoResult":
        values = np.asarray(values, dtype=np.float64)
        return cls(
            per_channel=values,
            mean=float(values.mean()),
            std=float(values.std()),
            window=window,
            delta_t=delta_t,
        )


def _aligned_windows(dataset: Dataset, window_steps: int) -> np.ndarray:
    """Per channel and sample: the raster slice starting at that channel's
    first spike, zero-padded to window_steps. Shape [n_channels, N, steps]."""
    n_ch = dataset.n_neurons
    n = len(dataset)
    out = np.zeros((n_ch, n, window_steps), dtype=np.uint8)
    for i, raster in enumerate(dataset.rasters):
        spikes = raster.spikes
        for ch in range(n_ch):
            idx = np.flatnonzero(spikes[ch])
            if idx.size == 0:
                continue
            t0 = idx[0]
            seg = spikes[ch, t0 : t0 + window_steps]
            out[ch, i, : seg.shape[0]] = seg
    return out


def info_rate(
    dataset: Dataset,
    window: float = 0.4,
    n_shuffles: int = 20,
    seed: int = 0,
) -> InfoResult:
    """Shuffle-corrected MI between class and the spike count each channel
    fires within a window aligned to its first spike per sample."""
    window_steps = round(window / dataset.dt)
    if window_steps < 1:
        raise ValueError("window shorter than one timestep")
    labels = np.asarray(dataset.labels)
    windows = _aligned_windows(dataset, window_steps)
    counts = windows.sum(axis=2)  # [n_ch, N]
    values = np.array(
        [
            _shuffle_corrected_mi(labels, counts[ch], n_shuffles, [seed, ch])
            for ch in range(dataset.n_neurons)
        ]
    )
    return InfoResult.from_values(values, window=window)


def info_pattern(
    dataset: Dataset,
    delta_t: float,
    window: float = 0.4,
    max_word_bins: int = 27,
    n_shuffles: int = 20,
    seed: int = 0,
) -> InfoResult:
    """Shuffle-corrected MI between class and the binary word of spike
    occupancy in delta_t bins across the first-spike-aligned window."""
    dt = dataset.dt
    if delta_t < dt - 1e-12:
        raise ValueError(f"delta_t {delta_t} finer than the raster dt {dt}")
    n_bins = math.ceil(window / delta_t - 1e-9)
    if n_bins > max_word_bins:
        raise ValueError(
            f"window/delta_t gives {n_bins} bins, above the cap {max_word_bins}"
        )
    window_steps = round(window / dt)
    labels = np.asarray(dataset.labels)
    windows = _aligned_windows(dataset, window_steps)
    step_bins = np.minimum(
        (np.arange(window_steps) * dt / delta_t).astype(np.int64), n_bins - 1
    )
    values = np.empty(dataset.n_neurons)
    for ch in range(dataset.n_neurons):
        bits = np.zeros((len(dataset), n_bins), dtype=np.uint8)
        for k in range(n_bins):
            sel = step_bins == k
            if sel.any():
                bits[:, k] = windows[ch][:, sel].max(axis=1)
        words = np.array([bytes(row) for row in bits], dtype=object)
        values[ch] = _shuffle_corrected_mi(labels, words, n_shuffles, [seed, ch])
    return InfoResult.from_values(values, window=window, delta_t=delta_t)


# --- interpretability ---------------------------------------------------------


def _greedy_match_distance(
    pairs_a: list[tuple[int, int]], pairs_b: list[tuple[int, int]]
) -> list[float]:
    """Greedy nearest-neighbor matching without replacement between two pair
    sets in (fac, trig) channel coordinates; returns matched distances."""
    candidates = sorted(
        (math.hypot(pa[0] - pb[0], pa[1] - pb[1]), i, j)
        for i, pa in enumerate(pairs_a)
        for j, pb in enumerate(pairs_b)
    )
    used_a: set[int] = set()
    used_b: set[int] = set()
    out: list[float] = []
    for d, i, j in candidates:
        if i in used_a or j in used_b:
            continue
        used_a.add(i)
        used_b.add(j)
        out.append(d)
        if len(used_a) == min(len(pairs_a), len(pairs_b)):
            break
    return out


@dataclass
class InterpretabilityReport:
    """Per-class strongest hidden cells and their overlap with the ranked
    correlation table."""

    top_k: int
    coincidence_radius: float
    classes: list[dict]
    xcorr_top: list[dict]
    mean_distance: float
    n_coincident: int

    def to_json(self, path) -> None:
        doc = {"format": INTERPRET_FORMAT}
        doc.update(self.__dict__)
        with open(path, "w") as f:
            json.dump(doc, f, indent=1)
            f.write("\n")


def interpretability_report(
    spec: NetworkSpec,
    params: ParameterSet,
    ranked: list[PairCorrelation],
    top_k: int = 25,
    coincidence_radius: float = 5.0,
) -> InterpretabilityReport:
    """For each class: the top_k hidden cells by |readout weight| with their
    channel pairs and trained gain taus, plus the distance of those pairs to
    the strongest cross-correlation pairs of the dataset."""
    if spec.kind != TDE:
        raise ValueError("interpretability report applies to TDE nets")
    params.validate_for(spec)
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    k = min(top_k, spec.n_l1)
    taus = softplus(params.tau_g_raw)
    xcorr_pairs = [(p.fac, p.trig) for p in ranked[:k]]
    classes: list[dict] = []
    all_distances: list[float] = []
    n_coincident = 0
    for c in range(spec.n_l2):
        weights = params.w2[c]
        order = np.argsort(-np.abs(weights), kind="stable")[:k]
        cells = [
            {
                "cell": int(i),
                "fac": spec.tde_pairs[i][0],
                "trig": spec.tde_pairs[i][1],
                "weight": float(weights[i]),
                "tau_g": float(taus[i]),
            }
            for i in order
        ]
        class_pairs = [(cell["fac"], cell["trig"]) for cell in cells]
        distances = _greedy_match_distance(class_pairs, xcorr_pairs)
        coincident = sum(1 for d in distances if d <= coincidence_radius)
        n_coincident += coincident
        all_distances.extend(distances)
        classes.append(
            {
                "class_id": c,
                "cells": cells,
                "mean_distance": float(np.mean(distances)) if distances else 0.0,
                "n_coincident": coincident,
            }
        )
    return InterpretabilityReport(
        top_k=k,
        coincidence_radius=coincidence_radius,
        classes=classes,
        xcorr_top=[
            {"fac": p.fac, "trig": p.trig, "xcorr": p.value, "lag": p.best_lag}
            for p in ranked[:k]
        ],
        mean_distance=float(np.mean(all_distances)) if all_distances else 0.0,
        n_coincident=n_coincident,
    )


# --- CSV interfaces -----------------------------------------------------------


def ranked_to_csv(path, ranked: list[PairCorrelation]) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(RANKED_CSV_HEADER)
        for p in ranked:
            writer.writerow([p.fac, p.trig, repr(p.value), p.best_lag])


def ranked_from_csv(path) -> list[PairCorrelation]:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != RANKED_CSV_HEADER:
            raise ValueError(f"expected header {','.join(RANKED_CSV_HEADER)}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValueError(f"line {lineno}: expected 4 fields")
            out.append(
                PairCorrelation(
                    fac=int(row[0]),
                    trig=int(row[1]),
                    value=float(row[2]),
                    best_lag=int(row[3]),
                )
            )
    if not out:
        raise ValueError("ranked CSV contains no pairs")
    return out


def info_to_csv(path, rate: InfoResult, patterns: list[InfoResult]) -> None:
    """Rows channel,delta_t,i_rate,i_pattern for every pattern resolution."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(INFO_CSV_HEADER)
        for pattern in patterns:
            for ch in range(rate.per_channel.shape[0]):
                writer.writerow(
                    [
                        ch,
                        repr(pattern.delta_t),
                        repr(float(rate.per_channel[ch])),
                        repr(float(pattern.per_channel[ch])),
                    ]
                )
