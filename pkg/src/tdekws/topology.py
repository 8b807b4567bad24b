"""Three-layer network descriptions, wiring bookkeeping and the stepped forward pass.

Layer 0 is a population of input LIF cells (one per frequency channel), layer 1
is the hidden population (TDE pairs, plain LIF, or LIF with dense recurrence),
layer 2 is the LIF readout (one cell per class).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .dynamics import (
    LifParams,
    LifState,
    TdeParams,
    TdeState,
    lif_step,
    surrogate_sigma,
    tde_step,
)

TDE = "tde"
LIF = "lif"
LIFREC = "lifrec"
KINDS = (TDE, LIF, LIFREC)

MODEL_FORMAT = "tdekws-model-v1"


def softplus(x):
    """log(1 + e^x), overflow-safe."""
    return np.logaddexp(0.0, x)


def softplus_inv(y):
    """Inverse of softplus for y > 0, i.e. log(e^y - 1), underflow-safe."""
    y = np.asarray(y, dtype=np.float64)
    if np.any(y <= 0.0):
        raise ValueError("softplus_inv requires positive inputs")
    return y + np.log(-np.expm1(-y))


def gamma_from_raw(tau_g_raw: np.ndarray, dt: float) -> np.ndarray:
    """Per-cell gain decay exp(-dt / softplus(tau_g_raw)); keeps tau positive."""
    tau = softplus(np.asarray(tau_g_raw, dtype=np.float64))
    return np.exp(-dt / tau)


def enumerate_tde_pairs(n_l0: int) -> list[tuple[int, int]]:
    """All ordered (facilitatory, trigger) channel pairs, row-major, no self-pairs."""
    if n_l0 < 2:
        raise ValueError(f"need at least 2 channels to form pairs, got {n_l0}")
    return [(a, b) for a in range(n_l0) for b in range(n_l0) if b != a]


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture kind and layer widths; TDE nets also carry their pair list."""

    kind: str
    n_l1: int
    n_l0: int = 32
    n_l2: int = 11
    tde_pairs: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        for name, n in (("n_l0", self.n_l0), ("n_l1", self.n_l1), ("n_l2", self.n_l2)):
            if n < 1:
                raise ValueError(f"{name} must be >= 1, got {n}")
        if self.kind == TDE:
            if self.tde_pairs is None:
                raise ValueError("TDE spec requires tde_pairs")
            pairs = tuple((int(a), int(b)) for a, b in self.tde_pairs)
            object.__setattr__(self, "tde_pairs", pairs)
            if len(pairs) != self.n_l1:
                raise ValueError(
                    f"n_l1={self.n_l1} but {len(pairs)} pairs were given"
                )
            seen = set()
            for a, b in pairs:
                if not (0 <= a < self.n_l0 and 0 <= b < self.n_l0):
                    raise ValueError(f"pair ({a}, {b}) outside channel range")
                if a == b:
                    raise ValueError(f"self-pair ({a}, {b}) is not allowed")
                if (a, b) in seen:
                    raise ValueError(f"duplicate pair ({a}, {b})")
                seen.add((a, b))
        elif self.tde_pairs is not None:
            raise ValueError(f"{self.kind} spec must not carry tde_pairs")


def tde_spec(
    pairs: list[tuple[int, int]], n_l0: int = 32, n_l2: int = 11
) -> NetworkSpec:
    return NetworkSpec(kind=TDE, n_l1=len(pairs), n_l0=n_l0, n_l2=n_l2,
                       tde_pairs=tuple(pairs))


def full_tde_spec(n_l0: int = 32, n_l2: int = 11) -> NetworkSpec:
    return tde_spec(enumerate_tde_pairs(n_l0), n_l0=n_l0, n_l2=n_l2)


def _connection_count(kind: str, n_l1: int, n_l0: int, n_l2: int) -> int:
    if kind == TDE:
        return 2 * n_l1 + n_l1 * n_l2
    if kind == LIF:
        return n_l0 * n_l1 + n_l1 * n_l2
    if kind == LIFREC:
        return n_l0 * n_l1 + n_l1 * n_l1 + n_l1 * n_l2
    raise ValueError(f"unknown kind {kind!r}")


def connection_count(spec: NetworkSpec) -> int:
    """Total synaptic connections entering and leaving the hidden layer."""
    return _connection_count(spec.kind, spec.n_l1, spec.n_l0, spec.n_l2)


def balance_hidden_size(
    target: int, kind: str, n_l0: int = 32, n_l2: int = 11
) -> int:
    """Hidden size whose connection count is closest to target; ties go small."""
    if kind not in (LIF, LIFREC):
        raise ValueError(f"balance_hidden_size applies to lif/lifrec, got {kind!r}")
    floor = _connection_count(kind, 1, n_l0, n_l2)
    if target < floor:
        raise ValueError(
            f"target {target} is below the one-cell count {floor} for {kind}"
        )
    best_n, best_err = 1, abs(floor - target)
    n = 2
    while True:
        count = _connection_count(kind, n, n_l0, n_l2)
        err = abs(count - target)
        if err < best_err:
            best_n, best_err = n, err
        if count >= target:
            return best_n
        n += 1


def trainable_parameter_count(spec: NetworkSpec) -> int:
    """Parameters touched by the optimizer: weight matrices plus TDE tau_g."""
    if spec.kind == TDE:
        return spec.n_l1 + spec.n_l1 * spec.n_l2
    if spec.kind == LIF:
        return spec.n_l0 * spec.n_l1 + spec.n_l1 * spec.n_l2
    return (
        spec.n_l0 * spec.n_l1
        + spec.n_l1 * spec.n_l1
        + spec.n_l1 * spec.n_l2
    )


@dataclass
class ParameterSet:
    """Everything the forward pass needs besides the architecture spec.

    w2 is [n_l2, n_l1]; w1 (non-TDE) is [n_l1, n_l0]; w_rec (lifrec) is
    [n_l1, n_l1]; tau_g_raw (TDE) holds the unconstrained gain time constants,
    one per cell, with tau_g = softplus(tau_g_raw).
    """

    l0_params: LifParams
    l1_params: LifParams
    l2_params: LifParams
    w2: np.ndarray
    w1: np.ndarray | None = None
    w_rec: np.ndarray | None = None
    tau_g_raw: np.ndarray | None = None

    def validate_for(self, spec: NetworkSpec) -> None:
        if self.w2.shape != (spec.n_l2, spec.n_l1):
            raise ValueError(
                f"w2 shape {self.w2.shape} != {(spec.n_l2, spec.n_l1)}"
            )
        if spec.kind == TDE:
            if self.tau_g_raw is None or self.tau_g_raw.shape != (spec.n_l1,):
                raise ValueError("TDE parameters require tau_g_raw of shape (n_l1,)")
            if self.w1 is not None or self.w_rec is not None:
                raise ValueError("TDE parameters must not carry w1/w_rec")
        else:
            if self.w1 is None or self.w1.shape != (spec.n_l1, spec.n_l0):
                raise ValueError("w1 of shape (n_l1, n_l0) required")
            if self.tau_g_raw is not None:
                raise ValueError(f"{spec.kind} parameters must not carry tau_g_raw")
            if spec.kind == LIFREC:
                if self.w_rec is None or self.w_rec.shape != (spec.n_l1, spec.n_l1):
                    raise ValueError("w_rec of shape (n_l1, n_l1) required")
            elif self.w_rec is not None:
                raise ValueError("lif parameters must not carry w_rec")

    def tde_params(self) -> TdeParams:
        if self.tau_g_raw is None:
            raise ValueError("no tau_g_raw present; not a TDE parameter set")
        return TdeParams(
            alpha=self.l1_params.alpha,
            beta=self.l1_params.beta,
            gamma=gamma_from_raw(self.tau_g_raw, self.l1_params.dt),
            threshold=self.l1_params.threshold,
            dt=self.l1_params.dt,
        )

    def copy(self) -> "ParameterSet":
        return ParameterSet(
            l0_params=self.l0_params,
            l1_params=self.l1_params,
            l2_params=self.l2_params,
            w2=self.w2.copy(),
            w1=None if self.w1 is None else self.w1.copy(),
            w_rec=None if self.w_rec is None else self.w_rec.copy(),
            tau_g_raw=None if self.tau_g_raw is None else self.tau_g_raw.copy(),
        )


@lru_cache(maxsize=64)
def _pair_arrays(pairs: tuple[tuple[int, int], ...]) -> tuple[np.ndarray, np.ndarray]:
    fac = np.array([p[0] for p in pairs], dtype=np.int64)
    trig = np.array([p[1] for p in pairs], dtype=np.int64)
    return fac, trig


def pair_index_arrays(spec: NetworkSpec) -> tuple[np.ndarray, np.ndarray]:
    """Facilitatory and trigger channel indices of a TDE spec, as arrays."""
    if spec.tde_pairs is None:
        raise ValueError("spec carries no TDE pairs")
    return _pair_arrays(spec.tde_pairs)


@dataclass
class EventLog:
    """Spike-event bookkeeping per layer, accumulated over presented samples.

    input_events[k] counts synaptic deliveries into layer k (post-fanout: one
    event per spike per target synapse); output_spikes[k] counts spikes the
    layer emits. Layer 0 is driven by analog input, so its input count stays 0.
    """

    input_events: np.ndarray = field(
        default_factory=lambda: np.zeros(3, dtype=np.int64)
    )
    output_spikes: np.ndarray = field(
        default_factory=lambda: np.zeros(3, dtype=np.int64)
    )
    n_samples: int = 0

    def merge(self, other: "EventLog") -> "EventLog":
        return EventLog(
            input_events=self.input_events + other.input_events,
            output_spikes=self.output_spikes + other.output_spikes,
            n_samples=self.n_samples + other.n_samples,
        )

    def total_spikes(self) -> int:
        return int(self.output_spikes.sum())


@dataclass
class AdjointTape:
    """Forward states recorded over [T, batch, cells] for the backward pass.

    In soft mode the spike entries hold the surrogate values sigma(U - theta)
    instead of thresholded 0/1 spikes, and the reset factor used the same
    soft values; lam records the surrogate slope used.
    """

    kind: str
    s0: np.ndarray
    i1: np.ndarray
    u1: np.ndarray
    s1: np.ndarray
    i2: np.ndarray
    u2: np.ndarray
    s2: np.ndarray
    g: np.ndarray | None
    mask: np.ndarray | None
    soft: bool
    lam: float

    @property
    def n_steps(self) -> int:
        return self.s0.shape[0]

    @property
    def batch_size(self) -> int:
        return self.s0.shape[1]

    def output_counts(self) -> np.ndarray:
        """Per-sample output spike counts [batch, n_l2], the logits."""
        return self.s2.sum(axis=0)


@dataclass
class RunResult:
    """Outcome of presenting one sample: spike activity per layer plus logs."""

    l1_spikes: np.ndarray
    l2_spikes: np.ndarray
    event_log: EventLog
    tape: AdjointTape | None = None

    def output_counts(self) -> np.ndarray:
        return self.l2_spikes.sum(axis=1)


def _run_core(
    spec: NetworkSpec,
    params: ParameterSet,
    s0_seq: np.ndarray,
    *,
    soft: bool = False,
    lam: float = 5.0,
    mask: np.ndarray | None = None,
    record_tape: bool = False,
    count_events: bool = False,
) -> tuple[np.ndarray, np.ndarray, AdjointTape | None, EventLog | None]:
    """Shared stepped engine over an input spike sequence [T, batch, n_l0].

    Returns (s1_seq, s2_seq, tape, events). In soft mode spikes are replaced
    by sigma(U - threshold) everywhere downstream, including the reset factor,
    which makes the whole forward differentiable for gradient checking.
    """
    params.validate_for(spec)
    n_steps, batch, n_l0 = s0_seq.shape
    if n_l0 != spec.n_l0:
        raise ValueError(f"input has {n_l0} channels, spec expects {spec.n_l0}")
    if soft and count_events:
        raise ValueError("event counting is only meaningful with hard spikes")
    n_l1, n_l2 = spec.n_l1, spec.n_l2
    p1, p2 = params.l1_params, params.l2_params

    if spec.kind == TDE:
        fac_idx, trig_idx = pair_index_arrays(spec)
        gamma = gamma_from_raw(params.tau_g_raw, p1.dt)
        w_fac = 1.0
    else:
        w1_t = params.w1.T
        w_rec_t = params.w_rec.T if spec.kind == LIFREC else None
    w2_t = params.w2.T

    i1 = np.zeros((batch, n_l1))
    u1 = np.zeros((batch, n_l1))
    s1 = np.zeros((batch, n_l1))
    g = np.zeros((batch, n_l1)) if spec.kind == TDE else None
    i2 = np.zeros((batch, n_l2))
    u2 = np.zeros((batch, n_l2))
    s2 = np.zeros((batch, n_l2))

    s1_seq = np.zeros((n_steps, batch, n_l1))
    s2_seq = np.zeros((n_steps, batch, n_l2))
    if record_tape:
        i1_seq = np.zeros((n_steps, batch, n_l1))
        u1_seq = np.zeros((n_steps, batch, n_l1))
        i2_seq = np.zeros((n_steps, batch, n_l2))
        u2_seq = np.zeros((n_steps, batch, n_l2))
        g_seq = np.zeros((n_steps, batch, n_l1)) if spec.kind == TDE else None

    events = EventLog(n_samples=batch) if count_events else None
    theta1, theta2 = p1.threshold, p2.threshold

    for t in range(n_steps):
        s0 = s0_seq[t]
        if spec.kind == TDE:
            fac = s0[:, fac_idx]
            trig = s0[:, trig_idx]
            g = gamma * g + w_fac * fac
            i1 = p1.alpha * i1 + g * trig
        else:
            drive = s0 @ w1_t
            if spec.kind == LIFREC:
                drive = drive + s1 @ w_rec_t
            i1 = p1.alpha * i1 + drive
        u1 = (p1.beta * u1 + i1) * (1.0 - s1)
        if count_events:
            n_in_spikes = int(round(s0.sum()))
            if spec.kind == TDE:
                events.input_events[1] += int(round(fac.sum() + trig.sum()))
            else:
                events.input_events[1] += n_in_spikes * n_l1
            events.output_spikes[0] += n_in_spikes
        s1_new = (
            surrogate_sigma(u1 - theta1, lam)
            if soft
            else (u1 >= theta1).astype(np.float64)
        )
        s1 = s1_new
        s1_fed = s1 if mask is None else s1 * mask
        i2 = p2.alpha * i2 + s1_fed @ w2_t
        u2 = (p2.beta * u2 + i2) * (1.0 - s2)
        s2 = (
            surrogate_sigma(u2 - theta2, lam)
            if soft
            else (u2 >= theta2).astype(np.float64)
        )
        if count_events:
            # deliveries are charged per emitted spike times its fanout, so a
            # final-step hidden spike still costs its recurrent fanout
            n_s1 = int(round(s1.sum()))
            if spec.kind == LIFREC:
                events.input_events[1] += n_s1 * n_l1
            events.input_events[2] += n_s1 * n_l2
            events.output_spikes[1] += n_s1
            events.output_spikes[2] += int(round(s2.sum()))
        s1_seq[t] = s1
        s2_seq[t] = s2
        if record_tape:
            i1_seq[t] = i1
            u1_seq[t] = u1
            i2_seq[t] = i2
            u2_seq[t] = u2
            if g_seq is not None:
                g_seq[t] = g

    tape = None
    if record_tape:
        tape = AdjointTape(
            kind=spec.kind,
            s0=s0_seq,
            i1=i1_seq,
            u1=u1_seq,
            s1=s1_seq,
            i2=i2_seq,
            u2=u2_seq,
            s2=s2_seq,
            g=g_seq,
            mask=mask,
            soft=soft,
            lam=lam,
        )
    return s1_seq, s2_seq, tape, events


def forward_timestep(
    spec: NetworkSpec,
    params: ParameterSet,
    l0_spikes: np.ndarray,
    hidden_state: LifState | TdeState,
    out_state: LifState,
    dropout_mask: np.ndarray | None = None,
):
    """Advance the hidden and output layers one step for one input spike vector.

    Returns (hidden_state, out_state, l1_spikes, l2_spikes). A dropout mask,
    when given, zeroes hidden spikes on their way into the readout only.
    """
    params.validate_for(spec)
    l0_spikes = np.asarray(l0_spikes, dtype=np.float64)
    if l0_spikes.shape[-1] != spec.n_l0:
        raise ValueError(
            f"l0_spikes has {l0_spikes.shape[-1]} channels, spec expects {spec.n_l0}"
        )
    if spec.kind == TDE:
        if not isinstance(hidden_state, TdeState):
            raise TypeError("TDE spec requires a TdeState hidden state")
        fac_idx, trig_idx = pair_index_arrays(spec)
        hidden_state, l1_spikes = tde_step(
            hidden_state,
            params.tde_params(),
            l0_spikes[..., fac_idx],
            l0_spikes[..., trig_idx],
        )
    else:
        if not isinstance(hidden_state, LifState):
            raise TypeError(f"{spec.kind} spec requires a LifState hidden state")
        if hidden_state.current.shape[-1] != spec.n_l1:
            raise ValueError(
                f"hidden state carries {hidden_state.current.shape[-1]} cells, "
                f"spec expects {spec.n_l1}"
            )
        drive = l0_spikes @ params.w1.T
        if spec.kind == LIFREC:
            drive = drive + hidden_state.spiked_prev @ params.w_rec.T
        hidden_state, l1_spikes = lif_step(hidden_state, params.l1_params, drive)
    fed = l1_spikes if dropout_mask is None else l1_spikes * dropout_mask
    out_state, l2_spikes = lif_step(out_state, params.l2_params, fed @ params.w2.T)
    return hidden_state, out_state, l1_spikes, l2_spikes


def init_hidden_state(spec: NetworkSpec, batch_shape=()) -> LifState | TdeState:
    shape = tuple(batch_shape) + (spec.n_l1,)
    return TdeState.zeros(shape) if spec.kind == TDE else LifState.zeros(shape)


def run_network(
    spec: NetworkSpec,
    params: ParameterSet,
    raster: np.ndarray,
    record_tape: bool = False,
) -> RunResult:
    """Present one L0 spike raster [n_l0, T]; returns layer rasters and logs."""
    raster = np.asarray(raster, dtype=np.float64)
    if raster.ndim != 2 or raster.shape[0] != spec.n_l0:
        raise ValueError(
            f"raster must be [n_l0={spec.n_l0}, T], got shape {raster.shape}"
        )
    s0_seq = raster.T[:, None, :]
    s1_seq, s2_seq, tape, events = _run_core(
        spec, params, s0_seq, record_tape=record_tape, count_events=True
    )
    return RunResult(
        l1_spikes=s1_seq[:, 0, :].T,
        l2_spikes=s2_seq[:, 0, :].T,
        event_log=events,
        tape=tape,
    )


def _lif_params_to_json(p: LifParams) -> dict:
    return {"alpha": p.alpha, "beta": p.beta, "threshold": p.threshold, "dt": p.dt}


def _lif_params_from_json(d: dict) -> LifParams:
    return LifParams(
        alpha=d["alpha"], beta=d["beta"], threshold=d["threshold"], dt=d["dt"]
    )


def save_model(path, spec: NetworkSpec, params: ParameterSet) -> None:
    """Write spec plus parameters as JSON; floats round-trip bit-exactly."""
    params.validate_for(spec)
    doc = {
        "format": MODEL_FORMAT,
        "spec": {
            "kind": spec.kind,
            "n_l0": spec.n_l0,
            "n_l1": spec.n_l1,
            "n_l2": spec.n_l2,
            "tde_pairs": (
                None
                if spec.tde_pairs is None
                else [[a, b] for a, b in spec.tde_pairs]
            ),
        },
        "cells": {
            "l0": _lif_params_to_json(params.l0_params),
            "l1": _lif_params_to_json(params.l1_params),
            "l2": _lif_params_to_json(params.l2_params),
        },
        "w2": params.w2.tolist(),
        "w1": None if params.w1 is None else params.w1.tolist(),
        "w_rec": None if params.w_rec is None else params.w_rec.tolist(),
        "tau_g_raw": None if params.tau_g_raw is None else params.tau_g_raw.tolist(),
    }
    with open(path, "w") as f:
        json.dump(doc, f)
        f.write("\n")


def load_model(path) -> tuple[NetworkSpec, ParameterSet]:
    with open(path) as f:
        doc = json.load(f)
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(
            f"not a {MODEL_FORMAT} file (format={doc.get('format')!r})"
        )
    s = doc["spec"]
    spec = NetworkSpec(
        kind=s["kind"],
        n_l1=s["n_l1"],
        n_l0=s["n_l0"],
        n_l2=s["n_l2"],
        tde_pairs=(
            None
            if s["tde_pairs"] is None
            else tuple((a, b) for a, b in s["tde_pairs"])
        ),
    )
    params = ParameterSet(
        l0_params=_lif_params_from_json(doc["cells"]["l0"]),
        l1_params=_lif_params_from_json(doc["cells"]["l1"]),
        l2_params=_lif_params_from_json(doc["cells"]["l2"]),
        w2=np.array(doc["w2"], dtype=np.float64),
        w1=None if doc["w1"] is None else np.array(doc["w1"], dtype=np.float64),
        w_rec=(
            None if doc["w_rec"] is None else np.array(doc["w_rec"], dtype=np.float64)
        ),
        tau_g_raw=(
            None
            if doc["tau_g_raw"] is None
            else np.array(doc["tau_g_raw"], dtype=np.float64)
        ),
    )
    params.validate_for(spec)
    return spec, params
