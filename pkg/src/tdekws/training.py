"""Backprop-through-time with a fast-sigmoid surrogate, plus experiment loops.

The backward pass is reverse-mode accumulation written out over the recorded
forward tape. Spike thresholds use the surrogate slope 1/(1 + lam*|U - theta|)^2
in place of the Heaviside derivative; the multiplicative reset factor is
treated as a constant in normal (hard) mode and differentiated exactly in
soft-forward mode so gradients can be checked against finite differences.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import LifParams, surrogate_dsigma
from .encoding import Dataset
from .topology import (
    LIF,
    LIFREC,
    TDE,
    AdjointTape,
    EventLog,
    NetworkSpec,
    ParameterSet,
    _run_core,
    gamma_from_raw,
    pair_index_arrays,
    softplus,
    softplus_inv,
)

REPORT_FORMAT = "tdekws-report-v1"


class TrainingError(RuntimeError):
    """Raised when optimization produces non-finite values."""


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters of the training protocol."""

    dt: float = 0.015
    tau_syn: float = 0.008
    tau_mem: float = 0.002
    threshold: float = 1.0
    lam: float = 5.0
    learning_rate: float = 0.0015
    weight_decay: float = 0.0001
    p_drop: float = 0.1
    batch_size: int = 16
    epochs: int = 100
    seed: int = 0
    test_fraction: float = 0.2
    train_fraction: float = 1.0
    tau_g_init: float = 0.03
    top_k: int = 25

    def __post_init__(self) -> None:
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.weight_decay < 0.0:
            raise ValueError("weight_decay must be >= 0")
        if not 0.0 <= self.p_drop < 1.0:
            raise ValueError("p_drop must lie in [0, 1)")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be >= 1")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must lie in (0, 1)")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ValueError("train_fraction must lie in (0, 1]")
        if self.lam <= 0.0 or self.tau_g_init <= 0.0:
            raise ValueError("lam and tau_g_init must be positive")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")

    def cell_params(self) -> LifParams:
        return LifParams.from_time_constants(
            dt=self.dt, tau_syn=self.tau_syn, tau_mem=self.tau_mem,
            threshold=self.threshold,
        )


def init_parameters(
    spec: NetworkSpec,
    cfg: TrainConfig,
    rng: np.random.Generator,
    tau_g_init: np.ndarray | None = None,
) -> ParameterSet:
    """Uniform +-1/sqrt(fan_in) weights; TDE gain taus start at tau_g_init
    (per-cell array, e.g. lag-informed) or at the constant cfg.tau_g_init."""
    cell = cfg.cell_params()
    w1 = w_rec = tau_g_raw = None
    if spec.kind == TDE:
        if tau_g_init is None:
            tau = np.full(spec.n_l1, cfg.tau_g_init)
        else:
            tau = np.asarray(tau_g_init, dtype=np.float64)
            if tau.shape != (spec.n_l1,):
                raise ValueError(
                    f"tau_g_init shape {tau.shape} != ({spec.n_l1},)"
                )
            if np.any(tau <= 0.0):
                raise ValueError("tau_g_init entries must be positive")
        tau_g_raw = softplus_inv(tau)
    else:
        s1 = 1.0 / np.sqrt(spec.n_l0)
        w1 = rng.uniform(-s1, s1, size=(spec.n_l1, spec.n_l0))
        if spec.kind == LIFREC:
            sr = 1.0 / np.sqrt(spec.n_l1)
            w_rec = rng.uniform(-sr, sr, size=(spec.n_l1, spec.n_l1))
    s2 = 1.0 / np.sqrt(spec.n_l1)
    w2 = rng.uniform(-s2, s2, size=(spec.n_l2, spec.n_l1))
    params = ParameterSet(
        l0_params=cell, l1_params=cell, l2_params=cell,
        w2=w2, w1=w1, w_rec=w_rec, tau_g_raw=tau_g_raw,
    )
    params.validate_for(spec)
    return params


@dataclass
class Gradients:
    """Loss gradients for the trainable blocks present in the architecture."""

    w2: np.ndarray
    w1: np.ndarray | None = None
    w_rec: np.ndarray | None = None
    tau_g_raw: np.ndarray | None = None


def _softmax_ce(counts: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean cross-entropy over per-sample count logits, plus d(loss)/d(counts)."""
    counts = np.asarray(counts, dtype=np.float64)
    shifted = counts - counts.max(axis=1, keepdims=True)
    expd = np.exp(shifted)
    probs = expd / expd.sum(axis=1, keepdims=True)
    n = counts.shape[0]
    rows = np.arange(n)
    loss = float(-np.log(probs[rows, labels] + 1e-300).mean())
    grad = probs.copy()
    grad[rows, labels] -= 1.0
    grad /= n
    return loss, grad


def spike_count_cross_entropy(l2_raster: np.ndarray, label: int) -> float:
    """Cross-entropy of one sample using output spike counts as logits."""
    l2_raster = np.asarray(l2_raster, dtype=np.float64)
    if l2_raster.ndim != 2:
        raise ValueError(f"l2_raster must be [n_l2, T], got shape {l2_raster.shape}")
    counts = l2_raster.sum(axis=1)[None, :]
    if not 0 <= label < counts.shape[1]:
        raise ValueError(f"label {label} outside [0, {counts.shape[1]})")
    loss, _ = _softmax_ce(counts, np.array([label]))
    return loss


def training_forward(
    spec: NetworkSpec,
    params: ParameterSet,
    s0_seq: np.ndarray,
    lam: float,
    mask: np.ndarray | None = None,
    soft: bool = False,
) -> AdjointTape:
    """Run the stepped forward over [T, batch, n_l0] and record the tape."""
    _, _, tape, _ = _run_core(
        spec, params, s0_seq, soft=soft, lam=lam, mask=mask, record_tape=True
    )
    return tape


def replay_tape(spec: NetworkSpec, params: ParameterSet, tape: AdjointTape) -> bool:
    """True when re-running the forward reproduces the recorded spike arrays."""
    redo = training_forward(
        spec, params, tape.s0, lam=tape.lam, mask=tape.mask, soft=tape.soft
    )
    return bool(
        np.array_equal(redo.s1, tape.s1) and np.array_equal(redo.s2, tape.s2)
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def backward(
    tape: AdjointTape,
    spec: NetworkSpec,
    params: ParameterSet,
    labels: np.ndarray,
) -> tuple[float, Gradients]:
    """Reverse-mode accumulation over the tape; returns (loss, gradients).

    Hard tapes use the surrogate slope at every threshold crossing and treat
    the reset factor (1 - spike) as a constant. Soft tapes additionally carry
    gradient through the reset factor, matching their forward exactly.
    """
    labels = np.asarray(labels)
    n_steps, batch = tape.n_steps, tape.batch_size
    p1, p2 = params.l1_params, params.l2_params
    lam, soft = tape.lam, tape.soft
    loss, g_counts = _softmax_ce(tape.output_counts(), labels)

    mask = tape.mask
    w2 = params.w2
    n_l1, n_l2 = spec.n_l1, spec.n_l2
    d_w2 = np.zeros_like(w2)
    if spec.kind == TDE:
        fac_idx, trig_idx = pair_index_arrays(spec)
        gamma = gamma_from_raw(params.tau_g_raw, p1.dt)
        d_gamma = np.zeros(n_l1)
        d_w1 = d_wrec = None
    else:
        d_w1 = np.zeros_like(params.w1)
        d_wrec = np.zeros_like(params.w_rec) if spec.kind == LIFREC else None
        w_rec = params.w_rec

    zeros1 = np.zeros((batch, n_l1))
    zeros2 = np.zeros((batch, n_l2))
    du2_carry = zeros2.copy()
    di2_carry = zeros2.copy()
    ds2_pend = zeros2.copy()
    du1_carry = zeros1.copy()
    di1_carry = zeros1.copy()
    ds1_pend = zeros1.copy()
    dg_carry = zeros1.copy() if spec.kind == TDE else None

    for t in range(n_steps - 1, -1, -1):
        s1_t = tape.s1[t]
        s1m_t = s1_t * mask if mask is not None else s1_t
        # readout layer
        ds2 = g_counts + ds2_pend
        du2 = ds2 * surrogate_dsigma(tape.u2[t] - p2.threshold, lam) + du2_carry
        if t > 0:
            r2 = 1.0 - tape.s2[t - 1]
            ds2_pend = (
                -(du2 * (p2.beta * tape.u2[t - 1] + tape.i2[t]))
                if soft
                else np.zeros_like(ds2_pend)
            )
        else:
            r2 = 1.0
        di2 = du2 * r2 + di2_carry
        du2_carry = du2 * (p2.beta * r2)
        di2_carry = p2.alpha * di2
        d_w2 += di2.T @ s1m_t
        ds1 = di2 @ w2
        if mask is not None:
            ds1 *= mask
        ds1 += ds1_pend
        # hidden layer
        du1 = ds1 * surrogate_dsigma(tape.u1[t] - p1.threshold, lam) + du1_carry
        if t > 0:
            r1 = 1.0 - tape.s1[t - 1]
            ds1_pend = (
                -(du1 * (p1.beta * tape.u1[t - 1] + tape.i1[t]))
                if soft
                else np.zeros_like(ds1_pend)
            )
        else:
            r1 = 1.0
            ds1_pend = np.zeros_like(ds1_pend)
        di1 = du1 * r1 + di1_carry
        du1_carry = du1 * (p1.beta * r1)
        di1_carry = p1.alpha * di1
        if spec.kind == TDE:
            trig_t = tape.s0[t][:, trig_idx]
            dg = di1 * trig_t + dg_carry
            if t > 0:
                d_gamma += (dg * tape.g[t - 1]).sum(axis=0)
            dg_carry = gamma * dg
        else:
            d_w1 += di1.T @ tape.s0[t]
            if spec.kind == LIFREC and t > 0:
                d_wrec += di1.T @ tape.s1[t - 1]
                ds1_pend = ds1_pend + di1 @ w_rec

    if spec.kind == TDE:
        # gamma = exp(-dt/tau), tau = softplus(raw)
        tau = softplus(params.tau_g_raw)
        d_raw = d_gamma * gamma * (p1.dt / (tau * tau)) * _sigmoid(params.tau_g_raw)
        grads = Gradients(w2=d_w2, tau_g_raw=d_raw)
    elif spec.kind == LIFREC:
        grads = Gradients(w2=d_w2, w1=d_w1, w_rec=d_wrec)
    else:
        grads = Gradients(w2=d_w2, w1=d_w1)
    return loss, grads


def soft_loss(
    spec: NetworkSpec,
    params: ParameterSet,
    s0_seq: np.ndarray,
    labels: np.ndarray,
    lam: float,
    mask: np.ndarray | None = None,
) -> float:
    """Loss of the fully differentiable soft forward; finite-difference target."""
    tape = training_forward(spec, params, s0_seq, lam=lam, mask=mask, soft=True)
    loss, _ = _softmax_ce(tape.output_counts(), np.asarray(labels))
    return loss


_DECAYED_BLOCKS = ("w1", "w_rec", "w2")
_ALL_BLOCKS = ("w1", "w_rec", "w2", "tau_g_raw")


class Adam:
    """ADAM with bias correction and decoupled weight decay on weight matrices.

    A zero-gradient step moves parameters only by the decay term; with
    weight_decay = 0 it is a no-op.
    """

    def __init__(
        self,
        params: ParameterSet,
        learning_rate: float,
        weight_decay: float = 0.0,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> None:
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = {}
        self.v = {}
        for name in _ALL_BLOCKS:
            block = getattr(params, name)
            if block is not None:
                self.m[name] = np.zeros_like(block)
                self.v[name] = np.zeros_like(block)

    def step(self, params: ParameterSet, grads: Gradients) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name in self.m:
            p = getattr(params, name)
            g = getattr(grads, name)
            if g is None:
                raise ValueError(f"missing gradient for block {name}")
            m = self.m[name]
            v = self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            update = (m / bc1) / (np.sqrt(v / bc2) + self.eps)
            p -= self.learning_rate * update
            if self.weight_decay > 0.0 and name in _DECAYED_BLOCKS:
                p -= self.learning_rate * self.weight_decay * p


def _dataset_seq(dataset: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Dataset as ([T, N, n_l0] spike sequence, [N] labels)."""
    stacked = dataset.stacked()  # [N, n, T]
    seq = np.ascontiguousarray(stacked.transpose(2, 0, 1))
    return seq, np.asarray(dataset.labels, dtype=np.int64)


def predict_counts(
    spec: NetworkSpec,
    params: ParameterSet,
    s0_seq: np.ndarray,
    batch_size: int = 256,
) -> np.ndarray:
    """Output spike counts [N, n_l2] of the hard forward, in input order."""
    n = s0_seq.shape[1]
    counts = np.zeros((n, spec.n_l2))
    for lo in range(0, n, batch_size):
        hi = min(lo + batch_size, n)
        _, s2_seq, _, _ = _run_core(spec, params, s0_seq[:, lo:hi, :])
        counts[lo:hi] = s2_seq.sum(axis=0)
    return counts


def evaluate(spec: NetworkSpec, params: ParameterSet, dataset: Dataset) -> float:
    """Classification accuracy: predicted class = most active output cell."""
    seq, labels = _dataset_seq(dataset)
    counts = predict_counts(spec, params, seq)
    return float((counts.argmax(axis=1) == labels).mean())


def collect_events(
    spec: NetworkSpec,
    params: ParameterSet,
    dataset: Dataset,
    batch_size: int = 128,
) -> EventLog:
    """Spike/delivery bookkeeping of the trained net over a whole dataset."""
    seq, _ = _dataset_seq(dataset)
    n = seq.shape[1]
    log = EventLog()
    for lo in range(0, n, batch_size):
        hi = min(lo + batch_size, n)
        _, _, _, events = _run_core(
            spec, params, seq[:, lo:hi, :], count_events=True
        )
        log = log.merge(events)
    return log


def split_dataset(
    dataset: Dataset,
    test_fraction: float,
    train_fraction: float = 1.0,
    seed: int = 0,
) -> tuple[Dataset, Dataset]:
    """Stratified split; train_fraction then subsamples the train side per class."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must lie in (0, 1)")
    if not 0.0 < train_fraction <= 1.0:
        raise ValueError("train_fraction must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    labels = np.asarray(dataset.labels)
    train_idx: list[int] = []
    test_idx: list[int] = []
    for c in range(dataset.n_classes):
        members = np.flatnonzero(labels == c)
        if members.size == 0:
            continue
        members = members[rng.permutation(members.size)]
        n_test = int(test_fraction * members.size)
        if n_test < 1 or n_test >= members.size:
            raise ValueError(
                f"class {c}: cannot hold out {n_test} of {members.size} samples"
            )
        test_idx.extend(members[:n_test])
        rest = members[n_test:]
        n_train = int(train_fraction * rest.size)
        if n_train < 1:
            raise ValueError(f"class {c}: train_fraction leaves no samples")
        train_idx.extend(rest[:n_train])
    return dataset.subset(sorted(train_idx)), dataset.subset(sorted(test_idx))


def top_k_mean(values, k: int) -> float:
    """Mean of the k largest entries (all entries when fewer than k)."""
    arr = np.sort(np.asarray(values, dtype=np.float64))
    return float(arr[-k:].mean()) if arr.size else 0.0


@dataclass
class TrainReport:
    """Per-epoch curves and the top-k summary of one training run."""

    kind: str
    n_l1: int
    seed: int
    epochs: int
    train_loss: list[float]
    test_acc: list[float]
    top25_acc: float
    wall_clock_s: float
    n_train: int
    n_test: int
    config: dict = field(default_factory=dict)

    def to_json(self, path) -> None:
        doc = {"format": REPORT_FORMAT}
        doc.update(self.__dict__)
        with open(path, "w") as f:
            json.dump(doc, f, indent=1)
            f.write("\n")

    @classmethod
    def from_json(cls, path) -> "TrainReport":
        with open(path) as f:
            doc = json.load(f)
        if doc.pop("format", None) != REPORT_FORMAT:
            raise ValueError(f"not a {REPORT_FORMAT} file")
        return cls(**doc)


def train(
    train_set: Dataset,
    test_set: Dataset,
    spec: NetworkSpec,
    init_params: ParameterSet,
    cfg: TrainConfig,
) -> tuple[ParameterSet, TrainReport]:
    """Minibatch BPTT with ADAM; per-epoch held-out accuracy; top-k summary.

    Deterministic given cfg.seed: shuffling and dropout draw from one
    generator seeded there. Raises TrainingError on non-finite loss.
    """
    if train_set.n_neurons != spec.n_l0 or test_set.n_neurons != spec.n_l0:
        raise ValueError("dataset channel count does not match spec.n_l0")
    if train_set.n_classes > spec.n_l2:
        raise ValueError("more classes than output cells")
    t_start = time.perf_counter()
    rng = np.random.default_rng(cfg.seed)
    params = init_params.copy()
    params.validate_for(spec)
    adam = Adam(params, cfg.learning_rate, cfg.weight_decay)
    train_seq, train_labels = _dataset_seq(train_set)
    test_seq, test_labels = _dataset_seq(test_set)
    n_train = train_seq.shape[1]
    losses: list[float] = []
    accs: list[float] = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n_train)
        epoch_loss = 0.0
        n_batches = 0
        for lo in range(0, n_train, cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            s0 = train_seq[:, idx, :]
            if cfg.p_drop > 0.0:
                mask = (
                    rng.random((idx.size, spec.n_l1)) >= cfg.p_drop
                ).astype(np.float64)
            else:
                mask = None
            tape = training_forward(spec, params, s0, lam=cfg.lam, mask=mask)
            loss, grads = backward(tape, spec, params, train_labels[idx])
            if not np.isfinite(loss):
                raise TrainingError(
                    f"non-finite loss at epoch {epoch}, batch {n_batches}"
                )
            adam.step(params, grads)
            epoch_loss += loss
            n_batches += 1
        losses.append(epoch_loss / n_batches)
        counts = predict_counts(spec, params, test_seq)
        accs.append(float((counts.argmax(axis=1) == test_labels).mean()))
    report = TrainReport(
        kind=spec.kind,
        n_l1=spec.n_l1,
        seed=cfg.seed,
        epochs=cfg.epochs,
        train_loss=losses,
        test_acc=accs,
        top25_acc=top_k_mean(accs, cfg.top_k),
        wall_clock_s=time.perf_counter() - t_start,
        n_train=n_train,
        n_test=test_seq.shape[1],
        config={
            "learning_rate": cfg.learning_rate,
            "weight_decay": cfg.weight_decay,
            "p_drop": cfg.p_drop,
            "batch_size": cfg.batch_size,
            "lam": cfg.lam,
            "dt": cfg.dt,
            "tau_syn": cfg.tau_syn,
            "tau_mem": cfg.tau_mem,
        },
    )
    return params, report


def parallel_map(fn, items, threads: int = 1) -> list:
    """Ordered map, optionally over a thread pool; results match input order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _train_one(
    dataset: Dataset,
    spec: NetworkSpec,
    cfg: TrainConfig,
    seed: int,
    tau_g_init: np.ndarray | None,
) -> tuple[ParameterSet, TrainReport]:
    run_cfg = replace(cfg, seed=seed)
    train_set, test_set = split_dataset(
        dataset, run_cfg.test_fraction, run_cfg.train_fraction, seed=seed
    )
    rng = np.random.default_rng(seed)
    params0 = init_parameters(spec, run_cfg, rng, tau_g_init=tau_g_init)
    return train(train_set, test_set, spec, params0, run_cfg)


def run_comparison(
    dataset: Dataset,
    size_triples,
    cfg: TrainConfig,
    n_seeds: int = 3,
    ranked=None,
    threads: int = 1,
) -> list[dict]:
    """Train all three architectures at matched connection budgets.

    size_triples holds (tde_n_l1, lifrec_n_l1, lif_n_l1) tuples; TDE nets use
    the top pairs of the ranked correlation table (computed here if absent)
    with lag-informed gain taus. Returns one row dict per (size, arch, seed)
    with accuracy plus per-keyword spike and SynOps totals.
    """
    from .analysis import count_synops, init_tau_from_lags, prune, rank_pairs

    if ranked is None:
        ranked = rank_pairs(dataset)
    from .topology import connection_count

    jobs = []
    for triple in size_triples:
        tde_n, lifrec_n, lif_n = triple
        tde = prune(ranked, tde_n, n_l0=dataset.n_neurons, n_l2=dataset.n_classes)
        taus = init_tau_from_lags(ranked[:tde_n], dt=cfg.dt)
        lifrec = NetworkSpec(
            kind=LIFREC, n_l1=lifrec_n, n_l0=dataset.n_neurons,
            n_l2=dataset.n_classes,
        )
        lif = NetworkSpec(
            kind=LIF, n_l1=lif_n, n_l0=dataset.n_neurons, n_l2=dataset.n_classes
        )
        for spec, tau_init in ((tde, taus), (lifrec, None), (lif, None)):
            for seed in range(n_seeds):
                jobs.append((spec, tau_init, seed))

    def run_job(job):
        spec, tau_init, seed = job
        params, report = _train_one(dataset, spec, cfg, seed, tau_init)
        log = collect_events(spec, params, dataset)
        synops = count_synops(log)
        return {
            "arch": spec.kind,
            "n_l1": spec.n_l1,
            "connections": connection_count(spec),
            "seed": seed,
            "top25_acc": report.top25_acc,
            "spikes_total": log.total_spikes() / log.n_samples,
            "synops_total": synops.total / log.n_samples,
        }

    return parallel_map(run_job, jobs, threads)


def run_training_fraction_sweep(
    dataset: Dataset,
    specs,
    cfg: TrainConfig,
    fractions=(1.0, 0.75),
    n_seeds: int = 3,
    tau_g_inits=None,
    threads: int = 1,
) -> tuple[list[dict], dict]:
    """Re-train each spec at reduced train-set sizes (test side unchanged).

    Returns per-run rows and a per-architecture summary holding the mean
    accuracy at each fraction plus the drop relative to the full train set.
    """
    specs = list(specs)
    if tau_g_inits is None:
        tau_g_inits = [None] * len(specs)
    jobs = []
    for spec, tau_init in zip(specs, tau_g_inits):
        for fraction in fractions:
            for seed in range(n_seeds):
                jobs.append((spec, tau_init, fraction, seed))

    def run_job(job):
        spec, tau_init, fraction, seed = job
        frac_cfg = replace(cfg, train_fraction=fraction)
        _, report = _train_one(dataset, spec, frac_cfg, seed, tau_init)
        return {
            "arch": spec.kind,
            "n_l1": spec.n_l1,
            "fraction": fraction,
            "seed": seed,
            "top25_acc": report.top25_acc,
        }

    rows = parallel_map(run_job, jobs, threads)
    summary: dict = {}
    for spec in specs:
        means = {}
        for fraction in fractions:
            vals = [
                r["top25_acc"]
                for r in rows
                if r["arch"] == spec.kind
                and r["n_l1"] == spec.n_l1
                and r["fraction"] == fraction
            ]
            means[fraction] = float(np.mean(vals))
        full = means.get(1.0, max(means.values()))
        summary[f"{spec.kind}:{spec.n_l1}"] = {
            "mean_by_fraction": means,
            "drop_from_full": {
                str(f): full - m for f, m in means.items() if f != 1.0
            },
        }
    return rows, summary
