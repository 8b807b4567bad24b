"""Discretized current-based LIF and time-difference-encoder cell dynamics.

All step functions are pure: they take the previous state and return a fresh
state plus the spike vector emitted this step. State arrays may carry a
leading batch dimension; every update is elementwise and broadcasts over it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def decay_factor(dt: float, tau: float) -> float:
    """Per-step decay exp(-dt/tau) of a leaky trace sampled every dt seconds."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    if tau <= 0.0:
        raise ValueError(f"time constant must be positive, got {tau}")
    return math.exp(-dt / tau)


@dataclass(frozen=True)
class LifParams:
    """Constants of a current-based LIF cell.

    alpha and beta are the per-step synaptic and membrane decays; when built
    from time constants they equal exp(-dt/tau_syn) and exp(-dt/tau_mem).
    The membrane resets to zero on the step after a spike.
    """

    alpha: float
    beta: float
    threshold: float = 1.0
    dt: float = 0.015

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if self.threshold <= 0.0:
            raise ValueError(f"threshold must be positive, got {self.threshold}")
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    @classmethod
    def from_time_constants(
        cls, dt: float, tau_syn: float, tau_mem: float, threshold: float = 1.0
    ) -> "LifParams":
        return cls(
            alpha=decay_factor(dt, tau_syn),
            beta=decay_factor(dt, tau_mem),
            threshold=threshold,
            dt=dt,
        )


@dataclass
class LifState:
    """Synaptic current, membrane potential and last-step spike indicator."""

    current: np.ndarray
    membrane: np.ndarray
    spiked_prev: np.ndarray

    @classmethod
    def zeros(cls, shape) -> "LifState":
        return cls(
            current=np.zeros(shape, dtype=np.float64),
            membrane=np.zeros(shape, dtype=np.float64),
            spiked_prev=np.zeros(shape, dtype=np.float64),
        )


def lif_step(
    state: LifState, params: LifParams, drive: np.ndarray
) -> tuple[LifState, np.ndarray]:
    """Advance a population of LIF cells one step under an input drive.

    I(t) = alpha*I(t-1) + drive(t)
    U(t) = (beta*U(t-1) + I(t)) * (1 - spiked_prev)   # reset-to-zero after a spike
    spike when U(t) >= threshold.
    """
    drive = np.asarray(drive, dtype=np.float64)
    if drive.shape != state.current.shape:
        raise ValueError(
            f"drive shape {drive.shape} does not match state shape {state.current.shape}"
        )
    if not np.all(np.isfinite(drive)):
        raise ValueError("drive contains non-finite values")
    current = params.alpha * state.current + drive
    membrane = (params.beta * state.membrane + current) * (1.0 - state.spiked_prev)
    spikes = (membrane >= params.threshold).astype(np.float64)
    return LifState(current=current, membrane=membrane, spiked_prev=spikes), spikes


@dataclass(frozen=True)
class TdeParams:
    """Constants of a population of time-difference-encoder cells.

    Each cell listens to one facilitatory and one triggering input. A
    facilitatory spike charges a gain trace decaying with per-step factor
    gamma (one entry per cell); a triggering spike injects the current gain
    into the synaptic current. Membrane and current decay as in the LIF cell.
    """

    alpha: float
    beta: float
    gamma: np.ndarray
    w_fac: float = 1.0
    threshold: float = 1.0
    dt: float = 0.015

    def __post_init__(self) -> None:
        gamma = np.asarray(self.gamma, dtype=np.float64)
        object.__setattr__(self, "gamma", gamma)
        if gamma.ndim != 1:
            raise ValueError(f"gamma must be a 1-d array, got shape {gamma.shape}")
        if not np.all((gamma > 0.0) & (gamma < 1.0)):
            raise ValueError("every gamma must lie in (0, 1)")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 < self.beta < 1.0:
            raise ValueError(f"beta must lie in (0, 1), got {self.beta}")
        if not (math.isfinite(self.w_fac) and self.w_fac > 0.0):
            raise ValueError(f"w_fac must be positive and finite, got {self.w_fac}")
        if self.threshold <= 0.0:
            raise ValueError(f"threshold must be positive, got {self.threshold}")
        if self.dt <= 0.0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    @property
    def n_cells(self) -> int:
        return int(self.gamma.shape[0])


@dataclass
class TdeState:
    """Gain trace plus the LIF-style current/membrane/spike-indicator triple."""

    gain: np.ndarray
    current: np.ndarray
    membrane: np.ndarray
    spiked_prev: np.ndarray

    @classmethod
    def zeros(cls, shape) -> "TdeState":
        return cls(
            gain=np.zeros(shape, dtype=np.float64),
            current=np.zeros(shape, dtype=np.float64),
            membrane=np.zeros(shape, dtype=np.float64),
            spiked_prev=np.zeros(shape, dtype=np.float64),
        )


def tde_step(
    state: TdeState,
    params: TdeParams,
    fac_spikes: np.ndarray,
    trig_spikes: np.ndarray,
) -> tuple[TdeState, np.ndarray]:
    """Advance TDE cells one step given this step's facilitatory/trigger spikes.

    G(t) = gamma*G(t-1) + w_fac*fac(t)        # gain updated first
    I(t) = alpha*I(t-1) + G(t)*trig(t)        # so a same-step fac+trig pair
    U(t) = (beta*U(t-1) + I(t)) * (1 - spiked_prev)   # lands at full strength
    """
    fac_spikes = np.asarray(fac_spikes, dtype=np.float64)
    trig_spikes = np.asarray(trig_spikes, dtype=np.float64)
    if fac_spikes.shape != state.gain.shape or trig_spikes.shape != state.gain.shape:
        raise ValueError(
            f"spike shapes {fac_spikes.shape}/{trig_spikes.shape} do not match "
            f"state shape {state.gain.shape}"
        )
    if fac_spikes.shape[-1] != params.n_cells:
        raise ValueError(
            f"state carries {fac_spikes.shape[-1]} cells, params carry {params.n_cells}"
        )
    gain = params.gamma * state.gain + params.w_fac * fac_spikes
    current = params.alpha * state.current + gain * trig_spikes
    membrane = (params.beta * state.membrane + current) * (1.0 - state.spiked_prev)
    spikes = (membrane >= params.threshold).astype(np.float64)
    return (
        TdeState(gain=gain, current=current, membrane=membrane, spiked_prev=spikes),
        spikes,
    )


def surrogate_sigma(u, lam: float):
    """Fast sigmoid u / (1 + lam*|u|), the soft spike used for gradient checks."""
    u = np.asarray(u, dtype=np.float64)
    return u / (1.0 + lam * np.abs(u))


def surrogate_dsigma(u, lam: float):
    """Derivative 1 / (1 + lam*|u|)^2 of the fast sigmoid; replaces the
    Heaviside derivative in the backward pass."""
    u = np.asarray(u, dtype=np.float64)
    denom = 1.0 + lam * np.abs(u)
    return 1.0 / (denom * denom)
