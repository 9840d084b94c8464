"""Controller laws evaluated pointwise along a trajectory.

Four follower controllers share the relative state

    sigma_i = sum_j a_ij (x_i - x_j)

computed against whatever each follower can measure (true states, or observer
states for the output-feedback design). Leaders run their own bounded inputs
and never listen to anyone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .graph import Topology
from .matlib import as_matrix
from .synthesis import GainSet


class MissingState(ValueError):
    """Controller needs a state component (adaptive gains, observer states) not present."""


DISCONTINUOUS_STATIC = "discontinuous_static"
CONTINUOUS_STATIC = "continuous_static"
ADAPTIVE = "adaptive"
OBSERVER_BASED = "observer_based"
KINDS = (DISCONTINUOUS_STATIC, CONTINUOUS_STATIC, ADAPTIVE, OBSERVER_BASED)


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """x_dot = A x + B u, y = C x, shared by every agent."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        a = as_matrix(self.A, "A")
        b = as_matrix(self.B, "B")
        c = as_matrix(self.C, "C")
        if a.shape[0] != a.shape[1]:
            raise ValueError(f"A must be square, got {a.shape}")
        if b.shape[0] != a.shape[0]:
            raise ValueError(f"B has {b.shape[0]} rows, expected {a.shape[0]}")
        if c.shape[1] != a.shape[0]:
            raise ValueError(f"C has {c.shape[1]} columns, expected {a.shape[0]}")
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "B", b)
        object.__setattr__(self, "C", c)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.B.shape[1]

    @property
    def q(self) -> int:
        return self.C.shape[0]


class Sinusoid(NamedTuple):
    channel: int
    amplitude: float
    omega: float
    phase: float


@dataclass(frozen=True, eq=False)
class LeaderInputSpec:
    """u_j(t) = feedback_gain @ x_j + sum of sinusoids, with ||u_j|| <= gamma claimed."""

    feedback_gain: np.ndarray
    sinusoids: tuple
    gamma: float

    def __post_init__(self):
        gain = as_matrix(self.feedback_gain, "feedback_gain")
        object.__setattr__(self, "feedback_gain", gain)
        object.__setattr__(self, "sinusoids", tuple(self.sinusoids))
        if self.gamma <= 0.0:
            raise ValueError("gamma must be positive")
        for s in self.sinusoids:
            if not 0 <= s.channel < gain.shape[0]:
                raise ValueError(f"sinusoid channel {s.channel} out of range")


@dataclass(frozen=True, eq=False)
class ControllerConfig:
    kind: str
    gains: GainSet
    kappa: Optional[float] = None
    taus: Optional[np.ndarray] = None
    phis: Optional[np.ndarray] = None
    d0: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown controller kind {self.kind!r}")
        if self.kind != DISCONTINUOUS_STATIC:
            if self.kappa is None or self.kappa <= 0.0:
                raise ValueError(f"{self.kind} requires kappa > 0")
        if self.kind == ADAPTIVE:
            taus = np.asarray(self.taus, dtype=float)
            phis = np.asarray(self.phis, dtype=float)
            d0 = np.asarray(self.d0, dtype=float)
            if taus.ndim != 1 or phis.shape != taus.shape or d0.shape != taus.shape:
                raise ValueError("taus, phis and d0 must be equal-length vectors")
            if np.any(taus <= 0.0):
                raise ValueError("tau_i must be positive")
            if np.any(phis < 0.0):
                raise ValueError("phi_i must be nonnegative")
            if np.any(d0 < 0.0):
                raise ValueError("initial adaptive gains must be nonnegative")
            object.__setattr__(self, "taus", taus)
            object.__setattr__(self, "phis", phis)
            object.__setattr__(self, "d0", d0)


@dataclass
class NetworkState:
    """Snapshot of everything the controllers can read at time t.

    follower_states is M x n (canonical follower order), leader_states is
    (N - M) x n. adaptive_gains (length M) and observer_states (N x n) are
    present only for the designs that use them.
    """

    t: float
    follower_states: np.ndarray
    leader_states: np.ndarray
    adaptive_gains: Optional[np.ndarray] = None
    observer_states: Optional[np.ndarray] = None


def ghat(w: np.ndarray) -> np.ndarray:
    """Unit vector w/||w||, with g(0) = 0."""
    norm = math.sqrt(float(w @ w))
    if norm == 0.0:
        return np.zeros_like(w)
    return w / norm


def gsat(w: np.ndarray, kappa: float) -> np.ndarray:
    """Boundary-layer version: w/||w|| outside ||w|| > kappa, w/kappa inside."""
    norm = math.sqrt(float(w @ w))
    if norm > kappa:
        return w / norm
    return w / kappa


def rsat(w: np.ndarray, d: float, kappa: float) -> np.ndarray:
    """Adaptive boundary layer: w/||w|| when d ||w|| > kappa, else (w/kappa) d."""
    norm = math.sqrt(float(w @ w))
    if d * norm > kappa:
        return w / norm
    return (w / kappa) * d


def relative_state(i: int, state: NetworkState, topology: Topology) -> np.ndarray:
    """sigma_i = deg(i) x_i - sum_j a_ij x_j over everything follower i hears."""
    m = topology.n_followers
    if not 0 <= i < m:
        raise ValueError(f"follower index {i} out of range (M = {m})")
    x_all = np.concatenate([state.follower_states, state.leader_states], axis=0)
    row = topology.adjacency[i]
    return row.sum() * x_all[i] - row @ x_all


def observer_relative_state(i: int, state: NetworkState, topology: Topology) -> np.ndarray:
    """sigma_i evaluated on observer states instead of true states."""
    m = topology.n_followers
    if not 0 <= i < m:
        raise ValueError(f"follower index {i} out of range (M = {m})")
    if state.observer_states is None:
        raise MissingState("observer-based controller needs observer states")
    row = topology.adjacency[i]
    return row.sum() * state.observer_states[i] - row @ state.observer_states


def u_follower(
    i: int, state: NetworkState, config: ControllerConfig, topology: Topology
) -> np.ndarray:
    """Control input of follower i under the configured law."""
    gains = config.gains
    if config.kind == OBSERVER_BASED:
        sigma = observer_relative_state(i, state, topology)
    else:
        sigma = relative_state(i, state, topology)
    ks = gains.K @ sigma
    if config.kind == DISCONTINUOUS_STATIC:
        return gains.c1 * ks + gains.c2 * ghat(ks)
    if config.kind == CONTINUOUS_STATIC or config.kind == OBSERVER_BASED:
        return gains.c1 * ks + gains.c2 * gsat(ks, config.kappa)
    # adaptive
    if state.adaptive_gains is None:
        raise MissingState("adaptive controller needs the adaptive gain vector")
    d = float(state.adaptive_gains[i])
    return d * ks + d * rsat(ks, d, config.kappa)


def adaptive_gain_rate(
    i: int, state: NetworkState, config: ControllerConfig, topology: Topology
) -> float:
    """d_i update: tau_i (-phi_i d_i + sigma_i.T Gamma sigma_i + ||K sigma_i||)."""
    if state.adaptive_gains is None:
        raise MissingState("adaptive controller needs the adaptive gain vector")
    sigma = relative_state(i, state, topology)
    ks = config.gains.K @ sigma
    d = float(state.adaptive_gains[i])
    quad = float(sigma @ (config.gains.Gamma @ sigma))
    return float(config.taus[i]) * (
        -float(config.phis[i]) * d + quad + math.sqrt(float(ks @ ks))
    )


def observer_rate(
    j: int,
    state: NetworkState,
    u_j: np.ndarray,
    system: LinearSystem,
    l_obs: np.ndarray,
) -> np.ndarray:
    """Observer dynamics v_dot = A v + B u + L (C v - y) for agent j."""
    if state.observer_states is None:
        raise MissingState("observer rate needs observer states")
    x_all = np.concatenate([state.follower_states, state.leader_states], axis=0)
    v = state.observer_states[j]
    innovation = system.C @ v - system.C @ x_all[j]
    return system.A @ v + system.B @ u_j + l_obs @ innovation


def leader_input(spec: LeaderInputSpec, x_j: np.ndarray, t: float) -> np.ndarray:
    """Leader input: local feedback plus scheduled sinusoids."""
    u = spec.feedback_gain @ x_j
    for s in spec.sinusoids:
        u[s.channel] += s.amplitude * math.sin(s.omega * t + s.phase)
    return u
