"""Closed-loop network simulation: stacked ODE assembly, RK4, error metrics.

The stacked state is laid out as

    [follower states | leader states | adaptive gains (if any) | observer states (if any)]

row-major per agent. Integration is classic fixed-step RK4; the discontinuous
controller is integrated as-is (chattering is something this tool measures, not
something it smooths away). The leader-input bound monitor samples at grid
nodes only, not at RK4 stage points.

The recorded grid is t_k = k h for k = 0 .. S-1 with S = round(t_end / h):
one row per integration step, each row holding the state at the step start and
the inputs applied over that step. t_end = h therefore records exactly the
initial condition (a zero-step horizon).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .control import (
    ADAPTIVE,
    OBSERVER_BASED,
    ControllerConfig,
    LinearSystem,
    NetworkState,
    adaptive_gain_rate,
    leader_input,
    observer_rate,
    u_follower,
)
from .graph import LaplacianPartition, Topology
from .matlib import solve_linear
from .synthesis import BoundReport, GainSet


class NonFiniteState(RuntimeError):
    """State blew up mid-run. Carries the finite prefix of the trajectory."""

    def __init__(self, message, trajectory=None, step=None, t=None):
        super().__init__(message)
        self.trajectory = trajectory
        self.step = step
        self.t = t


@dataclass(frozen=True, eq=False)
class Scenario:
    """Everything needed to run one closed-loop simulation.

    x0 (and v0 for observer designs) are in canonical followers-first order;
    the CLI permutes user-ordered input before building one of these.
    """

    system: LinearSystem
    topology: Topology
    controller: ControllerConfig
    leader_specs: tuple
    x0: np.ndarray
    v0: Optional[np.ndarray] = None
    t_end: float = 20.0
    h: float = 1e-3

    def __post_init__(self):
        if self.h <= 0.0:
            raise ValueError("h must be positive")
        if self.t_end < self.h:
            raise ValueError("t_end must be at least one step h")
        n = self.system.n
        n_agents = self.topology.n_agents
        m = self.topology.n_followers
        x0 = np.asarray(self.x0, dtype=float)
        if x0.shape != (n_agents, n):
            raise ValueError(f"x0 must be {(n_agents, n)}, got {x0.shape}")
        if not np.isfinite(x0).all():
            raise ValueError("x0 contains non-finite entries")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "leader_specs", tuple(self.leader_specs))
        if len(self.leader_specs) != n_agents - m:
            raise ValueError(
                f"expected {n_agents - m} leader specs, got {len(self.leader_specs)}"
            )
        for spec in self.leader_specs:
            if spec.feedback_gain.shape != (self.system.p, n):
                raise ValueError(
                    f"leader feedback gain must be {(self.system.p, n)}, "
                    f"got {spec.feedback_gain.shape}"
                )
        if self.controller.kind == OBSERVER_BASED:
            if self.v0 is None:
                raise ValueError("observer-based scenario needs v0")
            v0 = np.asarray(self.v0, dtype=float)
            if v0.shape != (n_agents, n):
                raise ValueError(f"v0 must be {(n_agents, n)}, got {v0.shape}")
            object.__setattr__(self, "v0", v0)
        elif self.v0 is not None:
            raise ValueError("v0 only makes sense for observer-based scenarios")
        if self.controller.kind == ADAPTIVE and self.controller.d0.shape != (m,):
            raise ValueError(f"d0 must have length {m}")


@dataclass(eq=False)
class Trajectory:
    """Uniform-grid record of one run. Arrays are indexed [step, ...]."""

    times: np.ndarray
    follower_states: np.ndarray      # (S, M, n)
    leader_states: np.ndarray        # (S, N-M, n)
    follower_inputs: np.ndarray      # (S, M, p)
    leader_inputs: np.ndarray        # (S, N-M, p)
    xi: np.ndarray                   # (S, M*n)
    xi_norm: np.ndarray              # (S,)
    v1: np.ndarray                   # (S,)
    assumption2_violations: int
    adaptive_gains: Optional[np.ndarray] = None   # (S, M)
    observer_states: Optional[np.ndarray] = None  # (S, N, n)

    def state_at(self, k: int) -> NetworkState:
        return NetworkState(
            t=float(self.times[k]),
            follower_states=self.follower_states[k],
            leader_states=self.leader_states[k],
            adaptive_gains=None if self.adaptive_gains is None else self.adaptive_gains[k],
            observer_states=None if self.observer_states is None else self.observer_states[k],
        )


@dataclass(frozen=True)
class Metrics:
    tail_sup_xi_sq: float
    d1_certified: bool
    envelope_violations: int
    chattering_index: float
    d2_certified: Optional[bool] = None
    d_sup: Optional[float] = None


def containment_error(state: NetworkState, part: LaplacianPartition, n: int) -> np.ndarray:
    """xi = x_f - (W (x) I_n) x_l, flattened follower-major."""
    diff = state.follower_states - part.W @ state.leader_states
    return diff.reshape(-1)


def lyapunov_v1(xi: np.ndarray, part: LaplacianPartition, p: np.ndarray, p_inv=None) -> float:
    """V1 = 0.5 xi.T (L1 (x) P^-1) xi.

    P^-1 is solved on demand; pass p_inv to amortize it across a run.
    """
    if p_inv is None:
        p_inv = solve_linear(p, np.eye(p.shape[0]))
    m = part.L1.shape[0]
    block = np.asarray(xi, dtype=float).reshape(m, -1)
    return 0.5 * float(np.sum(block * (part.L1 @ block @ p_inv)))


def _make_evaluator(scn: Scenario, gains: GainSet):
    """Build evaluate(t, y) -> (ydot, follower inputs, leader inputs)."""
    topo = scn.topology
    cfg = scn.controller
    system = scn.system
    m = topo.n_followers
    n_leaders = topo.n_leaders
    n_agents = topo.n_agents
    n = system.n
    p = system.p
    adaptive = cfg.kind == ADAPTIVE
    observer = cfg.kind == OBSERVER_BASED
    a_t = system.A.T.copy()
    b_t = system.B.T.copy()
    off_xl = m * n
    off_extra = (m + n_leaders) * n

    def evaluate(t: float, y: np.ndarray):
        xf = y[:off_xl].reshape(m, n)
        xl = y[off_xl:off_extra].reshape(n_leaders, n)
        d = y[off_extra:off_extra + m] if adaptive else None
        v = (
            y[off_extra:off_extra + n_agents * n].reshape(n_agents, n)
            if observer
            else None
        )
        s = NetworkState(
            t=t, follower_states=xf, leader_states=xl,
            adaptive_gains=d, observer_states=v,
        )
        u_f = np.empty((m, p))
        for i in range(m):
            u_f[i] = u_follower(i, s, cfg, topo)
        u_l = np.empty((n_leaders, p))
        for j in range(n_leaders):
            u_l[j] = leader_input(scn.leader_specs[j], xl[j], t)
        xdot_f = xf @ a_t + u_f @ b_t
        xdot_l = xl @ a_t + u_l @ b_t
        pieces = [xdot_f.reshape(-1), xdot_l.reshape(-1)]
        if adaptive:
            pieces.append(
                np.array([adaptive_gain_rate(i, s, cfg, topo) for i in range(m)])
            )
        if observer:
            u_all = np.concatenate([u_f, u_l], axis=0)
            vdot = np.empty((n_agents, n))
            for j in range(n_agents):
                vdot[j] = observer_rate(j, s, u_all[j], system, gains.L_obs)
            pieces.append(vdot.reshape(-1))
        return np.concatenate(pieces), u_f, u_l

    return evaluate


def assemble_rhs(scn: Scenario, gains: GainSet, part: LaplacianPartition) -> Callable:
    """The stacked vector field f(t, y) for the configured closed loop."""
    evaluate = _make_evaluator(scn, gains)

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return evaluate(t, np.asarray(y, dtype=float))[0]

    return rhs


def rk4_step(f: Callable, t: float, y: np.ndarray, h: float) -> np.ndarray:
    """One classic Runge-Kutta 4 step."""
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + (0.5 * h) * k1)
    k3 = f(t + 0.5 * h, y + (0.5 * h) * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(scn: Scenario, gains: GainSet, part: LaplacianPartition) -> Trajectory:
    """Run the scenario, recording every step start.

    Raises NonFiniteState on divergence, with the finite prefix attached.
    """
    topo = scn.topology
    cfg = scn.controller
    system = scn.system
    m = topo.n_followers
    n_leaders = topo.n_leaders
    n_agents = topo.n_agents
    n = system.n
    p = system.p
    h = scn.h
    adaptive = cfg.kind == ADAPTIVE
    observer = cfg.kind == OBSERVER_BASED

    steps = int(round(scn.t_end / h))
    if steps < 1:
        raise ValueError("horizon shorter than one step")

    pieces = [scn.x0[:m].reshape(-1), scn.x0[m:].reshape(-1)]
    if adaptive:
        pieces.append(cfg.d0.astype(float))
    if observer:
        pieces.append(scn.v0.reshape(-1))
    y = np.concatenate(pieces)

    evaluate = _make_evaluator(scn, gains)
    p_inv = solve_linear(gains.P, np.eye(n))

    times = np.arange(steps) * h
    xf_rec = np.empty((steps, m, n))
    xl_rec = np.empty((steps, n_leaders, n))
    uf_rec = np.empty((steps, m, p))
    ul_rec = np.empty((steps, n_leaders, p))
    xi_rec = np.empty((steps, m * n))
    xin_rec = np.empty(steps)
    v1_rec = np.empty(steps)
    d_rec = np.empty((steps, m)) if adaptive else None
    v_rec = np.empty((steps, n_agents, n)) if observer else None
    violations = 0

    def snapshot(upto: int, violation_count: int) -> Trajectory:
        return Trajectory(
            times=times[:upto].copy(),
            follower_states=xf_rec[:upto].copy(),
            leader_states=xl_rec[:upto].copy(),
            follower_inputs=uf_rec[:upto].copy(),
            leader_inputs=ul_rec[:upto].copy(),
            xi=xi_rec[:upto].copy(),
            xi_norm=xin_rec[:upto].copy(),
            v1=v1_rec[:upto].copy(),
            assumption2_violations=violation_count,
            adaptive_gains=None if d_rec is None else d_rec[:upto].copy(),
            observer_states=None if v_rec is None else v_rec[:upto].copy(),
        )

    off_xl = m * n
    off_extra = (m + n_leaders) * n
    # Divergent runs overflow on purpose before the finiteness check fires;
    # keep numpy quiet about it.
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(steps):
            t = float(times[k])
            deriv, u_f, u_l = evaluate(t, y)
            xf = y[:off_xl].reshape(m, n)
            xl = y[off_xl:off_extra].reshape(n_leaders, n)
            xf_rec[k] = xf
            xl_rec[k] = xl
            uf_rec[k] = u_f
            ul_rec[k] = u_l
            if adaptive:
                d_rec[k] = y[off_extra:off_extra + m]
            if observer:
                v_rec[k] = y[off_extra:off_extra + n_agents * n].reshape(n_agents, n)
            xi = (xf - part.W @ xl).reshape(-1)
            xi_rec[k] = xi
            xin_rec[k] = math.sqrt(float(xi @ xi))
            block = xi.reshape(m, n)
            v1_rec[k] = 0.5 * float(np.sum(block * (part.L1 @ block @ p_inv)))
            for j, spec in enumerate(scn.leader_specs):
                if math.sqrt(float(u_l[j] @ u_l[j])) > spec.gamma:
                    violations += 1

            if k == steps - 1:
                break
            k2 = evaluate(t + 0.5 * h, y + (0.5 * h) * deriv)[0]
            k3 = evaluate(t + 0.5 * h, y + (0.5 * h) * k2)[0]
            k4 = evaluate(t + h, y + h * k3)[0]
            y = y + (h / 6.0) * (deriv + 2.0 * k2 + 2.0 * k3 + k4)
            if not np.isfinite(y).all():
                raise NonFiniteState(
                    f"state became non-finite advancing from t = {t:.6g}",
                    trajectory=snapshot(k + 1, violations),
                    step=k + 1,
                    t=t + h,
                )

    return snapshot(steps, violations)


def compute_metrics(
    traj: Trajectory,
    bounds: BoundReport,
    gains: GainSet,
    part: LaplacianPartition,
    cfg: ControllerConfig,
    tail_fraction: float = 0.2,
) -> Metrics:
    """Certification metrics over a completed trajectory.

    The tail window is the final tail_fraction of the recorded horizon. The
    V1 envelope check allows 1e-9 absolute slack plus one step of time slack
    (the envelope is evaluated at both t and t - h and the larger value wins).
    """
    times = traj.times
    span = float(times[-1])
    mask = times >= (1.0 - tail_fraction) * span - 1e-12
    tail_sup = float(np.max(traj.xi_norm[mask] ** 2))

    d1_certified = tail_sup <= bounds.d1_radius_sq
    d2_certified = None
    if bounds.d2_radius_sq is not None:
        d2_certified = tail_sup <= bounds.d2_radius_sq

    alpha = gains.alpha
    offset = bounds.envelope_offset
    v10 = float(traj.v1[0])
    h = float(times[1] - times[0]) if len(times) > 1 else 0.0
    env_now = (v10 - offset) * np.exp(-alpha * times) + offset
    shifted = np.maximum(times - h, 0.0)
    env_prev = (v10 - offset) * np.exp(-alpha * shifted) + offset
    envelope = np.maximum(env_now, env_prev)
    violations = int(np.sum(traj.v1 > envelope + 1e-9))

    if len(times) > 1:
        diffs = np.diff(traj.follower_inputs, axis=0)
        per_step = np.sqrt(np.sum(diffs * diffs, axis=(1, 2)))
        chattering = float(np.mean(per_step)) / h
    else:
        chattering = 0.0

    d_sup = None
    if traj.adaptive_gains is not None:
        d_sup = float(np.max(traj.adaptive_gains))

    return Metrics(
        tail_sup_xi_sq=tail_sup,
        d1_certified=d1_certified,
        envelope_violations=violations,
        chattering_index=chattering,
        d2_certified=d2_certified,
        d_sup=d_sup,
    )
