import math

import numpy as np
import pytest

from contain.control import (
    ControllerConfig,
    LeaderInputSpec,
    LinearSystem,
    MissingState,
    NetworkState,
    Sinusoid,
    adaptive_gain_rate,
    ghat,
    gsat,
    leader_input,
    observer_rate,
    relative_state,
    rsat,
    u_follower,
)
from contain.graph import build_topology
from contain.synthesis import GainSet


def make_gains(k_row=(-1.0, -2.0), c1=1.0, c2=2.0):
    k = np.array([list(k_row)])
    return GainSet(P=np.eye(len(k_row)), K=k, Gamma=k.T @ k, c1=c1, c2=c2, alpha=1.0)


# a 3-follower chain hanging off one leader
CHAIN = build_topology([
    [0, 1, 0, 1],
    [1, 0, 1, 0],
    [0, 1, 0, 0],
    [0, 0, 0, 0],
])


def test_ghat_is_unit_or_zero():
    w = np.array([3.0, 4.0])
    assert np.allclose(ghat(w), [0.6, 0.8])
    assert np.allclose(ghat(np.zeros(2)), 0.0)


def test_gsat_continuous_at_layer_boundary():
    kappa = 0.5
    outside = gsat(np.array([0.5 + 1e-12, 0.0]), kappa)
    inside = gsat(np.array([0.5 - 1e-12, 0.0]), kappa)
    assert np.allclose(outside, inside, atol=1e-9)
    assert np.allclose(gsat(np.array([0.1, 0.0]), kappa), [0.2, 0.0])
    assert np.allclose(gsat(np.array([5.0, 0.0]), kappa), [1.0, 0.0])


def test_rsat_scales_with_gain():
    kappa = 0.5
    w = np.array([0.1, 0.0])
    # d ||w|| = 0.2 < kappa: linear branch (w/kappa) d
    assert np.allclose(rsat(w, 2.0, kappa), [0.4, 0.0])
    # d ||w|| = 10 > kappa: unit branch
    assert np.allclose(rsat(w, 100.0, kappa), [1.0, 0.0])
    assert np.allclose(rsat(np.zeros(2), 3.0, kappa), 0.0)


def test_relative_state_hand_computed():
    # follower 1 hears follower 2 and the leader
    state = NetworkState(
        t=0.0,
        follower_states=np.array([[1.0], [2.0], [3.0]]),
        leader_states=np.array([[10.0]]),
    )
    sigma0 = relative_state(0, state, CHAIN)
    assert np.allclose(sigma0, 2 * 1.0 - 2.0 - 10.0)
    sigma2 = relative_state(2, state, CHAIN)
    assert np.allclose(sigma2, 1 * 3.0 - 2.0)
    with pytest.raises(ValueError):
        relative_state(3, state, CHAIN)


def test_u_follower_continuous_matches_formula():
    gains = make_gains()
    cfg = ControllerConfig(kind="continuous_static", gains=gains, kappa=0.1)
    state = NetworkState(
        t=0.0,
        follower_states=np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]),
        leader_states=np.zeros((1, 2)),
    )
    sigma = relative_state(0, state, CHAIN)
    ks = gains.K @ sigma
    expect = gains.c1 * ks + gains.c2 * gsat(ks, 0.1)
    assert np.allclose(u_follower(0, state, cfg, CHAIN), expect)


def test_u_follower_discontinuous_uses_unit_vector():
    gains = make_gains()
    cfg = ControllerConfig(kind="discontinuous_static", gains=gains)
    state = NetworkState(
        t=0.0,
        follower_states=np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]),
        leader_states=np.zeros((1, 2)),
    )
    sigma = relative_state(0, state, CHAIN)
    ks = gains.K @ sigma
    expect = gains.c1 * ks + gains.c2 * ghat(ks)
    assert np.allclose(u_follower(0, state, cfg, CHAIN), expect)


def test_u_follower_adaptive_scales_both_terms():
    gains = make_gains()
    cfg = ControllerConfig(
        kind="adaptive", gains=gains, kappa=0.1,
        taus=[2.0, 2.0, 2.0], phis=[0.1, 0.1, 0.1], d0=[0.0, 0.0, 0.0],
    )
    state = NetworkState(
        t=0.0,
        follower_states=np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]),
        leader_states=np.zeros((1, 2)),
        adaptive_gains=np.array([0.5, 0.0, 0.0]),
    )
    sigma = relative_state(0, state, CHAIN)
    ks = gains.K @ sigma
    expect = 0.5 * ks + 0.5 * rsat(ks, 0.5, 0.1)
    assert np.allclose(u_follower(0, state, cfg, CHAIN), expect)
    # zero gain means zero input regardless of the error
    assert np.allclose(u_follower(1, state, cfg, CHAIN), 0.0)


def test_u_follower_adaptive_requires_gain_vector():
    gains = make_gains()
    cfg = ControllerConfig(
        kind="adaptive", gains=gains, kappa=0.1,
        taus=[1.0] * 3, phis=[0.0] * 3, d0=[0.0] * 3,
    )
    state = NetworkState(
        t=0.0,
        follower_states=np.zeros((3, 2)),
        leader_states=np.zeros((1, 2)),
    )
    with pytest.raises(MissingState):
        u_follower(0, state, cfg, CHAIN)


def test_adaptive_gain_rate_formula():
    gains = make_gains()
    cfg = ControllerConfig(
        kind="adaptive", gains=gains, kappa=0.1,
        taus=[2.0, 1.0, 1.0], phis=[0.25, 0.0, 0.0], d0=[0.0] * 3,
    )
    state = NetworkState(
        t=0.0,
        follower_states=np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]),
        leader_states=np.zeros((1, 2)),
        adaptive_gains=np.array([2.0, 0.0, 0.0]),
    )
    sigma = relative_state(0, state, CHAIN)
    ks = gains.K @ sigma
    expect = 2.0 * (-0.25 * 2.0 + sigma @ gains.Gamma @ sigma + np.linalg.norm(ks))
    assert adaptive_gain_rate(0, state, cfg, CHAIN) == pytest.approx(expect)


def test_observer_rate_tracks_innovation():
    system = LinearSystem(A=np.array([[0.0, 1.0], [-1.0, 1.0]]),
                          B=np.array([[0.0], [1.0]]),
                          C=np.eye(2))
    l_obs = np.array([[-2.0, 0.0], [0.0, -2.0]])
    state = NetworkState(
        t=0.0,
        follower_states=np.array([[1.0, 0.0], [0.0, 0.0], [0.0, 0.0]]),
        leader_states=np.zeros((1, 2)),
        observer_states=np.zeros((4, 2)),
    )
    u = np.array([0.5])
    rate = observer_rate(0, state, u, system, l_obs)
    # v = 0 so v_dot = B u + L (0 - C x_0)
    expect = system.B @ u + l_obs @ (-state.follower_states[0])
    assert np.allclose(rate, expect)


def test_leader_input_combines_feedback_and_sinusoids():
    spec = LeaderInputSpec(
        feedback_gain=np.array([[0.0, -2.0]]),
        sinusoids=(Sinusoid(channel=0, amplitude=4.0, omega=2.0, phase=0.0),),
        gamma=6.0,
    )
    x = np.array([1.0, 3.0])
    t = 0.7
    u = leader_input(spec, x, t)
    assert np.allclose(u, [-6.0 + 4.0 * math.sin(1.4)])
    # 2cos(t) as a phase-shifted sine
    spec2 = LeaderInputSpec(
        feedback_gain=np.zeros((1, 2)),
        sinusoids=(Sinusoid(channel=0, amplitude=2.0, omega=1.0, phase=math.pi / 2),),
        gamma=4.0,
    )
    u2 = leader_input(spec2, x, 0.0)
    assert np.allclose(u2, [2.0])


def test_controller_config_validation():
    gains = make_gains()
    with pytest.raises(ValueError):
        ControllerConfig(kind="continuous_static", gains=gains)  # no kappa
    with pytest.raises(ValueError):
        ControllerConfig(kind="bang_bang", gains=gains, kappa=0.1)
    with pytest.raises(ValueError):
        ControllerConfig(kind="adaptive", gains=gains, kappa=0.1,
                         taus=[1.0, 1.0], phis=[0.0], d0=[0.0])
    with pytest.raises(ValueError):
        ControllerConfig(kind="adaptive", gains=gains, kappa=0.1,
                         taus=[-1.0], phis=[0.0], d0=[0.0])
    # discontinuous law never reads kappa
    cfg = ControllerConfig(kind="discontinuous_static", gains=gains)
    assert cfg.kappa is None


def test_linear_system_validation():
    with pytest.raises(ValueError):
        LinearSystem(A=np.zeros((2, 3)), B=np.zeros((2, 1)), C=np.eye(2))
    with pytest.raises(ValueError):
        LinearSystem(A=np.eye(2), B=np.zeros((3, 1)), C=np.eye(2))
    with pytest.raises(ValueError):
        LinearSystem(A=np.eye(2), B=np.zeros((2, 1)), C=np.zeros((1, 3)))
    sys2 = LinearSystem(A=np.eye(2), B=np.zeros((2, 1)), C=np.zeros((1, 2)))
    assert (sys2.n, sys2.p, sys2.q) == (2, 1, 1)
