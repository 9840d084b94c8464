"""Shared fixtures: random problem generators and the default-scenario runs.

The five closed-loop runs of the built-in scenario are expensive (several
seconds each), so they are session-scoped and shared between the behavioral
tests and the acceptance suite.
"""

import numpy as np
import pytest

from contain import cli
from contain.graph import build_topology, partition_laplacian
from contain.matlib import controllability_matrix, is_controllable
from contain.sim import compute_metrics, integrate
from contain.synthesis import compute_bound_report


def random_a1_topology(rng, n_max=10):
    """Random leader-follower adjacency satisfying the standing assumption.

    Followers get an undirected subgraph in which everyone is tied, directly
    or through other followers, to at least one leader. Rows are returned in
    a shuffled (user) order so canonicalization gets exercised too.
    """
    n = int(rng.integers(3, n_max + 1))
    n_leaders = int(rng.integers(1, min(3, n - 1) + 1))
    m = n - n_leaders
    adj = np.zeros((n, n), dtype=float)
    # canonical build order: followers 0..m-1, leaders m..n-1
    for i in range(m):
        if i == 0 or rng.random() < 0.4:
            j = int(rng.integers(m, n))
            adj[i, j] = 1.0
        else:
            j = int(rng.integers(0, i))
            adj[i, j] = 1.0
            adj[j, i] = 1.0
    for i in range(m):
        for j in range(i + 1, m):
            if rng.random() < 0.3:
                adj[i, j] = 1.0
                adj[j, i] = 1.0
        for j in range(m, n):
            if rng.random() < 0.2:
                adj[i, j] = 1.0
    perm = rng.permutation(n)
    shuffled = adj[np.ix_(perm, perm)]
    labels = [int(p) + 1 for p in perm]
    return shuffled, labels


def random_controllable_pair(rng, n_max=4):
    """Random (a, b) with n <= n_max, redrawn until comfortably controllable.

    Draws whose controllability matrix is nearly rank deficient (singular
    value ratio below 1e-3) are rejected: they are controllable in exact
    arithmetic but no float64 solver can certify a 1e-9 Riccati residual on
    them.
    """
    while True:
        n = int(rng.integers(1, n_max + 1))
        p = int(rng.integers(1, 3))
        a = rng.standard_normal((n, n))
        b = rng.standard_normal((n, p))
        if not is_controllable(a, b):
            continue
        sv = np.linalg.svd(controllability_matrix(a, b), compute_uv=False)
        if sv[-1] >= 1e-3 * sv[0]:
            return a, b


class DefaultRun:
    """One synthesized and simulated instance of the built-in scenario."""

    def __init__(self, kind, kappa=0.1):
        parsed = cli.parse_scenario(cli.default_scenario(), controller=kind, kappa=kappa)
        part = partition_laplacian(parsed.topology)
        gains = cli._synthesize(parsed, part)
        bounds = compute_bound_report(
            gains, part, parsed.topology.n_followers, parsed.kappa,
            parsed.gammas, phis=parsed.phis, taus=parsed.taus,
        )
        scn = cli._build_scenario(parsed, gains)
        traj = integrate(scn, gains, part)
        metrics = compute_metrics(traj, bounds, gains, part, scn.controller,
                                  tail_fraction=parsed.tail_fraction)
        self.parsed = parsed
        self.part = part
        self.gains = gains
        self.bounds = bounds
        self.scenario = scn
        self.traj = traj
        self.metrics = metrics


@pytest.fixture(scope="session")
def cont_run():
    return DefaultRun("continuous_static", kappa=0.1)


@pytest.fixture(scope="session")
def cont_small_kappa_run():
    return DefaultRun("continuous_static", kappa=0.05)


@pytest.fixture(scope="session")
def disc_run():
    return DefaultRun("discontinuous_static")


@pytest.fixture(scope="session")
def adaptive_run():
    return DefaultRun("adaptive")


@pytest.fixture(scope="session")
def observer_run():
    return DefaultRun("observer_based")


@pytest.fixture
def default_topology():
    adjacency = np.array([
        [0, 1, 0, 0, 0, 1, 1, 0],
        [1, 0, 1, 0, 0, 0, 1, 0],
        [0, 1, 0, 1, 0, 0, 0, 0],
        [0, 0, 1, 0, 1, 0, 0, 1],
        [0, 0, 0, 1, 0, 1, 0, 1],
        [1, 0, 0, 0, 1, 0, 0, 0],
        [0, 0, 0, 0, 0, 0, 0, 0],
        [0, 0, 0, 0, 0, 0, 0, 0],
    ], dtype=float)
    return build_topology(adjacency)
