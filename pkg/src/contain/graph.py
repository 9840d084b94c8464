"""Communication topology handling: roles, standing assumptions, Laplacian split.

Agents whose adjacency row is all zero are leaders (they listen to nobody);
everyone else is a follower. Internally agents are stored followers-first in
"canonical" order; `labels` remembers the caller's names so results can be
reported back in the original terms.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .matlib import as_matrix, solve_linear, sym_eigs


class BadAdjacency(ValueError):
    """Adjacency matrix is not a square binary matrix with a zero diagonal."""


class NoLeader(ValueError):
    """Every agent has neighbors, so nobody qualifies as a leader."""


class NoFollower(ValueError):
    """Every agent is a leader; there is nothing to contain."""


class AssumptionViolated(ValueError):
    """Topology fails the follower-symmetry / leader-reachability assumption."""


@dataclass(frozen=True, eq=False)
class Topology:
    """Validated network in canonical (followers-first) order.

    adjacency: N x N binary matrix, row i listing who agent i hears.
    labels: user label of each canonical index (followers first, then leaders).
    user_positions: original row index of each canonical agent.
    """

    adjacency: np.ndarray
    labels: tuple
    user_positions: tuple
    n_followers: int

    @property
    def n_agents(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_leaders(self) -> int:
        return self.n_agents - self.n_followers

    @property
    def follower_labels(self) -> tuple:
        return self.labels[: self.n_followers]

    @property
    def leader_labels(self) -> tuple:
        return self.labels[self.n_followers:]

    def canonical_index(self, label) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"unknown agent label {label!r}") from None


@dataclass(frozen=True)
class Assumption1Report:
    follower_subgraph_undirected: bool
    asymmetric_pairs: tuple
    unreachable_followers: tuple
    passed: bool = field(init=False)

    def __post_init__(self):
        ok = self.follower_subgraph_undirected and not self.unreachable_followers
        object.__setattr__(self, "passed", ok)


@dataclass(frozen=True, eq=False)
class LaplacianPartition:
    """Laplacian blocks for a leader-follower network.

    L is the full N x N Laplacian; with followers first it has the shape
    [[L1, L2], [0, 0]]. W = -L1^-1 L2 maps leader states to the hull points
    the followers are steered to, and lambda_min_L1 is the smallest eigenvalue
    of L1 (positive exactly when the standing assumption holds).
    """

    L: np.ndarray
    L1: np.ndarray
    L2: np.ndarray
    W: np.ndarray
    lambda_min_L1: float


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


def build_topology(adjacency, labels=None) -> Topology:
    """Validate an adjacency matrix and reorder agents followers-first.

    Raises BadAdjacency for structural problems, NoLeader when no row is zero,
    NoFollower when all rows are zero.
    """
    try:
        arr = as_matrix(adjacency, "adjacency")
    except ValueError as exc:
        raise BadAdjacency(str(exc)) from None
    n = arr.shape[0]
    if arr.shape[1] != n:
        raise BadAdjacency(f"adjacency must be square, got {arr.shape}")
    if not np.isin(arr, (0.0, 1.0)).all():
        raise BadAdjacency("adjacency entries must be 0 or 1")
    if np.any(np.diag(arr) != 0.0):
        raise BadAdjacency("adjacency must have a zero diagonal (no self-loops)")

    if labels is None:
        labels = tuple(range(1, n + 1))
    else:
        labels = tuple(labels)
        if len(labels) != n:
            raise BadAdjacency(f"expected {n} labels, got {len(labels)}")
        if len(set(labels)) != n:
            raise BadAdjacency("labels must be unique")

    is_leader = [not arr[i].any() for i in range(n)]
    followers = [i for i in range(n) if not is_leader[i]]
    leaders = [i for i in range(n) if is_leader[i]]
    if not leaders:
        raise NoLeader("no agent has an empty neighbor set")
    if not followers:
        raise NoFollower("every agent is a leader")

    perm = followers + leaders
    canonical = arr[np.ix_(perm, perm)]
    return Topology(
        adjacency=_freeze(canonical),
        labels=tuple(labels[i] for i in perm),
        user_positions=tuple(perm),
        n_followers=len(followers),
    )


def check_assumption1(topology: Topology) -> Assumption1Report:
    """Follower subgraph undirected and every follower leader-reachable."""
    adj = topology.adjacency
    m = topology.n_followers
    n = topology.n_agents
    labels = topology.labels

    asymmetric = []
    for i in range(m):
        for j in range(i + 1, m):
            if adj[i, j] != adj[j, i]:
                asymmetric.append((labels[i], labels[j]))

    # Information flows j -> i when adj[i, j] == 1. Leaders have no incoming
    # edges, so multi-source BFS from the leader set finds exactly the
    # followers some leader can reach.
    visited = [False] * n
    queue = deque(range(m, n))
    for j in queue:
        visited[j] = True
    while queue:
        j = queue.popleft()
        for i in range(n):
            if adj[i, j] == 1.0 and not visited[i]:
                visited[i] = True
                queue.append(i)
    unreachable = tuple(labels[i] for i in range(m) if not visited[i])

    return Assumption1Report(
        follower_subgraph_undirected=not asymmetric,
        asymmetric_pairs=tuple(asymmetric),
        unreachable_followers=unreachable,
    )


def partition_laplacian(topology: Topology) -> LaplacianPartition:
    """Split the Laplacian into follower/leader blocks and solve for W.

    Requires the standing assumption (raises AssumptionViolated otherwise),
    which guarantees L1 is symmetric positive definite; W = -L1^-1 L2 then has
    nonnegative entries with unit row sums.
    """
    report = check_assumption1(topology)
    if not report.passed:
        parts = []
        if report.asymmetric_pairs:
            parts.append(f"asymmetric follower pairs {report.asymmetric_pairs}")
        if report.unreachable_followers:
            parts.append(
                f"followers unreachable from any leader {report.unreachable_followers}"
            )
        raise AssumptionViolated("; ".join(parts))

    adj = topology.adjacency
    m = topology.n_followers
    degrees = adj.sum(axis=1)
    lap = np.diag(degrees) - adj
    l1 = lap[:m, :m]
    l2 = lap[:m, m:]
    w = solve_linear(l1, -l2)
    lambda_min = float(sym_eigs(l1).values[0])
    return LaplacianPartition(
        L=_freeze(lap),
        L1=_freeze(l1),
        L2=_freeze(l2),
        W=_freeze(w),
        lambda_min_L1=lambda_min,
    )
