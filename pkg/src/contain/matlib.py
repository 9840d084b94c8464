"""Dense linear-algebra kernels used by the synthesis and simulation layers.

Everything here works on float64 numpy arrays. The solvers are written against
explicit residual tolerances (see `Tolerances`) so that downstream certificates
can state exactly what was checked. numpy is used for storage, matmul and the
symmetric eigendecomposition; the structured solvers (linear systems, Lyapunov,
Riccati) are implemented here.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np


class NotSymmetric(ValueError):
    """Matrix expected symmetric differs from its transpose beyond tolerance."""


class Singular(ValueError):
    """Linear system has no reliable solution (pivot collapsed or residual blew up)."""


class NotControllable(ValueError):
    """(a, b) fails the controllability rank test."""


class NoConvergence(RuntimeError):
    """Iteration hit its cap before meeting the residual tolerance."""


@dataclass
class Tolerances:
    """Numeric thresholds shared by every kernel in this module.

    solve: relative residual bound for linear/Lyapunov/Riccati solves.
    eig:   positive-definiteness floor for eigenvalue sign tests.
    pivot: relative pivot floor below which elimination declares Singular.
    sym:   max absolute entry of s - s.T tolerated by symmetric routines.
    """

    solve: float = 1e-9
    eig: float = 1e-10
    pivot: float = 1e-12
    sym: float = 1e-9


TOL = Tolerances()


def apply_tolerance_overrides(text: str) -> None:
    """Override fields of TOL from a spec string.

    Accepts either a single float (sets `solve` and `sym`) or a comma list of
    name=value pairs, e.g. "solve=1e-8,pivot=1e-11". Unknown names raise
    ValueError.
    """
    text = text.strip()
    if not text:
        return
    if "=" not in text:
        value = float(text)
        TOL.solve = value
        TOL.sym = value
        return
    for item in text.split(","):
        name, _, raw = item.partition("=")
        name = name.strip()
        if name not in ("solve", "eig", "pivot", "sym"):
            raise ValueError(f"unknown tolerance field {name!r}")
        setattr(TOL, name, float(raw))


def apply_tolerance_env(var: str = "CONTAIN_TOL") -> None:
    text = os.environ.get(var)
    if text:
        apply_tolerance_overrides(text)


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array, raising ValueError otherwise."""
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _square(a, name: str) -> np.ndarray:
    arr = as_matrix(a, name)
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got {arr.shape}")
    return arr


def frobenius(a) -> float:
    arr = np.asarray(a, dtype=float)
    return float(np.sqrt(np.sum(arr * arr)))


def kron(a, b) -> np.ndarray:
    """Kronecker product a (x) b."""
    return np.kron(as_matrix(a, "a"), as_matrix(b, "b"))


@dataclass
class SymEigResult:
    values: np.ndarray   # ascending
    vectors: np.ndarray  # columns, unit norm, deterministic sign


def sym_eigs(s) -> SymEigResult:
    """Eigendecomposition of a symmetric matrix.

    Values come back ascending. Each eigenvector is normalized and its sign is
    fixed so the entry of largest magnitude (first such entry on ties) is
    positive, which makes the output reproducible run to run.
    """
    arr = _square(s, "s")
    skew = float(np.max(np.abs(arr - arr.T)))
    if skew > TOL.sym:
        raise NotSymmetric(f"matrix is not symmetric: max |s - s.T| = {skew:.3e}")
    sym = 0.5 * (arr + arr.T)
    values, vectors = np.linalg.eigh(sym)
    vectors = vectors.copy()
    for j in range(vectors.shape[1]):
        col = vectors[:, j]
        lead = int(np.argmax(np.abs(col)))
        if col[lead] < 0.0:
            vectors[:, j] = -col
    return SymEigResult(values, vectors)


def solve_linear(a, rhs) -> np.ndarray:
    """Solve a @ x = rhs by Gaussian elimination with partial pivoting.

    rhs may have multiple columns. Raises Singular when the pivot magnitude
    falls to TOL.pivot * ||a||_F or below.
    """
    a = _square(a, "a")
    rhs = as_matrix(rhs, "rhs")
    n = a.shape[0]
    if rhs.shape[0] != n:
        raise ValueError(f"rhs has {rhs.shape[0]} rows, expected {n}")
    scale = frobenius(a)
    aug = np.concatenate([a, rhs], axis=1).astype(float)
    for col in range(n):
        pivot_row = col + int(np.argmax(np.abs(aug[col:, col])))
        pivot = aug[pivot_row, col]
        if abs(pivot) <= TOL.pivot * scale:
            raise Singular(
                f"pivot {abs(pivot):.3e} at column {col} below floor "
                f"{TOL.pivot * scale:.3e}"
            )
        if pivot_row != col:
            aug[[col, pivot_row]] = aug[[pivot_row, col]]
        factors = aug[col + 1:, col] / aug[col, col]
        aug[col + 1:, col:] -= np.outer(factors, aug[col, col:])
    x = np.zeros((n, rhs.shape[1]))
    for i in range(n - 1, -1, -1):
        x[i] = (aug[i, n:] - aug[i, i + 1:n] @ x[i + 1:]) / aug[i, i]
    return x


def lyap_solve(f, q) -> np.ndarray:
    """Solve f @ X + X @ f.T + q = 0 for symmetric q.

    Vectorizes to (I (x) f + f (x) I) vec(X) = -vec(q) in row-major layout and
    runs it through solve_linear. Raises Singular when f and -f share an
    eigenvalue (the vectorized operator degenerates) or the residual check
    fails.
    """
    f = _square(f, "f")
    q = _square(q, "q")
    n = f.shape[0]
    if q.shape[0] != n:
        raise ValueError(f"q is {q.shape}, expected {(n, n)}")
    skew = float(np.max(np.abs(q - q.T)))
    if skew > TOL.sym:
        raise NotSymmetric(f"q is not symmetric: max |q - q.T| = {skew:.3e}")
    eye = np.eye(n)
    op = np.kron(eye, f) + np.kron(f, eye)
    try:
        vec = solve_linear(op, (-q).reshape(n * n, 1))
    except Singular as exc:
        raise Singular(
            "Lyapunov operator is singular (f and -f share an eigenvalue): "
            f"{exc}"
        ) from exc
    x = vec.reshape(n, n)
    x = 0.5 * (x + x.T)
    residual = frobenius(f @ x + x @ f.T + q)
    if residual > TOL.solve * (1.0 + frobenius(q)):
        raise Singular(
            f"Lyapunov residual {residual:.3e} exceeds tolerance; "
            "operator is effectively singular"
        )
    return x


def is_hurwitz(f) -> bool:
    """Lyapunov stability test: f is Hurwitz iff f.T W + W f = -I has W > 0."""
    f = _square(f, "f")
    n = f.shape[0]
    try:
        w = lyap_solve(f.T, np.eye(n))
    except Singular:
        return False
    return float(sym_eigs(w).values[0]) > TOL.eig


def _rank(m: np.ndarray, tol: float) -> int:
    a = m.astype(float).copy()
    rows, cols = a.shape
    r = 0
    for c in range(cols):
        if r == rows:
            break
        pivot_row = r + int(np.argmax(np.abs(a[r:, c])))
        if abs(a[pivot_row, c]) <= tol:
            continue
        if pivot_row != r:
            a[[r, pivot_row]] = a[[pivot_row, r]]
        factors = a[r + 1:, c] / a[r, c]
        a[r + 1:, c:] -= np.outer(factors, a[r, c:])
        r += 1
    return r


def controllability_matrix(a, b) -> np.ndarray:
    a = _square(a, "a")
    b = as_matrix(b, "b")
    if b.shape[0] != a.shape[0]:
        raise ValueError(f"b has {b.shape[0]} rows, expected {a.shape[0]}")
    blocks = [b]
    cur = b
    for _ in range(a.shape[0] - 1):
        cur = a @ cur
        blocks.append(cur)
    return np.concatenate(blocks, axis=1)


def is_controllable(a, b) -> bool:
    ctrb = controllability_matrix(a, b)
    tol = TOL.solve * frobenius(ctrb)
    return _rank(ctrb, tol) == ctrb.shape[0]


def care_solve(a, b, q, return_residuals: bool = False):
    """Stabilizing solution X of a.T X + X a - X b b.T X + q = 0.

    q must be symmetric positive definite and (a, b) controllable. The iteration
    is Newton-Kleinman seeded with the Bass stabilizing gain:

        beta = 1 + ||a||_F
        (a + beta I) Z + Z (a + beta I).T = 2 b b.T   ->   K0 = b.T Z^-1

    then K_{j+1} = b.T X_j where X_j solves the closed-loop Lyapunov equation
    (a - b K_j).T X + X (a - b K_j) = -(q + K_j.T K_j). Stops when the Riccati
    residual drops to TOL.solve * (1 + ||q||_F); raises NoConvergence after
    100 iterations.

    With return_residuals=True, returns (X, residual_history).
    """
    a = _square(a, "a")
    b = as_matrix(b, "b")
    q = _square(q, "q")
    n = a.shape[0]
    if b.shape[0] != n:
        raise ValueError(f"b has {b.shape[0]} rows, expected {n}")
    if q.shape[0] != n:
        raise ValueError(f"q is {q.shape}, expected {(n, n)}")
    skew = float(np.max(np.abs(q - q.T)))
    if skew > TOL.sym:
        raise NotSymmetric(f"q is not symmetric: max |q - q.T| = {skew:.3e}")
    if float(sym_eigs(q).values[0]) <= TOL.eig:
        raise ValueError("q must be positive definite")
    if not is_controllable(a, b):
        raise NotControllable("(a, b) fails the controllability rank test")

    beta = 1.0 + frobenius(a)
    z = lyap_solve(a + beta * np.eye(n), -2.0 * (b @ b.T))
    k = solve_linear(z, b).T  # b.T Z^-1, Z symmetric
    bound = TOL.solve * (1.0 + frobenius(q))
    residuals: list[float] = []
    for _ in range(100):
        acl = a - b @ k
        x = lyap_solve(acl.T, q + k.T @ k)
        residual = frobenius(a.T @ x + x @ a - x @ (b @ (b.T @ x)) + q)
        residuals.append(residual)
        if residual <= bound:
            # one polishing step; quadratic convergence puts the final
            # residual far below the stopping bound
            k = b.T @ x
            xp = lyap_solve((a - b @ k).T, q + k.T @ k)
            rp = frobenius(a.T @ xp + xp @ a - xp @ (b @ (b.T @ xp)) + q)
            if rp < residual:
                x = xp
                residuals.append(rp)
            x = 0.5 * (x + x.T)
            return (x, residuals) if return_residuals else x
        k = b.T @ x
    raise NoConvergence(
        f"Riccati iteration stalled: residual {residuals[-1]:.3e} after "
        f"{len(residuals)} iterations (tolerance {bound:.3e})"
    )
