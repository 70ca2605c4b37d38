"""Cyclic Jacobi eigensolver for small dense symmetric matrices."""

from __future__ import annotations

import numpy as np


class ConvergenceError(RuntimeError):
    """Raised when an iterative routine exhausts its iteration budget."""


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairings for a cyclic-by-rounds sweep.

    Uses the circle method: every unordered pair (p, q) appears exactly once
    across the rounds and the pairs inside one round are disjoint, so all
    rotations of a round commute and can be applied together.
    """
    players = list(range(n))
    if n % 2:
        players.append(-1)
    size = len(players)
    rounds = []
    for _ in range(size - 1):
        ps, qs = [], []
        for i in range(size // 2):
            a, b = players[i], players[size - 1 - i]
            if a >= 0 and b >= 0:
                ps.append(min(a, b))
                qs.append(max(a, b))
        rounds.append((np.array(ps, dtype=np.intp), np.array(qs, dtype=np.intp)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def _off_norm(A: np.ndarray) -> float:
    off = A - np.diag(np.diag(A))
    return float(np.linalg.norm(off))


def jacobi_eigh(A, tol: float = 1e-12, max_sweeps: int = 100, symmetry_tol: float = 1e-10):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Parameters
    ----------
    A : array_like, shape (n, n)
        Symmetric matrix. Asymmetry larger than ``symmetry_tol * max|A|``
        is rejected.
    tol : float
        Sweeps stop once the off-diagonal Frobenius norm falls below
        ``tol * ||A||_F``.
    max_sweeps : int
        Hard cap on full sweeps.

    Returns
    -------
    eigenvalues : ndarray, shape (n,)
        Sorted in descending order.
    eigenvectors : ndarray, shape (n, n)
        Orthonormal columns; ``A @ V[:, i] = eigenvalues[i] * V[:, i]``.
    """
    A = np.array(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] == 0:
        raise ValueError(f"expected a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix contains non-finite values")
    scale = float(np.max(np.abs(A)))
    if np.max(np.abs(A - A.T)) > symmetry_tol * max(scale, 1.0):
        raise ValueError("matrix is not symmetric")
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    # Eigenvectors are accumulated as rows so every update is a row operation.
    Vt = np.eye(n)
    norm = float(np.linalg.norm(A))
    if n == 1 or norm == 0.0:
        return _sorted(np.diag(A).copy(), Vt.T)

    rounds = _round_robin(n)
    target = tol * norm
    # Rounding puts a floor under the attainable off-diagonal norm that grows
    # with n; accept a stalled sweep once it is within this looser bound.
    floor = max(target, 1e-10 * norm)
    off = _off_norm(A)
    for _ in range(max_sweeps):
        if off <= target:
            break
        # Entries already below target / n never need zeroing: if all of
        # them are that small the off-diagonal norm is below target.
        skip = target / n
        for P, Q in rounds:
            apq = A[P, Q]
            active = np.abs(apq) > skip
            if not active.any():
                continue
            if not active.all():
                P, Q, apq = P[active], Q[active], apq[active]
            app = A[P, P]
            aqq = A[Q, Q]
            with np.errstate(over="ignore"):
                theta = (aqq - app) / (2.0 * apq)
                t = np.where(theta >= 0.0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c

            colp = A[:, P]
            colq = A[:, Q]
            A[:, P] = colp * c - colq * s
            A[:, Q] = colp * s + colq * c
            c = c[:, None]
            s = s[:, None]
            _rotate_rows(A, P, Q, c, s)
            A[P, Q] = 0.0
            A[Q, P] = 0.0
            _rotate_rows(Vt, P, Q, c, s)
        new_off = _off_norm(A)
        if new_off <= floor and new_off > 0.5 * off:
            off = new_off
            break
        off = new_off
    else:
        if off > floor:
            raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps (off-norm {off:.3e})")
    return _sorted(np.diag(A).copy(), Vt.T)


def _rotate_rows(M: np.ndarray, P: np.ndarray, Q: np.ndarray, c: np.ndarray, s: np.ndarray) -> None:
    rowp = M[P]
    rowq = M[Q]
    M[P] = c * rowp - s * rowq
    M[Q] = s * rowp + c * rowq


def _sorted(values: np.ndarray, vectors: np.ndarray):
    order = np.argsort(-values, kind="stable")
    return values[order], vectors[:, order]
