"""Exact Gaussian RBF kernel evaluation and the brute-force expected-similarity score.

Everything here works on plain numpy arrays and is pure. The approximate
feature maps in :mod:`expose.featuremaps` are tested against these functions.
"""

from __future__ import annotations

import numpy as np

# Upper bound on the number of float64 entries materialized by one block of
# pairwise differences (rows x cols x dim).
_BLOCK_ELEMENTS = 1 << 22


def _check_sigma(sigma: float) -> float:
    sigma = float(sigma)
    if not np.isfinite(sigma) or sigma <= 0.0:
        raise ValueError(f"sigma must be a finite positive number, got {sigma!r}")
    return sigma


def as_vector(x, name: str = "x") -> np.ndarray:
    """Return ``x`` as a finite 1-D float64 array."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def as_matrix(X, name: str = "X") -> np.ndarray:
    """Return ``X`` as a finite 2-D float64 array of shape (n, d).

    A 1-D input is read as a single row.
    """
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2 or arr.shape[1] == 0:
        raise ValueError(f"{name} must be a 2-D array with at least one column, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def rbf_eval(x, y, sigma: float) -> float:
    """Gaussian RBF kernel ``exp(-||x - y||^2 / (2 sigma^2))``.

    Raises
    ------
    ValueError
        If the vectors differ in length, contain non-finite values, or
        ``sigma`` is not positive.
    """
    sigma = _check_sigma(sigma)
    x = as_vector(x, "x")
    y = as_vector(y, "y")
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.size} != {y.size}")
    diff = x - y
    return float(np.exp(-0.5 * float(diff @ diff) / (sigma * sigma)))


def squared_distances(X, Y) -> np.ndarray:
    """Pairwise squared Euclidean distances between rows of ``X`` and ``Y``.

    Differences are formed explicitly instead of expanding
    ``|x|^2 + |y|^2 - 2 x.y``, which loses all precision for nearby points.
    Work is blocked over rows of ``X`` to bound memory.
    """
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} != {Y.shape[1]}")
    n, d = X.shape
    m = Y.shape[0]
    out = np.empty((n, m))
    step = max(1, _BLOCK_ELEMENTS // max(1, m * d))
    for start in range(0, n, step):
        diff = X[start:start + step, None, :] - Y[None, :, :]
        out[start:start + step] = np.einsum("ijk,ijk->ij", diff, diff)
    return out


def rbf_gram(X, Y, sigma: float) -> np.ndarray:
    """Kernel matrix ``K[i, j] = k(X[i], Y[j])``."""
    sigma = _check_sigma(sigma)
    return np.exp(-0.5 * squared_distances(X, Y) / (sigma * sigma))


def exact_score(z, data, sigma: float) -> float:
    """Expected similarity of ``z`` under the empirical distribution of ``data``.

    This is ``(1/n) * sum_i k(z, x_i)``, the quantity every approximate model
    score estimates.
    """
    z = as_vector(z, "z")
    data = np.asarray(data, dtype=np.float64)
    if data.size == 0:
        raise ValueError("data must contain at least one point")
    return float(exact_scores(z.reshape(1, -1), data, sigma)[0])


def exact_scores(Z, data, sigma: float) -> np.ndarray:
    """Vectorized :func:`exact_score` for every row of ``Z``."""
    data = np.asarray(data, dtype=np.float64)
    if data.size == 0:
        raise ValueError("data must contain at least one point")
    return rbf_gram(Z, data, sigma).mean(axis=1)


def median_heuristic(X, max_points: int = 1000, seed: int = 0) -> float:
    """Median pairwise Euclidean distance over at most ``max_points`` rows.

    Rows are subsampled uniformly without replacement when ``X`` is larger.
    """
    from scipy.spatial.distance import pdist

    X = as_matrix(X, "X")
    if X.shape[0] < 2:
        raise ValueError("median heuristic needs at least two points")
    if X.shape[0] > max_points:
        rng = np.random.default_rng(seed)
        X = X[rng.choice(X.shape[0], size=max_points, replace=False)]
    med = float(np.median(pdist(X)))
    if med <= 0.0:
        raise ValueError("median pairwise distance is zero; cannot pick a bandwidth")
    return med
