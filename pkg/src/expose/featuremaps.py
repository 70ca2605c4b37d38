"""Explicit approximate feature maps for the Gaussian RBF kernel.

Two maps are provided:

* :class:`RksProjection` -- random kitchen sinks. Frequencies are sampled from
  the kernel's spectral density and features are paired cos/sin coordinates,
  so every feature vector has unit norm and ``<phi(x), phi(y)>`` is an
  unbiased estimate of ``k(x, y)``.
* :class:`NystroemMap` -- a data-dependent map built from the eigenpairs of
  the kernel matrix over a set of landmark points.

Both expose ``transform(X)`` for row-batches and ``map(x)`` for one vector.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import _check_sigma, as_matrix, as_vector, rbf_gram
from .linalg import jacobi_eigh

# Largest landmark count decomposed with the Jacobi solver under
# ``eigensolver="auto"``; LAPACK takes over above it.
JACOBI_MAX_LANDMARKS = 300

# Rows mapped per block in ``transform`` calls on large inputs.
_ROW_BLOCK = 1024


def _check_dims(X: np.ndarray, d: int) -> None:
    if X.shape[1] != d:
        raise ValueError(f"dimension mismatch: map expects d={d}, got {X.shape[1]}")


@dataclass(frozen=True, eq=False)
class RksProjection:
    """Random kitchen sinks for ``exp(-||x - y||^2 / (2 sigma^2))``.

    The frequency matrix has entries drawn i.i.d. from ``N(0, 1/sigma^2)``,
    which is the spectral density of the kernel above. It is fully determined
    by ``(d, r, sigma, seed)`` and is regenerated from them on load.
    """

    d: int
    r: int
    sigma: float
    seed: int
    frequencies: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return 2 * self.r

    @property
    def input_dim(self) -> int:
        return self.d

    def transform(self, X) -> np.ndarray:
        """Map rows of ``X`` to ``(n, 2r)`` features ``[cos z1.x, sin z1.x, ...] / sqrt(r)``."""
        X = as_matrix(X)
        _check_dims(X, self.d)
        out = np.empty((X.shape[0], 2 * self.r))
        scale = 1.0 / np.sqrt(self.r)
        for start in range(0, X.shape[0], _ROW_BLOCK):
            proj = X[start:start + _ROW_BLOCK] @ self.frequencies.T
            block = out[start:start + _ROW_BLOCK]
            np.cos(proj, out=block[:, 0::2])
            np.sin(proj, out=block[:, 1::2])
        out *= scale
        return out

    def map(self, x) -> np.ndarray:
        x = as_vector(x)
        return self.transform(x.reshape(1, -1))[0]

    def to_dict(self) -> dict:
        return {"kind": "rks", "d": self.d, "r": self.r, "sigma": self.sigma, "seed": self.seed}


def rks_fit(d: int, r: int, sigma: float, seed: int = 0) -> RksProjection:
    """Draw a random kitchen sinks projection.

    Same arguments always give a bit-identical frequency matrix.
    """
    d, r = int(d), int(r)
    if d < 1 or r < 1:
        raise ValueError(f"d and r must be positive, got d={d}, r={r}")
    sigma = _check_sigma(sigma)
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be a non-negative integer")
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((r, d)) / sigma
    Z.setflags(write=False)
    return RksProjection(d=d, r=r, sigma=sigma, seed=seed, frequencies=Z)


@dataclass(frozen=True, eq=False)
class NystroemMap:
    """Nystroem feature map ``phi_i(x) = lambda_i^{-1/2} sum_j u_ji k(x_j, x)``.

    Only eigenpairs with eigenvalue above the drop tolerance are kept, so
    ``dim`` may be smaller than the number of landmarks.
    """

    landmarks: np.ndarray = field(repr=False)
    sigma: float
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    projection: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        # U diag(lambda^{-1/2}) so that transform is a single matmul.
        proj = self.eigenvectors / np.sqrt(self.eigenvalues)
        proj.setflags(write=False)
        object.__setattr__(self, "projection", proj)

    @property
    def kept(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def dim(self) -> int:
        return self.kept

    @property
    def input_dim(self) -> int:
        return int(self.landmarks.shape[1])

    def transform(self, X) -> np.ndarray:
        X = as_matrix(X)
        _check_dims(X, self.input_dim)
        out = np.empty((X.shape[0], self.kept))
        for start in range(0, X.shape[0], _ROW_BLOCK):
            out[start:start + _ROW_BLOCK] = rbf_gram(X[start:start + _ROW_BLOCK], self.landmarks, self.sigma) @ self.projection
        return out

    def map(self, x) -> np.ndarray:
        x = as_vector(x)
        return self.transform(x.reshape(1, -1))[0]

    def to_dict(self) -> dict:
        return {
            "kind": "nystroem",
            "sigma": self.sigma,
            "landmarks": self.landmarks.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "eigenvectors": self.eigenvectors.tolist(),
        }


def nystroem_fit(landmarks, sigma: float, drop_tol: float | None = None,
                 eigensolver: str = "auto") -> NystroemMap:
    """Build a Nystroem map from landmark points.

    Parameters
    ----------
    landmarks : array_like, shape (r, d)
    sigma : float
        Kernel bandwidth.
    drop_tol : float, optional
        Eigenpairs with ``lambda <= drop_tol`` are discarded. Defaults to
        ``1e-10 * lambda_max``.
    eigensolver : {"auto", "jacobi", "lapack"}
        ``"auto"`` uses the Jacobi solver up to ``JACOBI_MAX_LANDMARKS``
        landmarks and LAPACK beyond.
    """
    sigma = _check_sigma(sigma)
    landmarks = np.asarray(landmarks, dtype=np.float64)
    if landmarks.size == 0:
        raise ValueError("at least one landmark is required")
    landmarks = as_matrix(landmarks, "landmarks").copy()
    if drop_tol is not None and not drop_tol >= 0.0:
        raise ValueError("drop_tol must be non-negative")
    if eigensolver not in ("auto", "jacobi", "lapack"):
        raise ValueError(f"unknown eigensolver {eigensolver!r}")
    if eigensolver == "auto":
        eigensolver = "jacobi" if landmarks.shape[0] <= JACOBI_MAX_LANDMARKS else "lapack"

    K = rbf_gram(landmarks, landmarks, sigma)
    if eigensolver == "jacobi":
        values, vectors = jacobi_eigh(K)
    else:
        values, vectors = np.linalg.eigh(K)
        values, vectors = values[::-1], vectors[:, ::-1]
    if drop_tol is None:
        drop_tol = 1e-10 * max(float(values[0]), 0.0)
    keep = values > drop_tol
    if not keep.any():
        raise ValueError("no eigenvalue exceeds the drop tolerance")
    values = np.ascontiguousarray(values[keep])
    vectors = np.ascontiguousarray(vectors[:, keep])
    for arr in (landmarks, values, vectors):
        arr.setflags(write=False)
    return NystroemMap(landmarks=landmarks, sigma=sigma, eigenvalues=values, eigenvectors=vectors)


def select_landmarks(X, r: int, seed: int = 0) -> np.ndarray:
    """Pick ``min(r, n)`` rows of ``X`` uniformly without replacement."""
    X = as_matrix(X)
    r = int(r)
    if r < 1:
        raise ValueError("r must be positive")
    if r >= X.shape[0]:
        return X.copy()
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(X.shape[0], size=r, replace=False))
    return X[idx]


def map_from_dict(spec: dict):
    """Rebuild a feature map from :meth:`to_dict` output."""
    kind = spec.get("kind")
    if kind == "rks":
        return rks_fit(spec["d"], spec["r"], spec["sigma"], spec["seed"])
    if kind == "nystroem":
        landmarks = np.asarray(spec["landmarks"], dtype=np.float64)
        values = np.asarray(spec["eigenvalues"], dtype=np.float64)
        vectors = np.asarray(spec["eigenvectors"], dtype=np.float64).reshape(landmarks.shape[0], values.size)
        for arr in (landmarks, values, vectors):
            arr.setflags(write=False)
        return NystroemMap(landmarks=landmarks, sigma=float(spec["sigma"]), eigenvalues=values, eigenvectors=vectors)
    raise ValueError(f"unknown feature map kind {kind!r}")
