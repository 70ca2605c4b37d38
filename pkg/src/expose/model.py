"""The EXPoSE estimator: a mean embedding ``w`` in an explicit feature space.

The score of a query ``z`` is ``<phi(z), w>``. ``w`` is learned either in
batch from mergeable partial sums, or incrementally with one of three update
rules (online running mean, sliding window, exponential decay).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .kernels import as_matrix

BATCH = "batch"
ONLINE = "online"
WINDOW = "window"
DECAY = "decay"
MODES = (BATCH, ONLINE, WINDOW, DECAY)
STREAMING_MODES = (ONLINE, WINDOW, DECAY)

# Rows summed naively before the block total enters the compensated sum.
_SUM_BLOCK = 256


class Label(str, enum.Enum):
    NORMAL = "normal"
    ANOMALY = "anomaly"

    def __str__(self) -> str:
        return self.value


class ModeError(RuntimeError):
    """An update rule was applied to a model in a different mode."""


class NotFittedError(RuntimeError):
    """The model has not seen any observation yet."""


def _two_sum(total: np.ndarray, comp: np.ndarray, value: np.ndarray) -> None:
    """Neumaier-compensated ``total += value`` (in place on total and comp)."""
    t = total + value
    big = np.abs(total) >= np.abs(value)
    comp += np.where(big, (total - t) + value, (value - t) + total)
    total[...] = t


@dataclass
class PartialSum:
    """Unnormalized feature sum over one chunk of data.

    ``compensation`` carries the running rounding error of ``total`` so that
    any grouping of merges agrees to near machine precision.
    """

    total: np.ndarray
    count: int
    compensation: np.ndarray | None = None

    def __post_init__(self):
        self.total = np.asarray(self.total, dtype=np.float64)
        if self.compensation is None:
            self.compensation = np.zeros_like(self.total)
        if self.count < 1:
            raise ValueError("a partial sum covers at least one observation")

    @property
    def sum(self) -> np.ndarray:
        return self.total + self.compensation

    @property
    def dim(self) -> int:
        return int(self.total.size)


def fit_partial(chunk, feature_map) -> PartialSum:
    """Sum of feature vectors over ``chunk``; safe to run concurrently on disjoint chunks."""
    X = np.asarray(chunk, dtype=np.float64)
    if X.size == 0:
        raise ValueError("cannot fit an empty chunk")
    X = as_matrix(X)
    total = np.zeros(feature_map.dim)
    comp = np.zeros(feature_map.dim)
    for start in range(0, X.shape[0], _SUM_BLOCK):
        feats = feature_map.transform(X[start:start + _SUM_BLOCK])
        _two_sum(total, comp, feats.sum(axis=0))
    return PartialSum(total=total, count=X.shape[0], compensation=comp)


def merge(a: PartialSum, b: PartialSum) -> PartialSum:
    """Combine two partial sums. Commutative; associative up to rounding."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} != {b.dim}")
    # Add the larger-magnitude side first so merge(a, b) == merge(b, a) bitwise.
    if np.sum(np.abs(a.total)) < np.sum(np.abs(b.total)):
        a, b = b, a
    total = a.total.copy()
    comp = a.compensation + b.compensation
    _two_sum(total, comp, b.total)
    return PartialSum(total=total, count=a.count + b.count, compensation=comp)


def finalize(parts: Sequence[PartialSum], feature_map) -> "ExposeModel":
    """Turn partial sums into a batch model with ``w = sum / count``."""
    parts = list(parts)
    if not parts:
        raise ValueError("need at least one partial sum")
    acc = parts[0]
    for p in parts[1:]:
        acc = merge(acc, p)
    if acc.dim != feature_map.dim:
        raise ValueError(f"partial sums have dimension {acc.dim}, feature map has {feature_map.dim}")
    model = ExposeModel(feature_map, mode=BATCH)
    model.weights = acc.sum / acc.count
    model.count = acc.count
    return model


def fit(X, feature_map, chunks: int = 1) -> "ExposeModel":
    """Batch fit over ``X`` split into ``chunks`` contiguous pieces."""
    X = as_matrix(X)
    pieces = [p for p in np.array_split(X, max(1, int(chunks))) if p.shape[0]]
    return finalize([fit_partial(p, feature_map) for p in pieces], feature_map)


@dataclass(frozen=True)
class ScoredInstance:
    raw: float
    normalized: float | None
    use_normalized: bool = False
    label: Label | None = None

    @property
    def value(self) -> float:
        """The score used for thresholding."""
        if self.use_normalized and self.normalized is not None:
            return self.normalized
        return self.raw


def classify(score, theta: float) -> Label:
    """Normal iff the score is strictly greater than ``theta``.

    ``score`` may be a :class:`ScoredInstance` or a plain number.
    """
    value = score.value if isinstance(score, ScoredInstance) else float(score)
    return Label.NORMAL if value > theta else Label.ANOMALY


class ExposeModel:
    """Mean-embedding model bound to one feature map.

    Parameters
    ----------
    feature_map
        Object with ``dim`` and ``transform``.
    mode : {"batch", "online", "window", "decay"}
    window : int
        Window length ``l`` for window mode.
    gamma : float
        Decay rate in ``[0, 1)`` for decay mode.
    normalize : bool, optional
        Default for :meth:`score`. Off for batch models, on otherwise.

    Updates replace ``self.weights`` with a new array rather than writing
    into it, so a concurrent reader always sees a complete vector.
    """

    def __init__(self, feature_map, mode: str = ONLINE, window: int | None = None,
                 gamma: float | None = None, normalize: bool | None = None):
        if mode not in MODES:
            raise ValueError(f"unknown mode {mode!r}")
        if mode == WINDOW:
            if window is None or int(window) < 1:
                raise ValueError("window mode needs a positive window length")
            window = int(window)
        if mode == DECAY:
            if gamma is None or not 0.0 <= float(gamma) < 1.0:
                raise ValueError("decay mode needs gamma in [0, 1)")
            gamma = float(gamma)
        self.feature_map = feature_map
        self.mode = mode
        self.window = window if mode == WINDOW else None
        self.gamma = gamma if mode == DECAY else None
        self.normalize = (mode != BATCH) if normalize is None else bool(normalize)
        self.weights = np.zeros(feature_map.dim)
        self.count = 0
        if mode == WINDOW:
            self._buffer = np.zeros((window, feature_map.dim))
            self._head = 0

    def __repr__(self) -> str:
        extra = {WINDOW: f", window={self.window}", DECAY: f", gamma={self.gamma}"}.get(self.mode, "")
        return f"ExposeModel(mode={self.mode!r}{extra}, dim={self.dim}, count={self.count})"

    @property
    def dim(self) -> int:
        return int(self.feature_map.dim)

    @property
    def window_buffer(self) -> np.ndarray:
        """Features currently in the window, oldest first."""
        if self.mode != WINDOW:
            raise ModeError("only window models keep a buffer")
        held = min(self.count, self.window)
        idx = (self._head - held + np.arange(held)) % self.window
        return self._buffer[idx].copy()

    def _feature(self, x) -> np.ndarray:
        return self.feature_map.map(x)

    # -- update rules -----------------------------------------------------

    def update_online(self, x) -> "ExposeModel":
        """Running mean ``w_t = w_{t-1} + (phi(x_t) - w_{t-1}) / t``.

        A batch model keeps learning as an online model.
        """
        if self.mode not in (ONLINE, BATCH):
            raise ModeError(f"online update on a {self.mode} model")
        phi = self._feature(x)
        self.mode = ONLINE
        self.count += 1
        if self.count == 1:
            self.weights = phi
        else:
            self.weights = self.weights + (phi - self.weights) / self.count
        return self

    def update_window(self, x) -> "ExposeModel":
        """Mean of the last ``l`` features; plain running mean while ``t <= l``."""
        if self.mode != WINDOW:
            raise ModeError(f"window update on a {self.mode} model")
        phi = self._feature(x)
        l = self.window
        self.count += 1
        if self.count <= l:
            new = phi if self.count == 1 else self.weights + (phi - self.weights) / self.count
        else:
            new = self.weights + (phi - self._buffer[self._head]) / l
        self._buffer[self._head] = phi
        self._head = (self._head + 1) % l
        if self.count > l and self._head == 0:
            # Refresh from the buffer once per cycle so rounding in the
            # add/subtract recurrence cannot accumulate without bound.
            new = self._buffer.sum(axis=0) / l
        self.weights = new
        return self

    def update_decay(self, x) -> "ExposeModel":
        """``w_t = gamma * phi(x_t) + (1 - gamma) * w_{t-1}``, with ``w_1 = phi(x_1)``."""
        if self.mode != DECAY:
            raise ModeError(f"decay update on a {self.mode} model")
        phi = self._feature(x)
        self.count += 1
        if self.count == 1:
            self.weights = phi
        else:
            self.weights = self.gamma * phi + (1.0 - self.gamma) * self.weights
        return self

    def update(self, x) -> "ExposeModel":
        """Apply the update rule matching the model's mode."""
        if self.mode == WINDOW:
            return self.update_window(x)
        if self.mode == DECAY:
            return self.update_decay(x)
        return self.update_online(x)

    def partial_fit(self, X) -> "ExposeModel":
        for row in as_matrix(X):
            self.update(row)
        return self

    # -- scoring ----------------------------------------------------------

    def _check_fitted(self) -> None:
        if self.count < 1:
            raise NotFittedError("model has not seen any data")

    def score_many(self, Z, normalize: bool | None = None):
        """Raw and normalized scores for each row of ``Z``.

        Returns ``(raw, normalized)``; ``normalized`` is None when
        ``||w|| = 0`` and normalization was not requested.
        """
        self._check_fitted()
        normalize = self.normalize if normalize is None else normalize
        w = self.weights
        raw = self.feature_map.transform(Z) @ w
        sq = float(w @ w)
        if sq > 0.0:
            normalized = raw / sq
        elif normalize:
            raise ZeroDivisionError("cannot normalize: model weights have zero norm")
        else:
            normalized = None
        return raw, normalized

    def score(self, z, normalize: bool | None = None) -> ScoredInstance:
        """Score one query; see :class:`ScoredInstance`."""
        normalize = self.normalize if normalize is None else normalize
        raw, normalized = self.score_many(np.asarray(z, dtype=np.float64).reshape(1, -1), normalize)
        return ScoredInstance(
            raw=float(raw[0]),
            normalized=None if normalized is None else float(normalized[0]),
            use_normalized=normalize,
        )

    def decision_values(self, Z, normalize: bool | None = None) -> np.ndarray:
        """The score used by :func:`classify` for each row of ``Z``."""
        normalize = self.normalize if normalize is None else normalize
        raw, normalized = self.score_many(Z, normalize)
        return normalized if normalize else raw

    def predict(self, Z, theta: float, normalize: bool | None = None) -> list[Label]:
        values = self.decision_values(Z, normalize)
        return [Label.NORMAL if v > theta else Label.ANOMALY for v in values]


def stream_model(feature_map, mode: str, window: int | None = None, gamma: float | None = None,
                 X: Iterable | None = None) -> ExposeModel:
    """Fresh streaming model, optionally fed with the rows of ``X``."""
    model = ExposeModel(feature_map, mode=mode, window=window, gamma=gamma)
    if X is not None:
        model.partial_fit(X)
    return model
