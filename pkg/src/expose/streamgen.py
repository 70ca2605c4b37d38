"""Synthetic labeled streams with sudden or sigmoid-smooth concept drift.

A stream is a sequence of concepts, each a mixture of isotropic Gaussian
components. Concept ``j`` nominally covers ``lengths[j]`` consecutive steps;
the boundary between concepts ``j`` and ``j + 1`` sits at step
``t0 = sum(lengths[:j + 1])``. At a smooth boundary the next concept is drawn
with probability ``1 / (1 + exp(-4 (t - t0) / width))``. Anomalies replace
normal draws independently with probability ``anomaly_rate`` and are uniform
over a box.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .model import Label

SUDDEN = "sudden"
SMOOTH = "smooth"


@dataclass(frozen=True)
class Concept:
    """Equal-weight (unless ``weights`` is given) mixture of N(mean, scale^2 I)."""

    means: np.ndarray
    scale: float = 1.0
    weights: np.ndarray | None = None

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=np.float64))
        if means.size == 0 or not np.all(np.isfinite(means)):
            raise ValueError("concept needs finite component means")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        object.__setattr__(self, "means", means)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)
            if w.shape != (means.shape[0],) or np.any(w < 0) or w.sum() <= 0:
                raise ValueError("weights must be non-negative, one per component")
            object.__setattr__(self, "weights", w / w.sum())

    @property
    def dim(self) -> int:
        return int(self.means.shape[1])

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        comp = rng.choice(self.means.shape[0], size=n, p=self.weights)
        return self.means[comp] + self.scale * rng.standard_normal((n, self.dim))


@dataclass(frozen=True)
class Drift:
    kind: str = SUDDEN
    width: int = 1

    def __post_init__(self):
        if self.kind not in (SUDDEN, SMOOTH):
            raise ValueError(f"drift kind must be {SUDDEN!r} or {SMOOTH!r}")
        if int(self.width) < 1:
            raise ValueError("drift width must be at least 1")


def sigmoid_mix(t, t0: float, width: float):
    """Probability of drawing from the next concept at step ``t``."""
    return 1.0 / (1.0 + np.exp(-4.0 * (np.asarray(t, dtype=np.float64) - t0) / width))


@dataclass(frozen=True)
class StreamSpec:
    concepts: Sequence[Concept]
    lengths: Sequence[int]
    drifts: Sequence[Drift] = ()
    anomaly_rate: float = 0.0
    anomaly_box: tuple[np.ndarray, np.ndarray] | None = None
    seed: int = 0
    box_margin: float = field(default=6.0, repr=False)

    def __post_init__(self):
        concepts = tuple(self.concepts)
        lengths = tuple(int(n) for n in self.lengths)
        if not concepts:
            raise ValueError("need at least one concept")
        if len(lengths) != len(concepts) or any(n < 1 for n in lengths):
            raise ValueError("one positive length per concept required")
        if len({c.dim for c in concepts}) != 1:
            raise ValueError("all concepts must share one dimension")
        drifts = tuple(self.drifts) or tuple(Drift() for _ in concepts[1:])
        if len(drifts) != len(concepts) - 1:
            raise ValueError("one drift per concept transition required")
        if not 0.0 <= self.anomaly_rate < 0.5:
            raise ValueError("anomaly_rate must be in [0, 0.5)")
        object.__setattr__(self, "concepts", concepts)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "drifts", drifts)
        if self.anomaly_box is None:
            lo = np.min([c.means.min(axis=0) - self.box_margin * c.scale for c in concepts], axis=0)
            hi = np.max([c.means.max(axis=0) + self.box_margin * c.scale for c in concepts], axis=0)
        else:
            lo, hi = (np.asarray(b, dtype=np.float64) for b in self.anomaly_box)
            if lo.shape != (self.dim,) or hi.shape != (self.dim,) or np.any(hi <= lo):
                raise ValueError("anomaly_box must be (lower, upper) with upper > lower per coordinate")
        object.__setattr__(self, "anomaly_box", (lo, hi))

    @property
    def dim(self) -> int:
        return self.concepts[0].dim

    @property
    def length(self) -> int:
        return sum(self.lengths)

    @property
    def boundaries(self) -> np.ndarray:
        """Step index ``t0`` of each concept transition."""
        return np.cumsum(self.lengths)[:-1]

    def scheduled_concept(self, t) -> np.ndarray:
        """Nominal concept at step ``t`` (ignores the smooth-drift mixing)."""
        return np.searchsorted(self.boundaries, np.asarray(t), side="right")

    def next_concept_probability(self, t) -> np.ndarray:
        """Probability that step ``t`` draws from the concept after its nearest boundary.

        Returns an array aligned with ``t``; entries are 0/1 for sudden drifts.
        """
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        b = self.boundaries
        if b.size == 0:
            return np.zeros_like(t)
        nearest = np.abs(t[:, None] - b[None, :]).argmin(axis=1)
        out = np.empty_like(t)
        for i, j in enumerate(nearest):
            drift = self.drifts[j]
            if drift.kind == SMOOTH:
                out[i] = sigmoid_mix(t[i], b[j], drift.width)
            else:
                out[i] = 1.0 if t[i] >= b[j] else 0.0
        return out

    def sample_anomalies(self, rng: np.random.Generator, n: int) -> np.ndarray:
        lo, hi = self.anomaly_box
        return rng.uniform(lo, hi, size=(n, self.dim))

    # -- (de)serialization for the command line ---------------------------

    @classmethod
    def from_dict(cls, spec: dict) -> "StreamSpec":
        concepts = [Concept(np.asarray(c["means"], dtype=np.float64), float(c.get("scale", 1.0)),
                            c.get("weights")) for c in spec["concepts"]]
        drifts = []
        for d in spec.get("drifts", []):
            if isinstance(d, str):
                d = {"kind": d}
            drifts.append(Drift(d.get("kind", SUDDEN), int(d.get("width", 1))))
        box = spec.get("anomaly_box")
        return cls(concepts=concepts, lengths=spec["lengths"], drifts=drifts,
                   anomaly_rate=float(spec.get("anomaly_rate", 0.0)),
                   anomaly_box=None if box is None else (box[0], box[1]),
                   seed=int(spec.get("seed", 0)))

    @classmethod
    def from_json(cls, path) -> "StreamSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


class LabeledInstance(NamedTuple):
    x: np.ndarray
    label: Label
    concept_id: int


@dataclass
class LabeledData:
    """Column view of a labeled sample: rows of ``X`` with labels and concept ids."""

    X: np.ndarray
    anomaly: np.ndarray
    concept: np.ndarray

    def __len__(self) -> int:
        return int(self.X.shape[0])

    def __iter__(self):
        for x, a, c in zip(self.X, self.anomaly, self.concept):
            yield LabeledInstance(x, Label.ANOMALY if a else Label.NORMAL, int(c))

    @property
    def labels(self) -> list[Label]:
        return [Label.ANOMALY if a else Label.NORMAL for a in self.anomaly]


def generate(spec: StreamSpec) -> LabeledData:
    """Draw the full stream described by ``spec``; deterministic in ``spec.seed``.

    During a smooth transition instances from both concepts are labeled
    normal; only box draws are labeled anomalies. ``concept`` records the
    concept each normal instance was drawn from (anomalies carry the concept
    they replaced).
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.length
    t = np.arange(n)
    base = spec.scheduled_concept(t)
    concept = base.copy()
    b = spec.boundaries
    if b.size:
        nearest = np.abs(t[:, None] - b[None, :]).argmin(axis=1)
        p_next = spec.next_concept_probability(t)
        take_next = rng.random(n) < p_next
        concept = np.where(take_next, nearest + 1, nearest)
    anomaly = rng.random(n) < spec.anomaly_rate
    X = np.empty((n, spec.dim))
    for j, c in enumerate(spec.concepts):
        idx = np.flatnonzero((concept == j) & ~anomaly)
        X[idx] = c.sample(rng, idx.size)
    idx = np.flatnonzero(anomaly)
    X[idx] = spec.sample_anomalies(rng, idx.size)
    return LabeledData(X=X, anomaly=anomaly, concept=concept)


def holdout_for_concept(spec: StreamSpec, concept_id: int, n_normal: int = 500,
                        n_anomaly: int = 500, seed: int = 0) -> LabeledData:
    """Fresh labeled test set: normals from one concept plus box anomalies."""
    if not 0 <= int(concept_id) < len(spec.concepts):
        raise ValueError(f"concept_id {concept_id} out of range 0..{len(spec.concepts) - 1}")
    if n_normal < 0 or n_anomaly < 0:
        raise ValueError("sizes must be non-negative")
    rng = np.random.default_rng(seed)
    normal = spec.concepts[concept_id].sample(rng, n_normal)
    anomalies = spec.sample_anomalies(rng, n_anomaly)
    return LabeledData(
        X=np.vstack([normal, anomalies]),
        anomaly=np.r_[np.zeros(n_normal, dtype=bool), np.ones(n_anomaly, dtype=bool)],
        concept=np.full(n_normal + n_anomaly, int(concept_id)),
    )
