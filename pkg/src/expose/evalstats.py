"""Evaluation metrics, streaming evaluation protocols and rank statistics.

Scores follow the "normal score" convention throughout: higher means more
likely to be normal.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.stats import rankdata

from ._qtable import Q_ALPHA
from .model import STREAMING_MODES, ExposeModel, Label

PREQUENTIAL = "prequential"
HOLDOUT = "holdout"


class SaturatedStatisticError(ValueError):
    """The Iman-Davenport denominator is not positive (perfect rank agreement)."""


def as_anomaly_mask(labels) -> np.ndarray:
    """Boolean mask, True for anomalies.

    Accepts :class:`Label` members, the strings ``"normal"``/``"anomaly"``,
    or booleans (True meaning anomaly).
    """
    labels = list(labels) if not isinstance(labels, np.ndarray) else labels
    arr = np.asarray(labels)
    if arr.dtype == bool:
        return arr.copy()
    out = np.empty(arr.shape[0], dtype=bool)
    for i, lab in enumerate(arr.tolist()):
        if lab == Label.ANOMALY or lab == "anomaly":
            out[i] = True
        elif lab == Label.NORMAL or lab == "normal":
            out[i] = False
        else:
            raise ValueError(f"unknown label {lab!r}")
    return out


def auc(scores, labels) -> float:
    """Area under the ROC curve for ranking normals above anomalies.

    Computed as the Mann-Whitney statistic from average ranks, so tied
    normal/anomaly pairs count one half.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    anomaly = as_anomaly_mask(labels)
    if scores.shape != anomaly.shape:
        raise ValueError("scores and labels differ in length")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    n_anom = int(anomaly.sum())
    n_norm = anomaly.size - n_anom
    if n_anom == 0 or n_norm == 0:
        raise ValueError("AUC needs at least one normal and one anomalous instance")
    ranks = rankdata(scores, method="average")
    u = ranks[~anomaly].sum() - n_norm * (n_norm + 1) / 2.0
    return float(u / (n_norm * n_anom))


def balanced_accuracy(tp: int, fn: int, tn: int, fp: int) -> float:
    """``0.5 * TP / (TP + FN) + 0.5 * TN / (TN + FP)``."""
    if tp + fn <= 0 or tn + fp <= 0:
        raise ValueError("balanced accuracy needs instances of both classes")
    return 0.5 * tp / (tp + fn) + 0.5 * tn / (tn + fp)


@dataclass
class Confusion:
    """Confusion counts with anomalies as the positive class."""

    tp: int = 0
    fn: int = 0
    tn: int = 0
    fp: int = 0

    def add(self, truth_anomaly: bool, predicted_anomaly: bool, step: int = 1) -> None:
        if truth_anomaly:
            if predicted_anomaly:
                self.tp += step
            else:
                self.fn += step
        elif predicted_anomaly:
            self.fp += step
        else:
            self.tn += step

    def balanced_accuracy(self) -> float:
        """Balanced accuracy; with one class absent, the recall of the other."""
        rates = []
        if self.tp + self.fn:
            rates.append(self.tp / (self.tp + self.fn))
        if self.tn + self.fp:
            rates.append(self.tn / (self.tn + self.fp))
        if not rates:
            raise ValueError("no decisions recorded")
        return sum(rates) / len(rates)


@dataclass(frozen=True)
class EvalRecord:
    index: int
    protocol: str
    metric: str
    value: float

    def row(self) -> str:
        return f"{self.index},{self.protocol},{self.metric},{self.value!r}"


EVAL_HEADER = "index,protocol,metric,value"


def _split_item(item):
    """(x, label, concept) from a stream item of 1 to 3 fields."""
    if isinstance(item, np.ndarray):
        return item, None, None
    item = tuple(item)
    x = item[0]
    label = item[1] if len(item) > 1 else None
    concept = item[2] if len(item) > 2 else None
    return x, label, concept


def prequential_eval(stream: Iterable, model: ExposeModel, theta: float, window: int = 100,
                     on_decision: Callable | None = None) -> list[EvalRecord]:
    """Score each instance, record the decision, then learn from it.

    Parameters
    ----------
    stream : iterable of (x, label[, concept_id])
    model : ExposeModel
        A streaming-mode model; it is updated in place.
    theta : float
        Threshold on the model's decision value (normalized or raw per
        ``model.normalize``).
    window : int
        Number of trailing decisions over which balanced accuracy is reported.
    on_decision : callable, optional
        Called as ``on_decision(index, score, predicted_label)`` before the update.

    Returns
    -------
    list of EvalRecord
        One ``balanced_accuracy`` record per instance.
    """
    if model.mode not in STREAMING_MODES:
        raise ValueError(f"prequential evaluation needs a streaming model, got {model.mode}")
    if window < 1:
        raise ValueError("window must be positive")
    recent: deque = deque()
    conf = Confusion()
    records = []
    for t, item in enumerate(stream):
        x, label, _ = _split_item(item)
        if label is None:
            raise ValueError("prequential evaluation needs labeled instances")
        truth = bool(as_anomaly_mask([label])[0])
        if model.count == 0:
            # Nothing learned yet: the first instance is taken as normal.
            scored = None
            predicted = False
        else:
            scored = model.score(x)
            predicted = scored.value <= theta
        if on_decision is not None:
            on_decision(t, scored, Label.ANOMALY if predicted else Label.NORMAL)
        conf.add(truth, predicted)
        recent.append((truth, predicted))
        if len(recent) > window:
            conf.add(*recent.popleft(), step=-1)
        records.append(EvalRecord(t, PREQUENTIAL, "balanced_accuracy", conf.balanced_accuracy()))
        model.update(x)
    return records


def holdout_eval(stream: Iterable, model: ExposeModel, holdout_sets: Mapping, every: int,
                 theta: float | None = None, active: Sequence | Callable | None = None) -> list[EvalRecord]:
    """Learn from the stream and measure on a holdout set every ``every`` updates.

    Parameters
    ----------
    stream : iterable of x or (x[, label[, concept_id]])
    model : ExposeModel
        Streaming-mode model, updated in place.
    holdout_sets : mapping key -> (X, labels) or LabeledData
        Labeled test sets, one per concept (or interval).
    every : int
        Evaluation period in updates.
    theta : float, optional
        When given, balanced accuracy at this threshold is reported too.
    active : sequence or callable, optional
        Holdout key for each stream position. Defaults to the item's
        concept id, or 0 when items carry none.

    Returns
    -------
    list of EvalRecord
        An ``auc`` record (and a ``balanced_accuracy`` record when ``theta``
        is set) after every ``every``-th update; ``index`` is the update count.
    """
    if model.mode not in STREAMING_MODES:
        raise ValueError(f"holdout evaluation needs a streaming model, got {model.mode}")
    every = int(every)
    if every < 1:
        raise ValueError("every must be positive")
    records = []
    for t, item in enumerate(stream):
        x, _, concept = _split_item(item)
        model.update(x)
        done = t + 1
        if done % every:
            continue
        if active is None:
            key = 0 if concept is None else concept
        elif callable(active):
            key = active(t)
        else:
            key = active[t]
        if key not in holdout_sets:
            raise KeyError(f"no holdout set for {key!r} at update {done}")
        hold = holdout_sets[key]
        X_hold, y_hold = (hold.X, hold.anomaly) if hasattr(hold, "anomaly") else hold
        values = model.decision_values(X_hold)
        anomaly = as_anomaly_mask(y_hold)
        records.append(EvalRecord(done, HOLDOUT, "auc", auc(values, anomaly)))
        if theta is not None:
            conf = Confusion()
            for truth, v in zip(anomaly, values):
                conf.add(bool(truth), bool(v <= theta))
            records.append(EvalRecord(done, HOLDOUT, "balanced_accuracy", conf.balanced_accuracy()))
    return records


# -- rank statistics ------------------------------------------------------


def rank_matrix(metrics) -> np.ndarray:
    """Per-row ranks (1 = highest metric) with ties given their average rank."""
    M = np.asarray(metrics, dtype=np.float64)
    if M.ndim != 2:
        raise ValueError("metric matrix must be 2-D (datasets x algorithms)")
    if not np.all(np.isfinite(M)):
        raise ValueError("metric matrix contains non-finite values")
    return np.vstack([rankdata(-row, method="average") for row in M]) if M.shape[0] else M.copy()


@dataclass(frozen=True)
class FriedmanResult:
    chi2: float
    ff: float
    df1: int
    df2: int
    ranks: np.ndarray

    @property
    def average_ranks(self) -> np.ndarray:
        return self.ranks.mean(axis=0)

    @property
    def m(self) -> int:
        return int(self.ranks.shape[0])

    @property
    def k(self) -> int:
        return int(self.ranks.shape[1])


def friedman(metrics) -> FriedmanResult:
    """Friedman chi-square and the Iman-Davenport F statistic.

    ``metrics`` is an (m datasets x k algorithms) matrix where higher is
    better. ``FF`` has ``(k - 1, (k - 1)(m - 1))`` degrees of freedom.
    """
    M = np.asarray(metrics, dtype=np.float64)
    if M.ndim != 2 or M.shape[0] < 2 or M.shape[1] < 2:
        raise ValueError(f"need at least 2 datasets and 2 algorithms, got shape {M.shape}")
    ranks = rank_matrix(M)
    m, k = ranks.shape
    avg = ranks.mean(axis=0)
    chi2 = 12.0 * m / (k * (k + 1)) * (float(np.sum(avg ** 2)) - k * (k + 1) ** 2 / 4.0)
    denom = m * (k - 1) - chi2
    if denom <= 0.0:
        raise SaturatedStatisticError(
            f"Iman-Davenport statistic is saturated (chi2={chi2!r} reaches m(k-1)={m * (k - 1)})")
    ff = (m - 1) * chi2 / denom
    return FriedmanResult(chi2=chi2, ff=ff, df1=k - 1, df2=(k - 1) * (m - 1), ranks=ranks)


def nemenyi_cd(k: int, m: int, alpha: float = 0.05) -> float:
    """Critical difference ``q_alpha * sqrt(k (k + 1) / (6 m))``."""
    table = Q_ALPHA.get(_alpha_key(alpha))
    if table is None:
        raise ValueError(f"alpha must be one of {sorted(Q_ALPHA)}, got {alpha}")
    if k not in table:
        raise ValueError(f"k must be in {min(table)}..{max(table)}, got {k}")
    if m < 2:
        raise ValueError("need at least 2 datasets")
    return table[k] * math.sqrt(k * (k + 1) / (6.0 * m))


def _alpha_key(alpha: float):
    for key in Q_ALPHA:
        if abs(float(alpha) - key) < 1e-9:
            return key
    return None


@dataclass(frozen=True)
class CdRow:
    algorithm: str
    average_rank: float
    group_id: int

    def row(self) -> str:
        return f"{self.algorithm},{self.average_rank!r},{self.group_id}"


CD_HEADER = "algorithm,average_rank,group_id"


def cd_groups(average_ranks, cd: float) -> list[list[int]]:
    """Maximal sets of algorithms whose pairwise average-rank gaps are below ``cd``.

    On a line these are the maximal runs of consecutive algorithms (ordered
    by average rank) whose extreme gap is below ``cd``. Returned as lists of
    column indices, best-ranked group first.
    """
    avg = np.asarray(average_ranks, dtype=np.float64)
    order = list(np.argsort(avg, kind="stable"))
    runs = []
    j = 0
    for i in range(len(order)):
        j = max(j, i)
        while j + 1 < len(order) and avg[order[j + 1]] - avg[order[i]] < cd:
            j += 1
        runs.append((i, j))
    groups = []
    last_end = -1
    for i, j in runs:
        if j > last_end:
            groups.append([int(c) for c in order[i:j + 1]])
            last_end = j
    return groups


def cd_diagram_data(ranks, alpha: float = 0.05, names: Sequence[str] | None = None) -> tuple[float, list[CdRow]]:
    """Critical difference plus rows ``(algorithm, average_rank, group_id)``.

    An algorithm belonging to several groups appears once per group.
    """
    R = np.asarray(ranks, dtype=np.float64)
    m, k = R.shape
    names = [f"alg{j}" for j in range(k)] if names is None else list(names)
    if len(names) != k:
        raise ValueError("one name per algorithm required")
    cd = nemenyi_cd(k, m, alpha)
    avg = R.mean(axis=0)
    rows = []
    for gid, members in enumerate(cd_groups(avg, cd)):
        for j in members:
            rows.append(CdRow(names[j], float(avg[j]), gid))
    return cd, rows
