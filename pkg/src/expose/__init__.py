"""Expected similarity estimation (EXPoSE) for batch and streaming anomaly detection."""

from .featuremaps import NystroemMap, RksProjection, nystroem_fit, rks_fit, select_landmarks
from .kernels import exact_score, exact_scores, median_heuristic, rbf_eval, rbf_gram
from .linalg import ConvergenceError, jacobi_eigh
from .model import (
    ExposeModel,
    Label,
    ModeError,
    NotFittedError,
    PartialSum,
    ScoredInstance,
    classify,
    finalize,
    fit,
    fit_partial,
    merge,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "ExposeModel",
    "Label",
    "ModeError",
    "NotFittedError",
    "NystroemMap",
    "PartialSum",
    "RksProjection",
    "ScoredInstance",
    "classify",
    "exact_score",
    "exact_scores",
    "finalize",
    "fit",
    "fit_partial",
    "jacobi_eigh",
    "median_heuristic",
    "merge",
    "nystroem_fit",
    "rbf_eval",
    "rbf_gram",
    "rks_fit",
    "select_landmarks",
]
