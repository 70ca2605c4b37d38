"""CSV datasets and the JSON model file."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .featuremaps import map_from_dict
from .model import WINDOW, ExposeModel

FORMAT_NAME = "expose-model"
FORMAT_VERSION = 1
LABELS = ("normal", "anomaly")


class DataError(ValueError):
    """Malformed input data."""


@dataclass
class CsvDataset:
    X: np.ndarray
    anomaly: np.ndarray | None
    header: list[str] | None = None

    @property
    def labeled(self) -> bool:
        return self.anomaly is not None


def _is_number(text: str) -> bool:
    try:
        return math.isfinite(float(text))
    except ValueError:
        return False


def parse_csv(lines, source: str = "<input>") -> CsvDataset:
    """Parse rows of decimal reals with an optional ``normal``/``anomaly`` column.

    A single header row is recognised when its first field is not a number.
    Every row must have the same number of fields and the label column must
    be present on all rows or none.
    """
    rows = [r for r in csv.reader(lines) if r and any(f.strip() for f in r)]
    header = None
    if rows and not _is_number(rows[0][0].strip()):
        header = [f.strip() for f in rows[0]]
        rows = rows[1:]
    if not rows:
        raise DataError(f"{source}: no data rows")
    width = len(rows[0])
    last = rows[0][-1].strip()
    labeled = width > 1 and not _is_number(last)
    if width - labeled < 1:
        raise DataError(f"{source}: rows need at least one numeric column")
    X = np.empty((len(rows), width - labeled))
    anomaly = np.empty(len(rows), dtype=bool) if labeled else None
    for i, row in enumerate(rows):
        lineno = i + 1 + (header is not None)
        if len(row) != width:
            raise DataError(f"{source}:{lineno}: expected {width} fields, got {len(row)}")
        fields = [f.strip() for f in row]
        if labeled:
            if fields[-1] not in LABELS:
                raise DataError(f"{source}:{lineno}: label must be 'normal' or 'anomaly', got {fields[-1]!r}")
            anomaly[i] = fields[-1] == "anomaly"
            fields = fields[:-1]
        try:
            X[i] = [float(f) for f in fields]
        except ValueError:
            raise DataError(f"{source}:{lineno}: non-numeric value") from None
        if not np.all(np.isfinite(X[i])):
            raise DataError(f"{source}:{lineno}: non-finite value")
    return CsvDataset(X=X, anomaly=anomaly, header=header)


def read_csv(path) -> CsvDataset:
    try:
        with open(path, newline="") as fh:
            return parse_csv(fh, source=str(path))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def write_csv(path_or_fh, X, anomaly=None, header: list[str] | None = None) -> None:
    """Write rows in the format :func:`read_csv` accepts."""
    X = np.asarray(X, dtype=np.float64)
    own = isinstance(path_or_fh, (str, bytes)) or hasattr(path_or_fh, "__fspath__")
    fh = open(path_or_fh, "w", newline="") if own else path_or_fh
    try:
        if header is not None:
            fh.write(",".join(header) + "\n")
        for i, row in enumerate(X):
            fields = [repr(float(v)) for v in row]
            if anomaly is not None:
                fields.append("anomaly" if anomaly[i] else "normal")
            fh.write(",".join(fields) + "\n")
    finally:
        if own:
            fh.close()


def model_to_dict(model: ExposeModel) -> dict:
    doc = {
        "format": FORMAT_NAME,
        "format_version": FORMAT_VERSION,
        "map": model.feature_map.to_dict(),
        "mode": model.mode,
        "window": model.window,
        "gamma": model.gamma,
        "normalize": model.normalize,
        "count": model.count,
        "weights": model.weights.tolist(),
    }
    if model.mode == WINDOW:
        doc["window_buffer"] = model.window_buffer.tolist()
    return doc


def model_from_dict(doc: dict) -> ExposeModel:
    if doc.get("format") != FORMAT_NAME:
        raise DataError("not an expose model file")
    if doc.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported model format version {doc.get('format_version')!r}")
    fmap = map_from_dict(doc["map"])
    model = ExposeModel(fmap, mode=doc["mode"], window=doc.get("window"), gamma=doc.get("gamma"),
                        normalize=doc.get("normalize"))
    weights = np.asarray(doc["weights"], dtype=np.float64)
    if weights.shape != (fmap.dim,):
        raise DataError(f"weights have length {weights.size}, feature map has dimension {fmap.dim}")
    model.weights = weights
    model.count = int(doc["count"])
    if model.mode == WINDOW:
        held = np.asarray(doc.get("window_buffer", []), dtype=np.float64).reshape(-1, fmap.dim)
        model._buffer[:held.shape[0]] = held
        model._head = held.shape[0] % model.window
    return model


def save_model(model: ExposeModel, path) -> None:
    """Store ``model`` as JSON. Floats are written in shortest round-trip form."""
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh)
        fh.write("\n")


def load_model(path) -> ExposeModel:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid model file ({exc.msg})") from None
    return model_from_dict(doc)
