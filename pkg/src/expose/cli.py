"""Command-line interface: ``expose {fit,score,stream,grid,compare}``."""

from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

import numpy as np

from . import evalstats, streamgen
from .featuremaps import nystroem_fit, rks_fit, select_landmarks
from .io import DataError, _is_number, load_model, read_csv, save_model
from .kernels import median_heuristic
from .model import DECAY, ONLINE, WINDOW, ExposeModel, finalize, fit_partial

DEFAULT_FEATURES = {"rks": 2000, "nystroem": 500}


class CliError(Exception):
    pass


@contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def _sigma_arg(text: str):
    if text == "auto":
        return text
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive number or 'auto', got {text!r}") from None
    if not value > 0 or not np.isfinite(value):
        raise argparse.ArgumentTypeError("sigma must be positive")
    return value


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("expected a positive integer")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError("seed must be non-negative")
    return value


def build_feature_map(X: np.ndarray, kind: str, features: int | None, sigma, seed: int):
    """Fit the feature map chosen on the command line against ``X``."""
    if sigma == "auto":
        if X.shape[0] < 2:
            raise CliError("--sigma auto needs at least two rows")
        sigma = median_heuristic(X, max_points=1000, seed=seed)
    r = features or DEFAULT_FEATURES[kind]
    if kind == "rks":
        return rks_fit(X.shape[1], r, sigma, seed)
    return nystroem_fit(select_landmarks(X, r, seed), sigma)


def _add_map_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--map", choices=("rks", "nystroem"), default="rks", help="feature map (default: rks)")
    p.add_argument("--features", type=_positive_int, metavar="R",
                   help="kernel expansions r (default: 2000 for rks, 500 for nystroem)")
    p.add_argument("--sigma", type=_sigma_arg, default="auto", metavar="S",
                   help="kernel bandwidth, or 'auto' for the median heuristic (default)")
    p.add_argument("--seed", type=_seed, default=0)


# -- fit ------------------------------------------------------------------


def cmd_fit(args) -> None:
    data = read_csv(args.input)
    X = data.X
    fmap = build_feature_map(X, args.map, args.features, args.sigma, args.seed)
    chunks = [c for c in np.array_split(X, min(args.threads, X.shape[0])) if c.shape[0]]
    with ThreadPoolExecutor(max_workers=args.threads) as pool:
        parts = list(pool.map(lambda c: fit_partial(c, fmap), chunks))
    model = finalize(parts, fmap)
    save_model(model, args.out)


# -- score ----------------------------------------------------------------


def cmd_score(args) -> None:
    model = load_model(args.model)
    data = read_csv(args.input)
    if data.X.shape[1] != model.feature_map.input_dim:
        raise CliError(f"input has {data.X.shape[1]} columns, model expects {model.feature_map.input_dim}")
    normalize = model.normalize if args.normalize is None else args.normalize
    raw, normalized = model.score_many(data.X, normalize=normalize)
    decision = normalized if normalize else raw
    with _output(args.out) as out:
        out.write("index,raw,normalized" + (",class" if args.theta is not None else "") + "\n")
        for i in range(raw.size):
            fields = [str(i), repr(float(raw[i])), "" if normalized is None else repr(float(normalized[i]))]
            if args.theta is not None:
                fields.append("normal" if decision[i] > args.theta else "anomaly")
            out.write(",".join(fields) + "\n")


# -- stream ---------------------------------------------------------------


def _parse_mode(tokens: list[str]):
    kind = tokens[0]
    if kind == ONLINE and len(tokens) == 1:
        return ONLINE, None, None
    if kind == WINDOW and len(tokens) == 2:
        try:
            length = int(tokens[1])
        except ValueError:
            length = 0
        if length < 1:
            raise CliError("--mode window needs a positive integer length")
        return WINDOW, length, None
    if kind == DECAY and len(tokens) == 2:
        try:
            gamma = float(tokens[1])
        except ValueError:
            gamma = -1.0
        if not 0.0 <= gamma < 1.0:
            raise CliError("--mode decay needs gamma in [0, 1)")
        return DECAY, None, gamma
    raise CliError("--mode must be 'online', 'window L' or 'decay G'")


def _parse_eval(text: str | None):
    if text is None:
        return None, None
    if text == "prequential":
        return "prequential", None
    if text.startswith("holdout:"):
        try:
            every = int(text.split(":", 1)[1])
        except ValueError:
            every = 0
        if every < 1:
            raise CliError("--eval holdout:N needs a positive integer N")
        return "holdout", every
    raise CliError("--eval must be 'prequential' or 'holdout:N'")


def cmd_stream(args) -> None:
    mode, window, gamma = _parse_mode(args.mode)
    protocol, every = _parse_eval(args.eval)
    if (args.input is None) == (args.generator is None):
        raise CliError("give exactly one of an input CSV or --generator")
    spec = None
    if args.generator is not None:
        try:
            spec = streamgen.StreamSpec.from_json(args.generator)
        except (OSError, KeyError, TypeError, ValueError) as exc:
            raise CliError(f"invalid generator spec {args.generator}: {exc}") from None
        stream = streamgen.generate(spec)
        X, anomaly, concept = stream.X, stream.anomaly, stream.concept
    else:
        data = read_csv(args.input)
        X, anomaly, concept = data.X, data.anomaly, None
    if protocol is not None and anomaly is None:
        raise CliError("--eval needs a labeled input (final column normal/anomaly)")
    if protocol == "prequential" and args.theta is None:
        raise CliError("--eval prequential needs --theta")

    prefix = X[:max(2, min(args.warmup, X.shape[0]))]
    fmap = build_feature_map(prefix, args.map, args.features, args.sigma, args.seed)
    model = ExposeModel(fmap, mode=mode, window=window, gamma=gamma)

    records = []
    if protocol == "prequential":
        records = evalstats.prequential_eval(
            ((x, bool(a)) for x, a in zip(X, anomaly)), model, args.theta, window=args.trailing)
    elif protocol == "holdout":
        if spec is not None:
            holdouts = {j: streamgen.holdout_for_concept(spec, j, args.holdout_size, args.holdout_size,
                                                         seed=args.seed + 1 + j)
                        for j in range(len(spec.concepts))}
            active = spec.scheduled_concept(np.arange(X.shape[0]))
        else:
            if args.holdout is None:
                raise CliError("--eval holdout with a CSV stream needs --holdout FILE")
            hold = read_csv(args.holdout)
            if not hold.labeled:
                raise CliError("--holdout file must be labeled")
            holdouts = {0: (hold.X, hold.anomaly)}
            active = None
        records = evalstats.holdout_eval(iter(X), model, holdouts, every, theta=args.theta, active=active)
    else:
        model.partial_fit(X)

    if args.model_out:
        save_model(model, args.model_out)
    with _output(args.out) as out:
        out.write(evalstats.EVAL_HEADER + "\n")
        for rec in records:
            out.write(rec.row() + "\n")


# -- grid -----------------------------------------------------------------


def cmd_grid(args) -> None:
    model = load_model(args.model)
    if model.feature_map.input_dim != 2:
        raise CliError(f"grid needs a 2-dimensional model, got d={model.feature_map.input_dim}")
    x1lo, x1hi, x2lo, x2hi = args.bounds
    if not (x1hi > x1lo and x2hi > x2lo):
        raise CliError("--bounds must be X1MIN X1MAX X2MIN X2MAX with max > min")
    n = args.resolution
    xs = np.linspace(x1lo, x1hi, n)
    ys = np.linspace(x2lo, x2hi, n)
    # Row-major with x1 varying fastest.
    grid = np.column_stack([np.tile(xs, n), np.repeat(ys, n)])
    _, normalized = model.score_many(grid, normalize=True)
    with _output(args.out) as out:
        out.write("x1,x2,score\n")
        for (a, b), s in zip(grid, normalized):
            out.write(f"{float(a)!r},{float(b)!r},{float(s)!r}\n")


# -- compare --------------------------------------------------------------


def read_metric_matrix(lines, source: str = "<input>"):
    """Parse an (m datasets x k algorithms) CSV.

    An optional header row names the algorithms; an optional leading
    non-numeric column names the datasets.
    """
    rows = [[f.strip() for f in r] for r in csv.reader(lines) if r and any(f.strip() for f in r)]
    header = None
    if rows and not all(_is_number(f) for f in rows[0][1:]):
        header, rows = rows[0], rows[1:]
    if not rows:
        raise DataError(f"{source}: no data rows")
    named = not _is_number(rows[0][0])
    width = len(rows[0])
    values = []
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{source}: row {i + 1} has {len(row)} fields, expected {width}")
        fields = row[1:] if named else row
        if not all(_is_number(f) for f in fields):
            raise DataError(f"{source}: row {i + 1} contains a non-numeric metric")
        values.append([float(f) for f in fields])
    names = None
    if header is not None:
        names = header[1:] if named else header
        if len(names) != width - named:
            raise DataError(f"{source}: header has {len(header)} fields, rows have {width}")
    return np.array(values), names


def cmd_compare(args) -> None:
    try:
        with open(args.input, newline="") as fh:
            M, names = read_metric_matrix(fh, source=args.input)
    except OSError as exc:
        raise DataError(f"cannot read {args.input}: {exc.strerror}") from None
    m, k = M.shape
    if m < 2 or k < 2:
        raise CliError(f"need at least 2 datasets and 2 algorithms, got {m}x{k}")
    res = evalstats.friedman(M)
    cd, rows = evalstats.cd_diagram_data(res.ranks, alpha=args.alpha, names=names)
    with _output(args.out) as out:
        out.write("statistic,value\n")
        out.write(f"chi2_f,{res.chi2!r}\n")
        out.write(f"ff,{res.ff!r}\n")
        out.write(f"df1,{res.df1}\n")
        out.write(f"df2,{res.df2}\n")
        out.write(f"alpha,{args.alpha!r}\n")
        out.write(f"cd,{cd!r}\n")
        out.write("\n" + evalstats.CD_HEADER + "\n")
        for row in rows:
            out.write(row.row() + "\n")


# -- entry point ----------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="expose", description="Expected similarity anomaly detection")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="batch-fit a model from a CSV file")
    p.add_argument("input")
    _add_map_flags(p)
    p.add_argument("--threads", type=_positive_int, default=1, metavar="N")
    p.add_argument("--out", required=True, help="model file to write")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("score", help="score rows of a CSV file")
    p.add_argument("model")
    p.add_argument("input")
    p.add_argument("--theta", type=float, metavar="T", help="threshold; adds a class column")
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=None,
                   help="threshold the normalized score (default: the model's setting)")
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("stream", help="run a streaming model over a CSV file or generated stream")
    p.add_argument("input", nargs="?")
    p.add_argument("--generator", metavar="SPEC", help="JSON stream specification")
    p.add_argument("--mode", nargs="+", default=[ONLINE], metavar="MODE",
                   help="'online', 'window L' or 'decay G'")
    _add_map_flags(p)
    p.add_argument("--theta", type=float, metavar="T")
    p.add_argument("--eval", metavar="PROTOCOL", help="'prequential' or 'holdout:N'")
    p.add_argument("--holdout", metavar="FILE", help="labeled holdout CSV for CSV streams")
    p.add_argument("--holdout-size", type=_positive_int, default=500, metavar="N",
                   help="normals and anomalies per generated holdout set (default: 500)")
    p.add_argument("--warmup", type=_positive_int, default=100, metavar="N",
                   help="leading rows used to configure the feature map (default: 100)")
    p.add_argument("--trailing", type=_positive_int, default=100, metavar="N",
                   help="prequential balanced-accuracy window (default: 100)")
    p.add_argument("--out", help="evaluation records (default: stdout)")
    p.add_argument("--model-out", metavar="FILE", help="write the final model here")
    p.set_defaults(func=cmd_stream)

    p = sub.add_parser("grid", help="normalized scores on a 2-D grid")
    p.add_argument("model")
    p.add_argument("--bounds", type=float, nargs=4, required=True, metavar=("X1MIN", "X1MAX", "X2MIN", "X2MAX"))
    p.add_argument("--resolution", type=_positive_int, default=50, metavar="N")
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("compare", help="Friedman / Nemenyi comparison of algorithms")
    p.add_argument("input", help="CSV of metrics, datasets x algorithms (higher is better)")
    p.add_argument("--alpha", type=float, choices=(0.05, 0.10), default=0.05)
    p.add_argument("--out", help="output file (default: stdout)")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (CliError, DataError, ValueError, ZeroDivisionError, OSError) as exc:
        print(f"expose {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
