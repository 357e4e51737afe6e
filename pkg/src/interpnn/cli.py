"""Command-line front end.

Subcommands
-----------
theory      closed-form ratios over a gamma grid
simulate    simulated MSE and Regret ratio curves
cis         simulated classification-instability ratio curves
ratecheck   optimal MSE against n and its log-log slope
bench       test error sweep on a CSV dataset (a synthetic one is bundled)
predict     fit one model on a CSV and score query points

Every run writes ``config.json`` next to its outputs.  Passing that file
back through ``--config`` reproduces the run; flags given on the command
line override the logged values.

Exit status is 0 on success, 2 for usage errors, 3 for dataset errors, 4
for invalid configurations and 5 for output failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .core import LabeledDataset, Task
from .errors import (
    ConfigInvalidError,
    CsvParseError,
    DimensionMismatchError,
    EmptyDatasetError,
    InterpNNError,
    NonBinaryLabelError,
    OutputError,
)
from .estimator import fit, predict_scores
from .experiments import (
    CIS_STUDY,
    DEFAULT_GAMMA_OVER_D,
    DEFAULT_N_GRID,
    GAMMA_OVER_D_CAP,
    GRIDS,
    POLICIES,
    RATE,
    RATIO,
    REAL,
    ExperimentConfig,
    run_cis_curve,
    run_rate_check,
    run_ratio_curve,
    run_real_data,
)
from .output import PredictionTable, TheoryTable, emit_outputs
from .theory import theory_table
from .weighting import WeightScheme

BUNDLED_CSV = "synthetic_500.csv"
CONFIG_LOG = "config.json"
USAGE_EXIT = 2

# options that do not change results and are not logged
_UNLOGGED = ("subcommand", "config", "out_dir")


@dataclass
class CliConfig:
    subcommand: str
    options: dict
    out_dir: Path
    experiment: ExperimentConfig | None = None
    extra: dict = field(default_factory=dict)

    def log_text(self) -> str:
        body = {"subcommand": self.subcommand, "options": self.options, "version": __version__}
        return json.dumps(body, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------- CSV input

def _open_csv(path):
    try:
        return open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise CsvParseError(f"cannot read {path}: {exc.strerror or exc}") from exc


def read_numeric_csv(path):
    """Header and float matrix of a numeric CSV.

    Row numbers in errors are file line numbers (the header is line 1).
    """
    with _open_csv(path) as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise EmptyDatasetError(f"{path} is empty") from None
        rows = []
        for line, raw in enumerate(reader, start=2):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(header):
                raise CsvParseError(f"expected {len(header)} fields, found {len(raw)}", row=line)
            vals = []
            for name, cell in zip(header, raw):
                try:
                    v = float(cell)
                except ValueError:
                    raise CsvParseError(f"non-numeric value {cell.strip()!r}", row=line,
                                        column=name) from None
                if not math.isfinite(v):
                    raise CsvParseError(f"non-finite value {cell.strip()!r}", row=line, column=name)
                vals.append(v)
            rows.append(vals)
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def _label_index(header, label_column):
    if label_column is None:
        return len(header) - 1
    if isinstance(label_column, str) and label_column in header:
        return header.index(label_column)
    try:
        i = int(label_column)
    except (TypeError, ValueError):
        raise CsvParseError(f"no column named {label_column!r}") from None
    if not -len(header) <= i < len(header):
        raise CsvParseError(f"label column index {i} out of range for {len(header)} columns")
    return i % len(header)


def load_csv(path, label_column=None, task=Task.CLASSIFICATION) -> LabeledDataset:
    """Read a labelled dataset from a numeric CSV with a header row.

    ``label_column`` is a column name or position; the last column is the
    label by default.  Every other column is a feature.
    """
    task = Task(task)
    header, data = read_numeric_csv(path)
    j = _label_index(header, label_column)
    if len(header) < 2:
        raise CsvParseError("need at least one feature column besides the label")
    if data.shape[0] == 0:
        raise EmptyDatasetError(f"{path} has a header but no data rows")
    labels = data[:, j]
    if task is Task.CLASSIFICATION:
        bad = np.flatnonzero((labels != 0.0) & (labels != 1.0))
        if bad.size:
            i = int(bad[0])
            raise NonBinaryLabelError(
                f"label {labels[i]:g} in column {header[j]!r} at row {i + 2} is not 0 or 1")
    return LabeledDataset(np.delete(data, j, axis=1), labels, task)


def bundled_csv_path() -> Path:
    return Path(str(resources.files("interpnn") / "data" / BUNDLED_CSV))


# ---------------------------------------------------------------- parser

def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _nonneg_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not (math.isfinite(v) and v >= 0):
        raise argparse.ArgumentTypeError(f"expected a finite nonnegative number, got {text!r}")
    return v


def _fraction(text):
    v = _nonneg_float(text)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"expected a value strictly between 0 and 1, got {text!r}")
    return v


def _common(p):
    p.add_argument("--out-dir", default=".", help="directory for all outputs (default: .)")
    p.add_argument("--seed", type=int, default=0, help="master seed (default: 0)")
    p.add_argument("--config", help="replay a logged config.json; explicit flags still win")


def _study(p, reps_default=None, grid=DEFAULT_GAMMA_OVER_D):
    p.add_argument("--d", type=_positive_int, default=2, help="dimension (default: 2)")
    p.add_argument("--gamma-over-d", type=_nonneg_float, nargs="+", default=list(grid),
                   metavar="G", help=f"gamma/d grid; values above {GAMMA_OVER_D_CAP} need "
                   "--allow-out-of-regime (0 is always added)")
    p.add_argument("--allow-out-of-regime", action="store_true",
                   help=f"permit gamma/d above {GAMMA_OVER_D_CAP}")
    p.add_argument("--reps", type=_positive_int, default=reps_default,
                   help="repetitions" + ("" if reps_default else " (overrides both per-task counts)"))
    p.add_argument("--n-test", type=_positive_int, default=2048,
                   help="fresh evaluation draws per repetition (default: 2048)")
    p.add_argument("--k-grid", choices=GRIDS, default="geometric", help="k search grid")
    p.add_argument("--k-max", type=_positive_int, default=None, help="largest k searched (default: n-1)")
    p.add_argument("--k-policy", choices=POLICIES, default="per_rep",
                   help="choose k per repetition or on the averaged curve")
    p.add_argument("--threads", type=_positive_int, default=None,
                   help="worker threads (default: INTERPNN_THREADS or CPU count)")


def build_parser():
    parser = argparse.ArgumentParser(prog="interpnn", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True, metavar="SUBCOMMAND")
    subs = {}

    p = subs["theory"] = sub.add_parser("theory", help="closed-form ratio table")
    p.add_argument("--d", type=_positive_int, default=2, help="dimension (default: 2)")
    p.add_argument("--gamma-max", type=_nonneg_float, default=None,
                   help="last gamma of the grid; must stay below d/3 (default: largest grid point below d/3)")
    p.add_argument("--step", type=_nonneg_float, default=0.01, help="gamma step (default: 0.01)")
    _common(p)

    p = subs["simulate"] = sub.add_parser("simulate", help="MSE and Regret ratio curves")
    p.add_argument("--n", type=_positive_int, default=1024, help="training size (default: 1024)")
    _study(p)
    p.add_argument("--reps-regression", type=_positive_int, default=100)
    p.add_argument("--reps-classification", type=_positive_int, default=500)
    p.add_argument("--metrics", nargs="+", choices=("mse", "regret"), default=["mse", "regret"])
    _common(p)

    p = subs["cis"] = sub.add_parser("cis", help="classification-instability ratio curves")
    p.add_argument("--n", type=_positive_int, default=1024, help="training size (default: 1024)")
    _study(p)
    p.add_argument("--reps-classification", type=_positive_int, default=500)
    p.add_argument("--same-train", action="store_true",
                   help="use one training set for both models (CIS is then zero)")
    _common(p)

    p = subs["ratecheck"] = sub.add_parser("ratecheck", help="optimal MSE against n")
    p.add_argument("--n-grid", type=_positive_int, nargs="+", default=list(DEFAULT_N_GRID))
    _study(p, reps_default=50, grid=(0.2,))
    _common(p)

    p = subs["bench"] = sub.add_parser("bench", help="test-error sweep on a CSV dataset")
    p.add_argument("--csv", default=None, help=f"dataset path (default: bundled {BUNDLED_CSV})")
    p.add_argument("--label-column", default=None, help="label column name or index (default: last)")
    p.add_argument("--name", default=None, help="dataset name in the output (default: file stem)")
    p.add_argument("--train-fraction", type=_fraction, default=0.25)
    p.add_argument("--validation-fraction", type=_fraction, default=0.25,
                   help="share of the training part held out to choose k")
    _study(p, reps_default=50)
    _common(p)

    p = subs["predict"] = sub.add_parser("predict", help="fit on a CSV and score query points")
    p.add_argument("--train", required=True, help="training CSV with a label column")
    p.add_argument("--queries", required=True, help="query CSV with feature columns only")
    p.add_argument("--label-column", default=None, help="label column name or index (default: last)")
    p.add_argument("--task", choices=[t.value for t in Task], default=Task.CLASSIFICATION.value)
    p.add_argument("--gamma", type=_nonneg_float, default=0.0, help="interpolation level (default: 0)")
    p.add_argument("--k", type=_positive_int, required=True, help="number of neighbours")
    _common(p)
    return parser, subs


def _experiment(ns) -> ExperimentConfig:
    sc = ns.subcommand
    kw = dict(d=ns.d, gamma_over_d=tuple(ns.gamma_over_d), n_test=ns.n_test, seed=ns.seed,
              k_grid=ns.k_grid, k_max=ns.k_max, k_policy=ns.k_policy,
              allow_out_of_regime=ns.allow_out_of_regime, threads=ns.threads)
    if sc == "simulate":
        kw.update(study=RATIO, n=ns.n,
                  reps_regression=ns.reps or ns.reps_regression,
                  reps_classification=ns.reps or ns.reps_classification)
    elif sc == "cis":
        kw.update(study=CIS_STUDY, n=ns.n, cis_same_train=ns.same_train,
                  reps_classification=ns.reps or ns.reps_classification)
    elif sc == "ratecheck":
        kw.update(study=RATE, n_grid=tuple(ns.n_grid), reps=ns.reps)
    else:
        kw.update(study=REAL, reps=ns.reps, train_fraction=ns.train_fraction,
                  validation_fraction=ns.validation_fraction)
    return ExperimentConfig(**kw).validate()


def _theory_grid(ns, parser):
    limit = ns.d / 3.0
    if ns.step <= 0:
        parser.error("--step must be positive")
    if ns.gamma_max is not None and ns.gamma_max >= limit:
        parser.error(f"--gamma-max {ns.gamma_max} must be below d/3 = {limit:.6g} for d={ns.d}")
    top = ns.gamma_max if ns.gamma_max is not None else limit
    count = math.floor(top / ns.step + 1e-9)
    grid = [round(i * ns.step, 12) for i in range(count + 1)]
    return [g for g in grid if g < limit and g <= top + 1e-12]


def _apply_logged(ns, parser, subs, argv):
    try:
        logged = json.loads(Path(ns.config).read_text(encoding="utf-8"))
        sc, options = logged["subcommand"], logged["options"]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        parser.error(f"--config {ns.config}: not a readable config log ({exc})")
    if sc != ns.subcommand:
        parser.error(f"--config {ns.config} was logged by '{sc}', not '{ns.subcommand}'")
    known = {a.dest for a in subs[sc]._actions}
    unknown = sorted(set(options) - known)
    if unknown:
        parser.error(f"--config {ns.config}: unknown options {', '.join(unknown)}")
    # logged values become defaults; explicit flags are parsed again on top
    subs[sc].set_defaults(**options)
    for action in subs[sc]._actions:
        if action.dest in options:
            action.required = False
    return parser.parse_args(argv)


def parse_args(argv=None) -> CliConfig:
    """Parse and validate a command line; usage problems exit with status 2."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    ns = parser.parse_args(argv)
    if ns.config:
        ns = _apply_logged(ns, parser, subs, argv)
    sub = subs[ns.subcommand]
    options = {k: v for k, v in sorted(vars(ns).items()) if k not in _UNLOGGED}
    cfg = CliConfig(ns.subcommand, options, Path(ns.out_dir))
    if ns.subcommand == "theory":
        cfg.extra["gammas"] = _theory_grid(ns, sub)
    elif ns.subcommand != "predict":
        try:
            cfg.experiment = _experiment(ns)
        except ConfigInvalidError as exc:
            sub.error(str(exc))
    return cfg


# ---------------------------------------------------------------- run

def _predict(o) -> PredictionTable:
    task = Task(o["task"])
    train = load_csv(o["train"], o["label_column"], task)
    header, queries = read_numeric_csv(o["queries"])
    if queries.shape[0] == 0:
        raise EmptyDatasetError(f"{o['queries']} has no query rows")
    if queries.shape[1] != train.d:
        raise DimensionMismatchError(
            f"queries have {queries.shape[1]} columns, training features have {train.d}")
    model = fit(train, WeightScheme.interpolated(o["gamma"]), o["k"])
    scores = predict_scores(model, queries)
    rows = [{"row": i + 1, "score": float(s)} for i, s in enumerate(scores)]
    columns = ("row", "score")
    if task is Task.CLASSIFICATION:
        for r in rows:
            r["class"] = int(r["score"] > 0.5)
        columns += ("class",)
    return PredictionTable(columns, rows)


def run(cfg: CliConfig):
    """Execute a parsed command; returns the study result."""
    o = cfg.options
    sc = cfg.subcommand
    if sc == "theory":
        return TheoryTable(o["d"], theory_table(o["d"], cfg.extra["gammas"]))
    if sc == "simulate":
        return run_ratio_curve(cfg.experiment, metrics=tuple(o["metrics"]))
    if sc == "cis":
        return run_cis_curve(cfg.experiment)
    if sc == "ratecheck":
        return run_rate_check(cfg.experiment)
    if sc == "bench":
        path = o["csv"] or bundled_csv_path()
        ds = load_csv(path, o["label_column"], Task.CLASSIFICATION)
        return run_real_data(ds, cfg.experiment, o["name"] or Path(path).stem)
    if sc == "predict":
        return _predict(o)
    raise ConfigInvalidError(f"unknown subcommand {sc!r}")


def main(argv=None) -> int:
    try:
        cfg = parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_EXIT
    try:
        result = run(cfg)
        written = emit_outputs(result, cfg.out_dir, {CONFIG_LOG: cfg.log_text()})
    except InterpNNError as exc:
        print(f"interpnn {cfg.subcommand}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"interpnn {cfg.subcommand}: error: {exc}", file=sys.stderr)
        return OutputError.exit_code
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
