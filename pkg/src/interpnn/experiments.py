"""Monte-Carlo studies: ratio curves, CIS curves, rate check, real-data sweep.

Each repetition draws its data from its own seed stream, queries neighbours
once, and evaluates the objective for every gamma and every k up to
``k_max`` (cheap thanks to :func:`~interpnn.estimator.score_curves`).  The
per-repetition curves are then reduced according to the k policy:

``per_rep`` (default)
    pick k separately on each repetition's curve.
``pooled``
    average the curves over repetitions, pick k on the averaged curve and
    read every repetition at that k.  This targets min_k E[risk(k)].

Repetitions are independent and may run on worker threads; aggregation is
done in repetition order with exactly rounded sums, so results do not depend
on the worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import LabeledDataset, RngSeed, Task, split_indices
from .errors import ConfigInvalidError, NonBinaryLabelError, OutOfRegimeError
from .estimator import MISCLASS, MSE, REGRET, loss_matrix, score_curves
from .neighbors import NeighborIndex
from .simgen import BayesOracle, MixtureModel, sample
from .theory import pr
from .weighting import WeightScheme

RATIO = "ratio"
CIS_STUDY = "cis"
RATE = "rate"
REAL = "real"

DEFAULT_GAMMA_OVER_D = (0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35)
DEFAULT_N_GRID = (64, 128, 256, 512, 1024)
GAMMA_OVER_D_CAP = 0.35
POLICIES = ("per_rep", "pooled")
GRIDS = ("geometric", "full")

RATIO_COLUMNS = ("d", "n", "gamma", "gamma_over_d", "metric", "sim_ratio", "stderr", "theory_pr")
CIS_COLUMNS = ("d", "n", "gamma", "gamma_over_d", "k_policy", "sim_cis_ratio", "stderr", "theory_sqrt_pr")
RATE_COLUMNS = ("d", "gamma", "n", "best_k", "best_mse", "stderr")
REAL_COLUMNS = ("dataset", "d", "gamma_over_d", "mean_error", "stderr", "best_flag")


@dataclass(frozen=True)
class ExperimentConfig:
    study: str = RATIO
    d: int = 2
    n: int = 1024
    n_grid: tuple[int, ...] = DEFAULT_N_GRID
    gamma_over_d: tuple[float, ...] = DEFAULT_GAMMA_OVER_D
    reps_regression: int = 100
    reps_classification: int = 500
    reps: int = 50  # real-data and rate-check repetitions
    n_test: int = 2048
    seed: int = 0
    k_grid: str = "geometric"
    k_max: int | None = None
    k_policy: str = "per_rep"
    train_fraction: float = 0.25
    validation_fraction: float = 0.25
    allow_out_of_regime: bool = False
    threads: int | None = None
    cis_same_train: bool = False  # degenerate smoke test: both CIS train sets identical

    def __post_init__(self):
        grid = sorted({float(g) for g in self.gamma_over_d} | {0.0})
        object.__setattr__(self, "gamma_over_d", tuple(grid))
        object.__setattr__(self, "n_grid", tuple(int(v) for v in self.n_grid))

    def validate(self) -> "ExperimentConfig":
        problems = []
        if self.study not in (RATIO, CIS_STUDY, RATE, REAL):
            problems.append(f"unknown study {self.study!r}")
        if self.d < 1:
            problems.append("d must be at least 1")
        if min(self.reps_regression, self.reps_classification, self.reps) < 1:
            problems.append("repetition counts must be at least 1")
        if any(g < 0 or not math.isfinite(g) for g in self.gamma_over_d):
            problems.append("gamma/d values must be finite and nonnegative")
        if not self.allow_out_of_regime and max(self.gamma_over_d) > GAMMA_OVER_D_CAP + 1e-12:
            problems.append(f"gamma/d above {GAMMA_OVER_D_CAP} needs allow_out_of_regime (--allow-out-of-regime)")
        if self.k_policy not in POLICIES:
            problems.append(f"k_policy must be one of {POLICIES}")
        if self.k_grid not in GRIDS:
            problems.append(f"k_grid must be one of {GRIDS}")
        if self.n_test < 1:
            problems.append("n_test must be at least 1")
        sizes = self.n_grid if self.study == RATE else (self.n,)
        if self.study != REAL:
            if min(sizes) < 2:
                problems.append("training size must be at least 2")
            if self.k_max is not None and not 1 <= self.k_max <= min(sizes) - 1:
                problems.append("k_max must lie in [1, n - 1]")
        if not 0 < self.train_fraction < 1 or not 0 < self.validation_fraction < 1:
            problems.append("split fractions must lie strictly between 0 and 1")
        if problems:
            raise ConfigInvalidError("; ".join(problems))
        return self

    def gammas(self):
        return [g * self.d for g in self.gamma_over_d]

    def kmax_for(self, n: int) -> int:
        return min(self.k_max or n - 1, n - 1)

    def worker_count(self) -> int:
        if self.threads:
            return max(1, int(self.threads))
        env = os.environ.get("INTERPNN_THREADS")
        if env:
            return max(1, int(env))
        return os.cpu_count() or 1


# ---------------------------------------------------------------- k grids

def geometric_grid(kmax: int, ratio: float = 1.15) -> np.ndarray:
    """Integers 1..kmax spaced roughly geometrically, always including kmax."""
    ks = [1]
    while ks[-1] < kmax:
        ks.append(min(kmax, max(ks[-1] + 1, int(round(ks[-1] * ratio)))))
    return np.array(ks, dtype=np.intp)


def select_k(curve: np.ndarray, grid: str = "geometric") -> int:
    """Index into a dense curve (entry j is k = j + 1) of the chosen k.

    ``geometric`` scans a coarse geometric grid, then every k within 3 of the
    coarse minimiser.  Ties go to the smaller k.
    """
    kmax = curve.shape[-1]
    if grid == "full":
        return int(np.argmin(curve))
    coarse = geometric_grid(kmax)
    k0 = int(coarse[np.argmin(curve[coarse - 1])])
    window = np.arange(max(1, k0 - 3), min(kmax, k0 + 3) + 1)
    eligible = np.union1d(coarse, window)
    return int(eligible[np.argmin(curve[eligible - 1])] - 1)


def _fmean(a, axis=0):
    a = np.moveaxis(np.asarray(a, dtype=float), axis, 0)
    out = np.empty(a.shape[1:])
    for pos in np.ndindex(out.shape):
        out[pos] = math.fsum(a[(slice(None),) + pos]) / a.shape[0]
    return out


def _pick(curves, policy, grid):
    """Reduce curves of shape (reps, G, K) to per-rep values (reps, G) and
    chosen k (reps, G)."""
    reps, G, _ = curves.shape
    ks = np.empty((reps, G), dtype=np.intp)
    if policy == "pooled":
        mean = _fmean(curves)
        for g in range(G):
            ks[:, g] = select_k(mean[g], grid)
    else:
        for r in range(reps):
            for g in range(G):
                ks[r, g] = select_k(curves[r, g], grid)
    vals = np.take_along_axis(curves, ks[:, :, None], axis=2)[:, :, 0]
    return vals, ks + 1


def _paired_ratio(vals: np.ndarray, base_col: int = 0):
    """Ratios of column means to the base column, with delta-method errors."""
    reps, G = vals.shape
    means = _fmean(vals)
    base = means[base_col]
    ratios = np.full(G, np.nan)
    errs = np.full(G, np.nan)
    if base > 0:
        ratios = means / base
        for g in range(G):
            resid = vals[:, g] - ratios[g] * vals[:, base_col]
            errs[g] = (float(np.std(resid, ddof=1)) / math.sqrt(reps) / base) if reps > 1 else 0.0
        ratios[base_col], errs[base_col] = 1.0, 0.0
    return means, ratios, errs


def _theory_or_na(fn, d, gamma):
    try:
        return fn(d, gamma)
    except OutOfRegimeError:
        return None


def _run_reps(fn, reps, workers):
    if workers <= 1 or reps <= 1:
        return [fn(r) for r in range(reps)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(reps)))


def _dense_curves(schemes_gammas, dist, nbr_y, kmax, objective, eta=None, labels=None):
    ks = np.arange(1, kmax + 1)
    out = np.empty((len(schemes_gammas), kmax))
    for g, gamma in enumerate(schemes_gammas):
        scores = score_curves(WeightScheme.interpolated(gamma), dist, nbr_y, ks)
        out[g] = loss_matrix(scores, objective, eta, labels).mean(axis=0)
    return out


def _sim_rep(model, oracle, n, n_test, kmax, gammas, seed, objective):
    train = sample(model, n, seed.child("train"))
    xq, _ = model.sample_features(n_test, seed.child("test"))
    eta = oracle.eta(xq)
    idx, dist = NeighborIndex(train).query_many(xq, kmax)
    return _dense_curves(gammas, dist, train.labels[idx], kmax, objective, eta)


# ---------------------------------------------------------------- ratio curve

@dataclass(frozen=True)
class CurveRow:
    d: int
    n: int
    gamma: float
    gamma_over_d: float
    metric: str
    sim_ratio: float
    stderr: float
    theory: float | None
    sim_value: float = float("nan")
    mean_best_k: float = float("nan")

    def as_ratio_record(self):
        return {"d": self.d, "n": self.n, "gamma": self.gamma, "gamma_over_d": self.gamma_over_d,
                "metric": self.metric, "sim_ratio": self.sim_ratio, "stderr": self.stderr,
                "theory_pr": self.theory}

    def as_cis_record(self):
        return {"d": self.d, "n": self.n, "gamma": self.gamma, "gamma_over_d": self.gamma_over_d,
                "k_policy": self.metric, "sim_cis_ratio": self.sim_ratio, "stderr": self.stderr,
                "theory_sqrt_pr": self.theory}


@dataclass
class RatioCurve:
    kind: str  # "ratio" or "cis"
    rows: list[CurveRow]
    config: ExperimentConfig
    extra: dict = field(default_factory=dict)

    def metric_rows(self, metric):
        return [r for r in self.rows if r.metric == metric]

    def records(self):
        if self.kind == "cis":
            return [r.as_cis_record() for r in self.rows]
        return [r.as_ratio_record() for r in self.rows]

    @property
    def columns(self):
        return CIS_COLUMNS if self.kind == "cis" else RATIO_COLUMNS


def _curve_rows(cfg, n, metric, vals, ks, theory_fn):
    means, ratios, errs = _paired_ratio(vals)
    mean_k = _fmean(ks.astype(float))
    rows = []
    for g, (gd, gamma) in enumerate(zip(cfg.gamma_over_d, cfg.gammas())):
        rows.append(CurveRow(cfg.d, n, gamma, gd, metric, float(ratios[g]), float(errs[g]),
                             _theory_or_na(theory_fn, cfg.d, gamma),
                             float(means[g]), float(mean_k[g])))
    return rows


def run_ratio_curve(cfg: ExperimentConfig, metrics=(MSE, REGRET)) -> RatioCurve:
    """Optimal-k MSE and Regret of interpolated-NN relative to kNN, per gamma."""
    cfg.validate()
    if cfg.study != RATIO:
        raise ConfigInvalidError("run_ratio_curve needs study='ratio'")
    model = MixtureModel(cfg.d)
    oracle = BayesOracle(model)
    kmax = cfg.kmax_for(cfg.n)
    root = RngSeed(cfg.seed).child("ratio")
    gammas = cfg.gammas()
    rows, extra = [], {}
    for metric in metrics:
        reps = cfg.reps_regression if metric == MSE else cfg.reps_classification
        task_seed = root.child(metric)
        curves = np.stack(_run_reps(
            lambda r: _sim_rep(model, oracle, cfg.n, cfg.n_test, kmax, gammas,
                               task_seed.child(r), metric),
            reps, cfg.worker_count()))
        vals, ks = _pick(curves, cfg.k_policy, cfg.k_grid)
        rows.extend(_curve_rows(cfg, cfg.n, metric, vals, ks, pr))
        extra[metric] = {"values": vals, "best_k": ks}
    return RatioCurve("ratio", rows, cfg, extra)


# ---------------------------------------------------------------- CIS curve

def _cis_rep(model, oracle, cfg, kmax, gammas, seed):
    xq, _ = model.sample_features(cfg.n_test, seed.child("test"))
    eta = oracle.eta(xq)
    ks = np.arange(1, kmax + 1)
    sides = ("A", "A") if cfg.cis_same_train else ("A", "B")
    preds, regret = [], np.zeros((len(gammas), kmax))
    for side in sides:
        train = sample(model, cfg.n, seed.child("train", side))
        idx, dist = NeighborIndex(train).query_many(xq, kmax)
        ny = train.labels[idx]
        p = []
        for g, gamma in enumerate(gammas):
            scores = score_curves(WeightScheme.interpolated(gamma), dist, ny, ks)
            regret[g] += loss_matrix(scores, REGRET, eta).mean(axis=0) / 2.0
            p.append(scores > 0.5)
        preds.append(p)
    cis = np.stack([(a != b).mean(axis=0) for a, b in zip(*preds)])
    return regret, cis


def run_cis_curve(cfg: ExperimentConfig) -> RatioCurve:
    """CIS of interpolated-NN relative to kNN.

    Rows with ``k_policy == "optimal"`` use each gamma's regret-optimal k;
    rows with ``"fixed"`` reuse the kNN-optimal k for every gamma.
    """
    cfg.validate()
    if cfg.study != CIS_STUDY:
        raise ConfigInvalidError("run_cis_curve needs study='cis'")
    model = MixtureModel(cfg.d)
    oracle = BayesOracle(model)
    kmax = cfg.kmax_for(cfg.n)
    root = RngSeed(cfg.seed).child("cis")
    gammas = cfg.gammas()
    out = _run_reps(lambda r: _cis_rep(model, oracle, cfg, kmax, gammas, root.child(r)),
                    cfg.reps_classification, cfg.worker_count())
    regret = np.stack([o[0] for o in out])
    cis = np.stack([o[1] for o in out])
    _, ks = _pick(regret, cfg.k_policy, cfg.k_grid)
    opt = np.take_along_axis(cis, (ks - 1)[:, :, None], axis=2)[:, :, 0]
    fixed_ks = np.repeat(ks[:, :1], len(gammas), axis=1)
    fixed = np.take_along_axis(cis, (fixed_ks - 1)[:, :, None], axis=2)[:, :, 0]

    def sqrt_pr(d, g):
        return math.sqrt(pr(d, g))

    rows = _curve_rows(cfg, cfg.n, "optimal", opt, ks, sqrt_pr)
    rows += _curve_rows(cfg, cfg.n, "fixed", fixed, fixed_ks, lambda d, g: None)
    return RatioCurve("cis", rows, cfg, {"cis_optimal": opt, "cis_fixed": fixed, "best_k": ks})


# ---------------------------------------------------------------- rate check

@dataclass
class RateCheck:
    rows: list[dict]
    slopes: dict[float, float]
    per_rep_best_k: dict[tuple[int, float], np.ndarray]
    config: ExperimentConfig

    columns = RATE_COLUMNS

    def records(self):
        return self.rows


def run_rate_check(cfg: ExperimentConfig) -> RateCheck:
    """Optimal k and optimal MSE against n, and the log-log MSE slope per gamma."""
    cfg.validate()
    if cfg.study != RATE:
        raise ConfigInvalidError("run_rate_check needs study='rate'")
    model = MixtureModel(cfg.d)
    oracle = BayesOracle(model)
    root = RngSeed(cfg.seed).child("rate")
    gammas = cfg.gammas()
    rows, per_rep_k, best = [], {}, {g: [] for g in gammas}
    for n in cfg.n_grid:
        kmax = cfg.kmax_for(n)
        curves = np.stack(_run_reps(
            lambda r: _sim_rep(model, oracle, n, cfg.n_test, kmax, gammas,
                               root.child(n, r), MSE),
            cfg.reps, cfg.worker_count()))
        vals, ks = _pick(curves, cfg.k_policy, cfg.k_grid)
        _, own_ks = _pick(curves, "per_rep", cfg.k_grid)
        means = _fmean(vals)
        for g, gamma in enumerate(gammas):
            se = float(np.std(vals[:, g], ddof=1) / math.sqrt(cfg.reps)) if cfg.reps > 1 else 0.0
            rows.append({"d": cfg.d, "gamma": gamma, "n": n,
                         "best_k": float(_fmean(ks[:, g].astype(float))),
                         "best_mse": float(means[g]), "stderr": se})
            per_rep_k[(n, gamma)] = own_ks[:, g]
            best[gamma].append(means[g])
    logn = np.log(np.asarray(cfg.n_grid, dtype=float))
    slopes = {}
    for gamma in gammas:
        if len(cfg.n_grid) >= 2:
            slopes[gamma] = float(np.polyfit(logn, np.log(best[gamma]), 1)[0])
    rows.sort(key=lambda r: (r["gamma"], r["n"]))
    return RateCheck(rows, slopes, per_rep_k, cfg)


# ---------------------------------------------------------------- real data

@dataclass
class RealDataResult:
    rows: list[dict]
    config: ExperimentConfig
    errors: np.ndarray  # (reps, G) test errors
    best_k: np.ndarray

    columns = REAL_COLUMNS

    def records(self):
        return self.rows


def run_real_data(ds: LabeledDataset, cfg: ExperimentConfig, name: str = "dataset") -> RealDataResult:
    """Test error of interpolated-NN per gamma/d on repeated random splits.

    Each repetition trains on ``train_fraction`` of the rows.  k is chosen
    per gamma on a validation split of the training part (fit on the rest),
    then the model is refit on the whole training part and scored on the
    test part.  Splits are seeded from ``cfg.seed`` and a row-order-free
    hash of the data, and rows are put in canonical order first, so the
    output does not depend on the input row order.
    """
    cfg.validate()
    if ds.task is not Task.CLASSIFICATION:
        bad = np.flatnonzero((ds.labels != 0.0) & (ds.labels != 1.0))
        if bad.size:
            raise NonBinaryLabelError(f"label at row {int(bad[0])} is not 0 or 1")
        ds = LabeledDataset(ds.points, ds.labels, Task.CLASSIFICATION)
    ds = ds.canonical()
    root = RngSeed(cfg.seed).child("real", ds.content_hash())
    gammas = [g * ds.d for g in cfg.gamma_over_d]

    def one(r):
        seed = root.child(r)
        tr, te = split_indices(ds.n, cfg.train_fraction, seed.child("split"))
        fit_i, val_i = split_indices(tr.size, 1.0 - cfg.validation_fraction, seed.child("val"))
        fit_ds, val_ds = ds.subset(tr[fit_i]), ds.subset(tr[val_i])
        kmax = min(cfg.k_max or fit_ds.n - 1, fit_ds.n - 1)
        idx, dist = NeighborIndex(fit_ds).query_many(val_ds.points, kmax)
        curves = _dense_curves(gammas, dist, fit_ds.labels[idx], kmax, MISCLASS,
                               labels=val_ds.labels)
        ks = np.array([select_k(c, cfg.k_grid) + 1 for c in curves])
        train, test = ds.subset(tr), ds.subset(te)
        idx, dist = NeighborIndex(train).query_many(test.points, int(ks.max()))
        ny = train.labels[idx]
        errs = np.empty(len(gammas))
        for g, (gamma, k) in enumerate(zip(gammas, ks)):
            s = score_curves(WeightScheme.interpolated(gamma), dist, ny, [k])
            errs[g] = loss_matrix(s, MISCLASS, labels=test.labels).mean()
        return errs, ks

    out = _run_reps(one, cfg.reps, cfg.worker_count())
    errors = np.stack([o[0] for o in out])
    best_k = np.stack([o[1] for o in out])
    means = _fmean(errors)
    best = int(np.argmin(means))
    rows = []
    for g, gd in enumerate(cfg.gamma_over_d):
        se = float(np.std(errors[:, g], ddof=1) / math.sqrt(cfg.reps)) if cfg.reps > 1 else 0.0
        rows.append({"dataset": name, "d": ds.d, "gamma_over_d": gd,
                     "mean_error": float(means[g]), "stderr": se, "best_flag": int(g == best)})
    return RealDataResult(rows, cfg, errors, best_k)


def with_study(cfg: ExperimentConfig, study: str) -> ExperimentConfig:
    return replace(cfg, study=study)
