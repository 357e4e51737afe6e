"""Interpolated-NN regression and classification, plus evaluation.

Single-query prediction goes through :func:`~interpnn.weighting.compute_weights`
directly.  Batch prediction (:func:`score_curves`) evaluates many neighbour
counts at once: because every weight ratio is taken relative to a common
reference distance, the weighted average over the first k neighbours is a
ratio of two cumulative sums, so a whole k-grid costs one pass over the
neighbour table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import LabeledDataset, Task
from .errors import (
    EmptyGridError,
    EmptyQuerySetError,
    KTooLargeError,
    SchemeMismatchError,
    TaskMismatchError,
)
from .neighbors import NeighborIndex
from .weighting import OWNN, WeightScheme, compute_weights, ownn_rank_weights

MSE = "mse"
MISCLASS = "misclass_rate"
REGRET = "regret"
CIS = "cis"


@dataclass(frozen=True)
class EvalReport:
    metric: str
    value: float
    stderr: float
    n_eval: int


def _report(metric, losses) -> EvalReport:
    losses = np.asarray(losses, dtype=float)
    n = losses.size
    if n == 0:
        raise EmptyQuerySetError("no evaluation points")
    mean = math.fsum(losses) / n
    se = float(np.std(losses, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return EvalReport(metric, mean, se, n)


@dataclass(frozen=True, eq=False)
class FittedModel:
    train: LabeledDataset
    index: NeighborIndex
    scheme: WeightScheme
    k: int

    @property
    def task(self) -> Task:
        return self.train.task


def fit(train: LabeledDataset, scheme: WeightScheme, k: int, index=None) -> FittedModel:
    k = int(k)
    if k < 1:
        raise ValueError("k must be a positive integer")
    if k + 1 > train.n:
        raise KTooLargeError(f"k + 1 = {k + 1} exceeds the {train.n} training points")
    if index is None:
        index = NeighborIndex(train)
    return FittedModel(train, index, scheme, k)


def _weighted_average(scheme, distances, y, k):
    if scheme.is_uniform:
        return float(np.sum(y[:k]) / k)
    return float(np.dot(compute_weights(scheme, distances), y[:k]))


def predict_regression(m: FittedModel, q) -> float:
    nl = m.index.query(q, m.k)
    return _weighted_average(m.scheme, nl.distances, m.train.labels[nl.indices], m.k)


def _require_classification(m):
    if m.task is not Task.CLASSIFICATION:
        raise TaskMismatchError("model was not trained for classification")


def predict_class(m: FittedModel, q) -> int:
    """1 if the weighted label average exceeds 1/2, else 0 (1/2 maps to 0)."""
    _require_classification(m)
    return int(predict_regression(m, q) > 0.5)


def score_curves(scheme: WeightScheme, dist, nbr_y, ks) -> np.ndarray:
    """Weighted label averages for each query and each k in ``ks``.

    Parameters
    ----------
    scheme : WeightScheme
    dist : ndarray, shape (m, K)
        Sorted neighbour distances; ``K >= max(ks)``.
    nbr_y : ndarray, shape (m, K)
        Labels of those neighbours.
    ks : sequence of int
        Neighbour counts, each at least 1.

    Returns
    -------
    ndarray, shape (m, len(ks))
    """
    ks = np.asarray(ks, dtype=np.intp)
    kmax = int(ks.max())
    dist = np.asarray(dist, dtype=float)[:, :kmax]
    y = np.asarray(nbr_y, dtype=float)[:, :kmax]
    cols = ks - 1

    if scheme.is_uniform:
        return np.cumsum(y, axis=1)[:, cols] / ks

    if scheme.kind == OWNN:
        out = np.empty((y.shape[0], ks.size))
        for j, k in enumerate(ks):
            out[:, j] = y[:, :k] @ ownn_rank_weights(int(k), scheme.d)
        return out

    out = np.empty((y.shape[0], ks.size))
    exact = dist[:, 0] == 0.0
    if exact.any():
        # all mass on the zero-distance neighbours, which sort first
        nz = np.count_nonzero(dist[exact] == 0.0, axis=1)[:, None]
        use = np.minimum(ks[None, :], nz)
        cy = np.cumsum(y[exact], axis=1)
        out[exact] = np.take_along_axis(cy, use - 1, axis=1) / use
    rest = ~exact
    if rest.any():
        logr = np.log(dist[rest])
        w = np.exp(-scheme.gamma * (logr - logr[:, :1]))
        cw = np.cumsum(w, axis=1)[:, cols]
        cwy = np.cumsum(w * y[rest], axis=1)[:, cols]
        out[rest] = cwy / cw
    return out


def predict_scores(m: FittedModel, queries) -> np.ndarray:
    """Batch weighted label averages for a fitted model."""
    idx, dist = m.index.query_many(queries, m.k)
    return score_curves(m.scheme, dist, m.train.labels[idx], [m.k])[:, 0]


def predict_classes(m: FittedModel, queries) -> np.ndarray:
    _require_classification(m)
    return (predict_scores(m, queries) > 0.5).astype(np.int8)


def eval_mse(m: FittedModel, truth, queries) -> EvalReport:
    """Mean squared error against the regression function ``truth``.

    ``truth`` maps one point to its target value.
    """
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    if len(queries) == 0 or queries.size == 0:
        raise EmptyQuerySetError("no query points")
    target = np.array([truth(q) for q in queries], dtype=float)
    return _report(MSE, (predict_scores(m, queries) - target) ** 2)


def eval_regret(m: FittedModel, bayes, test_draws) -> EvalReport:
    """Paired regret estimate on labelled draws ``(X, y)``.

    The model's and the Bayes rule's errors are counted on the same draws;
    the difference may come out slightly negative and is reported as-is.
    """
    _require_classification(m)
    X, y = test_draws
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise EmptyQuerySetError("no test draws")
    pred = predict_classes(m, X)
    g = bayes.classify(X)
    return _report(REGRET, (pred != y).astype(float) - (g != y).astype(float))


def eval_regret_conditional(m: FittedModel, bayes, queries) -> EvalReport:
    """Regret with the label integrated out: mean of |2 eta - 1| where the
    model and the Bayes rule disagree."""
    _require_classification(m)
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    if len(queries) == 0:
        raise EmptyQuerySetError("no query points")
    eta = bayes.eta(queries)
    pred = predict_classes(m, queries)
    return _report(REGRET, np.abs(2.0 * eta - 1.0) * (pred != (eta > 0.5)))


def eval_misclassification(m: FittedModel, test: LabeledDataset) -> EvalReport:
    _require_classification(m)
    pred = predict_classes(m, test.points)
    return _report(MISCLASS, (pred != test.labels).astype(float))


def eval_cis(mA: FittedModel, mB: FittedModel, queries) -> EvalReport:
    """Fraction of queries on which two classifiers disagree."""
    if mA.scheme != mB.scheme or mA.k != mB.k:
        raise SchemeMismatchError("both models need the same weight scheme and k")
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    if len(queries) == 0:
        raise EmptyQuerySetError("no query points")
    return _report(CIS, (predict_classes(mA, queries) != predict_classes(mB, queries)).astype(float))


@dataclass(frozen=True, eq=False)
class EvalContext:
    """Evaluation draws used to choose k.

    ``eta`` holds the regression function (or P(Y=1|x)) at ``queries`` and
    is needed for the ``mse`` and ``regret`` objectives; ``labels`` holds
    observed labels, needed for ``misclass_rate`` and used by ``regret`` for
    the paired estimator when present.
    """

    queries: np.ndarray
    eta: np.ndarray | None = None
    labels: np.ndarray | None = None

    @classmethod
    def from_oracle(cls, oracle, queries, labels=None):
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        return cls(queries, oracle.eta(queries), None if labels is None else np.asarray(labels, float))


def loss_matrix(scores: np.ndarray, objective: str, eta=None, labels=None) -> np.ndarray:
    """Per-query losses, same shape as ``scores``, whose column means are the
    objective at each k."""
    if objective == MSE:
        if eta is None:
            raise ValueError("the mse objective needs eta values")
        return (scores - np.asarray(eta)[:, None]) ** 2
    pred = scores > 0.5
    if objective == MISCLASS:
        if labels is None:
            raise ValueError("the misclassification objective needs labels")
        return (pred != (np.asarray(labels)[:, None] > 0.5)).astype(float)
    if objective == REGRET:
        if eta is None:
            raise ValueError("the regret objective needs eta values")
        eta = np.asarray(eta)
        g = (eta > 0.5)[:, None]
        if labels is not None:
            y = (np.asarray(labels) > 0.5)[:, None]
            return (pred != y).astype(float) - (g != y).astype(float)
        return np.abs(2.0 * eta - 1.0)[:, None] * (pred != g)
    raise ValueError(f"unknown objective {objective!r}")


def column_means(losses: np.ndarray) -> np.ndarray:
    return losses.mean(axis=0)


def optimize_k(train: LabeledDataset, scheme: WeightScheme, k_grid, objective: str,
               eval_ctx: EvalContext, index=None):
    """Choose k from ``k_grid`` by minimising ``objective`` on ``eval_ctx``.

    Ties go to the smaller k.  Returns ``(k_best, EvalReport)``.
    """
    ks = np.unique(np.asarray(list(k_grid), dtype=np.intp))
    if ks.size == 0:
        raise EmptyGridError("k grid is empty")
    if ks[0] < 1:
        raise ValueError("k values must be positive")
    if ks[-1] + 1 > train.n:
        raise KTooLargeError(f"k + 1 = {ks[-1] + 1} exceeds the {train.n} training points")
    if objective in (REGRET, MISCLASS) and train.task is not Task.CLASSIFICATION:
        raise TaskMismatchError(f"{objective} needs a classification dataset")
    if index is None:
        index = NeighborIndex(train)
    idx, dist = index.query_many(eval_ctx.queries, int(ks[-1]))
    scores = score_curves(scheme, dist, train.labels[idx], ks)
    losses = loss_matrix(scores, objective, eval_ctx.eta, eval_ctx.labels)
    j = int(np.argmin(column_means(losses)))
    return int(ks[j]), _report(objective, losses[:, j])
