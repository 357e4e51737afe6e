"""Two-class Gaussian-mixture simulation model and its Bayes rule.

Classes are equally likely.  Given the class, coordinates are independent;
each coordinate is an even mixture of two normals:

    class 0:  0.5 N(0, 1)   + 0.5 N(3, 2)
    class 1:  0.5 N(1.5, 1) + 0.5 N(4.5, 2)

where the second parameter is the variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .core import LabeledDataset, RngSeed, Task
from .errors import DimensionMismatchError
from .estimator import EvalReport


@dataclass(frozen=True)
class MixtureModel:
    d: int
    means0: tuple[float, float] = (0.0, 3.0)
    means1: tuple[float, float] = (1.5, 4.5)
    variances: tuple[float, float] = (1.0, 2.0)
    prior1: float = 0.5

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError("d must be a positive integer")

    def sample_features(self, n: int, seed: RngSeed, labels=None):
        """Features (and labels) of ``n`` draws from the joint law."""
        if n < 1:
            raise ValueError("n must be at least 1")
        rng = seed.generator()
        y = (rng.random(n) < self.prior1).astype(float) if labels is None else labels
        comp = (rng.random((n, self.d)) < 0.5).astype(np.intp)
        mu = np.where(y[:, None] == 1.0,
                      np.asarray(self.means1)[comp], np.asarray(self.means0)[comp])
        sd = np.sqrt(np.asarray(self.variances))[comp]
        x = mu + sd * rng.standard_normal((n, self.d))
        return x, y

    def log_density(self, x, label: int) -> np.ndarray:
        """log f(x | Y=label), summed over coordinates in log space."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.d:
            raise DimensionMismatchError(f"expected dimension {self.d}, got {x.shape[1]}")
        means = self.means1 if label == 1 else self.means0
        var = np.asarray(self.variances)
        comps = [
            math.log(0.5) - 0.5 * np.log(2 * np.pi * var[j]) - (x - means[j]) ** 2 / (2 * var[j])
            for j in range(2)
        ]
        return np.logaddexp(comps[0], comps[1]).sum(axis=1)


def sample(model: MixtureModel, n: int, seed: RngSeed, task=Task.CLASSIFICATION) -> LabeledDataset:
    """``n`` iid labelled draws; deterministic under ``seed``."""
    x, y = model.sample_features(n, seed)
    return LabeledDataset(x, y, task)


@dataclass(frozen=True)
class BayesOracle:
    model: MixtureModel

    def eta(self, x) -> np.ndarray:
        """P(Y=1 | X=x) for each row of ``x``."""
        m = self.model
        logit = (self.model.log_density(x, 1) + math.log(m.prior1)
                 - self.model.log_density(x, 0) - math.log1p(-m.prior1))
        return expit(logit)

    def classify(self, x) -> np.ndarray:
        """Bayes rule; eta exactly 1/2 maps to class 0."""
        return (self.eta(x) > 0.5).astype(np.int8)


def eta(oracle: BayesOracle, q) -> float:
    return float(oracle.eta(np.atleast_2d(q))[0])


def bayes_classify(oracle: BayesOracle, q) -> int:
    return int(oracle.classify(np.atleast_2d(q))[0])


def bayes_risk(oracle: BayesOracle, n_mc: int, seed: RngSeed) -> EvalReport:
    """Monte-Carlo Bayes risk as the mean of min(eta, 1 - eta) over feature draws."""
    x, _ = oracle.model.sample_features(n_mc, seed)
    e = oracle.eta(x)
    v = np.minimum(e, 1.0 - e)
    se = float(np.std(v, ddof=1) / math.sqrt(n_mc)) if n_mc > 1 else 0.0
    return EvalReport("bayes_risk", math.fsum(v) / n_mc, se, n_mc)


def bayes_risk_by_labels(oracle: BayesOracle, n_mc: int, seed: RngSeed) -> EvalReport:
    """Plain estimate: error rate of the Bayes rule on sampled labels."""
    x, y = oracle.model.sample_features(n_mc, seed)
    v = (oracle.classify(x) != y).astype(float)
    se = float(np.std(v, ddof=1) / math.sqrt(n_mc)) if n_mc > 1 else 0.0
    return EvalReport("bayes_risk", math.fsum(v) / n_mc, se, n_mc)
