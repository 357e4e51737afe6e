"""Neighbour weight schemes.

``Interpolated(gamma)`` puts mass proportional to ``(R_i / R_{k+1})**-gamma``
on the i-th of the k nearest neighbours.  Weights are formed in log space and
normalised with a log-sum-exp, so neither tiny distances nor large ``gamma``
overflow.  A neighbour at distance zero takes all of the mass (split evenly
among all such neighbours), which is the ``gamma > 0`` limit and makes the
estimator interpolate its training data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

UNIFORM = "uniform"
INTERPOLATED = "interpolated"
OWNN = "ownn"


@dataclass(frozen=True)
class WeightScheme:
    kind: str = UNIFORM
    gamma: float = 0.0
    d: int | None = None

    def __post_init__(self):
        if self.kind not in (UNIFORM, INTERPOLATED, OWNN):
            raise ValueError(f"unknown weight scheme {self.kind!r}")
        if not np.isfinite(self.gamma) or self.gamma < 0:
            raise ValueError("gamma must be a finite nonnegative number")
        if self.kind == OWNN and (self.d is None or self.d < 1):
            raise ValueError("the OWNN scheme needs the data dimension d >= 1")

    @classmethod
    def uniform(cls):
        return cls(UNIFORM)

    @classmethod
    def interpolated(cls, gamma: float):
        return cls(INTERPOLATED, float(gamma))

    @classmethod
    def ownn(cls, d: int):
        return cls(OWNN, 0.0, int(d))

    @property
    def is_uniform(self) -> bool:
        """True when the scheme reduces to plain kNN averaging."""
        return self.kind == UNIFORM or (self.kind == INTERPOLATED and self.gamma == 0.0)

    def __str__(self):
        if self.kind == INTERPOLATED:
            return f"interpolated(gamma={self.gamma:g})"
        if self.kind == OWNN:
            return f"ownn(d={self.d})"
        return "uniform"


def ownn_rank_weights(k: int, d: int) -> np.ndarray:
    """Rank-based optimal weights for k neighbours in dimension d.

    w_i = (1/k) * (1 + d/2 - d / (2 k^(2/d)) * (i^(1+2/d) - (i-1)^(1+2/d))),
    clipped at zero and renormalised.
    """
    i = np.arange(1, k + 1, dtype=float)
    e = 1.0 + 2.0 / d
    w = (1.0 + d / 2.0 - d / (2.0 * k ** (2.0 / d)) * (i ** e - (i - 1.0) ** e)) / k
    w = np.clip(w, 0.0, None)
    return w / w.sum()


def compute_weights(scheme: WeightScheme, nl) -> np.ndarray:
    """Normalised weights of the k nearest neighbours in a NeighborList.

    ``nl`` may also be a bare sorted distance array of length ``k + 1``.
    """
    r = np.asarray(getattr(nl, "distances", nl), dtype=float)
    k = r.size - 1
    if k < 1:
        raise ValueError("need at least k + 1 = 2 distances")
    if scheme.is_uniform:
        return np.full(k, 1.0 / k)
    if scheme.kind == OWNN:
        return ownn_rank_weights(k, scheme.d)

    rk = r[:k]
    zeros = rk == 0.0
    if zeros.any():
        # covers R_{k+1} == 0 too, where every one of the k is a zero
        return zeros / np.count_nonzero(zeros)
    logw = -scheme.gamma * (np.log(rk) - np.log(r[k]))
    w = np.exp(logw - logsumexp(logw))
    return w / w.sum()
