"""Distribution-free asymptotic ratios of interpolated-NN against kNN.

Every quantity depends on the dimension ``d`` and the interpolation level
``gamma`` only.  The ratios are valid for ``0 <= gamma < d/3``; outside that
range the functions raise :class:`~interpnn.errors.OutOfRegimeError` rather
than extrapolate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import RngSeed
from .errors import OutOfRegimeError


def _check(d, gamma, limit=3):
    if int(d) != d or d < 1:
        raise OutOfRegimeError(f"dimension must be a positive integer, got {d!r}")
    if not (gamma >= 0 and gamma < d / limit):
        raise OutOfRegimeError(f"gamma={gamma!r} outside [0, d/{limit}) for d={d}")
    return float(d), float(gamma)


def variance_inflation(d, gamma) -> float:
    """1 + gamma^2 / (d (d - 2 gamma)): the variance factor at equal k."""
    return 1.0 + gamma * gamma / (d * (d - 2.0 * gamma))


def _bias_factor(d, gamma) -> float:
    return ((d - gamma) ** 2 / (d + 2.0 - gamma) ** 2) * ((d + 2.0) ** 2 / d ** 2)


def pr(d, gamma) -> float:
    """Performance ratio PR(d, gamma) of optimal-k interpolated-NN to optimal kNN.

    Applies to both MSE (regression) and Regret (classification).
    """
    d, gamma = _check(d, gamma)
    return (variance_inflation(d, gamma) ** (4.0 / (d + 4.0))
            * _bias_factor(d, gamma) ** (d / (d + 4.0)))


def gamma_d(d: int, tol: float = 1e-12) -> float:
    """Right edge of the window where PR(d, gamma) < 1.

    For d >= 4 PR stays below one on the whole admissible range and d/3 is
    returned.  Otherwise the root of PR = 1 is bracketed in
    (1e-9, d/3 - 1e-9) and bisected until |PR - 1| <= tol.
    """
    if int(d) != d or d < 1:
        raise OutOfRegimeError(f"dimension must be a positive integer, got {d!r}")
    if d >= 4:
        return d / 3.0
    lo, hi = 1e-9, d / 3.0 - 1e-9
    f_lo, f_hi = pr(d, lo) - 1.0, pr(d, hi) - 1.0
    if not (f_lo < 0.0 < f_hi):
        raise ArithmeticError(f"PR(d={d}) - 1 does not change sign on the bracket")
    mid = 0.5 * (lo + hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        f_mid = pr(d, mid) - 1.0
        if abs(f_mid) <= tol:
            break
        if f_mid < 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4 * np.finfo(float).eps * hi:
            break
    return mid


def k_ratio(d, gamma) -> float:
    """Limit of k_gamma / k_0, the ratio of optimal neighbour counts."""
    d, gamma = _check(d, gamma)
    base = ((d + 2.0 - gamma) ** 2 / (d * (d - 2.0 * gamma))) * (d ** 2 / (d + 2.0) ** 2)
    return base ** (d / (d + 4.0))


def cis_ratio_same_k(d, gamma) -> float:
    """CIS(gamma) / CIS(0) when both use the same k."""
    d, gamma = _check(d, gamma)
    return math.sqrt(variance_inflation(d, gamma))


def cis_ratio_opt_k(d, gamma) -> float:
    """CIS ratio when each scheme uses its own optimal k: sqrt(PR)."""
    return math.sqrt(pr(d, gamma))


def ownn_ratio(d, gamma) -> float:
    """Limit of optimal OWNN risk over optimal interpolated-NN risk."""
    d, gamma = _check(d, gamma)
    ownn_vs_knn = 2.0 ** (4.0 / (d + 4.0)) * ((d + 2.0) / (d + 4.0)) ** ((2.0 * d + 4.0) / (d + 4.0))
    return ownn_vs_knn / pr(d, gamma)


@dataclass(frozen=True)
class MomentLimits:
    m1: float          # E (R1/R_{k+1})^-gamma
    m2: float          # E (R1/R_{k+1})^-2gamma
    m1r2_coeff: float  # coefficient of E (R1/R_{k+1})^-gamma R1^2


def moment_limits(d, gamma) -> MomentLimits:
    """Limits of the neighbour-distance-ratio moments for one random
    neighbour among the k nearest (finite for gamma < d/2)."""
    d, gamma = _check(d, gamma, limit=2)
    return MomentLimits(d / (d - gamma), d / (d - 2.0 * gamma), d / (d + 2.0 - gamma))


@dataclass(frozen=True)
class MomentEstimate:
    m1_hat: float
    m1_se: float
    m2_hat: float
    m2_se: float
    reps: int


def empirical_moment_check(d: int, gamma: float, k: int, n: int, seed: RngSeed,
                           reps: int = 200) -> MomentEstimate:
    """Monte-Carlo estimate of the ratio moments.

    Each repetition draws ``n`` uniform points in the unit d-ball, takes the
    ``k + 1`` nearest to the centre and averages ``(R_i / R_{k+1})^-gamma``
    and ``^-2gamma`` over the k inner neighbours (an unordered neighbour is a
    uniformly chosen one of the k).
    """
    _check(d, gamma)
    if not 1 <= k < n:
        raise ValueError("need 1 <= k < n")
    v1 = np.empty(reps)
    v2 = np.empty(reps)
    for r in range(reps):
        rng = seed.child("moments", r).generator()
        g = rng.standard_normal((n, d))
        u = rng.random(n)
        pts = g / np.linalg.norm(g, axis=1, keepdims=True) * u[:, None] ** (1.0 / d)
        dist = np.sort(np.partition(np.linalg.norm(pts, axis=1), k)[:k + 1])
        ratio = dist[:k] / dist[k]
        v1[r] = np.mean(ratio ** -gamma)
        v2[r] = np.mean(ratio ** (-2.0 * gamma))
    se = 1.0 / math.sqrt(reps)
    return MomentEstimate(
        math.fsum(v1) / reps, float(np.std(v1, ddof=1)) * se if reps > 1 else 0.0,
        math.fsum(v2) / reps, float(np.std(v2, ddof=1)) * se if reps > 1 else 0.0,
        reps)


THEORY_COLUMNS = ("d", "gamma", "pr", "k_ratio", "cis_ratio_same_k", "cis_ratio_opt_k", "ownn_ratio")


def theory_table(d: int, gammas) -> list[dict]:
    return [
        {"d": d, "gamma": float(g), "pr": pr(d, g), "k_ratio": k_ratio(d, g),
         "cis_ratio_same_k": cis_ratio_same_k(d, g), "cis_ratio_opt_k": cis_ratio_opt_k(d, g),
         "ownn_ratio": ownn_ratio(d, g)}
        for g in gammas
    ]
