"""Directional skew and severe-underestimation probabilities of p̂ = k/n.

The estimator k/n is unbiased, yet for small rates it falls below the truth
more often than above it (and the reverse for rates near 1). These
functions quantify that asymmetry with exact binomial tails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .binom_core import (
    DomainError,
    _log_pmf,
    _tails,
    check_proportion,
    check_sample_size,
    lattice_floor,
)

__all__ = [
    "BiasRow",
    "SkewReport",
    "bias_curves",
    "severe_underestimation",
    "underestimation_skew",
]


@dataclass(frozen=True)
class SkewReport:
    p_under: float
    p_over: float
    p_exact: float
    skew: float


@dataclass(frozen=True)
class BiasRow:
    p: float
    n: int
    skew: float
    p_under: float
    p_over: float
    p_exact: float
    severe: float


def _open_rate(p) -> float:
    p = check_proportion(p)
    if p in (0.0, 1.0):
        raise DomainError(f"p must lie strictly inside (0, 1), got {p}")
    return p


def underestimation_skew(p: float, n: int) -> SkewReport:
    """P(p̂ < p), P(p̂ > p), P(p̂ = p) and their difference ``under - over``.

    The point mass at ``p̂ = p`` is nonzero only when ``n*p`` is an integer.

    >>> underestimation_skew(0.5, 101).skew
    0.0
    """
    p = _open_rate(p)
    n = check_sample_size(n)
    floor_np, on_lattice = lattice_floor(n * p, n)
    if p == 0.5:
        # symmetric law: both sides carry exactly half the off-centre mass
        exact = math.exp(_log_pmf(floor_np, n, p, p)) if on_lattice else 0.0
        side = (1.0 - exact) / 2.0
        return SkewReport(side, side, exact, 0.0)
    if on_lattice:
        under = _tails(floor_np - 1, n, p)[0]
        over = _tails(floor_np, n, p)[1]
        exact = math.exp(_log_pmf(floor_np, n, p, 1.0 - p))
    else:
        under, over = _tails(floor_np, n, p)
        exact = 0.0
    return SkewReport(under, over, exact, under - over)


def severe_underestimation(p: float, n: int, fraction: float = 0.5) -> float:
    """P(p̂ < (1 - fraction) * p), strict inequality.

    With the default ``fraction=0.5`` this is the chance that the measured
    rate comes out less than half the true rate.
    """
    p = _open_rate(p)
    n = check_sample_size(n)
    fraction = float(fraction)
    if not 0.0 < fraction < 1.0:
        raise DomainError(f"fraction must lie in (0, 1), got {fraction}")
    floor_t, on_lattice = lattice_floor(n * p * (1.0 - fraction), n)
    k = floor_t - 1 if on_lattice else floor_t
    return _tails(k, n, p)[0]


def bias_curves(
    p_grid: Iterable[float], n_list: Iterable[int], fraction: float = 0.5
) -> list[BiasRow]:
    """Cross product of rates and sample sizes, one row per (p, n), p-major."""
    p_grid = list(p_grid)
    n_list = list(n_list)
    if not p_grid or not n_list:
        raise DomainError("p_grid and n_list must both be nonempty")
    rows = []
    for p in p_grid:
        for n in n_list:
            try:
                s = underestimation_skew(p, n)
                severe = severe_underestimation(p, n, fraction)
            except DomainError as exc:
                raise DomainError(f"p={p!r}, n={n!r}: {exc}") from exc
            rows.append(BiasRow(float(p), int(n), s.skew, s.p_under, s.p_over, s.p_exact, severe))
    return rows
