"""Coverage probability of an empirical rate and the sample size it requires.

``coverage`` is the probability that ``k/N`` lands strictly inside a
tolerance window around the true rate. ``required_sample_size`` finds the
smallest ``N`` whose coverage reaches a confidence level. Coverage is not
monotone in ``N`` (the window edges cross lattice points), so the search is
an exhaustive scan rather than a bisection.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

from .binom_core import (
    _EPS,
    _LATTICE_ULPS,
    DomainError,
    _log_pmf,
    _tails,
    _window_prob,
    check_proportion,
    check_sample_size,
    strict_window,
)

__all__ = [
    "DEFAULT_CONFIDENCE",
    "DEFAULT_N_MAX",
    "PlanCurveError",
    "PlanResult",
    "ToleranceSpec",
    "UnsatisfiableError",
    "check_confidence",
    "coverage",
    "plan_curve",
    "required_sample_size",
]

DEFAULT_CONFIDENCE = 0.95
DEFAULT_N_MAX = 10**8
GRID_RATIO = 1.05

# recurrence state is refreshed from exact values this often
_RESYNC_EVERY = 256
# estimates closer than this to the target are re-evaluated exactly
_DECISION_MARGIN = 1e-9


@dataclass(frozen=True)
class ToleranceSpec:
    """Half-width of the window around the true rate.

    ``relative`` windows are ``p ± alpha*p``; ``absolute`` windows are
    ``p ± sigma``.
    """

    mode: str
    value: float

    def __post_init__(self):
        if self.mode not in ("relative", "absolute"):
            raise DomainError(f"tolerance mode must be 'relative' or 'absolute', got {self.mode!r}")
        v = float(self.value)
        if not math.isfinite(v) or v <= 0.0:
            name = "alpha" if self.mode == "relative" else "sigma"
            raise DomainError(f"{name} must be a positive finite number, got {self.value!r}")
        if self.mode == "absolute" and v >= 1.0:
            raise DomainError(f"sigma must be < 1, got {self.value!r}")
        object.__setattr__(self, "value", v)

    @classmethod
    def relative(cls, alpha: float) -> "ToleranceSpec":
        return cls("relative", alpha)

    @classmethod
    def absolute(cls, sigma: float) -> "ToleranceSpec":
        return cls("absolute", sigma)

    def half_width(self, p: float) -> float:
        return self.value * p if self.mode == "relative" else self.value

    def window(self, p: float) -> tuple[float, float]:
        sigma = self.half_width(p)
        return p - sigma, p + sigma


@dataclass(frozen=True)
class PlanResult:
    n_required: int
    coverage_at_n: float
    scanned_up_to: int
    stable: bool


class UnsatisfiableError(DomainError):
    """No sample size up to ``n_max`` reaches the requested confidence."""

    def __init__(self, message: str, best_n: int, best_coverage: float, n_max: int):
        super().__init__(message)
        self.best_n = best_n
        self.best_coverage = best_coverage
        self.n_max = n_max


class PlanCurveError(DomainError):
    """A grid point of :func:`plan_curve` failed; ``p`` names the point."""

    def __init__(self, p: float, cause: DomainError):
        super().__init__(f"p={p!r}: {cause}")
        self.p = p
        self.cause = cause


def check_confidence(c) -> float:
    value = float(c)
    if not 0.0 < value < 1.0:
        raise DomainError(f"confidence c must lie in (0, 1), got {c!r}")
    return value


def _check_rate(p, tol: ToleranceSpec) -> float:
    p = check_proportion(p)
    if p in (0.0, 1.0):
        if tol.mode == "relative":
            raise DomainError(
                "degenerate relative tolerance: the window p*(1 +/- alpha) has no "
                "room on one side; p must lie strictly inside (0, 1)"
            )
        raise DomainError(f"p must lie strictly inside (0, 1), got {p}")
    return p


def coverage(p: float, n: int, tol: ToleranceSpec) -> float:
    """P(p - sigma < k/n < p + sigma) for k ~ Binomial(n, p).

    >>> coverage(0.5, 10, ToleranceSpec.absolute(0.15))
    0.6562499999999996
    """
    p = _check_rate(p, tol)
    n = check_sample_size(n)
    lo, hi = tol.window(p)
    k_min, k_max = strict_window(lo, hi, n)
    return _window_prob(k_min, k_max, n, p)


def _exact_state(j: int, n: int, p: float, q: float) -> tuple[float, float]:
    """(P(X <= j), P(X = j)) for X ~ Binomial(n, p), any integer j."""
    if j < 0:
        return 0.0, 0.0
    if j >= n:
        return 1.0, math.exp(n * math.log(p))
    return _tails(j, n, p)[0], math.exp(_log_pmf(j, n, p, q))


class _Scan:
    """Coverage for consecutive N in O(1) per step.

    Tracks the CDF and PMF at the two window edges (``j_lo = k_min - 1`` and
    ``j_hi = k_max``) and advances them with the binomial recurrences

        P_{N+1}(X <= j) = P_N(X <= j) - p * P_N(X = j)
        P_{N+1}(X = j)  = P_N(X = j) * (N + 1) / (N + 1 - j) * q

    Values within ``_DECISION_MARGIN`` of the target are recomputed exactly,
    so every comparison against the target agrees with :func:`coverage`.
    """

    def __init__(self, p: float, lo: float, hi: float, c: float):
        self.p = p
        self.q = 1.0 - p
        self.lo = lo
        self.hi = hi
        self.c = c
        self.best_n = 0
        self.best_cov = -1.0

    def _edges(self, n: int) -> tuple[int, int, int, int]:
        k_min, k_max = strict_window(self.lo, self.hi, n)
        return k_min, k_max, k_min - 1, k_max

    def exact(self, n: int) -> float:
        k_min, k_max = strict_window(self.lo, self.hi, n)
        return _window_prob(k_min, k_max, n, self.p)

    def run(self, start: int, stop: int, run_length: int = 1):
        """First N in [start, stop] opening ``run_length`` consecutive hits.

        Returns ``(n, coverage_at_n)`` or ``None``.
        """
        p, q, c = self.p, self.q, self.c
        lo, hi = self.lo, self.hi
        floor = math.floor
        # per-edge tolerance identical to binom_core.lattice_floor
        lo_ulps = _LATTICE_ULPS * _EPS * max(1.0, abs(lo))
        hi_ulps = _LATTICE_ULPS * _EPS * max(1.0, abs(hi))
        ratio = p / q
        lo_margin = c - _DECISION_MARGIN
        hi_margin = c + _DECISION_MARGIN
        n = start
        k_min, k_max, j1, j2 = self._edges(n)
        f1_cdf, f1_pmf = _exact_state(j1, n, p, q)
        f2_cdf, f2_pmf = _exact_state(j2, n, p, q)
        since_sync = 0
        run_start = 0
        run_cov = 0.0
        streak = 0
        while True:
            if k_min > k_max:
                cov = 0.0
            else:
                cov = f2_cdf - f1_cdf
                if lo_margin <= cov <= hi_margin:
                    cov = _window_prob(k_min, k_max, n, p)
            if cov > self.best_cov:
                self.best_cov = cov
                self.best_n = n
            if cov >= c:
                if streak == 0:
                    run_start, run_cov = n, cov
                streak += 1
                if streak >= run_length:
                    return run_start, run_cov
            else:
                streak = 0
            if n >= stop:
                return None

            # advance N -> N + 1
            n1 = n + 1
            if 0 <= j1 <= n:
                f1_cdf -= p * f1_pmf
                f1_pmf *= n1 / (n1 - j1) * q
            if 0 <= j2 <= n:
                f2_cdf -= p * f2_pmf
                f2_pmf *= n1 / (n1 - j2) * q
            n = n1
            # inline strict_window(lo, hi, n)
            guard = lo_ulps * n
            x = lo * n
            fl = floor(x)
            k_min = fl + 2 if fl + 1 - x <= guard else fl + 1
            guard = hi_ulps * n
            x = hi * n
            fl = floor(x)
            k_max = fl - 1 if x - fl <= guard else fl
            if k_min < 0:
                k_min = 0
            if k_max > n:
                k_max = n
            t1 = k_min - 1
            t2 = k_max
            since_sync += 1
            if since_sync >= _RESYNC_EVERY:
                since_sync = 0
                j1, j2 = t1, t2
                f1_cdf, f1_pmf = _exact_state(j1, n, p, q)
                f2_cdf, f2_pmf = _exact_state(j2, n, p, q)
                continue
            while j1 < t1:
                if j1 < 0:
                    f1_pmf = math.exp(n * math.log1p(-p))
                    f1_cdf = f1_pmf
                else:
                    f1_pmf *= (n - j1) / (j1 + 1) * ratio
                    f1_cdf += f1_pmf
                j1 += 1
            while j2 < t2:
                if j2 < 0:
                    f2_pmf = math.exp(n * math.log1p(-p))
                    f2_cdf = f2_pmf
                else:
                    f2_pmf *= (n - j2) / (j2 + 1) * ratio
                    f2_cdf += f2_pmf
                j2 += 1


def _geometric_grid(n_max: int) -> list[int]:
    grid = [1]
    while grid[-1] < n_max:
        grid.append(min(n_max, max(grid[-1] + 1, math.ceil(grid[-1] * GRID_RATIO))))
    return grid


def required_sample_size(
    p: float,
    tol: ToleranceSpec,
    c: float = DEFAULT_CONFIDENCE,
    n_max: int = DEFAULT_N_MAX,
    stable_window: int = 0,
) -> PlanResult:
    """Smallest N with ``coverage(p, N, tol) >= c``.

    A geometric grid (ratio 1.05) brackets the first crossing; the answer is
    then the first hit of an exhaustive scan from N = 1 up to that bracket,
    which is exact despite the oscillation of coverage in N. With
    ``stable_window = W > 0`` the coverage must also hold for N+1, ..., N+W
    and the result is flagged ``stable``.

    Raises:
        UnsatisfiableError: nothing up to ``n_max`` qualifies; carries the
            best ``(N, coverage)`` seen.
    """
    p = _check_rate(p, tol)
    c = check_confidence(c)
    n_max = check_sample_size(n_max, "n_max")
    if stable_window < 0:
        raise DomainError(f"stable_window must be >= 0, got {stable_window}")
    lo, hi = tol.window(p)
    scan = _Scan(p, lo, hi, c)

    grid = _geometric_grid(n_max)
    scanned = 0
    first_hit = None
    prev = 1
    for g in grid:
        cov = scan.exact(g)
        scanned = g
        if cov > scan.best_cov:
            scan.best_cov, scan.best_n = cov, g
        if cov >= c:
            first_hit = g
            break
        prev = g
    if first_hit is None:
        found = scan.run(prev, n_max)
        scanned = n_max
        if found is None:
            raise UnsatisfiableError(
                f"no N <= {n_max} reaches coverage {c} (best N={scan.best_n}, "
                f"coverage={scan.best_cov:.6g})",
                scan.best_n,
                scan.best_cov,
                n_max,
            )
        first_hit = found[0]

    if stable_window == 0:
        n_req, cov = scan.run(1, first_hit)
        return PlanResult(n_req, cov, max(scanned, n_req), False)

    found = scan.run(1, n_max, run_length=stable_window + 1)
    if found is None:
        raise UnsatisfiableError(
            f"no N <= {n_max} keeps coverage >= {c} for {stable_window + 1} consecutive "
            f"sample sizes (best N={scan.best_n}, coverage={scan.best_cov:.6g})",
            scan.best_n,
            scan.best_cov,
            n_max,
        )
    n_req, cov = found
    return PlanResult(n_req, cov, max(scanned, n_req + stable_window), True)


def _plan_point(args):
    p, tol, c, n_max, stable_window = args
    try:
        return p, required_sample_size(p, tol, c, n_max, stable_window)
    except DomainError as exc:
        return p, exc


def plan_curve(
    p_grid: Sequence[float],
    tol: ToleranceSpec,
    c: float = DEFAULT_CONFIDENCE,
    n_max: int = DEFAULT_N_MAX,
    stable_window: int = 0,
    workers: int | None = None,
) -> list[tuple[float, PlanResult]]:
    """Evaluate :func:`required_sample_size` at each rate, preserving order.

    Points are independent; with ``workers > 1`` they are spread over
    processes and the output order is still the input order.
    """
    p_grid = list(p_grid)
    if not p_grid:
        raise DomainError("p_grid must not be empty")
    jobs = [(p, tol, c, n_max, stable_window) for p in p_grid]
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            outcomes = list(pool.map(_plan_point, jobs))
    else:
        outcomes = [_plan_point(job) for job in jobs]
    rows = []
    for p, outcome in outcomes:
        if isinstance(outcome, DomainError):
            raise PlanCurveError(p, outcome) from outcome
        rows.append((p, outcome))
    return rows
