"""Exact binomial probabilities that stay accurate for very large trial counts.

The PMF uses Loader's saddle-point decomposition, which keeps full relative
precision where ``lgamma`` differences would cancel catastrophically. Tail
probabilities go through the regularized incomplete beta function,

    P(X <= k) = I_{1-p}(n - k, k + 1),

evaluated by a continued fraction written in terms of the offset of k from
the mean, which stays well conditioned when 1 - p is close to 1. Short
tails (a few thousand lattice points or fewer) are summed term by term
instead. The tail on the far side of the mean is computed directly and the
other is its complement, so a call never costs O(n).
"""

from __future__ import annotations

import math
import operator
import sys

__all__ = [
    "DomainError",
    "binom_cdf",
    "binom_cdf_strict_between",
    "binom_log_pmf",
    "binom_pmf",
    "binom_sf",
    "check_proportion",
    "check_sample_size",
    "lattice_floor",
    "strict_window",
]

_LN_2PI = math.log(2.0 * math.pi)
_EPS = sys.float_info.epsilon
_FPMIN = 1e-300
_CF_EPS = 1e-15
_SUM_EPS = 1e-17
# a tail is summed term by term when it spans at most _SUM_TERMS lattice
# points or the spread sqrt(npq) is at most _SUM_SD (terms then decay fast)
_SUM_TERMS = 2000
_SUM_SD = 200.0

# ulps of n tolerated when deciding that a real threshold sits on an integer
_LATTICE_ULPS = 8.0

# stirlerr(n) = lgamma(n+1) - (n+1/2) ln n + n - ln sqrt(2 pi), exact to double
_STIRLERR = (
    0.0,
    0.08106146679532726,
    0.0413406959554093,
    0.02767792568499834,
    0.020790672103765093,
    0.016644691189821193,
    0.013876128823070748,
    0.01189670994589177,
    0.010411265261972096,
    0.009255462182712733,
    0.00833056343336287,
    0.007573675487951841,
    0.00694284010720953,
    0.006408994188004207,
    0.0059513701127588475,
    0.005554733551962801,
)

_S0 = 1.0 / 12.0
_S1 = 1.0 / 360.0
_S2 = 1.0 / 1260.0
_S3 = 1.0 / 1680.0
_S4 = 1.0 / 1188.0


class DomainError(ValueError):
    """An argument lies outside the domain where the quantity is defined."""


def check_proportion(p, name: str = "p") -> float:
    """Return ``p`` as a float after checking it is a finite value in [0, 1]."""
    try:
        value = float(p)
    except (TypeError, ValueError):
        raise DomainError(f"{name} must be a real number, got {p!r}") from None
    if not 0.0 <= value <= 1.0:
        raise DomainError(f"{name} must lie in [0, 1], got {p!r}")
    return value


def check_sample_size(n, name: str = "n") -> int:
    """Return ``n`` as an int after checking it is a positive integer."""
    if isinstance(n, bool):
        raise DomainError(f"{name} must be a positive integer, got {n!r}")
    try:
        value = operator.index(n)
    except TypeError:
        if isinstance(n, float) and n.is_integer():
            value = int(n)
        else:
            raise DomainError(f"{name} must be a positive integer, got {n!r}") from None
    if value < 1:
        raise DomainError(f"{name} must be >= 1, got {n!r}")
    return value


def _check_count(k, n: int) -> int:
    try:
        value = operator.index(k)
    except TypeError:
        raise DomainError(f"k must be an integer, got {k!r}") from None
    if not 0 <= value <= n:
        raise DomainError(f"k must satisfy 0 <= k <= n={n}, got {k}")
    return value


def _stirlerr(n: int) -> float:
    if n <= 15:
        return _STIRLERR[n]
    nn = float(n) * n
    if n > 500:
        return (_S0 - _S1 / nn) / n
    if n > 80:
        return (_S0 - (_S1 - _S2 / nn) / nn) / n
    if n > 35:
        return (_S0 - (_S1 - (_S2 - _S3 / nn) / nn) / nn) / n
    return (_S0 - (_S1 - (_S2 - (_S3 - _S4 / nn) / nn) / nn) / nn) / n


def _bd0(x: float, np_: float) -> float:
    """Deviance term x ln(x/np) + np - x without cancellation near x = np."""
    if abs(x - np_) < 0.1 * (x + np_):
        v = (x - np_) / (x + np_)
        s = (x - np_) * v
        ej = 2.0 * x * v
        v *= v
        j = 1
        while True:
            ej *= v
            s1 = s + ej / (2 * j + 1)
            if s1 == s:
                return s1
            s = s1
            j += 1
    return x * math.log(x / np_) + np_ - x


def _log_pmf(k: int, n: int, p: float, q: float) -> float:
    # 0 < p < 1 and 0 <= k <= n are the caller's responsibility
    if k == 0:
        return n * math.log1p(-p)
    if k == n:
        return n * math.log(p)
    lc = (
        _stirlerr(n)
        - _stirlerr(k)
        - _stirlerr(n - k)
        - _bd0(float(k), n * p)
        - _bd0(float(n - k), n * q)
    )
    lf = _LN_2PI + math.log(float(k) * (n - k) / n)
    return lc - 0.5 * lf


def binom_log_pmf(k: int, n: int, p: float) -> float:
    """Natural log of P(X = k) for X ~ Binomial(n, p).

    Degenerate rates are closed forms: at ``p == 0`` all mass sits on
    ``k == 0`` and at ``p == 1`` on ``k == n``. Impossible outcomes return
    ``-inf``.

    Raises:
        DomainError: ``k`` outside ``[0, n]`` or invalid ``n``/``p``.
    """
    n = check_sample_size(n)
    k = _check_count(k, n)
    p = check_proportion(p)
    if p == 0.0:
        return 0.0 if k == 0 else -math.inf
    if p == 1.0:
        return 0.0 if k == n else -math.inf
    return _log_pmf(k, n, p, 1.0 - p)


def binom_pmf(k: int, n: int, p: float) -> float:
    """P(X = k) for X ~ Binomial(n, p)."""
    return math.exp(binom_log_pmf(k, n, p))


def _tail_sum_lower(k: int, n: int, p: float, q: float) -> float:
    """P(X <= k) summed downward from k; terms shrink geometrically below the mean."""
    term = math.exp(_log_pmf(k, n, p, q))
    total = term
    ratio = q / p
    j = k
    while j > 0 and term > total * _SUM_EPS:
        term *= j / (n - j + 1) * ratio
        total += term
        j -= 1
    return total


def _tail_sum_upper(k: int, n: int, p: float, q: float) -> float:
    """P(X > k) summed upward from k + 1."""
    term = math.exp(_log_pmf(k + 1, n, p, q))
    total = term
    ratio = p / q
    j = k + 1
    while j < n and term > total * _SUM_EPS:
        term *= (n - j) / (j + 1) * ratio
        total += term
        j += 1
    return total


def _bfrac(a: float, b: float, x: float, y: float, lam: float) -> float:
    """Continued fraction for I_x(a, b) / (x^a y^b / B(a, b)).

    Requires ``lam = (a + b) * y - b >= 0`` supplied exactly by the caller;
    that offset is where the naive fraction loses digits when x is near 1.
    """
    c = lam + 1.0
    c0 = b / a
    c1 = 1.0 / a + 1.0
    yp1 = y + 1.0
    m = 0.0
    pp = 1.0
    s = a + 1.0
    an = 0.0
    bn = 1.0
    anp1 = 1.0
    bnp1 = c / c1
    r = c1 / c
    max_iter = 200 + int(20.0 * math.sqrt(max(a, b)))
    for _ in range(max_iter):
        m += 1.0
        t = m / a
        w = m * (b - m) * x
        e = a / s
        alpha = pp * (pp + c0) * e * e * (w * x)
        e = (t + 1.0) / (c1 + t + t)
        beta = m + w / s + e * (c + m * yp1)
        pp = t + 1.0
        s += 2.0

        t = alpha * an + beta * anp1
        an = anp1
        anp1 = t
        t = alpha * bn + beta * bnp1
        bn = bnp1
        bnp1 = t

        r0 = r
        r = anp1 / bnp1
        if abs(r - r0) <= _CF_EPS * r:
            return r
        an /= bnp1
        bn /= bnp1
        anp1 = r
        bnp1 = 1.0
    raise ArithmeticError(
        f"incomplete beta continued fraction did not converge (a={a}, b={b}, x={x})"
    )


def _tails(k: int, n: int, p: float) -> tuple[float, float]:
    """(P(X <= k), P(X > k)) for arbitrary integer k and 0 <= p <= 1.

    The tail on the far side of the mean is evaluated directly and the
    other one is its complement.
    """
    if k < 0:
        return 0.0, 1.0
    if k >= n:
        return 1.0, 0.0
    if p == 0.0:
        return 1.0, 0.0
    if p == 1.0:
        return 0.0, 1.0
    q = 1.0 - p
    # offset of k+1 from the mean of n+1 trials; sign picks the small tail
    lam = (n + 1) * p - (k + 1)
    narrow = n * p * q <= _SUM_SD * _SUM_SD
    if lam >= 0.0:
        if narrow or k + 1 <= _SUM_TERMS:
            lower = _tail_sum_lower(k, n, p, q)
        else:
            # I_q(n-k, k+1); x^a y^b / B(a, b) = (n-k) p pmf(k)
            front = (n - k) * p * math.exp(_log_pmf(k, n, p, q))
            lower = front * _bfrac(n - k, k + 1, q, p, lam) if front > 0.0 else 0.0
        lower = min(lower, 1.0)
        return lower, 1.0 - lower
    if narrow or n - k <= _SUM_TERMS:
        upper = _tail_sum_upper(k, n, p, q)
    else:
        # I_p(k+1, n-k); x^a y^b / B(a, b) = (k+1) q pmf(k+1)
        front = (k + 1) * q * math.exp(_log_pmf(k + 1, n, p, q))
        upper = front * _bfrac(k + 1, n - k, p, q, -lam) if front > 0.0 else 0.0
    upper = min(upper, 1.0)
    return 1.0 - upper, upper


def binom_cdf(k: int, n: int, p: float) -> float:
    """P(X <= k) for X ~ Binomial(n, p).

    >>> binom_cdf(5, 10, 0.5)
    0.623046875
    """
    n = check_sample_size(n)
    k = _check_count(k, n)
    p = check_proportion(p)
    return _tails(k, n, p)[0]


def binom_sf(k: int, n: int, p: float) -> float:
    """P(X > k), computed directly rather than as ``1 - binom_cdf``."""
    n = check_sample_size(n)
    k = _check_count(k, n)
    p = check_proportion(p)
    return _tails(k, n, p)[1]


def lattice_floor(x: float, n: int) -> tuple[int, bool]:
    """Floor of ``x`` and whether ``x`` is an integer, up to rounding noise.

    ``x`` is expected to be a rate threshold multiplied by ``n``; values
    within a few ulps of ``n`` from an integer are treated as that integer,
    which absorbs the error of forming the threshold in floating point.
    """
    r = round(x)
    if abs(x - r) <= _LATTICE_ULPS * _EPS * max(float(n), abs(x), 1.0):
        return int(r), True
    return math.floor(x), False


def strict_window(lo: float, hi: float, n: int) -> tuple[int, int]:
    """Integer range ``[k_min, k_max]`` of k with lo*n < k < hi*n, clamped to [0, n].

    The range is empty when ``k_min > k_max``.
    """
    f_lo, _ = lattice_floor(lo * n, n)
    k_min = f_lo + 1
    f_hi, on_hi = lattice_floor(hi * n, n)
    k_max = f_hi - 1 if on_hi else f_hi
    return max(k_min, 0), min(k_max, n)


def _window_prob(k_min: int, k_max: int, n: int, p: float) -> float:
    if k_min > k_max:
        return 0.0
    lo_c, lo_s = _tails(k_min - 1, n, p)
    hi_c, hi_s = _tails(k_max, n, p)
    if hi_c <= 0.5:
        value = hi_c - lo_c
    elif lo_s <= 0.5:
        value = lo_s - hi_s
    else:
        value = 1.0 - (lo_c + hi_s)
    return min(max(value, 0.0), 1.0)


def binom_cdf_strict_between(lo: float, hi: float, n: int, p: float) -> float:
    """P(lo < X/n < hi) with both inequalities strict.

    Lattice points where ``k/n`` equals ``lo`` or ``hi`` are excluded.

    >>> binom_cdf_strict_between(0.35, 0.65, 10, 0.5)
    0.65625
    """
    n = check_sample_size(n)
    p = check_proportion(p)
    lo = float(lo)
    hi = float(hi)
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise DomainError(f"window bounds must be finite, got ({lo}, {hi})")
    if lo >= hi:
        raise DomainError(f"window requires lo < hi, got lo={lo}, hi={hi}")
    k_min, k_max = strict_window(lo, hi, n)
    return _window_prob(k_min, k_max, n, p)
