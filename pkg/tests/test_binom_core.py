import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evalplan.binom_core import (
    DomainError,
    binom_cdf,
    binom_cdf_strict_between,
    binom_log_pmf,
    binom_pmf,
    binom_sf,
    lattice_floor,
    strict_window,
)

from oracles import mp_pmf, mp_tails, prefix_sum_cdf


def rel_err(got, want):
    want = float(want)
    if want == 0.0:
        return abs(got)
    return abs(got - want) / abs(want)


class TestLogPmf:
    def test_two_flips(self):
        assert binom_log_pmf(1, 2, 0.5) == pytest.approx(math.log(0.5), rel=1e-15)

    def test_degenerate_p_zero(self):
        assert binom_log_pmf(0, 10, 0.0) == 0.0
        assert binom_log_pmf(3, 10, 0.0) == -math.inf

    def test_degenerate_p_one(self):
        assert binom_log_pmf(10, 10, 1.0) == 0.0
        assert binom_log_pmf(9, 10, 1.0) == -math.inf

    def test_central_ten(self):
        assert math.exp(binom_log_pmf(5, 10, 0.5)) == pytest.approx(252 / 1024, rel=1e-14)

    @pytest.mark.parametrize("k", [-1, 11])
    def test_k_out_of_range(self, k):
        with pytest.raises(DomainError):
            binom_log_pmf(k, 10, 0.3)

    @pytest.mark.parametrize("p", [-0.1, 1.5, math.nan])
    def test_bad_p(self, p):
        with pytest.raises(DomainError):
            binom_pmf(1, 10, p)

    @pytest.mark.parametrize("n", [0, -3, 2.5])
    def test_bad_n(self, n):
        with pytest.raises(DomainError):
            binom_pmf(0, n, 0.3)

    @pytest.mark.parametrize(
        "k,n,p",
        [
            (0, 1_000_000, 1e-6),
            (3, 1_000_000, 1e-5),
            (500_000, 1_000_000, 0.5),
            (999_990, 1_000_000, 0.99999),
            (123_456, 1_000_000, 0.123),
            (7, 40, 0.2),
            (999_999, 1_000_000, 0.999),
        ],
    )
    def test_accuracy_against_mpmath(self, k, n, p):
        assert rel_err(binom_pmf(k, n, p), mp_pmf(k, n, p)) <= 1e-12

    @settings(max_examples=60, deadline=None)
    @given(
        n=st.integers(1, 10**6),
        p=st.floats(1e-6, 1 - 1e-6),
        u=st.floats(0, 1),
    )
    def test_accuracy_random(self, n, p, u):
        # pick k near the bulk so the pmf is not an underflowed zero
        sd = math.sqrt(n * p * (1 - p))
        k = int(min(n, max(0, round(n * p + (u - 0.5) * 6 * sd))))
        want = mp_pmf(k, n, p)
        if want < 1e-280:
            return
        assert rel_err(binom_pmf(k, n, p), want) <= 1e-12


class TestCdf:
    def test_total_probability(self):
        for n in (1, 7, 1000):
            assert binom_cdf(n, n, 0.37) == 1.0

    def test_ten_half(self):
        assert binom_cdf(5, 10, 0.5) == pytest.approx(638 / 1024, rel=1e-14)

    def test_zero_successes(self):
        assert binom_cdf(0, 100, 0.01) == pytest.approx(0.99**100, rel=1e-13)

    def test_degenerate(self):
        assert binom_cdf(0, 5, 0.0) == 1.0
        assert binom_cdf(4, 5, 1.0) == 0.0
        assert binom_sf(4, 5, 1.0) == 1.0

    def test_sf_complements_cdf(self):
        for k in range(0, 51):
            assert binom_cdf(k, 50, 0.3) + binom_sf(k, 50, 0.3) == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize(
        "k,n,p",
        [
            (0, 10**6, 1e-6),
            (15, 10**6, 1e-5),
            (499_000, 10**6, 0.5),
            (501_000, 10**6, 0.5),
            (799_500, 10**6, 0.8),
            (999_995, 10**6, 0.999995),
            (2, 10**4, 1e-3),
            (9000, 10**4, 0.9),
        ],
    )
    def test_accuracy_against_mpmath(self, k, n, p):
        lo, hi = mp_tails(k, n, p)
        assert rel_err(binom_cdf(k, n, p), lo) <= 1e-12
        assert rel_err(binom_sf(k, n, p), hi) <= 1e-12

    @settings(max_examples=40, deadline=None)
    @given(n=st.integers(1, 10**4), p=st.floats(1e-4, 1 - 1e-4), u=st.floats(0, 1))
    def test_matches_prefix_sum(self, n, p, u):
        k = min(n, int(u * (n + 1)))
        want = prefix_sum_cdf(k, n, p)
        if want < 1e-290:
            return
        assert rel_err(binom_cdf(k, n, p), want) <= 1e-12

    @settings(max_examples=50, deadline=None)
    @given(n=st.integers(1, 5000), p=st.floats(0, 1), data=st.data())
    def test_monotone_in_k(self, n, p, data):
        k = data.draw(st.integers(0, n - 1))
        assert binom_cdf(k, n, p) <= binom_cdf(k + 1, n, p)

    @settings(max_examples=80, deadline=None)
    @given(n=st.integers(2, 10**5), p=st.floats(1e-6, 1 - 1e-6), u=st.floats(0, 1))
    def test_reflection(self, n, p, u):
        k = min(n - 1, int(u * n))
        # snap p so that p and q are exact complements; otherwise rounding in
        # 1 - p shifts the rate by up to an ulp of 1, i.e. n * 1e-16 in the cdf
        q = 1 - p
        p = 1 - q
        assert binom_cdf(k, n, p) == pytest.approx(1 - binom_cdf(n - k - 1, n, q), abs=1e-12)


class TestNormalization:
    @pytest.mark.parametrize("n", [1, 2, 17, 250, 2000])
    @pytest.mark.parametrize("p", [1e-4, 0.01, 0.3, 0.5, 0.77, 0.999])
    def test_pmf_sums_to_one(self, n, p):
        total = math.fsum(math.exp(binom_log_pmf(k, n, p)) for k in range(n + 1))
        assert total == pytest.approx(1.0, abs=1e-10)


class TestLattice:
    def test_exact_integer(self):
        assert lattice_floor(5.0, 10) == (5, True)
        assert lattice_floor(4.999, 10) == (4, False)

    def test_rounding_noise_snaps(self):
        # (0.1 + 0.2) * 10 lands just above 3 in binary floating point
        x = (0.1 + 0.2) * 10
        assert x != 3.0
        assert lattice_floor(x, 10) == (3, True)
        assert lattice_floor(3.0 - 1e-9, 10) == (2, False)

    def test_strict_window_excludes_edges(self):
        assert strict_window(0.0, 1.0, 6) == (1, 5)
        assert strict_window(0.35, 0.65, 10) == (4, 6)
        assert strict_window(-0.1, 1.1, 9) == (0, 9)

    @settings(max_examples=200, deadline=None)
    @given(
        n=st.integers(1, 10**6),
        a=st.fractions(0, 1, max_denominator=1000),
        w=st.fractions(Fraction(1, 1000), 1, max_denominator=1000),
    )
    def test_strict_window_matches_rationals(self, n, a, w):
        lo, hi = a, a + w
        k_min = max((lo * n).__floor__() + 1, 0)
        k_max = min((hi * n).__ceil__() - 1, n)
        assert strict_window(float(lo), float(hi), n) == (k_min, k_max)


class TestStrictBetween:
    def test_ten_half(self):
        assert binom_cdf_strict_between(0.35, 0.65, 10, 0.5) == pytest.approx(0.65625, abs=1e-12)

    def test_full_window(self):
        assert binom_cdf_strict_between(-0.1, 1.1, 37, 0.2) == 1.0

    def test_edges_excluded(self):
        assert binom_cdf_strict_between(0.0, 1.0, 6, 0.5) == pytest.approx(0.96875, abs=1e-15)

    def test_empty_window(self):
        assert binom_cdf_strict_between(0.41, 0.49, 2, 0.5) == 0.0

    def test_bad_bounds(self):
        with pytest.raises(DomainError):
            binom_cdf_strict_between(0.5, 0.5, 10, 0.5)

    @settings(max_examples=100, deadline=None)
    @given(
        n=st.integers(1, 3000),
        p=st.floats(0, 1),
        lo=st.floats(-0.2, 1.0),
        d1=st.floats(1e-6, 0.6),
        d2=st.floats(0, 0.6),
    )
    def test_monotone_in_edges(self, n, p, lo, d1, d2):
        hi = lo + d1
        base = binom_cdf_strict_between(lo, hi, n, p)
        assert binom_cdf_strict_between(lo, hi + d2, n, p) >= base - 1e-15
        assert binom_cdf_strict_between(lo - d2, hi, n, p) >= base - 1e-15
        assert 0.0 <= base <= 1.0
