"""Binomial core: exact values against independent oracles, then the
analytic inequalities on grids."""

import math
import threading
from fractions import Fraction
from itertools import product

import numpy as np
import pytest

from selfcons import binomial as B

GRID_HALF = [round(0.01 * i, 10) for i in range(51)]


def epe_rational(n: int, p: Fraction) -> Fraction:
    """Exact-rational oracle for E[min(k, n-k)]/n."""
    total = Fraction(0)
    for k in range(n + 1):
        pmf = math.comb(n, k) * p**k * (1 - p) ** (n - k)
        total += min(k, n - k) * pmf
    return total / n


class TestLogFactorial:
    def test_trivial_values(self):
        assert B.log_factorial(0) == 0.0
        assert B.log_factorial(1) == 0.0

    def test_integer_product_oracle(self):
        # 10! = 3628800 exactly; math.log of the exact integer is the oracle
        assert B.log_factorial(10) == pytest.approx(math.log(3628800), abs=1e-12)
        for n in (2, 5, 20, 170):
            assert B.log_factorial(n) == pytest.approx(
                math.log(math.factorial(n)), abs=1e-11
            )

    def test_rejects_negative_and_over_cap(self):
        with pytest.raises(ValueError):
            B.log_factorial(-1)
        with pytest.raises(ValueError):
            B.log_factorial(B.LOG_FACTORIAL_CAP + 1)

    def test_concurrent_cache_growth(self):
        # one-time initialization contract: concurrent first use is safe
        errors = []

        def worker(start):
            try:
                for n in range(start, start + 200):
                    B.log_factorial(n)
            except Exception as exc:  # pragma: no cover
                errors.append(exc)

        threads = [threading.Thread(target=worker, args=(s,)) for s in
                   (12000, 12100, 12200, 12300)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        assert B.log_factorial(12399) == pytest.approx(
            math.log(math.factorial(12399)), rel=1e-14
        )


class TestRobbinsBounds:
    def test_brackets_zero_at_n1(self):
        rb = B.robbins_bounds(1)
        assert rb.lower <= 0.0 <= rb.upper

    def test_n10_bracket_and_width(self):
        rb = B.robbins_bounds(10)
        lf = B.log_factorial(10)
        assert rb.lower <= lf <= rb.upper
        assert rb.upper - rb.lower < 1e-3

    def test_n170_bracket(self):
        rb = B.robbins_bounds(170)
        lf = B.log_factorial(170)
        assert rb.lower <= lf <= rb.upper

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            B.robbins_bounds(0)

    def test_lower_le_upper_everywhere(self):
        for n in list(range(1, 200)) + [1000, 10**4, 10**5]:
            rb = B.robbins_bounds(n)
            assert rb.lower <= rb.upper

    def test_float_level_strict_bracket_small_n(self):
        # direct float64 comparison is meaningful while the true margin
        # 1/(360 n^3) clears float rounding; beyond that use the residual
        for n in range(1, 501):
            rb = B.robbins_bounds(n)
            lf = B.log_factorial(n)
            assert rb.lower < lf < rb.upper, f"n={n}"


class TestStirlingResidual:
    def test_theta_1(self):
        assert B.stirling_residual(1) == pytest.approx(
            1.0 - math.log(math.sqrt(2 * math.pi)), abs=1e-15
        )

    def test_matches_direct_subtraction_small_n(self):
        for n in (2, 3, 10, 50):
            direct = (
                math.log(math.factorial(n))
                - math.log(math.sqrt(2 * math.pi * n))
                - n * (math.log(n) - 1.0)
            )
            assert B.stirling_residual(n) == pytest.approx(direct, abs=5e-12)

    def test_sandwich_slacks_strictly_positive(self):
        for n in range(1, 2001):
            low, up = B.robbins_sandwich_slack(n)
            assert low > 0.0, f"n={n}"
            assert up > 0.0, f"n={n}"

    def test_upper_slack_tracks_1_over_360n3(self):
        for n in (10, 100, 1000):
            _, up = B.robbins_sandwich_slack(n)
            assert up == pytest.approx(1.0 / (360.0 * n**3), rel=0.05)


class TestBinomLogPmf:
    def test_examples(self):
        assert B.binom_log_pmf(2, 1, 0.5) == pytest.approx(math.log(0.5), abs=1e-15)
        assert B.binom_log_pmf(7, 0, 0.0) == 0.0
        assert B.binom_log_pmf(7, 3, 0.0) == -math.inf
        assert B.binom_log_pmf(7, 7, 1.0) == 0.0

    def test_exhaustive_enumeration_oracle(self):
        # all 2^4 equally likely outcome strings at p = 1/2
        outcomes = list(product((0, 1), repeat=4))
        for k in range(5):
            count = sum(1 for o in outcomes if sum(o) == k)
            assert math.exp(B.binom_log_pmf(4, k, 0.5)) == pytest.approx(
                count / 16, rel=1e-13
            )

    def test_rational_oracle_random_cases(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            n = int(rng.integers(1, 40))
            k = int(rng.integers(0, n + 1))
            p = Fraction(int(rng.integers(1, 100)), 100)
            exact = math.comb(n, k) * p**k * (1 - p) ** (n - k)
            assert math.exp(B.binom_log_pmf(n, k, float(p))) == pytest.approx(
                float(exact), rel=1e-12
            )

    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError):
            B.binom_log_pmf(4, 5, 0.5)
        with pytest.raises(ValueError):
            B.binom_log_pmf(4, -1, 0.5)
        with pytest.raises(ValueError):
            B.binom_log_pmf(4, 2, 1.5)
        with pytest.raises(ValueError):
            B.binom_log_pmf(4, 2, -0.1)

    def test_normalization_grid(self):
        for n in (1, 2, 7, 64, 256, 1000, 10**4):
            for p in (0.0, 0.01, 0.3, 0.5, 0.77, 1.0):
                total = math.fsum(B.binom_pmf_vector(n, p).tolist())
                assert abs(total - 1.0) <= 1e-12, (n, p)

    def test_vector_matches_scalar(self):
        for n in (1, 5, 33, 256):
            for p in (0.01, 0.5, 0.9):
                vec = B.binom_pmf_vector(n, p)
                for k in (0, n // 3, n // 2, n):
                    assert vec[k] == pytest.approx(
                        math.exp(B.binom_log_pmf(n, k, p)), rel=1e-13
                    )


class TestCentralBinomRatio:
    def test_examples(self):
        assert B.central_binom_ratio(2) == pytest.approx(0.5, rel=1e-13)
        assert B.central_binom_ratio(4) == pytest.approx(0.375, rel=1e-13)
        assert B.central_binom_ratio(100) <= math.sqrt(2.0 / (100 * math.pi))

    def test_exact_comb_oracle(self):
        for n in range(2, 201, 2):
            exact = Fraction(math.comb(n, n // 2), 2**n)
            assert B.central_binom_ratio(n) == pytest.approx(float(exact), rel=1e-12)

    def test_upper_bound_sqrt_2_over_pi_n(self):
        for n in range(2, 2001, 2):
            assert B.central_binom_ratio(n) < math.sqrt(2.0 / (math.pi * n))

    def test_rejects_odd(self):
        with pytest.raises(ValueError):
            B.central_binom_ratio(3)


class TestExpectedPluginError:
    def test_examples(self):
        assert B.expected_plugin_error(2, 0.5) == pytest.approx(0.25, abs=1e-14)
        assert B.expected_plugin_error(2, 0.25) == pytest.approx(0.1875, abs=1e-14)
        for p in (0.0, 0.2, 0.5, 0.9, 1.0):
            assert B.expected_plugin_error(1, p) == 0.0

    def test_rational_oracle(self):
        for n in range(1, 13):
            for j in (0, 7, 25, 50, 77, 100):
                p = Fraction(j, 100)
                assert B.expected_plugin_error(n, float(p)) == pytest.approx(
                    float(epe_rational(n, p)), abs=1e-14
                )

    def test_symmetry(self):
        for n in (1, 2, 5, 32, 101):
            for p in GRID_HALF:
                assert abs(
                    B.expected_plugin_error(n, p)
                    - B.expected_plugin_error(n, 1.0 - p)
                ) <= 1e-12

    def test_range(self):
        for n in (1, 3, 16):
            for p in GRID_HALF:
                value = B.expected_plugin_error(n, p)
                assert 0.0 <= value <= 0.5


class TestBias:
    def test_examples(self):
        assert B.bias_exact(2, 0.5).bias == pytest.approx(0.25, abs=1e-14)
        assert B.bias_exact(2, 0.25).bias == pytest.approx(0.0625, abs=1e-14)
        for n in (1, 2, 9):
            assert B.bias_exact(n, 0.0).bias == 0.0

    def test_decomposition_fields(self):
        d = B.bias_exact(6, 0.3)
        assert d.true_error == pytest.approx(0.3)
        assert d.bias == pytest.approx(d.true_error - d.expected_estimate, abs=1e-16)
        assert 0.0 <= d.expected_estimate <= 0.5

    def test_tail_identity_examples(self):
        assert B.bias_tail_identity(2, 0.25) == pytest.approx(0.0625, abs=1e-14)
        assert B.bias_tail_identity(2, 0.5) == pytest.approx(0.25, abs=1e-14)
        assert B.bias_tail_identity(4, 0.0) == 0.0

    def test_tail_identity_rejections(self):
        with pytest.raises(ValueError):
            B.bias_tail_identity(3, 0.2)
        with pytest.raises(ValueError):
            B.bias_tail_identity(4, 0.7)

    def test_identity_grid(self):
        for n in (2, 4, 10, 64, 128, 256):
            for p in GRID_HALF:
                gap = abs(B.bias_tail_identity(n, p) - B.bias_exact(n, p).bias)
                assert gap <= 1e-12, (n, p)

    def test_nonnegative_even_n(self):
        for n in (2, 8, 50, 256):
            for p in GRID_HALF:
                assert B.bias_exact(n, p).bias >= -1e-12

    def test_monotone_chain(self):
        for n in (2, 16, 100, 256):
            half_central = 0.5 * B.central_binom_ratio(n)
            for p in (0.0, 0.1, 0.3, 0.49, 0.5):
                assert B.bias_exact(n, p).bias <= half_central + 1e-12
            assert B.bias_exact(n, 0.5).bias == pytest.approx(half_central, abs=1e-12)
            assert half_central < B.bias_upper_bound(n)


class TestBiasUpperBound:
    def test_closed_form(self):
        assert B.bias_upper_bound(2) == pytest.approx(
            math.sqrt(1.0 / (4.0 * math.pi)), abs=1e-15
        )
        assert B.bias_upper_bound(100) == pytest.approx(0.0398942, abs=1e-7)
        assert B.bias_upper_bound(2) == pytest.approx(0.2820948, abs=1e-7)

    def test_worst_case_attained_at_half(self):
        # intermediate bound central_ratio/2 is met with equality at p = 1/2
        assert B.bias_exact(2, 0.5).bias == pytest.approx(
            0.5 * B.central_binom_ratio(2), abs=1e-15
        )
        assert 0.5 * B.central_binom_ratio(2) == pytest.approx(0.25, rel=1e-13)

    def test_rejects_odd_n(self):
        # n = 1 would violate the closed form: bias 1/2 > sqrt(1/(2 pi))
        assert B.bias_exact(1, 0.5).bias == pytest.approx(0.5)
        assert 0.5 > math.sqrt(1.0 / (2.0 * math.pi))
        with pytest.raises(ValueError):
            B.bias_upper_bound(1)
        with pytest.raises(ValueError):
            B.bias_upper_bound(7)


class TestPluginVariance:
    def test_examples(self):
        assert B.plugin_variance_exact(1, 0.5) == 0.0
        assert B.plugin_variance_exact(2, 0.5) == pytest.approx(0.0625, abs=1e-14)
        assert B.plugin_variance_exact(2, 0.5) <= 1.0 / 8.0

    def test_rational_oracle(self):
        for n in range(1, 11):
            for j in (0, 10, 50, 85, 100):
                p = Fraction(j, 100)
                mean = epe_rational(n, p)
                second = Fraction(0)
                for k in range(n + 1):
                    pmf = math.comb(n, k) * p**k * (1 - p) ** (n - k)
                    second += Fraction(min(k, n - k), n) ** 2 * pmf
                exact_var = second - mean * mean
                assert B.plugin_variance_exact(n, float(p)) == pytest.approx(
                    float(exact_var), abs=1e-14
                )

    def test_quarter_n_bound_grid(self):
        for n in (1, 2, 7, 64, 256):
            for p in GRID_HALF:
                assert B.plugin_variance_exact(n, p) <= 1.0 / (4.0 * n)
