"""Exact binomial computations and the analytic bounds built on them.

All probability-mass arithmetic runs in log space. Log-factorials are
kept as compensated (hi, lo) pairs so that quantities assembled from
them (pmf exponents, the Stirling residual) are not limited by the
rounding of a single float64 at magnitude ln(n!).
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from ._dd import dd_add, dd_add_float, dd_recip_int, dd_sub, two_prod, two_sum

__all__ = [
    "NUMERIC",
    "NumericPolicy",
    "LOG_FACTORIAL_CAP",
    "LogFactorialBounds",
    "BiasDecomposition",
    "log_factorial",
    "robbins_bounds",
    "stirling_residual",
    "robbins_sandwich_slack",
    "binom_log_pmf",
    "binom_pmf_vector",
    "central_binom_ratio",
    "expected_plugin_error",
    "bias_exact",
    "bias_tail_identity",
    "bias_upper_bound",
    "plugin_variance_exact",
]


@dataclass(frozen=True)
class NumericPolicy:
    """Single audit point for the toolkit's numeric tolerances."""

    identity_tol: float = 1e-12      # exact-identity comparisons
    mc_aggregation_tol: float = 1e-9  # Monte Carlo / weight normalization


NUMERIC = NumericPolicy()

# log_factorial is backed by cached cumulative summation of ln i; the cap
# bounds cache growth, not correctness.
LOG_FACTORIAL_CAP = 10**6

# ln(sqrt(2*pi)) as a (hi, lo) pair; lo is the float64 remainder.
_LN_SQRT_2PI_HI = float.fromhex("0x1.d67f1c864beb5p-1")
_LN_SQRT_2PI_LO = float.fromhex("-0x1.65b5a1b7ff5dfp-55")
LN_SQRT_2PI = _LN_SQRT_2PI_HI


class _PairTable:
    """Append-only table of compensated (hi, lo) prefix values.

    Growth happens under a lock; reads of already-filled entries are
    lock-free (arrays are swapped in whole after filling).
    """

    def __init__(self, cap: int):
        self._lock = threading.Lock()
        self._cap = cap
        self._hi = np.zeros(2, dtype=np.float64)
        self._lo = np.zeros(2, dtype=np.float64)
        self._count = 2  # entries 0..count-1 are valid

    def _fill(self, hi: np.ndarray, lo: np.ndarray, start: int, stop: int) -> None:
        raise NotImplementedError

    def ensure(self, n: int) -> None:
        if n < self._count:
            return
        if n > self._cap:
            raise ValueError(f"n={n} exceeds table cap {self._cap}")
        with self._lock:
            if n < self._count:
                return
            new_size = max(n + 1, min(self._cap + 1, 2 * self._count))
            hi = np.empty(new_size, dtype=np.float64)
            lo = np.empty(new_size, dtype=np.float64)
            hi[: self._count] = self._hi[: self._count]
            lo[: self._count] = self._lo[: self._count]
            self._fill(hi, lo, self._count, new_size)
            self._hi, self._lo = hi, lo
            self._count = new_size

    def dd(self, n: int) -> tuple[float, float]:
        self.ensure(n)
        return float(self._hi[n]), float(self._lo[n])

    def arrays(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Read-only views valid for indices 0..n."""
        self.ensure(n)
        return self._hi, self._lo


class _LogFactorialTable(_PairTable):
    def __init__(self, cap: int):
        super().__init__(cap)
        # entries 0 and 1 are exactly 0.0

    def _fill(self, hi, lo, start, stop):
        h, l = float(hi[start - 1]), float(lo[start - 1])
        for i in range(start, stop):
            s, e = two_sum(h, math.log(i))
            h, l = two_sum(s, l + e)
            hi[i] = h
            lo[i] = l


def _stirling_step(n: int) -> float:
    """theta_n - theta_{n-1} = 1 - (n - 1/2) ln(n/(n-1)), by its series.

    Equals -sum_{i>=2} c_i / n^i with c_i = (i-1) / (2 i (i+1)); evaluated
    term by term to avoid the 16-digit cancellation of the closed form.
    """
    inv = 1.0 / n
    term = inv * inv
    i = 2
    total = 0.0
    while True:
        t = ((i - 1) / (2.0 * i * (i + 1))) * term
        total += t
        if t < 1e-24:
            return -total
        term *= inv
        i += 1


class _StirlingResidualTable(_PairTable):
    """theta_n = ln n! - ln sqrt(2 pi n) - n ln(n/e), accumulated exactly."""

    def __init__(self, cap: int):
        super().__init__(cap)
        h, l = two_sum(1.0, -_LN_SQRT_2PI_HI)
        self._hi[1], self._lo[1] = two_sum(h, l - _LN_SQRT_2PI_LO)
        self._hi[0] = math.nan  # theta_0 undefined

    def _fill(self, hi, lo, start, stop):
        h, l = float(hi[start - 1]), float(lo[start - 1])
        for i in range(max(start, 2), stop):
            s, e = two_sum(h, _stirling_step(i))
            h, l = two_sum(s, l + e)
            hi[i] = h
            lo[i] = l


_LF = _LogFactorialTable(LOG_FACTORIAL_CAP)
_THETA = _StirlingResidualTable(LOG_FACTORIAL_CAP)


@dataclass(frozen=True)
class LogFactorialBounds:
    """Robbins' two-sided refinement of Stirling's approximation.

    lower = ln sqrt(2 pi n) + n ln(n/e) + 1/(12n+1)
    upper = ln sqrt(2 pi n) + n ln(n/e) + 1/(12n)
    """

    n: int
    lower: float
    upper: float


@dataclass(frozen=True)
class BiasDecomposition:
    """Exact bias split for the plug-in error estimate at one (n, p)."""

    n: int
    p: float
    true_error: float
    expected_estimate: float
    bias: float


def _check_n(n: int, minimum: int = 1) -> int:
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
        raise TypeError(f"n must be an integer, got {n!r}")
    if n < minimum:
        raise ValueError(f"n must be >= {minimum}, got {n}")
    return int(n)


def _check_p(p: float) -> float:
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    return p


def log_factorial(n: int) -> float:
    """ln n! by cached compensated cumulative summation of ln i.

    Supports n up to LOG_FACTORIAL_CAP. The returned float carries the
    unavoidable final rounding at magnitude ln n!; internal consumers use
    the (hi, lo) pair directly.
    """
    n = _check_n(n, minimum=0)
    h, l = _LF.dd(n)
    return h + l


def robbins_bounds(n: int) -> LogFactorialBounds:
    """The Robbins sandwich around ln n!; rejects n = 0."""
    n = _check_n(n, minimum=1)
    # Shared main term keeps lower <= upper under monotone rounding.
    main = 0.5 * math.log(2.0 * math.pi * n) + n * (math.log(n) - 1.0)
    return LogFactorialBounds(
        n=n, lower=main + 1.0 / (12 * n + 1), upper=main + 1.0 / (12 * n)
    )


def stirling_residual(n: int) -> float:
    """theta_n = ln n! - ln sqrt(2 pi n) - n ln(n/e), to ~1e-16 absolute.

    Robbins' inequality is exactly 1/(12n+1) < theta_n < 1/(12n); this
    residual form carries the sandwich at full precision, where direct
    float64 evaluation of both sides would drown in rounding at large n.
    """
    n = _check_n(n, minimum=1)
    h, l = _THETA.dd(n)
    return h + l


def robbins_sandwich_slack(n: int) -> tuple[float, float]:
    """(theta_n - 1/(12n+1), 1/(12n) - theta_n); both strictly positive.

    Computed in compensated arithmetic; reliable while the true upper
    slack 1/(360 n^3) stays above ~1e-15, i.e. for n up to ~2e4.
    """
    n = _check_n(n, minimum=1)
    th, tl = _THETA.dd(n)
    lo_h, lo_l = dd_recip_int(12.0 * n + 1.0)
    up_h, up_l = dd_recip_int(12.0 * n)
    lh, ll = dd_sub(th, tl, lo_h, lo_l)
    uh, ul = dd_sub(up_h, up_l, th, tl)
    return lh + ll, uh + ul


def _log_pmf_dd(n: int, k: int, lnp: float, ln1p: float) -> tuple[float, float]:
    """Compensated exponent ln C(n,k) + k ln p + (n-k) ln(1-p)."""
    h, l = _LF.dd(n)
    h, l = dd_sub(h, l, *_LF.dd(k))
    h, l = dd_sub(h, l, *_LF.dd(n - k))
    if k:
        h, l = dd_add(h, l, *two_prod(float(k), lnp))
    if n - k:
        h, l = dd_add(h, l, *two_prod(float(n - k), ln1p))
    return h, l


def binom_log_pmf(n: int, k: int, p: float) -> float:
    """ln[C(n,k) p^k (1-p)^(n-k)], with -inf for impossible outcomes.

    Endpoints follow the convention 0 ln 0 = 0, so p = 0 and p = 1
    degenerate to point masses.
    """
    n = _check_n(n, minimum=1)
    p = _check_p(p)
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool):
        raise TypeError(f"k must be an integer, got {k!r}")
    if not 0 <= k <= n:
        raise ValueError(f"k must lie in [0, n]={n}, got {k}")
    k = int(k)
    if p == 0.0:
        return 0.0 if k == 0 else -math.inf
    if p == 1.0:
        return 0.0 if k == n else -math.inf
    h, l = _log_pmf_dd(n, k, math.log(p), math.log1p(-p))
    return h + l


def binom_pmf_vector(n: int, p: float) -> np.ndarray:
    """Full pmf over k = 0..n, assembled from compensated exponents.

    The exponentiated vector sums to 1 within ~1e-13 for n <= 1e4.
    """
    n = _check_n(n, minimum=1)
    p = _check_p(p)
    out = np.zeros(n + 1, dtype=np.float64)
    if p == 0.0:
        out[0] = 1.0
        return out
    if p == 1.0:
        out[n] = 1.0
        return out
    hi, lo = _LF.arrays(n)
    ks = np.arange(n + 1, dtype=np.float64)
    h, l = dd_sub(hi[n], lo[n], hi[: n + 1], lo[: n + 1])
    h, l = dd_sub(h, l, hi[n::-1], lo[n::-1])
    h, l = dd_add(h, l, *two_prod(ks, math.log(p)))
    h, l = dd_add(h, l, *two_prod(n - ks, math.log1p(-p)))
    np.exp(h + l, out=out)
    return out


def central_binom_ratio(n: int) -> float:
    """C(n, n/2) 2^{-n}: the exact-tie probability for n fair flips."""
    n = _check_n(n, minimum=2)
    if n % 2:
        raise ValueError(f"central_binom_ratio requires even n, got {n}")
    h, l = _LF.dd(n)
    h, l = dd_sub(h, l, *_LF.dd(n // 2))
    h, l = dd_sub(h, l, *_LF.dd(n // 2))
    h, l = dd_add(h, l, *two_prod(float(-n), math.log(2.0)))
    return math.exp(h + l)


def expected_plugin_error(n: int, p: float) -> float:
    """E[min(k, n-k)] / n for k ~ Binomial(n, p), by full enumeration."""
    n = _check_n(n, minimum=1)
    p = _check_p(p)
    if p == 0.0 or p == 1.0:
        return 0.0
    lnp, ln1p = math.log(p), math.log1p(-p)
    terms = []
    for k in range(1, n):  # min(k, n-k) = 0 at k in {0, n}
        h, l = _log_pmf_dd(n, k, lnp, ln1p)
        terms.append(min(k, n - k) * math.exp(h + l))
    return math.fsum(terms) / n


def bias_exact(n: int, p: float) -> BiasDecomposition:
    """min(p, 1-p) minus the exact expectation of the plug-in estimate."""
    n = _check_n(n, minimum=1)
    p = _check_p(p)
    truth = min(p, 1.0 - p)
    expected = expected_plugin_error(n, p)
    return BiasDecomposition(
        n=n, p=p, true_error=truth, expected_estimate=expected, bias=truth - expected
    )


def bias_tail_identity(n: int, p: float) -> float:
    """(1/n) sum_{k > n/2} (2k - n) C(n,k) p^k (1-p)^{n-k}.

    Derived for even n and p <= 1/2; other inputs are rejected rather
    than extrapolated. Must match bias_exact(n, p).bias to 1e-12.
    """
    n = _check_n(n, minimum=2)
    if n % 2:
        raise ValueError(f"bias_tail_identity requires even n, got {n}")
    p = _check_p(p)
    if p > 0.5:
        raise ValueError(f"bias_tail_identity requires p <= 1/2, got {p}")
    if p == 0.0:
        return 0.0
    lnp, ln1p = math.log(p), math.log1p(-p)
    terms = []
    for k in range(n // 2 + 1, n + 1):
        h, l = _log_pmf_dd(n, k, lnp, ln1p)
        terms.append((2 * k - n) * math.exp(h + l))
    return math.fsum(terms) / n


def bias_upper_bound(n: int) -> float:
    """sqrt(1/(2 pi n)), the closed-form bias bound for even n.

    The tighter intermediate bound central_binom_ratio(n) / 2 is attained
    with equality at p = 1/2. Odd n is rejected: the even-n derivation
    does not transfer (n = 1 has bias 1/2 > sqrt(1/(2 pi))).
    """
    n = _check_n(n, minimum=2)
    if n % 2:
        raise ValueError(f"bias_upper_bound requires even n, got {n}")
    return math.sqrt(1.0 / (2.0 * math.pi * n))


def plugin_variance_exact(n: int, p: float) -> float:
    """Var[min(k/n, 1 - k/n)] by enumeration; always <= 1/(4n)."""
    n = _check_n(n, minimum=1)
    p = _check_p(p)
    if p == 0.0 or p == 1.0:
        return 0.0
    pmf = binom_pmf_vector(n, p)
    values = np.minimum(np.arange(n + 1), np.arange(n, -1, -1)) / n
    mean = math.fsum(values * pmf)
    return math.fsum(((values - mean) ** 2) * pmf)
