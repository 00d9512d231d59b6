"""Battery of exact checks for every analytic inequality in the MSE bound.

Each check returns its worst-case slack and the witnessing (n, p), so a
failure is a finding, not an exception. The Stirling sandwich runs in
residual form (see binomial.stirling_residual); direct evaluation of the
two ~1e5-magnitude sides would be rounding noise at the margins involved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import binomial
from .binomial import NUMERIC

__all__ = ["CheckResult", "run_battery", "DEFAULT_GRID_STEP"]

DEFAULT_GRID_STEP = 0.01


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    worst_slack: float
    witness: str
    description: str


def _half_grid(step: float) -> list[float]:
    count = int(round(0.5 / step))
    return [round(i * step, 12) for i in range(count + 1)]


def check_stirling_sandwich(max_n: int) -> CheckResult:
    """1/(12n+1) < theta_n < 1/(12n) for all n, both sides strictly."""
    worst = math.inf
    witness = ""
    for n in range(1, max_n + 1):
        lower_slack, upper_slack = binomial.robbins_sandwich_slack(n)
        slack = min(lower_slack, upper_slack)
        if slack < worst:
            worst, witness = slack, f"n={n}"
    return CheckResult(
        name="stirling-sandwich",
        passed=worst > 0.0,
        worst_slack=worst,
        witness=witness,
        description="Robbins bounds bracket ln n! strictly (residual form)",
    )


def check_central_binom_bound(max_n: int) -> CheckResult:
    """C(n, n/2) 2^-n < sqrt(2/(pi n)) strictly, for even n."""
    worst = math.inf
    witness = ""
    for n in range(2, max_n + 1, 2):
        slack = math.sqrt(2.0 / (math.pi * n)) - binomial.central_binom_ratio(n)
        if slack < worst:
            worst, witness = slack, f"n={n}"
    return CheckResult(
        name="central-binomial-bound",
        passed=worst > 0.0,
        worst_slack=worst,
        witness=witness,
        description="central binomial ratio under sqrt(2/(pi n))",
    )


def check_bias_identity(max_n: int = 256, grid_step: float = DEFAULT_GRID_STEP) -> CheckResult:
    """Tail-sum bias equals enumerated bias to 1e-12 (even n, p <= 1/2)."""
    tol = NUMERIC.identity_tol
    worst = -math.inf
    witness = ""
    for n in range(2, max_n + 1, 2):
        for p in _half_grid(grid_step):
            residual = abs(
                binomial.bias_tail_identity(n, p) - binomial.bias_exact(n, p).bias
            )
            if residual > worst:
                worst, witness = residual, f"n={n}, p={p}"
    return CheckResult(
        name="bias-identity",
        passed=worst <= tol,
        worst_slack=tol - worst,
        witness=witness,
        description=f"|tail-sum bias - enumerated bias| <= {tol}",
    )


def check_bias_nonnegative(max_n: int = 256, grid_step: float = DEFAULT_GRID_STEP) -> CheckResult:
    """bias >= 0 for even n, p <= 1/2 (to enumeration tolerance)."""
    tol = NUMERIC.identity_tol
    worst = math.inf
    witness = ""
    for n in range(2, max_n + 1, 2):
        for p in _half_grid(grid_step):
            bias = binomial.bias_exact(n, p).bias
            if bias < worst:
                worst, witness = bias, f"n={n}, p={p}"
    return CheckResult(
        name="bias-nonnegative",
        passed=worst >= -tol,
        worst_slack=worst + tol,
        witness=witness,
        description="plug-in estimate never overshoots the true error",
    )


def _tail_bias_grid(n: int, ps_pos: np.ndarray, lf: np.ndarray) -> np.ndarray:
    """bias at each grid p in (0, 1/2]: (1/n) sum_{k>n/2} (2k-n) pmf(k).

    One exp per p seeds the tail pmf; the rest follows the ratio
    recurrence pmf(k+1)/pmf(k) = ((n-k)/(k+1)) (p/(1-p)), which keeps the
    whole grid sweep in plain multiplies.
    """
    k0 = n // 2 + 1
    ks = np.arange(k0, n + 1, dtype=np.float64)
    log_t0 = (
        lf[n] - lf[k0] - lf[n - k0]
        + k0 * np.log(ps_pos) + (n - k0) * np.log1p(-ps_pos)
    )
    t = np.empty((ps_pos.size, ks.size))
    t[:, 0] = np.exp(log_t0)
    if ks.size > 1:
        ratios = ((n - ks[:-1]) / (ks[:-1] + 1.0))[None, :]
        ratios = ratios * (ps_pos / (1.0 - ps_pos))[:, None]
        t[:, 1:] = t[:, :1] * np.cumprod(ratios, axis=1)
    return t @ ((2.0 * ks - n) / n)


def _bias_half_enumerated(n: int) -> float:
    """bias_exact(n, 1/2).bias via the vectorized pmf (same exponents)."""
    pmf = binomial.binom_pmf_vector(n, 0.5)
    minvec = np.minimum(np.arange(n + 1), np.arange(n, -1, -1)).astype(np.float64)
    return 0.5 - float(minvec @ pmf) / n


def check_bias_chain(max_n: int, grid_step: float = DEFAULT_GRID_STEP) -> CheckResult:
    """max_p bias = bias(1/2) = central_ratio/2 <= sqrt(1/(2 pi n)).

    The grid max and the p = 1/2 equality are checked for every even n;
    the final inequality must be strict. Worst slack is the minimum over
    the three links (tolerance-normalized for the equalities).
    """
    tol = NUMERIC.identity_tol
    lf_hi, lf_lo = binomial._LF.arrays(max_n)
    lf = lf_hi[: max_n + 1] + lf_lo[: max_n + 1]
    ps_pos = np.array(_half_grid(grid_step)[1:])  # p = 0 has bias exactly 0
    worst = math.inf
    witness = ""
    for n in range(2, max_n + 1, 2):
        grid_bias = _tail_bias_grid(n, ps_pos, lf)
        max_gap = float(grid_bias.max() - grid_bias[-1])  # grid ends at 1/2
        at_half = _bias_half_enumerated(n)
        half_central = 0.5 * binomial.central_binom_ratio(n)
        eq_gap = abs(at_half - half_central)
        strict = binomial.bias_upper_bound(n) - half_central
        slack = min(tol - max_gap, tol - eq_gap, strict)
        if slack < worst:
            worst, witness = slack, f"n={n}"
    return CheckResult(
        name="bias-chain",
        passed=worst > 0.0,
        worst_slack=worst,
        witness=witness,
        description="worst-case bias sits at p=1/2 and equals half the "
        "central ratio, below sqrt(1/(2 pi n))",
    )


def check_variance_bound(max_n: int = 256, grid_step: float = DEFAULT_GRID_STEP) -> CheckResult:
    """Var[plug-in estimate] <= 1/(4n) on the full p grid; 0 at n=1."""
    worst = math.inf
    witness = ""
    count = int(round(1.0 / grid_step))
    ps = [round(i * grid_step, 12) for i in range(count + 1)]
    for n in range(1, max_n + 1):
        bound = 1.0 / (4.0 * n)
        for p in ps:
            slack = bound - binomial.plugin_variance_exact(n, p)
            if slack < worst:
                worst, witness = slack, f"n={n}, p={p}"
    degenerate_ok = all(
        binomial.plugin_variance_exact(1, p) == 0.0 for p in (0.0, 0.3, 0.5, 1.0)
    )
    return CheckResult(
        name="variance-bound",
        passed=worst >= 0.0 and degenerate_ok,
        worst_slack=worst,
        witness=witness,
        description="exact plug-in variance under 1/(4n); identically 0 at n=1",
    )


def check_symmetry(max_n: int = 128, grid_step: float = DEFAULT_GRID_STEP) -> CheckResult:
    """expected_plugin_error(n, p) == expected_plugin_error(n, 1-p)."""
    tol = NUMERIC.identity_tol
    worst = -math.inf
    witness = ""
    for n in range(1, max_n + 1):
        for p in _half_grid(grid_step):
            gap = abs(
                binomial.expected_plugin_error(n, p)
                - binomial.expected_plugin_error(n, 1.0 - p)
            )
            if gap > worst:
                worst, witness = gap, f"n={n}, p={p}"
    return CheckResult(
        name="label-flip-symmetry",
        passed=worst <= tol,
        worst_slack=tol - worst,
        witness=witness,
        description="expected plug-in error invariant under p -> 1-p",
    )


def check_pmf_normalization(max_n: int, grid_step: float = DEFAULT_GRID_STEP) -> CheckResult:
    """sum_k pmf(k) = 1 within 1e-12 across sizes up to max_n."""
    tol = NUMERIC.identity_tol
    ns = sorted({*range(1, 65), 128, 256, 512, 1024, 2048, 4096, 8192, max_n})
    ns = [n for n in ns if 1 <= n <= max_n]
    worst = -math.inf
    witness = ""
    ps = _half_grid(grid_step)
    for n in ns:
        for p in ps:
            gap = abs(math.fsum(binomial.binom_pmf_vector(n, p).tolist()) - 1.0)
            if gap > worst:
                worst, witness = gap, f"n={n}, p={p}"
    return CheckResult(
        name="pmf-normalization",
        passed=worst <= tol,
        worst_slack=tol - worst,
        witness=witness,
        description=f"exponentiated log-pmf sums to 1 within {tol}",
    )


def run_battery(max_n: int, grid_step: float = DEFAULT_GRID_STEP) -> list[CheckResult]:
    """All analytic checks at the requested scale, in proof order."""
    if max_n < 2:
        raise ValueError(f"max_n must be >= 2, got {max_n}")
    small_n = min(max_n, 256)
    return [
        check_stirling_sandwich(max_n),
        check_central_binom_bound(max_n),
        check_bias_identity(small_n, grid_step),
        check_bias_nonnegative(small_n, grid_step),
        check_bias_chain(max_n, grid_step),
        check_variance_bound(small_n, grid_step),
        check_symmetry(min(max_n, 128), grid_step),
        check_pmf_normalization(max_n, grid_step),
    ]
