"""Split a call budget B into m prompts x n repeats against the MSE bound.

The bound on the estimator's expected squared error is

    1/(8m) + 1/(pi n) + 1/(2nm),

minimized over real m n = B at m* = sqrt(pi B / 8), n* = sqrt(8 B / pi)
(treating the third term as negligible). Integer plans come either from
rounding (m*, n*) or from an exhaustive scan of feasible pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BoundBreakdown",
    "BudgetPlan",
    "bound_value",
    "continuous_optimum",
    "integer_plan",
]


@dataclass(frozen=True)
class BoundBreakdown:
    """The three bound terms at integer (m, n) and their total."""

    m: int
    n: int
    term_prompt: float  # 1/(8m): prompt-subsample variance
    term_bias: float    # 1/(pi n): squared per-prompt bias
    term_cross: float   # 1/(2nm): per-prompt estimate variance
    total: float


@dataclass(frozen=True)
class BudgetPlan:
    budget: int
    m_star: float
    n_star: float
    m: int
    n: int
    calls_used: int
    bound: BoundBreakdown
    method: str  # "rounded" | "exhaustive"


def bound_value(m: int, n: int) -> BoundBreakdown:
    """Evaluate 1/(8m) + 1/(pi n) + 1/(2nm)."""
    if m < 1 or n < 1:
        raise ValueError(f"m and n must be >= 1, got m={m}, n={n}")
    term_prompt = 1.0 / (8.0 * m)
    term_bias = 1.0 / (math.pi * n)
    term_cross = 1.0 / (2.0 * n * m)
    return BoundBreakdown(
        m=int(m),
        n=int(n),
        term_prompt=term_prompt,
        term_bias=term_bias,
        term_cross=term_cross,
        total=term_prompt + term_bias + term_cross,
    )


def continuous_optimum(budget: float) -> tuple[float, float]:
    """(m*, n*) = (sqrt(pi B/8), sqrt(8 B/pi)); m* n* = B, m*/n* = pi/8."""
    if budget <= 0:
        raise ValueError(f"budget must be positive, got {budget}")
    return math.sqrt(math.pi * budget / 8.0), math.sqrt(8.0 * budget / math.pi)


def _even_floor(n: int) -> int:
    return n - (n % 2)


def _rounded_plan(budget: int, require_even_n: bool) -> tuple[int, int]:
    m_star, n_star = continuous_optimum(budget)
    m = max(1, round(m_star))
    if require_even_n:
        n = max(2, 2 * round(n_star / 2.0))
    else:
        n = max(1, round(n_star))
    # Budgets are hard caps: clamp n downward first, then m.
    step = 2 if require_even_n else 1
    floor_n = 2 if require_even_n else 1
    while m * n > budget and n > floor_n:
        n -= step
    while m * n > budget and m > 1:
        m -= 1
    return m, n


def _exhaustive_plan(budget: int, require_even_n: bool) -> tuple[int, int]:
    # For fixed m the bound decreases in n, so only n = floor(B/m)
    # (dropped to even on request) can win: an O(B) scan.
    ms = np.arange(1, budget + 1, dtype=np.int64)
    ns = budget // ms
    if require_even_n:
        ns -= ns % 2
        keep = ns >= 2
        ms, ns = ms[keep], ns[keep]
        if ms.size == 0:
            raise ValueError(
                f"budget {budget} cannot fund any plan with even n >= 2"
            )
    totals = 1.0 / (8.0 * ms) + 1.0 / (math.pi * ns) + 1.0 / (2.0 * ns * ms)
    # Ties: prefer more of the budget used, then smaller m.
    order = np.lexsort((ms, -(ms * ns), totals))
    best = order[0]
    return int(ms[best]), int(ns[best])


def integer_plan(
    budget: int, require_even_n: bool = True, method: str = "exhaustive"
) -> BudgetPlan:
    """Choose integer (m, n) with m n <= B.

    method="exhaustive" returns the global minimizer of the bound over
    feasible pairs (ties broken toward larger m n, then smaller m);
    method="rounded" rounds (m*, n*) and clamps n downward until the
    budget holds. Even n is required by default because the analytic
    bias bound is proven for even n only.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    if require_even_n and budget < 2:
        raise ValueError("budget must be >= 2 when even n is required")
    if method not in ("rounded", "exhaustive"):
        raise ValueError(f"unknown method {method!r}")
    m_star, n_star = continuous_optimum(budget)
    if method == "rounded":
        m, n = _rounded_plan(budget, require_even_n)
    else:
        m, n = _exhaustive_plan(budget, require_even_n)
    return BudgetPlan(
        budget=int(budget),
        m_star=m_star,
        n_star=n_star,
        m=m,
        n=n,
        calls_used=m * n,
        bound=bound_value(m, n),
        method=method,
    )
