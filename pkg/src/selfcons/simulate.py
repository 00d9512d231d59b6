"""Monte Carlo and exact-enumeration validation of the MSE bound.

Trials draw m prompts from a synthetic domain (with replacement,
according to q), n responses per prompt, and compare the plug-in
domain estimate against the domain's true self-consistency error.
Randomness is counter-based: replicate r of an experiment with seed s
uses a Philox generator keyed by (s, r), so parallel and serial
execution produce bit-identical reports.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import product
from typing import Optional, Sequence

import numpy as np

from .binomial import binom_pmf_vector, expected_plugin_error
from .estimator import (
    DomainEstimate,
    PromptDomain,
    PromptSpec,
    ResponseCounts,
    domain_true_error,
    true_error,
)
from .planner import BoundBreakdown, bound_value

__all__ = [
    "CorrelationModel",
    "ExperimentConfig",
    "ExperimentReport",
    "DecompositionTerms",
    "SweepRow",
    "sample_prompt",
    "sample_counts_iid",
    "sample_counts_correlated",
    "run_trial",
    "run_experiment",
    "run_experiment_with_replicates",
    "exact_mse_oracle",
    "mse_sweep",
    "replicate_rng",
    "derived_seed",
]

ENUMERATION_CELL_LIMIT = 10**7
DEVIATION_QUANTILES = (0.5, 0.9, 0.99)
BOUND_MARGIN_SIGMA = 3.0


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    """Counter-based substream for one replicate: Philox keyed (seed, r)."""
    key = np.array([seed, replicate], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def derived_seed(seed: int, stream: int) -> int:
    """A fresh 64-bit seed for a named substream (e.g. one sweep split)."""
    ss = np.random.SeedSequence((int(seed), int(stream)))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class CorrelationModel:
    """Exchangeable correlated calls with intraclass correlation rho.

    Realized as a beta-binomial: for a prompt with mean p and rho in
    (0, 1), draw theta ~ Beta(alpha, beta) with alpha = p(1-rho)/rho,
    beta = (1-p)(1-rho)/rho, then k ~ Binomial(n, theta). The pairwise
    call correlation 1/(alpha+beta+1) equals rho exactly and the
    marginal per-call success probability stays p. rho = 0 is iid;
    rho = 1 makes all n calls identical.
    """

    rho: float

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")

    def shape_for(self, p: float) -> tuple[float, float]:
        if not 0.0 < self.rho < 1.0:
            raise ValueError("beta-binomial shapes exist only for rho in (0, 1)")
        scale = (1.0 - self.rho) / self.rho
        return p * scale, (1.0 - p) * scale


@dataclass(frozen=True)
class ExperimentConfig:
    domain: PromptDomain
    m: int
    n: int
    replicates: int
    rho: float = 0.0
    seed: int = 0
    sampling: str = "with-replacement"

    def __post_init__(self):
        if self.m < 1 or self.n < 1:
            raise ValueError(f"m and n must be >= 1, got m={self.m}, n={self.n}")
        if self.replicates < 1:
            raise ValueError(f"replicates must be >= 1, got {self.replicates}")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.sampling != "with-replacement":
            raise ValueError(
                f"prompt sampling is with-replacement only, got {self.sampling!r}"
            )
        if self.rho > 0.0 and self.domain.kind != "binary":
            raise ValueError("correlated calls are defined for binary domains only")


@dataclass(frozen=True)
class DecompositionTerms:
    """Per-trial split of the estimation error.

    tilde_e is the idealized average of true per-prompt errors;
    a_i = E(x_i) - E[est(x_i)] (deterministic given x_i, nonnegative for
    even n) and b_i = E[est(x_i)] - est(x_i) (zero-mean given x_i).
    """

    tilde_e: float
    a: tuple[float, ...]
    b: tuple[float, ...]


@dataclass(frozen=True)
class ExperimentReport:
    true_error: float
    replicates: int
    empirical_mse: float
    mse_std_err: float
    std_err_degenerate: bool
    bias_of_estimate: float
    deviation_quantiles: dict
    bound: BoundBreakdown
    bound_satisfied: bool
    rho: float
    correlation_model: str  # "iid" or "beta-binomial"


@dataclass(frozen=True)
class SweepRow:
    m: int
    n: int
    calls_used: int
    label: str
    report: ExperimentReport


class _DomainTables:
    """Immutable per-domain lookup tables shared by all trial replicates."""

    def __init__(self, domain: PromptDomain, n: int, rho: float):
        self.domain = domain
        self.kind = domain.kind
        self.ids = [s.id for s in domain.prompts]
        self.q = np.array(domain.weights(), dtype=np.float64)
        self.truth = np.array([true_error(s) for s in domain.prompts])
        self.domain_truth = domain_true_error(domain)
        if self.kind == "binary":
            self.p = np.array([s.p for s in domain.prompts], dtype=np.float64)
            self.expected = np.array(
                [expected_plugin_error(n, s.p) for s in domain.prompts]
            )
            if 0.0 < rho < 1.0:
                degenerate = (self.p == 0.0) | (self.p == 1.0)
                safe_p = np.where(degenerate, 0.5, self.p)
                scale = (1.0 - rho) / rho
                self.alpha = safe_p * scale
                self.beta = (1.0 - safe_p) * scale
                self.degenerate = degenerate
        else:
            width = max(s.num_classes for s in domain.prompts)
            mat = np.zeros((len(self.ids), width))
            for i, s in enumerate(domain.prompts):
                mat[i, : s.num_classes] = s.p_vec
            self.p_mat = mat


def _multinomial_rows(
    rng: np.random.Generator, n: np.ndarray, p_mat: np.ndarray
) -> np.ndarray:
    """Multinomial draws row by row via sequential conditional binomials."""
    rows, width = p_mat.shape
    counts = np.zeros((rows, width), dtype=np.int64)
    remaining = np.asarray(n, dtype=np.int64).copy()
    mass_left = np.ones(rows)
    for c in range(width - 1):
        pc = p_mat[:, c]
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(mass_left > 0.0, pc / mass_left, 0.0)
        ratio = np.clip(ratio, 0.0, 1.0)
        k = rng.binomial(remaining, ratio)
        counts[:, c] = k
        remaining -= k
        mass_left -= pc
    counts[:, width - 1] = remaining
    return counts


def sample_prompt(domain: PromptDomain, rng: np.random.Generator) -> PromptSpec:
    """One prompt drawn with probability weight/normalization."""
    idx = rng.choice(len(domain.prompts), p=np.array(domain.weights()))
    return domain.prompts[int(idx)]


def sample_counts_iid(
    spec: PromptSpec, n: int, rng: np.random.Generator
) -> ResponseCounts:
    """n iid responses: Binomial(n, p) or Multinomial(n, p_vec) counts."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if spec.kind == "binary":
        return ResponseCounts(prompt_id=spec.id, n=n, k=int(rng.binomial(n, spec.p)))
    counts = _multinomial_rows(
        rng, np.array([n]), np.array([spec.p_vec], dtype=np.float64)
    )[0]
    return ResponseCounts(prompt_id=spec.id, n=n, counts=tuple(int(c) for c in counts))


def sample_counts_correlated(
    spec: PromptSpec, n: int, model: CorrelationModel, rng: np.random.Generator
) -> ResponseCounts:
    """n exchangeable correlated responses for a binary prompt."""
    if spec.kind != "binary":
        raise ValueError("correlated sampling is defined for binary prompts only")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if model.rho == 0.0:
        return sample_counts_iid(spec, n, rng)
    if model.rho == 1.0:
        k = n if rng.random() < spec.p else 0
        return ResponseCounts(prompt_id=spec.id, n=n, k=k)
    if spec.p == 0.0 or spec.p == 1.0:
        rng.beta(1.0, 1.0)  # keep stream consumption uniform across prompts
        theta = spec.p
    else:
        alpha, beta = model.shape_for(spec.p)
        theta = rng.beta(alpha, beta)
    return ResponseCounts(prompt_id=spec.id, n=n, k=int(rng.binomial(n, theta)))


def _trial_core(
    tables: _DomainTables, m: int, n: int, rho: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Sample one trial; returns (prompt indices, per-prompt estimates)."""
    idx = rng.choice(len(tables.ids), size=m, p=tables.q)
    if tables.kind == "binary":
        p_sel = tables.p[idx]
        if rho == 0.0:
            ks = rng.binomial(n, p_sel)
        elif rho == 1.0:
            ks = np.where(rng.random(size=m) < p_sel, n, 0)
        else:
            thetas = rng.beta(tables.alpha[idx], tables.beta[idx])
            thetas = np.where(tables.degenerate[idx], p_sel, thetas)
            ks = rng.binomial(n, thetas)
        estimates = np.minimum(ks, n - ks) / n
    else:
        counts = _multinomial_rows(rng, np.full(m, n), tables.p_mat[idx])
        estimates = (n - counts.max(axis=1)) / n
    return idx, estimates


def run_trial(
    config: ExperimentConfig, rng: np.random.Generator
) -> tuple[DomainEstimate, float, float, Optional[DecompositionTerms]]:
    """One draw of the full estimator protocol.

    Returns the domain estimate, the domain's true error, the squared
    error of this trial, and (for binary domains) the error
    decomposition. The decomposition's expected-estimate column uses the
    iid expectation regardless of rho.
    """
    tables = _DomainTables(config.domain, config.n, config.rho)
    idx, estimates = _trial_core(tables, config.m, config.n, config.rho, rng)
    per_prompt = tuple(
        (tables.ids[i], float(e)) for i, e in zip(idx, estimates)
    )
    value = math.fsum(e for _, e in per_prompt) / config.m
    estimate = DomainEstimate(m=config.m, per_prompt=per_prompt, value=value)
    truth = tables.domain_truth
    sq_error = (truth - value) ** 2
    decomposition = None
    if tables.kind == "binary":
        a = tables.truth[idx] - tables.expected[idx]
        b = tables.expected[idx] - estimates
        decomposition = DecompositionTerms(
            tilde_e=math.fsum(tables.truth[idx].tolist()) / config.m,
            a=tuple(float(v) for v in a),
            b=tuple(float(v) for v in b),
        )
    return estimate, truth, sq_error, decomposition


def _run_range(tables, config, start, stop, out):
    m, n, rho, seed = config.m, config.n, config.rho, config.seed
    binary = tables.kind == "binary"
    est_arr, sq_arr, tilde_arr, ab_arr, amax_arr = out
    truth = tables.domain_truth
    for r in range(start, stop):
        rng = replicate_rng(seed, r)
        idx, estimates = _trial_core(tables, m, n, rho, rng)
        value = math.fsum(estimates.tolist()) / m
        est_arr[r] = value
        sq_arr[r] = (truth - value) ** 2
        tilde_arr[r] = math.fsum(tables.truth[idx].tolist()) / m
        if binary:
            a = tables.truth[idx] - tables.expected[idx]
            b = tables.expected[idx] - estimates
            ab_arr[r] = math.fsum((a * b).tolist()) / m
            amax_arr[r] = a.max()


def run_experiment_with_replicates(
    config: ExperimentConfig, workers: int = 1
) -> tuple[ExperimentReport, dict]:
    """run_experiment plus the per-replicate arrays backing the report.

    The replicate dict carries 'estimate', 'sq_error', 'tilde_e' and, for
    binary domains, 'ab_mean' (mean of a_i b_i per trial) and 'a_max'.
    Results are bit-identical for any worker count: replicate r always
    uses the (seed, r) substream and aggregation runs in index order.
    """
    tables = _DomainTables(config.domain, config.n, config.rho)
    R = config.replicates
    binary = tables.kind == "binary"
    est = np.empty(R)
    sq = np.empty(R)
    tilde = np.empty(R)
    ab = np.empty(R) if binary else None
    amax = np.empty(R) if binary else None
    out = (est, sq, tilde, ab, amax)

    if workers <= 1 or R < 2:
        _run_range(tables, config, 0, R, out)
    else:
        chunk = -(-R // workers)
        ranges = [(s, min(s + chunk, R)) for s in range(0, R, chunk)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_run_range, tables, config, s, e, out)
                for s, e in ranges
            ]
            for f in futures:
                f.result()

    truth = tables.domain_truth
    empirical_mse = math.fsum(sq.tolist()) / R
    if R > 1:
        var = math.fsum(((sq - empirical_mse) ** 2).tolist()) / (R - 1)
        std_err = math.sqrt(var / R)
        degenerate = False
    else:
        std_err = 0.0
        degenerate = True
    deviations = np.abs(est - truth)
    quantiles = {
        q: float(v) for q, v in zip(DEVIATION_QUANTILES,
                                    np.quantile(deviations, DEVIATION_QUANTILES))
    }
    bound = bound_value(config.m, config.n)
    report = ExperimentReport(
        true_error=truth,
        replicates=R,
        empirical_mse=empirical_mse,
        mse_std_err=std_err,
        std_err_degenerate=degenerate,
        bias_of_estimate=math.fsum(est.tolist()) / R - truth,
        deviation_quantiles=quantiles,
        bound=bound,
        bound_satisfied=empirical_mse <= bound.total + BOUND_MARGIN_SIGMA * std_err,
        rho=config.rho,
        correlation_model="iid" if config.rho == 0.0 else "beta-binomial",
    )
    replicates = {"estimate": est, "sq_error": sq, "tilde_e": tilde}
    if binary:
        replicates["ab_mean"] = ab
        replicates["a_max"] = amax
    return report, replicates


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ExperimentReport:
    """R independent trials; empirical MSE with its standard error."""
    report, _ = run_experiment_with_replicates(config, workers=workers)
    return report


def exact_mse_oracle(domain: PromptDomain, m: int, n: int) -> float:
    """Exact E[(E - est)^2] by brute-force enumeration.

    Sums over every m-tuple of prompts (weighted by q) and every count
    outcome tensor (weighted by the exact pmf). Binary domains only;
    configurations beyond ENUMERATION_CELL_LIMIT cells are rejected.
    """
    if domain.kind != "binary":
        raise ValueError("exact_mse_oracle supports binary domains only")
    if m < 1 or n < 1:
        raise ValueError(f"m and n must be >= 1, got m={m}, n={n}")
    size = len(domain.prompts)
    cells = (size ** m) * ((n + 1) ** m)
    if cells > ENUMERATION_CELL_LIMIT:
        raise ValueError(
            f"enumeration would need {cells} cells "
            f"(limit {ENUMERATION_CELL_LIMIT})"
        )
    q = domain.weights()
    truth = domain_true_error(domain)
    pmf = [binom_pmf_vector(n, s.p) for s in domain.prompts]
    est_k = np.minimum(np.arange(n + 1), np.arange(n, -1, -1)) / n

    contributions = []
    for assignment in product(range(size), repeat=m):
        weight = math.prod(q[i] for i in assignment)
        joint = np.ones(1)
        est_sum = np.zeros(1)
        for i in assignment:
            joint = np.multiply.outer(joint, pmf[i]).ravel()
            est_sum = (est_sum[:, None] + est_k[None, :]).ravel()
        err = truth - est_sum / m
        contributions.append(weight * float(np.sum(joint * err * err)))
    return math.fsum(contributions)


def mse_sweep(
    budget: int,
    splits: Sequence[tuple[int, int]],
    domain: PromptDomain,
    replicates: int,
    rho: float = 0.0,
    seed: int = 0,
    labels: Optional[Sequence[str]] = None,
    workers: int = 1,
) -> list[SweepRow]:
    """One experiment per (m, n) split, in input order.

    Split j runs with a seed derived from (seed, j), so the whole table
    is reproducible from the top-level seed alone.
    """
    splits = [(int(m), int(n)) for m, n in splits]
    for m, n in splits:
        if m < 1 or n < 1:
            raise ValueError(f"split ({m}, {n}) is not positive")
        if m * n > budget:
            raise ValueError(f"split ({m}, {n}) exceeds budget {budget}")
    if labels is None:
        labels = ["" for _ in splits]
    rows = []
    for j, ((m, n), label) in enumerate(zip(splits, labels)):
        config = ExperimentConfig(
            domain=domain,
            m=m,
            n=n,
            replicates=replicates,
            rho=rho,
            seed=derived_seed(seed, j),
        )
        report = run_experiment(config, workers=workers)
        rows.append(
            SweepRow(m=m, n=n, calls_used=m * n, label=label, report=report)
        )
    return rows
