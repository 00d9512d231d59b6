"""Plug-in self-consistency estimators and ground-truth domain errors.

A prompt's self-consistency error is min(p, 1-p) for binary responses
(1 - max_c p_c for multi-class); the plug-in estimate substitutes the
empirical frequency k/n. All operations here are pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .binomial import NUMERIC

__all__ = [
    "PromptSpec",
    "PromptDomain",
    "ResponseCounts",
    "DomainEstimate",
    "true_error",
    "domain_true_error",
    "per_prompt_estimate",
    "domain_estimate",
]


@dataclass(frozen=True)
class PromptSpec:
    """Ground-truth response distribution and weight for one prompt.

    Binary prompts carry p = P(positive response); multi-class prompts
    carry a probability vector over C >= 2 classes. The weight is the
    unnormalized sampling mass q(x).
    """

    id: str
    kind: str = "binary"  # "binary" | "multiclass"
    p: Optional[float] = None
    p_vec: Optional[tuple[float, ...]] = None
    weight: float = 1.0

    def __post_init__(self):
        if self.kind not in ("binary", "multiclass"):
            raise ValueError(f"prompt {self.id!r}: unknown kind {self.kind!r}")
        if self.weight < 0:
            raise ValueError(f"prompt {self.id!r}: weight must be >= 0")
        if self.kind == "binary":
            if self.p is None or self.p_vec is not None:
                raise ValueError(f"prompt {self.id!r}: binary prompts take p only")
            if not 0.0 <= self.p <= 1.0:
                raise ValueError(f"prompt {self.id!r}: p={self.p} outside [0, 1]")
        else:
            if self.p_vec is None or self.p is not None:
                raise ValueError(
                    f"prompt {self.id!r}: multiclass prompts take p_vec only"
                )
            vec = tuple(float(v) for v in self.p_vec)
            if len(vec) < 2:
                raise ValueError(f"prompt {self.id!r}: p_vec needs >= 2 classes")
            if any(v < 0 for v in vec):
                raise ValueError(f"prompt {self.id!r}: p_vec has negative entries")
            if abs(math.fsum(vec) - 1.0) > NUMERIC.mc_aggregation_tol:
                raise ValueError(
                    f"prompt {self.id!r}: p_vec sums to {math.fsum(vec)}, not 1"
                )
            object.__setattr__(self, "p_vec", vec)

    @property
    def num_classes(self) -> int:
        return 2 if self.kind == "binary" else len(self.p_vec)


@dataclass(frozen=True)
class PromptDomain:
    """A finite prompt population with sampling weights."""

    prompts: tuple[PromptSpec, ...]
    normalization: float = field(init=False)

    def __post_init__(self):
        prompts = tuple(self.prompts)
        if not prompts:
            raise ValueError("domain must contain at least one prompt")
        ids = [s.id for s in prompts]
        if len(set(ids)) != len(ids):
            raise ValueError("prompt ids must be unique")
        kinds = {s.kind for s in prompts}
        if len(kinds) > 1:
            raise ValueError("domain mixes binary and multiclass prompts")
        total = math.fsum(s.weight for s in prompts)
        if total <= 0:
            raise ValueError("total domain weight must be positive")
        object.__setattr__(self, "prompts", prompts)
        object.__setattr__(self, "normalization", total)

    @property
    def kind(self) -> str:
        return self.prompts[0].kind

    def weights(self) -> list[float]:
        return [s.weight / self.normalization for s in self.prompts]


@dataclass(frozen=True)
class ResponseCounts:
    """Observed outcome counts for one prompt: k of n positive, or a
    per-class tally summing to n."""

    prompt_id: str
    n: int
    k: Optional[int] = None
    counts: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"counts for {self.prompt_id!r}: n must be >= 1")
        if (self.k is None) == (self.counts is None):
            raise ValueError(
                f"counts for {self.prompt_id!r}: give exactly one of k or counts"
            )
        if self.k is not None:
            if not 0 <= self.k <= self.n:
                raise ValueError(
                    f"counts for {self.prompt_id!r}: k={self.k} outside [0, {self.n}]"
                )
        else:
            tallies = tuple(int(c) for c in self.counts)
            if any(c < 0 for c in tallies):
                raise ValueError(f"counts for {self.prompt_id!r}: negative tally")
            if sum(tallies) != self.n:
                raise ValueError(
                    f"counts for {self.prompt_id!r}: tallies sum to "
                    f"{sum(tallies)}, expected n={self.n}"
                )
            object.__setattr__(self, "counts", tallies)

    @property
    def kind(self) -> str:
        return "binary" if self.k is not None else "multiclass"


@dataclass(frozen=True)
class DomainEstimate:
    """Average of per-prompt plug-in estimates over m sampled prompts."""

    m: int
    per_prompt: tuple[tuple[str, float], ...]
    value: float


def true_error(spec: PromptSpec) -> float:
    """min(p, 1-p) for binary prompts; 1 - max_c p_c for multi-class."""
    if spec.kind == "binary":
        return min(spec.p, 1.0 - spec.p)
    return 1.0 - max(spec.p_vec)


def domain_true_error(domain: PromptDomain) -> float:
    """Weighted average of per-prompt errors; uniform weights reduce to
    the plain mean exactly."""
    errors = [true_error(s) for s in domain.prompts]
    first = domain.prompts[0].weight
    if all(s.weight == first for s in domain.prompts):
        return math.fsum(errors) / len(errors)
    return math.fsum(
        e * s.weight for e, s in zip(errors, domain.prompts)
    ) / domain.normalization


def per_prompt_estimate(counts: ResponseCounts) -> float:
    """min(k/n, 1-k/n), or 1 - max_c counts_c/n for multi-class.

    The min/max runs on integers; a single final division keeps the
    value an exactly rounded rational.
    """
    if counts.kind == "binary":
        return min(counts.k, counts.n - counts.k) / counts.n
    return (counts.n - max(counts.counts)) / counts.n


def domain_estimate(samples: Sequence[ResponseCounts]) -> DomainEstimate:
    """Arithmetic mean of per-prompt estimates, in input order.

    Mixed binary/multiclass batches are rejected. Ragged n across
    prompts is allowed; the MSE bound then no longer applies (callers
    surface a warning).
    """
    samples = list(samples)
    if not samples:
        raise ValueError("domain_estimate requires at least one sample")
    kinds = {s.kind for s in samples}
    if len(kinds) > 1:
        raise ValueError("cannot mix binary and multiclass samples")
    per_prompt = tuple((s.prompt_id, per_prompt_estimate(s)) for s in samples)
    value = math.fsum(e for _, e in per_prompt) / len(samples)
    return DomainEstimate(m=len(samples), per_prompt=per_prompt, value=value)
