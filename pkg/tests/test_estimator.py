"""Plug-in estimator: frozen examples, invariants, and the cross-module
consistency oracle against binomial-core."""

import math

import numpy as np
import pytest

from selfcons.binomial import binom_pmf_vector, expected_plugin_error
from selfcons.estimator import (
    DomainEstimate,
    PromptDomain,
    PromptSpec,
    ResponseCounts,
    domain_estimate,
    domain_true_error,
    per_prompt_estimate,
    true_error,
)


def binary(pid, p, weight=1.0):
    return PromptSpec(id=pid, p=p, weight=weight)


class TestTrueError:
    def test_examples(self):
        assert true_error(binary("a", 0.5)) == 0.5
        assert true_error(binary("a", 0.9)) == pytest.approx(0.1)
        spec = PromptSpec(id="m", kind="multiclass", p_vec=(0.5, 0.3, 0.2))
        assert true_error(spec) == pytest.approx(0.5)

    def test_ranges(self):
        for p in np.linspace(0, 1, 21):
            assert 0.0 <= true_error(binary("a", float(p))) <= 0.5
        for vec in [(0.4, 0.3, 0.3), (1.0, 0.0), (0.25, 0.25, 0.25, 0.25)]:
            err = true_error(PromptSpec(id="m", kind="multiclass", p_vec=vec))
            assert 0.0 <= err <= 1.0 - 1.0 / len(vec) + 1e-12


class TestDomainTrueError:
    def test_examples(self):
        constant = PromptDomain(prompts=(binary("a", 0.5), binary("b", 0.5)))
        assert domain_true_error(constant) == 0.5
        pair = PromptDomain(prompts=(binary("a", 0.9), binary("b", 0.5)))
        assert domain_true_error(pair) == pytest.approx(0.3)
        weighted = PromptDomain(prompts=(binary("a", 0.9, 3.0), binary("b", 0.5, 1.0)))
        assert domain_true_error(weighted) == pytest.approx(0.2)

    def test_equal_weights_match_plain_mean_exactly(self):
        ps = [0.13, 0.5, 0.77, 0.9, 0.02]
        for w in (1.0, 0.25, 7.0):
            domain = PromptDomain(
                prompts=tuple(binary(f"x{i}", p, w) for i, p in enumerate(ps))
            )
            plain = PromptDomain(
                prompts=tuple(binary(f"x{i}", p) for i, p in enumerate(ps))
            )
            assert domain_true_error(domain) == domain_true_error(plain)


class TestPerPromptEstimate:
    def test_examples(self):
        assert per_prompt_estimate(ResponseCounts("a", n=10, k=3)) == pytest.approx(0.3)
        assert per_prompt_estimate(ResponseCounts("a", n=10, k=0)) == 0.0
        multi = ResponseCounts("a", n=10, counts=(5, 3, 2))
        assert per_prompt_estimate(multi) == pytest.approx(0.5)

    def test_label_flip_invariance(self):
        for n in (1, 2, 7, 40):
            for k in range(n + 1):
                left = per_prompt_estimate(ResponseCounts("a", n=n, k=k))
                right = per_prompt_estimate(ResponseCounts("a", n=n, k=n - k))
                assert left == right

    def test_range(self):
        for n in (1, 3, 9):
            for k in range(n + 1):
                assert 0.0 <= per_prompt_estimate(ResponseCounts("a", n=n, k=k)) <= 0.5

    def test_multiclass_reduces_to_binary(self):
        for n in (1, 4, 9):
            for k in range(n + 1):
                as_binary = per_prompt_estimate(ResponseCounts("a", n=n, k=k))
                as_multi = per_prompt_estimate(
                    ResponseCounts("a", n=n, counts=(n - k, k))
                )
                assert as_binary == as_multi

    def test_rejects_bad_counts(self):
        with pytest.raises(ValueError):
            ResponseCounts("a", n=0, k=0)
        with pytest.raises(ValueError):
            ResponseCounts("a", n=4, k=5)
        with pytest.raises(ValueError):
            ResponseCounts("a", n=4, counts=(1, 2))
        with pytest.raises(ValueError):
            ResponseCounts("a", n=4, k=2, counts=(2, 2))
        with pytest.raises(ValueError):
            ResponseCounts("a", n=4)


class TestDomainEstimate:
    def test_examples(self):
        est = domain_estimate(
            [ResponseCounts("a", n=4, k=0), ResponseCounts("b", n=4, k=2)]
        )
        assert est.value == pytest.approx(0.25)
        unanimous = domain_estimate([ResponseCounts(f"u{i}", n=6, k=0) for i in range(5)])
        assert unanimous.value == 0.0
        thirds = domain_estimate(
            [
                ResponseCounts("a", n=4, k=1),
                ResponseCounts("b", n=4, k=3),
                ResponseCounts("c", n=4, k=2),
            ]
        )
        assert thirds.value == pytest.approx(1.0 / 3.0)

    def test_preserves_input_order(self):
        est = domain_estimate(
            [ResponseCounts("z", n=2, k=1), ResponseCounts("a", n=2, k=0)]
        )
        assert [pid for pid, _ in est.per_prompt] == ["z", "a"]

    def test_value_is_mean_of_per_prompt(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            m = int(rng.integers(1, 9))
            samples = [
                ResponseCounts(f"p{i}", n=8, k=int(rng.integers(0, 9)))
                for i in range(m)
            ]
            est = domain_estimate(samples)
            assert est.m == m
            assert est.value == math.fsum(v for _, v in est.per_prompt) / m
            assert 0.0 <= est.value <= 0.5

    def test_mixed_n_allowed(self):
        est = domain_estimate(
            [ResponseCounts("a", n=2, k=1), ResponseCounts("b", n=10, k=5)]
        )
        assert est.value == pytest.approx(0.5)

    def test_rejections(self):
        with pytest.raises(ValueError):
            domain_estimate([])
        with pytest.raises(ValueError):
            domain_estimate(
                [ResponseCounts("a", n=4, k=1), ResponseCounts("b", n=4, counts=(1, 2, 1))]
            )


class TestCrossModuleConsistency:
    def test_mean_estimate_equals_expected_plugin_error(self):
        # E[per_prompt_estimate(k, n)] under Binomial(n, p) must agree with
        # binomial-core's enumeration, by enumeration over k.
        for n in (1, 2, 5, 16, 64):
            for p in (0.0, 0.07, 0.25, 0.5, 0.66, 1.0):
                pmf = binom_pmf_vector(n, p)
                mean = math.fsum(
                    per_prompt_estimate(ResponseCounts("a", n=n, k=k)) * pmf[k]
                    for k in range(n + 1)
                )
                assert abs(mean - expected_plugin_error(n, p)) <= 1e-12


class TestValidation:
    def test_prompt_spec(self):
        with pytest.raises(ValueError):
            PromptSpec(id="a", p=1.5)
        with pytest.raises(ValueError):
            PromptSpec(id="a", p=0.5, weight=-1.0)
        with pytest.raises(ValueError):
            PromptSpec(id="a", kind="multiclass", p_vec=(0.5, 0.6))
        with pytest.raises(ValueError):
            PromptSpec(id="a", kind="multiclass", p_vec=(1.0,))
        with pytest.raises(ValueError):
            PromptSpec(id="a", kind="multiclass", p_vec=(1.2, -0.2))
        with pytest.raises(ValueError):
            PromptSpec(id="a", p=0.5, p_vec=(0.5, 0.5))
        with pytest.raises(ValueError):
            PromptSpec(id="a", kind="other", p=0.5)

    def test_domain(self):
        with pytest.raises(ValueError):
            PromptDomain(prompts=())
        with pytest.raises(ValueError):
            PromptDomain(prompts=(binary("a", 0.5), binary("a", 0.2)))
        with pytest.raises(ValueError):
            PromptDomain(prompts=(binary("a", 0.5, 0.0),))
        with pytest.raises(ValueError):
            PromptDomain(
                prompts=(
                    binary("a", 0.5),
                    PromptSpec(id="b", kind="multiclass", p_vec=(0.5, 0.5)),
                )
            )
        domain = PromptDomain(prompts=(binary("a", 0.5, 2.0), binary("b", 0.1, 6.0)))
        assert domain.normalization == pytest.approx(8.0)
        assert domain.weights() == pytest.approx([0.25, 0.75])

    def test_empty_class_counts_permitted(self):
        counts = ResponseCounts("a", n=3, counts=(3, 0, 0))
        assert per_prompt_estimate(counts) == 0.0
