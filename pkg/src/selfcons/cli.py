"""Command-line interface: plan, simulate, verify, estimate, sweep.

Exit codes: 0 success, 1 usage or config error, 2 a finding (bound or
inequality violated), 3 source failure. Every command is deterministic
given its flags and seed; primary JSON outputs carry no timestamps, the
accompanying manifest (separate file, or stderr for stdout-only runs)
does.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .estimator import PromptDomain, PromptSpec, domain_estimate
from .planner import bound_value, integer_plan
from .simulate import (
    ExperimentConfig,
    mse_sweep,
    run_experiment_with_replicates,
)
from .sources import (
    ExternalSource,
    ReplayError,
    SourceFailure,
    SourceProtocolError,
    counts_from_record,
    open_replay,
)
from .verify import DEFAULT_GRID_STEP, run_battery

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FINDING = 2
EXIT_SOURCE = 3

SEED_ENV = "SELFCONS_SEED"

# Substream tags (second Philox/SeedSequence word); replicate indices
# occupy 0..R-1, so named streams live at the top of the 64-bit range.
STREAM_DOMAIN = 2**64 - 1
STREAM_SUBSAMPLE = 2**64 - 2


class UsageError(Exception):
    """Bad flags or config; maps to exit code 1."""


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def pretty_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def config_digest(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def make_manifest(command: str, digest: str, seed: int) -> dict:
    return {
        "command": command,
        "config_digest": digest,
        "seed": int(seed),
        "tool_version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def _emit_manifest(manifest: dict, out_dir: Path | None) -> None:
    if out_dir is not None:
        (out_dir / "manifest.json").write_text(pretty_json(manifest))
    else:
        print("manifest: " + canonical_json(manifest), file=sys.stderr)


def resolve_seed(flag_seed, config_seed=None) -> int:
    """--seed flag, then config seed, then $SELFCONS_SEED, then fresh."""
    for value in (flag_seed, config_seed):
        if value is not None:
            return int(value)
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from exc
    return int(np.random.SeedSequence().generate_state(1, np.uint64)[0])


# ----------------------------------------------------------------------
# config parsing (named-field errors; the shipped JSON schema mirrors this)
# ----------------------------------------------------------------------


def _field_int(cfg: dict, name: str, required: bool, minimum: int = 1, default=None):
    if name not in cfg:
        if required:
            raise UsageError(f"config.{name}: required field missing")
        return default
    value = cfg[name]
    if isinstance(value, bool) or not isinstance(value, int):
        raise UsageError(f"config.{name}: expected an integer, got {value!r}")
    if value < minimum:
        raise UsageError(f"config.{name}: must be >= {minimum}, got {value}")
    return value


def _prompts_from_config(items) -> tuple[PromptSpec, ...]:
    if not isinstance(items, list) or not items:
        raise UsageError("config.domain.prompts: expected a nonempty list")
    specs = []
    for i, entry in enumerate(items):
        where = f"config.domain.prompts[{i}]"
        if not isinstance(entry, dict):
            raise UsageError(f"{where}: expected an object")
        if "id" not in entry or not isinstance(entry["id"], str):
            raise UsageError(f"{where}.id: required string missing")
        has_p = "p" in entry
        has_vec = "p_vec" in entry
        if has_p == has_vec:
            raise UsageError(f"{where}: give exactly one of p or p_vec")
        weight = entry.get("weight", 1.0)
        if isinstance(weight, bool) or not isinstance(weight, (int, float)):
            raise UsageError(f"{where}.weight: expected a number")
        try:
            if has_p:
                specs.append(
                    PromptSpec(id=entry["id"], p=float(entry["p"]), weight=float(weight))
                )
            else:
                specs.append(
                    PromptSpec(
                        id=entry["id"],
                        kind="multiclass",
                        p_vec=tuple(float(v) for v in entry["p_vec"]),
                        weight=float(weight),
                    )
                )
        except (TypeError, ValueError) as exc:
            raise UsageError(f"{where}: {exc}") from exc
    return tuple(specs)


def _generated_domain(gen: dict, seed: int) -> tuple[PromptSpec, ...]:
    kind = gen.get("kind")
    if kind not in ("grid", "beta"):
        raise UsageError(f"config.domain.generator.kind: expected grid|beta, got {kind!r}")
    count = gen.get("count")
    if isinstance(count, bool) or not isinstance(count, int) or count < 1:
        raise UsageError("config.domain.generator.count: expected a positive integer")
    if kind == "grid":
        p_min = float(gen.get("p_min", 0.0))
        p_max = float(gen.get("p_max", 0.5))
        if not 0.0 <= p_min <= p_max <= 1.0:
            raise UsageError("config.domain.generator: need 0 <= p_min <= p_max <= 1")
        if count == 1:
            ps = [0.5 * (p_min + p_max)]
        else:
            ps = np.linspace(p_min, p_max, count).tolist()
    else:
        a = float(gen.get("alpha", 2.0))
        b = float(gen.get("beta", 2.0))
        if a <= 0 or b <= 0:
            raise UsageError("config.domain.generator: alpha and beta must be > 0")
        rng = np.random.default_rng(np.random.SeedSequence((seed, STREAM_DOMAIN)))
        ps = rng.beta(a, b, size=count).tolist()
    return tuple(
        PromptSpec(id=f"p{i:04d}", p=float(p)) for i, p in enumerate(ps)
    )


def load_config(path, seed_flag, need_mn: bool) -> tuple[dict, PromptDomain, int]:
    """Parse + validate a config file; returns (resolved dict, domain, seed)."""
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path}: not valid JSON ({exc.msg})") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config: top level must be an object")
    known = {"domain", "m", "n", "replicates", "rho", "seed"}
    unknown = set(cfg) - known
    if unknown:
        raise UsageError(f"config: unknown field(s) {sorted(unknown)}")

    config_seed = _field_int(cfg, "seed", required=False, minimum=0)
    seed = resolve_seed(seed_flag, config_seed)

    domain_cfg = cfg.get("domain")
    if not isinstance(domain_cfg, dict):
        raise UsageError("config.domain: required object missing")
    if ("prompts" in domain_cfg) == ("generator" in domain_cfg):
        raise UsageError("config.domain: give exactly one of prompts or generator")
    if "prompts" in domain_cfg:
        specs = _prompts_from_config(domain_cfg["prompts"])
    else:
        specs = _generated_domain(domain_cfg["generator"], seed)
    try:
        domain = PromptDomain(prompts=specs)
    except ValueError as exc:
        raise UsageError(f"config.domain: {exc}") from exc

    rho = cfg.get("rho", 0.0)
    if isinstance(rho, bool) or not isinstance(rho, (int, float)):
        raise UsageError("config.rho: expected a number")
    if not 0.0 <= float(rho) <= 1.0:
        raise UsageError(f"config.rho: must lie in [0, 1], got {rho}")

    resolved = {
        "m": _field_int(cfg, "m", required=need_mn),
        "n": _field_int(cfg, "n", required=need_mn),
        "replicates": _field_int(cfg, "replicates", required=True),
        "rho": float(rho),
        "seed": seed,
        "sampling": "with-replacement",
        "domain": _domain_echo(domain),
    }
    return resolved, domain, seed


def _domain_echo(domain: PromptDomain) -> dict:
    prompts = []
    for s in domain.prompts:
        entry = {"id": s.id, "weight": s.weight}
        if s.kind == "binary":
            entry["p"] = s.p
        else:
            entry["p_vec"] = list(s.p_vec)
        prompts.append(entry)
    return {"kind": domain.kind, "prompts": prompts}


# ----------------------------------------------------------------------
# renderers
# ----------------------------------------------------------------------


def bound_dict(b) -> dict:
    return {
        "m": b.m,
        "n": b.n,
        "term_prompt": b.term_prompt,
        "term_bias": b.term_bias,
        "term_cross": b.term_cross,
        "total": b.total,
    }


def report_dict(report, resolved_config: dict, notes: list[str]) -> dict:
    out = {
        "schema": "selfcons/report/v1",
        "config": resolved_config,
        "true_error": report.true_error,
        "replicates": report.replicates,
        "empirical_mse": report.empirical_mse,
        "mse_std_err": report.mse_std_err,
        "std_err_degenerate": report.std_err_degenerate,
        "bias_of_estimate": report.bias_of_estimate,
        "deviation_quantiles": {
            "0.5": report.deviation_quantiles[0.5],
            "0.9": report.deviation_quantiles[0.9],
            "0.99": report.deviation_quantiles[0.99],
        },
        "bound": bound_dict(report.bound),
        "bound_satisfied": report.bound_satisfied,
        "correlation_model": report.correlation_model,
    }
    if notes:
        out["notes"] = notes
    return out


def _plan_entry(plan) -> dict:
    return {
        "m": plan.m,
        "n": plan.n,
        "calls_used": plan.calls_used,
        "bound": bound_dict(plan.bound),
    }


def _print_bound_line(b, indent="  "):
    print(
        f"{indent}1/(8m) = {b.term_prompt:.8f}   1/(pi n) = {b.term_bias:.8f}   "
        f"1/(2nm) = {b.term_cross:.8f}   total = {b.total:.8f}"
    )


# ----------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------


def cmd_plan(args) -> int:
    require_even = not args.allow_odd_n
    methods = ["exhaustive", "rounded"] if args.method == "both" else [args.method]
    try:
        plans = {
            method: integer_plan(args.budget, require_even, method)
            for method in methods
        }
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    any_plan = next(iter(plans.values()))
    payload = {
        "schema": "selfcons/plan/v1",
        "budget": args.budget,
        "m_star": any_plan.m_star,
        "n_star": any_plan.n_star,
        "require_even_n": require_even,
        "plans": {name: _plan_entry(p) for name, p in plans.items()},
    }
    manifest = make_manifest("plan", config_digest(payload), seed=0)
    if args.format == "json":
        sys.stdout.write(pretty_json(payload))
    else:
        print(f"budget B = {args.budget}")
        print(
            f"continuous optimum: m* = {any_plan.m_star:.6f}, "
            f"n* = {any_plan.n_star:.6f}  (m* n* = B, m*/n* = pi/8)"
        )
        for name, plan in plans.items():
            print(
                f"{name} plan: m = {plan.m}, n = {plan.n} "
                f"({plan.calls_used}/{args.budget} calls)"
            )
            _print_bound_line(plan.bound)
    _emit_manifest(manifest, None)
    return EXIT_OK


def _write_replicates_csv(path: Path, replicates: dict) -> None:
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["replicate", "estimate", "sq_error", "tilde_e"])
        est = replicates["estimate"]
        sq = replicates["sq_error"]
        tilde = replicates["tilde_e"]
        for r in range(len(est)):
            writer.writerow([r, repr(float(est[r])), repr(float(sq[r])), repr(float(tilde[r]))])


def cmd_simulate(args) -> int:
    resolved, domain, seed = load_config(args.config, args.seed, need_mn=True)
    try:
        config = ExperimentConfig(
            domain=domain,
            m=resolved["m"],
            n=resolved["n"],
            replicates=resolved["replicates"],
            rho=resolved["rho"],
            seed=seed,
        )
    except ValueError as exc:
        raise UsageError(f"config: {exc}") from exc
    report, replicates = run_experiment_with_replicates(config, workers=args.workers)
    notes = []
    if config.rho > 0.0:
        notes.append(
            "correlated run (beta-binomial): bound comparison is reported "
            "but not enforced via the exit code"
        )
    payload = report_dict(report, resolved, notes)
    text = pretty_json(payload)
    out_dir = Path(args.out) if args.out else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "report.json").write_text(text)
        _write_replicates_csv(out_dir / "replicates.csv", replicates)
    else:
        sys.stdout.write(text)
    manifest = make_manifest("simulate", config_digest(resolved), seed)
    _emit_manifest(manifest, out_dir)
    print(f"seed: {seed}", file=sys.stderr)
    if config.rho == 0.0 and not report.bound_satisfied:
        print(
            f"bound violated: empirical MSE {report.empirical_mse} exceeds "
            f"{report.bound.total} + 3 SE ({report.mse_std_err})",
            file=sys.stderr,
        )
        return EXIT_FINDING
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.max_n < 2:
        raise UsageError(f"--max-n must be >= 2, got {args.max_n}")
    if not 0.0 < args.grid_step <= 0.5:
        raise UsageError(f"--grid-step must lie in (0, 0.5], got {args.grid_step}")
    results = run_battery(args.max_n, args.grid_step)
    width = max(len(r.name) for r in results)
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  {status}  worst slack {r.worst_slack:.3e}  at {r.witness}")
        if not r.passed:
            print(f"  finding: {r.description}", file=sys.stderr)
    payload = {
        "schema": "selfcons/verify/v1",
        "max_n": args.max_n,
        "grid_step": args.grid_step,
        "checks": [
            {
                "name": r.name,
                "passed": r.passed,
                "worst_slack": r.worst_slack,
                "witness": r.witness,
            }
            for r in results
        ],
    }
    manifest = make_manifest("verify", config_digest(payload), seed=0)
    _emit_manifest(manifest, None)
    return EXIT_OK if all(r.passed for r in results) else EXIT_FINDING


def _subsample(records, m_sub, n_sub, seed):
    rng = np.random.default_rng(np.random.SeedSequence((seed, STREAM_SUBSAMPLE)))
    if m_sub is not None:
        if m_sub < 1 or m_sub > len(records):
            raise UsageError(
                f"--subsample-m {m_sub} outside [1, {len(records)}] available prompts"
            )
        idx = sorted(rng.choice(len(records), size=m_sub, replace=False).tolist())
        records = [records[i] for i in idx]
    if n_sub is not None:
        trimmed = []
        for rec in records:
            if n_sub < 1 or n_sub > len(rec.responses):
                raise UsageError(
                    f"--subsample-n {n_sub} outside [1, {len(rec.responses)}] "
                    f"responses for prompt {rec.prompt_id!r}"
                )
            keep = sorted(rng.choice(len(rec.responses), size=n_sub, replace=False).tolist())
            trimmed.append(
                type(rec)(
                    prompt_id=rec.prompt_id,
                    responses=tuple(rec.responses[i] for i in keep),
                    meta=rec.meta,
                )
            )
        records = trimmed
    return records


def cmd_estimate(args) -> int:
    if (args.replay is None) == (args.external is None):
        raise UsageError("give exactly one of --replay or --external")
    failures: dict[str, str] = {}
    notes: list[str] = []
    seed = resolve_seed(args.seed) if (args.subsample_m or args.subsample_n) else (
        args.seed if args.seed is not None else 0
    )

    if args.replay is not None:
        try:
            records = open_replay(args.replay, declared_classes=args.classes)
        except (OSError, ReplayError) as exc:
            print(f"replay error: {exc}", file=sys.stderr)
            return EXIT_SOURCE
        source_desc = f"replay:{args.replay}"
    else:
        if not args.prompt_ids:
            raise UsageError("--external requires --prompt-ids")
        if args.draws is None:
            raise UsageError("--external requires --draws")
        prompt_ids = [p for p in args.prompt_ids.split(",") if p]
        try:
            with ExternalSource(
                command=args.external,
                timeout=args.timeout,
                retries=args.retries,
                window=args.window,
                declared_classes=args.classes,
            ) as source:
                records, failures = source.collect(prompt_ids, args.draws)
        except (SourceProtocolError, SourceFailure, OSError) as exc:
            print(f"source error: {exc}", file=sys.stderr)
            return EXIT_SOURCE
        source_desc = f"external:{' '.join(args.external)}"
        for pid, reason in failures.items():
            notes.append(f"prompt {pid!r} failed and was excluded: {reason}")
        if not records:
            print("all prompts failed:", file=sys.stderr)
            for pid, reason in failures.items():
                print(f"  {pid}: {reason}", file=sys.stderr)
            return EXIT_SOURCE

    if not records:
        print("no records in source", file=sys.stderr)
        return EXIT_SOURCE
    records = _subsample(records, args.subsample_m, args.subsample_n, seed)
    counts = [counts_from_record(rec, classes=args.classes) for rec in records]
    estimate = domain_estimate(counts)

    ns = {c.n for c in counts}
    common_n = ns.pop() if len(ns) == 1 else None
    bound = None
    if failures:
        notes.append(
            f"bound evaluated at effective m = {estimate.m} "
            f"(after {len(failures)} failed prompt(s))"
        )
    if common_n is None:
        notes.append("prompts carry differing n; the MSE bound does not apply")
    elif common_n % 2:
        notes.append("common n is odd; the analytic bias bound covers even n only")
    else:
        bound = bound_value(estimate.m, common_n)

    payload = {
        "schema": "selfcons/estimate/v1",
        "source": source_desc,
        "classes": args.classes,
        "estimate": estimate.value,
        "m": estimate.m,
        "n_common": common_n,
        "per_prompt": [
            {"prompt_id": pid, "estimate": value} for pid, value in estimate.per_prompt
        ],
        "bound": bound_dict(bound) if bound else None,
        "bound_meaning": (
            "upper bound on E[(E - estimate)^2] at (m, n); not a confidence interval"
            if bound
            else None
        ),
        "failures": failures or None,
        "notes": notes or None,
    }
    if args.format == "json":
        sys.stdout.write(pretty_json(payload))
    else:
        print(f"source: {source_desc}")
        print(f"estimate: {estimate.value}")
        print(f"effective m = {estimate.m}, common n = {common_n}")
        for pid, value in estimate.per_prompt:
            print(f"  {pid}: {value}")
        if bound:
            print("MSE bound at (m, n) [bound on E[(E - estimate)^2], not a CI]:")
            _print_bound_line(bound)
    for note in notes:
        print(f"note: {note}", file=sys.stderr)
    manifest_cfg = {
        "source": source_desc,
        "classes": args.classes,
        "subsample_m": args.subsample_m,
        "subsample_n": args.subsample_n,
        "seed": seed,
    }
    _emit_manifest(make_manifest("estimate", config_digest(manifest_cfg), seed), None)
    return EXIT_OK


def _parse_splits(text: str, budget: int) -> tuple[list[tuple[int, int]], list[str]]:
    if text == "auto":
        splits: list[tuple[int, int]] = [(1, budget)]
        labels = ["all-repeats"]
        exhaustive = integer_plan(budget, require_even_n=budget >= 2, method="exhaustive")
        rounded = integer_plan(budget, require_even_n=budget >= 2, method="rounded")
        for plan, label in ((exhaustive, "planner"), (rounded, "rounded")):
            pair = (plan.m, plan.n)
            if pair not in splits:
                splits.append(pair)
                labels.append(label)
        if (budget, 1) not in splits:
            splits.append((budget, 1))
            labels.append("all-prompts")
        return splits, labels
    splits = []
    for part in text.split(","):
        part = part.strip().lower()
        if not part:
            continue
        try:
            m_text, n_text = part.split("x")
            splits.append((int(m_text), int(n_text)))
        except ValueError as exc:
            raise UsageError(
                f"--splits: expected 'auto' or 'MxN,MxN,...', got {part!r}"
            ) from exc
    if not splits:
        raise UsageError("--splits: no splits given")
    return splits, [f"split-{i}" for i in range(len(splits))]


def cmd_sweep(args) -> int:
    if args.budget < 1:
        raise UsageError(f"--budget must be >= 1, got {args.budget}")
    resolved, domain, seed = load_config(args.config, args.seed, need_mn=False)
    splits, labels = _parse_splits(args.splits, args.budget)
    try:
        rows = mse_sweep(
            budget=args.budget,
            splits=splits,
            domain=domain,
            replicates=resolved["replicates"],
            rho=resolved["rho"],
            seed=seed,
            labels=labels,
            workers=args.workers,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    sweep_config = {
        "budget": args.budget,
        "splits": [[m, n] for m, n in splits],
        "replicates": resolved["replicates"],
        "rho": resolved["rho"],
        "seed": seed,
        "domain": resolved["domain"],
    }
    row_config_base = dict(resolved)
    payload = {
        "schema": "selfcons/sweep/v1",
        "budget": args.budget,
        "seed": seed,
        "rho": resolved["rho"],
        "replicates": resolved["replicates"],
        "rows": [],
    }
    for row in rows:
        payload["rows"].append(
            {
                "label": row.label,
                "m": row.m,
                "n": row.n,
                "calls_used": row.calls_used,
                "report": report_dict(
                    row.report,
                    {**row_config_base, "m": row.m, "n": row.n},
                    [],
                ),
            }
        )
    out_dir = Path(args.out) if args.out else None
    text = pretty_json(payload)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "sweep.json").write_text(text)
        with open(out_dir / "sweep.csv", "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(
                [
                    "label", "m", "n", "calls_used",
                    "term_prompt", "term_bias", "term_cross", "bound_total",
                    "empirical_mse", "mse_std_err", "bound_satisfied",
                ]
            )
            for row in rows:
                b = row.report.bound
                writer.writerow(
                    [
                        row.label, row.m, row.n, row.calls_used,
                        repr(b.term_prompt), repr(b.term_bias),
                        repr(b.term_cross), repr(b.total),
                        repr(row.report.empirical_mse),
                        repr(row.report.mse_std_err),
                        row.report.bound_satisfied,
                    ]
                )
    else:
        sys.stdout.write(text)
    _emit_manifest(make_manifest("sweep", config_digest(sweep_config), seed), out_dir)
    print(f"seed: {seed}", file=sys.stderr)
    if resolved["rho"] == 0.0 and any(not r.report.bound_satisfied for r in rows):
        return EXIT_FINDING
    return EXIT_OK


# ----------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="selfcons",
        description="Self-consistency error estimation, budget planning, "
        "and MSE-bound verification",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="split a call budget into m prompts x n repeats")
    p_plan.add_argument("--budget", type=int, required=True, help="total LLM calls B")
    p_plan.add_argument(
        "--method", choices=["exhaustive", "rounded", "both"], default="both"
    )
    p_plan.add_argument(
        "--allow-odd-n", action="store_true",
        help="drop the even-n restriction (the analytic bias bound assumes even n)",
    )
    p_plan.add_argument("--format", choices=["table", "json"], default="table")
    p_plan.set_defaults(func=cmd_plan)

    p_sim = sub.add_parser("simulate", help="Monte Carlo run of the estimator protocol")
    p_sim.add_argument("--config", required=True, help="JSON experiment config")
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--out", default=None, help="directory for report.json, replicates.csv, manifest.json")
    p_sim.add_argument("--workers", type=int, default=1)
    p_sim.set_defaults(func=cmd_simulate)

    p_ver = sub.add_parser("verify", help="check every analytic inequality exactly")
    p_ver.add_argument("--max-n", type=int, default=256)
    p_ver.add_argument("--grid-step", type=float, default=DEFAULT_GRID_STEP)
    p_ver.set_defaults(func=cmd_verify)

    p_est = sub.add_parser("estimate", help="estimate from a replay file or external source")
    p_est.add_argument("--replay", default=None, help="replay file path")
    p_est.add_argument(
        "--external", nargs="+", default=None,
        help="external source command (line-delimited JSON protocol)",
    )
    p_est.add_argument("--prompt-ids", default=None, help="comma-separated ids for --external")
    p_est.add_argument("--draws", type=int, default=None, help="calls per prompt for --external")
    p_est.add_argument("--classes", type=int, default=2)
    p_est.add_argument("--subsample-m", type=int, default=None)
    p_est.add_argument("--subsample-n", type=int, default=None)
    p_est.add_argument("--seed", type=int, default=None)
    p_est.add_argument("--timeout", type=float, default=10.0)
    p_est.add_argument("--retries", type=int, default=2)
    p_est.add_argument("--window", type=int, default=8)
    p_est.add_argument("--format", choices=["table", "json"], default="table")
    p_est.set_defaults(func=cmd_estimate)

    p_sweep = sub.add_parser("sweep", help="empirical MSE across budget splits")
    p_sweep.add_argument("--budget", type=int, required=True)
    p_sweep.add_argument("--splits", default="auto", help="'auto' or 'MxN,MxN,...'")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--seed", type=int, default=None)
    p_sweep.add_argument("--out", default=None)
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "classes", None) is not None and args.classes < 2:
            raise UsageError(f"--classes must be >= 2, got {args.classes}")
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
