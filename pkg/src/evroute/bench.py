"""Experiment driver: method-comparison tables, ablation runs, and
station-to-customer ratio sweeps.

Costs in results.csv are deterministic for a fixed config and seed; wall
times go to a separate timings.csv so the results file is byte-reproducible
across runs.
"""

from __future__ import annotations

import csv
import json
import platform
import time
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import local_search, nearest_feasible, solve_exact, ExactConfig
from .env import EnvConfig, check_solution
from .instance import generate_instance
from .kernels import BACKEND
from .policy import Policy, decode
from .train import deadlock_penalty

KNOWN_METHODS = ("greedy", "sampling", "nearest", "local-search", "exact")


@dataclass
class BenchConfig:
    sizes: list[int] = field(default_factory=lambda: [6, 10])
    methods: list[str] = field(default_factory=lambda: ["greedy", "sampling", "nearest"])
    n_instances: int = 100
    n_samples: int = 128
    seed: int = 0
    ratios: list[float] = field(default_factory=lambda: [0.02, 0.05, 0.10, 0.20])
    sweep_size: int = 20
    out_dir: str | None = None

    def __post_init__(self):
        if not self.methods:
            raise ValueError("at least one method is required")
        unknown = set(self.methods) - set(KNOWN_METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "BenchConfig":
        return cls(**doc)


@dataclass
class ResultRow:
    method: str
    size: int
    mean_cost: float
    gap: float
    mean_seconds: float
    infeasible: int


class VerificationFailure(RuntimeError):
    pass


def _solve_one(method: str, policy: Policy | None, instance, config: BenchConfig,
               env_config: EnvConfig, seed: int):
    """Returns (solution_or_None, cost_with_penalty). Wall time is the
    caller's business."""
    if method in ("greedy", "sampling"):
        if policy is None:
            raise ValueError(f"method {method!r} needs a policy checkpoint")
        res = decode(policy, instance, mode=method,
                     n_samples=config.n_samples if method == "sampling" else 1,
                     seed=seed, env_config=env_config)
        if res.feasible:
            return res.solution, res.cost
        return None, deadlock_penalty(instance, res.unserved)
    if method == "nearest":
        sol = nearest_feasible(instance, env_config)
    elif method == "local-search":
        sol = nearest_feasible(instance, env_config)
        if sol is not None:
            sol = local_search(sol, instance, env_config=env_config)
    elif method == "exact":
        res = solve_exact(instance, ExactConfig(max_customers=8, max_vehicles=3),
                          env_config)
        sol = res.solution
    else:
        raise ValueError(f"unknown method {method!r}")
    if sol is None:
        return None, deadlock_penalty(instance)
    return sol, sol.total_cost


def run_bench(config: BenchConfig, policy: Policy | None = None,
              env_config: EnvConfig = EnvConfig()) -> list[ResultRow]:
    """Solve config.n_instances fresh instances per (method, size) cell,
    verify every produced solution, and aggregate mean cost / gap / time.

    Gap per size is relative to the best mean cost in that size (the exact
    oracle anchors it whenever it is among the methods).
    """
    rows: list[ResultRow] = []
    for size in config.sizes:
        seeds = [int(s) for s in
                 np.random.SeedSequence([config.seed, size]).generate_state(config.n_instances)]
        instances = [generate_instance(size, s) for s in seeds]
        per_method = {}
        for method in config.methods:
            costs, secs, infeasible = [], [], 0
            for k, inst in enumerate(instances):
                t0 = time.perf_counter()
                sol, cost = _solve_one(method, policy, inst, config, env_config,
                                       seed=seeds[k])
                secs.append(time.perf_counter() - t0)
                if sol is None:
                    infeasible += 1
                else:
                    verdict = check_solution(inst, sol, env_config)
                    if not verdict.ok:
                        raise VerificationFailure(
                            f"{method} size {size} instance seed {seeds[k]}: "
                            + "; ".join(verdict.failures[:3]))
                    if abs(verdict.cost - cost) > 1e-9:
                        raise VerificationFailure(
                            f"{method} size {size}: reported cost {cost} != "
                            f"verified {verdict.cost}")
                costs.append(cost)
            per_method[method] = (float(np.mean(costs)), float(np.mean(secs)), infeasible)
        anchor = (per_method["exact"][0] if "exact" in per_method
                  else min(v[0] for v in per_method.values()))
        for method in config.methods:
            mean_cost, mean_secs, infeasible = per_method[method]
            rows.append(ResultRow(method=method, size=size, mean_cost=mean_cost,
                                  gap=(mean_cost - anchor) / anchor,
                                  mean_seconds=mean_secs, infeasible=infeasible))
    if config.out_dir:
        write_outputs(config, rows, kind="bench")
    return rows


def run_ablation(policies: dict[str, Policy], config: BenchConfig,
                 env_config: EnvConfig = EnvConfig(),
                 budgets: dict[str, int] | None = None) -> list[ResultRow]:
    """Greedy-decode comparison of the four architecture variants.

    `policies` maps variant name (full / no-ee / no-twe / no-hd) to a trained
    policy; `budgets` (instance counts used in training) triggers a warning
    in the summary when the variants were not trained equally.
    """
    rows: list[ResultRow] = []
    warnings = []
    if budgets and len(set(budgets.values())) > 1:
        warnings.append(f"training budgets differ across variants: {budgets}")
    for size in config.sizes:
        seeds = [int(s) for s in
                 np.random.SeedSequence([config.seed, size]).generate_state(config.n_instances)]
        instances = [generate_instance(size, s) for s in seeds]
        cell = {}
        for name, pol in policies.items():
            costs, secs, infeasible = [], [], 0
            for inst in instances:
                t0 = time.perf_counter()
                res = decode(pol, inst, mode="greedy", env_config=env_config)
                secs.append(time.perf_counter() - t0)
                if res.feasible:
                    costs.append(res.cost)
                else:
                    infeasible += 1
                    costs.append(deadlock_penalty(inst, res.unserved))
            cell[name] = (float(np.mean(costs)), float(np.mean(secs)), infeasible)
        anchor = min(v[0] for v in cell.values())
        for name, (mean_cost, mean_secs, infeasible) in cell.items():
            rows.append(ResultRow(method=name, size=size, mean_cost=mean_cost,
                                  gap=(mean_cost - anchor) / anchor,
                                  mean_seconds=mean_secs, infeasible=infeasible))
    if config.out_dir:
        extra = {"param_counts": {n: p.n_params() for n, p in policies.items()}}
        write_outputs(config, rows, kind="ablation", warnings=warnings, extra=extra)
    return rows


def run_ratio_sweep(policy: Policy, config: BenchConfig,
                    env_config: EnvConfig = EnvConfig()) -> list[ResultRow]:
    """Greedy decode at several station-to-customer ratios (size fixed)."""
    rows: list[ResultRow] = []
    size = config.sweep_size
    for ratio in config.ratios:
        if round(ratio * size) < 1:
            raise ValueError(f"ratio {ratio} yields zero stations at size {size}")
        seeds = [int(s) for s in
                 np.random.SeedSequence([config.seed, int(ratio * 1000)])
                 .generate_state(config.n_instances)]
        costs, secs, infeasible = [], [], 0
        for s in seeds:
            inst = generate_instance(size, s, station_ratio=ratio)
            t0 = time.perf_counter()
            res = decode(policy, inst, mode="greedy", env_config=env_config)
            secs.append(time.perf_counter() - t0)
            if res.feasible:
                verdict = check_solution(inst, res.solution, env_config)
                if not verdict.ok:
                    raise VerificationFailure(f"ratio {ratio} seed {s}: "
                                              + "; ".join(verdict.failures[:3]))
                costs.append(res.cost)
            else:
                infeasible += 1
                costs.append(deadlock_penalty(inst, res.unserved))
        rows.append(ResultRow(method=f"ratio-{ratio:g}", size=size,
                              mean_cost=float(np.mean(costs)), gap=0.0,
                              mean_seconds=float(np.mean(secs)),
                              infeasible=infeasible))
    anchor = min(r.mean_cost for r in rows)
    for r in rows:
        r.gap = (r.mean_cost - anchor) / anchor
    if config.out_dir:
        write_outputs(config, rows, kind="ratio-sweep")
    return rows


# -- output files ------------------------------------------------------


def write_outputs(config: BenchConfig, rows: list[ResultRow], kind: str,
                  warnings: list[str] | None = None,
                  extra: dict | None = None) -> None:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    # deterministic results: no wall-clock columns
    with open(out / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "size", "mean_cost", "gap_pct", "infeasible"])
        for r in rows:
            w.writerow([r.method, r.size, f"{r.mean_cost:.6f}",
                        f"{100.0 * r.gap:.2f}", r.infeasible])
    with open(out / "timings.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["method", "size", "mean_seconds"])
        for r in rows:
            w.writerow([r.method, r.size, f"{r.mean_seconds:.6f}"])
    meta = {
        "kind": kind,
        "config": config.to_dict(),
        "version": __version__,
        "kernel_backend": BACKEND,
        "hardware": platform.processor() or platform.machine(),
        "platform": platform.platform(),
        "warnings": warnings or [],
    }
    meta.update(extra or {})
    (out / "run_metadata.json").write_text(json.dumps(meta, indent=1))

    lines = [f"# {kind} results", "",
             "| method | size | mean cost | gap | mean time (s) | infeasible |",
             "|---|---|---|---|---|---|"]
    for r in rows:
        lines.append(f"| {r.method} | {r.size} | {r.mean_cost:.1f} | "
                     f"{100.0 * r.gap:.2f}% | {r.mean_seconds:.4f} | {r.infeasible} |")
    if warnings:
        lines += ["", "Warnings:"] + [f"- {w}" for w in warnings]
    lines += ["", "Timing scope: decode only, per instance; see timings.csv. "
              "results.csv carries no timing so repeat runs are byte-identical."]
    (out / "summary.md").write_text("\n".join(lines) + "\n")
