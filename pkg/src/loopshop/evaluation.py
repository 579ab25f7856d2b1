"""Monte Carlo estimation with reproducible, counter-derived replication seeds.

Replication r draws its randomness from a Philox stream jumped r times from
the master seed, so any replication can be reproduced in isolation and the
result cannot depend on execution order.  Aggregation always runs in
replication order with exact summation, making reports bit-identical across
reruns regardless of parallelism.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .distributions import sample
from .exact import (
    OracleError,
    brute_force_parallel_opt,
    evaluate_policy_exact,
    optimal_expected,
    wspt_value,
)
from .model import (
    FlowShopInstance,
    ObjectiveKind,
    ParallelInstance,
    Realization,
    objective_value,
)
from .policies import PriorityRule
from .simulator import DEFAULT_CONFIG, EngineConfig, simulate_flow_shop

_Z95 = 1.96


def replication_rng(seed: int, replication: int) -> np.random.Generator:
    """Independent generator for one replication, a pure function of (seed, r)."""
    return np.random.Generator(np.random.Philox(key=seed).jumped(replication))


def draw_realization(inst: FlowShopInstance, rng: np.random.Generator,
                     seed_label: int | str) -> Realization:
    return Realization(y=tuple(sample(job.dist, rng) for job in inst.jobs),
                       seed=seed_label)


@dataclass(frozen=True)
class McReport:
    policy: str
    objective: str
    n_samples: int
    mean: float
    sd: float
    ci95: float
    seed: int


@dataclass(frozen=True)
class PairedReport:
    policy_a: str
    policy_b: str
    objective: str
    n_samples: int
    mean_a: float
    mean_b: float
    mean_diff: float
    sd_diff: float
    ci95_diff: float
    seed: int


def _summarize(values: Sequence[float]) -> tuple[float, float, float]:
    n = len(values)
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    sd = math.sqrt(max(0.0, var))
    return mean, sd, _Z95 * sd / math.sqrt(n)


def mc_estimate(inst: FlowShopInstance, rule: PriorityRule, kind: ObjectiveKind,
                n_samples: int, seed: int,
                cfg: EngineConfig = DEFAULT_CONFIG) -> McReport:
    """Estimate the expected objective from independent replications."""
    if n_samples < 2:
        raise ValueError("at least two replications are required")
    values = []
    for rep in range(n_samples):
        rng = replication_rng(seed, rep)
        y = draw_realization(inst, rng, seed)
        try:
            trace = simulate_flow_shop(inst, rule, y, cfg)
        except Exception as exc:
            raise RuntimeError(f"replication {rep} failed: {exc}") from exc
        values.append(objective_value(trace, inst, kind))
    mean, sd, half = _summarize(values)
    return McReport(policy=rule.name, objective=kind.name, n_samples=n_samples,
                    mean=mean, sd=sd, ci95=half, seed=seed)


def paired_compare(inst: FlowShopInstance, rule_a: PriorityRule, rule_b: PriorityRule,
                   kind: ObjectiveKind, n_samples: int, seed: int,
                   cfg: EngineConfig = DEFAULT_CONFIG) -> PairedReport:
    """Evaluate two policies on the same realization sequence (common random numbers)."""
    if n_samples < 2:
        raise ValueError("at least two replications are required")
    diffs, a_vals, b_vals = [], [], []
    for rep in range(n_samples):
        rng = replication_rng(seed, rep)
        y = draw_realization(inst, rng, seed)
        try:
            va = objective_value(simulate_flow_shop(inst, rule_a, y, cfg), inst, kind)
            vb = objective_value(simulate_flow_shop(inst, rule_b, y, cfg), inst, kind)
        except Exception as exc:
            raise RuntimeError(f"replication {rep} failed: {exc}") from exc
        a_vals.append(va)
        b_vals.append(vb)
        diffs.append(va - vb)
    mean_diff, sd_diff, half = _summarize(diffs)
    return PairedReport(policy_a=rule_a.name, policy_b=rule_b.name,
                        objective=kind.name, n_samples=n_samples,
                        mean_a=math.fsum(a_vals) / n_samples,
                        mean_b=math.fsum(b_vals) / n_samples,
                        mean_diff=mean_diff, sd_diff=sd_diff, ci95_diff=half,
                        seed=seed)


@dataclass(frozen=True)
class ScanRecord:
    index: int
    instance: object
    values: dict
    optimum: float | None
    ratios: dict
    note: str = ""


@dataclass(frozen=True)
class ScanResult:
    records: tuple[ScanRecord, ...]
    max_ratio: float | None
    worst: ScanRecord | None

    def failures(self) -> list[ScanRecord]:
        return [r for r in self.records if r.note]


def ratio_scan(generator: Callable[[np.random.Generator, int], object],
               rules: Iterable, kind: ObjectiveKind, trials: int,
               seed: int, mc_samples: int = 20_000) -> ScanResult:
    """Policy-to-optimal ratios over a random instance family.

    ``generator(rng, index)`` must yield instances inside the oracle caps.
    Flow-shop instances are scored with evaluate_policy_exact (Monte Carlo
    fallback when enumeration is infeasible) against optimal_expected;
    deterministic parallel instances score `"wspt:worst"` / `"wspt:best"`
    entries against the brute-force assignment oracle.  Oracle failures are
    recorded per instance and the scan continues.
    """
    records = []
    max_ratio, worst = None, None
    rules = list(rules)
    for index in range(trials):
        rng = replication_rng(seed, index)
        inst = generator(rng, index)
        values: dict = {}
        ratios: dict = {}
        note = ""
        optimum = None
        try:
            if isinstance(inst, ParallelInstance):
                optimum, _ = brute_force_parallel_opt(inst, kind)
                for tag in rules:
                    mode = tag.split(":", 1)[1]
                    values[tag] = wspt_value(inst, mode, kind)
            else:
                optimum, _ = optimal_expected(inst, kind)
                for rule in rules:
                    try:
                        values[rule.name] = evaluate_policy_exact(inst, rule, kind)
                    except OracleError:
                        report = mc_estimate(inst, rule, kind, mc_samples,
                                             seed=seed + index + 1)
                        values[rule.name] = report.mean
            for name, value in values.items():
                ratios[name] = value / optimum if optimum else float("nan")
        except (OracleError, ValueError, TypeError) as exc:
            note = f"{type(exc).__name__}: {exc}"
        record = ScanRecord(index=index, instance=inst, values=values,
                            optimum=optimum, ratios=ratios, note=note)
        records.append(record)
        for ratio in ratios.values():
            if max_ratio is None or ratio > max_ratio:
                max_ratio, worst = ratio, record
    return ScanResult(records=tuple(records), max_ratio=max_ratio, worst=worst)
