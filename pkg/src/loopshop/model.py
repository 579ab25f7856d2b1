"""Instance and schedule data model.

Two instance shapes are supported: the reentrant flow shop (m machines, jobs
with random loop counts) and the auxiliary parallel-machine problem with
machine arrival times.  Parallel jobs carry either a loop-count distribution
or a fixed real processing time; the stochastic simulation path requires
integer-valued processing, fixed real durations exist for the deterministic
counterexample instances.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

from .distributions import (
    DEFAULT_EPSILON,
    DistributionError,
    LoopDistribution,
    consecutive_success,
    deterministic,
    empirical,
    geometric,
    negative_binomial,
)


class ModelError(ValueError):
    pass


class UnsupportedObjectiveError(ModelError):
    """Objective undefined for the given trace shape."""


class ParseError(ModelError):
    """Instance file could not be parsed; message names the offending field."""


@dataclass(frozen=True)
class FlowJob:
    id: int
    weight: float
    dist: LoopDistribution


@dataclass(frozen=True)
class ParallelJob:
    """Parallel-machine job: stochastic (dist) or fixed duration (p)."""

    id: int
    weight: float
    dist: LoopDistribution | None = None
    p: float | None = None

    def __post_init__(self) -> None:
        if (self.dist is None) == (self.p is None):
            raise ModelError(f"job {self.id}: exactly one of dist/p must be given")

    @property
    def is_deterministic(self) -> bool:
        return self.p is not None

    def expected_processing(self) -> float:
        return self.p if self.p is not None else self.dist.mean()


@dataclass(frozen=True)
class FlowShopInstance:
    m: int
    jobs: tuple[FlowJob, ...]

    @property
    def n(self) -> int:
        return len(self.jobs)

    def job(self, job_id: int) -> FlowJob:
        return self.jobs[job_id - 1]

    def weights(self) -> dict[int, float]:
        return {j.id: j.weight for j in self.jobs}


@dataclass(frozen=True)
class ParallelInstance:
    arrivals: tuple[float, ...]
    jobs: tuple[ParallelJob, ...]

    @property
    def m(self) -> int:
        return len(self.arrivals)

    @property
    def n(self) -> int:
        return len(self.jobs)

    def job(self, job_id: int) -> ParallelJob:
        return self.jobs[job_id - 1]

    def all_deterministic(self) -> bool:
        return all(j.is_deterministic for j in self.jobs)


def flow_shop(m: int, jobs: Iterable[tuple[float, LoopDistribution]]) -> FlowShopInstance:
    """Build a flow-shop instance from (weight, distribution) pairs; ids are 1..n."""
    built = tuple(FlowJob(id=i + 1, weight=w, dist=d) for i, (w, d) in enumerate(jobs))
    inst = FlowShopInstance(m=m, jobs=built)
    problems = validate(inst)
    if problems:
        raise ModelError("; ".join(problems))
    return inst


@dataclass(frozen=True)
class Realization:
    """A sampled vector of loop counts, one entry per job (in id order)."""

    y: tuple[int, ...]
    seed: int | str = "manual"

    def value(self, job_id: int) -> int:
        return self.y[job_id - 1]


@dataclass(frozen=True)
class ObjectiveKind:
    """One of makespan / total completion / weighted completion / alpha variant."""

    name: str
    alpha: float = 1.0

    def __post_init__(self) -> None:
        if self.name not in ("makespan", "total_completion",
                             "total_weighted_completion", "alpha_weighted_completion"):
            raise ModelError(f"unknown objective {self.name!r}")
        if not 0.0 < self.alpha <= 1.0:
            raise ModelError(f"alpha={self.alpha!r} outside (0, 1]")

    @property
    def weighted(self) -> bool:
        return self.name in ("total_weighted_completion", "alpha_weighted_completion")


MAKESPAN = ObjectiveKind("makespan")
TOTAL_COMPLETION = ObjectiveKind("total_completion")
TOTAL_WEIGHTED_COMPLETION = ObjectiveKind("total_weighted_completion")


def alpha_completion(alpha: float) -> ObjectiveKind:
    return ObjectiveKind("alpha_weighted_completion", alpha=alpha)


@dataclass(frozen=True)
class OperationRecord:
    """One scheduled operation.

    Flow-shop traces store one record per loop with machine=1 and
    finish=start+m (the loop occupies machine i during [start+i-1, start+i)).
    Parallel traces store per-unit records, or one block per job for fixed
    real durations.
    """

    job: int
    loop: int
    machine: int
    start: float
    finish: float


@dataclass(frozen=True)
class ScheduleTrace:
    kind: str  # "flowshop" | "parallel"
    m: int
    records: tuple[OperationRecord, ...]
    completion: Mapping[int, float]

    @property
    def horizon(self) -> float:
        return max((r.finish for r in self.records), default=0.0)

    def makespan(self) -> float:
        return max(self.completion.values())

    def job_records(self, job_id: int) -> list[OperationRecord]:
        return [r for r in self.records if r.job == job_id]


def objective_value(trace: ScheduleTrace, inst, kind: ObjectiveKind) -> float:
    """Evaluate an objective on a complete trace.

    Alpha-weighted completion is defined only for parallel traces whose
    per-job operations form one contiguous block on a single machine; it is
    rejected for flow-shop traces.
    """
    weights = {j.id: j.weight for j in inst.jobs}
    missing = set(weights) - set(trace.completion)
    if missing:
        raise ModelError(f"trace incomplete, no completion for jobs {sorted(missing)}")
    if kind.name == "makespan":
        return max(trace.completion.values())
    if kind.name == "total_completion":
        return math.fsum(trace.completion.values())
    if kind.name == "total_weighted_completion":
        return math.fsum(weights[j] * c for j, c in trace.completion.items())
    # alpha variant
    if trace.kind != "parallel":
        raise UnsupportedObjectiveError(
            "alpha-completion objectives are defined for parallel traces only")
    total = 0.0
    for job_id in weights:
        records = sorted(trace.job_records(job_id), key=lambda r: r.start)
        if not records:
            raise ModelError(f"no operations for job {job_id}")
        for a, b in zip(records, records[1:]):
            if a.machine != b.machine or a.finish != b.start:
                raise UnsupportedObjectiveError(
                    f"job {job_id} is not contiguous on one machine; "
                    "alpha-completion is undefined")
        start = records[0].start
        length = records[-1].finish - start
        total += weights[job_id] * (start + kind.alpha * length)
    return total


def validate(inst) -> list[str]:
    """Return all invariant violations (empty list means the instance is valid)."""
    problems: list[str] = []
    if isinstance(inst, FlowShopInstance):
        if inst.m < 1:
            problems.append("machine count must be at least 1")
    elif isinstance(inst, ParallelInstance):
        if not inst.arrivals:
            problems.append("no machines")
        if any(a < 0 for a in inst.arrivals):
            problems.append("negative machine arrival time")
    else:
        return [f"unknown instance type {type(inst).__name__}"]
    if not inst.jobs:
        problems.append("no jobs")
    for pos, job in enumerate(inst.jobs, start=1):
        if job.id != pos:
            problems.append(f"job ids must be dense 1..n, position {pos} has id {job.id}")
        if not job.weight > 0:
            problems.append(f"non-positive weight for job {job.id}")
        if isinstance(job, ParallelJob) and job.p is not None and not job.p > 0:
            problems.append(f"non-positive processing time for job {job.id}")
    return problems


# -- serialization ------------------------------------------------------

_DIST_LOADERS = {
    "geometric": lambda d: geometric(float(d["q"]), float(d.get("epsilon", DEFAULT_EPSILON))),
    "deterministic": lambda d: deterministic(int(d["L"])),
    "negbin": lambda d: negative_binomial(int(d["L"]), float(d["q"]),
                                          float(d.get("epsilon", DEFAULT_EPSILON))),
    "consecutive": lambda d: consecutive_success(int(d["L"]), float(d["q"]),
                                                 float(d.get("epsilon", DEFAULT_EPSILON))),
}


def _dist_from_json(data: dict) -> LoopDistribution:
    if not isinstance(data, dict) or "kind" not in data:
        raise ParseError(f"dist: expected an object with a 'kind' field, got {data!r}")
    kind = data["kind"]
    if kind == "empirical":
        pmf = data.get("pmf")
        if not isinstance(pmf, dict):
            raise ParseError("dist.pmf: expected an object of loop-count probabilities")
        try:
            table = {int(k): float(p) for k, p in pmf.items()}
        except (TypeError, ValueError) as exc:
            raise ParseError(f"dist.pmf: {exc}") from exc
        dist = empirical(table, tag=data.get("tag", ""))
        tail = float(data.get("tail", 0.0))
        if tail:
            dist = replace(dist, truncation_tail=tail)
        return dist
    loader = _DIST_LOADERS.get(kind)
    if loader is None:
        raise ParseError(f"dist.kind: unknown kind {kind!r}")
    try:
        return loader(data)
    except KeyError as exc:
        raise ParseError(f"dist: missing parameter {exc.args[0]!r} for kind {kind!r}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DistributionError):
            raise ParseError(f"dist: {exc}") from exc
        raise ParseError(f"dist: bad parameter for kind {kind!r}: {exc}") from exc


def instance_to_json(inst) -> dict:
    if isinstance(inst, FlowShopInstance):
        return {
            "type": "flowshop",
            "m": inst.m,
            "jobs": [{"id": j.id, "weight": j.weight, "dist": j.dist.to_json()}
                     for j in inst.jobs],
        }
    if isinstance(inst, ParallelInstance):
        jobs = []
        for j in inst.jobs:
            entry: dict = {"id": j.id, "weight": j.weight}
            if j.is_deterministic:
                entry["p"] = j.p
            else:
                entry["dist"] = j.dist.to_json()
            jobs.append(entry)
        return {"type": "parallel", "arrivals": list(inst.arrivals), "jobs": jobs}
    raise ModelError(f"cannot serialize {type(inst).__name__}")


def instance_from_json(data: dict):
    if not isinstance(data, dict):
        raise ParseError("top level: expected a JSON object")
    itype = data.get("type")
    if itype not in ("flowshop", "parallel"):
        raise ParseError(f"type: expected 'flowshop' or 'parallel', got {itype!r}")
    raw_jobs = data.get("jobs")
    if not isinstance(raw_jobs, list):
        raise ParseError("jobs: expected a list")
    if itype == "flowshop":
        m = data.get("m")
        if not isinstance(m, int):
            raise ParseError(f"m: expected an integer, got {m!r}")
        jobs = []
        for pos, entry in enumerate(raw_jobs, start=1):
            jobs.append(FlowJob(id=_field(entry, "id", int, pos),
                                weight=_field(entry, "weight", float, pos),
                                dist=_dist_from_json(entry.get("dist"))))
        inst = FlowShopInstance(m=m, jobs=tuple(jobs))
    else:
        arrivals = data.get("arrivals")
        if not isinstance(arrivals, list) or not all(
                isinstance(a, (int, float)) for a in arrivals):
            raise ParseError("arrivals: expected a list of numbers")
        jobs = []
        for pos, entry in enumerate(raw_jobs, start=1):
            jid = _field(entry, "id", int, pos)
            weight = _field(entry, "weight", float, pos)
            if "p" in entry:
                jobs.append(ParallelJob(id=jid, weight=weight, p=float(entry["p"])))
            else:
                jobs.append(ParallelJob(id=jid, weight=weight,
                                        dist=_dist_from_json(entry.get("dist"))))
        inst = ParallelInstance(arrivals=tuple(float(a) for a in arrivals),
                                jobs=tuple(jobs))
    problems = validate(inst)
    if problems:
        raise ParseError("; ".join(problems))
    return inst


def _field(entry: dict, name: str, typ, pos: int):
    if not isinstance(entry, dict) or name not in entry:
        raise ParseError(f"jobs[{pos}].{name}: missing field")
    value = entry[name]
    if typ is int and not isinstance(value, int):
        raise ParseError(f"jobs[{pos}].{name}: expected an integer, got {value!r}")
    if typ is float and not isinstance(value, (int, float)):
        raise ParseError(f"jobs[{pos}].{name}: expected a number, got {value!r}")
    return typ(value)


def save_instance(inst, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_to_json(inst), fh, indent=2)
        fh.write("\n")


def load_instance(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"line {exc.lineno}: {exc.msg}") from exc
    return instance_from_json(data)


def write_trace_csv(trace: ScheduleTrace, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["job", "loop", "start", "machine", "finish"])
        for r in sorted(trace.records, key=lambda r: (r.start, r.machine, r.job)):
            writer.writerow([r.job, r.loop, _fmt(r.start), r.machine, _fmt(r.finish)])


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(x)
