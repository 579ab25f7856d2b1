"""Unit-time-step scheduling engines.

The flow-shop engine advances integer time; at each step it first processes
the loop finishing on machine m (marking the job completed, or returning it
to the waiting pool), then asks the policy for a job to start on machine 1.
A started loop occupies machines 1..m over [t, t+m).  Loop counts are read
from a pre-sampled realization, revealed to the policy only on completion.

The parallel engine handles machine arrival times with either non-preemptive
priority tags (a started job keeps its machine until completion) or
preemptive tags (the whole pool is re-ranked every unit step).  A separate
list scheduler covers deterministic real-duration jobs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .model import (
    FlowShopInstance,
    ModelError,
    OperationRecord,
    ParallelInstance,
    Realization,
    ScheduleTrace,
)
from .policies import ObservationView, ParallelRuleTag, PriorityRule, decide


class SimulationError(RuntimeError):
    pass


class RunawaySimulationError(SimulationError):
    """The engine exceeded its horizon cap without finishing all jobs."""


@dataclass(frozen=True)
class EngineConfig:
    """horizon_cap=None lets each engine derive a safe bound from the instance."""

    horizon_cap: int | None = None
    record_loops: bool = True


DEFAULT_CONFIG = EngineConfig()


def flow_shop_horizon(inst: FlowShopInstance) -> int:
    return inst.m * (sum(j.dist.max_support for j in inst.jobs) + 1) + inst.m


def check_realization(inst, y: Realization) -> None:
    if len(y.y) != inst.n:
        raise ModelError(f"realization has {len(y.y)} entries for {inst.n} jobs")
    for job in inst.jobs:
        value = y.value(job.id)
        dist = getattr(job, "dist", None)
        if dist is not None:
            if dist.pmf(value) <= 0.0:
                raise ModelError(
                    f"job {job.id}: loop count {value} outside the truncated support")
        elif value != job.p:
            raise ModelError(f"job {job.id}: realization {value} != fixed duration {job.p}")


def simulate_flow_shop(inst: FlowShopInstance, rule: PriorityRule, y: Realization,
                       cfg: EngineConfig = DEFAULT_CONFIG,
                       observer: Callable[[ObservationView, int | None], None] | None = None,
                       ) -> ScheduleTrace:
    """Run the reentrant flow shop under a priority rule and fixed realization.

    ``observer``, when given, is called with every (view, decision) pair; the
    replay tests use it to confirm decisions are a pure function of the view.
    """
    check_realization(inst, y)
    cap = cfg.horizon_cap if cfg.horizon_cap is not None else flow_shop_horizon(inst)
    m = inst.m
    waiting: dict[int, int] = {job.id: 0 for job in inst.jobs}
    active: list[list[int]] = []  # [job_id, loops_done, start]
    completion: dict[int, float] = {}
    records: list[OperationRecord] = []
    t = 0
    while len(completion) < inst.n:
        if t > cap:
            raise RunawaySimulationError(f"simulation passed horizon cap {cap}")
        # 1. the loop that finishes on machine m at time t, if any
        for entry in active:
            if entry[2] + m == t:
                job_id, loops_done, _ = entry
                done = loops_done + 1
                if done == y.value(job_id):
                    completion[job_id] = float(t)
                else:
                    waiting[job_id] = done
                active.remove(entry)
                break  # machine m finishes at most one operation per step
        # 2. decision for machine 1
        view = ObservationView(
            now=t,
            uncompleted=tuple(sorted(waiting.items())),
            active=tuple(sorted((j, k, s) for j, k, s in active)),
            instance=inst,
        )
        choice = decide(rule, view)
        if observer is not None:
            observer(view, choice)
        if choice is not None:
            loops_done = waiting.pop(choice)
            active.append([choice, loops_done, t])
            if cfg.record_loops:
                records.append(OperationRecord(job=choice, loop=loops_done + 1,
                                               machine=1, start=t, finish=t + m))
        t += 1
    return ScheduleTrace(kind="flowshop", m=m, records=tuple(records),
                         completion=completion)


def _processing_times(inst: ParallelInstance, y: Realization) -> dict[int, int]:
    check_realization(inst, y)
    times: dict[int, int] = {}
    for job in inst.jobs:
        if job.is_deterministic:
            if job.p != int(job.p):
                raise ModelError(
                    f"job {job.id}: the unit-step engine needs integer durations")
            times[job.id] = int(job.p)
        else:
            times[job.id] = y.value(job.id)
    return times


def _static_priority(tag: ParallelRuleTag, job) -> float:
    expected = job.expected_processing()
    if tag is ParallelRuleTag.LEPT:
        return expected
    if tag is ParallelRuleTag.SEPT:
        return 1.0 / expected
    return job.weight / expected  # WSEPT


def _remaining_priority(tag: ParallelRuleTag, job, units_done: int) -> float:
    if job.is_deterministic:
        remaining = job.p - units_done
    else:
        from .distributions import cond_remaining_mean
        remaining = cond_remaining_mean(job.dist, units_done)
    if tag is ParallelRuleTag.PREEMPTIVE_LEPT:
        return remaining
    return 1.0 / remaining  # preemptive SEPT


def simulate_parallel_arrivals(inst: ParallelInstance, tag: ParallelRuleTag,
                               y: Realization, cfg: EngineConfig = DEFAULT_CONFIG,
                               ) -> ScheduleTrace:
    """Unit-step parallel-machine simulation with machine arrival times.

    At each integer t the machines with arrival <= t that are idle are filled
    with the highest-priority unfinished jobs (lowest machine index first).
    Non-preemptive tags keep a started job on its machine until it finishes;
    preemptive tags re-rank every unfinished job each unit step.
    """
    if any(a != int(a) for a in inst.arrivals):
        raise ModelError("the unit-step engine needs integer machine arrivals")
    times = _processing_times(inst, y)
    cap = cfg.horizon_cap if cfg.horizon_cap is not None else (
        int(max(inst.arrivals)) + sum(times.values()) + 1)
    if tag.preemptive:
        return _run_preemptive(inst, tag, times, cap)
    return _run_nonpreemptive(inst, tag, times, cap)


def _run_nonpreemptive(inst: ParallelInstance, tag: ParallelRuleTag,
                       times: dict[int, int], cap: int) -> ScheduleTrace:
    arrivals = [int(a) for a in inst.arrivals]
    busy_until: dict[int, int] = {}  # machine index (1-based) -> finish time
    unstarted = {job.id for job in inst.jobs}
    completion: dict[int, float] = {}
    records: list[OperationRecord] = []
    t = 0
    while len(completion) < inst.n:
        if t > cap:
            raise RunawaySimulationError(f"simulation passed horizon cap {cap}")
        free = [i for i, a in enumerate(arrivals, start=1)
                if a <= t and busy_until.get(i, 0) <= t]
        if free and unstarted:
            ranked = sorted(unstarted,
                            key=lambda j: (-_static_priority(tag, inst.job(j)), j))
            for machine, job_id in zip(sorted(free), ranked):
                length = times[job_id]
                unstarted.remove(job_id)
                busy_until[machine] = t + length
                completion[job_id] = float(t + length)
                for unit in range(length):
                    records.append(OperationRecord(job=job_id, loop=unit + 1,
                                                   machine=machine,
                                                   start=t + unit, finish=t + unit + 1))
        t += 1
    return ScheduleTrace(kind="parallel", m=inst.m, records=tuple(records),
                         completion=completion)


def _run_preemptive(inst: ParallelInstance, tag: ParallelRuleTag,
                    times: dict[int, int], cap: int) -> ScheduleTrace:
    arrivals = [int(a) for a in inst.arrivals]
    units_done = {job.id: 0 for job in inst.jobs}
    completion: dict[int, float] = {}
    records: list[OperationRecord] = []
    t = 0
    while len(completion) < inst.n:
        if t > cap:
            raise RunawaySimulationError(f"simulation passed horizon cap {cap}")
        machines = sorted(i for i, a in enumerate(arrivals, start=1) if a <= t)
        pool = [j for j in units_done if j not in completion]
        ranked = sorted(
            pool,
            key=lambda j: (-_remaining_priority(tag, inst.job(j), units_done[j]), j))
        for machine, job_id in zip(machines, ranked):
            records.append(OperationRecord(job=job_id, loop=units_done[job_id] + 1,
                                           machine=machine, start=t, finish=t + 1))
            units_done[job_id] += 1
            if units_done[job_id] == times[job_id]:
                completion[job_id] = float(t + 1)
        t += 1
    return ScheduleTrace(kind="parallel", m=inst.m, records=tuple(records),
                         completion=completion)


def deterministic_list_schedule(inst: ParallelInstance,
                                order: Sequence[int]) -> ScheduleTrace:
    """Schedule deterministic jobs in the given order, no inserted idleness.

    Each job goes to the machine that is available earliest (its arrival or
    the finish of its previous job), ties to the lowest machine index.
    """
    if not inst.all_deterministic():
        raise TypeError("list scheduling is defined for deterministic instances only")
    if sorted(order) != [job.id for job in inst.jobs]:
        raise ModelError("order must be a permutation of the job ids")
    available = list(inst.arrivals)
    records = []
    completion: dict[int, float] = {}
    for job_id in order:
        job = inst.job(job_id)
        machine = min(range(inst.m), key=lambda i: (available[i], i))
        start = available[machine]
        finish = start + job.p
        available[machine] = finish
        records.append(OperationRecord(job=job_id, loop=1, machine=machine + 1,
                                       start=start, finish=finish))
        completion[job_id] = finish
    return ScheduleTrace(kind="parallel", m=inst.m, records=tuple(records),
                         completion=completion)
