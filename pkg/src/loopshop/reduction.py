"""Reduction from the reentrant flow shop to parallel machines with arrivals.

Flow-shop time decomposes as tau = m*t + i - 1 with period t and phase
i in 1..m.  The k-th auxiliary instance (k in 1..m) keeps every job with its
loop-count distribution as the processing-time distribution and lets machine
i arrive at time 0 when i + k <= m + 1, at time 1 otherwise.  A flow-shop
policy maps onto auxiliary instance k by replaying each loop started at tau
as one processing unit on machine i at time t + a_i(k).  Aggregated over all
k, per-job completion times are preserved exactly; `verify_identity` checks
that, the per-instance completion formula, and feasibility of every induced
trace, all in integer arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import (
    FlowShopInstance,
    OperationRecord,
    ParallelInstance,
    ParallelJob,
    Realization,
    ScheduleTrace,
)
from .policies import PriorityRule
from .simulator import DEFAULT_CONFIG, EngineConfig, simulate_flow_shop


class ReductionError(ValueError):
    pass


class InducedInfeasibilityError(ReductionError):
    """An induced trace violated machine-arrival or single-use feasibility."""


@dataclass(frozen=True)
class TimePoint:
    """A flow-shop time tau decomposed as tau = m*t + i - 1."""

    tau: int
    t: int
    i: int

    @classmethod
    def of(cls, tau: int, m: int) -> "TimePoint":
        if tau < 0:
            raise ReductionError("tau must be non-negative")
        return cls(tau=tau, t=tau // m, i=tau % m + 1)


def arrival_time(i: int, k: int, m: int) -> int:
    """Arrival time (0 or 1) of machine i in auxiliary instance k."""
    if not 1 <= i <= m or not 1 <= k <= m:
        raise ReductionError(f"indices i={i}, k={k} must lie in 1..{m}")
    return 0 if i + k <= m + 1 else 1


def build_auxiliary(inst: FlowShopInstance, k: int) -> ParallelInstance:
    """Auxiliary instance k: same jobs, m machines with 0/1 arrivals."""
    arrivals = tuple(float(arrival_time(i, k, inst.m)) for i in range(1, inst.m + 1))
    jobs = tuple(ParallelJob(id=j.id, weight=j.weight, dist=j.dist) for j in inst.jobs)
    return ParallelInstance(arrivals=arrivals, jobs=jobs)


def time_map(tau: int, k: int, m: int) -> tuple[int, int]:
    """Map flow-shop time tau to (machine, start time) in auxiliary instance k."""
    point = TimePoint.of(tau, m)
    return point.i, point.t + arrival_time(point.i, k, m)


def induced_trace_from_flow(flow_trace: ScheduleTrace, k: int) -> ScheduleTrace:
    """Replay a flow-shop trace on auxiliary instance k through the time map."""
    m = flow_trace.m
    records = []
    completion: dict[int, int] = {}
    for rec in flow_trace.records:
        machine, start = time_map(int(rec.start), k, m)
        records.append(OperationRecord(job=rec.job, loop=rec.loop, machine=machine,
                                       start=start, finish=start + 1))
        completion[rec.job] = max(completion.get(rec.job, 0), start + 1)
    return ScheduleTrace(kind="parallel", m=m, records=tuple(records),
                         completion={j: float(c) for j, c in completion.items()})


@dataclass(frozen=True)
class InducedPolicy:
    """Decision-sequence replay of a flow-shop rule on auxiliary instance k.

    Works for any rule, including ones without a named parallel counterpart.
    """

    rule: PriorityRule
    k: int

    def trace(self, inst: FlowShopInstance, y: Realization,
              cfg: EngineConfig = DEFAULT_CONFIG) -> ScheduleTrace:
        flow_trace = simulate_flow_shop(inst, self.rule, y, cfg)
        return induced_trace_from_flow(flow_trace, self.k)


def induce_policy(rule: PriorityRule, k: int) -> InducedPolicy:
    return InducedPolicy(rule=rule, k=k)


def check_parallel_feasibility(trace: ScheduleTrace,
                               arrivals: tuple[float, ...]) -> None:
    """Raise InducedInfeasibilityError on any per-slot conflict or early start."""
    slot_machine: set[tuple[int, int]] = set()
    slot_job: set[tuple[int, int]] = set()
    for rec in trace.records:
        if rec.start < arrivals[rec.machine - 1]:
            raise InducedInfeasibilityError(
                f"machine {rec.machine} used at {rec.start}, arrives at "
                f"{arrivals[rec.machine - 1]}")
        key_m = (rec.machine, int(rec.start))
        if key_m in slot_machine:
            raise InducedInfeasibilityError(
                f"machine {rec.machine} double-booked at slot {rec.start}")
        slot_machine.add(key_m)
        key_j = (rec.job, int(rec.start))
        if key_j in slot_job:
            raise InducedInfeasibilityError(
                f"job {rec.job} on two machines in slot {rec.start}")
        slot_job.add(key_j)


@dataclass(frozen=True)
class JobIdentityReport:
    job: int
    flow_completion: int
    auxiliary_completions: tuple[int, ...]
    identity_holds: bool
    formula_holds: bool


@dataclass(frozen=True)
class IdentityReport:
    jobs: tuple[JobIdentityReport, ...]
    makespan_identity_holds: bool
    makespan_argmax_consistent: bool

    @property
    def all_hold(self) -> bool:
        return (self.makespan_identity_holds and self.makespan_argmax_consistent
                and all(j.identity_holds and j.formula_holds for j in self.jobs))


def verify_identity(inst: FlowShopInstance, rule: PriorityRule, y: Realization,
                    cfg: EngineConfig = DEFAULT_CONFIG) -> IdentityReport:
    """Check the aggregated completion-time identity on one realization.

    Simulates the flow shop once, induces all m auxiliary traces, verifies
    their feasibility, and reports per job whether the flow-shop completion
    equals the exact integer sum of the m auxiliary completions, plus the
    closed-form value of each auxiliary completion derived from the phase of
    the job's final loop.
    """
    m = inst.m
    flow_trace = simulate_flow_shop(inst, rule, y, cfg)
    induced = [induced_trace_from_flow(flow_trace, k) for k in range(1, m + 1)]
    for k, trace in enumerate(induced, start=1):
        arrivals = tuple(float(arrival_time(i, k, m)) for i in range(1, m + 1))
        check_parallel_feasibility(trace, arrivals)
        for job in inst.jobs:
            units = len(trace.job_records(job.id))
            if units != y.value(job.id):
                raise InducedInfeasibilityError(
                    f"auxiliary {k}: job {job.id} got {units} units, "
                    f"needs {y.value(job.id)}")
    last_start = {job.id: max(int(r.start) for r in flow_trace.job_records(job.id))
                  for job in inst.jobs}
    reports = []
    for job in inst.jobs:
        c_flow = int(flow_trace.completion[job.id])
        c_aux = tuple(int(trace.completion[job.id]) for trace in induced)
        phase = TimePoint.of(last_start[job.id], m).i
        formula = all(
            c_aux[k - 1] * m == (c_flow - (phase - 1)) + arrival_time(phase, k, m) * m
            for k in range(1, m + 1))
        reports.append(JobIdentityReport(
            job=job.id,
            flow_completion=c_flow,
            auxiliary_completions=c_aux,
            identity_holds=(sum(c_aux) == c_flow),
            formula_holds=formula,
        ))
    flow_argmax = max(flow_trace.completion, key=flow_trace.completion.get)
    makespan_ok = sum(int(tr.makespan()) for tr in induced) == int(flow_trace.makespan())
    argmax_ok = all(tr.completion[flow_argmax] == tr.makespan() for tr in induced)
    return IdentityReport(jobs=tuple(reports),
                          makespan_identity_holds=makespan_ok,
                          makespan_argmax_consistent=argmax_ok)
