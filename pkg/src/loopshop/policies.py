"""Non-anticipatory decision rules for the reentrant flow shop.

Static rules (MEL / LEL / WLEL / CUSTOM) assign one priority value per job
and never change it; in the flow shop this makes them non-interruptive: a job
that reenters after a loop always outranks every job that has been waiting,
so it is rescheduled immediately.  Dynamic rules (MERL / LERL / LVF) re-rank
the whole pool at every decision epoch.

Ties are broken by an explicit total order over job ids (ascending id by
default).  LVF additionally prefers the job with fewer completed loops before
falling back to that order; this secondary key is what its published
reference schedules follow, and it makes LVF interruptive.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Mapping

from .distributions import UndefinedHazardError, cond_remaining_mean
from .model import FlowShopInstance


class PolicyError(ValueError):
    pass


class UndefinedPriorityError(PolicyError):
    """Dynamic priority conditioned on a zero-probability event."""


class NoCanonicalInductionError(PolicyError):
    """No named parallel-machine counterpart exists for this rule."""


class RuleKind(enum.Enum):
    MEL = "mel"      # most expected loops first
    LEL = "lel"      # least expected loops first
    WLEL = "wlel"    # weighted least expected loops first
    MERL = "merl"    # most expected remaining loops first
    LERL = "lerl"    # least expected remaining loops first
    LVF = "lvf"      # largest variance first
    CUSTOM = "custom"


_STATIC_KINDS = frozenset({RuleKind.MEL, RuleKind.LEL, RuleKind.WLEL, RuleKind.CUSTOM})


class ParallelRuleTag(enum.Enum):
    LEPT = "lept"
    SEPT = "sept"
    WSEPT = "wsept"
    PREEMPTIVE_LEPT = "preemptive-lept"
    PREEMPTIVE_SEPT = "preemptive-sept"

    @property
    def preemptive(self) -> bool:
        return self in (ParallelRuleTag.PREEMPTIVE_LEPT, ParallelRuleTag.PREEMPTIVE_SEPT)


@dataclass(frozen=True)
class PriorityRule:
    kind: RuleKind
    custom_values: Mapping[int, float] | None = None
    tie_break: tuple[int, ...] | None = None
    prefer_fewer_loops: bool = False

    def __post_init__(self) -> None:
        if self.kind is RuleKind.CUSTOM and self.custom_values is None:
            raise PolicyError("custom rule needs explicit priority values")

    @property
    def name(self) -> str:
        return self.kind.value

    @property
    def is_static(self) -> bool:
        return self.kind in _STATIC_KINDS

    def tie_rank(self, job_id: int) -> int:
        if self.tie_break is None:
            return job_id
        try:
            return self.tie_break.index(job_id)
        except ValueError:
            raise PolicyError(f"tie_break order does not cover job {job_id}") from None


def mel(**kw) -> PriorityRule:
    return PriorityRule(RuleKind.MEL, **kw)


def lel(**kw) -> PriorityRule:
    return PriorityRule(RuleKind.LEL, **kw)


def wlel(**kw) -> PriorityRule:
    return PriorityRule(RuleKind.WLEL, **kw)


def merl(**kw) -> PriorityRule:
    return PriorityRule(RuleKind.MERL, **kw)


def lerl(**kw) -> PriorityRule:
    return PriorityRule(RuleKind.LERL, **kw)


def lvf(**kw) -> PriorityRule:
    kw.setdefault("prefer_fewer_loops", True)
    return PriorityRule(RuleKind.LVF, **kw)


def custom(values: Mapping[int, float], **kw) -> PriorityRule:
    return PriorityRule(RuleKind.CUSTOM, custom_values=dict(values), **kw)


@dataclass(frozen=True)
class ObservationView:
    """What a non-anticipatory policy may see at a decision epoch.

    ``uncompleted`` lists waiting jobs as (job_id, loops_completed);
    ``active`` lists in-pipeline jobs as (job_id, loops_completed, start time
    of the current loop).  Realized loop counts of unfinished jobs are never
    part of the view.
    """

    now: int
    uncompleted: tuple[tuple[int, int], ...]
    active: tuple[tuple[int, int, int], ...] = field(default=())
    instance: FlowShopInstance | None = None


def priority_value(rule: PriorityRule, job_id: int, loops_completed: int,
                   inst: FlowShopInstance) -> float:
    """The rule's priority value; larger wins.  Static rules ignore the loop count."""
    job = inst.job(job_id)
    kind = rule.kind
    if kind is RuleKind.MEL:
        return job.dist.mean()
    if kind is RuleKind.LEL:
        return 1.0 / job.dist.mean()
    if kind is RuleKind.WLEL:
        return job.weight / job.dist.mean()
    if kind is RuleKind.LVF:
        return job.dist.variance()
    if kind is RuleKind.CUSTOM:
        try:
            value = rule.custom_values[job_id]
        except KeyError:
            raise PolicyError(f"custom rule has no value for job {job_id}") from None
        if value != value or value in (float("inf"), float("-inf")):
            raise PolicyError(f"custom priority for job {job_id} must be finite")
        return value
    try:
        remaining = cond_remaining_mean(job.dist, loops_completed)
    except UndefinedHazardError as exc:
        raise UndefinedPriorityError(str(exc)) from exc
    if kind is RuleKind.MERL:
        return remaining
    return 1.0 / remaining  # LERL


def decide(rule: PriorityRule, view: ObservationView) -> int | None:
    """Pick the waiting job with the largest priority value, or None to idle.

    Ties go to the rule's tie order; LVF (and any rule constructed with
    ``prefer_fewer_loops``) first prefers fewer completed loops.
    """
    if view.instance is None:
        raise PolicyError("view carries no instance data")
    best = None
    best_key = None
    for job_id, loops in view.uncompleted:
        value = priority_value(rule, job_id, loops, view.instance)
        loops_key = loops if rule.prefer_fewer_loops else 0
        key = (-value, loops_key, rule.tie_rank(job_id))
        if best_key is None or key < best_key:
            best, best_key = job_id, key
    return best


def induced_parallel_rule(rule: PriorityRule) -> ParallelRuleTag:
    """Named parallel-machine counterpart obtained through the reduction."""
    mapping = {
        RuleKind.MEL: ParallelRuleTag.LEPT,
        RuleKind.LEL: ParallelRuleTag.SEPT,
        RuleKind.WLEL: ParallelRuleTag.WSEPT,
        RuleKind.MERL: ParallelRuleTag.PREEMPTIVE_LEPT,
        RuleKind.LERL: ParallelRuleTag.PREEMPTIVE_SEPT,
    }
    try:
        return mapping[rule.kind]
    except KeyError:
        raise NoCanonicalInductionError(
            f"{rule.name} has no named induced counterpart; "
            "use the generic decision-replay induction") from None


_RULE_FACTORIES = {
    "mel": mel, "lel": lel, "wlel": wlel, "merl": merl, "lerl": lerl, "lvf": lvf,
}


def parse_rule(text: str) -> PriorityRule:
    """Parse a CLI rule string: a named rule or ``custom:<json file>``.

    The custom file holds {"values": {job_id: value}, "tie_break": [ids...]}
    (tie_break optional).
    """
    lowered = text.strip().lower()
    if lowered in _RULE_FACTORIES:
        return _RULE_FACTORIES[lowered]()
    if lowered.startswith("custom:"):
        path = text.strip()[len("custom:"):]
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        values = {int(k): float(v) for k, v in data["values"].items()}
        tie = tuple(int(x) for x in data["tie_break"]) if "tie_break" in data else None
        return custom(values, tie_break=tie)
    raise PolicyError(f"unknown policy {text!r}")
