"""Ground-truth oracles.

Three independent ways to compute expected objectives exactly:

* realization enumeration: sum P(y) * objective(simulated trace) over the
  product of truncated supports;
* a Markov decision process over system states.  States hold, per job, either
  done, waiting(loops_done), or in-pipeline(loops_done, remaining units of the
  current loop).  Costs are additive per unit step (weight of every unfinished
  job for completion-time objectives, 1 while anything is unfinished for the
  makespan), which keeps elapsed time out of the state.  With truncated
  distributions every loop strictly advances loops_done, the graph is acyclic,
  and one memoized backward pass suffices;
* for all-geometric instances, a collapsed variant that drops loops_done
  (memorylessness makes it irrelevant), yielding a tiny cyclic chain solved
  exactly with linear algebra; the optimal policy comes from policy iteration.
  The collapsed solver works on the exact geometric law, so its values carry
  no truncation bias at all.

Idling is part of the optimal action set whenever the pipeline is non-empty.
Idling with an empty pipeline only reproduces the same state at positive
cost, so excluding it never changes the optimum and keeps the graph acyclic.

Deterministic parallel instances get a brute-force assignment oracle and an
exhaustive scan over processing-order tie breaks of the WSPT list schedule.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from typing import Iterator, Sequence

import numpy as np

from .model import (
    FlowShopInstance,
    ModelError,
    ObjectiveKind,
    OperationRecord,
    ParallelInstance,
    Realization,
    ScheduleTrace,
    objective_value,
)
from .policies import ObservationView, PriorityRule, RuleKind, decide
from .simulator import simulate_flow_shop


class OracleError(RuntimeError):
    pass


class TooLargeForEnumerationError(OracleError):
    """Exact evaluation would exceed the configured cap; fall back to Monte Carlo."""


class StateSpaceTooLargeError(OracleError):
    pass


DEFAULT_ENUMERATION_CAP = 10 ** 6
DEFAULT_STATE_CAP = 10 ** 7
_AUTO_ENUMERATION_LIMIT = 20_000

_DONE = ("D",)


def realization_space(inst: FlowShopInstance) -> Iterator[tuple[float, Realization]]:
    """All realizations of the truncated supports with their probabilities."""
    supports = [job.dist.support for job in inst.jobs]
    probs = [job.dist.probs for job in inst.jobs]
    for picks in itertools.product(*[range(len(s)) for s in supports]):
        p = 1.0
        for j, idx in enumerate(picks):
            p *= probs[j][idx]
        y = tuple(supports[j][idx] for j, idx in enumerate(picks))
        yield p, Realization(y=y, seed="enumeration")


def enumeration_size(inst: FlowShopInstance) -> int:
    size = 1
    for job in inst.jobs:
        size *= len(job.dist.support)
    return size


def _all_geometric(inst: FlowShopInstance) -> bool:
    return all(job.dist.kind == "geometric" for job in inst.jobs)


def _collapsible_rule(rule: PriorityRule) -> bool:
    # Rules whose decisions never read loops_done (static rules, and the
    # remaining-loops rules under memoryless distributions).
    return not rule.prefer_fewer_loops and rule.kind is not RuleKind.LVF


def evaluate_policy_exact(inst: FlowShopInstance, rule: PriorityRule,
                          kind: ObjectiveKind,
                          enumeration_cap: int = DEFAULT_ENUMERATION_CAP,
                          method: str = "auto") -> float:
    """Exact expected objective of a fixed rule.

    method="auto" picks the cheapest valid backend: the collapsed chain for
    all-geometric instances and loops-blind rules, realization enumeration for
    small support products, and the state-space pass otherwise.
    """
    if method == "auto":
        if _all_geometric(inst) and _collapsible_rule(rule):
            method = "collapsed"
        elif enumeration_size(inst) <= min(enumeration_cap, _AUTO_ENUMERATION_LIMIT):
            method = "enumerate"
        else:
            method = "mdp"
        # shared-prefix reuse makes the state pass much cheaper than
        # re-simulating every realization once supports get long
        if method == "enumerate" and enumeration_size(inst) > 512:
            method = "mdp"
    if method == "enumerate":
        size = enumeration_size(inst)
        if size > enumeration_cap:
            raise TooLargeForEnumerationError(
                f"{size} realizations exceed the cap {enumeration_cap}")
        terms = [p * objective_value(simulate_flow_shop(inst, rule, y), inst, kind)
                 for p, y in realization_space(inst)]
        return math.fsum(terms)
    if method == "mdp":
        mdp = _FlowMdp(inst, kind)
        value, _ = _dag_solve(mdp, policy=lambda s: _rule_action(mdp, rule, s),
                              state_cap=enumeration_cap,
                              error=TooLargeForEnumerationError)
        return value
    if method == "collapsed":
        if not _all_geometric(inst):
            raise OracleError("the collapsed chain applies to geometric instances only")
        if not _collapsible_rule(rule):
            raise OracleError(f"rule {rule.name} reads loop counts; not collapsible")
        chain = _CollapsedChain(inst, kind)
        value, _ = chain.policy_value(lambda s: _rule_action(chain, rule, s))
        return value
    raise ValueError(f"unknown method {method!r}")


def optimal_expected(inst: FlowShopInstance, kind: ObjectiveKind,
                     state_cap: int = DEFAULT_STATE_CAP,
                     method: str = "auto") -> tuple[float, dict]:
    """Optimal expected objective over all non-anticipatory policies.

    Returns the value and the optimizing decision per reachable state.  For
    all-geometric instances the collapsed chain is solved by policy iteration
    with exact linear solves; otherwise a memoized backward pass runs over the
    acyclic truncated state graph.
    """
    if method == "auto":
        method = "collapsed" if _all_geometric(inst) else "induction"
    if method == "collapsed":
        if not _all_geometric(inst):
            raise OracleError("the collapsed chain applies to geometric instances only")
        return _CollapsedChain(inst, kind).optimal()
    if method == "induction":
        mdp = _FlowMdp(inst, kind)
        return _dag_solve(mdp, policy=None, state_cap=state_cap,
                          error=StateSpaceTooLargeError)
    raise ValueError(f"unknown method {method!r}")


# -- shared state machinery -------------------------------------------------
#
# A state is a tuple with one entry per job:
#   ("D",)          finished
#   ("W", k)        waiting, k loops completed
#   ("P", k, r)     in the pipeline, k loops completed when the current loop
#                   started, r unit steps until it finishes (1 <= r <= m-1 at
#                   decision points; a loop started now resolves after m steps)
# The implicit clock advances one unit per transition; at most one pipeline
# job resolves per step because all r values are distinct.


class _FlowMdp:
    """Truncated-state system: loops_done is part of the state."""

    def __init__(self, inst: FlowShopInstance, kind: ObjectiveKind):
        self.inst = inst
        self.m = inst.m
        self.kind = kind
        if kind.name == "alpha_weighted_completion":
            raise ModelError("alpha objectives are not defined for the flow shop")
        if kind.name == "total_weighted_completion":
            self.weights = [job.weight for job in inst.jobs]
        else:
            self.weights = [1.0 for _ in inst.jobs]
        self.makespan = kind.name == "makespan"
        self.hazards = [_hazard_table(job.dist) for job in inst.jobs]

    def initial(self) -> tuple:
        return tuple(("W", 0) for _ in self.inst.jobs)

    def cost(self, state: tuple) -> float:
        if self.makespan:
            return 1.0 if any(s[0] != "D" for s in state) else 0.0
        return sum(w for w, s in zip(self.weights, state) if s[0] != "D")

    def actions(self, state: tuple) -> list[int | None]:
        waiting = [j + 1 for j, s in enumerate(state) if s[0] == "W"]
        acts: list[int | None] = list(waiting)
        if any(s[0] == "P" for s in state):
            acts.append(None)  # idling is only useful while the pipeline moves
        return acts

    def transitions(self, state: tuple, action: int | None) -> list[tuple[float, tuple]]:
        statuses = list(state)
        if action is not None:
            _, k = statuses[action - 1]
            statuses[action - 1] = ("P", k, self.m)
        resolve = -1
        for j, s in enumerate(statuses):
            if s[0] == "P":
                k, r = s[1], s[2] - 1
                if r == 0:
                    resolve = j
                    statuses[j] = ("W", k)  # placeholder, replaced per branch
                else:
                    statuses[j] = ("P", k, r)
        if resolve < 0:
            return [(1.0, tuple(statuses))]
        k = statuses[resolve][1]
        h = self.hazards[resolve][k]
        branches = []
        if h > 0.0:
            done = list(statuses)
            done[resolve] = _DONE
            branches.append((h, tuple(done)))
        if h < 1.0:
            back = list(statuses)
            back[resolve] = ("W", k + 1)
            branches.append((1.0 - h, tuple(back)))
        return branches

    def view(self, state: tuple) -> ObservationView:
        uncompleted = tuple((j + 1, s[1]) for j, s in enumerate(state) if s[0] == "W")
        active = tuple((j + 1, s[1], s[2] - self.m)
                       for j, s in enumerate(state) if s[0] == "P")
        return ObservationView(now=0, uncompleted=uncompleted, active=active,
                               instance=self.inst)


def _hazard_table(dist) -> list[float]:
    surv = 1.0
    table = []
    for k in range(dist.max_support):
        p = dist.pmf(k + 1)
        table.append(min(1.0, p / surv))
        surv -= p
    table[-1] = 1.0  # P(Y = max | Y > max - 1); exact despite float drift above
    return table


def _rule_action(system, rule: PriorityRule, state: tuple) -> int | None:
    return decide(rule, system.view(state))


def _dag_solve(mdp: _FlowMdp, policy, state_cap: int, error) -> tuple[float, dict]:
    """Memoized backward pass over the acyclic state graph.

    ``policy`` fixes one action per state (policy evaluation); None optimizes
    over every action.  Returns (value at the initial state, decision table).
    """
    memo: dict[tuple, float] = {}
    decisions: dict[tuple, int | None] = {}
    expansions: dict[tuple, tuple[float, list]] = {}
    initial = mdp.initial()
    stack = [initial]
    while stack:
        state = stack[-1]
        if state in memo:
            stack.pop()
            continue
        expansion = expansions.get(state)
        if expansion is None:
            if all(s[0] == "D" for s in state):
                memo[state] = 0.0
                stack.pop()
                continue
            acts = [policy(state)] if policy is not None else mdp.actions(state)
            expansion = (mdp.cost(state),
                         [(a, mdp.transitions(state, a)) for a in acts])
            expansions[state] = expansion
            if len(expansions) + len(memo) > state_cap:
                raise error(f"state space exceeds the cap {state_cap}")
        pending = [child for _, branches in expansion[1]
                   for _, child in branches if child not in memo]
        if pending:
            stack.extend(pending)
            continue
        cost, options = expansion
        best_action, best = None, None
        for action, branches in options:
            q = sum(p * memo[child] for p, child in branches)
            if best is None or q < best - 1e-12:
                best_action, best = action, q
        memo[state] = cost + best
        decisions[state] = best_action
        del expansions[state]
        stack.pop()
    return memo[initial], decisions


class _CollapsedChain:
    """Memoryless chain for all-geometric instances: loops_done is dropped.

    States use ("W",) / ("P", r) / ("D",) per job.  Completion of a loop is
    decided by the constant success probability q_j, so the chain is exact for
    the untruncated geometric law.  The chain may contain cycles (a failed
    loop recreates an earlier state), hence linear solves instead of a
    backward pass.
    """

    def __init__(self, inst: FlowShopInstance, kind: ObjectiveKind):
        self.inst = inst
        self.m = inst.m
        if kind.name == "alpha_weighted_completion":
            raise ModelError("alpha objectives are not defined for the flow shop")
        if kind.name == "total_weighted_completion":
            self.weights = [job.weight for job in inst.jobs]
        else:
            self.weights = [1.0 for _ in inst.jobs]
        self.makespan = kind.name == "makespan"
        self.qs = [job.dist.param("q") for job in inst.jobs]

    def initial(self) -> tuple:
        return tuple(("W",) for _ in self.inst.jobs)

    def terminal(self, state: tuple) -> bool:
        return all(s[0] == "D" for s in state)

    def cost(self, state: tuple) -> float:
        if self.makespan:
            return 0.0 if self.terminal(state) else 1.0
        return sum(w for w, s in zip(self.weights, state) if s[0] != "D")

    def actions(self, state: tuple) -> list[int | None]:
        waiting = [j + 1 for j, s in enumerate(state) if s[0] == "W"]
        acts: list[int | None] = list(waiting)
        if any(s[0] == "P" for s in state):
            acts.append(None)
        return acts

    def transitions(self, state: tuple, action: int | None) -> list[tuple[float, tuple]]:
        statuses = list(state)
        if action is not None:
            statuses[action - 1] = ("P", self.m)
        resolve = -1
        for j, s in enumerate(statuses):
            if s[0] == "P":
                r = s[1] - 1
                if r == 0:
                    resolve = j
                    statuses[j] = ("W",)
                else:
                    statuses[j] = ("P", r)
        if resolve < 0:
            return [(1.0, tuple(statuses))]
        q = self.qs[resolve]
        branches = []
        if q > 0.0:
            done = list(statuses)
            done[resolve] = _DONE
            branches.append((q, tuple(done)))
        if q < 1.0:
            branches.append((1.0 - q, tuple(statuses)))
        return branches

    def view(self, state: tuple) -> ObservationView:
        uncompleted = tuple((j + 1, 0) for j, s in enumerate(state) if s[0] == "W")
        active = tuple((j + 1, 0, s[1] - self.m)
                       for j, s in enumerate(state) if s[0] == "P")
        return ObservationView(now=0, uncompleted=uncompleted, active=active,
                               instance=self.inst)

    # -- solving ---------------------------------------------------------

    def _reachable(self, policy) -> list[tuple]:
        seen = {self.initial()}
        frontier = [self.initial()]
        while frontier:
            state = frontier.pop()
            if self.terminal(state):
                continue
            acts = [policy(state)] if policy is not None else self.actions(state)
            for action in acts:
                for _, child in self.transitions(state, action):
                    if child not in seen:
                        seen.add(child)
                        frontier.append(child)
        return sorted(seen)

    def _evaluate(self, states: list[tuple], index: dict[tuple, int],
                  policy_map: dict[tuple, int | None]) -> np.ndarray:
        transient = [s for s in states if not self.terminal(s)]
        tindex = {s: i for i, s in enumerate(transient)}
        n = len(transient)
        a = np.eye(n)
        b = np.empty(n)
        for s in transient:
            i = tindex[s]
            b[i] = self.cost(s)
            for p, child in self.transitions(s, policy_map[s]):
                if not self.terminal(child):
                    a[i, tindex[child]] -= p
        v_transient = np.linalg.solve(a, b)
        values = np.zeros(len(states))
        for s, i in tindex.items():
            values[index[s]] = v_transient[i]
        return values

    def policy_value(self, policy) -> tuple[float, dict]:
        states = self._reachable(policy)
        index = {s: i for i, s in enumerate(states)}
        policy_map = {s: policy(s) for s in states if not self.terminal(s)}
        values = self._evaluate(states, index, policy_map)
        return float(values[index[self.initial()]]), policy_map

    def optimal(self, max_rounds: int = 500) -> tuple[float, dict]:
        states = self._reachable(None)
        index = {s: i for i, s in enumerate(states)}
        transient = [s for s in states if not self.terminal(s)]
        # start from a proper policy: always start the lowest-id waiting job
        policy_map: dict[tuple, int | None] = {}
        for s in transient:
            acts = self.actions(s)
            policy_map[s] = acts[0] if acts[0] is not None else None
        for _ in range(max_rounds):
            values = self._evaluate(states, index, policy_map)
            changed = False
            for s in transient:
                best_action, best = None, None
                for action in self.actions(s):
                    q = sum(p * values[index[child]]
                            for p, child in self.transitions(s, action))
                    if best is None or q < best - 1e-10:
                        best_action, best = action, q
                if best_action != policy_map[s]:
                    current = sum(p * values[index[child]] for p, child in
                                  self.transitions(s, policy_map[s]))
                    if best < current - 1e-10:
                        policy_map[s] = best_action
                        changed = True
            if not changed:
                break
        else:
            raise OracleError("policy iteration did not converge")
        values = self._evaluate(states, index, policy_map)
        return float(values[index[self.initial()]]), policy_map


# -- deterministic parallel oracles ------------------------------------------


def brute_force_parallel_opt(inst: ParallelInstance, kind: ObjectiveKind,
                             job_cap: int = 12) -> tuple[float, ScheduleTrace]:
    """Optimal deterministic schedule by enumerating machine assignments.

    Jobs on one machine run contiguously from its arrival in non-increasing
    w/p order, which is optimal per machine for every supported objective
    (weighted completion and its alpha variants), so only the assignment is
    searched.  Inserted idleness is never useful for these objectives.
    """
    if not inst.all_deterministic():
        raise TypeError("brute force needs a deterministic instance")
    if inst.n > job_cap:
        raise StateSpaceTooLargeError(f"{inst.n} jobs exceed the cap {job_cap}")
    if kind.name == "makespan":
        raise ModelError("the assignment oracle covers completion-time objectives only")
    alpha = kind.alpha if kind.name == "alpha_weighted_completion" else 1.0
    weighted = kind.weighted
    order = sorted(inst.jobs, key=lambda j: (-(j.weight / j.p), j.id))
    weights = [(job.weight if weighted else 1.0) for job in order]
    best_value, best_assignment = None, None
    m = inst.m
    for assignment in itertools.product(range(m), repeat=inst.n):
        clocks = list(inst.arrivals)
        value = 0.0
        for job, w, machine in zip(order, weights, assignment):
            start = clocks[machine]
            clocks[machine] = start + job.p
            value += w * (start + alpha * job.p)
        if best_value is None or value < best_value - 1e-15:
            best_value, best_assignment = value, assignment
    records = []
    completion = {}
    clocks = list(inst.arrivals)
    for job, machine in zip(order, best_assignment):
        start = clocks[machine]
        finish = start + job.p
        clocks[machine] = finish
        records.append(OperationRecord(job=job.id, loop=1, machine=machine + 1,
                                       start=start, finish=finish))
        completion[job.id] = finish
    trace = ScheduleTrace(kind="parallel", m=m, records=tuple(records),
                          completion=completion)
    return best_value, trace


def count_wspt_orders(inst: ParallelInstance) -> int:
    """Number of distinct WSPT-consistent processing orders, identical jobs collapsed."""
    total = 1
    for group in _ratio_groups(inst):
        classes = Counter((inst.job(j).weight, inst.job(j).p) for j in group)
        size = len(group)
        perms = math.factorial(size)
        for c in classes.values():
            perms //= math.factorial(c)
        total *= perms
    return total


def wspt_orders(inst: ParallelInstance) -> Iterator[tuple[int, ...]]:
    """All distinct WSPT-consistent orders (value-distinct; identical jobs collapsed)."""
    per_group = [_distinct_group_orders(inst, group) for group in _ratio_groups(inst)]
    for combo in itertools.product(*per_group):
        yield tuple(itertools.chain.from_iterable(combo))


def wspt_value(inst: ParallelInstance, tie_mode: str, kind: ObjectiveKind,
               order: Sequence[int] | None = None,
               order_cap: int = 20_000) -> float:
    """Objective of a WSPT-consistent list schedule under the given tie mode.

    tie_mode "best" / "worst" searches every value-distinct WSPT order
    (identical jobs are interchangeable and not permuted); "explicit"
    evaluates the supplied order after checking it is WSPT-consistent.
    """
    from .simulator import deterministic_list_schedule

    if not inst.all_deterministic():
        raise TypeError("WSPT evaluation needs a deterministic instance")
    if tie_mode == "explicit":
        if order is None:
            raise ValueError("explicit tie mode needs an order")
        ratios = [inst.job(j).weight / inst.job(j).p for j in order]
        if any(a < b for a, b in zip(ratios, ratios[1:])):
            raise ModelError("order is not WSPT-consistent")
        trace = deterministic_list_schedule(inst, order)
        return objective_value(trace, inst, kind)
    if tie_mode not in ("best", "worst"):
        raise ValueError(f"unknown tie mode {tie_mode!r}")
    total = count_wspt_orders(inst)
    if total > order_cap:
        raise TooLargeForEnumerationError(
            f"{total} WSPT orders exceed the cap {order_cap}; use an explicit order")
    pick = min if tie_mode == "best" else max
    return pick(
        objective_value(deterministic_list_schedule(inst, candidate), inst, kind)
        for candidate in wspt_orders(inst))


def _ratio_groups(inst: ParallelInstance) -> list[list[int]]:
    jobs = sorted(inst.jobs, key=lambda j: (-(j.weight / j.p), j.id))
    groups: list[list[int]] = []
    last_ratio = None
    for job in jobs:
        ratio = job.weight / job.p
        if last_ratio is None or ratio != last_ratio:
            groups.append([])
            last_ratio = ratio
        groups[-1].append(job.id)
    return groups


def _distinct_group_orders(inst: ParallelInstance,
                           group: list[int]) -> list[tuple[int, ...]]:
    """Value-distinct orders of one tie group; identical (w, p) jobs keep id order."""
    by_class: dict[tuple[float, float], list[int]] = {}
    for j in sorted(group):
        by_class.setdefault((inst.job(j).weight, inst.job(j).p), []).append(j)
    class_keys = sorted(by_class)
    counts = Counter({key: len(by_class[key]) for key in class_keys})
    orders = []
    for pattern in _multiset_permutations(counts):
        cursor = {key: 0 for key in class_keys}
        concrete = []
        for key in pattern:
            concrete.append(by_class[key][cursor[key]])
            cursor[key] += 1
        orders.append(tuple(concrete))
    return orders


def _multiset_permutations(counts: Counter) -> Iterator[tuple]:
    if not counts:
        yield ()
        return
    total = sum(counts.values())
    acc: list = []

    def rec():
        if len(acc) == total:
            yield tuple(acc)
            return
        for key in sorted(counts):
            if counts[key] > 0:
                counts[key] -= 1
                acc.append(key)
                yield from rec()
                acc.pop()
                counts[key] += 1

    yield from rec()
