"""Reentrant flow shop scheduling with stochastic loop counts.

Jobs pass through all m machines once per loop (unit-time operations) and
need a random number of loops drawn from a per-job discrete distribution.
The package provides the instance model, priority dispatching policies, the
reduction onto parallel machines with staggered arrivals, exact oracles
(realization enumeration and state-space solvers), Monte Carlo evaluation,
and a CLI experiment harness.
"""

from .distributions import (
    LoopDistribution,
    MhrFamilySpec,
    check_mhr_family,
    cond_remaining_mean,
    consecutive_success,
    deterministic,
    empirical,
    geometric,
    hazard,
    is_nbue,
    negative_binomial,
    sample,
    scv,
    truncate,
)
from .model import (
    MAKESPAN,
    TOTAL_COMPLETION,
    TOTAL_WEIGHTED_COMPLETION,
    FlowJob,
    FlowShopInstance,
    ObjectiveKind,
    ParallelInstance,
    ParallelJob,
    Realization,
    ScheduleTrace,
    alpha_completion,
    flow_shop,
    load_instance,
    objective_value,
    save_instance,
    validate,
)
from .policies import (
    ObservationView,
    ParallelRuleTag,
    PriorityRule,
    RuleKind,
    custom,
    decide,
    induced_parallel_rule,
    lel,
    lerl,
    lvf,
    mel,
    merl,
    parse_rule,
    priority_value,
    wlel,
)
from .reduction import (
    TimePoint,
    arrival_time,
    build_auxiliary,
    induce_policy,
    time_map,
    verify_identity,
)
from .simulator import (
    EngineConfig,
    deterministic_list_schedule,
    simulate_flow_shop,
    simulate_parallel_arrivals,
)
from .exact import (
    brute_force_parallel_opt,
    evaluate_policy_exact,
    optimal_expected,
    wspt_value,
)
from .evaluation import mc_estimate, paired_compare, ratio_scan

__version__ = "0.1.0"
