"""Command-line harness.

Verbs: simulate, reduce, verify-identity, optimal, exact-eval, mc, and the
experiment bundle (experiments all|golden|alpha-half|lvf-merl|optimality|
ratios).  Experiment verbs exit nonzero iff any reference check fails.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

from . import experiments as xp
from .evaluation import draw_realization, mc_estimate, replication_rng
from .exact import evaluate_policy_exact, optimal_expected
from .model import (
    MAKESPAN,
    TOTAL_COMPLETION,
    TOTAL_WEIGHTED_COMPLETION,
    FlowShopInstance,
    Realization,
    alpha_completion,
    load_instance,
    objective_value,
    save_instance,
    write_trace_csv,
)
from .policies import parse_rule
from .reduction import build_auxiliary, verify_identity
from .simulator import simulate_flow_shop


def parse_objective(text: str):
    table = {"cmax": MAKESPAN, "sumc": TOTAL_COMPLETION,
             "sumwc": TOTAL_WEIGHTED_COMPLETION}
    lowered = text.strip().lower()
    if lowered in table:
        return table[lowered]
    if lowered.startswith("alpha:"):
        return alpha_completion(float(lowered[len("alpha:"):]))
    raise argparse.ArgumentTypeError(
        f"unknown objective {text!r} (use cmax, sumc, sumwc, or alpha:<a>)")


def _parse_realization(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad realization {text!r}: {exc}") from exc


def _require_flow_shop(inst, verb: str) -> FlowShopInstance:
    if not isinstance(inst, FlowShopInstance):
        raise SystemExit(f"{verb} needs a flow-shop instance file")
    return inst


def cmd_simulate(args) -> int:
    inst = _require_flow_shop(load_instance(args.instance), "simulate")
    rule = parse_rule(args.policy)
    if args.realization is not None:
        y = Realization(y=_parse_realization(args.realization))
    else:
        y = draw_realization(inst, replication_rng(args.seed, 0), args.seed)
    trace = simulate_flow_shop(inst, rule, y)
    print(f"policy={rule.name} realization={','.join(map(str, y.y))}")
    for job_id in sorted(trace.completion):
        print(f"job {job_id}: completion {trace.completion[job_id]:g}")
    for kind in (MAKESPAN, TOTAL_COMPLETION, TOTAL_WEIGHTED_COMPLETION):
        print(f"{kind.name}: {objective_value(trace, inst, kind):g}")
    if args.trace:
        write_trace_csv(trace, args.trace)
        print(f"trace written to {args.trace}")
    return 0


def cmd_reduce(args) -> int:
    inst = _require_flow_shop(load_instance(args.instance), "reduce")
    aux = build_auxiliary(inst, args.k)
    save_instance(aux, args.out)
    print(f"auxiliary instance {args.k} of {inst.m} written to {args.out} "
          f"(arrivals {','.join(str(int(a)) for a in aux.arrivals)})")
    return 0


def cmd_verify_identity(args) -> int:
    inst = _require_flow_shop(load_instance(args.instance), "verify-identity")
    rule = parse_rule(args.policy)
    failures = 0
    print(f"{'trial':>6} {'jobs-ok':>8} {'makespan-ok':>12}")
    for trial in range(args.trials):
        y = draw_realization(inst, replication_rng(args.seed, trial), args.seed)
        report = verify_identity(inst, rule, y)
        ok = report.all_hold
        if not ok or args.verbose:
            print(f"{trial:>6} {str(all(j.identity_holds for j in report.jobs)):>8} "
                  f"{str(report.makespan_identity_holds):>12}  y={y.y}")
        failures += 0 if ok else 1
    print(f"{args.trials - failures}/{args.trials} trials passed")
    return 0 if failures == 0 else 1


def cmd_optimal(args) -> int:
    inst = _require_flow_shop(load_instance(args.instance), "optimal")
    value, decisions = optimal_expected(inst, args.objective)
    print(f"optimal expected {args.objective.name}: {value!r}")
    if args.decisions:
        table = {repr(state): (action if action is not None else "idle")
                 for state, action in decisions.items()}
        with open(args.decisions, "w", encoding="utf-8") as fh:
            json.dump(table, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"decision table ({len(table)} states) written to {args.decisions}")
    return 0


def cmd_exact_eval(args) -> int:
    inst = _require_flow_shop(load_instance(args.instance), "exact-eval")
    rule = parse_rule(args.policy)
    value = evaluate_policy_exact(inst, rule, args.objective)
    print(f"exact expected {args.objective.name} under {rule.name}: {value!r}")
    return 0


def cmd_mc(args) -> int:
    inst = _require_flow_shop(load_instance(args.instance), "mc")
    rule = parse_rule(args.policy)
    report = mc_estimate(inst, rule, args.objective, args.n, args.seed)
    print(f"policy={report.policy} objective={report.objective} n={report.n_samples} "
          f"mean={report.mean!r} sd={report.sd!r} ci95={report.ci95!r} seed={report.seed}")
    if args.csv:
        with open(args.csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["policy", "objective", "n", "mean", "sd", "ci95", "seed"])
            writer.writerow([report.policy, report.objective, report.n_samples,
                             repr(report.mean), repr(report.sd),
                             repr(report.ci95), report.seed])
        print(f"report written to {args.csv}")
    return 0


def cmd_experiments(args) -> int:
    kw = {"tol_scale": args.tolerance}
    if args.which == "all":
        results = xp.run_all(seed=args.seed, tol_scale=args.tolerance,
                             wspt_trials=args.wspt_trials,
                             wlel_trials=args.wlel_trials)
    elif args.which == "golden":
        results = [xp.run_golden_ratio(k, **kw) for k in args.k]
    elif args.which == "alpha-half":
        results = [xp.run_alpha_half(**kw)]
    elif args.which == "lvf-merl":
        results = [xp.run_lvf_vs_merl(epsilon=args.epsilon, seed=args.seed, **kw)]
    elif args.which == "optimality":
        results = xp.run_optimality_sweep(**kw)
    else:  # ratios
        results = [xp.run_ratio_bounds(wspt_trials=args.wspt_trials,
                                       wlel_trials=args.wlel_trials,
                                       seed=args.seed, **kw)]
    for result in results:
        for line in result.summary_lines():
            print(line)
    xp.write_result_files(results, args.csv, args.json)
    failed = sum(0 if r.passed else 1 for r in results)
    print(f"{len(results) - failed}/{len(results)} experiments passed")
    return 0 if failed == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loopshop",
                                     description=__doc__.strip().splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one flow-shop simulation")
    p.add_argument("--instance", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--realization", help='fixed loop counts, e.g. "3,1,2"')
    p.add_argument("--trace", help="write the schedule as CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reduce", help="write one auxiliary parallel instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("verify-identity",
                       help="check the aggregated completion identity on sampled realizations")
    p.add_argument("--instance", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_verify_identity)

    p = sub.add_parser("optimal", help="exact optimal expected objective")
    p.add_argument("--instance", required=True)
    p.add_argument("--objective", type=parse_objective, required=True)
    p.add_argument("--decisions", help="write the optimal decision table as JSON")
    p.set_defaults(func=cmd_optimal)

    p = sub.add_parser("exact-eval", help="exact expected objective of a policy")
    p.add_argument("--instance", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--objective", type=parse_objective, required=True)
    p.set_defaults(func=cmd_exact_eval)

    p = sub.add_parser("mc", help="Monte Carlo estimate of a policy")
    p.add_argument("--instance", required=True)
    p.add_argument("--policy", required=True)
    p.add_argument("--objective", type=parse_objective, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--csv", help="write the report as CSV")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("experiments", help="reference-result reproductions")
    p.add_argument("which", choices=["all", "golden", "alpha-half", "lvf-merl",
                                     "optimality", "ratios"])
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--csv", help="directory for CSV output")
    p.add_argument("--json", help="directory for JSON output")
    p.add_argument("--tolerance", type=float, default=1.0,
                   help="scale factor applied to default check tolerances")
    p.add_argument("--k", type=int, nargs="+", default=[1, 10, 100, 1000],
                   help="golden-ratio sizes")
    p.add_argument("--epsilon", type=float, default=0.01,
                   help="success-probability offset for lvf-merl")
    p.add_argument("--wspt-trials", type=int, default=1000)
    p.add_argument("--wlel-trials", type=int, default=200)
    p.set_defaults(func=cmd_experiments)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
