"""Command-line entry point (installed as ``uc``).

Subcommands: ``solve`` (one model run with artifacts), ``sweep-gap`` and
``sweep-bess`` (sensitivity tables), ``train`` (fit the degradation network
on the synthetic aging law), ``verify`` (audit a schedule file and recompute
its degradation cost), ``export-lp`` (write the model as LP text), and
``economics`` (storage lifetime and benefit report).

Exit codes: 0 success, 1 infeasible or failed verification, 2 invalid input,
3 time limit without an incumbent.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

from .degradation import (NetFormatError, TrainConfig, TrainingError,
                          generate_dataset, load_net, save_net, train)
from .embedding import BoxContainmentError, build_lbdscuc
from .formulation import build_tscuc
from .grid import CaseError, load_case
from .milp import SolveOptions, TimeLimitNoIncumbentError, export_lp, solve
from . import experiments as ex
from .verify import audit_feasibility, recompute_degradation_cost, verify_parity


def _solve_options(args) -> SolveOptions:
    return SolveOptions(rel_mipgap=args.mipgap, time_limit=args.time_limit,
                        seed=args.seed)


def _add_solve_args(p, include_gap=True):
    p.add_argument("--case", required=True, help="case JSON file")
    if include_gap:
        p.add_argument("--mipgap", type=float, default=0.01,
                       help="relative optimality gap (default 0.01)")
    p.add_argument("--time-limit", type=float, default=600.0,
                   help="solve wall-clock limit in seconds")
    p.add_argument("--seed", type=int, default=0)


def cmd_solve(args) -> int:
    config = ex.RunConfig(case_path=args.case, mode=args.mode,
                          out_dir=args.out, net_path=args.net,
                          options=_solve_options(args),
                          allow_shedding=args.allow_shedding)
    return ex.run_solve(config).exit_code


def cmd_sweep_gap(args) -> int:
    try:
        gaps = [float(g) for g in args.gaps.split(",") if g != ""]
        case = load_case(args.case)
        net = load_net(args.net)
        rows = ex.sweep_mipgap(case, net, gaps, time_limit=args.time_limit,
                               seed=args.seed)
    except (ex.InvalidRunError, CaseError, NetFormatError, BoxContainmentError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ex.EXIT_INVALID_INPUT
    os.makedirs(args.out, exist_ok=True)
    ex.write_sweep_csv(rows, os.path.join(args.out, "sweep_gap.csv"))
    return 0


def cmd_sweep_bess(args) -> int:
    try:
        counts = [int(c) for c in args.counts.split(",") if c != ""]
        case = load_case(args.case)
        net = load_net(args.net)
        rows = ex.sweep_storage_count(case, net, counts, mipgap=args.mipgap,
                                      time_limit=args.time_limit,
                                      seed=args.seed)
    except (ex.InvalidRunError, CaseError, NetFormatError, BoxContainmentError,
            ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ex.EXIT_INVALID_INPUT
    os.makedirs(args.out, exist_ok=True)
    ex.write_sweep_csv(rows, os.path.join(args.out, "sweep_bess.csv"))
    return 0


def cmd_train(args) -> int:
    try:
        hidden = tuple(int(h) for h in args.hidden.split(","))
        if len(hidden) != 2:
            raise ValueError("--hidden needs exactly two sizes, e.g. 8,8")
        cfg = TrainConfig(restarts=args.restarts,
                          rmse_target_fraction=args.rmse_target)
        data = generate_dataset(args.samples, args.seed)
        t0 = time.perf_counter()
        net = train(data, hidden, hyper=cfg, seed=args.seed)
        save_net(net, args.out)
    except TrainingError as exc:
        print(f"training failed: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ex.EXIT_INVALID_INPUT
    print(f"trained {hidden} network on {args.samples} samples in "
          f"{time.perf_counter() - t0:.1f}s -> {args.out}")
    return 0


def cmd_verify(args) -> int:
    try:
        case = load_case(args.case)
        net = load_net(args.net)
        schedule = ex.read_schedule_csv(args.schedule, case)
    except (ex.InvalidRunError, CaseError, NetFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ex.EXIT_INVALID_INPUT

    audit = audit_feasibility(schedule, case)
    recomputed = recompute_degradation_cost(schedule, case, net)
    print(f"audit: {'pass' if audit.ok else 'FAIL'} "
          f"(max residual {audit.max_residual:.3e})")
    for v in audit.violations[:20]:
        print(f"  violation {v.family}{v.indices}: {v.residual:.3e}")
    print(f"recomputed degradation cost: {recomputed.cost:.6f}")
    if recomputed.out_of_box:
        print(f"warning: {len(recomputed.out_of_box)} feature(s) left the "
              f"training box: {recomputed.out_of_box[:5]}")

    ok = audit.ok
    costs_path = args.costs or os.path.join(
        os.path.dirname(os.path.abspath(args.schedule)), "costs.json")
    if os.path.exists(costs_path):
        with open(costs_path, "r", encoding="utf-8") as fh:
            costs = json.load(fh)
        parity = verify_parity(float(costs["degradation_cost"]), recomputed.cost)
        print(f"parity vs {costs_path}: rel diff "
              f"{parity.relative_difference:.3e} "
              f"({'pass' if parity.ok else 'FAIL'})")
        ok = ok and parity.ok
    return 0 if ok else 1


def cmd_export_lp(args) -> int:
    try:
        case = load_case(args.case)
        if args.net:
            net = load_net(args.net)
            model, _ = build_lbdscuc(case, net)
        else:
            model, _ = build_tscuc(case)
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(export_lp(model))
    except (CaseError, NetFormatError, BoxContainmentError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ex.EXIT_INVALID_INPUT
    print(f"wrote {model.num_variables} variables / "
          f"{model.num_constraints} rows to {args.out}")
    return 0


def cmd_economics(args) -> int:
    import dataclasses

    try:
        case = load_case(args.case)
        net = load_net(args.net)
    except (CaseError, NetFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ex.EXIT_INVALID_INPUT

    opts = _solve_options(args)
    baseline_case = dataclasses.replace(case, storage=())
    try:
        base_model, _ = build_tscuc(baseline_case)
        base_res = solve(base_model, opts)
        model, index = build_lbdscuc(case, net)
        with_res = solve(model, opts)
    except TimeLimitNoIncumbentError as exc:
        print(f"time limit: {exc}", file=sys.stderr)
        return ex.EXIT_TIME_LIMIT
    except BoxContainmentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ex.EXIT_INVALID_INPUT
    if base_res.status in ("infeasible", "unbounded") or \
            with_res.status in ("infeasible", "unbounded"):
        print("error: baseline or storage solve infeasible", file=sys.stderr)
        return ex.EXIT_INFEASIBLE

    from .formulation import extract_schedule
    schedule = extract_schedule(with_res, index, case)
    report = ex.economic_report(case, net, base_res.objective,
                                with_res.objective, schedule,
                                cap_years=args.cap_years)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "economics.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"baseline total {base_res.objective:.2f}, with storage "
          f"{with_res.objective:.2f}, daily saving {report.daily_saving:.2f}")
    for unit in report.per_storage:
        capped = " (capped)" if unit.lifetime_capped else ""
        print(f"  {unit.storage_id}: daily degradation "
              f"{unit.daily_degradation:.6e} SOH/day, lifetime "
              f"{unit.expected_lifetime_years:.1f} years{capped}")
    print(f"economic benefit over {report.lifetime_years_used:.1f} years: "
          f"{report.economic_benefit:.2f}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="uc",
        description="Day-ahead unit commitment with an embedded "
                    "battery-degradation network.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one model and write artifacts")
    _add_solve_args(p)
    p.add_argument("--mode", required=True, choices=("tscuc", "lbd"))
    p.add_argument("--net", help="network weight file (required for lbd; "
                                 "enables ex-post degradation for tscuc)")
    p.add_argument("--allow-shedding", action="store_true",
                   help="add penalized load-shedding slacks (diagnostic)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep-gap", help="solve across optimality gaps")
    _add_solve_args(p, include_gap=False)
    p.add_argument("--net", required=True)
    p.add_argument("--gaps", required=True, help="comma list, e.g. 0.1,0.01,0")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep_gap)

    p = sub.add_parser("sweep-bess", help="solve across storage-unit counts")
    _add_solve_args(p)
    p.add_argument("--net", required=True)
    p.add_argument("--counts", required=True, help="comma list, e.g. 0,1,2")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep_bess)

    p = sub.add_parser("train", help="train the degradation network")
    p.add_argument("--samples", type=int, default=10000)
    p.add_argument("--hidden", default="8,8")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=TrainConfig.restarts)
    p.add_argument("--rmse-target", type=float,
                   default=TrainConfig.rmse_target_fraction,
                   help="held-out RMSE target as a fraction of the mean label")
    p.add_argument("--out", required=True, help="weight file to write")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("verify", help="audit a schedule and recompute costs")
    p.add_argument("--case", required=True)
    p.add_argument("--net", required=True)
    p.add_argument("--schedule", required=True, help="schedule.csv to check")
    p.add_argument("--costs", help="costs.json for the parity check "
                                   "(default: next to the schedule)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("export-lp", help="write the model in LP text format")
    p.add_argument("--case", required=True)
    p.add_argument("--net", help="embed this network (degradation-aware model)")
    p.add_argument("--out", required=True, help="LP file to write")
    p.set_defaults(func=cmd_export_lp)

    p = sub.add_parser("economics", help="storage lifetime and benefit report")
    _add_solve_args(p)
    p.add_argument("--net", required=True)
    p.add_argument("--cap-years", type=float,
                   default=ex.DEFAULT_LIFETIME_CAP_YEARS,
                   help="lifetime cap for idle storage")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_economics)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
