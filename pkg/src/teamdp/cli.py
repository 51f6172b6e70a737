"""Command-line front end.

Commands: validate, solve, brute, reduce, induce, check-measure,
case {wd, wg, pomdp}.  Exit codes: 0 success, 1 domain failure (invalid
spec, failed membership, suboptimality), 2 input error (unreadable or
malformed file, shape mismatch), 3 resource cap exceeded.

Reports are JSON; sweep outputs are CSV with columns
parameter, optimum, baseline, gap.  Value and policy fields are identical
across worker counts (TEAMDP_THREADS); timing fields are not part of that
contract.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time

import numpy as np

from . import cases, fileio
from ._parallel import worker_count
from .errors import (
    AbsoluteContinuityError,
    CapExceededError,
    ShapeMismatchError,
    SpecFormatError,
    TeamDpError,
)
from .model import DeterministicPolicy, TeamSpec, expected_cost, validate_team
from .oracle import brute_force, sample_randomized_policy
from .reduction import (
    ReducedStaticTeam,
    reduced_expected_cost,
    static_reduce,
)
from .solver import solve_exact, stagewise_iterate, verify_stagewise
from .strategic import induce_measure, validate_la, validate_lr

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_INPUT = 2
EXIT_CAP = 3


def _digest(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _policy_labels(spec, policy):
    """Per-DM action labels, one per measurement value, JSON-friendly."""
    out = []
    for dm, table in zip(spec.dms, policy.per_dm):
        out.append([fileio._label_out(dm.u_space.labels[int(u)]) for u in table])
    return out


def _emit_report(report, out_path):
    text = json.dumps(report, indent=1)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)


def _write_csv(path, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["parameter", "optimum", "baseline", "gap"])
        for row in rows:
            writer.writerow(list(row))


def _load_team(path):
    obj = fileio.load(path)
    if isinstance(obj, ReducedStaticTeam):
        from .reduction import as_team_spec

        return as_team_spec(obj)
    if not isinstance(obj, TeamSpec):
        raise SpecFormatError(f"{path}: expected a team document")
    return obj


def cmd_validate(args):
    spec = _load_team(args.path)
    report = validate_team(spec)
    for problem in report.problems:
        print(problem)
    if report.ok:
        print("valid")
        return EXIT_OK
    return EXIT_DOMAIN


def cmd_solve(args):
    spec = _load_team(args.path)
    start = time.perf_counter()
    if args.algorithm == "exact":
        result = solve_exact(spec)
        diagnostics = {
            "reachable_counts": list(result.reachable_counts),
            "dedup_hits": result.dedup_hits,
        }
    else:
        result = stagewise_iterate(spec)
        diagnostics = {"sweep_values": list(result.sweep_values)}
    stagewise = verify_stagewise(spec, result.policy)
    diagnostics["per_stage_gap"] = list(stagewise.per_stage_gap)
    diagnostics["max_gap"] = stagewise.max_gap
    report = {
        "command": ["solve", args.path, "--algorithm", args.algorithm],
        "input_digest": _digest(args.path),
        "seed": args.seed,
        "value": result.value,
        "policy": _policy_labels(spec, result.policy),
        "diagnostics": diagnostics,
        "workers": worker_count(),
        "wall_clock": time.perf_counter() - start,
    }
    if args.check_oracle:
        oracle = brute_force(spec)
        report["oracle_value"] = oracle.value
        report["oracle_abs_diff"] = abs(oracle.value - result.value)
        if report["oracle_abs_diff"] > 1e-9:
            _emit_report(report, args.out)
            return EXIT_DOMAIN
    _emit_report(report, args.out)
    return EXIT_OK


def cmd_brute(args):
    spec = _load_team(args.path)
    start = time.perf_counter()
    result = brute_force(spec)
    report = {
        "command": ["brute", args.path],
        "input_digest": _digest(args.path),
        "value": result.value,
        "policy": _policy_labels(spec, result.policy),
        "diagnostics": {"policies_evaluated": result.policies_evaluated},
        "workers": worker_count(),
        "wall_clock": time.perf_counter() - start,
    }
    _emit_report(report, args.out)
    return EXIT_OK


def cmd_reduce(args):
    spec = _load_team(args.path)
    reduced = static_reduce(spec)
    rng = np.random.default_rng(args.seed)
    max_gap = 0.0
    for _ in range(args.probe):
        policy = sample_randomized_policy(spec, rng)
        gap = abs(expected_cost(spec, policy) - reduced_expected_cost(reduced, policy))
        max_gap = max(max_gap, gap)
    if args.out:
        fileio.save(args.out, reduced)
    report = {
        "command": ["reduce", args.path],
        "input_digest": _digest(args.path),
        "seed": args.seed,
        "probe_policies": args.probe,
        "max_discrepancy": max_gap,
        "workers": worker_count(),
    }
    print(json.dumps(report, indent=1))
    return EXIT_OK


def cmd_induce(args):
    spec = _load_team(args.team)
    policy = fileio.load(args.policy)
    measure = induce_measure(spec, policy)
    fileio.save(args.out, measure)
    print(f"wrote measure to {args.out}")
    return EXIT_OK


def cmd_check_measure(args):
    spec = _load_team(args.team)
    measure = fileio.load(args.measure)
    check = validate_la if args.cls == "LA" else validate_lr
    report = check(measure, spec, tol=args.tol)
    out = {
        "command": ["check-measure", args.team, args.measure, "--class", args.cls],
        "passed": report.passed,
        "kernel_gap": report.kernel_gap,
        "ci_gap": report.ci_gap,
        "prior_gap": report.prior_gap,
        "determinism_gap": report.determinism_gap,
        "witnesses": [list(w[:2]) + [list(w[2])] for w in report.witnesses],
    }
    print(json.dumps(out, indent=1))
    return EXIT_OK if report.passed else EXIT_DOMAIN


def cmd_case_wd(args):
    eps_list = [x for x in args.eps.split(",") if x]
    rows = []
    for eps_text in eps_list:
        cfg = cases.discrete_config(args.k, eps_text)
        spec = cases.build_discrete_witsenhausen(cfg)
        result = solve_exact(spec)
        baseline = args.k * float(cfg.eps) ** 2
        rows.append((eps_text, result.value, baseline, result.value - baseline))
    if args.out_csv:
        _write_csv(args.out_csv, rows)
    report = {
        "command": ["case", "wd", "--k", args.k, "--eps", args.eps],
        "rows": [list(r) for r in rows],
        "workers": worker_count(),
    }
    _emit_report(report, args.out)
    return EXIT_OK


def cmd_case_wg(args):
    cfg = cases.WitsenhausenGaussianConfig(
        k=args.k, sigma=args.sigma, bins=args.bins, trunc=args.trunc
    )
    reduced = cases.build_gaussian_witsenhausen(cfg)
    baseline = cases.best_affine_baseline(args.k, args.sigma, reduced=reduced)
    from .reduction import as_team_spec

    spec = as_team_spec(reduced)
    init = cases.quantized_affine_policy(reduced, baseline.a, baseline.b)
    result = stagewise_iterate(spec, init=init)
    gap = result.value - baseline.quantized_value
    rows = [(args.k, result.value, baseline.quantized_value, gap)]
    if args.out_csv:
        _write_csv(args.out_csv, rows)
    report = {
        "command": ["case", "wg", "--k", args.k, "--sigma", args.sigma,
                    "--bins", args.bins, "--trunc", args.trunc],
        "value": result.value,
        "affine": {
            "a": baseline.a,
            "b": baseline.b,
            "continuous_value": baseline.continuous_value,
            "quantized_value": baseline.quantized_value,
        },
        "sweep_values": list(result.sweep_values),
        "workers": worker_count(),
    }
    _emit_report(report, args.out)
    return EXIT_OK if gap <= 1e-9 else EXIT_DOMAIN


def cmd_case_pomdp(args):
    pomdp = fileio.load(args.file)
    if not isinstance(pomdp, cases.PomdpSpec):
        raise SpecFormatError(f"{args.file}: expected a pomdp document")
    if args.horizon is not None:
        pomdp = cases.PomdpSpec(
            states=pomdp.states,
            observations=pomdp.observations,
            actions=pomdp.actions,
            initial=pomdp.initial,
            transition=pomdp.transition,
            observation=pomdp.observation,
            stage_cost=pomdp.stage_cost,
            horizon=args.horizon,
        )
    spec = cases.build_pomdp_team(pomdp)
    team_value = solve_exact(spec).value
    belief_value = cases.belief_value_iteration(pomdp)
    diff = abs(team_value - belief_value)
    rows = [(pomdp.horizon, team_value, belief_value, team_value - belief_value)]
    if args.out_csv:
        _write_csv(args.out_csv, rows)
    report = {
        "command": ["case", "pomdp", "--file", args.file,
                    "--horizon", pomdp.horizon],
        "team_value": team_value,
        "belief_value": belief_value,
        "abs_diff": diff,
        "workers": worker_count(),
    }
    _emit_report(report, args.out)
    return EXIT_OK if diff <= 1e-9 else EXIT_DOMAIN


def build_parser():
    parser = argparse.ArgumentParser(
        prog="teamdp",
        description="Exact solvers and validators for finite sequential teams.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a team file's invariants")
    p.add_argument("path")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("solve", help="solve a team file")
    p.add_argument("path")
    p.add_argument("--algorithm", choices=("exact", "stagewise"), default="exact")
    p.add_argument("--check-oracle", action="store_true")
    p.add_argument("--out")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("brute", help="exhaustive policy search")
    p.add_argument("path")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_brute)

    p = sub.add_parser("reduce", help="static reduction with equivalence probes")
    p.add_argument("path")
    p.add_argument("--out")
    p.add_argument("--probe", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_reduce)

    p = sub.add_parser("induce", help="induce the strategic measure of a policy")
    p.add_argument("team")
    p.add_argument("policy")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_induce)

    p = sub.add_parser("check-measure", help="strategic-measure membership test")
    p.add_argument("team")
    p.add_argument("measure")
    p.add_argument("--class", dest="cls", choices=("LA", "LR"), default="LR")
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(fn=cmd_check_measure)

    p = sub.add_parser("case", help="built-in case studies")
    case_sub = p.add_subparsers(dest="case", required=True)

    c = case_sub.add_parser("wd", help="discrete two-point counterexample sweep")
    c.add_argument("--k", type=float, default=1.0)
    c.add_argument("--eps", default="0.5,0.2,0.1,0.05")
    c.add_argument("--out")
    c.add_argument("--out-csv")
    c.set_defaults(fn=cmd_case_wd)

    c = case_sub.add_parser("wg", help="Gaussian variant with affine baseline")
    c.add_argument("--k", type=float, default=0.2)
    c.add_argument("--sigma", type=float, default=5.0)
    c.add_argument("--bins", type=int, default=21)
    c.add_argument("--trunc", type=float, default=3.0)
    c.add_argument("--out")
    c.add_argument("--out-csv")
    c.set_defaults(fn=cmd_case_wg)

    c = case_sub.add_parser("pomdp", help="POMDP encoding vs belief recursion")
    c.add_argument("--file", required=True)
    c.add_argument("--horizon", type=int)
    c.add_argument("--out")
    c.add_argument("--out-csv")
    c.set_defaults(fn=cmd_case_pomdp)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SpecFormatError as exc:
        where = ""
        if exc.lineno is not None:
            where = f" (line {exc.lineno}, column {exc.colno})"
        print(f"input error: {exc}{where}", file=sys.stderr)
        return EXIT_INPUT
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ShapeMismatchError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except CapExceededError as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_CAP
    except AbsoluteContinuityError as exc:
        print(f"domain failure: {exc}", file=sys.stderr)
        for cell in exc.failures[:20]:
            print(f"  uncovered cell: {cell}", file=sys.stderr)
        return EXIT_DOMAIN
    except TeamDpError as exc:
        print(f"domain failure: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
