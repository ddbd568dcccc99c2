"""Command-line front end.

Thin client over the service-layer handlers: each subcommand builds the
corresponding request model, runs the shared handler in process and formats
the result. Exit codes: 0 success, 2 infeasible at exit (or a failed check),
1 usage or validation errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from .model import (
    EnumerationCapError,
    InfeasibleError,
    InstanceError,
)
from .service import handlers
from .service.schemas import (
    BruteRequest,
    CheckRequest,
    GenerateRandomRequest,
    GenerateTtpRequest,
    SolveOptions,
    SolveRequest,
)

log = logging.getLogger("blockalm")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="blockalm",
        description="Augmented Lagrangian solver for block-structured 0/1 programs",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="solve an instance file")
    solve.add_argument("instance", help="instance JSON path")
    solve.add_argument("--mode", default="classical",
                       choices=["classical", "classical-exact", "prox"])
    solve.add_argument("--tau", default=None,
                       help="prox step size, a number or 'auto'")
    solve.add_argument("--penalty", default="geometric",
                       choices=["geometric", "subgradient"])
    solve.add_argument("--sigma", default=None,
                       help="geometric penalty growth factor")
    solve.add_argument("--beta", default="1", help="dual step length scale")
    solve.add_argument("--rho0", default=None, help="initial penalty")
    solve.add_argument("--kmax", type=int, default=500)
    solve.add_argument("--tmax", type=int, default=100)
    solve.add_argument("--seed", type=int, default=0,
                       help="kept for reproducibility bookkeeping")
    solve.add_argument("--time-limit-s", type=float, default=None)
    solve.add_argument("--trace", default=None,
                       help="write trace CSV here (and a .json sibling)")
    solve.add_argument("--solution", default=None,
                       help="write the incumbent as a solution JSON file")
    solve.add_argument("--ref-optimum", default=None,
                       help="reference optimum enabling gap1")
    solve.add_argument("--gap-tol", type=float, default=0.0)

    brute = sub.add_parser("brute", help="exact optimum by enumeration")
    brute.add_argument("instance")
    brute.add_argument("--cap", type=int, default=10**6)

    check = sub.add_parser(
        "check",
        help="verify a solution file, or validate an instance and report "
             "its structural assumptions",
    )
    check.add_argument("path", help="solution JSON or instance JSON")
    check.add_argument("--instance", default=None,
                       help="override the instance referenced by a solution file")

    gen_ttp = sub.add_parser("gen-ttp", help="build a timetabling instance")
    gen_ttp.add_argument("spec", help="timetable description JSON")
    gen_ttp.add_argument("--out", required=True, help="instance output path")

    gen_rand = sub.add_parser("gen-random", help="build a random instance")
    gen_rand.add_argument("--out", required=True)
    gen_rand.add_argument("--seed", type=int, default=0)
    gen_rand.add_argument("--p", type=int, default=2)
    gen_rand.add_argument("--m", type=int, default=2)
    gen_rand.add_argument("--n-j", type=int, default=3)
    gen_rand.add_argument("--density", type=float, default=0.4)
    gen_rand.add_argument("--assumption-constrained", action="store_true")
    return parser


def _load_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise InstanceError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{path} is not valid JSON: {exc}") from None


def _cmd_solve(args) -> int:
    doc = _load_json(args.instance)
    request = SolveRequest(
        instance=doc,
        options=SolveOptions(
            mode=args.mode,
            tau=args.tau,
            penalty=args.penalty,
            sigma=args.sigma,
            beta=args.beta,
            rho0=args.rho0,
            kmax=args.kmax,
            tmax=args.tmax,
            time_limit_s=args.time_limit_s,
            ref_optimum=args.ref_optimum,
            gap_tolerance=args.gap_tol,
            seed=args.seed,
        ),
        include_trace=True,
        include_solution=True,
    )
    response = handlers.solve_handler(request)
    print(f"value: {response.value if response.value is not None else 'none'}")
    print(f"feasible: {'yes' if response.feasible else 'no'}")
    print(f"lr_lower_bound: {response.lr_bound}")
    print(f"gap1: {response.gap1 if response.gap1 is not None else '-'}")
    print(f"gap2: {response.gap2 if response.gap2 is not None else '-'}")
    print(f"iterations: {response.iterations} (stop: {response.stop_reason})")
    if args.trace:
        trace_path = Path(args.trace)
        trace_path.write_text(response.trace_csv or "")
        trace_path.with_suffix(".json").write_text(response.trace_json or "")
        log.info("trace written to %s", trace_path)
    if args.solution:
        if response.solution is None:
            log.warning("no feasible solution to write")
        else:
            payload = {
                "instance": str(Path(args.instance).resolve()),
                "value": response.value,
                "value_float": response.value_float,
                "feasible": response.feasible,
                "x": response.solution,
            }
            Path(args.solution).write_text(json.dumps(payload, indent=1))
    return EXIT_OK if response.feasible else EXIT_INFEASIBLE


def _cmd_brute(args) -> int:
    doc = _load_json(args.instance)
    response = handlers.brute_handler(BruteRequest(instance=doc, cap=args.cap))
    print(f"value: {response.value}")
    print(f"solution: {response.solution}")
    return EXIT_OK


def _cmd_check(args) -> int:
    doc = _load_json(args.path)
    if "blocks" in doc:
        response = handlers.check_handler(CheckRequest(instance=doc))
        print("instance: valid")
        print(f"zero_one_coupling: {response.zero_one_coupling}")
        print(f"cost_condition: {response.cost_condition}")
        print(f"linearization_exact: {response.linearization_exact}")
        for j, blk in enumerate(response.blocks or []):
            cap = blk.cap_subset_ok
            print(f"block {j}: cost_support_ok={blk.cost_support_ok} "
                  f"cap_subset_ok={'unverified' if cap is None else cap}")
        return EXIT_OK
    instance_path = args.instance or doc.get("instance")
    if not instance_path:
        raise InstanceError(
            "solution file does not reference an instance; pass --instance"
        )
    instance_doc = _load_json(instance_path)
    response = handlers.check_handler(CheckRequest(
        instance=instance_doc,
        solution=doc.get("x"),
        expected_value=doc.get("value"),
    ))
    print(f"feasible: {'yes' if response.feasible else 'no'}")
    if response.violated_rows:
        print(f"violated_rows: {response.violated_rows}")
    print(f"value: {response.value}")
    if response.value_matches is not None:
        print(f"value_matches: {'yes' if response.value_matches else 'no'}")
    ok = bool(response.feasible) and response.value_matches is not False
    return EXIT_OK if ok else EXIT_INFEASIBLE


def _cmd_gen_ttp(args) -> int:
    spec_doc = _load_json(args.spec)
    response = handlers.generate_ttp_handler(GenerateTtpRequest(spec=spec_doc))
    Path(args.out).write_text(json.dumps(response.instance, indent=1))
    problem_meta = response.instance.get("meta", {})
    print(f"instance written to {args.out} "
          f"(m={response.instance['m']}, blocks={len(response.instance['blocks'])}, "
          f"mode={problem_meta.get('profit_mode')})")
    return EXIT_OK


def _cmd_gen_random(args) -> int:
    response = handlers.generate_random_handler(GenerateRandomRequest(
        seed=args.seed, p=args.p, m=args.m, n_j=args.n_j,
        density=args.density,
        assumption_constrained=args.assumption_constrained,
    ))
    Path(args.out).write_text(json.dumps(response.instance, indent=1))
    print(f"instance written to {args.out}")
    return EXIT_OK


COMMANDS = {
    "solve": _cmd_solve,
    "brute": _cmd_brute,
    "check": _cmd_check,
    "gen-ttp": _cmd_gen_ttp,
    "gen-random": _cmd_gen_random,
}


def main(argv: Optional[List[str]] = None) -> int:
    level = os.environ.get("BLOCKALM_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (InstanceError, EnumerationCapError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
