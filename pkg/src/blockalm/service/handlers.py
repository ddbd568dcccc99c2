"""Service-layer handlers shared by the HTTP app and the CLI.

Each handler takes a request model and returns a response model; transport
concerns (HTTP status codes, exit codes) stay with the callers.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Optional, Tuple

from ..alm import AlmConfig, AlmResult, SolveTrace, alm_solve, bounds_and_gaps
from ..bcd import BcdConfig
from ..model import (
    Assignment,
    BlockProblem,
    brute_force_optimum,
    check_assumptions,
    cost_value,
    instance_document,
    parse_instance,
    verify_assignment,
)
from ..numeric import as_fraction, format_number, safe_float
from ..oracle import default_oracles
from ..ttp import build_instance, generate_random, parse_ttp_spec
from .schemas import (
    BlockAssumptions,
    BruteRequest,
    BruteResponse,
    CheckRequest,
    CheckResponse,
    GenerateRandomRequest,
    GenerateResponse,
    GenerateTtpRequest,
    SolveOptions,
    SolveRequest,
    SolveResponse,
    TraceRowModel,
)

MODE_MAP = {
    "classical": "classical_linearized",
    "classical-exact": "classical_exact",
    "prox": "prox_linear",
}


def resolve_configs(problem: BlockProblem, options: SolveOptions
                    ) -> Tuple[BcdConfig, AlmConfig, Fraction]:
    """Map CLI/service options onto solver configs, with per-family defaults."""
    if options.mode not in MODE_MAP:
        raise ValueError(f"unknown mode {options.mode!r}")
    is_ttp = problem.meta.get("generator") == "ttp"
    sigma = as_fraction(options.sigma) if options.sigma is not None else (
        Fraction(6, 5) if is_ttp else Fraction(2)
    )
    rho0 = as_fraction(options.rho0) if options.rho0 is not None else (
        Fraction(20) if is_ttp else Fraction(1)
    )
    tau = None
    if options.tau is not None and options.tau != "auto":
        tau = as_fraction(options.tau)
    bcd_cfg = BcdConfig(
        update_kind=MODE_MAP[options.mode],
        tau=tau,
        t_max=options.tmax,
    )
    alm_cfg = AlmConfig(
        k_max=options.kmax,
        penalty_mode=options.penalty,
        sigma=sigma,
        beta=as_fraction(options.beta),
        time_limit_s=options.time_limit_s,
        ref_optimum=(
            as_fraction(options.ref_optimum)
            if options.ref_optimum is not None else None
        ),
        gap_tolerance=options.gap_tolerance,
    )
    return bcd_cfg, alm_cfg, rho0


def _trace_models(trace: SolveTrace) -> list:
    rows = []
    for row in trace.rows:
        rows.append(TraceRowModel(
            k=row.k,
            rho=safe_float(row.rho),
            lambda_norm=row.lambda_norm,
            L=safe_float(row.l_star),
            lb=None if row.lr_bound is None else safe_float(row.lr_bound),
            incumbent=(
                None if row.incumbent is None else safe_float(row.incumbent)
            ),
            viol=row.violation,
            gap1=row.gap1,
            gap2=row.gap2,
            ms=row.ms,
        ))
    return rows


def solve_handler(request: SolveRequest) -> SolveResponse:
    problem = parse_instance(request.instance)
    bcd_cfg, alm_cfg, rho0 = resolve_configs(problem, request.options)
    oracles = default_oracles(problem)
    result: AlmResult = alm_solve(
        problem, oracles=oracles, bcd_cfg=bcd_cfg, alm_cfg=alm_cfg, rho0=rho0,
    )
    lam = result.dual.lam
    lr_lb, gap1, gap2 = bounds_and_gaps(
        problem, result.incumbent, lam, oracles,
        ref_optimum=alm_cfg.ref_optimum,
    )
    response = SolveResponse(
        feasible=result.incumbent is not None,
        value=(None if result.value is None else str(format_number(result.value))),
        value_float=(None if result.value is None else safe_float(result.value)),
        lr_bound=str(format_number(lr_lb)),
        lr_bound_float=safe_float(lr_lb),
        gap1=gap1,
        gap2=gap2,
        iterations=result.iterations,
        stop_reason=result.stop_reason,
    )
    if request.include_solution and result.incumbent is not None:
        response.solution = [list(p) for p in result.incumbent.parts]
    if request.include_trace:
        response.trace = _trace_models(result.trace)
        response.trace_csv = result.trace.to_csv()
        response.trace_json = result.trace.to_json()
    return response


def brute_handler(request: BruteRequest) -> BruteResponse:
    problem = parse_instance(request.instance)
    value, assignment = brute_force_optimum(problem, cap=request.cap)
    return BruteResponse(
        value=str(format_number(value)),
        value_float=safe_float(value),
        solution=[list(p) for p in assignment.parts],
    )


def check_handler(request: CheckRequest) -> CheckResponse:
    problem = parse_instance(request.instance)
    if request.solution is None:
        report = check_assumptions(problem)
        return CheckResponse(
            valid=True,
            zero_one_coupling=report.zero_one_coupling,
            cost_condition=report.cost_condition,
            linearization_exact=report.linearization_exact,
            blocks=[
                BlockAssumptions(cost_support_ok=s, cap_subset_ok=c)
                for s, c in zip(report.cost_support_ok, report.cap_subset_ok)
            ],
        )
    assignment = Assignment.of(request.solution)
    feas = verify_assignment(problem, assignment)
    value = cost_value(problem, assignment)
    matches: Optional[bool] = None
    if request.expected_value is not None:
        matches = as_fraction(request.expected_value) == value
    return CheckResponse(
        valid=True,
        feasible=feas.ok,
        violated_rows=list(feas.violated_rows),
        blocks_ok=list(feas.blocks_ok),
        value=str(format_number(value)),
        value_matches=matches,
    )


def generate_ttp_handler(request: GenerateTtpRequest) -> GenerateResponse:
    spec = parse_ttp_spec(request.spec)
    problem = build_instance(spec)
    return GenerateResponse(instance=instance_document(problem))


def generate_random_handler(request: GenerateRandomRequest) -> GenerateResponse:
    problem = generate_random(
        seed=request.seed, p=request.p, m=request.m,
        n_j=(request.n_j if isinstance(request.n_j, int) else list(request.n_j)),
        density=request.density,
        assumption_constrained=request.assumption_constrained,
    )
    return GenerateResponse(instance=instance_document(problem))
