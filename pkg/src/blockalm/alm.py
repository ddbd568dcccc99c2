"""Outer dual-ascent loop: multiplier and penalty updates, bounds, trace.

Each outer iteration minimizes the penalized objective over the block sets
(warm-started block coordinate descent, or exact enumeration on small
instances), turns the iterate into a feasible candidate via the refinement
heuristics when needed, updates the incumbent, and then takes a projected
subgradient step on the multipliers. The penalty either follows the analyzed
subgradient rule or grows geometrically, which is what the experiments run.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

from .alfunc import (
    DualState,
    EnumeratedRelaxation,
    lr_dual_value,
    residual,
    violation,
)
from .bcd import BcdConfig, BcdResult, bcd_solve
from .model import (
    Assignment,
    AssumptionReport,
    BlockProblem,
    check_assumptions,
    cost_value,
    verify_assignment,
)
from .numeric import ZERO, dot, norm_sq, pos_part, safe_float
from .oracle import BlockOracle, default_oracles
from .refine import (
    ConflictGraph,
    RefinementInfeasible,
    SolutionPool,
    default_seeds,
    mis_pack,
    sweep,
)

STEP_NORM_FLOOR = 1e-12


@dataclass
class AlmConfig:
    k_max: int = 500
    penalty_mode: str = "geometric"  # geometric | subgradient
    sigma: Fraction = Fraction(6, 5)
    step_schedule: str = "constant"  # constant | decay
    beta: Fraction = Fraction(1)
    time_limit_s: Optional[float] = None
    feasibility_tolerance: Fraction = Fraction(0)
    ref_optimum: Optional[Fraction] = None
    gap_tolerance: float = 0.0
    stop_on_feasible: bool = True
    dual_stop_target: Optional[Fraction] = None
    inner_solver: str = "bcd"  # bcd | exact
    compute_lr_bound: bool = False
    upper_bound: Optional[Fraction] = None

    def __post_init__(self):
        if self.k_max < 0:
            raise ValueError("k_max must be nonnegative")
        if self.penalty_mode not in ("geometric", "subgradient"):
            raise ValueError("penalty_mode must be geometric or subgradient")
        if self.penalty_mode == "geometric" and self.sigma <= 1:
            raise ValueError("sigma must exceed 1")
        if self.step_schedule not in ("constant", "decay"):
            raise ValueError("step_schedule must be constant or decay")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.inner_solver not in ("bcd", "exact"):
            raise ValueError("inner_solver must be bcd or exact")


@dataclass
class TraceRow:
    k: int
    rho: Fraction
    lambda_norm: float
    l_star: Fraction
    lr_bound: Optional[Fraction]
    incumbent: Optional[Fraction]
    violation: float
    gap1: Optional[float]
    gap2: Optional[float]
    ms: int


@dataclass
class SolveTrace:
    rows: List[TraceRow] = field(default_factory=list)

    CSV_HEADER = ["k", "rho", "lambda_norm", "L", "lb", "incumbent", "viol",
                  "gap1", "gap2", "ms"]

    def _cells(self, row: TraceRow) -> List[str]:
        def num(x) -> str:
            if x is None:
                return ""
            if isinstance(x, Fraction):
                return repr(safe_float(x))
            if isinstance(x, float):
                return repr(x)
            return str(x)

        return [
            str(row.k), num(row.rho), num(row.lambda_norm), num(row.l_star),
            num(row.lr_bound), num(row.incumbent), num(row.violation),
            num(row.gap1), num(row.gap2), str(row.ms),
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.CSV_HEADER)
        for row in self.rows:
            writer.writerow(self._cells(row))
        return buf.getvalue()

    def to_json(self) -> str:
        rows = []
        for row in self.rows:
            cells = self._cells(row)
            rows.append({
                key: (None if cell == "" else
                      (int(cell) if key in ("k", "ms") else float(cell)))
                for key, cell in zip(self.CSV_HEADER, cells)
            })
        return json.dumps({"trace": rows}, indent=1)


@dataclass
class AlmResult:
    incumbent: Optional[Assignment]
    value: Optional[Fraction]
    trace: SolveTrace
    dual: DualState
    last_inner: Optional[Assignment]
    iterations: int
    stop_reason: str


def step_size(schedule: str, k: int, subgrad_norm: float,
              beta: Fraction = Fraction(1)) -> Fraction:
    """beta_k / ||d_g||, with a floor on the norm; exact dyadic result."""
    if subgrad_norm < 0:
        raise ValueError("subgradient norm must be nonnegative")
    if schedule == "constant":
        beta_k = float(beta)
    elif schedule == "decay":
        beta_k = float(beta) / math.sqrt(max(k, 1))
    else:
        raise ValueError("schedule must be constant or decay")
    alpha = beta_k / max(subgrad_norm, STEP_NORM_FLOOR)
    return Fraction(alpha)


def dual_update(problem: BlockProblem, dual: DualState, assignment: Assignment,
                alpha: Fraction, mode: str = "subgradient",
                sigma: Fraction = Fraction(6, 5)) -> DualState:
    """Projected subgradient step on lambda; penalty per the chosen rule."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    r = residual(problem, assignment)
    lam = tuple(
        max(li + alpha * ri, ZERO) for li, ri in zip(dual.lam, r)
    )
    if mode == "subgradient":
        rho = dual.rho + alpha * norm_sq(pos_part(r)) / 2
    elif mode == "geometric":
        rho = dual.rho * sigma
    else:
        raise ValueError("mode must be subgradient or geometric")
    return DualState(lam=lam, rho=rho)


def subgradient_norm(problem: BlockProblem, assignment: Assignment) -> float:
    """Norm of the stacked dual subgradient (residual, half squared pos part)."""
    r = residual(problem, assignment)
    s_rho = norm_sq(pos_part(r)) / 2
    return math.sqrt(safe_float(norm_sq(r) + s_rho * s_rho))


class PoolRefiner:
    """Default refinement hook: pool plus conflict graph, sweep and packing.

    Owns the mutable pool and graph for one solve. Returns the better of the
    two heuristics' outputs, or None if neither is feasible (negative rhs).
    """

    def __init__(self, problem: BlockProblem, capacity: int = 50):
        self.problem = problem
        self.pool = SolutionPool(problem, capacity=capacity)
        self.graph = ConflictGraph(problem)

    def observe(self, j: int, vector: Tuple[int, ...]) -> None:
        if any(vector):
            try:
                if self.pool.insert(j, vector):
                    self.graph.add_candidate(j, vector)
            except Exception:
                raise

    def __call__(self, bcd_assignment: Assignment) -> Optional[Assignment]:
        newest = [
            (j, part) for j, part in enumerate(bcd_assignment.parts)
            if any(part)
        ]
        candidates: List[Assignment] = []
        try:
            candidates.append(sweep(self.problem, self.pool))
        except RefinementInfeasible:
            pass
        try:
            seeds = default_seeds(self.graph, newest)
            candidates.append(mis_pack(self.problem, self.graph, seeds))
        except RefinementInfeasible:
            pass
        best = None
        best_value = None
        for cand in candidates:
            value = cost_value(self.problem, cand)
            if best_value is None or value < best_value:
                best, best_value = cand, value
        return best


RefineHook = Callable[[Assignment], Optional[Assignment]]


def alm_solve(problem: BlockProblem,
              oracles: Optional[Sequence[BlockOracle]] = None,
              bcd_cfg: Optional[BcdConfig] = None,
              alm_cfg: Optional[AlmConfig] = None,
              refine_hook: Optional[RefineHook] = None,
              x0: Optional[Assignment] = None,
              rho0: Fraction = Fraction(1),
              dual0: Optional[DualState] = None) -> AlmResult:
    """Run the full outer loop and return the incumbent plus its trace."""
    bcd_cfg = bcd_cfg or BcdConfig()
    alm_cfg = alm_cfg or AlmConfig()
    if oracles is None:
        oracles = default_oracles(problem)
    assumptions: Optional[AssumptionReport] = None
    if bcd_cfg.update_kind == "classical_linearized" and not bcd_cfg.assume_a31:
        assumptions = check_assumptions(problem)

    refiner: Optional[PoolRefiner] = None
    if refine_hook is None:
        refiner = PoolRefiner(problem)
        refine_hook = refiner

    relaxation: Optional[EnumeratedRelaxation] = None
    if alm_cfg.inner_solver == "exact":
        relaxation = EnumeratedRelaxation(problem)

    dual = dual0 or DualState.zeros(problem.num_rows, rho=rho0)
    x = x0 or Assignment.zeros(problem)
    incumbent: Optional[Assignment] = None
    incumbent_value: Optional[Fraction] = None
    trace = SolveTrace()
    start = time.perf_counter()
    stop_reason = "k_max"
    iterations = 0

    for k in range(alm_cfg.k_max):
        iter_start = time.perf_counter()
        if alm_cfg.inner_solver == "exact":
            l_star, x = relaxation.minimize(dual)
        else:
            def feed(sweep_idx: int, j: int, part: Tuple[int, ...],
                     _refiner=refiner) -> None:
                if _refiner is not None and any(part):
                    _refiner.observe(j, part)

            result: BcdResult = bcd_solve(
                problem, x, dual, bcd_cfg, oracles=oracles,
                assumptions=assumptions,
                on_update=feed if refiner is not None else None,
            )
            x = result.assignment
            l_star = result.l_values[-1]
        viol = violation(problem, x)
        feasible = viol.two_norm_sq <= alm_cfg.feasibility_tolerance

        if feasible:
            candidate: Optional[Assignment] = x
        else:
            if refiner is not None:
                for j, part in enumerate(x.parts):
                    if any(part):
                        refiner.observe(j, part)
            candidate = refine_hook(x)
        if candidate is not None:
            cand_value = cost_value(problem, candidate)
            report = verify_assignment(problem, candidate)
            if report.ok and (incumbent_value is None
                              or cand_value <= incumbent_value):
                incumbent, incumbent_value = candidate, cand_value

        gap1 = gap2 = None
        if incumbent_value is not None and alm_cfg.ref_optimum is not None:
            gap1 = _gap1(incumbent_value, alm_cfg.ref_optimum)
        if (incumbent_value is not None and alm_cfg.upper_bound is not None
                and incumbent_value != 0):
            gap2 = safe_float(
                (alm_cfg.upper_bound - incumbent_value) / incumbent_value
            )
        lr_bound = None
        if alm_cfg.compute_lr_bound:
            lr_bound = lr_dual_value(problem, list(dual.lam), oracles)
        elapsed_ms = int((time.perf_counter() - iter_start) * 1000)
        trace.rows.append(TraceRow(
            k=k,
            rho=dual.rho,
            lambda_norm=math.sqrt(safe_float(norm_sq(dual.lam))),
            l_star=l_star,
            lr_bound=lr_bound,
            incumbent=incumbent_value,
            violation=math.sqrt(safe_float(viol.two_norm_sq)),
            gap1=gap1,
            gap2=gap2,
            ms=elapsed_ms,
        ))
        iterations = k + 1

        if (alm_cfg.dual_stop_target is not None
                and l_star >= alm_cfg.dual_stop_target):
            stop_reason = "dual_target"
            break
        if alm_cfg.ref_optimum is not None:
            if (incumbent_value is not None and gap1 is not None
                    and gap1 <= alm_cfg.gap_tolerance):
                stop_reason = "gap"
                break
        elif alm_cfg.stop_on_feasible and feasible:
            stop_reason = "feasible"
            break
        if (alm_cfg.time_limit_s is not None
                and time.perf_counter() - start > alm_cfg.time_limit_s):
            stop_reason = "time_limit"
            break

        norm = subgradient_norm(problem, x)
        alpha = step_size(alm_cfg.step_schedule, k + 1, norm, alm_cfg.beta)
        dual = dual_update(problem, dual, x, alpha,
                           mode=alm_cfg.penalty_mode, sigma=alm_cfg.sigma)

    return AlmResult(
        incumbent=incumbent,
        value=incumbent_value,
        trace=trace,
        dual=dual,
        last_inner=x if alm_cfg.k_max > 0 and iterations > 0 else None,
        iterations=iterations,
        stop_reason=stop_reason if iterations > 0 else "k_max",
    )


def _gap1(value: Fraction, ref: Fraction) -> Optional[float]:
    if ref == 0:
        return None
    return abs(safe_float((value - ref) / abs(ref)))


def bounds_and_gaps(problem: BlockProblem,
                    incumbent: Optional[Assignment],
                    lam: Sequence[Fraction],
                    oracles: Sequence[BlockOracle],
                    ref_optimum: Optional[Fraction] = None,
                    upper_bound: Optional[Fraction] = None
                    ) -> Tuple[Fraction, Optional[float], Optional[float]]:
    """Relaxation lower bound at lam, plus the two gap conventions.

    gap1 = |f - f*| / |f*| against a reference optimum; gap2 = (UB - f)/f
    against an upper bound (the maximization convention after negation).
    Either gap is None when its reference is missing or its denominator
    vanishes.
    """
    lr_lb = lr_dual_value(problem, list(lam), oracles)
    gap1 = gap2 = None
    if incumbent is not None:
        f = cost_value(problem, incumbent)
        if ref_optimum is not None:
            gap1 = _gap1(f, ref_optimum)
        if upper_bound is not None and f != 0:
            gap2 = safe_float((upper_bound - f) / f)
    return lr_lb, gap1, gap2
