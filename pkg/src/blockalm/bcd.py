"""Block coordinate descent on the penalized objective over the block sets.

One sweep updates blocks 1..p cyclically (Gauss-Seidel), each by one of
three rules: the proximal-linear step, the linearized classical step, or the
exact classical step by enumeration. The loop stops at the first sweep that
returns the identical assignment, which is well defined because every oracle
breaks ties lexicographically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple

from .alfunc import (
    DualState,
    ResidualCache,
    block_gradient,
    full_gradient,
    lipschitz_kappa,
    residual,
)
from .model import (
    Assignment,
    AssumptionReport,
    BlockProblem,
    check_assumptions,
    DEFAULT_BLOCK_CAP,
)
from .numeric import HALF, ZERO, dot, norm_sq, pos_part, safe_float
from .oracle import BlockOracle, default_oracles

UpdateHook = Callable[[int, int, Tuple[int, ...]], None]


@dataclass
class BcdConfig:
    update_kind: str = "prox_linear"  # prox_linear | classical_linearized | classical_exact
    tau: Optional[Fraction] = None  # None means auto: 1/(2.01*kappa)
    t_max: int = 100
    assume_a31: bool = False

    def __post_init__(self):
        kinds = ("prox_linear", "classical_linearized", "classical_exact")
        if self.update_kind not in kinds:
            raise ValueError(f"update_kind must be one of {kinds}")
        if self.tau is not None and self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.t_max < 1:
            raise ValueError("t_max must be at least 1")


@dataclass
class BcdResult:
    assignment: Assignment
    l_values: List[Fraction] = field(default_factory=list)
    termination: str = "t_max"  # fixed_point | t_max
    sweeps: int = 0
    heuristic: bool = False
    tau: Optional[Fraction] = None


def auto_tau(problem: BlockProblem, rho: Fraction) -> Fraction:
    """Step size strictly inside the convergence regime: 1/(2.01*kappa)."""
    kappa = lipschitz_kappa(problem, rho)
    if kappa <= 0:
        return Fraction(1)
    return Fraction(1) / Fraction(2.01 * kappa)


def prox_linear_step(problem: BlockProblem, assignment: Assignment,
                     dual: DualState, j: int, tau: Fraction,
                     oracle: Optional[BlockOracle] = None,
                     resid: Optional[Sequence[Fraction]] = None
                     ) -> Tuple[int, ...]:
    """Linear-minimization step on tau*g_j(x) + 1/2 - x_j."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    if oracle is None:
        oracle = default_oracles(problem)[j]
    g = block_gradient(problem, assignment, dual, j, resid=resid)
    x_j = assignment.parts[j]
    score = [tau * gi + HALF - xi for gi, xi in zip(g, x_j)]
    return oracle.minimize(score).minimizer


def _linearized_score(problem: BlockProblem, dual: DualState, j: int,
                      others_sum: Sequence[Fraction]) -> List[Fraction]:
    block = problem.blocks[j]
    shifted = [s - HALF for s in others_sum]
    weights = [
        li + dual.rho * pi for li, pi in zip(dual.lam, pos_part(shifted))
    ]
    penal = block.coupling.rmatvec(weights)
    return [c + v for c, v in zip(block.costs, penal)]


def classical_step_linearized(problem: BlockProblem, assignment: Assignment,
                              dual: DualState, j: int,
                              oracle: Optional[BlockOracle] = None,
                              others_sum: Optional[Sequence[Fraction]] = None
                              ) -> Tuple[int, ...]:
    """Linearized block minimization of L; exact under the unit-row structure.

    Uses the score c_j + A_j^T lambda + rho A_j^T (sum_{l!=j} A_l x_l - 1/2)_+.
    Without the structural assumptions this is a plain linear approximation.
    """
    if oracle is None:
        oracle = default_oracles(problem)[j]
    if others_sum is None:
        rest = Assignment(tuple(
            p if l != j else (0,) * len(p)
            for l, p in enumerate(assignment.parts)
        ))
        others_sum = [r + b for r, b in zip(residual(problem, rest), problem.rhs)]
    score = _linearized_score(problem, dual, j, others_sum)
    return oracle.minimize(score).minimizer


def classical_step_exact(problem: BlockProblem, assignment: Assignment,
                         dual: DualState, j: int,
                         oracle: Optional[BlockOracle] = None,
                         others_sum: Optional[Sequence[Fraction]] = None,
                         cap: int = DEFAULT_BLOCK_CAP) -> Tuple[int, ...]:
    """Exact argmin of L over block j by enumeration, lex tie-break."""
    if oracle is None:
        oracle = default_oracles(problem, cap)[j]
    block = problem.blocks[j]
    if others_sum is None:
        rest = Assignment(tuple(
            p if l != j else (0,) * len(p)
            for l, p in enumerate(assignment.parts)
        ))
        others_sum = [r + b for r, b in zip(residual(problem, rest), problem.rhs)]
    base = [s - b for s, b in zip(others_sum, problem.rhs)]
    best_key: Optional[Tuple[Fraction, Tuple[int, ...]]] = None
    best_point: Optional[Tuple[int, ...]] = None
    for point in oracle.points():
        ax = block.coupling.matvec(point)
        r = [bi + ai for bi, ai in zip(base, ax)]
        value = (
            dot(block.costs, point)
            + dot(dual.lam, r)
            + dual.rho * norm_sq(pos_part(r)) / 2
        )
        key = (value, point)
        if best_key is None or key < best_key:
            best_key, best_point = key, point
    if best_point is None:
        raise ValueError(f"block {j} has no feasible points")
    return best_point


def bcd_solve(problem: BlockProblem, x0: Assignment, dual: DualState,
              cfg: BcdConfig,
              oracles: Optional[Sequence[BlockOracle]] = None,
              assumptions: Optional[AssumptionReport] = None,
              on_update: Optional[UpdateHook] = None) -> BcdResult:
    """Sweep blocks cyclically until a fixed point or t_max sweeps.

    ``on_update(sweep, j, new_x_j)`` fires after every block update; the
    outer loop uses it to feed the refinement pool.
    """
    if oracles is None:
        oracles = default_oracles(problem)
    heuristic = False
    check_unit_rows = False
    if cfg.update_kind == "classical_linearized":
        if cfg.assume_a31:
            check_unit_rows = False
        else:
            if assumptions is None:
                assumptions = check_assumptions(problem)
            if assumptions.linearization_exact:
                check_unit_rows = True
            else:
                heuristic = True
    tau = cfg.tau
    if cfg.update_kind == "prox_linear" and tau is None:
        tau = auto_tau(problem, dual.rho)

    cache = ResidualCache(problem, x0)
    l_values = [cache.al_value(dual)]
    sweeps = 0
    termination = "t_max"
    for sweep in range(cfg.t_max):
        changed = False
        for j in range(problem.num_blocks):
            if cfg.update_kind == "prox_linear":
                new_part = prox_linear_step(
                    problem, cache.assignment(), dual, j, tau,
                    oracle=oracles[j], resid=cache.values,
                )
            elif cfg.update_kind == "classical_linearized":
                new_part = classical_step_linearized(
                    problem, cache.assignment(), dual, j,
                    oracle=oracles[j],
                    others_sum=cache.others_plus_rhs_gap(j),
                )
                if check_unit_rows:
                    ax = problem.blocks[j].coupling.matvec(new_part)
                    if any(v > 1 for v in ax):
                        raise RuntimeError(
                            "linearized step left the unit-row region on a "
                            "verified instance; this is a bug"
                        )
            else:
                new_part = classical_step_exact(
                    problem, cache.assignment(), dual, j,
                    oracle=oracles[j],
                    others_sum=cache.others_plus_rhs_gap(j),
                )
            if new_part != cache.parts[j]:
                changed = True
            cache.update_block(j, new_part)
            if on_update is not None:
                on_update(sweep, j, new_part)
        sweeps += 1
        l_values.append(cache.al_value(dual))
        if not changed:
            termination = "fixed_point"
            break
    return BcdResult(
        assignment=cache.assignment(),
        l_values=l_values,
        termination=termination,
        sweeps=sweeps,
        heuristic=heuristic,
        tau=tau,
    )


def is_tau_stationary(problem: BlockProblem, assignment: Assignment,
                      dual: DualState, tau: Fraction,
                      oracles: Optional[Sequence[BlockOracle]] = None) -> bool:
    """Whether x is a fixed point of the prox-linear map at step size tau.

    Tested as argmin-set membership per block: the current block vector must
    attain the oracle minimum of tau*g(x) + 1/2 - x. A tied minimizer is
    stationary even when it is not the lexicographically smallest one.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    if oracles is None:
        oracles = default_oracles(problem)
    r = residual(problem, assignment)
    for j in range(problem.num_blocks):
        g = block_gradient(problem, assignment, dual, j, resid=r)
        x_j = assignment.parts[j]
        score = [tau * gi + HALF - xi for gi, xi in zip(g, x_j)]
        current = ZERO
        for s, xi in zip(score, x_j):
            if xi:
                current += s
        if current != oracles[j].minimize(score).value:
            return False
    return True


def is_blockwise_optimal(problem: BlockProblem, assignment: Assignment,
                         dual: DualState, cap: int = DEFAULT_BLOCK_CAP) -> bool:
    """No single-block swap strictly decreases L."""
    oracles = default_oracles(problem, cap)
    r = residual(problem, assignment)
    for j in range(problem.num_blocks):
        block = problem.blocks[j]
        ax = block.coupling.matvec(assignment.parts[j])
        base = [ri - ai for ri, ai in zip(r, ax)]
        current_key = None
        best: Optional[Fraction] = None
        for point in oracles[j].points():
            axp = block.coupling.matvec(point)
            rp = [bi + ai for bi, ai in zip(base, axp)]
            value = (
                dot(block.costs, point)
                + dot(dual.lam, rp)
                + dual.rho * norm_sq(pos_part(rp)) / 2
            )
            if point == assignment.parts[j]:
                current_key = value
            if best is None or value < best:
                best = value
        if current_key is None:
            raise ValueError(f"assignment block {j} not in its feasible set")
        if best < current_key:
            return False
    return True


def stuck_step_threshold(problem: BlockProblem, assignment: Assignment,
                         dual: DualState) -> Optional[Fraction]:
    """A certified tau below which the prox-linear sweep cannot move.

    Returns a rational tau with tau < 1/(2*||g(x)||), or None when g(x) = 0.
    """
    g = full_gradient(problem, assignment, dual)
    gsq = norm_sq(g)
    if gsq == 0:
        return None
    bound = Fraction(math.sqrt(safe_float(gsq))) * Fraction(105, 100)
    if bound <= 0:
        bound = Fraction(1, 10**9)
    while bound * bound < gsq:
        bound *= 2
    return Fraction(1) / (2 * bound * Fraction(101, 100))
