"""Augmented Lagrangian function evaluations and dual quantities.

The penalized objective is

    L(x, lambda, rho) = c^T x + lambda^T (A x - b) + (rho/2) ||(A x - b)_+||^2

with multipliers lambda >= 0 and penalty rho > 0. Everything here is a pure
function of immutable inputs; the one mutable helper, ResidualCache, is
owned by a single inner-loop worker and never shared.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from .model import (
    Assignment,
    BlockProblem,
    EnumerationCapError,
    block_point_lists,
    cost_value,
)
from .numeric import ZERO, dot, inf_norm, norm_sq, pos_part, safe_float
from .oracle import BlockOracle


@dataclass(frozen=True)
class DualState:
    """Multipliers and penalty. Validated on construction."""

    lam: Tuple[Fraction, ...]
    rho: Fraction

    def __post_init__(self):
        if any(v < 0 for v in self.lam):
            raise ValueError("multipliers must be nonnegative")
        if self.rho <= 0:
            raise ValueError("penalty must be positive")

    @classmethod
    def zeros(cls, m: int, rho: Fraction = Fraction(1)) -> "DualState":
        return cls(lam=(ZERO,) * m, rho=Fraction(rho))


@dataclass(frozen=True)
class Violation:
    residual: Tuple[Fraction, ...]
    positive_part: Tuple[Fraction, ...]
    inf_norm: Fraction
    two_norm_sq: Fraction

    @property
    def feasible(self) -> bool:
        return self.two_norm_sq == 0


def residual(problem: BlockProblem, assignment: Assignment) -> List[Fraction]:
    """A x - b."""
    out = [-v for v in problem.rhs]
    for block, part in zip(problem.blocks, assignment.parts):
        ax = block.coupling.matvec(part)
        for i, v in enumerate(ax):
            if v:
                out[i] += v
    return out


def violation(problem: BlockProblem, assignment: Assignment) -> Violation:
    r = residual(problem, assignment)
    pos = pos_part(r)
    return Violation(
        residual=tuple(r),
        positive_part=tuple(pos),
        inf_norm=inf_norm(pos),
        two_norm_sq=norm_sq(pos),
    )


def al_value(problem: BlockProblem, assignment: Assignment, dual: DualState,
             resid: Optional[Sequence[Fraction]] = None) -> Fraction:
    """L(x, lambda, rho); pass a precomputed residual to skip the matvec."""
    r = list(resid) if resid is not None else residual(problem, assignment)
    if len(dual.lam) != len(r):
        raise ValueError("dual state has wrong number of multipliers")
    return (
        cost_value(problem, assignment)
        + dot(dual.lam, r)
        + dual.rho * norm_sq(pos_part(r)) / 2
    )


def classical_al_value(problem: BlockProblem, assignment: Assignment,
                       dual: DualState) -> Fraction:
    """The textbook AL form, kept for contrast tests only."""
    r = residual(problem, assignment)
    if len(dual.lam) != len(r):
        raise ValueError("dual state has wrong number of multipliers")
    shifted = [ri + li / dual.rho for ri, li in zip(r, dual.lam)]
    return (
        cost_value(problem, assignment)
        + dual.rho * norm_sq(pos_part(shifted)) / 2
        - norm_sq(dual.lam) / (2 * dual.rho)
    )


def block_gradient(problem: BlockProblem, assignment: Assignment,
                   dual: DualState, j: int,
                   resid: Optional[Sequence[Fraction]] = None) -> List[Fraction]:
    """c_j + A_j^T lambda + rho A_j^T (A x - b)_+ at the supplied stacked x."""
    if not (0 <= j < problem.num_blocks):
        raise IndexError(f"block index {j} out of range")
    r = list(resid) if resid is not None else residual(problem, assignment)
    block = problem.blocks[j]
    weights = [li + dual.rho * pi for li, pi in zip(dual.lam, pos_part(r))]
    grad = block.coupling.rmatvec(weights)
    return [c + g for c, g in zip(block.costs, grad)]


def full_gradient(problem: BlockProblem, assignment: Assignment,
                  dual: DualState,
                  resid: Optional[Sequence[Fraction]] = None) -> List[Fraction]:
    r = list(resid) if resid is not None else residual(problem, assignment)
    out: List[Fraction] = []
    for j in range(problem.num_blocks):
        out.extend(block_gradient(problem, assignment, dual, j, resid=r))
    return out


def dual_subgradient(problem: BlockProblem, assignment: Assignment
                     ) -> Tuple[Tuple[Fraction, ...], Fraction]:
    """(A x - b, ||(A x - b)_+||^2 / 2), valid when x minimizes the relaxation."""
    r = residual(problem, assignment)
    return tuple(r), norm_sq(pos_part(r)) / 2


def lr_dual_value(problem: BlockProblem, lam: Sequence[Fraction],
                  oracles: Sequence[BlockOracle]) -> Fraction:
    """Plain Lagrangian-relaxation bound: block minima of (c_j + A_j^T lam)."""
    if any(v < 0 for v in lam):
        raise ValueError("multipliers must be nonnegative")
    if len(oracles) != problem.num_blocks:
        raise ValueError("one oracle per block required")
    total = -dot(problem.rhs, lam)
    for j, (block, oracle) in enumerate(zip(problem.blocks, oracles)):
        weights = [
            c + g for c, g in zip(block.costs, block.coupling.rmatvec(lam))
        ]
        try:
            answer = oracle.minimize(weights)
        except Exception as exc:
            raise RuntimeError(f"oracle for block {j} failed: {exc}") from exc
        total += answer.value
    return total


# ---------------------------------------------------------------------------
# Residual cache for the inner loop

REFRESH_EVERY = 100


class ResidualCache:
    """Running A x - b, patched when one block changes.

    A full recomputation every REFRESH_EVERY updates guards against drift;
    with exact rationals this is belt and braces, but it keeps the floating
    fast path honest if one is ever swapped in.
    """

    def __init__(self, problem: BlockProblem, assignment: Assignment):
        self.problem = problem
        self.parts: List[Tuple[int, ...]] = list(assignment.parts)
        self.values: List[Fraction] = residual(problem, assignment)
        self.cost: Fraction = cost_value(problem, assignment)
        self._updates = 0

    def assignment(self) -> Assignment:
        return Assignment(tuple(self.parts))

    def update_block(self, j: int, new_part: Tuple[int, ...]) -> None:
        old = self.parts[j]
        if new_part == old:
            return
        block = self.problem.blocks[j]
        for col, (ov, nv) in enumerate(zip(old, new_part)):
            delta = nv - ov
            if delta:
                if delta > 0:
                    self.cost += block.costs[col]
                else:
                    self.cost -= block.costs[col]
                for row, val in block.coupling.column(col):
                    self.values[row] += val * delta
        self.parts[j] = tuple(new_part)
        self._updates += 1
        if self._updates % REFRESH_EVERY == 0:
            self.values = residual(self.problem, self.assignment())
            self.cost = cost_value(self.problem, self.assignment())

    def others_plus_rhs_gap(self, j: int) -> List[Fraction]:
        """sum_{l != j} A_l x_l, derived from the cached residual."""
        block = self.problem.blocks[j]
        out = [r + b for r, b in zip(self.values, self.problem.rhs)]
        ax = block.coupling.matvec(self.parts[j])
        for i, v in enumerate(ax):
            if v:
                out[i] -= v
        return out

    def al_value(self, dual: DualState) -> Fraction:
        return (
            self.cost
            + dot(dual.lam, self.values)
            + dual.rho * norm_sq(pos_part(self.values)) / 2
        )


# ---------------------------------------------------------------------------
# Lipschitz constant of the gradient: kappa = rho * sigma_max(A)^2


def _block_float_columns(problem: BlockProblem) -> List[List[Tuple[int, float]]]:
    cols: List[List[Tuple[int, float]]] = []
    for block in problem.blocks:
        for j in range(block.dim):
            cols.append([(i, float(v)) for i, v in block.coupling.column(j)])
    return cols


def _power_iteration_sigma_sq(problem: BlockProblem, tol: float = 1e-10,
                              max_iter: int = 10000) -> float:
    """Largest eigenvalue of A^T A by power iteration, seeded with ones."""
    cols = _block_float_columns(problem)
    n = len(cols)
    m = problem.num_rows
    if n == 0 or all(not c for c in cols):
        return 0.0

    def ata(v: List[float]) -> List[float]:
        av = [0.0] * m
        for j, col in enumerate(cols):
            vj = v[j]
            if vj:
                for i, val in col:
                    av[i] += val * vj
        out = [0.0] * n
        for j, col in enumerate(cols):
            s = 0.0
            for i, val in col:
                s += val * av[i]
            out[j] = s
        return out

    def run(seed: List[float]) -> float:
        v = seed
        prev = 0.0
        for _ in range(max_iter):
            w = ata(v)
            norm = math.sqrt(sum(x * x for x in w))
            if norm == 0.0:
                return 0.0
            v = [x / norm for x in w]
            est = sum(x * y for x, y in zip(v, ata(v)))
            if prev and abs(est - prev) <= tol * abs(est):
                return est
            prev = est
        return prev

    est = run([1.0] * n)
    if est == 0.0:
        # ones can be orthogonal to the leading eigenspace; deterministic reseed
        est = run([1.0 + j / n for j in range(n)])
    return est


def lipschitz_kappa(problem: BlockProblem, rho: Fraction) -> float:
    """rho * sigma_max(A)^2 via power iteration (deterministic seed)."""
    if rho <= 0:
        raise ValueError("penalty must be positive")
    return float(rho) * _power_iteration_sigma_sq(problem)


def kappa_upper_bound(problem: BlockProblem, rho: Fraction) -> Fraction:
    """Certified rational upper bound on rho * sigma_max(A)^2.

    min of: Frobenius norm squared, ||A||_1 * ||A||_inf, and the largest
    absolute row sum of A^T A. All exact, so inequalities asserted with this
    bound are implied by the true-constant statements.
    """
    frob = ZERO
    col_sums: List[Fraction] = []
    row_sums = [ZERO] * problem.num_rows
    rows_entries: List[List[Tuple[int, Fraction]]] = [
        [] for _ in range(problem.num_rows)
    ]
    offset = 0
    for block in problem.blocks:
        for i, j, v in block.coupling.triplets:
            a = -v if v < 0 else v
            frob += v * v
            row_sums[i] += a
            rows_entries[i].append((offset + j, v))
        for j in range(block.dim):
            s = ZERO
            for _, v in block.coupling.column(j):
                s += -v if v < 0 else v
            col_sums.append(s)
        offset += block.dim
    one_norm = max(col_sums, default=ZERO)
    infty_norm = max(row_sums, default=ZERO)
    # max absolute row sum of A^T A: row j is sum_i A_ij * (row i of A)
    gram_bound = ZERO
    n = problem.total_cols
    accum: dict = {}
    for i in range(problem.num_rows):
        entries = rows_entries[i]
        for j, vij in entries:
            bucket = accum.setdefault(j, {})
            for k, vik in entries:
                bucket[k] = bucket.get(k, ZERO) + vij * vik
    for j, bucket in accum.items():
        s = ZERO
        for v in bucket.values():
            s += -v if v < 0 else v
        if s > gram_bound:
            gram_bound = s
    best = frob
    if one_norm * infty_norm < best:
        best = one_norm * infty_norm
    if 0 < gram_bound < best:
        best = gram_bound
    return rho * best


def kappa_lower_bound(problem: BlockProblem, rho: Fraction) -> Fraction:
    """Certified rational lower bound via an exact Rayleigh quotient.

    Runs float power iteration, then re-evaluates ||A v||^2 / ||v||^2 exactly
    at the (rationalized) iterate: a Rayleigh quotient never exceeds the top
    eigenvalue.
    """
    cols = _block_float_columns(problem)
    n = len(cols)
    if n == 0:
        return ZERO
    sigma_sq = _power_iteration_sigma_sq(problem)
    if sigma_sq == 0.0:
        return ZERO
    # redo a few iterations to recover the iterate itself
    m = problem.num_rows
    v = [1.0] * n

    def ata(vec: List[float]) -> List[float]:
        av = [0.0] * m
        for j, col in enumerate(cols):
            if vec[j]:
                for i, val in col:
                    av[i] += val * vec[j]
        out = [0.0] * n
        for j, col in enumerate(cols):
            out[j] = sum(val * av[i] for i, val in col)
        return out

    for _ in range(200):
        w = ata(v)
        norm = math.sqrt(sum(x * x for x in w))
        if norm == 0.0:
            v = [1.0 + j / n for j in range(n)]
            continue
        v = [x / norm for x in w]
    exact_v = [Fraction(x) for x in v]
    denom = norm_sq(exact_v)
    if denom == 0:
        return ZERO
    av = [ZERO] * m
    offset = 0
    for block in problem.blocks:
        for i, j, val in block.coupling.triplets:
            av[i] += val * exact_v[offset + j]
        offset += block.dim
    return rho * norm_sq(av) / denom


# ---------------------------------------------------------------------------
# Exact dual value by enumeration (test-facing; enumerable instances only)


class EnumeratedRelaxation:
    """Cached per-assignment statistics for exact evaluations of the dual.

    Enumerates the full cartesian product of block-feasible points once and
    stores (parts, c^T x, A x - b, ||(A x - b)_+||^2) per assignment.
    """

    def __init__(self, problem: BlockProblem, cap: int = 10**6):
        lists = block_point_lists(problem)
        count = 1
        for pts in lists:
            count *= len(pts)
            if count > cap:
                raise EnumerationCapError(
                    f"cartesian product exceeds cap {cap}"
                )
        self.problem = problem
        per_point = [
            [(p, dot(block.costs, p), block.coupling.matvec(p))
             for p in pts]
            for block, pts in zip(problem.blocks, lists)
        ]
        self.rows: List[Tuple[Tuple[Tuple[int, ...], ...], Fraction,
                              Tuple[Fraction, ...], Fraction]] = []
        import itertools as _it

        m = problem.num_rows
        rhs = problem.rhs
        for combo in _it.product(*per_point):
            value = ZERO
            totals = [-v for v in rhs]
            for _, cx, ax in combo:
                value += cx
                for i in range(m):
                    if ax[i]:
                        totals[i] += ax[i]
            possq = norm_sq(pos_part(totals))
            self.rows.append(
                (tuple(item[0] for item in combo), value, tuple(totals), possq)
            )

    def dual_value(self, dual: DualState) -> Fraction:
        """d(lambda, rho) = min_x L(x, lambda, rho), exactly."""
        return self.minimize(dual)[0]

    def minimize(self, dual: DualState) -> Tuple[Fraction, Assignment]:
        best: Optional[Fraction] = None
        best_parts = None
        for parts, cx, r, possq in self.rows:
            value = cx + dot(dual.lam, r) + dual.rho * possq / 2
            if best is None or value < best:
                best, best_parts = value, parts
        return best, Assignment(best_parts)


def exact_dual_value(problem: BlockProblem, dual: DualState,
                     cache: Optional[EnumeratedRelaxation] = None,
                     cap: int = 10**6) -> Fraction:
    if cache is None:
        cache = EnumeratedRelaxation(problem, cap)
    return cache.dual_value(dual)


def violation_norm_float(problem: BlockProblem, assignment: Assignment) -> float:
    return math.sqrt(safe_float(violation(problem, assignment).two_norm_sq))
