"""Per-block linear minimization: ``argmin_{u in X_j} v^T u``.

Two realizations: a scan over an enumerated point list (explicit points and
polyhedron blocks) and a shortest-path sweep in topological order for DAG
blocks, which is exact for negative arc costs in a single pass. Ties always
break to the lexicographically smallest vector so fixed-point detection in
the descent loops is well defined.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .model import (
    BlockProblem,
    BlockSpec,
    DagPaths,
    EnumerationCapError,
    dag_topo_order,
    iter_spec_points,
    spec_contains,
    DEFAULT_BLOCK_CAP,
)
from .numeric import ZERO, as_fraction, dot


@dataclass(frozen=True)
class OracleQuery:
    block: int
    weights: Tuple[Fraction, ...]


@dataclass(frozen=True)
class OracleAnswer:
    minimizer: Tuple[int, ...]
    value: Fraction


class BlockOracle:
    """Stateless after construction; concurrent queries are safe."""

    dim: int

    def minimize(self, weights: Sequence) -> OracleAnswer:
        raise NotImplementedError

    def contains(self, x: Sequence[int]) -> bool:
        raise NotImplementedError

    def points(self) -> Tuple[Tuple[int, ...], ...]:
        raise NotImplementedError


class ScanOracle(BlockOracle):
    """Linear scan over the enumerated feasible points, kept lex-sorted."""

    def __init__(self, spec: BlockSpec, cap: int = DEFAULT_BLOCK_CAP):
        self.spec = spec
        self.dim = spec.dim
        self._points = tuple(sorted(iter_spec_points(spec, cap)))
        if not self._points:
            raise EnumerationCapError("block has no feasible points")
        self._point_set = set(self._points)

    def minimize(self, weights: Sequence) -> OracleAnswer:
        if len(weights) != self.dim:
            raise ValueError("weight vector has wrong length")
        best_p = None
        best_v: Optional[Fraction] = None
        for p in self._points:
            value = ZERO
            for w, xj in zip(weights, p):
                if xj:
                    value += w
            if best_v is None or value < best_v:
                best_v, best_p = value, p
        return OracleAnswer(minimizer=best_p, value=best_v)

    def contains(self, x: Sequence[int]) -> bool:
        return tuple(x) in self._point_set

    def points(self) -> Tuple[Tuple[int, ...], ...]:
        return self._points


class DagOracle(BlockOracle):
    """Shortest source-to-sink path with the weight vector as arc costs.

    Nodes are processed in topological order, so negative costs are exact in
    one pass. The per-node state carries ``(cost, lex_key)`` where ``lex_key``
    encodes the incidence vector with variable 0 as the most significant bit;
    minimizing the pair reproduces the lexicographic tie-break, and the key
    is additive over arc-disjoint path segments so the recursion is valid.
    """

    def __init__(self, spec: DagPaths, cap: int = DEFAULT_BLOCK_CAP):
        self.spec = spec
        self.dim = spec.dim
        self._order = dag_topo_order(spec)
        self._incoming: Dict[object, List[Tuple[object, int]]] = {}
        for tail, head, var in spec.arcs:
            self._incoming.setdefault(head, []).append((tail, var))
        for head in self._incoming:
            self._incoming[head].sort(key=lambda item: item[1])
        self._cap = cap

    def minimize(self, weights: Sequence) -> OracleAnswer:
        if len(weights) != self.dim:
            raise ValueError("weight vector has wrong length")
        spec = self.spec
        n = self.dim
        # state per node: (cost, lex_key, back arc var, predecessor)
        state: Dict[object, Tuple[Fraction, int, Optional[int], object]] = {
            spec.source: (ZERO, 0, None, None)
        }
        for node in self._order:
            if node == spec.source:
                continue
            best = None
            for tail, var in self._incoming.get(node, ()):
                prev = state.get(tail)
                if prev is None:
                    continue
                cand = (
                    prev[0] + weights[var],
                    prev[1] + (1 << (n - 1 - var)),
                    var,
                    tail,
                )
                if best is None or cand[:2] < best[:2]:
                    best = cand
            if best is not None:
                state[node] = best
        sink_state = state.get(spec.sink)
        candidates = []
        if sink_state is not None:
            candidates.append(sink_state[:2] + (spec.sink,))
        if spec.include_empty_path:
            candidates.append((ZERO, 0, None))
        if not candidates:
            raise EnumerationCapError("dag block has no feasible selection")
        cost, key, marker = min(candidates, key=lambda c: c[:2])
        vec = [0] * n
        if marker is not None:
            node = marker
            while node != spec.source:
                _, _, var, tail = state[node]
                vec[var] = 1
                node = tail
        return OracleAnswer(minimizer=tuple(vec), value=cost)

    def contains(self, x: Sequence[int]) -> bool:
        return spec_contains(self.spec, x)

    def points(self) -> Tuple[Tuple[int, ...], ...]:
        return tuple(sorted(iter_spec_points(self.spec, self._cap)))


def build_oracle(spec: BlockSpec, cap: int = DEFAULT_BLOCK_CAP) -> BlockOracle:
    if isinstance(spec, DagPaths):
        return DagOracle(spec, cap)
    return ScanOracle(spec, cap)


def default_oracles(problem: BlockProblem, cap: int = DEFAULT_BLOCK_CAP
                    ) -> Tuple[BlockOracle, ...]:
    return tuple(build_oracle(b.spec, cap) for b in problem.blocks)


def minimize_linear(spec: BlockSpec, weights: Sequence,
                    cap: int = DEFAULT_BLOCK_CAP) -> OracleAnswer:
    """One-shot linear minimization over a block set."""
    v = [as_fraction(w) if not isinstance(w, Fraction) else w for w in weights]
    return build_oracle(spec, cap).minimize(v)


def enumerate_feasible(spec: BlockSpec, cap: int = DEFAULT_BLOCK_CAP
                       ) -> Tuple[Tuple[int, ...], ...]:
    """Complete duplicate-free feasible point list, lex-sorted."""
    return tuple(sorted(iter_spec_points(spec, cap)))
