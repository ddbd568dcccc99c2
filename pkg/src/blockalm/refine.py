"""Turning descent iterates into feasible assignments.

Two heuristics over a per-block pool of candidate vectors: a greedy sweep
that keeps prefix feasibility, and a packing step that grows maximal
independent sets on the candidate conflict graph. Both outputs are re-checked
by the independent feasibility verifier before anyone trusts them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Optional, Sequence, Set, Tuple

from .model import (
    Assignment,
    BlockProblem,
    spec_contains,
    verify_assignment,
)
from .numeric import ZERO, dot, pos_part

Candidate = Tuple[int, Tuple[int, ...]]  # (block index, vector)


class PoolMembershipError(ValueError):
    """Candidate vector is not feasible for its block."""


class RefinementInfeasible(RuntimeError):
    """The refined assignment violates a coupling row (negative rhs rows)."""

    def __init__(self, message: str, violated_rows: Tuple[int, ...]):
        super().__init__(message)
        self.violated_rows = violated_rows


@dataclass
class PoolEntry:
    vector: Tuple[int, ...]
    cost: Fraction
    age: int


class SolutionPool:
    """Per-block candidate store with worst-cost-then-oldest eviction."""

    def __init__(self, problem: BlockProblem, capacity: int = 50):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.problem = problem
        self.capacity = capacity
        self._entries: List[Dict[Tuple[int, ...], PoolEntry]] = [
            {} for _ in problem.blocks
        ]
        self._clock = 0

    def block(self, j: int) -> List[PoolEntry]:
        return sorted(
            self._entries[j].values(), key=lambda e: (e.cost, e.vector)
        )

    def best_cost(self, j: int) -> Optional[Fraction]:
        entries = self._entries[j]
        if not entries:
            return None
        return min(e.cost for e in entries.values())

    def insert(self, j: int, vector: Sequence[int]) -> bool:
        """Insert a candidate; returns False on duplicates. Validates membership."""
        vec = tuple(int(v) for v in vector)
        if not any(vec):
            raise PoolMembershipError("pool does not store the zero vector")
        block = self.problem.blocks[j]
        if not spec_contains(block.spec, vec):
            raise PoolMembershipError(
                f"vector is not feasible for block {j}"
            )
        entries = self._entries[j]
        if vec in entries:
            return False
        cost = dot(block.costs, vec)
        self._clock += 1
        entries[vec] = PoolEntry(vector=vec, cost=cost, age=self._clock)
        if len(entries) > self.capacity:
            worst = max(entries.values(), key=lambda e: (e.cost, -e.age))
            del entries[worst.vector]
        return True

    def __len__(self) -> int:
        return sum(len(e) for e in self._entries)


def pool_insert(pool: SolutionPool, j: int, vector: Sequence[int]) -> SolutionPool:
    pool.insert(j, vector)
    return pool


def default_sweep_order(problem: BlockProblem, pool: SolutionPool) -> List[int]:
    """Blocks by descending candidate quality: best (lowest) cost first."""
    keyed = []
    for j in range(problem.num_blocks):
        best = pool.best_cost(j)
        keyed.append((best is None, best if best is not None else ZERO, j))
    return [j for _, _, j in sorted(keyed)]


def sweep(problem: BlockProblem, pool: SolutionPool,
          order: Optional[Sequence[int]] = None) -> Assignment:
    """Greedy prefix-feasible selection; skipped blocks stay at zero.

    Visits blocks in ``order`` (default: best candidate cost first), picking
    the cheapest pool vector that keeps the partial coupling sums within b.
    """
    if order is None:
        order = default_sweep_order(problem, pool)
    if sorted(order) != list(range(problem.num_blocks)):
        raise ValueError("order must be a permutation of the block indices")
    totals = [ZERO] * problem.num_rows
    parts: List[Tuple[int, ...]] = [
        (0,) * block.dim for block in problem.blocks
    ]
    for j in order:
        block = problem.blocks[j]
        for entry in pool.block(j):
            ax = block.coupling.matvec(entry.vector)
            if all(t + a <= b for t, a, b in
                   zip(totals, ax, problem.rhs)):
                parts[j] = entry.vector
                for i, a in enumerate(ax):
                    if a:
                        totals[i] += a
                break
    result = Assignment(tuple(parts))
    report = verify_assignment(problem, result)
    if not report.ok:
        raise RefinementInfeasible(
            "sweep could not cover negative rhs rows",
            report.violated_rows,
        )
    return result


# ---------------------------------------------------------------------------
# Conflict graph and packing


@dataclass
class GraphNode:
    node_id: int
    block: int
    vector: Tuple[int, ...]
    cost: Fraction
    coupling: Tuple[Fraction, ...]


class ConflictGraph:
    """Candidates as nodes, pairwise coupling conflicts as edges.

    Same-block candidates are always adjacent. A cross-block edge is present
    exactly when the two vectors together violate some coupling row with all
    other blocks at zero. Growth is monotone: nodes and edges are never
    removed.
    """

    def __init__(self, problem: BlockProblem):
        self.problem = problem
        self.nodes: List[GraphNode] = []
        self.adj: List[Set[int]] = []
        self._index: Dict[Candidate, int] = {}

    def node_count(self) -> int:
        return len(self.nodes)

    def edge_count(self) -> int:
        return sum(len(a) for a in self.adj) // 2

    def has_node(self, j: int, vector: Sequence[int]) -> bool:
        return (j, tuple(vector)) in self._index

    def add_candidate(self, j: int, vector: Sequence[int]) -> int:
        vec = tuple(int(v) for v in vector)
        key = (j, vec)
        if key in self._index:
            return self._index[key]
        block = self.problem.blocks[j]
        if not spec_contains(block.spec, vec):
            raise PoolMembershipError(f"vector is not feasible for block {j}")
        node = GraphNode(
            node_id=len(self.nodes),
            block=j,
            vector=vec,
            cost=dot(block.costs, vec),
            coupling=tuple(block.coupling.matvec(vec)),
        )
        self.nodes.append(node)
        self.adj.append(set())
        self._index[key] = node.node_id
        for other in self.nodes[:-1]:
            if other.block == j:
                self._connect(node.node_id, other.node_id)
            elif self._conflicts(node, other):
                self._connect(node.node_id, other.node_id)
        return node.node_id

    def _connect(self, u: int, v: int) -> None:
        self.adj[u].add(v)
        self.adj[v].add(u)

    def _conflicts(self, a: GraphNode, b: GraphNode) -> bool:
        for i in range(self.problem.num_rows):
            if a.coupling[i] + b.coupling[i] > self.problem.rhs[i]:
                return True
        return False


def graph_update(graph: ConflictGraph, pool: SolutionPool,
                 new_candidates: Iterable[Candidate]) -> ConflictGraph:
    """Append candidates; same-block cliques and conflict edges maintained."""
    for j, vec in new_candidates:
        graph.add_candidate(j, vec)
    return graph


def mis_pack(problem: BlockProblem, graph: ConflictGraph,
             seeds: Sequence[int]) -> Assignment:
    """Grow one maximal independent set per seed; return the best assignment.

    Growth scans nodes by ascending block cost and keeps the cumulative
    coupling sums within b, which guards rows where a triple violates even
    though every pair is fine. At most one node per block by the same-block
    cliques. Empty graph or seed list yields the zero assignment.
    """
    best_parts: Optional[List[Tuple[int, ...]]] = None
    best_value: Optional[Fraction] = None
    scan_order = sorted(
        range(len(graph.nodes)),
        key=lambda i: (graph.nodes[i].cost, graph.nodes[i].block,
                       graph.nodes[i].vector),
    )
    seed_list = list(seeds) if graph.nodes else []
    if not seed_list:
        seed_list = [None]
    for seed in seed_list:
        chosen: List[int] = []
        totals = [ZERO] * problem.num_rows

        def try_add(idx: int) -> None:
            node = graph.nodes[idx]
            if any(idx in graph.adj[c] or idx == c for c in chosen):
                return
            new_totals = [
                t + a for t, a in zip(totals, node.coupling)
            ]
            if any(t > b for t, b in zip(new_totals, problem.rhs)):
                return
            chosen.append(idx)
            totals[:] = new_totals

        if seed is not None:
            try_add(seed)
        for idx in scan_order:
            try_add(idx)
        parts = [(0,) * block.dim for block in problem.blocks]
        value = ZERO
        for idx in chosen:
            node = graph.nodes[idx]
            parts[node.block] = node.vector
            value += node.cost
        if best_value is None or value < best_value:
            best_value, best_parts = value, parts
    result = Assignment(tuple(best_parts)) if best_parts is not None \
        else Assignment.zeros(problem)
    report = verify_assignment(problem, result)
    if not report.ok:
        raise RefinementInfeasible(
            "packing could not cover negative rhs rows",
            report.violated_rows,
        )
    return result


def default_seeds(graph: ConflictGraph, newest: Iterable[Candidate],
                  top: int = 10) -> List[int]:
    """Top candidates by cost plus the latest inner-loop output's nodes."""
    by_cost = sorted(
        range(len(graph.nodes)),
        key=lambda i: (graph.nodes[i].cost, graph.nodes[i].block,
                       graph.nodes[i].vector),
    )[:top]
    seeds = list(by_cost)
    index = {(n.block, n.vector): n.node_id for n in graph.nodes}
    for j, vec in newest:
        node_id = index.get((j, tuple(vec)))
        if node_id is not None and node_id not in seeds:
            seeds.append(node_id)
    return seeds
