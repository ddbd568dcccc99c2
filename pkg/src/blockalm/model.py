"""Problem model for block-structured 0/1 programs.

An instance minimizes ``c^T x`` subject to coupling rows ``A x <= b`` and an
independent 0/1 feasible set per block. Blocks come in three flavors: an
explicit polyhedron (binary points of ``B_j x <= d_j``), an explicit point
list, and source-to-sink paths of a DAG. Every block must contain the zero
vector; the refinement heuristics skip a block by assigning zero, so this is
a hard validation rule rather than a runtime special case.

This module owns the data layout, instance file I/O, validation, the
brute-force exact optimum used as a test oracle, and the structural
assumption checks that decide whether the linearized classical step is exact.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

from .numeric import ZERO, as_fraction, dot, format_number
from .sparse import SparseMatrix

DEFAULT_BRUTE_CAP = 10**6
DEFAULT_BLOCK_CAP = 2**20


class InstanceError(Exception):
    """Base class for anything wrong with instance data."""


class ParseError(InstanceError):
    """Malformed instance document."""


class ValidationError(InstanceError):
    """Structurally parseable but inconsistent instance."""

    def __init__(self, message: str, *, block: Optional[int] = None,
                 fieldname: Optional[str] = None):
        super().__init__(message)
        self.block = block
        self.fieldname = fieldname


class EnumerationCapError(RuntimeError):
    """A block or instance is too large to enumerate under the given cap."""


class InfeasibleError(RuntimeError):
    """No assignment satisfies the coupling rows."""


# ---------------------------------------------------------------------------
# Block feasible sets


@dataclass(frozen=True)
class Polyhedron:
    """Binary points of ``rows @ x <= rhs``."""

    dim: int
    rows: Tuple[Tuple[Fraction, ...], ...]
    rhs: Tuple[Fraction, ...]

    kind = "explicit_polyhedron"


@dataclass(frozen=True)
class ExplicitPoints:
    """A finite list of distinct 0/1 vectors."""

    dim: int
    points: Tuple[Tuple[int, ...], ...]

    kind = "explicit_points"


@dataclass(frozen=True)
class DagPaths:
    """Incidence vectors of source-to-sink paths of a DAG.

    Each arc is ``(tail, head, var)`` where ``var`` is the variable index the
    arc activates. Variable indices without an arc are frozen at zero. When
    ``include_empty_path`` is set the all-zeros vector (no path) is feasible.
    """

    dim: int
    source: object
    sink: object
    arcs: Tuple[Tuple[object, object, int], ...]
    include_empty_path: bool = True

    kind = "dag_paths"


BlockSpec = Union[Polyhedron, ExplicitPoints, DagPaths]


@dataclass(frozen=True)
class Block:
    costs: Tuple[Fraction, ...]
    coupling: SparseMatrix
    spec: BlockSpec

    @property
    def dim(self) -> int:
        return len(self.costs)


@dataclass(frozen=True)
class BlockProblem:
    """A validated instance. Immutable and safe to share across workers."""

    num_rows: int
    rhs: Tuple[Fraction, ...]
    blocks: Tuple[Block, ...]
    meta: Dict[str, object] = field(default_factory=dict, compare=False)

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(b.dim for b in self.blocks)

    @property
    def total_cols(self) -> int:
        return sum(self.dims)


@dataclass(frozen=True)
class Assignment:
    """One 0/1 vector per block."""

    parts: Tuple[Tuple[int, ...], ...]

    def stacked(self) -> Tuple[int, ...]:
        out: Tuple[int, ...] = ()
        for p in self.parts:
            out += p
        return out

    @classmethod
    def zeros(cls, problem: BlockProblem) -> "Assignment":
        return cls(tuple((0,) * d for d in problem.dims))

    @classmethod
    def of(cls, parts: Iterable[Sequence[int]]) -> "Assignment":
        return cls(tuple(tuple(int(v) for v in p) for p in parts))


def cost_value(problem: BlockProblem, assignment: Assignment) -> Fraction:
    total = ZERO
    for block, part in zip(problem.blocks, assignment.parts):
        total += dot(block.costs, part)
    return total


# ---------------------------------------------------------------------------
# DAG utilities (shared with the oracle module)


def dag_topo_order(spec: DagPaths) -> List[object]:
    """Topological order of all nodes, or raise ValidationError on a cycle."""
    nodes = {spec.source, spec.sink}
    succ: Dict[object, List[Tuple[object, int]]] = {}
    indeg: Dict[object, int] = {spec.source: 0, spec.sink: 0}
    for tail, head, var in spec.arcs:
        nodes.add(tail)
        nodes.add(head)
        succ.setdefault(tail, []).append((head, var))
        indeg[head] = indeg.get(head, 0) + 1
        indeg.setdefault(tail, 0)
    ready = sorted((n for n in nodes if indeg[n] == 0), key=repr)
    order: List[object] = []
    while ready:
        node = ready.pop()
        order.append(node)
        for head, _ in sorted(succ.get(node, ()), key=repr):
            indeg[head] -= 1
            if indeg[head] == 0:
                ready.append(head)
        ready.sort(key=repr)
    if len(order) != len(nodes):
        raise ValidationError("dag_paths graph contains a cycle")
    return order


def _iter_dag_paths(spec: DagPaths, cap: int) -> Iterator[Tuple[int, ...]]:
    """Yield incidence vectors of all source-to-sink paths (DFS, capped)."""
    succ: Dict[object, List[Tuple[object, int]]] = {}
    for tail, head, var in spec.arcs:
        succ.setdefault(tail, []).append((head, var))
    for tail in succ:
        succ[tail].sort(key=lambda item: item[1])
    count = 0
    stack: List[Tuple[object, Tuple[int, ...]]] = [(spec.source, ())]
    while stack:
        node, used = stack.pop()
        if node == spec.sink and (used or spec.source == spec.sink):
            count += 1
            if count > cap:
                raise EnumerationCapError(
                    f"more than {cap} paths in dag_paths block"
                )
            vec = [0] * spec.dim
            for var in used:
                vec[var] = 1
            yield tuple(vec)
            continue
        for head, var in succ.get(node, ()):
            stack.append((head, used + (var,)))


def iter_spec_points(spec: BlockSpec, cap: int = DEFAULT_BLOCK_CAP) -> Iterator[Tuple[int, ...]]:
    """Yield the feasible 0/1 vectors of one block, duplicates removed."""
    if isinstance(spec, ExplicitPoints):
        seen = set()
        for p in spec.points:
            if p not in seen:
                seen.add(p)
                yield p
        return
    if isinstance(spec, Polyhedron):
        if 2 ** spec.dim > cap:
            raise EnumerationCapError(
                f"2^{spec.dim} candidate points exceed cap {cap}"
            )
        for bits in itertools.product((0, 1), repeat=spec.dim):
            if _poly_contains(spec, bits):
                yield bits
        return
    if isinstance(spec, DagPaths):
        if spec.include_empty_path:
            yield (0,) * spec.dim
        seen = set()
        for vec in _iter_dag_paths(spec, cap):
            if vec not in seen and any(vec):
                seen.add(vec)
                yield vec
        return
    raise TypeError(f"unknown block spec {type(spec).__name__}")


def _poly_contains(spec: Polyhedron, x: Sequence[int]) -> bool:
    for row, bound in zip(spec.rows, spec.rhs):
        total = ZERO
        for coef, xj in zip(row, x):
            if xj and coef:
                total += coef
        if total > bound:
            return False
    return True


def _dag_contains(spec: DagPaths, x: Sequence[int]) -> bool:
    chosen = [arc for arc in spec.arcs if x[arc[2]]]
    active = {var for _, _, var in spec.arcs}
    if any(x[j] for j in range(spec.dim) if j not in active):
        return False
    if not chosen:
        return spec.include_empty_path
    out_deg: Dict[object, int] = {}
    in_deg: Dict[object, int] = {}
    for tail, head, _ in chosen:
        out_deg[tail] = out_deg.get(tail, 0) + 1
        in_deg[head] = in_deg.get(head, 0) + 1
    for node in set(out_deg) | set(in_deg):
        o, i = out_deg.get(node, 0), in_deg.get(node, 0)
        if node == spec.source:
            if o - i != 1:
                return False
        elif node == spec.sink:
            if i - o != 1:
                return False
        elif o != i or o > 1:
            return False
    if out_deg.get(spec.source, 0) != 1 or in_deg.get(spec.sink, 0) != 1:
        return False
    # connectivity: walk from source along chosen arcs
    follow = {tail: head for tail, head, _ in chosen}
    node, steps = spec.source, 0
    while node != spec.sink:
        if node not in follow or steps > len(chosen):
            return False
        node = follow[node]
        steps += 1
    return steps == len(chosen)


def spec_contains(spec: BlockSpec, x: Sequence[int]) -> bool:
    """Exact membership test of a 0/1 vector in a block's feasible set."""
    if len(x) != spec.dim or any(v not in (0, 1) for v in x):
        return False
    if isinstance(spec, ExplicitPoints):
        return tuple(x) in set(spec.points)
    if isinstance(spec, Polyhedron):
        return _poly_contains(spec, x)
    if isinstance(spec, DagPaths):
        return _dag_contains(spec, x)
    raise TypeError(f"unknown block spec {type(spec).__name__}")


def zero_feasible(spec: BlockSpec) -> bool:
    if isinstance(spec, ExplicitPoints):
        return (0,) * spec.dim in set(spec.points)
    if isinstance(spec, Polyhedron):
        return all(b >= 0 for b in spec.rhs)
    if isinstance(spec, DagPaths):
        return spec.include_empty_path
    raise TypeError(f"unknown block spec {type(spec).__name__}")


# ---------------------------------------------------------------------------
# Validation


def validate_problem(problem: BlockProblem) -> None:
    """Check every structural invariant; raise ValidationError otherwise."""
    if problem.num_rows < 0:
        raise ValidationError("m must be nonnegative", fieldname="m")
    if len(problem.rhs) != problem.num_rows:
        raise ValidationError(
            f"b has length {len(problem.rhs)}, expected m={problem.num_rows}",
            fieldname="b",
        )
    if not problem.blocks:
        raise ValidationError("instance needs at least one block", fieldname="blocks")
    for j, block in enumerate(problem.blocks):
        n_j = block.dim
        if n_j <= 0:
            raise ValidationError(f"block {j} has no variables", block=j)
        if block.coupling.num_rows != problem.num_rows:
            raise ValidationError(
                f"block {j} coupling matrix has {block.coupling.num_rows} rows, "
                f"expected {problem.num_rows}",
                block=j, fieldname="A",
            )
        if block.coupling.num_cols != n_j:
            raise ValidationError(
                f"block {j} coupling matrix has {block.coupling.num_cols} columns, "
                f"expected {n_j}",
                block=j, fieldname="A",
            )
        _validate_spec(block.spec, j, n_j)
        if not zero_feasible(block.spec):
            raise ValidationError(
                f"zero vector infeasible in block {j}", block=j, fieldname="set"
            )


def _validate_spec(spec: BlockSpec, j: int, n_j: int) -> None:
    if spec.dim != n_j:
        raise ValidationError(
            f"block {j} set dimension {spec.dim} does not match n_j={n_j}",
            block=j, fieldname="set",
        )
    if isinstance(spec, ExplicitPoints):
        seen = set()
        for p in spec.points:
            if len(p) != n_j:
                raise ValidationError(
                    f"block {j} has a point of length {len(p)}, expected {n_j}",
                    block=j, fieldname="points",
                )
            if any(v not in (0, 1) for v in p):
                raise ValidationError(
                    f"block {j} has a non-binary point {p}", block=j,
                    fieldname="points",
                )
            if p in seen:
                raise ValidationError(
                    f"block {j} has duplicate point {p}", block=j,
                    fieldname="points",
                )
            seen.add(p)
        if not spec.points:
            raise ValidationError(f"block {j} has no points", block=j,
                                  fieldname="points")
    elif isinstance(spec, Polyhedron):
        if len(spec.rows) != len(spec.rhs):
            raise ValidationError(
                f"block {j} polyhedron has {len(spec.rows)} rows but "
                f"{len(spec.rhs)} bounds",
                block=j, fieldname="set",
            )
        for row in spec.rows:
            if len(row) != n_j:
                raise ValidationError(
                    f"block {j} polyhedron row of length {len(row)}, "
                    f"expected {n_j}",
                    block=j, fieldname="B",
                )
    elif isinstance(spec, DagPaths):
        seen_vars: Dict[int, Tuple[object, object]] = {}
        for tail, head, var in spec.arcs:
            if not isinstance(var, int) or not (0 <= var < n_j):
                raise ValidationError(
                    f"block {j} arc variable index {var!r} out of range",
                    block=j, fieldname="arcs",
                )
            if var in seen_vars:
                raise ValidationError(
                    f"block {j} variable {var} mapped to two arcs",
                    block=j, fieldname="arcs",
                )
            seen_vars[var] = (tail, head)
        dag_topo_order(spec)  # raises on cycles
    else:
        raise ValidationError(f"unknown block kind {type(spec).__name__}", block=j)


# ---------------------------------------------------------------------------
# Instance files


def parse_instance(doc: Mapping) -> BlockProblem:
    """Build and validate a BlockProblem from a JSON-shaped document."""
    if not isinstance(doc, Mapping):
        raise ParseError("instance document must be a JSON object")
    try:
        m = doc["m"]
        b_raw = doc["b"]
        blocks_raw = doc["blocks"]
    except KeyError as exc:
        raise ParseError(f"missing field {exc.args[0]!r}") from None
    if not isinstance(m, int) or isinstance(m, bool):
        raise ParseError("field 'm' must be an integer")
    if not isinstance(b_raw, list) or not isinstance(blocks_raw, list):
        raise ParseError("fields 'b' and 'blocks' must be arrays")
    try:
        rhs = tuple(as_fraction(v) for v in b_raw)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"bad value in 'b': {exc}") from None
    blocks = []
    for j, entry in enumerate(blocks_raw):
        blocks.append(_parse_block(entry, j, m))
    meta = doc.get("meta") or {}
    if not isinstance(meta, Mapping):
        raise ParseError("field 'meta' must be an object")
    problem = BlockProblem(num_rows=m, rhs=rhs, blocks=tuple(blocks),
                           meta=dict(meta))
    validate_problem(problem)
    return problem


def _parse_block(entry: Mapping, j: int, m: int) -> Block:
    if not isinstance(entry, Mapping):
        raise ParseError(f"block {j} must be an object")
    try:
        c_raw = entry["c"]
        a_raw = entry["A"]
        set_raw = entry["set"]
    except KeyError as exc:
        raise ParseError(f"block {j} missing field {exc.args[0]!r}") from None
    if not isinstance(c_raw, list) or not c_raw:
        raise ParseError(f"block {j} field 'c' must be a nonempty array")
    try:
        costs = tuple(as_fraction(v) for v in c_raw)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"block {j} bad cost: {exc}") from None
    n_j = len(costs)
    if not isinstance(a_raw, list):
        raise ParseError(f"block {j} field 'A' must be an array of triplets")
    try:
        coupling = SparseMatrix(m, n_j, a_raw)
    except ValueError as exc:
        raise ParseError(f"block {j} bad coupling matrix: {exc}") from None
    spec = _parse_spec(set_raw, j, n_j)
    return Block(costs=costs, coupling=coupling, spec=spec)


def _parse_spec(raw: Mapping, j: int, n_j: int) -> BlockSpec:
    if not isinstance(raw, Mapping) or "kind" not in raw:
        raise ParseError(f"block {j} field 'set' must be an object with 'kind'")
    kind = raw["kind"]
    try:
        if kind == "explicit_polyhedron":
            rows = tuple(
                tuple(as_fraction(v) for v in row) for row in raw["B"]
            )
            rhs = tuple(as_fraction(v) for v in raw["d"])
            return Polyhedron(dim=n_j, rows=rows, rhs=rhs)
        if kind == "explicit_points":
            points = tuple(tuple(int(v) for v in p) for p in raw["points"])
            return ExplicitPoints(dim=n_j, points=points)
        if kind == "dag_paths":
            arcs = tuple(
                (arc["tail"], arc["head"], arc["var"]) for arc in raw["arcs"]
            )
            return DagPaths(
                dim=n_j,
                source=raw["source"],
                sink=raw["sink"],
                arcs=arcs,
                include_empty_path=bool(raw.get("include_empty_path", True)),
            )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"block {j} malformed '{kind}' set: {exc}") from None
    raise ParseError(f"block {j} unknown set kind {kind!r}")


def load_instance(path: Union[str, Path]) -> BlockProblem:
    """Load, parse and validate an instance file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from None
    return parse_instance(doc)


def instance_document(problem: BlockProblem) -> dict:
    """Serialize a problem back to its JSON document form."""
    blocks = []
    for block in problem.blocks:
        spec = block.spec
        if isinstance(spec, Polyhedron):
            set_doc = {
                "kind": spec.kind,
                "B": [[format_number(v) for v in row] for row in spec.rows],
                "d": [format_number(v) for v in spec.rhs],
            }
        elif isinstance(spec, ExplicitPoints):
            set_doc = {"kind": spec.kind, "points": [list(p) for p in spec.points]}
        else:
            set_doc = {
                "kind": spec.kind,
                "source": spec.source,
                "sink": spec.sink,
                "arcs": [
                    {"tail": t, "head": h, "var": v} for t, h, v in spec.arcs
                ],
                "include_empty_path": spec.include_empty_path,
            }
        blocks.append({
            "c": [format_number(v) for v in block.costs],
            "A": [[i, jj, format_number(v)] for i, jj, v in block.coupling.triplets],
            "set": set_doc,
        })
    doc = {"m": problem.num_rows, "b": [format_number(v) for v in problem.rhs],
           "blocks": blocks}
    if problem.meta:
        doc["meta"] = dict(problem.meta)
    return doc


def save_instance(problem: BlockProblem, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(instance_document(problem), indent=1))


# ---------------------------------------------------------------------------
# Feasibility verification (independent of solver caches)


@dataclass(frozen=True)
class FeasibilityReport:
    coupling_ok: bool
    violated_rows: Tuple[int, ...]
    blocks_ok: Tuple[bool, ...]

    @property
    def ok(self) -> bool:
        return self.coupling_ok and all(self.blocks_ok)


def verify_assignment(problem: BlockProblem, assignment: Assignment) -> FeasibilityReport:
    """Re-check ``A x <= b`` and blockwise membership from raw data."""
    if len(assignment.parts) != problem.num_blocks:
        raise ValueError("assignment has wrong number of blocks")
    totals = [ZERO] * problem.num_rows
    blocks_ok = []
    for block, part in zip(problem.blocks, assignment.parts):
        if len(part) != block.dim:
            raise ValueError("assignment block has wrong dimension")
        for i, j, v in block.coupling.triplets:
            if part[j]:
                totals[i] += v * part[j]
        blocks_ok.append(spec_contains(block.spec, part))
    violated = tuple(
        i for i in range(problem.num_rows) if totals[i] > problem.rhs[i]
    )
    return FeasibilityReport(
        coupling_ok=not violated,
        violated_rows=violated,
        blocks_ok=tuple(blocks_ok),
    )


# ---------------------------------------------------------------------------
# Brute force oracle


def block_point_lists(problem: BlockProblem, cap: int = DEFAULT_BLOCK_CAP
                      ) -> List[List[Tuple[int, ...]]]:
    """Lex-sorted feasible point list per block."""
    return [sorted(iter_spec_points(b.spec, cap)) for b in problem.blocks]


def brute_force_optimum(problem: BlockProblem, cap: int = DEFAULT_BRUTE_CAP
                        ) -> Tuple[Fraction, Assignment]:
    """Exact minimum by exhaustive enumeration.

    Ties break to the lexicographically smallest stacked vector, which the
    lex-ordered product enumeration yields for free.
    """
    lists = block_point_lists(problem, cap)
    count = 1
    for pts in lists:
        count *= len(pts)
        if count > cap:
            raise EnumerationCapError(
                f"cartesian product exceeds cap {cap}"
            )
    per_point = [
        [(p, dot(block.costs, p), block.coupling.matvec(p))
         for p in pts]
        for block, pts in zip(problem.blocks, lists)
    ]
    best_value: Optional[Fraction] = None
    best_parts: Optional[Tuple[Tuple[int, ...], ...]] = None
    rhs = problem.rhs
    m = problem.num_rows
    for combo in itertools.product(*per_point):
        value = ZERO
        feasible = True
        totals = [ZERO] * m
        for _, cx, ax in combo:
            value += cx
            for i in range(m):
                if ax[i]:
                    totals[i] += ax[i]
        for i in range(m):
            if totals[i] > rhs[i]:
                feasible = False
                break
        if not feasible:
            continue
        if best_value is None or value < best_value:
            best_value = value
            best_parts = tuple(item[0] for item in combo)
    if best_value is None:
        raise InfeasibleError("no assignment satisfies the coupling rows")
    return best_value, Assignment(best_parts)


# ---------------------------------------------------------------------------
# Structural assumptions behind the linearized classical step


@dataclass(frozen=True)
class AssumptionReport:
    """Which structural conditions the instance satisfies.

    ``zero_one_coupling``: all coupling entries are 0/1 and b is all ones.
    ``cost_support_ok``: per block, nonzero costs live on coupling-free
    columns (and some block point satisfies ``A_j x_j <= 1``, which the zero
    vector always does).
    ``cap_subset_ok``: per block, every binary vector with ``A_j x_j <= 1``
    belongs to the block set and the block cost has at most one nonzero
    entry; ``None`` when the block is too large to verify by enumeration.
    """

    zero_one_coupling: bool
    cost_support_ok: Tuple[bool, ...]
    cap_subset_ok: Tuple[Optional[bool], ...]

    @property
    def cost_condition(self) -> bool:
        return all(self.cost_support_ok) or all(
            v is True for v in self.cap_subset_ok
        )

    @property
    def linearization_exact(self) -> bool:
        return self.zero_one_coupling and self.cost_condition


def check_assumptions(problem: BlockProblem, cap: int = DEFAULT_BLOCK_CAP
                      ) -> AssumptionReport:
    zero_one = all(b.coupling.entries_zero_one() for b in problem.blocks) and all(
        v == 1 for v in problem.rhs
    )
    support_ok = []
    subset_ok: List[Optional[bool]] = []
    for block in problem.blocks:
        free = set(block.coupling.zero_columns())
        support_ok.append(
            all(j in free for j in range(block.dim) if block.costs[j] != 0)
        )
        nonzeros = sum(1 for v in block.costs if v != 0)
        if nonzeros > 1:
            subset_ok.append(False)
            continue
        if 2 ** block.dim > cap:
            subset_ok.append(None)
            continue
        ok = True
        for bits in itertools.product((0, 1), repeat=block.dim):
            ax = block.coupling.matvec(bits)
            if all(v <= 1 for v in ax) and not spec_contains(block.spec, bits):
                ok = False
                break
        subset_ok.append(ok)
    return AssumptionReport(
        zero_one_coupling=zero_one,
        cost_support_ok=tuple(support_ok),
        cap_subset_ok=tuple(subset_ok),
    )
