"""Instance builders: train timetabling networks and random fuzz instances.

The timetabling model puts one space-time DAG block per train. A path picks
a departure slot, run arcs between consecutive stations and a dwell arc per
intermediate station; the empty path means the train is not scheduled.
Coupling rows all have unit right-hand side: headway rows bundle same-kind
station events of one direction inside a symmetric window, and platform
rows bundle dwell arcs covering one time slot. A single train path touches
each row at most once by construction, so the whole structural story behind
the linearized classical step holds on built instances.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .model import (
    Block,
    BlockProblem,
    DagPaths,
    ExplicitPoints,
    ParseError,
    Polyhedron,
    ValidationError,
    validate_problem,
)
from .numeric import ZERO, as_fraction
from .sparse import SparseMatrix


@dataclass(frozen=True)
class TrainSpec:
    speed: int
    direction: str  # down | up
    depart_earliest: int
    depart_latest: int


@dataclass(frozen=True)
class TtpSpec:
    stations: Tuple[str, ...]
    runtimes: Tuple[Tuple[int, ...], ...]  # per speed class, per segment
    trains: Tuple[TrainSpec, ...]
    horizon: int
    headway: int
    dwell: Tuple[Tuple[int, int], ...]  # (min, max) per station
    profit_mode: str = "count"  # count | revenue
    distances: Optional[Tuple[int, ...]] = None  # per segment, revenue mode

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValidationError("horizon must be positive", fieldname="horizon")
        if self.headway < 1:
            raise ValidationError("headway must be at least 1",
                                  fieldname="headway")
        if len(self.stations) < 2:
            raise ValidationError("need at least two stations",
                                  fieldname="stations")
        segs = len(self.stations) - 1
        for speeds in self.runtimes:
            if len(speeds) != segs:
                raise ValidationError(
                    f"each runtime row needs {segs} segments",
                    fieldname="runtimes",
                )
            if any(rt < 1 for rt in speeds):
                raise ValidationError("run times must be at least 1",
                                      fieldname="runtimes")
        if len(self.dwell) != len(self.stations):
            raise ValidationError("need dwell bounds per station",
                                  fieldname="dwell")
        for lo, hi in self.dwell:
            if lo < 0 or hi < lo:
                raise ValidationError("bad dwell bounds", fieldname="dwell")
        if self.profit_mode not in ("count", "revenue"):
            raise ValidationError("profit_mode must be count or revenue",
                                  fieldname="profit_mode")
        for j, train in enumerate(self.trains):
            if not (0 <= train.speed < len(self.runtimes)):
                raise ValidationError(f"train {j} has unknown speed class",
                                      fieldname="trains")
            if train.direction not in ("down", "up"):
                raise ValidationError(f"train {j} direction must be down or up",
                                      fieldname="trains")
            if train.depart_earliest < 0 or \
                    train.depart_latest < train.depart_earliest:
                raise ValidationError(f"train {j} has an empty departure window",
                                      fieldname="trains")

    @property
    def segment_distances(self) -> Tuple[int, ...]:
        if self.distances is not None:
            return self.distances
        return self.runtimes[0]


def parse_ttp_spec(doc: Mapping) -> TtpSpec:
    try:
        trains = tuple(
            TrainSpec(
                speed=int(t.get("speed", 0)),
                direction=str(t.get("direction", "down")),
                depart_earliest=int(t["depart_earliest"]),
                depart_latest=int(t["depart_latest"]),
            )
            for t in doc["trains"]
        )
        dwell_raw = doc.get("dwell")
        stations = tuple(str(s) for s in doc["stations"])
        if dwell_raw is None:
            dwell = tuple((1, 2) for _ in stations)
        else:
            dwell = tuple((int(lo), int(hi)) for lo, hi in dwell_raw)
        distances = doc.get("distances")
        return TtpSpec(
            stations=stations,
            runtimes=tuple(tuple(int(r) for r in row) for row in doc["runtimes"]),
            trains=trains,
            horizon=int(doc["horizon"]),
            headway=int(doc["headway"]),
            dwell=dwell,
            profit_mode=str(doc.get("profit_mode", "count")),
            distances=tuple(int(d) for d in distances) if distances else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed timetable description: {exc}") from None


def load_ttp_spec(path: Union[str, Path]) -> TtpSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not valid JSON: {exc}") from None
    return parse_ttp_spec(doc)


def ttp_spec_document(spec: TtpSpec) -> dict:
    return {
        "stations": list(spec.stations),
        "runtimes": [list(r) for r in spec.runtimes],
        "trains": [
            {
                "speed": t.speed,
                "direction": t.direction,
                "depart_earliest": t.depart_earliest,
                "depart_latest": t.depart_latest,
            }
            for t in spec.trains
        ],
        "horizon": spec.horizon,
        "headway": spec.headway,
        "dwell": [list(d) for d in spec.dwell],
        "profit_mode": spec.profit_mode,
        **({"distances": list(spec.distances)} if spec.distances else {}),
    }


@dataclass
class TrainNetwork:
    """Arcs of one train's block, with the bookkeeping coupling needs."""

    arcs: List[Tuple[object, object, int]]
    profits: List[Fraction]
    head_events: List[Optional[Tuple[int, str, int]]]  # (station, kind, time)
    occupations: List[Optional[Tuple[int, int, int]]]  # (station, from, to)


@dataclass
class SpaceTimeNetwork:
    trains: List[TrainNetwork]


SOURCE = "src"
SINK = "snk"


def _build_train(spec: TtpSpec, train: TrainSpec) -> TrainNetwork:
    seq = list(range(len(spec.stations)))
    if train.direction == "up":
        seq.reverse()
    runtimes = spec.runtimes[train.speed]
    distances = spec.segment_distances
    net = TrainNetwork(arcs=[], profits=[], head_events=[], occupations=[])

    def add_arc(tail, head, profit, head_event, occupation) -> None:
        var = len(net.arcs)
        net.arcs.append((tail, head, var))
        net.profits.append(profit)
        net.head_events.append(head_event)
        net.occupations.append(occupation)

    if train.depart_earliest > spec.horizon:
        raise ValidationError(
            "train departure window starts beyond the horizon",
            fieldname="trains",
        )
    # forward reachability, station by station along the sequence
    dep_times: Dict[int, set] = {seq[0]: set()}
    for t in range(train.depart_earliest,
                   min(train.depart_latest, spec.horizon) + 1):
        add_arc(SOURCE, ("dep", seq[0], t), ZERO, (seq[0], "dep", t), None)
        dep_times[seq[0]].add(t)
    for pos in range(len(seq) - 1):
        s, nxt = seq[pos], seq[pos + 1]
        seg = min(s, nxt)  # segment index between adjacent stations
        rt = runtimes[seg]
        arr_times = set()
        for t in sorted(dep_times.get(s, ())):
            ta = t + rt
            if ta > spec.horizon:
                continue
            profit = (
                Fraction(distances[seg]) if spec.profit_mode == "revenue"
                else ZERO
            )
            add_arc(("dep", s, t), ("arr", nxt, ta), profit,
                    (nxt, "arr", ta), None)
            arr_times.add(ta)
        if pos + 1 == len(seq) - 1:
            # terminal station: sink arcs close the path
            for ta in sorted(arr_times):
                profit = (
                    Fraction(1) if spec.profit_mode == "count" else ZERO
                )
                add_arc(("arr", nxt, ta), SINK, profit, None, None)
        else:
            lo, hi = spec.dwell[nxt]
            dep_times[nxt] = set()
            for ta in sorted(arr_times):
                for d in range(lo, hi + 1):
                    td = ta + d
                    if td > spec.horizon:
                        continue
                    add_arc(("arr", nxt, ta), ("dep", nxt, td), ZERO,
                            (nxt, "dep", td), (nxt, ta, td))
                    dep_times[nxt].add(td)
    return net


def build_instance(spec: TtpSpec) -> BlockProblem:
    """Assemble the block problem; costs are negated profits."""
    nets = [_build_train(spec, train) for train in spec.trains]

    # headway rows: same station, same event kind, same direction, +-h window
    contributors: Dict[Tuple[int, str, str, int], List[Tuple[int, int]]] = {}
    for j, (net, train) in enumerate(zip(nets, spec.trains)):
        for var, event in enumerate(net.head_events):
            if event is None:
                continue
            s, kind, t = event
            for center in range(max(0, t - spec.headway),
                                min(spec.horizon, t + spec.headway) + 1):
                contributors.setdefault(
                    (s, kind, train.direction, center), []
                ).append((j, var))
    # platform rows: dwell arcs covering a slot, both directions share tracks
    platform: Dict[Tuple[int, int], List[Tuple[int, int]]] = {}
    for j, net in enumerate(nets):
        for var, occ in enumerate(net.occupations):
            if occ is None:
                continue
            s, ta, td = occ
            for slot in range(ta, td):
                platform.setdefault((s, slot), []).append((j, var))

    rows: List[List[Tuple[int, int]]] = []
    seen_support = set()
    for key in sorted(contributors):
        entries = contributors[key]
        if len({j for j, _ in entries}) < 2:
            continue
        support = frozenset(entries)
        if support in seen_support:
            continue
        seen_support.add(support)
        rows.append(sorted(entries))
    for key in sorted(platform):
        entries = platform[key]
        if len({j for j, _ in entries}) < 2:
            continue
        support = frozenset(entries)
        if support in seen_support:
            continue
        seen_support.add(support)
        rows.append(sorted(entries))

    m = len(rows)
    triplets_per_block: List[List[Tuple[int, int, int]]] = [
        [] for _ in nets
    ]
    for i, entries in enumerate(rows):
        for j, var in entries:
            triplets_per_block[j].append((i, var, 1))
    blocks = []
    for j, net in enumerate(nets):
        dim = len(net.arcs)
        if dim == 0:
            raise ValidationError(
                f"train {j} has no arcs inside the horizon", block=j
            )
        costs = tuple(-p for p in net.profits)
        coupling = SparseMatrix(m, dim, triplets_per_block[j])
        dag = DagPaths(
            dim=dim, source=SOURCE, sink=SINK, arcs=tuple(net.arcs),
            include_empty_path=True,
        )
        blocks.append(Block(costs=costs, coupling=coupling, spec=dag))
    problem = BlockProblem(
        num_rows=m,
        rhs=tuple(Fraction(1) for _ in range(m)),
        blocks=tuple(blocks),
        meta={"generator": "ttp", "profit_mode": spec.profit_mode,
              "trains": len(spec.trains)},
    )
    validate_problem(problem)
    return problem


# ---------------------------------------------------------------------------
# Random instances for the fuzz corpora


def generate_random(seed: int, p: int, m: int,
                    n_j: Union[int, Sequence[int]], density: float,
                    assumption_constrained: bool = False,
                    cost_lo: int = -5, cost_hi: int = 5,
                    kinds: Sequence[str] = (
                        "explicit_points", "explicit_polyhedron", "dag_paths",
                    )) -> BlockProblem:
    """Reproducible random instance; zero is feasible in every block.

    In assumption-constrained mode the coupling is 0/1 with unit rhs, every
    block point satisfies ``A_j x_j <= 1`` and nonzero costs sit on
    coupling-free columns, so the linearized classical step is provably
    exact on the result.
    """
    rng = random.Random(seed)
    dims = list(n_j) if not isinstance(n_j, int) else [n_j] * p
    if len(dims) != p:
        raise ValueError("n_j must be an int or one dimension per block")
    blocks = []
    for j in range(p):
        dim = dims[j]
        triplets = []
        for i in range(m):
            for col in range(dim):
                if rng.random() < density:
                    value = 1 if assumption_constrained else rng.choice(
                        (1, 1, 1, 2, -1)
                    )
                    triplets.append((i, col, value))
        coupling = SparseMatrix(m, dim, triplets)
        if assumption_constrained:
            coupled = set(range(dim)) - set(coupling.zero_columns())
            costs = tuple(
                Fraction(0) if col in coupled
                else Fraction(rng.randint(cost_lo, cost_hi))
                for col in range(dim)
            )
            spec = _random_points_block(
                rng, dim, admissible=lambda x: all(
                    v <= 1 for v in coupling.matvec(x)
                ),
            )
        else:
            costs = tuple(
                Fraction(rng.randint(cost_lo, cost_hi)) for _ in range(dim)
            )
            kind = rng.choice(list(kinds))
            if kind == "explicit_points":
                spec = _random_points_block(rng, dim)
            elif kind == "explicit_polyhedron":
                spec = _random_polyhedron_block(rng, dim)
            else:
                spec = _random_dag_block(rng, dim)
        blocks.append(Block(costs=costs, coupling=coupling, spec=spec))
    if assumption_constrained:
        rhs = tuple(Fraction(1) for _ in range(m))
    else:
        rhs = tuple(Fraction(rng.randint(0, 2)) for _ in range(m))
    problem = BlockProblem(
        num_rows=m, rhs=rhs, blocks=tuple(blocks),
        meta={"generator": "random", "seed": seed},
    )
    validate_problem(problem)
    return problem


def _random_points_block(rng: random.Random, dim: int,
                         admissible=None) -> ExplicitPoints:
    count = min(2 ** dim, rng.randint(3, 8))
    points = {(0,) * dim}
    attempts = 0
    while len(points) < count and attempts < 200:
        attempts += 1
        cand = tuple(rng.randint(0, 1) for _ in range(dim))
        if admissible is not None and not admissible(cand):
            continue
        points.add(cand)
    return ExplicitPoints(dim=dim, points=tuple(sorted(points)))


def _random_polyhedron_block(rng: random.Random, dim: int) -> Polyhedron:
    num_rows = rng.randint(1, 2)
    rows = tuple(
        tuple(as_fraction(rng.choice((0, 0, 1, 1, 2))) for _ in range(dim))
        for _ in range(num_rows)
    )
    rhs = tuple(as_fraction(rng.randint(1, 3)) for _ in range(num_rows))
    return Polyhedron(dim=dim, rows=rows, rhs=rhs)


def _random_dag_block(rng: random.Random, dim: int) -> DagPaths:
    # layered chain with optional parallel arcs; leftover vars stay unmapped
    arcs: List[Tuple[object, object, int]] = []
    layers = max(2, min(dim, rng.randint(2, 4)))
    nodes = ["n0"]
    for idx in range(1, layers):
        nodes.append(f"n{idx}")
    var = 0
    for idx in range(layers - 1):
        fan = 1 + (1 if var + (layers - idx) < dim and rng.random() < 0.5 else 0)
        for _ in range(fan):
            if var >= dim:
                break
            arcs.append((nodes[idx], nodes[idx + 1], var))
            var += 1
    if var == 0:
        arcs.append((nodes[0], nodes[-1], 0))
    return DagPaths(
        dim=dim, source=nodes[0], sink=nodes[-1], arcs=tuple(arcs),
        include_empty_path=True,
    )
