"""Immutable sparse matrices over exact rationals.

Coupling blocks are tiny by desk-scale standards but touched in every inner
loop, so the matrix keeps both triplet and per-column views. Columns are the
hot axis: block updates flip a handful of binary coordinates and residuals
are patched column by column.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, List, Sequence, Tuple

from .numeric import ZERO, as_fraction

Triplet = Tuple[int, int, Fraction]


class SparseMatrix:
    """A fixed m-by-n rational matrix stored as coalesced triplets."""

    __slots__ = ("num_rows", "num_cols", "triplets", "_by_col")

    def __init__(self, num_rows: int, num_cols: int, triplets: Iterable[Sequence]):
        if num_rows < 0 or num_cols < 0:
            raise ValueError("matrix dimensions must be nonnegative")
        self.num_rows = num_rows
        self.num_cols = num_cols
        seen: dict = {}
        for entry in triplets:
            if len(entry) != 3:
                raise ValueError(f"triplet must be [row, col, value], got {entry!r}")
            i, j, raw = entry
            if not isinstance(i, int) or not isinstance(j, int):
                raise ValueError(f"triplet indices must be integers, got {entry!r}")
            if not (0 <= i < num_rows) or not (0 <= j < num_cols):
                raise ValueError(
                    f"triplet ({i},{j}) outside {num_rows}x{num_cols} matrix"
                )
            value = as_fraction(raw)
            seen[(i, j)] = seen.get((i, j), ZERO) + value
        items = sorted((ij, v) for ij, v in seen.items() if v != 0)
        self.triplets: Tuple[Triplet, ...] = tuple(
            (i, j, v) for (i, j), v in items
        )
        by_col: List[List[Tuple[int, Fraction]]] = [[] for _ in range(num_cols)]
        for i, j, v in self.triplets:
            by_col[j].append((i, v))
        self._by_col = tuple(tuple(col) for col in by_col)

    @classmethod
    def from_dense(cls, rows: Sequence[Sequence]) -> "SparseMatrix":
        m = len(rows)
        n = len(rows[0]) if m else 0
        trips = []
        for i, row in enumerate(rows):
            if len(row) != n:
                raise ValueError("ragged dense matrix")
            for j, v in enumerate(row):
                f = as_fraction(v)
                if f != 0:
                    trips.append((i, j, f))
        return cls(m, n, trips)

    def column(self, j: int) -> Tuple[Tuple[int, Fraction], ...]:
        return self._by_col[j]

    def matvec(self, x: Sequence) -> List[Fraction]:
        """A @ x. Fast for binary x: zero entries skip their columns."""
        if len(x) != self.num_cols:
            raise ValueError(f"matvec length mismatch: {len(x)} vs {self.num_cols}")
        out = [ZERO] * self.num_rows
        for j, xj in enumerate(x):
            if not xj:
                continue
            if xj == 1:
                for i, v in self._by_col[j]:
                    out[i] += v
            else:
                for i, v in self._by_col[j]:
                    out[i] += v * xj
        return out

    def rmatvec(self, y: Sequence) -> List[Fraction]:
        """A^T @ y."""
        if len(y) != self.num_rows:
            raise ValueError(f"rmatvec length mismatch: {len(y)} vs {self.num_rows}")
        out = [ZERO] * self.num_cols
        for i, j, v in self.triplets:
            yi = y[i]
            if yi:
                out[j] += v * yi
        return out

    def entries_zero_one(self) -> bool:
        return all(v == 1 for _, _, v in self.triplets)

    def zero_columns(self) -> Tuple[int, ...]:
        """Indices of columns with no nonzero entry."""
        return tuple(j for j in range(self.num_cols) if not self._by_col[j])

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, SparseMatrix)
            and self.num_rows == other.num_rows
            and self.num_cols == other.num_cols
            and self.triplets == other.triplets
        )

    def __hash__(self):
        return hash((self.num_rows, self.num_cols, self.triplets))

    def __repr__(self) -> str:
        return (
            f"SparseMatrix({self.num_rows}x{self.num_cols}, "
            f"nnz={len(self.triplets)})"
        )
