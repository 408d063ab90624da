"""Finite unions of closed real intervals.

:class:`IntervalSet` is the common currency between the spectrum code and the
Cantor-set tools.  Endpoints may be floats or exact ``Fraction`` values.  Exact
inputs stay exact, which lets thickness be computed in rational arithmetic.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

__all__ = ["IntervalSet", "CantorApprox", "MERGE_FLOOR"]

#: Gaps shorter than this are treated as resolution artifacts and closed.
MERGE_FLOOR = 1e-12


def _normalize(pairs, floor):
    cleaned = []
    for l, r in pairs:
        if isinstance(l, float) or isinstance(r, float):
            if not (np.isfinite(l) and np.isfinite(r)):
                raise ValueError("interval endpoints must be finite")
        if r < l:
            raise ValueError(f"interval [{l}, {r}] has right end below left end")
        cleaned.append((l, r))
    cleaned.sort(key=lambda t: (t[0], t[1]))
    merged = []
    for l, r in cleaned:
        if merged and l - merged[-1][1] <= floor:
            if r > merged[-1][1]:
                merged[-1] = (merged[-1][0], r)
        else:
            merged.append((l, r))
    return tuple(merged)


@dataclass(frozen=True, eq=False)
class IntervalSet:
    """Sorted, pairwise disjoint closed intervals ``[l_i, r_i]`` with ``r_i < l_{i+1}``.

    Overlapping input intervals are merged, and so are gaps of length at most
    ``merge_floor``.  Pass ``merge_floor=0`` to keep every positive gap.
    """

    intervals: tuple = ()
    merge_floor: float = MERGE_FLOOR

    def __init__(self, intervals: Iterable = (), merge_floor: float = MERGE_FLOOR):
        object.__setattr__(self, "merge_floor", merge_floor)
        object.__setattr__(self, "intervals", _normalize(list(intervals), merge_floor))

    @classmethod
    def from_arrays(cls, lefts, rights, merge_floor: float = MERGE_FLOOR) -> "IntervalSet":
        lefts = np.asarray(lefts, dtype=float)
        rights = np.asarray(rights, dtype=float)
        return cls(zip(lefts.tolist(), rights.tolist()), merge_floor=merge_floor)

    # basic views -----------------------------------------------------------
    def __len__(self):
        return len(self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def __bool__(self):
        return bool(self.intervals)

    def __eq__(self, other):
        if not isinstance(other, IntervalSet):
            return NotImplemented
        return self.intervals == other.intervals

    def __repr__(self):
        n = len(self.intervals)
        if n <= 4:
            return f"{type(self).__name__}({list(self.intervals)!r})"
        return f"{type(self).__name__}(<{n} intervals in [{self.intervals[0][0]}, {self.intervals[-1][1]}]>)"

    @property
    def lefts(self) -> np.ndarray:
        return np.array([float(l) for l, _ in self.intervals])

    @property
    def rights(self) -> np.ndarray:
        return np.array([float(r) for _, r in self.intervals])

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    def hull(self):
        if not self.intervals:
            raise ValueError("empty set has no hull")
        return self.intervals[0][0], self.intervals[-1][1]

    def gaps(self) -> list:
        """Bounded components of the complement inside the hull, as ``(left, right)`` pairs."""
        return [(a[1], b[0]) for a, b in zip(self.intervals[:-1], self.intervals[1:])]

    def measure(self):
        """Total length; exact when the endpoints are exact."""
        return sum((r - l for l, r in self.intervals), start=0)

    # set relations -----------------------------------------------------------
    def contains_point(self, x, tol: float = 0.0) -> bool:
        lefts = self.lefts
        i = int(np.searchsorted(lefts, float(x), side="right")) - 1
        return i >= 0 and float(x) <= float(self.intervals[i][1]) + tol

    def contains(self, other: "IntervalSet", tol: float = 0.0) -> bool:
        """Whether every interval of ``other`` lies inside one interval of ``self`` (up to ``tol``)."""
        if not other.intervals:
            return True
        lefts = self.lefts
        rights = self.rights
        for l, r in other.intervals:
            i = int(np.searchsorted(lefts, float(l) + tol, side="right")) - 1
            if i < 0 or float(r) > rights[i] + tol or float(l) < lefts[i] - tol:
                return False
        return True

    def hausdorff_distance(self, other: "IntervalSet") -> float:
        """Hausdorff distance between the two closed sets."""
        if not self.intervals or not other.intervals:
            return float("inf") if (self.intervals or other.intervals) else 0.0

        def one_sided(a, b):
            # sup over points of a of the distance to b; attained at endpoints of a
            # or at midpoints of gaps of b that fall inside a
            cand = list(a.lefts) + list(a.rights)
            for gl, gr in b.gaps():
                mid = 0.5 * (float(gl) + float(gr))
                if a.contains_point(mid):
                    cand.append(mid)
            bl, br = b.lefts, b.rights
            worst = 0.0
            for x in cand:
                d = np.maximum(bl - x, 0.0) + np.maximum(x - br, 0.0)
                worst = max(worst, float(d.min()))
            return worst

        return max(one_sided(self, other), one_sided(other, self))

    def clip(self, lo, hi) -> "IntervalSet":
        out = []
        for l, r in self.intervals:
            l2, r2 = max(l, lo), min(r, hi)
            if l2 <= r2:
                out.append((l2, r2))
        return type(self)._rebuild(self, out)

    @staticmethod
    def _rebuild(template, pairs):
        return IntervalSet(pairs, merge_floor=template.merge_floor)

    def affine(self, scale, shift) -> "IntervalSet":
        """Image under ``x -> scale * x + shift`` with ``scale > 0``."""
        if not scale > 0:
            raise ValueError("scale must be positive")
        return IntervalSet(((scale * l + shift, scale * r + shift) for l, r in self.intervals), merge_floor=0)

    def union(self, other: "IntervalSet") -> "IntervalSet":
        return IntervalSet(self.intervals + other.intervals, merge_floor=self.merge_floor)

    # serialization -----------------------------------------------------------
    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["left", "right"])
        for l, r in self.intervals:
            w.writerow([format(float(l), ".17g"), format(float(r), ".17g")])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "IntervalSet":
        rows = list(csv.reader(io.StringIO(text)))
        if rows and rows[0] and rows[0][0].strip() == "left":
            rows = rows[1:]
        return cls(((float(a), float(b)) for a, b in rows if a.strip()), merge_floor=0)

    def to_list(self) -> list:
        return [[float(l), float(r)] for l, r in self.intervals]


@dataclass(frozen=True, eq=False)
class CantorApprox(IntervalSet):
    """An :class:`IntervalSet` produced by an orbit computation, with its bookkeeping.

    ``undecided_cells`` counts grid energies that never escaped within the step
    budget inside runs wider than the resolution.  Those energies are included.
    ``empty`` flags an empty result.  ``meta`` echoes the computation parameters.
    """

    undecided_cells: int = 0
    meta: dict = field(default_factory=dict)

    def __init__(self, intervals: Iterable = (), merge_floor: float = MERGE_FLOOR, undecided_cells: int = 0, meta=None):
        IntervalSet.__init__(self, intervals, merge_floor)
        object.__setattr__(self, "undecided_cells", int(undecided_cells))
        object.__setattr__(self, "meta", dict(meta or {}))

    @property
    def empty(self) -> bool:
        return not self.intervals

    @staticmethod
    def _rebuild(template, pairs):
        return CantorApprox(pairs, template.merge_floor, template.undecided_cells, template.meta)

    def summary(self) -> dict:
        out = dict(self.meta)
        out.update(
            intervals=len(self.intervals),
            total_length=float(self.measure()),
            undecided_cells=self.undecided_cells,
            empty=self.empty,
        )
        return out
