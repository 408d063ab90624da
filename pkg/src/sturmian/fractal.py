"""Gaps, bridges, thickness and box-counting dimension of finite interval unions.

Thickness follows the Newhouse definition.  Order the gaps ``U_1, U_2, ...``.
For an endpoint ``u`` of ``U_k``, its bridge is the component of the hull minus
``U_1 .. U_k`` that contains ``u``.  The thickness of one ordering is the
infimum of ``|bridge| / |U_k|`` over all gaps and endpoints.  The thickness of
the set is the supremum over orderings, and that supremum is attained by
ordering gaps by decreasing length.  Ties are broken left to right.
:func:`thickness_bruteforce` checks this claim on small sets by trying every
ordering.

A set of thickness ``tau`` has Hausdorff dimension at least
``log 2 / log(2 + 1/tau)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .exceptions import PreconditionError, TooFewScalesError
from .intervals import CantorApprox, IntervalSet

__all__ = [
    "IntervalSet",
    "CantorApprox",
    "GapPresentation",
    "ThicknessReport",
    "BoxDimensionFit",
    "presentation",
    "thickness",
    "thickness_bruteforce",
    "dim_lower_bound",
    "box_counts",
    "box_dimension",
    "default_scales",
    "measure",
    "middle_cantor",
]


@dataclass(frozen=True)
class GapPresentation:
    """Gaps ordered by decreasing length, each with the bridges at its two endpoints.

    ``gaps[i] = (left, right)`` and ``bridges[i] = (left_bridge, right_bridge)``.
    The left bridge sits at the gap's left endpoint and extends leftwards.
    """

    hull: tuple
    gaps: tuple
    bridges: tuple


@dataclass(frozen=True)
class ThicknessReport:
    tau: object  # Fraction, float or math.inf
    dim_lower: float
    witness: Optional[dict] = None

    def to_dict(self) -> dict:
        return {
            "tau": float(self.tau),
            "dim_lower": self.dim_lower,
            "witness": None
            if self.witness is None
            else {k: (float(v) if not isinstance(v, str) else v) for k, v in self.witness.items()},
        }


@dataclass(frozen=True)
class BoxDimensionFit:
    dim: float
    r2: float
    scales: tuple
    counts: tuple
    dropped: tuple

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "r2": self.r2,
            "scales": [float(s) for s in self.scales],
            "counts": list(self.counts),
            "dropped": [float(s) for s in self.dropped],
        }


def _require(s: IntervalSet):
    if not isinstance(s, IntervalSet):
        raise TypeError("expected an IntervalSet")
    if s.is_empty:
        raise PreconditionError("set must contain at least one interval")


def measure(s: IntervalSet):
    """Total length of the intervals."""
    return s.measure()


def presentation(s: IntervalSet) -> GapPresentation:
    _require(s)
    hull = s.hull()
    gaps = s.gaps()
    n = len(gaps)
    if n == 0:
        return GapPresentation(hull, (), ())
    lengths = [r - l for l, r in gaps]

    # Left blocker: nearest gap on the left with length >= current (removed earlier,
    # either longer or equal and further left).  Right blocker: nearest gap on the
    # right that is strictly longer.
    left_block = [None] * n
    stack = []
    for i in range(n):
        while stack and lengths[stack[-1]] < lengths[i]:
            stack.pop()
        left_block[i] = stack[-1] if stack else None
        stack.append(i)
    right_block = [None] * n
    stack = []
    for i in range(n - 1, -1, -1):
        while stack and lengths[stack[-1]] <= lengths[i]:
            stack.pop()
        right_block[i] = stack[-1] if stack else None
        stack.append(i)

    bridges = []
    for i, (gl, gr) in enumerate(gaps):
        lb = gl - (hull[0] if left_block[i] is None else gaps[left_block[i]][1])
        rb = (hull[1] if right_block[i] is None else gaps[right_block[i]][0]) - gr
        bridges.append((lb, rb))

    order = sorted(range(n), key=lambda i: (-lengths[i], i))
    return GapPresentation(hull, tuple(gaps[i] for i in order), tuple(bridges[i] for i in order))


def dim_lower_bound(tau) -> float:
    """``log 2 / log(2 + 1/tau)``, with the limits 0 at ``tau = 0`` and 1 at ``tau = inf``."""
    if tau == math.inf:
        return 1.0
    if tau <= 0:
        return 0.0
    return math.log(2) / math.log(2 + 1 / float(tau)) if not hasattr(tau, "denominator") else (
        math.log(2) / math.log(float(2 + 1 / tau))
    )


def thickness(s: IntervalSet) -> ThicknessReport:
    """Thickness under the decreasing-length presentation, with the Hausdorff lower bound.

    Endpoints given as ``Fraction`` give an exact ``tau``.  A set without gaps
    has ``tau = inf`` and ``dim_lower = 1``.
    """
    pres = presentation(s)
    if not pres.gaps:
        return ThicknessReport(math.inf, 1.0, None)
    best = None
    for (gl, gr), (lb, rb) in zip(pres.gaps, pres.bridges):
        g = gr - gl
        for side, b in (("left", lb), ("right", rb)):
            ratio = b / g
            if best is None or ratio < best[0]:
                best = (ratio, {"gap_left": gl, "gap_right": gr, "side": side, "bridge": b, "gap": g})
    tau, witness = best
    return ThicknessReport(tau, dim_lower_bound(tau), witness)


def _ordering_thickness(gaps, hull, order):
    removed = []
    worst = math.inf
    for i in order:
        gl, gr = gaps[i]
        removed.append(i)
        left_edge = max([gaps[j][1] for j in removed if gaps[j][1] <= gl], default=hull[0])
        right_edge = min([gaps[j][0] for j in removed if gaps[j][0] >= gr], default=hull[1])
        g = gr - gl
        worst = min(worst, (gl - left_edge) / g, (right_edge - gr) / g)
    return worst


def thickness_bruteforce(s: IntervalSet):
    """Supremum over every gap ordering (factorial cost; at most 8 gaps)."""
    _require(s)
    gaps = s.gaps()
    if not gaps:
        return math.inf
    if len(gaps) > 8:
        raise PreconditionError("exhaustive ordering search is limited to 8 gaps")
    hull = s.hull()
    return max(_ordering_thickness(gaps, hull, p) for p in itertools.permutations(range(len(gaps))))


def box_counts(s: IntervalSet, scales: Sequence[float]) -> np.ndarray:
    """Number of half-open boxes ``[h + k eps, h + (k+1) eps)`` meeting the set, where ``h`` is the hull's left end."""
    _require(s)
    lo = float(s.hull()[0])
    L = s.lefts - lo
    R = s.rights - lo
    out = []
    for eps in scales:
        eps = float(eps)
        if not eps > 0:
            raise ValueError("scales must be positive")
        a = np.floor(L / eps)
        b = np.floor(R / eps)
        if b[-1] > 2**52:
            raise PreconditionError(f"scale {eps} is too fine for exact box indices")
        total = float(np.sum(b - a + 1)) - float(np.sum(a[1:] == b[:-1]))
        out.append(int(total))
    return np.array(out, dtype=np.int64)


def default_scales(s: IntervalSet, finest: Optional[float] = None) -> list:
    """Dyadic fractions of the hull length from 1/16 down to ``finest``.

    ``finest`` defaults to four times the resolution recorded on a
    :class:`CantorApprox`, and otherwise to ``hull / 2**12``.
    """
    _require(s)
    lo, hi = s.hull()
    width = float(hi - lo)
    if width <= 0:
        raise PreconditionError("a single point has no box-counting scales")
    if finest is None:
        res = s.meta.get("resolution") if isinstance(s, CantorApprox) else None
        finest = 4 * res if res else width / 2**12
    scales = []
    k = 4
    while width / 2**k >= finest:
        scales.append(width / 2**k)
        k += 1
    return scales


def box_dimension(s: IntervalSet, scales: Optional[Sequence[float]] = None) -> BoxDimensionFit:
    """Least-squares slope of ``log N(eps)`` against ``log(1/eps)``.

    A scale is dropped as saturated when its count equals the count at a
    neighbouring scale in the sorted list.  This removes the plateaus where a
    finite approximation is resolved into separate pieces.
    :class:`TooFewScalesError` is raised if fewer than two scales remain.
    """
    if scales is None:
        scales = default_scales(s)
    scales = sorted({float(e) for e in scales}, reverse=True)
    counts = box_counts(s, scales)
    keep = np.ones(len(scales), dtype=bool)
    for i in range(len(scales) - 1):
        if counts[i] == counts[i + 1]:
            keep[i] = keep[i + 1] = False
    used = [e for e, k in zip(scales, keep) if k]
    if len(used) < 2:
        raise TooFewScalesError(f"only {len(used)} unsaturated scale(s) out of {len(scales)}")
    x = np.log(1 / np.array(used))
    y = np.log(counts[keep].astype(float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    dropped = tuple(e for e, k in zip(scales, keep) if not k)
    return BoxDimensionFit(float(slope), r2, tuple(used), tuple(int(c) for c in counts[keep]), dropped)


def middle_cantor(stage: int, ratio=None) -> IntervalSet:
    """Stage ``stage`` of the symmetric Cantor construction on [0, 1].

    Each interval keeps two outer pieces of relative length ``ratio`` (default
    1/3 as an exact ``Fraction``).  Exact input keeps the endpoints exact.
    """
    from fractions import Fraction

    if ratio is None:
        ratio = Fraction(1, 3)
    if not 0 < ratio < Fraction(1, 2) if isinstance(ratio, Fraction) else not 0 < ratio < 0.5:
        raise ValueError("ratio must lie in (0, 1/2)")
    one = ratio / ratio  # exact 1 in the same number type
    ivs = [(0 * one, one)]
    for _ in range(stage):
        nxt = []
        for l, r in ivs:
            w = (r - l) * ratio
            nxt.append((l, l + w))
            nxt.append((r - w, r))
        ivs = nxt
    return IntervalSet(ivs, merge_floor=0)
