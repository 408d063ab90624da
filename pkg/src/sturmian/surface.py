"""Trace-map dynamics on the Fricke surfaces and spectrum approximation.

The trace map for a digit ``a`` is ``T_a = G^a o H`` with

    G(x1, x2, x3) = (2 x1 x3 - x2, x1, x3),    H(x1, x2, x3) = (x1, x3, x2).

Every ``T_a`` preserves the Fricke invariant ``x1^2 + x2^2 + x3^2 - 2 x1 x2 x3``.
Its level ``1 + lam^2/4`` is the surface ``S_lam``.  An energy ``E`` lies in the
spectrum of the Sturmian operator with coupling ``lam`` exactly when the orbit
of ``((E - lam)/2, E/2, 1)`` under ``T_{a_1}, T_{a_2}, ...`` stays bounded.

Spectrum approximation
----------------------
:func:`spectrum_estimate` evaluates the escape step of every energy on a grid
with spacing ``resolution / 2``.  The bounded orbits are then organised by
depth.  A maximal run of grid energies that all survive ``d`` steps is kept as
one piece once it is no wider than ``resolution``.  Otherwise it is split at
its earliest escape and each part is examined again.  Each kept piece has its
two edges refined by bisection between the outermost survivor and the first
escaped neighbour.  Runs that never escape within the budget are reported as
undecided and included.  Because the spectrum has zero measure for
``lam > 0``, a plain "bounded after ``max_steps``" test on a grid would miss
almost all of it.  The depth-adaptive split avoids that.

:func:`survival_set` reuses the same runs.  Inside each run it keeps the
energies whose orbits also avoid the balls around the four cusp points ``P_i``
and stay within the max-norm bound.  The region test runs for a number of steps
fixed by the resolution and the digits, never more than the run's depth.  The
survival set is therefore contained in the spectrum estimate computed with the
same budget, and it grows as ``rho`` shrinks.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels as K
from .contfrac import ContinuedFraction, as_continued_fraction
from .exceptions import PreconditionError, SturmianError
from .intervals import CantorApprox

__all__ = [
    "TriplePoint",
    "FrickeLevel",
    "OrbitResult",
    "SurvivalRegionSpec",
    "P1",
    "P2",
    "P3",
    "P4",
    "CUSP_POINTS",
    "G",
    "G_inverse",
    "H",
    "trace_map_apply",
    "trace_map_inverse",
    "fricke",
    "spectral_line_point",
    "orbit_classify",
    "spectrum_estimate",
    "survival_set",
    "survival_depth",
    "worker_count",
    "DEFAULT_THRESHOLD",
]

DEFAULT_THRESHOLD = 10.0
MAX_HALVINGS = 40


class EscapedOverflow(SturmianError, FloatingPointError):
    """A trace-map image overflowed to infinity; the orbit has escaped."""


@dataclass(frozen=True)
class TriplePoint:
    """A point of R^3 in trace coordinates."""

    x1: float
    x2: float
    x3: float

    def __post_init__(self):
        for name in ("x1", "x2", "x3"):
            v = getattr(self, name)
            if not math.isfinite(float(v)):
                raise ValueError(f"TriplePoint coordinate {name}={v!r} is not finite")

    def as_array(self, dtype=float) -> np.ndarray:
        return np.array([self.x1, self.x2, self.x3], dtype=dtype)

    def __iter__(self):
        return iter((self.x1, self.x2, self.x3))

    @property
    def max_norm(self) -> float:
        return max(abs(float(self.x1)), abs(float(self.x2)), abs(float(self.x3)))


P1 = TriplePoint(1.0, 1.0, 1.0)
P2 = TriplePoint(-1.0, -1.0, 1.0)
P3 = TriplePoint(1.0, -1.0, -1.0)
P4 = TriplePoint(-1.0, 1.0, -1.0)
CUSP_POINTS = (P1, P2, P3, P4)


@dataclass(frozen=True)
class FrickeLevel:
    """The surface ``S_lam`` given by Fricke invariant ``1 + lam^2/4``."""

    lam: float

    def __post_init__(self):
        if not (self.lam >= 0 and math.isfinite(self.lam)):
            raise ValueError("coupling must be a finite nonnegative number")

    @property
    def level(self) -> float:
        return 1.0 + self.lam * self.lam / 4.0

    @classmethod
    def of_point(cls, p) -> "FrickeLevel":
        """Level through ``p`` (coupling ``2 sqrt(fricke - 1)``, clamped at 0)."""
        return cls(2.0 * math.sqrt(max(float(fricke(p)) - 1.0, 0.0)))


@dataclass(frozen=True)
class OrbitResult:
    """Verdict on an orbit.

    ``status`` is ``"bounded"`` (bounded up to the step budget), ``"escaped"``,
    or ``"left_region"``.  ``steps`` counts the iterations performed.
    ``max_norm`` is the largest max-coordinate seen (``inf`` after overflow).
    ``exit_index`` is the step of a region exit, or ``None``.
    """

    status: str
    steps: int
    max_norm: float
    exit_index: Optional[int] = None

    BOUNDED = "bounded"
    ESCAPED = "escaped"
    LEFT_REGION = "left_region"


_STATUS = {K.STATUS_BOUNDED: "bounded", K.STATUS_ESCAPED: "escaped", K.STATUS_LEFT_REGION: "left_region"}


@dataclass(frozen=True)
class SurvivalRegionSpec:
    """Survival region: max-norm at most ``bound``, outside the balls ``B_rho(P_i)``.

    ``bound=None`` means the default ``1 + lam`` for the coupling in use.
    """

    rho: float
    bound: Optional[float] = None

    def __post_init__(self):
        if not (0 < self.rho < 1):
            raise ValueError("rho must lie in (0, 1) so that the four balls are disjoint")
        if self.bound is not None and not self.bound > 0:
            raise ValueError("bound must be positive")

    def resolved_bound(self, lam: float) -> float:
        return 1.0 + lam if self.bound is None else float(self.bound)


# ---------------------------------------------------------------------------
# maps


def _coords(p):
    if isinstance(p, TriplePoint):
        return np.array([p.x1, p.x2, p.x3], dtype=np.result_type(p.x1, p.x2, p.x3, float)), True
    arr = np.asarray(p)
    if arr.shape[-1:] != (3,):
        raise ValueError("points must have a trailing axis of length 3")
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(float)
    return arr, False


def H(p):
    """Swap the second and third coordinates."""
    x, single = _coords(p)
    y = x[..., [0, 2, 1]]
    return TriplePoint(*y.tolist()) if single else y


def G(p):
    x, single = _coords(p)
    y = np.stack([2 * x[..., 0] * x[..., 2] - x[..., 1], x[..., 0], x[..., 2]], axis=-1)
    return TriplePoint(*y.tolist()) if single else y


def G_inverse(p):
    x, single = _coords(p)
    y = np.stack([x[..., 1], 2 * x[..., 1] * x[..., 2] - x[..., 0], x[..., 2]], axis=-1)
    return TriplePoint(*y.tolist()) if single else y


def _check_a(a):
    if isinstance(a, bool) or int(a) != a or a < 1:
        raise ValueError("digit a must be a positive integer")
    return int(a)


def trace_map_apply(a: int, p):
    """``T_a(p) = G^a(H(p))``.

    ``p`` is a :class:`TriplePoint` or an array with trailing axis 3; arrays keep
    their floating dtype, so ``np.longdouble`` input is iterated in extended
    precision.  Array results may contain ``inf`` for escaping orbits; a
    :class:`TriplePoint` result that would overflow raises
    :class:`EscapedOverflow`.
    """
    a = _check_a(a)
    x, single = _coords(p)
    with np.errstate(over="ignore", invalid="ignore"):
        x1, x2, x3 = x[..., 0], x[..., 2], x[..., 1]
        for _ in range(a):
            x1, x2 = 2 * x1 * x3 - x2, x1
        y = np.stack([x1, x2, x3], axis=-1)
    if single:
        if not np.all(np.isfinite(y)):
            raise EscapedOverflow(f"T_{a} overflowed at {p}")
        return TriplePoint(*y.tolist())
    return y


def trace_map_inverse(a: int, p):
    """``T_a^{-1}(p) = H(G^{-a}(p))``."""
    a = _check_a(a)
    x, single = _coords(p)
    with np.errstate(over="ignore", invalid="ignore"):
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        for _ in range(a):
            x1, x2 = x2, 2 * x2 * x3 - x1
        y = np.stack([x1, x3, x2], axis=-1)
    if single:
        if not np.all(np.isfinite(y)):
            raise EscapedOverflow(f"T_{a}^-1 overflowed at {p}")
        return TriplePoint(*y.tolist())
    return y


def fricke(p):
    """Fricke invariant ``x1^2 + x2^2 + x3^2 - 2 x1 x2 x3`` (scalar or array)."""
    x, single = _coords(p)
    x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
    v = x1 * x1 + x2 * x2 + x3 * x3 - 2 * x1 * x2 * x3
    return v.item() if single and x.dtype == np.float64 else v


def spectral_line_point(lam: float, E):
    """``((E - lam)/2, E/2, 1)``; array ``E`` gives an array of points."""
    if np.ndim(E) == 0:
        return TriplePoint((E - lam) / 2, E / 2, 1.0 if not isinstance(E, np.floating) else type(E)(1))
    E = np.asarray(E)
    return np.stack([(E - lam) / 2, E / 2, np.ones_like(E)], axis=-1)


# ---------------------------------------------------------------------------
# orbit classification


def _digit_array(digits, n: int) -> np.ndarray:
    cf = as_continued_fraction(digits)
    return np.asarray(cf.digits(n), dtype=np.int64)


def orbit_classify(
    p,
    digits,
    max_steps: int = 1000,
    escape_threshold: float = DEFAULT_THRESHOLD,
    region: Optional[SurvivalRegionSpec] = None,
) -> OrbitResult:
    """Iterate ``T_{a_1}, T_{a_2}, ...`` from ``p`` and classify the orbit.

    Escape is declared at the first step where the max-coordinate exceeds
    ``escape_threshold`` on two consecutive steps and has strictly grown, or
    where a coordinate overflows.  With a ``region``, the orbit leaves the
    survival region at the first step (step 0 included) where it lies within
    ``rho`` (Euclidean) of a cusp point or its max-norm exceeds the bound.
    The default bound ``1 + lam`` uses the coupling of the level through ``p``.
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    if not escape_threshold > 2:
        raise ValueError("escape_threshold must exceed 2")
    if not isinstance(p, TriplePoint):
        p = TriplePoint(*np.asarray(p, dtype=float).tolist())
    arr = _digit_array(digits, max_steps)
    if region is not None:
        lam = FrickeLevel.of_point(p).lam
        use, rho, bound = True, float(region.rho), region.resolved_bound(lam)
    else:
        use, rho, bound = False, 0.0, 0.0
    status, steps, max_norm, exit_index = K.classify_orbit(
        float(p.x1), float(p.x2), float(p.x3), arr, int(max_steps), float(escape_threshold), use, rho, bound
    )
    return OrbitResult(_STATUS[status], int(steps), float(max_norm), None if exit_index < 0 else int(exit_index))


# ---------------------------------------------------------------------------
# parallel helpers


def worker_count() -> int:
    """Thread count: ``STURMIAN_THREADS`` if set, else the CPU count."""
    env = os.environ.get("STURMIAN_THREADS")
    n = os.cpu_count() or 1
    if env:
        try:
            n = min(n, int(env)) if int(env) > 0 else n
        except ValueError as exc:
            raise PreconditionError(f"STURMIAN_THREADS must be an integer, got {env!r}") from exc
    return max(1, n)


def _chunked(fn, n: int, threads: int, min_chunk: int = 2048):
    """Run ``fn(start, stop)`` over ``range(n)`` in disjoint chunks on a thread pool."""
    if n == 0:
        return
    threads = max(1, min(threads, math.ceil(n / min_chunk)))
    if threads == 1:
        fn(0, n)
        return
    bounds = np.linspace(0, n, 4 * threads + 1).astype(int)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        list(pool.map(lambda ij: fn(*ij), zip(bounds[:-1], bounds[1:])))


def _grid(lam: float, resolution: float) -> np.ndarray:
    lo, hi = -3.0 - lam, 3.0 + lam
    h = resolution / 2.0
    n = int(math.ceil((hi - lo) / h)) + 1
    return np.linspace(lo, hi, n)


@dataclass(frozen=True)
class _Runs:
    energies: np.ndarray
    depth: np.ndarray  # escape step per grid energy (max_steps + 1 if none)
    starts: np.ndarray
    stops: np.ndarray  # exclusive
    run_depth: np.ndarray  # every energy in the run survives this many steps
    undecided: np.ndarray  # bool per run
    digits: np.ndarray


def _split_runs(E: np.ndarray, D: np.ndarray, resolution: float, max_steps: int):
    starts, stops, depths, undecided = [], [], [], []
    stack = [(0, len(E), 0)]
    while stack:
        i, j, d = stack.pop()
        if E[j - 1] - E[i] <= resolution:
            starts.append(i), stops.append(j), depths.append(d), undecided.append(False)
            continue
        seg = D[i:j]
        m = int(seg.min())
        if m > max_steps:
            starts.append(i), stops.append(j), depths.append(max_steps), undecided.append(True)
            continue
        alive = seg > m
        if not alive.any():
            continue
        edges = np.flatnonzero(np.diff(np.concatenate(([False], alive, [False])).astype(np.int8)))
        for s, t in zip(edges[0::2][::-1], edges[1::2][::-1]):
            stack.append((i + int(s), i + int(t), m))
    order = np.argsort(starts)
    return (
        np.asarray(starts, dtype=np.int64)[order],
        np.asarray(stops, dtype=np.int64)[order],
        np.asarray(depths, dtype=np.int64)[order],
        np.asarray(undecided, dtype=bool)[order],
    )


def _compute_runs(lam, digits, resolution, max_steps, escape_threshold, threads) -> _Runs:
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    if not lam >= 0:
        raise ValueError("coupling must be nonnegative")
    if not escape_threshold > 2:
        raise ValueError("escape_threshold must exceed 2")
    arr = _digit_array(digits, max_steps)
    E = _grid(lam, resolution)
    D = np.empty(len(E), dtype=np.int64)

    def work(a, b):
        K.escape_depths(float(lam), E[a:b], arr, int(max_steps), float(escape_threshold), D[a:b])

    _chunked(work, len(E), threads)
    starts, stops, depths, undecided = _split_runs(E, D, resolution, max_steps)
    return _Runs(E, D, starts, stops, depths, undecided, arr)


def _refine_edges(runs: _Runs, lam, s, t, d, rd, resolution, escape_threshold, region_args, threads):
    """Bisected left and right edges for the grid runs ``[s, t)`` alive at depths ``d`` (region depths ``rd``)."""
    E = runs.energies
    n = len(s)
    left = E[s].copy()
    right = E[t - 1].copy()
    tol = resolution / 16.0
    use, rho, bound = region_args
    for side in ("left", "right"):
        if side == "left":
            mask = s > 0
            inside, outside = E[s[mask]], E[s[mask] - 1]
        else:
            mask = t < len(E)
            inside, outside = E[t[mask] - 1], E[t[mask]]
        dd = d[mask].astype(np.int64)
        rdd = rd[mask].astype(np.int64)
        res = np.empty(len(inside))

        def work(a, b):
            K.bisect_edges(
                float(lam), inside[a:b], outside[a:b], dd[a:b], rdd[a:b], runs.digits, float(escape_threshold),
                use, rho, bound, tol, MAX_HALVINGS, res[a:b],
            )

        _chunked(work, len(inside), threads, min_chunk=256)
        if side == "left":
            left[mask] = res
        else:
            right[mask] = res
    return left, right


def _finish(lam, left, right, undecided_cells, meta):
    out = CantorApprox(zip(left.tolist(), right.tolist()), undecided_cells=undecided_cells, meta=meta)
    return out.clip(-2.0 - lam, 2.0 + lam)


def spectrum_estimate(
    lam: float,
    digits="golden",
    resolution: float = 1e-3,
    max_steps: int = 1000,
    escape_threshold: float = DEFAULT_THRESHOLD,
    threads: Optional[int] = None,
) -> CantorApprox:
    """Finite union of intervals covering the energies with bounded trace-map orbits.

    The search window is ``[-3 - lam, 3 + lam]`` sampled at spacing
    ``resolution / 2``, and the result is clipped to ``[-2 - lam, 2 + lam]``.
    Every grid energy still bounded after ``max_steps`` lies inside the result.
    Edges are located by bisection to within ``resolution / 16`` (at most 40
    halvings), and the unresolved sliver is included.  ``undecided_cells``
    counts grid energies in runs wider than ``resolution`` that never escaped.
    """
    threads = worker_count() if threads is None else max(1, int(threads))
    runs = _compute_runs(lam, digits, resolution, max_steps, escape_threshold, threads)
    left, right = _refine_edges(
        runs,
        lam,
        runs.starts,
        runs.stops,
        runs.run_depth,
        runs.run_depth,
        resolution,
        escape_threshold,
        (False, 0.0, 0.0),
        threads,
    )
    undecided_cells = int((runs.stops - runs.starts)[runs.undecided].sum())
    meta = dict(
        kind="spectrum",
        lam=float(lam),
        digits=as_continued_fraction(digits).describe(),
        resolution=float(resolution),
        max_steps=int(max_steps),
        escape_threshold=float(escape_threshold),
        grid_points=int(len(runs.energies)),
    )
    return _finish(lam, left, right, undecided_cells, meta)


def survival_depth(digits, resolution: float) -> int:
    """Smallest ``n`` with ``mu_u(a_1) * ... * mu_u(a_n) >= 4 pi / resolution``.

    Along the spectral line at zero coupling ``E = 2 cos(2 pi x)``, so
    ``|dE/dx| <= 4 pi``.  The linear torus maps stretch along the unstable
    direction by ``mu_u(a) = (a + sqrt(4 + a^2)) / 2`` per step.  After ``n``
    steps an energy window of width ``resolution`` therefore covers a whole
    unit of the unstable coordinate, and finer survival structure is below
    the resolution.
    """
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    target = math.log(4 * math.pi / resolution)
    total = 0.0
    n = 0
    arr = np.asarray(digits) if not isinstance(digits, (str, ContinuedFraction)) else None
    cf = None if arr is not None else as_continued_fraction(digits)
    while total < target:
        n += 1
        a = int(arr[n - 1]) if arr is not None else cf.digit(n)
        total += math.log((a + math.sqrt(4 + a * a)) / 2)
    return n


def survival_set(
    lam: float,
    region: SurvivalRegionSpec,
    digits="golden",
    resolution: float = 1e-3,
    max_steps: int = 1000,
    escape_threshold: float = DEFAULT_THRESHOLD,
    threads: Optional[int] = None,
    region_steps: Optional[int] = None,
) -> CantorApprox:
    """Energies whose orbits stay in the survival region, resolved to ``resolution``.

    Inside every spectrum run alive at depth ``d``, a grid energy is kept when
    its orbit also stays out of the cusp balls and within the max-norm bound
    for steps ``0..min(d, n_r)``.  Here ``n_r`` is :func:`survival_depth`, the
    number of steps after which the unperturbed torus dynamics has stretched
    pieces of width ``resolution`` to the whole line.  Edges are bisected with
    the combined test.  Neither depth depends on ``rho``.  The result is
    therefore contained in :func:`spectrum_estimate` for the same arguments,
    and it shrinks as ``rho`` grows.  It may be empty, in which case ``empty``
    is set.  ``region_steps`` overrides ``n_r``.
    """
    if not isinstance(region, SurvivalRegionSpec):
        raise TypeError("region must be a SurvivalRegionSpec")
    threads = worker_count() if threads is None else max(1, int(threads))
    runs = _compute_runs(lam, digits, resolution, max_steps, escape_threshold, threads)
    E = runs.energies
    bound = region.resolved_bound(lam)
    rho = float(region.rho)

    lengths = runs.stops - runs.starts
    idx = np.concatenate([np.arange(s, t) for s, t in zip(runs.starts, runs.stops)]) if len(lengths) else np.array([], int)
    n_r = survival_depth(runs.digits, resolution) if region_steps is None else int(region_steps)
    if n_r < 1:
        raise ValueError("region_steps must be >= 1")
    limits = np.repeat(np.minimum(runs.run_depth, n_r), lengths)
    X = np.empty(len(idx), dtype=np.int64)
    sub_E = E[idx]

    def work(a, b):
        K.region_depths(float(lam), sub_E[a:b], limits[a:b], runs.digits, rho, bound, X[a:b])

    _chunked(work, len(idx), threads)
    keep = X > limits

    # maximal survivor sub-runs inside each spectrum run
    run_id = np.repeat(np.arange(len(lengths)), lengths)
    new_start = np.ones(len(idx), dtype=bool)
    if len(idx):
        new_start[1:] = (~keep[:-1]) | (run_id[1:] != run_id[:-1])
    starts_mask = keep & new_start
    ends_mask = np.zeros(len(idx), dtype=bool)
    if len(idx):
        nxt_keep = np.concatenate([keep[1:], [False]])
        nxt_same = np.concatenate([run_id[1:] == run_id[:-1], [False]])
        ends_mask = keep & ~(nxt_keep & nxt_same)
    s = idx[starts_mask]
    t = idx[ends_mask] + 1
    rd = limits[starts_mask]
    d = runs.run_depth[run_id[starts_mask]]
    und = runs.undecided[run_id[starts_mask]]

    left, right = _refine_edges(runs, lam, s, t, d, rd, resolution, escape_threshold, (True, rho, bound), threads)
    undecided_cells = int((t - s)[und].sum())
    meta = dict(
        kind="survival",
        lam=float(lam),
        digits=as_continued_fraction(digits).describe(),
        resolution=float(resolution),
        max_steps=int(max_steps),
        escape_threshold=float(escape_threshold),
        rho=rho,
        bound=bound,
        region_steps=int(n_r),
        grid_points=int(len(E)),
    )
    return _finish(lam, left, right, undecided_cells, meta)
