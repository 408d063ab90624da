"""Local stable manifolds by the graph transform, and distortion along unstable curves.

A local stable manifold through a base point ``Q`` is stored as a graph over
the ``V^perp`` axis of the chart at ``Q``.  The point with chart coordinates
``(s, phi(s))`` is ``Q + s e_perp + phi(s) e_V``.  One graph-transform step
pulls a graph at ``T(Q)`` back through ``T``.  For each sample ``s`` it finds
the ``t`` for which ``T(Q + s e_perp + t e_V)`` lands on the graph at ``T(Q)``.
``T`` stretches the ``e_V`` direction, so this is a well-conditioned scalar
root.

The base point defaults to ``(1/4, 1/4)``.  Its orbit is a finite set of
quarter-lattice points, the same for every coupling.  So the orbit can be
computed exactly in rationals with the linear maps.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from ..contfrac import as_continued_fraction
from ..exceptions import DigitsExhausted, NonContractionError, PreconditionError
from .linear import BASE_POINT, BETA0, ConeSpec, DigitMatrix, torus_wrap
from .perturbed import DEFAULT_RHO, PerturbedMapFamily, build_perturbed_map

__all__ = [
    "LipGraph",
    "graph_transform_manifold",
    "stable_lipschitz_bound",
    "seed_curve",
    "distortion_ratio",
    "CHART_HALF_LENGTH",
    "SAMPLES_PER_HALF",
]

CHART_HALF_LENGTH = 0.1
SAMPLES_PER_HALF = 512


def stable_lipschitz_bound(cone: Optional[ConeSpec] = None) -> float:
    """Largest ``|dV / dV^perp|`` over directions of ``K^s`` in chart coordinates."""
    cone = cone or ConeSpec(BETA0)
    e_perp, e_v = cone.chart
    return max(abs((w @ e_v) / (w @ e_perp)) for w in (cone.stable_v1, cone.stable_v2))


def _line_offsets(s, slope, e_perp, e_v):
    # V-coordinate u with s e_perp + u e_V on the line through 0 of the given slope
    d = np.array([1.0, slope]) if math.isfinite(slope) else np.array([0.0, 1.0])

    def cross(a, b):
        return a[0] * b[1] - a[1] * b[0]

    return -s * cross(d, e_perp) / cross(d, e_v)


@dataclass(frozen=True)
class LipGraph:
    """Samples of ``phi`` on a uniform grid of the ``V^perp`` axis at ``center``.

    ``distances`` records the sup distance between successive graph-transform
    iterates, which is how convergence was judged.
    """

    center: tuple
    s: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    e_perp: np.ndarray = field(repr=False)
    e_v: np.ndarray = field(repr=False)
    lipschitz_bound: float
    distances: tuple = ()
    lam: float = 0.0
    digits: tuple = ()

    def __post_init__(self):
        if self.s.shape != self.phi.shape:
            raise ValueError("sample grids differ in shape")
        if not self.lipschitz_bound < 1:
            raise PreconditionError("stable graphs need a Lipschitz bound below 1")

    @property
    def half_length(self) -> float:
        return float(self.s[-1])

    @property
    def depth(self) -> int:
        return len(self.distances) + 1 if self.distances else 1

    def lipschitz(self) -> float:
        """Largest sampled difference quotient."""
        return float(np.max(np.abs(np.diff(self.phi) / np.diff(self.s))))

    def __call__(self, s) -> np.ndarray:
        """Piecewise-linear interpolation; linear extrapolation off the grid."""
        s = np.asarray(s, dtype=float)
        out = np.interp(s, self.s, self.phi)
        left = s < self.s[0]
        right = s > self.s[-1]
        if left.any() or right.any():
            k0 = (self.phi[1] - self.phi[0]) / (self.s[1] - self.s[0])
            k1 = (self.phi[-1] - self.phi[-2]) / (self.s[-1] - self.s[-2])
            out = np.where(left, self.phi[0] + k0 * (s - self.s[0]), out)
            out = np.where(right, self.phi[-1] + k1 * (s - self.s[-1]), out)
        return out

    def points(self) -> np.ndarray:
        """Lifted standard coordinates of the samples (not reduced modulo 1)."""
        c = np.asarray(self.center, dtype=float)
        return c + self.s[:, None] * self.e_perp + self.phi[:, None] * self.e_v

    def line_offsets(self, slope: float) -> np.ndarray:
        """Chart ``V`` coordinates of the line of the given standard slope through the centre."""
        return _line_offsets(self.s, slope, self.e_perp, self.e_v)

    def sup_distance_to_line(self, slope: float) -> float:
        return float(np.max(np.abs(self.phi - self.line_offsets(slope))))

    def sup_distance(self, other: "LipGraph") -> float:
        return float(np.max(np.abs(self.phi - other(self.s))))

    def fitted_slope(self) -> float:
        """Standard-coordinate slope of the least-squares line through the samples."""
        p = self.points()
        dx = p[:, 0] - p[:, 0].mean()
        dy = p[:, 1] - p[:, 1].mean()
        return float((dx @ dy) / (dx @ dx))

    def to_csv(self) -> str:
        """Rows ``t, x, y``: chart coordinate ``t`` along ``V^perp`` and the lifted standard point."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "y"])
        for t, (x, y) in zip(self.s, self.points()):
            w.writerow([format(float(t), ".17g"), format(float(x), ".17g"), format(float(y), ".17g")])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "center": [float(c) for c in self.center],
            "lambda": self.lam,
            "samples": int(self.s.size),
            "half_length": self.half_length,
            "lipschitz": self.lipschitz(),
            "lipschitz_bound": self.lipschitz_bound,
            "fitted_slope": self.fitted_slope(),
            "iterations": len(self.distances),
            "distances": [float(d) for d in self.distances],
            "digits": list(self.digits),
        }


def _exact_orbit(base, seq):
    q = (Fraction(base[0]) % 1, Fraction(base[1]) % 1)
    orbit = [q]
    for a in seq:
        q = ((a * q[0] + q[1]) % 1, q[0])
        orbit.append(q)
    return [np.array([float(x), float(y)]) for x, y in orbit]


def _pull_back(T, q, q_next, s, phi_next, e_perp, e_v, next_graph_s, t0):
    """One graph-transform step: the graph at ``q`` whose image lies on ``phi_next``."""

    def residual(t):
        p = q + s[:, None] * e_perp + t[:, None] * e_v
        w = torus_wrap(T(p) - q_next)
        return w @ e_v - np.interp(w @ e_perp, next_graph_s, phi_next, left=np.nan, right=np.nan)

    t_a = t0.copy()
    r_a = residual(t_a)
    t_b = t_a + 1e-4
    r_b = residual(t_b)
    for _ in range(60):
        denom = r_b - r_a
        with np.errstate(divide="ignore", invalid="ignore"):
            t_c = np.where(denom != 0, t_b - r_b * (t_b - t_a) / denom, t_b)
        t_a, r_a = t_b, r_b
        t_b = t_c
        r_b = residual(t_b)
        if np.all(np.abs(t_b - t_a) <= 1e-15) or np.all(r_b == 0):
            break
    if not np.all(np.isfinite(r_b)):
        raise PreconditionError("pulled-back graph left the chart box of the next orbit point")
    return t_b


def graph_transform_manifold(
    lam: float,
    digits="golden",
    depth: int = 50,
    tol: float = 1e-8,
    m: int = 1,
    base=BASE_POINT,
    rho: float = DEFAULT_RHO,
    half_length: float = CHART_HALF_LENGTH,
    samples_per_half: int = SAMPLES_PER_HALF,
    cone: Optional[ConeSpec] = None,
    **map_options,
) -> LipGraph:
    """Local stable manifold at ``base`` for the digits ``a_m, a_{m+1}, ...``.

    The ``k``-th iterate is ``Gamma_{a_m} o ... o Gamma_{a_{m+k-1}}`` applied to
    the flat graph ``phi = 0`` at the ``k``-th orbit point.  Iterates are
    formed for ``k = 1, 2, ...`` until two successive ones differ by less than
    ``tol`` in sup norm, or ``depth`` is reached.

    :class:`NonContractionError` is raised in two cases.  One is a sup
    distance that fails to shrink by a factor 0.9 on three consecutive steps.
    The other is an iterate that breaks the Lipschitz bound of the stable cone.
    With ``lam > 0`` the base point must be a quarter-lattice point, whose
    orbit is known exactly.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if m < 1:
        raise ValueError("m is a 1-based digit index")
    cf = as_continued_fraction(digits).shift(m)
    try:
        seq = cf.digits(depth)
    except DigitsExhausted:
        seq = cf.prefix
        if not seq:
            raise
    base_f = tuple(Fraction(b).limit_denominator(1 << 40) if isinstance(b, float) else Fraction(b) for b in base)
    if lam > 0 and any((4 * b).denominator != 1 for b in base_f):
        raise PreconditionError("with lambda > 0 the base point must lie on the quarter lattice")
    cone = cone or ConeSpec(BETA0)
    e_perp, e_v = cone.chart
    ell = stable_lipschitz_bound(cone)
    orbit = _exact_orbit(base_f, seq)
    maps = {a: build_perturbed_map(lam, a, rho, **map_options) for a in set(seq)}
    s = np.linspace(-half_length, half_length, 2 * samples_per_half + 1)
    centre = samples_per_half

    prev = None
    distances = []
    slow = 0
    for k in range(1, len(seq) + 1):
        phi = np.zeros_like(s)
        for j in range(k - 1, -1, -1):
            t = _pull_back(maps[seq[j]], orbit[j], orbit[j + 1], s, phi, e_perp, e_v, s, phi.copy())
            t[centre] = 0.0  # the orbit point itself is on every graph
            phi = t
            lip = float(np.max(np.abs(np.diff(phi) / np.diff(s))))
            if lip > ell:
                raise NonContractionError(f"graph iterate has Lipschitz constant {lip:.4g} > {ell:.4g}")
        if prev is not None:
            d = float(np.max(np.abs(phi - prev)))
            if distances and d > 0.9 * distances[-1]:
                slow += 1
                if slow >= 3:
                    raise NonContractionError("graph transform stopped contracting")
            else:
                slow = 0
            distances.append(d)
            if d < tol:
                prev = phi
                break
        prev = phi
    return LipGraph(
        center=tuple(float(c) for c in orbit[0]),
        s=s,
        phi=prev,
        e_perp=e_perp,
        e_v=e_v,
        lipschitz_bound=ell,
        distances=tuple(distances),
        lam=float(lam),
        digits=tuple(seq),
    )


def seed_curve(lam: float, energies, rho: float = DEFAULT_RHO) -> np.ndarray:
    """Torus points over the spectral line: ``F_lambda^{-1}((E - lam)/2, E/2, 1)``.

    At ``lam = 0`` these are ``(arccos(E/2) / 2pi, 0)``, on the segment
    ``[0, 1/2] x {0}``.  Energies must keep ``|E/2| < 1`` so that the points
    avoid the half lattice.
    """
    E = np.asarray(energies, dtype=float)
    if np.any(np.abs(E) >= 2):
        raise PreconditionError("seed energies must satisfy |E| < 2")
    guess = np.stack([np.arccos(E / 2) / (2 * np.pi), np.zeros_like(E)], axis=-1)
    if lam == 0:
        return guess
    fam = PerturbedMapFamily(lam, 1, rho)
    z = np.stack([(E - lam) / 2, E / 2, np.ones_like(E)], axis=-1)
    q, status = fam.F_lambda_inverse(z, guess)
    if np.any(status != 0):
        raise PreconditionError("part of the spectral line has no torus preimage at this coupling")
    return guess + torus_wrap(q - guess)


def _arc_lengths(p):
    seg = np.linalg.norm(np.diff(p, axis=0), axis=-1)
    return np.concatenate([[0.0], np.cumsum(seg)])


def distortion_ratio(lam: float, curve, digits="golden", m: int = 1, rho: float = DEFAULT_RHO, cone=None) -> float:
    """Worst distortion of relative arc length along ``curve`` after ``m`` steps.

    For each interior sample ``Q'`` the fraction of arc length from the
    first endpoint to ``Q'`` is compared before and after applying
    ``T_{a_m} o ... o T_{a_1}``.  The same is done from the last endpoint.
    The result is the largest such ratio or its reciprocal, so an affine map
    gives exactly 1 up to rounding.  The image must fit in one chart box of
    half-length 1/10, otherwise :class:`PreconditionError` is raised.
    """
    curve = np.asarray(curve, dtype=float)
    if curve.ndim != 2 or curve.shape[0] < 3:
        raise ValueError("curve needs at least three samples")
    seq = as_continued_fraction(digits).digits(m)
    img = curve.copy()
    for a in seq:
        step = build_perturbed_map(lam, a, rho)(img) if lam > 0 else DigitMatrix(a).apply_torus(img)
        img = step
    # continuous lift of the image
    lifted = img[0] + np.concatenate([[np.zeros(2)], np.cumsum(torus_wrap(np.diff(img, axis=0)), axis=0)])
    e_perp, e_v = (cone or ConeSpec(BETA0)).chart
    for e in (e_perp, e_v):
        c = lifted @ e
        if c.max() - c.min() > 2 * CHART_HALF_LENGTH:
            raise PreconditionError("the image curve does not fit in one chart box")
    src_curve = curve[0] + np.concatenate([[np.zeros(2)], np.cumsum(torus_wrap(np.diff(curve, axis=0)), axis=0)])
    src = _arc_lengths(src_curve)
    dst = _arc_lengths(lifted)
    inner = slice(1, -1)
    fwd = (dst[inner] / dst[-1]) / (src[inner] / src[-1])
    bwd = ((dst[-1] - dst[inner]) / dst[-1]) / ((src[-1] - src[inner]) / src[-1])
    r = np.concatenate([fwd, bwd])
    return float(np.max(np.maximum(r, 1 / r)))
