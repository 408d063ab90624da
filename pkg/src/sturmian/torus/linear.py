"""The linear torus model: the matrices ``A_a``, the factor map ``F`` and the cones.

``A_a = ((a, 1), (1, 0))`` induces a hyperbolic automorphism of the torus
``R^2 / Z^2``.  The map ``F(x, y) = (cos 2pi(x+y), cos 2pi x, cos 2pi y)``
carries it onto the trace map ``T_a`` restricted to the Cayley cubic
``S_0``, so ``F(A_a P) = T_a(F(P))`` for every torus point ``P``.

Cones are stored by their two boundary directions.  ``K^u_beta`` is spanned by
``(1, -beta)`` and ``(1, 1 + 2 beta)``; the stable cone is its rotation by a
right angle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from ..exceptions import NonContractionError, PreconditionError
from ..surface import TriplePoint

__all__ = [
    "DigitMatrix",
    "ConeSpec",
    "ConeCheckReport",
    "BETA0",
    "BETA1",
    "BASE_POINT",
    "HALF_LATTICE",
    "semiconjugacy_F",
    "F_array",
    "stable_slope",
    "projective_contract_limit",
    "cone_check",
    "overflow_check",
    "torus_wrap",
    "torus_distance",
    "distance_to_half_lattice",
]

#: Opening parameter of the main cone pair.  It is close to the largest value
#: with ``mu_bar >= sqrt(2) - 0.01`` (about 0.01393).
BETA0 = 0.013
#: Parameter of the enlarged cone used for tangency of unstable curves.
BETA1 = 0.015

#: The point (1/4, 1/4), whose orbit is shared by every perturbed family.
BASE_POINT = (0.25, 0.25)
#: Torus points fixed by ``P -> -P``; ``F`` maps them onto the four cusps.
HALF_LATTICE = np.array([[0.0, 0.0], [0.5, 0.0], [0.5, 0.5], [0.0, 0.5]])


def _perp(v):
    return np.array([-v[1], v[0]], dtype=float)


def torus_wrap(d):
    """Representative of a displacement in ``[-1/2, 1/2)`` per coordinate."""
    d = np.asarray(d, dtype=float)
    return d - np.floor(d + 0.5)


def torus_distance(p, q):
    """Euclidean distance on ``R^2 / Z^2``."""
    return np.linalg.norm(torus_wrap(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)), axis=-1)


def distance_to_half_lattice(p):
    """Distance from each point to the nearest of (0,0), (1/2,0), (1/2,1/2), (0,1/2)."""
    p = np.asarray(p, dtype=float)
    # the half lattice is invariant under shifts by 1/2, so wrap modulo 1/2
    d = p - 0.5 * np.floor(2 * p + 0.5)
    return np.linalg.norm(d, axis=-1)


@dataclass(frozen=True)
class DigitMatrix:
    """``A_a = ((a, 1), (1, 0))`` with its eigen-data.

    The eigenvector for ``mu`` is ``(mu, 1)``; the two eigendirections are
    orthogonal because the matrix is symmetric.
    """

    a: int

    def __post_init__(self):
        if isinstance(self.a, bool) or int(self.a) != self.a or self.a < 1:
            raise ValueError("digit a must be a positive integer")
        object.__setattr__(self, "a", int(self.a))

    @property
    def entries(self) -> np.ndarray:
        return np.array([[self.a, 1], [1, 0]], dtype=np.int64)

    @property
    def inverse_entries(self) -> np.ndarray:
        return np.array([[0, 1], [1, -self.a]], dtype=np.int64)

    @property
    def mu_u(self) -> float:
        return (self.a + math.sqrt(4 + self.a * self.a)) / 2

    @property
    def mu_s(self) -> float:
        # written as -1/mu_u to avoid cancellation for large a
        return -1.0 / self.mu_u

    @property
    def determinant(self) -> int:
        return -1

    def unstable_direction(self) -> np.ndarray:
        v = np.array([self.mu_u, 1.0])
        return v / np.linalg.norm(v)

    def stable_direction(self) -> np.ndarray:
        v = np.array([self.mu_s, 1.0])
        return v / np.linalg.norm(v)

    def apply(self, p) -> np.ndarray:
        """``A_a p`` on lifted coordinates (no reduction modulo 1)."""
        p = np.asarray(p, dtype=float)
        return np.stack([self.a * p[..., 0] + p[..., 1], p[..., 0]], axis=-1)

    def apply_torus(self, p) -> np.ndarray:
        return np.mod(self.apply(p), 1.0)

    def apply_inverse(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        return np.stack([p[..., 1], p[..., 0] - self.a * p[..., 1]], axis=-1)


@dataclass(frozen=True)
class ConeSpec:
    """The cone ``K^u_beta`` and its perpendicular ``K^s_beta``.

    ``v1 = (1, -beta)`` and ``v2 = (1, 1 + 2 beta)`` bound the unstable cone and
    ``v0 = v1 + v2`` is its bisecting line ``V_0``.  ``mu_bar`` is the least
    expansion of any ``A_a`` on the cone, attained by ``A_1`` on ``v1``.
    """

    beta: float
    v1: np.ndarray = field(init=False, repr=False, compare=False)
    v2: np.ndarray = field(init=False, repr=False, compare=False)
    v0: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        b = float(self.beta)
        if not 0 < b <= 0.1:
            raise PreconditionError("cone parameter beta must lie in (0, 0.1]")
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "v1", np.array([1.0, -b]))
        object.__setattr__(self, "v2", np.array([1.0, 1.0 + 2 * b]))
        object.__setattr__(self, "v0", np.array([2.0, 1.0 + b]))

    @property
    def mu_bar(self) -> float:
        b = self.beta
        return math.sqrt((1 - b) ** 2 + 1) / math.sqrt(b * b + 1)

    @property
    def theta0(self) -> float:
        """Opening angle between ``v1`` and ``v2``."""
        return math.atan2(1 + 2 * self.beta, 1.0) + math.atan2(self.beta, 1.0)

    @property
    def stable_v1(self) -> np.ndarray:
        return _perp(self.v1)

    @property
    def stable_v2(self) -> np.ndarray:
        return _perp(self.v2)

    @property
    def chart(self) -> tuple:
        """Orthonormal chart vectors ``(e_perp, e_V)``: ``e_V`` spans ``V_0``."""
        e_v = self.v0 / np.linalg.norm(self.v0)
        return _perp(e_v), e_v

    @staticmethod
    def _coefficients(w, b1, b2):
        w = np.asarray(w, dtype=float)
        det = b1[0] * b2[1] - b1[1] * b2[0]
        c1 = (w[..., 0] * b2[1] - w[..., 1] * b2[0]) / det
        c2 = (b1[0] * w[..., 1] - b1[1] * w[..., 0]) / det
        return c1, c2

    def contains_unstable(self, w, strict: bool = False, tol: float = 0.0):
        """Whether ``w`` lies in ``K^u_beta`` (``strict``: in its interior)."""
        c1, c2 = self._coefficients(w, self.v1, self.v2)
        n = np.linalg.norm(np.asarray(w, dtype=float), axis=-1)
        c1, c2 = c1 / n, c2 / n
        if strict:
            return c1 * c2 > 0
        return (np.minimum(c1, c2) >= -tol) | (np.maximum(c1, c2) <= tol)

    def contains_stable(self, w, strict: bool = False, tol: float = 0.0):
        """Whether ``w`` lies in ``K^s_beta`` (``strict``: in its interior)."""
        return self.contains_unstable(_perp_many(w), strict=strict, tol=tol)

    def unstable_directions(self, n: int) -> np.ndarray:
        """``n`` unit vectors evenly spaced in angle across ``K^u_beta``, boundaries included."""
        t0 = math.atan2(self.v1[1], self.v1[0])
        t1 = math.atan2(self.v2[1], self.v2[0])
        t = np.linspace(t0, t1, n)
        return np.stack([np.cos(t), np.sin(t)], axis=-1)

    def stable_directions(self, n: int) -> np.ndarray:
        return _perp_many(self.unstable_directions(n))


def _perp_many(w):
    # rotation by +90 degrees: K^s = rot(K^u), so rot^{-1} maps K^s back to K^u
    w = np.asarray(w, dtype=float)
    return np.stack([-w[..., 1], w[..., 0]], axis=-1)


def semiconjugacy_F(x, y):
    """``(cos 2pi(x+y), cos 2pi x, cos 2pi y)``.

    Scalars give a :class:`~sturmian.surface.TriplePoint`; arrays give an
    array with a trailing axis of length 3.
    """
    if np.ndim(x) == 0 and np.ndim(y) == 0:
        return TriplePoint(math.cos(2 * math.pi * (x + y)), math.cos(2 * math.pi * x), math.cos(2 * math.pi * y))
    return F_array(np.stack(np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float)), axis=-1))


def F_array(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    x, y = p[..., 0], p[..., 1]
    tau = 2 * np.pi
    return np.stack([np.cos(tau * (x + y)), np.cos(tau * x), np.cos(tau * y)], axis=-1)


def stable_slope(digits: Sequence[int], exact: bool = False) -> Union[float, Fraction]:
    """Slope of ``A_{a_1}^{-1} ... A_{a_n}^{-1} (0, 1)``.

    The product is formed in exact integers and divided once, so with
    ``exact=True`` the result is the rational ``-1 / [a_1, ..., a_n]``.
    """
    digits = [int(a) for a in digits]
    if not digits:
        raise ValueError("stable_slope needs at least one digit")
    if any(a < 1 for a in digits):
        raise ValueError("digits must be positive integers")
    vx, vy = 0, 1
    for a in reversed(digits):
        vx, vy = vy, vx - a * vy
    slope = Fraction(vy, vx)
    return slope if exact else float(slope)


def _canonical(v):
    v = v / np.linalg.norm(v)
    if v[0] < 0 or (v[0] == 0 and v[1] < 0):
        v = -v
    return v


def _direction_gap(u, v) -> float:
    # sine of the angle between two lines
    return abs(u[0] * v[1] - u[1] * v[0]) / (np.linalg.norm(u) * np.linalg.norm(v))


Transformer = Union[np.ndarray, Callable[[np.ndarray], np.ndarray]]


def projective_contract_limit(
    maps: Iterable[Transformer],
    tol: float = 1e-12,
    start: Optional[Sequence[float]] = None,
    max_steps: int = 10_000,
) -> np.ndarray:
    """Limit of ``f_1 o f_2 o ... o f_n (x)`` on the projective line.

    Each transformer is a 2x2 matrix or a callable taking a direction vector to
    a direction vector.  Matrices are multiplied on the right, so each step
    costs the same.  Callables are recomposed from scratch, which costs
    ``O(n)`` per step.  Iteration stops when two successive outputs differ by
    less than ``tol`` in the sine of their angle.  The result is a unit vector
    with non-negative first coordinate.  :class:`NonContractionError` is raised
    if that does not happen within ``max_steps``.
    """
    x0 = np.array([0.0, 1.0] if start is None else start, dtype=float)
    prev = None
    product = np.eye(2)
    callables: list = []
    for n, f in enumerate(maps, start=1):
        if n > max_steps:
            break
        if callable(f) and not isinstance(f, np.ndarray):
            callables.append(f)
            v = x0
            for g in reversed(callables):
                v = np.asarray(g(v), dtype=float)
                v = v / np.linalg.norm(v)
            # matrices seen before the first callable still act last
            v = product @ v
        else:
            if callables:
                raise TypeError("matrices may not follow callables in the sequence")
            product = product @ np.asarray(f, dtype=float)
            product = product / np.abs(product).max()
            v = product @ x0
        v = _canonical(v)
        if prev is not None and _direction_gap(v, prev) < tol:
            return v
        prev = v
    raise NonContractionError(f"no convergence to {tol} within {min(n, max_steps)} steps")


@dataclass(frozen=True)
class ConeCheckReport:
    invariant: bool
    min_expansion: float
    max_expansion: float
    violating_direction: Optional[tuple] = None

    def to_dict(self) -> dict:
        return {
            "invariant": self.invariant,
            "min_expansion": self.min_expansion,
            "max_expansion": self.max_expansion,
            "violating_direction": self.violating_direction,
        }


def cone_check(cone: ConeSpec, a: int, directions: int = 2001) -> ConeCheckReport:
    """Sample unit vectors of ``K^u_beta`` and test ``A_a`` on them.

    The image of each direction must fall in the open cone.  The report gives
    the extreme expansion factors seen, boundary directions included.
    """
    if directions < 2:
        raise ValueError("need at least the two boundary directions")
    m = DigitMatrix(a)
    v = cone.unstable_directions(directions)
    w = m.apply(v)
    inside = cone.contains_unstable(w, strict=True)
    norms = np.linalg.norm(w, axis=-1)
    bad = None if inside.all() else tuple(float(c) for c in v[np.argmin(inside)])
    return ConeCheckReport(bool(inside.all()), float(norms.min()), float(norms.max()), bad)


def overflow_check(
    cone: ConeSpec,
    a: int,
    perturbation=None,
    enlarged: Optional[ConeSpec] = None,
    direction: Optional[Sequence[float]] = None,
    samples: int = 257,
    scale: float = 0.1,
    base=BASE_POINT,
) -> bool:
    """Whether the image of a segment ``L`` overflows the box it spans.

    ``L`` passes through the origin along ``direction`` (default ``V_0``) and
    joins the two sides of ``Box_1(0)`` parallel to ``V^perp``.  The box is
    measured by the components along ``V`` and ``V^perp``.  The check passes if
    both image endpoints lie outside the box and every image tangent lies in
    the enlarged cone.  The enlarged cone defaults to ``K^u_{BETA1}``.

    With ``perturbation`` (an evaluable torus map), ``L`` is scaled by ``scale``
    and centred at ``base``.  The image is then taken relative to the image of
    ``base`` and tested against ``Box_scale``.
    """
    if enlarged is None:
        enlarged = ConeSpec(max(BETA1, cone.beta))
    e_perp, e_v = cone.chart
    d = np.array(cone.v0 if direction is None else direction, dtype=float)
    if not cone.contains_unstable(d, tol=1e-15):
        raise PreconditionError("the segment must lie in the unstable cone")
    if abs(d @ e_v) == 0:
        raise PreconditionError("the segment is parallel to the box sides")
    end = d / abs(d @ e_v)
    s = np.linspace(-1.0, 1.0, samples)
    if perturbation is None:
        pts = s[:, None] * end[None, :]
        img = DigitMatrix(a).apply(pts)
        box = 1.0
    else:
        q = np.asarray(base, dtype=float)
        pts = q[None, :] + scale * s[:, None] * end[None, :]
        img0 = perturbation(q)
        img = img0 + torus_wrap(perturbation(pts) - img0)
        img = img - img0
        box = scale
    tangents = np.diff(img, axis=0)
    tangent_ok = bool(np.all(enlarged.contains_unstable(tangents)))
    ends = img[[0, -1]]
    outside = np.maximum(np.abs(ends @ e_v), np.abs(ends @ e_perp)) > box
    return bool(outside.all() and tangent_ok)
