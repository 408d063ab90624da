"""Toral maps conjugate to the trace map on ``S_lambda`` away from the cusps.

A torus point ``P`` is carried to ``S_lambda`` in two moves.  ``F`` takes it to
the Cayley cubic ``S_0``.  The outward normal line at that point then meets
``S_lambda`` at ``F_lambda(P)``.  The trace map acts there.  The image is
pulled back to the cubic along the normal line through it, and ``F`` is
inverted to get a torus point.  ``F`` is two-to-one (``F(P) = F(-P)``), so
the preimage nearest the linear prediction ``A_a P`` is kept.

Near the four half-lattice points the curvature of ``S_lambda`` blows up.
There the map is blended into the linear automorphism with a radial quintic
bump ``psi``: ``psi = 1`` within ``blend_inner`` and ``psi = 0`` beyond
``blend_outer``.  The blend acts on lifted circle coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from ..contfrac import as_continued_fraction
from ..exceptions import BranchAmbiguityError, PreconditionError, ProjectionError
from ..surface import trace_map_apply
from .linear import (
    BETA0,
    ConeSpec,
    DigitMatrix,
    F_array,
    distance_to_half_lattice,
    torus_wrap,
)

__all__ = [
    "PerturbedMapFamily",
    "PropertyCReport",
    "CommonOrbitReport",
    "build_perturbed_map",
    "property_c_verify",
    "common_orbit_check",
    "cusp_preimage_radius",
    "DEFAULT_BLEND_OUTER",
    "DEFAULT_RHO",
    "LAMBDA_GUARD",
]

DEFAULT_BLEND_OUTER = 0.095
DEFAULT_RHO = 0.01
LAMBDA_GUARD = 0.2

_OK, _PROJECTION_FAILED, _AMBIGUOUS = 0, 1, 2
_TWO_PI = 2 * math.pi


def _fricke(p):
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    return x * x + y * y + z * z - 2 * x * y * z


def _grad(p):
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    return 2 * np.stack([x - y * z, y - x * z, z - x * y], axis=-1)


def _smoothstep(u):
    return u * u * u * (u * (6 * u - 15) + 10)


def _normal_root(base, direction, level, t_max, tol, max_iter=100):
    """Solve ``fricke(base + t direction) = level`` for ``t`` in ``[0, t_max]``.

    Safeguarded Newton: a step leaving the current bracket is replaced by
    bisection.  Returns ``(t, ok)``; ``ok`` is false where no sign change was
    found.
    """
    lo = np.zeros(base.shape[:-1])
    hi = np.full(base.shape[:-1], t_max)
    g_lo = _fricke(base) - level
    # orient so that the bracketed function increases from lo to hi
    sign = np.where(g_lo <= 0, 1.0, -1.0)
    # the line may cross the level set twice within t_max; shrink the upper
    # end until it brackets the crossing nearest the base point
    ok = np.zeros(lo.shape, dtype=bool)
    for _ in range(40):
        g_hi = _fricke(base + hi[..., None] * direction) - level
        ok |= sign * g_hi >= 0
        if ok.all():
            break
        hi = np.where(ok, hi, 0.5 * hi)
    t = np.zeros_like(lo)
    done = ~ok
    for _ in range(max_iter):
        if done.all():
            break
        p = base + t[..., None] * direction
        g = _fricke(p) - level
        dg = np.einsum("...i,...i->...", _grad(p), direction)
        lo = np.where(sign * g < 0, t, lo)
        hi = np.where(sign * g > 0, t, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            t_new = t - g / dg
        bad = ~np.isfinite(t_new) | (t_new <= lo) | (t_new >= hi)
        t_new = np.where(bad, 0.5 * (lo + hi), t_new)
        step = np.abs(t_new - t)
        t = np.where(done, t, t_new)
        done |= (step <= tol) | (g == 0)
    ok &= done
    return t, ok


@lru_cache(maxsize=64)
def cusp_preimage_radius(rho: float, directions: int = 720) -> float:
    """Largest torus distance from ``(0, 0)`` at which ``F`` is within ``rho`` of the cusp ``(1, 1, 1)``.

    The four half-lattice points behave alike, so one suffices.  This is the
    radius of the torus neighbourhood the projections never need to reach.
    """
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    th = np.linspace(0, 2 * np.pi, directions, endpoint=False)
    u = np.stack([np.cos(th), np.sin(th)], axis=-1)
    lo = np.zeros(directions)
    hi = np.full(directions, 0.25)
    cusp = np.array([1.0, 1.0, 1.0])
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        inside = np.linalg.norm(F_array(mid[:, None] * u) - cusp, axis=-1) < rho
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return float(hi.max())


@dataclass(frozen=True)
class PerturbedMapFamily:
    """The extended toral map ``T_hat`` for coupling ``lam`` and digit ``a``.

    Instances are immutable and evaluate whole arrays of points at once
    (trailing axis of length 2).  At ``lam == 0`` evaluation is exactly
    ``A_a P mod 1``.

    ``branch_window`` defaults to ``min(0.05, |mu_s(a)| * blend_inner)``.  With
    ``P`` outside the inner disc, the two preimage candidates are then always
    separated by more than the window.
    """

    lam: float
    a: int
    rho: float = DEFAULT_RHO
    blend_inner: Optional[float] = None
    blend_outer: float = DEFAULT_BLEND_OUTER
    projection_tol: float = 1e-12
    branch_window: Optional[float] = None
    lambda_guard: float = LAMBDA_GUARD

    def __post_init__(self):
        lam = float(self.lam)
        if not lam >= 0 or not math.isfinite(lam):
            raise ValueError("lambda must be a finite non-negative number")
        if lam > self.lambda_guard:
            raise PreconditionError(
                f"lambda={lam} exceeds the guard {self.lambda_guard}; pass a larger lambda_guard to override"
            )
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "a", DigitMatrix(self.a).a)
        inner = self.blend_outer / 2 if self.blend_inner is None else float(self.blend_inner)
        object.__setattr__(self, "blend_inner", inner)
        if not 0 < inner < self.blend_outer < 0.1:
            raise PreconditionError("blend radii must satisfy 0 < inner < outer < 1/10")
        if cusp_preimage_radius(float(self.rho)) >= inner:
            raise PreconditionError(f"rho={self.rho} removes more of the torus than the inner blend disc")
        if self.branch_window is None:
            object.__setattr__(self, "branch_window", min(0.05, abs(self.matrix.mu_s) * inner))

    # ------------------------------------------------------------------ pieces
    @property
    def matrix(self) -> DigitMatrix:
        return DigitMatrix(self.a)

    @property
    def level(self) -> float:
        return 1.0 + self.lam * self.lam / 4

    def linear(self, p) -> np.ndarray:
        return self.matrix.apply_torus(p)

    def psi(self, p) -> np.ndarray:
        """Blend weight of the linear map: 1 near the half lattice, 0 far from it."""
        r = distance_to_half_lattice(p)
        u = np.clip((self.blend_outer - r) / (self.blend_outer - self.blend_inner), 0.0, 1.0)
        return _smoothstep(u)

    def _lift(self, y):
        # outward normal projection from S_0 onto S_lambda
        g = _grad(y)
        with np.errstate(divide="ignore", invalid="ignore"):
            n = g / np.linalg.norm(g, axis=-1, keepdims=True)
        if self.lam == 0:
            return y, np.ones(y.shape[:-1], dtype=bool)
        t, ok = _normal_root(y, n, self.level, self.lam, self.projection_tol)
        return y + t[..., None] * n, ok

    def F_lambda(self, p):
        """``F_lambda(P)``: ``F`` followed by the normal projection onto ``S_lambda``.

        Returns ``(points, ok)``; ``ok`` is false where the root-find failed.
        """
        return self._lift(F_array(p))

    def _pull_back(self, z, prediction):
        """Torus points ``Q`` with ``F_lambda(Q) = z``, the branch nearest ``prediction``."""
        shape = z.shape[:-1]
        status = np.zeros(shape, dtype=np.int8)
        # starting guess: walk back along the normal at z until the cubic is
        # reached.  Close to a cusp that line can miss the cubic; a first-order
        # step is good enough there because Newton below does the real work.
        g = _grad(z)
        gn = np.linalg.norm(g, axis=-1, keepdims=True)
        n = g / gn
        s, ok = _normal_root(z, -n, 1.0, 2 * self.lam, self.projection_tol)
        s = np.where(ok, s, (self.level - 1.0) / gn[..., 0])
        c = np.clip(z - s[..., None] * n, -1.0, 1.0)
        # the four arccos sign patterns; keep the one nearest the prediction
        x = np.arccos(c[..., 1]) / _TWO_PI
        y = np.arccos(c[..., 2]) / _TWO_PI
        cands = np.stack([np.stack([sx * x, sy * y], -1) for sx in (1, -1) for sy in (1, -1)], axis=-2)
        d = np.linalg.norm(torus_wrap(cands - prediction[..., None, :]), axis=-1)
        q = np.take_along_axis(cands, np.argmin(d, axis=-1)[..., None, None], axis=-2)[..., 0, :]
        q = prediction + torus_wrap(q - prediction)
        # Gauss-Newton on the torus coordinates, Jacobian by forward differences
        active = np.flatnonzero(status == _OK)
        h = 1e-7
        for _ in range(30):
            if active.size == 0:
                break
            qa, za = q[active], z[active]
            base, ok0 = self.F_lambda(qa)
            cols = []
            for j in range(2):
                e = np.zeros(2)
                e[j] = h
                cols.append((self.F_lambda(qa + e)[0] - base) / h)
            J = np.stack(cols, axis=-1)
            r = base - za
            a11 = np.einsum("ni,ni->n", J[..., 0], J[..., 0])
            a12 = np.einsum("ni,ni->n", J[..., 0], J[..., 1])
            a22 = np.einsum("ni,ni->n", J[..., 1], J[..., 1])
            b1 = np.einsum("ni,ni->n", J[..., 0], r)
            b2 = np.einsum("ni,ni->n", J[..., 1], r)
            det = a11 * a22 - a12 * a12
            singular = ~(np.abs(det) > 1e-14 * (a11 * a22 + 1e-300)) | ~ok0
            with np.errstate(divide="ignore", invalid="ignore"):
                dq = np.stack([(a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det], axis=-1)
            dq[singular] = 0.0
            status[active[singular]] = _PROJECTION_FAILED
            q[active] = qa - dq
            small = np.max(np.abs(dq), axis=-1) <= 1e-14
            active = active[~small & ~singular]
        status[active] = _PROJECTION_FAILED
        lifted, _ = self.F_lambda(q)
        resid = np.max(np.abs(lifted - z), axis=-1)
        status[~(resid <= 1e3 * self.projection_tol) & (status == _OK)] = _PROJECTION_FAILED
        # the two branches are q and -q
        d_plus = np.linalg.norm(torus_wrap(q - prediction), axis=-1)
        d_minus = np.linalg.norm(torus_wrap(-q - prediction), axis=-1)
        q = np.where((d_minus < d_plus)[..., None], -q, q)
        separation = np.linalg.norm(torus_wrap(2 * q), axis=-1)
        status[(separation < self.branch_window) & (status == _OK)] = _AMBIGUOUS
        return np.mod(q, 1.0), status

    def F_lambda_inverse(self, z, prediction):
        """Torus preimage of points ``z`` on ``S_lambda`` nearest ``prediction``.

        Returns ``(points, status)`` with the status codes of :meth:`evaluate`.
        """
        z = np.asarray(z, dtype=float)
        prediction = np.broadcast_to(np.asarray(prediction, dtype=float), z.shape[:-1] + (2,))
        return self._pull_back(z, prediction)

    def _tilde(self, p, prediction):
        lifted, ok = self.F_lambda(p)
        z = trace_map_apply(self.a, lifted)
        q, status = self._pull_back(z, prediction)
        status[~ok] = _PROJECTION_FAILED
        return q, status

    # --------------------------------------------------------------- evaluation
    def evaluate(self, p):
        """Vectorised ``T_hat``.  Returns ``(images, status)``.

        ``status`` is 0 where the value is good, 1 where a projection failed and
        2 where the branch choice was ambiguous.  Failed entries hold the linear
        image so that downstream arrays stay finite.
        """
        p = np.asarray(p, dtype=float)
        lin = self.matrix.apply(p)
        status = np.zeros(p.shape[:-1], dtype=np.int8)
        if self.lam == 0:
            return np.mod(lin, 1.0), status
        psi = self.psi(p)
        need = psi < 1
        out = lin.copy()
        if need.any():
            q, st = self._tilde(p[need], np.mod(lin[need], 1.0))
            w = (1 - psi[need])[..., None]
            out[need] = lin[need] + w * torus_wrap(q - lin[need])
            status[need] = st
        bad = status != _OK
        out[bad] = lin[bad]
        return np.mod(out, 1.0), status

    def __call__(self, p) -> np.ndarray:
        out, status = self.evaluate(p)
        if np.any(status != _OK):
            flat = np.asarray(p, dtype=float).reshape(-1, 2)
            idx = int(np.flatnonzero(status.reshape(-1) != _OK)[0])
            point = tuple(float(v) for v in flat[idx])
            if status.reshape(-1)[idx] == _AMBIGUOUS:
                raise BranchAmbiguityError(f"both preimages lie within {self.branch_window} of each other", point)
            raise ProjectionError("normal-line projection did not converge", point)
        return out

    def tilde(self, p) -> np.ndarray:
        """The unblended conjugate map (defined away from the half lattice)."""
        p = np.asarray(p, dtype=float)
        q, status = self._tilde(p, self.linear(p)) if self.lam else (self.linear(p), np.zeros(p.shape[:-1], np.int8))
        if np.any(status != _OK):
            raise ProjectionError("conjugate map undefined at some input", None)
        return q

    def jacobian(self, p, h: float = 1e-6):
        """Central-difference differential.  Returns ``(J, status)`` with ``J[..., i, j] = d out_i / d p_j``."""
        if not 0 < h <= 1e-6:
            raise PreconditionError("finite-difference step must lie in (0, 1e-6]")
        p = np.asarray(p, dtype=float)
        cols = []
        status = np.zeros(p.shape[:-1], dtype=np.int8)
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            plus, s1 = self.evaluate(p + e)
            minus, s2 = self.evaluate(p - e)
            cols.append(torus_wrap(plus - minus) / (2 * h))
            status = np.maximum(status, np.maximum(s1, s2))
        return np.stack(cols, axis=-1), status

    def describe(self) -> dict:
        return {
            "lambda": self.lam,
            "a": self.a,
            "rho": self.rho,
            "blend_inner": self.blend_inner,
            "blend_outer": self.blend_outer,
            "projection_tol": self.projection_tol,
            "branch_window": self.branch_window,
            "lambda_guard": self.lambda_guard,
        }


def build_perturbed_map(lam: float, a: int, rho: float = DEFAULT_RHO, **options) -> PerturbedMapFamily:
    """Construct ``T_hat_{lam, a}``; keyword options are passed to :class:`PerturbedMapFamily`."""
    return PerturbedMapFamily(lam, a, rho, **options)


# ---------------------------------------------------------------- Property (C)
@dataclass(frozen=True)
class PropertyCReport:
    mu1: float
    mu2: float
    delta: float
    grid_size: int
    worst_expansion: float
    worst_contraction: float
    cone_violations: int
    max_expansion: float = float("nan")
    evaluation_failures: int = 0
    maps: tuple = ()

    @property
    def passed(self) -> bool:
        return self.cone_violations == 0 and self.worst_expansion >= self.mu1 - self.delta

    def to_dict(self) -> dict:
        return {
            "mu1": self.mu1,
            "mu2": self.mu2,
            "delta": self.delta,
            "grid_size": self.grid_size,
            "worst_expansion": self.worst_expansion,
            "worst_contraction": self.worst_contraction,
            "max_expansion": self.max_expansion,
            "cone_violations": self.cone_violations,
            "evaluation_failures": self.evaluation_failures,
            "passed": self.passed,
            "maps": list(self.maps),
        }


def _resolve_cones(cones):
    if cones is None:
        c = ConeSpec(BETA0)
        return c, c
    if isinstance(cones, ConeSpec):
        return cones, cones
    cu, cs = cones
    return cu, cs


def property_c_verify(
    maps: Sequence[PerturbedMapFamily],
    cones=None,
    grid: int = 200,
    delta: float = 0.1,
    h: float = 1e-6,
    directions: int = 33,
) -> PropertyCReport:
    """Check the cone and expansion conditions on a ``grid x grid`` lattice of cell centres.

    ``cones`` is one :class:`ConeSpec` (used for both cones) or a pair whose
    first member gives ``K^u`` and second gives ``K^s``.  It defaults to the
    main cone.  At each point and for each map:

    * ``DT`` sends every sampled direction of ``K^u`` into the open ``K^u``, and
      ``DT^{-1}`` does the same for ``K^s``;
    * ``(mu1 - delta) |v| <= |DT v| <= (mu2 + delta) |v|`` on ``K^u``;
    * the same bounds hold for ``|DT^{-1} v|`` on ``K^s``.

    A point where the map cannot be evaluated counts as a violation.
    """
    if not maps:
        raise ValueError("need at least one map")
    cu, cs = _resolve_cones(cones)
    mu1 = cu.mu_bar
    mu2 = max(m.matrix.mu_u for m in maps)
    if not mu1 - delta > 1:
        raise PreconditionError("delta must keep mu1 - delta above 1")
    c = (np.arange(grid) + 0.5) / grid
    pts = np.stack(np.meshgrid(c, c, indexing="ij"), axis=-1).reshape(-1, 2)
    U = cu.unstable_directions(directions)
    S = cs.stable_directions(directions)
    lo, hi = mu1 - delta, mu2 + delta
    violations = 0
    failures = 0
    worst_exp = math.inf
    worst_con = math.inf
    max_exp = 0.0
    for m in maps:
        J, status = m.jacobian(pts, h)
        good = status == 0
        failures += int((~good).sum())
        Ju = np.einsum("nij,dj->ndi", J, U)
        with np.errstate(all="ignore"):
            Jinv = np.linalg.inv(np.where(good[:, None, None], J, np.eye(2)))
        Js = np.einsum("nij,dj->ndi", Jinv, S)
        nu = np.linalg.norm(Ju, axis=-1)
        ns = np.linalg.norm(Js, axis=-1)
        ok = (
            cu.contains_unstable(Ju, strict=True).all(axis=1)
            & cs.contains_stable(Js, strict=True).all(axis=1)
            & (nu.min(axis=1) >= lo)
            & (nu.max(axis=1) <= hi)
            & (ns.min(axis=1) >= lo)
            & (ns.max(axis=1) <= hi)
            & good
        )
        violations += int((~ok).sum())
        if good.any():
            worst_exp = min(worst_exp, float(nu[good].min()))
            worst_con = min(worst_con, float(ns[good].min()))
            max_exp = max(max_exp, float(nu[good].max()))
    return PropertyCReport(
        mu1=mu1,
        mu2=mu2,
        delta=delta,
        grid_size=grid,
        worst_expansion=worst_exp,
        worst_contraction=worst_con,
        cone_violations=violations,
        max_expansion=max_exp,
        evaluation_failures=failures,
        maps=tuple(m.describe() for m in maps),
    )


# ---------------------------------------------------------------- common orbit
@dataclass(frozen=True)
class CommonOrbitReport:
    equal: bool
    orbit_size: int
    steps: int
    max_deviation: float

    def to_dict(self) -> dict:
        return {
            "equal": self.equal,
            "orbit_size": self.orbit_size,
            "steps": self.steps,
            "max_deviation": self.max_deviation,
        }


def common_orbit_check(lam: float, digits="golden", n: int = 100, rho: float = DEFAULT_RHO, tol: float = 1e-9):
    """Compare ``T_hat_lam`` with the linear maps along the orbit of ``(1/4, 1/4)``.

    The linear orbit is computed exactly in rationals.  At each step ``k`` the
    perturbed map for digit ``a_k`` is applied to the exact point ``Q_{k-1}`` and
    compared with ``Q_k``.  Agreement at every step gives equality of the
    compositions by induction.  Iterating the perturbed map freely would not
    work: rounding errors grow by the expansion factor at every step.
    """
    cf = as_continued_fraction(digits)
    seq = cf.digits(n)
    q = (Fraction(1, 4), Fraction(1, 4))
    seen = {q}
    worst = 0.0
    cache = {}
    for a in seq:
        m = cache.get(a) or cache.setdefault(a, build_perturbed_map(lam, a, rho))
        nxt = ((a * q[0] + q[1]) % 1, q[0] % 1)
        img = m(np.array([float(q[0]), float(q[1])]))
        dev = float(np.max(np.abs(torus_wrap(img - np.array([float(nxt[0]), float(nxt[1])])))))
        worst = max(worst, dev)
        q = nxt
        seen.add(q)
    return CommonOrbitReport(worst < tol, len(seen), n, worst)

