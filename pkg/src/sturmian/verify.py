"""Invariant suite behind ``sturmian verify``.

Each check is a small deterministic computation that either holds or does not.
:func:`run_suite` runs them all and returns a JSON-ready report.  Random
inputs come from ``numpy.random.default_rng(seed)``, so a seed fixes the run.
"""

from __future__ import annotations

import math
import time
from fractions import Fraction
from typing import Callable, List, Optional

import numpy as np

from .contfrac import circle_arcs, parse_digits, special_values, three_distance_gaps
from .fractal import middle_cantor, thickness, thickness_bruteforce
from .intervals import IntervalSet
from .surface import SurvivalRegionSpec, fricke, spectrum_estimate, survival_set, trace_map_apply
from .torus import (
    BETA0,
    ConeSpec,
    DigitMatrix,
    F_array,
    build_perturbed_map,
    common_orbit_check,
    cone_check,
    graph_transform_manifold,
    property_c_verify,
    stable_slope,
)

__all__ = ["CHECKS", "run_suite"]


def _exact_cf(digits):
    v = Fraction(0)
    for a in reversed(digits):
        v = 1 / (a + v)
    return v


def check_fricke(rng):
    worst = 0.0
    pts = rng.uniform(-2, 2, size=(10_000, 3)).astype(np.longdouble)
    for a in range(1, 6):
        drift = np.abs(fricke(trace_map_apply(a, pts)) - fricke(pts))
        worst = max(worst, float(drift.max()))
    return worst < 1e-12, {"max_drift": worst}


def check_semiconjugacy(rng):
    p = rng.random((10_000, 2))
    worst = 0.0
    for a in range(1, 6):
        lhs = F_array(DigitMatrix(a).apply_torus(p))
        rhs = trace_map_apply(a, F_array(p))
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst < 1e-12, {"max_residual": worst}


def check_eigenvalues(rng):
    worst = 0.0
    for a in range(1, 51):
        m = DigitMatrix(a)
        worst = max(worst, abs(m.mu_u + m.mu_s - a), abs(m.mu_u * m.mu_s + 1))
    return worst < 1e-14, {"max_error": worst}


def check_stable_slopes(rng):
    bad = 0
    for _ in range(100):
        n = int(rng.integers(1, 21))
        digits = [int(d) for d in rng.integers(1, 5, size=n)]
        if stable_slope(digits, exact=True) != -1 / _exact_cf(digits):
            bad += 1
    golden = abs(stable_slope([1] * 30) + (1 + math.sqrt(5)) / 2)
    return bad == 0 and golden < 1e-9, {"mismatches": bad, "golden_error": golden}


def check_cones(rng):
    c = ConeSpec(0.05)
    ok = True
    for a in range(1, 11):
        r = cone_check(c, a)
        ok &= r.invariant and r.min_expansion >= c.mu_bar - 1e-12
        ok &= r.max_expansion <= DigitMatrix(a).mu_u + 1e-12
    r0 = cone_check(ConeSpec(BETA0), 1)
    ok &= r0.min_expansion >= math.sqrt(2) - 0.01
    return bool(ok), {"beta0": BETA0, "min_expansion_beta0": r0.min_expansion}


def check_linear_limit(rng):
    p = rng.random((2_000, 2))
    same = all(np.array_equal(build_perturbed_map(0.0, a)(p), DigitMatrix(a).apply_torus(p)) for a in (1, 2, 3))
    return same, {}


def check_graph_transform(rng):
    g = graph_transform_manifold(0.0, "golden", depth=50, tol=1e-8)
    ratios = np.array(g.distances[1:]) / np.array(g.distances[:-1])
    rate = DigitMatrix(1).mu_s ** 2
    err = g.sup_distance_to_line(-(1 + math.sqrt(5)) / 2)
    ok = err < 1e-6 and bool(np.all(ratios <= rate + 0.01)) and g.lipschitz() <= g.lipschitz_bound
    return ok, {"sup_error": err, "max_ratio": float(ratios.max()), "lipschitz": g.lipschitz()}


def check_property_c(rng, grid=50):
    lin = property_c_verify([build_perturbed_map(0.0, a) for a in (1, 2, 3)], grid=grid)
    small = property_c_verify([build_perturbed_map(0.01, a) for a in (1, 2)], grid=grid)
    ok = lin.passed and small.passed
    return ok, {"lambda_0": lin.cone_violations, "lambda_0.01": small.cone_violations}


def check_common_orbit(rng):
    r = common_orbit_check(0.05, "golden", 100)
    digits = [int(d) for d in rng.integers(1, 3, size=100)]
    r2 = common_orbit_check(0.05, digits, 100)
    return r.equal and r.orbit_size <= 16 and r2.equal, {"golden": r.to_dict(), "random": r2.to_dict()}


def check_thickness(rng):
    s = middle_cantor(8)
    t = thickness(s)
    small = middle_cantor(2)
    ok = t.tau == 1 and abs(t.dim_lower - math.log(2) / math.log(3)) < 1e-12
    ok &= thickness_bruteforce(small) == thickness(small).tau
    half = thickness(middle_cantor(6, Fraction(1, 4)))
    ok &= half.tau == Fraction(1, 2) and abs(half.dim_lower - 0.5) < 1e-12
    return bool(ok), {"tau": float(t.tau), "dim_lower": t.dim_lower}


def check_free_spectrum(rng):
    s = spectrum_estimate(0.0, "golden", resolution=1e-2, max_steps=200)
    d = s.hausdorff_distance(IntervalSet([(-2.0, 2.0)]))
    return len(s) == 1 and d < 2e-2, {"hausdorff": d}


def check_survival_containment(rng):
    spec = spectrum_estimate(0.05, "golden", resolution=1e-3, max_steps=2000)
    surv = survival_set(0.05, SurvivalRegionSpec(0.3), "golden", resolution=1e-3, max_steps=2000)
    return spec.contains(surv, tol=1e-12), {"spectrum_length": float(spec.measure()), "survival_length": float(surv.measure())}


def check_three_distance(rng):
    bad = []
    for spec in ("golden", "(1,2)*", "(2)*"):
        cf = parse_digits(spec)
        for sv in special_values(cf, 200):
            lengths = three_distance_gaps(cf, sv.n)
            if len(lengths) > 2 or max(lengths) > sv.arc_bound + 1e-12:
                bad.append((spec, sv.n))
        for n in range(1, 201):
            arcs = circle_arcs(cf, n)
            if len(three_distance_gaps(cf, n)) > 3 or abs(arcs.sum() - 1) > 1e-12:
                bad.append((spec, n))
    return not bad, {"failures": bad[:10]}


CHECKS: List[tuple] = [
    ("fricke_invariance", check_fricke),
    ("semiconjugacy", check_semiconjugacy),
    ("eigenvalue_identities", check_eigenvalues),
    ("stable_slopes", check_stable_slopes),
    ("cone_constants", check_cones),
    ("perturbed_linear_limit", check_linear_limit),
    ("graph_transform_contraction", check_graph_transform),
    ("property_c_verified_range", check_property_c),
    ("common_orbit", check_common_orbit),
    ("thickness_oracle", check_thickness),
    ("free_spectrum", check_free_spectrum),
    ("survival_in_spectrum", check_survival_containment),
    ("three_distance", check_three_distance),
]


def run_suite(seed: int = 0, only: Optional[List[str]] = None, progress: Optional[Callable[[str], None]] = None) -> dict:
    """Run the checks (all, or those named in ``only``) and collect a report."""
    results = []
    for name, fn in CHECKS:
        if only and name not in only:
            continue
        rng = np.random.default_rng(seed)
        t0 = time.perf_counter()
        try:
            ok, detail = fn(rng)
            error = None
        except Exception as exc:  # a crash is a failed check, reported as data
            ok, detail, error = False, {}, f"{type(exc).__name__}: {exc}"
        results.append(
            {
                "name": name,
                "passed": bool(ok),
                "detail": detail,
                "error": error,
                "seconds": round(time.perf_counter() - t0, 3),
            }
        )
        if progress:
            progress(f"{'PASS' if ok else 'FAIL'} {name}")
    failures = [r["name"] for r in results if not r["passed"]]
    return {"passed": not failures, "failures": failures, "checks": results, "seed": seed}
