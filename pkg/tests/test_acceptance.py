"""Acceptance criteria, one test each.

Every test prints a single ``PASS``/``FAIL`` line with the measured numbers,
whatever pytest's capture setting.  Run directly with ``python3
tests/test_acceptance.py`` to get just those lines.
"""

import math
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from sturmian.contfrac import (
    ContinuedFraction,
    circle_arcs,
    covering_bound,
    parse_digits,
    special_values,
    three_distance_gaps,
)
from sturmian.fractal import box_dimension, middle_cantor, thickness, thickness_bruteforce
from sturmian.intervals import IntervalSet
from sturmian.surface import (
    SurvivalRegionSpec,
    fricke,
    spectral_line_point,
    spectrum_estimate,
    survival_set,
    trace_map_apply,
)
from sturmian.torus import (
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

PHI = (1 + math.sqrt(5)) / 2
SWEEP = (1.0, 0.5, 0.2, 0.1, 0.05)


def _exact_cf(digits):
    v = Fraction(0)
    for a in reversed(digits):
        v = 1 / (a + v)
    return v


# --- criteria ------------------------------------------------------------------------------


def criterion_1():
    t0 = time.perf_counter()
    s = spectrum_estimate(0.0, "golden", resolution=1e-3, max_steps=1000, escape_threshold=10, threads=1)
    secs = time.perf_counter() - t0
    d = s.hausdorff_distance(IntervalSet([(-2.0, 2.0)]))
    return len(s) == 1 and d < 2e-3 and secs < 60, f"intervals={len(s)} hausdorff={d:.2e} seconds={secs:.1f}"


def criterion_2():
    rng = np.random.default_rng(0)
    pts = rng.uniform(-2, 2, size=(10_000, 3)).astype(np.longdouble)
    step = max(float(np.abs(fricke(trace_map_apply(a, pts)) - fricke(pts)).max()) for a in range(1, 6))
    digits = parse_digits("golden").digits(1000)
    accumulated = 0.0
    for E in np.linspace(-1.9, 1.9, 9):
        p = np.array(list(spectral_line_point(0.0, E)), dtype=np.longdouble)
        f0 = fricke(p)
        for a in digits:
            p = trace_map_apply(a, p)
        accumulated = max(accumulated, float(abs(fricke(p) - f0)))
    return step < 1e-12 and accumulated < 1e-9, f"per_step={step:.2e} accumulated_1000={accumulated:.2e}"


def criterion_3():
    p = np.random.default_rng(0).random((10_000, 2))
    worst = max(
        float(np.abs(F_array(DigitMatrix(a).apply_torus(p)) - trace_map_apply(a, F_array(p))).max()) for a in range(1, 6)
    )
    return worst < 1e-12, f"residual={worst:.2e}"


def criterion_4():
    c = ConeSpec(0.05)
    ok = True
    for a in range(1, 11):
        r = cone_check(c, a)
        ok &= r.invariant and r.min_expansion >= c.mu_bar - 1e-12
        ok &= r.max_expansion <= (a + math.sqrt(4 + a * a)) / 2 + 1e-12
    c0 = ConeSpec(BETA0)
    m0 = cone_check(c0, 1).min_expansion
    ok &= m0 >= math.sqrt(2) - 0.01 and c0.theta0 < math.pi / 3
    return bool(ok), f"beta=0.05 a=1..10 invariant; beta0={BETA0} min_expansion={m0:.6f}"


def criterion_5():
    g = abs(stable_slope([1] * 30) + PHI)
    rng = np.random.default_rng(0)
    bad = 0
    for _ in range(100):
        digits = [int(a) for a in rng.integers(1, 5, size=int(rng.integers(1, 21)))]
        bad += stable_slope(digits, exact=True) != -1 / _exact_cf(digits)
    return g < 1e-9 and bad == 0, f"golden_error={g:.2e} exact_mismatches={bad}/100"


def criterion_6():
    bad = 0
    checked = 0
    for spec in ("golden", "(1,2)*", "(2)*"):
        cf = parse_digits(spec)
        for sv in special_values(cf, 200):
            lengths = three_distance_gaps(cf, sv.n, tol=1e-12)
            checked += 1
            bad += len(lengths) > 2 or max(lengths) > sv.arc_bound + 1e-12
    eps = 0.01
    n = covering_bound([1, 2], eps)
    worst_gap = 0.0
    for seed in range(100):
        alpha = ContinuedFraction.random_bounded([1, 2], seed).value()
        pts = np.sort(np.mod(np.arange(1, n + 1) * float(alpha), 1.0))
        gaps = np.diff(np.concatenate([pts, [pts[0] + 1.0]]))
        worst_gap = max(worst_gap, float(gaps.max()))
    # every y lies within eps of some point when all gaps are below 2 eps
    ok = bad == 0 and checked > 0 and worst_gap < 2 * eps
    return ok, f"special_values={checked} violations={bad} covering_n={n} worst_gap={worst_gap:.2e}"


def criterion_7():
    t = thickness(middle_cantor(8))
    half = thickness(middle_cantor(6, Fraction(1, 4)))
    sets = [middle_cantor(1), middle_cantor(2), IntervalSet([(0, 1), (2, 5), (6, 7), (9, 10)], merge_floor=0)]
    rng = np.random.default_rng(0)
    for _ in range(20):
        w = [Fraction(int(x)) for x in rng.integers(1, 30, size=2 * int(rng.integers(2, 7)) + 1)]
        sets.append(IntervalSet([(sum(w[:i]), sum(w[: i + 1])) for i in range(0, len(w), 2)], merge_floor=0))
    cross = all(thickness(s).tau == thickness_bruteforce(s) for s in sets if len(s.gaps()) <= 6)
    ok = (
        t.tau == 1
        and abs(t.dim_lower - math.log(2) / math.log(3)) < 1e-12
        and half.tau == Fraction(1, 2)
        and abs(half.dim_lower - 0.5) < 1e-12
        and cross
    )
    return ok, f"tau_thirds={t.tau} tau_half={half.tau} brute_force_agrees={cross}"


def criterion_8():
    t0 = time.perf_counter()
    box, surv = [], []
    for lam in SWEEP:
        s = spectrum_estimate(lam, "golden", resolution=1e-4, max_steps=10_000)
        box.append(box_dimension(s).dim)
        sv = survival_set(lam, SurvivalRegionSpec(0.3), "golden", resolution=1e-4, max_steps=10_000)
        surv.append(thickness(sv).dim_lower)
    secs = time.perf_counter() - t0

    def nondecreasing(seq):
        return all(b >= a - 0.05 for a, b in zip(seq, seq[1:]))

    ok = nondecreasing(box) and box[-1] > 0.7 and nondecreasing(surv) and secs < 1800
    fmt = lambda xs: "[" + ", ".join(f"{x:.3f}" for x in xs) + "]"  # noqa: E731
    return ok, f"box_dim={fmt(box)} survival_dim_lower={fmt(surv)} seconds={secs:.0f}"


def criterion_9():
    g0 = graph_transform_manifold(0.0, "golden", depth=50, tol=1e-8)
    err = g0.sup_distance_to_line(-PHI)
    d = [graph_transform_manifold(lam, "golden", depth=50, tol=1e-8).sup_distance_to_line(-PHI) for lam in (0.02, 0.01)]
    ok = err < 1e-6 and d[1] < d[0]
    return ok, f"lambda0_error={err:.2e} dist(0.02)={d[0]:.2e} dist(0.01)={d[1]:.2e}"


def criterion_10():
    counts = {}
    for lam in (0.005, 0.01, 0.02):
        rep = property_c_verify([build_perturbed_map(lam, a) for a in (1, 2)], grid=200, delta=0.1)
        counts[lam] = rep.cone_violations
    control = property_c_verify([build_perturbed_map(0.5, a, lambda_guard=1.0) for a in (1, 2)], grid=200, delta=0.1)
    ok = all(v == 0 for v in counts.values()) and control.cone_violations >= 1
    detail = " ".join(f"violations({k})={v}" for k, v in counts.items())
    return ok, f"{detail} control(0.5)={control.cone_violations}"


def criterion_11():
    r = common_orbit_check(0.05, "golden", 100)
    x, y = Fraction(1, 4), Fraction(1, 4)
    orbit = {(x, y)}
    for _ in range(100):
        x, y = (x + y) % 1, x
        orbit.add((x, y))
    ok = r.equal and r.orbit_size <= 16 and r.orbit_size == len(orbit)
    return ok, f"equal={r.equal} orbit_size={r.orbit_size} exact_orbit_size={len(orbit)}"


CRITERIA = [
    (1, "free-operator oracle", criterion_1),
    (2, "Fricke invariance", criterion_2),
    (3, "semiconjugacy", criterion_3),
    (4, "cone constants", criterion_4),
    (5, "stable slopes", criterion_5),
    (6, "three-distance and covering", criterion_6),
    (7, "thickness oracle", criterion_7),
    (8, "dimension trend", criterion_8),
    (9, "stable manifold reconstruction", criterion_9),
    (10, "Property (C) at small coupling", criterion_10),
    (11, "common orbit", criterion_11),
]


def _line(number, name, ok, detail):
    return f"{'PASS' if ok else 'FAIL'} criterion {number:2d} ({name}): {detail}"


@pytest.mark.parametrize("number,name,fn", CRITERIA, ids=[f"criterion_{n}" for n, _, _ in CRITERIA])
def test_criterion(number, name, fn, capsys):
    ok, detail = fn()
    with capsys.disabled():
        print("\n" + _line(number, name, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for number, name, fn in CRITERIA:
        ok, detail = fn()
        failed += not ok
        print(_line(number, name, ok, detail), flush=True)
    sys.exit(1 if failed else 0)
