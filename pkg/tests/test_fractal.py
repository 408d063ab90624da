import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sturmian.exceptions import PreconditionError, TooFewScalesError
from sturmian.fractal import (
    box_counts,
    box_dimension,
    dim_lower_bound,
    middle_cantor,
    presentation,
    thickness,
    thickness_bruteforce,
)
from sturmian.intervals import CantorApprox, IntervalSet

LOG23 = math.log(2) / math.log(3)


def naive_box_count(s, eps):
    h = s.hull()[0]
    boxes = set()
    for l, r in s.intervals:
        k0 = math.floor((l - h) / eps)
        k1 = math.floor((r - h) / eps)
        boxes.update(range(k0, k1 + 1))
    return len(boxes)


random_sets = st.lists(st.integers(1, 40), min_size=3, max_size=13).map(
    # alternate piece and gap lengths into an exact interval list
    lambda ws: IntervalSet(
        [
            (Fraction(sum(ws[:i])), Fraction(sum(ws[: i + 1])))
            for i in range(0, len(ws), 2)
        ],
        merge_floor=0,
    )
)


# --- intervals ---------------------------------------------------------------------------


def test_merge_and_order():
    s = IntervalSet([(3, 4), (0, 1), (0.5, 2)])
    assert s.intervals == ((0, 2), (3, 4))
    assert IntervalSet([(0, 1), (1 + 1e-13, 2)]).intervals == ((0, 2),)
    assert len(IntervalSet([(0, 1), (1 + 1e-13, 2)], merge_floor=0)) == 2


def test_bad_intervals_rejected():
    with pytest.raises(ValueError):
        IntervalSet([(1.0, 0.0)])
    with pytest.raises(ValueError):
        IntervalSet([(0.0, math.inf)])


def test_hausdorff_and_containment():
    a = IntervalSet([(0.0, 1.0), (2.0, 3.0)])
    b = IntervalSet([(0.0, 3.0)])
    assert b.contains(a) and not a.contains(b)
    assert a.hausdorff_distance(b) == pytest.approx(0.5)
    assert a.hausdorff_distance(a) == 0


def test_csv_round_trip():
    a = IntervalSet([(0.1, 0.2), (1 / 3, 2 / 3)])
    text = a.to_csv()
    assert text.splitlines()[0] == "left,right"
    assert IntervalSet.from_csv(text) == a


def test_cantor_approx_summary():
    c = CantorApprox([(0, 1)], undecided_cells=3, meta={"lam": 0.0})
    s = c.summary()
    assert s["undecided_cells"] == 3 and s["total_length"] == 1 and not s["empty"]
    assert c.clip(0.5, 2).undecided_cells == 3


# --- thickness ---------------------------------------------------------------------------------


def test_middle_thirds_exact():
    t = thickness(middle_cantor(8))
    assert t.tau == 1 and isinstance(t.tau, Fraction)
    assert abs(t.dim_lower - LOG23) < 1e-12


def test_middle_half():
    t = thickness(middle_cantor(6, Fraction(1, 4)))
    assert t.tau == Fraction(1, 2)
    assert abs(t.dim_lower - 0.5) < 1e-12


def test_no_gaps():
    t = thickness(IntervalSet([(0, 1)]))
    assert t.tau == math.inf and t.dim_lower == 1.0


@pytest.mark.parametrize("stage", [1, 2])
def test_bruteforce_on_cantor_stages(stage):
    s = middle_cantor(stage)
    assert thickness_bruteforce(s) == thickness(s).tau


@settings(max_examples=60, deadline=None)
@given(random_sets)
def test_presentation_attains_supremum(s):
    if len(s.gaps()) > 6:
        return
    assert thickness(s).tau == thickness_bruteforce(s)


def test_bruteforce_guard():
    with pytest.raises(PreconditionError):
        thickness_bruteforce(middle_cantor(4))


def test_presentation_order():
    p = presentation(IntervalSet([(0, 1), (2, 3), (6, 7)], merge_floor=0))
    assert p.gaps == ((3, 6), (1, 2))
    assert p.bridges[0] == (3, 1)


def test_dim_lower_bound_limits():
    assert dim_lower_bound(0) == 0.0
    assert dim_lower_bound(math.inf) == 1.0
    assert dim_lower_bound(1) == pytest.approx(LOG23)
    assert dim_lower_bound(Fraction(1, 2)) == pytest.approx(0.5)


# --- box counting ----------------------------------------------------------------------------------


@settings(max_examples=40, deadline=None)
@given(random_sets, st.sampled_from([0.5, 1.0, 3.0, 7.0]))
def test_box_counts_match_naive(s, eps):
    f = IntervalSet([(float(l), float(r)) for l, r in s.intervals], merge_floor=0)
    assert int(box_counts(f, [eps])[0]) == naive_box_count(f, eps)


def test_box_dimension_cantor():
    s = middle_cantor(12, 1 / 3)
    fit = box_dimension(s, [3.0**-k for k in range(2, 11)])
    assert fit.dim == pytest.approx(LOG23, abs=0.02)


def test_box_dimension_interval():
    fit = box_dimension(IntervalSet([(-2.0, 2.0)]))
    assert fit.dim == pytest.approx(1.0, abs=0.02)


def test_box_dimension_too_few_scales():
    with pytest.raises(TooFewScalesError):
        box_dimension(IntervalSet([(0.0, 1.0)]), [0.5])
