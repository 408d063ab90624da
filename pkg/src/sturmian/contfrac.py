"""Continued fractions, convergents and circle-rotation tools.

A :class:`ContinuedFraction` is a digit sequence ``(a_1, a_2, ...)`` of a number
``alpha = [a_1, a_2, ...]`` in (0, 1).  Digits are 1-based throughout, matching
the usual convention ``alpha = 1 / (a_1 + 1 / (a_2 + ...))``.

Convergent arithmetic is done in Python integers, so it never overflows.  Digit
extraction from a real number uses mpmath with directed rounding: the input is
carried as an enclosing interval and a digit is only emitted when both ends of
the interval agree on it.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import mpmath
import numpy as np

from .exceptions import DigitsExhausted, PrecisionExhausted, SturmianError

__all__ = [
    "ContinuedFraction",
    "ConvergentPair",
    "SpecialValue",
    "parse_digits",
    "as_continued_fraction",
    "cf_expand",
    "convergents",
    "circle_arcs",
    "three_distance_gaps",
    "special_values",
    "covering_bound",
    "GAP_DEDUP_TOL",
]

#: Absolute tolerance used to merge arc lengths that differ only by rounding.
GAP_DEDUP_TOL = 1e-12

_ALIASES = {"golden": ((), (1,)), "silver": ((), (2,))}


def _check_digit(a) -> int:
    if isinstance(a, bool) or int(a) != a or int(a) < 1:
        raise ValueError(f"continued-fraction digits must be positive integers, got {a!r}")
    return int(a)


class ContinuedFraction:
    """Digit sequence of a number in (0, 1).

    Three modes are supported:

    ``finite``
        exactly the digits given in ``prefix``;
    ``periodic``
        ``prefix`` followed by ``period`` repeated forever;
    ``generator``
        ``prefix`` followed by ``generator(k)`` for ``k > len(prefix)``.  The
        callable must be deterministic, and ``alphabet`` must list the digits
        it can produce.

    Instances are immutable.  Use the classmethods :meth:`finite`,
    :meth:`periodic`, :meth:`from_generator`, :meth:`random_bounded` and
    :meth:`parse` rather than the constructor where convenient.
    """

    __slots__ = ("_prefix", "_period", "_generator", "_alphabet", "_label")

    def __init__(
        self,
        prefix: Iterable[int] = (),
        period: Iterable[int] = (),
        generator: Callable[[int], int] | None = None,
        alphabet: Iterable[int] | None = None,
        label: str | None = None,
    ):
        prefix = tuple(_check_digit(a) for a in prefix)
        period = tuple(_check_digit(a) for a in period)
        if period and generator is not None:
            raise ValueError("give either a period or a generator, not both")
        if generator is not None and alphabet is None:
            raise ValueError("generator mode needs an explicit alphabet")
        if not prefix and not period and generator is None:
            raise ValueError("empty digit sequence")
        derived = set(prefix) | set(period)
        if alphabet is None:
            alpha_set = frozenset(derived)
        else:
            alpha_set = frozenset(_check_digit(a) for a in alphabet)
            if not alpha_set:
                raise ValueError("alphabet must be nonempty")
            bad = derived - alpha_set
            if bad:
                raise ValueError(f"digits {sorted(bad)} are outside the alphabet {sorted(alpha_set)}")
        self._prefix = prefix
        self._period = period
        self._generator = generator
        self._alphabet = alpha_set
        self._label = label

    # construction helpers -------------------------------------------------
    @classmethod
    def finite(cls, digits: Iterable[int]) -> "ContinuedFraction":
        return cls(prefix=digits)

    @classmethod
    def periodic(cls, period: Iterable[int], prefix: Iterable[int] = ()) -> "ContinuedFraction":
        return cls(prefix=prefix, period=period)

    @classmethod
    def from_generator(
        cls, generator: Callable[[int], int], alphabet: Iterable[int], prefix: Iterable[int] = ()
    ) -> "ContinuedFraction":
        return cls(prefix=prefix, generator=generator, alphabet=alphabet)

    @classmethod
    def golden(cls) -> "ContinuedFraction":
        return cls(period=(1,), label="golden")

    @classmethod
    def silver(cls) -> "ContinuedFraction":
        return cls(period=(2,), label="silver")

    @classmethod
    def random_bounded(cls, alphabet: Iterable[int], seed: int) -> "ContinuedFraction":
        """Infinite bounded-type sequence with i.i.d. uniform digits from ``alphabet``.

        Digit ``k`` depends only on ``(seed, k)``, so the sequence is reproducible
        and can be queried in any order.
        """
        choices = tuple(sorted(_check_digit(a) for a in alphabet))
        if not choices:
            raise ValueError("alphabet must be nonempty")

        def gen(k: int, _c=choices, _s=int(seed)) -> int:
            return _c[int(np.random.default_rng([_s, k]).integers(len(_c)))]

        return cls(generator=gen, alphabet=choices, label=f"random{list(choices)}@{seed}")

    @classmethod
    def parse(cls, text: str) -> "ContinuedFraction":
        return parse_digits(text)

    # accessors ------------------------------------------------------------
    @property
    def mode(self) -> str:
        if self._generator is not None:
            return "generator"
        return "periodic" if self._period else "finite"

    @property
    def alphabet(self) -> frozenset:
        return self._alphabet

    @property
    def prefix(self) -> tuple:
        return self._prefix

    @property
    def period(self) -> tuple:
        return self._period

    @property
    def is_finite(self) -> bool:
        return self.mode == "finite"

    def __len__(self):
        if not self.is_finite:
            raise TypeError("infinite digit sequence has no length")
        return len(self._prefix)

    def digit(self, k: int) -> int:
        """Return ``a_k`` (1-based)."""
        if k < 1:
            raise IndexError("digits are indexed from 1")
        if k <= len(self._prefix):
            return self._prefix[k - 1]
        if self._period:
            return self._period[(k - len(self._prefix) - 1) % len(self._period)]
        if self._generator is not None:
            a = _check_digit(self._generator(k))
            if a not in self._alphabet:
                raise SturmianError(f"generator produced digit {a} outside alphabet {sorted(self._alphabet)}")
            return a
        raise DigitsExhausted(f"finite sequence has {len(self._prefix)} digits, digit {k} requested")

    def digits(self, n: int) -> tuple:
        """Return ``(a_1, ..., a_n)``; raises :class:`DigitsExhausted` if a finite sequence is too short."""
        if n < 0:
            raise ValueError("n must be nonnegative")
        if self.is_finite and n > len(self._prefix):
            raise DigitsExhausted(f"finite sequence has {len(self._prefix)} digits, {n} requested")
        return tuple(self.digit(k) for k in range(1, n + 1))

    def shift(self, m: int) -> "ContinuedFraction":
        """The sequence ``(a_m, a_{m+1}, ...)``."""
        if m < 1:
            raise ValueError("shift index starts at 1")
        if m == 1:
            return self
        drop = m - 1
        if self.is_finite:
            if drop >= len(self._prefix):
                raise DigitsExhausted("shift past the end of a finite sequence")
            return ContinuedFraction(prefix=self._prefix[drop:])
        if self._period:
            if drop <= len(self._prefix):
                return ContinuedFraction(prefix=self._prefix[drop:], period=self._period)
            j = (drop - len(self._prefix)) % len(self._period)
            return ContinuedFraction(period=self._period[j:] + self._period[:j])
        gen = self._generator
        pre = self._prefix[drop:]
        return ContinuedFraction(
            prefix=pre,
            generator=lambda k, _g=gen, _d=drop: _g(k + _d),
            alphabet=self._alphabet,
        )

    def truncation(self, n: int) -> Fraction:
        """Exact value of ``[a_1, ..., a_n]``."""
        value = Fraction(0)
        for a in reversed(self.digits(n)):
            value = 1 / (a + value)
        return value

    def value(self, prec: int = 53):
        """Numerical value of the sequence.

        ``prec <= 53`` returns a float; larger ``prec`` returns an ``mpmath.mpf``
        computed to roughly ``prec`` bits.  A finite sequence is evaluated exactly
        before rounding.
        """
        frac = self.fraction(tol_bits=max(prec, 53) + 8)
        if prec <= 53:
            return frac.numerator / frac.denominator
        with mpmath.workprec(prec):
            return mpmath.mpf(frac.numerator) / frac.denominator

    def fraction(self, tol_bits: int = 100) -> Fraction:
        """Exact rational approximation within ``2**-tol_bits`` (exact for finite sequences)."""
        if self.is_finite:
            return self.truncation(len(self._prefix))
        # |alpha - p_k/q_k| < 1/q_k^2
        for p, q in _iter_pq(self):
            if q * q > 2**tol_bits:
                return Fraction(p, q)
        raise AssertionError("unreachable")

    # dunder ---------------------------------------------------------------
    def __repr__(self):
        return f"ContinuedFraction({self.describe()!r})"

    def describe(self) -> str:
        if self._label:
            return self._label
        head = ",".join(str(a) for a in self._prefix)
        if self._period:
            per = "(" + ",".join(str(a) for a in self._period) + ")*"
            return f"{head},{per}" if head else per
        if self._generator is not None:
            return (head + "," if head else "") + f"<generator {sorted(self._alphabet)}>"
        return head

    def __eq__(self, other):
        if not isinstance(other, ContinuedFraction):
            return NotImplemented
        if self._generator is not None or other._generator is not None:
            return self is other
        return (self._prefix, self._period) == (other._prefix, other._period)

    def __hash__(self):
        return hash((self._prefix, self._period, id(self._generator) if self._generator else None))


_TOKEN = re.compile(r"^\s*(?:(?P<pre>[0-9,\s]*?)\s*,\s*)?\((?P<per>[0-9,\s]+)\)\s*\*\s*$")


def parse_digits(text: str) -> ContinuedFraction:
    """Parse the digit-string syntax.

    ``"1,1,2"`` is a finite sequence, ``"(1,2)*"`` repeats ``1,2`` forever,
    ``"3,(1,2)*"`` puts a prefix before the repetition, and ``"golden"`` /
    ``"silver"`` stand for all ones and all twos.
    """
    if not isinstance(text, str):
        raise ValueError("digit specification must be a string")
    key = text.strip().lower()
    if key in _ALIASES:
        pre, per = _ALIASES[key]
        return ContinuedFraction(prefix=pre, period=per, label=key)

    def ints(chunk: str) -> tuple:
        parts = [p.strip() for p in chunk.split(",") if p.strip()]
        if not parts or any(not p.isdigit() for p in parts):
            raise ValueError(f"cannot parse digits from {text!r}")
        return tuple(int(p) for p in parts)

    if "(" in key:
        m = _TOKEN.match(key)
        if m is None:
            raise ValueError(f"cannot parse digit specification {text!r}")
        pre = ints(m.group("pre")) if m.group("pre") else ()
        return ContinuedFraction(prefix=pre, period=ints(m.group("per")))
    return ContinuedFraction(prefix=ints(key))


def as_continued_fraction(obj) -> ContinuedFraction:
    """Coerce a string, digit list or :class:`ContinuedFraction`."""
    if isinstance(obj, ContinuedFraction):
        return obj
    if isinstance(obj, str):
        return parse_digits(obj)
    return ContinuedFraction(prefix=tuple(obj))


# ---------------------------------------------------------------------------
# digit extraction


def _enclosure(x, prec: int):
    """Return ``(lo, hi)`` mpf bounds of the input together with an exactness flag."""
    if isinstance(x, Fraction) or isinstance(x, int):
        fx = Fraction(x)
        return fx, fx, True
    if isinstance(x, (float, np.floating)):
        v = mpmath.mpf(float(x))
        ulp = mpmath.ldexp(abs(v), -52)
        return (
            mpmath.fsub(v, ulp, prec=prec, rounding="d"),
            mpmath.fadd(v, ulp, prec=prec, rounding="u"),
            False,
        )
    if isinstance(x, str):
        with mpmath.workprec(prec + 4):
            v = mpmath.mpf(x)
    elif isinstance(x, mpmath.mpf):
        v = x
    else:
        raise TypeError(f"unsupported input type {type(x).__name__}")
    # An mpf is trusted to the width of its mantissa (at least 53 bits), never beyond prec.
    bits = prec if isinstance(x, str) else min(prec, max(53, int(v.man).bit_length()))
    rel = mpmath.ldexp(abs(v), -bits + 1)
    return (
        mpmath.fsub(v, rel, prec=prec, rounding="d"),
        mpmath.fadd(v, rel, prec=prec, rounding="u"),
        False,
    )


def cf_expand(x, n: int, prec: int = 80) -> list:
    """First ``n`` continued-fraction digits of ``x`` in (0, 1).

    ``x`` may be a float (taken to be uncertain by one unit in the last place),
    an ``mpmath.mpf`` (uncertain to its precision, capped at ``prec``), a decimal
    string (parsed at ``prec`` bits), or an exact ``Fraction``.  The input is
    tracked as an interval through the Gauss map with outward rounding at
    ``prec`` bits (at least 80).  :class:`PrecisionExhausted` is raised when the
    next digit is not determined by the interval, or when an exact remainder
    reaches zero, which means the input is rational.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    prec = max(int(prec), 80)
    lo, hi, exact = _enclosure(x, prec)
    if not (0 < lo and hi < 1):
        raise ValueError("x must lie in (0, 1)")
    digits = []
    if exact:
        r = lo
        for k in range(1, n + 1):
            if r == 0:
                raise PrecisionExhausted(f"rational input: remainder vanished after {k - 1} digits")
            y = 1 / r
            a = math.floor(y)
            digits.append(a)
            r = y - a
        return digits
    for k in range(1, n + 1):
        if lo <= 0:
            raise PrecisionExhausted(
                f"remainder interval reaches zero at digit {k}: rational input or precision exhausted"
            )
        y_lo = mpmath.fdiv(1, hi, prec=prec, rounding="d")
        y_hi = mpmath.fdiv(1, lo, prec=prec, rounding="u")
        a_lo, a_hi = int(mpmath.floor(y_lo)), int(mpmath.floor(y_hi))
        if a_lo != a_hi or a_lo < 1:
            raise PrecisionExhausted(
                f"digit {k} is ambiguous at {prec} bits (could be {a_lo}..{a_hi})"
            )
        digits.append(a_lo)
        lo = mpmath.fsub(y_lo, a_lo, prec=prec, rounding="d")
        hi = mpmath.fsub(y_hi, a_lo, prec=prec, rounding="u")
    return digits


# ---------------------------------------------------------------------------
# convergents


@dataclass(frozen=True)
class ConvergentPair:
    """Convergent ``p_k / q_k = [a_1, ..., a_k]``."""

    k: int
    p: int
    q: int

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.p, self.q)


def _iter_pq(cf: ContinuedFraction):
    p_prev, p = 0, 1  # p_0, p_1
    q_prev, q = 1, cf.digit(1)  # q_0, q_1
    yield p, q
    k = 1
    while True:
        k += 1
        a = cf.digit(k)
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        yield p, q


def convergents(cf, n: int) -> list:
    """Convergents ``k = 1..n`` from the recurrences with ``p_0=0, p_1=1, q_0=1, q_1=a_1``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    cf = as_continued_fraction(cf)
    cf.digits(n)  # raise early on short finite sequences
    out = []
    for k, (p, q) in enumerate(_iter_pq(cf), start=1):
        out.append(ConvergentPair(k, p, q))
        if k == n:
            break
    return out


def _q_sequence(digits: Sequence[int]) -> list:
    """``[q_0, q_1, ..., q_n]`` for an explicit digit list."""
    qs = [1]
    prev = 0
    for a in digits:
        qs.append(a * qs[-1] + prev)
        prev = qs[-2]
    return qs


# ---------------------------------------------------------------------------
# circle rotation


def _alpha_fraction(alpha) -> Fraction:
    if isinstance(alpha, ContinuedFraction):
        return alpha.fraction(tol_bits=120)
    if isinstance(alpha, (str, list, tuple)):
        return as_continued_fraction(alpha).fraction(tol_bits=120)
    if isinstance(alpha, Fraction):
        return alpha
    if isinstance(alpha, mpmath.mpf):
        m, e = mpmath.mpf(alpha).man_exp
        return Fraction(int(m)) * (Fraction(2) ** int(e))
    return Fraction(float(alpha))


def circle_arcs(alpha, n: int) -> np.ndarray:
    """Lengths of the ``n + 1`` arcs cut from the unit circle by ``0, alpha, ..., n*alpha mod 1``.

    The arcs are listed counterclockwise from 0.  Positions are computed exactly
    from a rational ``alpha`` (a continued fraction is first replaced by a
    convergent with error below ``2**-120``), so the only rounding is the final
    conversion of each arc to float.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    fa = _alpha_fraction(alpha)
    p, q = fa.numerator, fa.denominator
    pos = sorted({(m * p) % q for m in range(0, n + 1)})
    if len(pos) != n + 1:
        raise PrecisionExhausted("orbit points coincide: alpha is rational at this n")
    pos.append(q)
    return np.array([(b - a) / q for a, b in zip(pos[:-1], pos[1:])], dtype=float)


def _dedup(values: Iterable[float], tol: float) -> list:
    out = []
    for v in sorted(values):
        if not out or v - out[-1] > tol:
            out.append(float(v))
    return out


def three_distance_gaps(alpha, n: int, tol: float = GAP_DEDUP_TOL) -> list:
    """Distinct arc lengths (ascending, merged within ``tol``) of :func:`circle_arcs`."""
    return _dedup(circle_arcs(alpha, n), tol)


@dataclass(frozen=True)
class SpecialValue:
    """An orbit length ``n = (r + 1) q_k + q_{k-1} - 1`` and the arc bound ``1/q_{k-1} + 1/q_k``."""

    n: int
    k: int
    r: int
    q_k: int
    q_km1: int

    @property
    def arc_bound(self) -> float:
        return 1.0 / self.q_km1 + 1.0 / self.q_k


def special_values(cf, n_max: int) -> list:
    """All ``n <= n_max`` of the form ``(r + 1) q_k + q_{k-1} - 1`` with ``k >= 1`` and ``1 <= r <= a_{k+1}``.

    The list is sorted by ``n``.  ``r = a_{k+1}`` is included because it coincides
    with the ``r = 0`` member of the next level, at which the arcs also take two
    lengths; the golden mean has no other special values.
    """
    cf = as_continued_fraction(cf)
    out = []
    q_prev, q = 1, cf.digit(1)
    k = 1
    while 2 * q + q_prev - 1 <= n_max:
        try:
            a_next = cf.digit(k + 1)
        except DigitsExhausted:
            break
        for r in range(1, a_next + 1):
            n = (r + 1) * q + q_prev - 1
            if n <= n_max:
                out.append(SpecialValue(n, k, r, q, q_prev))
        q_prev, q = q, a_next * q + q_prev
        k += 1
    out.sort(key=lambda s: (s.n, s.k, s.r))
    return out


def covering_bound(alphabet: Iterable[int], eps: float) -> int:
    """Orbit length after which every rotation with digits in ``alphabet`` is ``eps``-dense.

    Let ``a'`` be the smallest digit and ``M_k`` the denominators of the
    sequence using only the largest digit.  The smallest ``k >= 1`` with
    ``1/q_{k-1} + 1/q_k < eps`` for the constant sequence ``a'`` is chosen and
    ``n = 2 M_k + M_{k-1} - 1`` returned.  For any admissible ``alpha`` this ``n``
    is at least the special value ``2 q_k + q_{k-1} - 1`` of ``alpha``, where all
    arcs are below ``eps``; hence every ``y`` is within ``eps`` of some
    ``m alpha`` with ``1 <= m <= n``.
    """
    digits = sorted({_check_digit(a) for a in alphabet})
    if not digits:
        raise ValueError("alphabet must be nonempty")
    if not eps > 0:
        raise ValueError("eps must be positive")
    lo, hi = digits[0], digits[-1]
    q_prev, q = 1, lo  # slowest-growing denominators
    m_prev, m = 1, hi  # fastest-growing denominators
    while not (1.0 / q_prev + 1.0 / q < eps):
        q_prev, q = q, lo * q + q_prev
        m_prev, m = m, hi * m + m_prev
    return 2 * m + m_prev - 1
