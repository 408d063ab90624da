"""Compiled inner loops for orbit classification.

All kernels release the GIL, so callers can fan them out over a thread pool.
Depth convention: a return value ``n`` in ``1..limit`` is the step at which
the orbit was classified (escape or region exit); ``limit + 1`` means the
orbit was never classified within ``limit`` steps.  Region exit can also
happen at step ``0``.
"""

import math

import numpy as np
from numba import njit

STATUS_BOUNDED = 0
STATUS_ESCAPED = 1
STATUS_LEFT_REGION = 2

_P = np.array(
    [[1.0, 1.0, 1.0], [-1.0, -1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0]],
)


@njit(cache=True, nogil=True, inline="always")
def _trace_step(a, x1, x2, x3):
    # H swaps the last two coordinates, then G is applied a times
    x2, x3 = x3, x2
    for _ in range(a):
        x1, x2 = 2.0 * x1 * x3 - x2, x1
    return x1, x2, x3


@njit(cache=True, nogil=True, inline="always")
def _in_region_exit(x1, x2, x3, rho2, bound):
    m = max(abs(x1), abs(x2), abs(x3))
    if not (m <= bound):  # also catches nan
        return True
    for i in range(4):
        d1 = x1 - _P[i, 0]
        d2 = x2 - _P[i, 1]
        d3 = x3 - _P[i, 2]
        if d1 * d1 + d2 * d2 + d3 * d3 < rho2:
            return True
    return False


@njit(cache=True, nogil=True)
def classify_orbit(x1, x2, x3, digits, max_steps, threshold, use_region, rho, bound):
    """Return ``(status, steps, max_norm, exit_index)`` for one orbit (``exit_index`` -1 if none)."""
    prev = max(abs(x1), abs(x2), abs(x3))
    max_norm = prev
    rho2 = rho * rho
    if use_region and _in_region_exit(x1, x2, x3, rho2, bound):
        return STATUS_LEFT_REGION, 0, max_norm, 0
    for n in range(1, max_steps + 1):
        x1, x2, x3 = _trace_step(digits[n - 1], x1, x2, x3)
        m = max(abs(x1), abs(x2), abs(x3))
        finite = m < math.inf
        if finite and m > max_norm:
            max_norm = m
        if use_region and _in_region_exit(x1, x2, x3, rho2, bound):
            if not finite:
                max_norm = math.inf
            return STATUS_LEFT_REGION, n, max_norm, n
        if not finite:
            return STATUS_ESCAPED, n, math.inf, -1
        if m > threshold and prev > threshold and m > prev:
            return STATUS_ESCAPED, n, max_norm, -1
        prev = m
    return STATUS_BOUNDED, max_steps, max_norm, -1


@njit(cache=True, nogil=True)
def escape_depth(lam, energy, digits, limit, threshold):
    """Escape step of the spectral-line orbit, or ``limit + 1``."""
    x1 = 0.5 * (energy - lam)
    x2 = 0.5 * energy
    x3 = 1.0
    prev = max(abs(x1), abs(x2), 1.0)
    for n in range(1, limit + 1):
        x1, x2, x3 = _trace_step(digits[n - 1], x1, x2, x3)
        m = max(abs(x1), abs(x2), abs(x3))
        if not (m < math.inf):
            return n
        if m > threshold and prev > threshold and m > prev:
            return n
        prev = m
    return limit + 1


@njit(cache=True, nogil=True)
def region_depth(lam, energy, digits, limit, rho, bound):
    """First step at which the spectral-line orbit leaves the survival region, or ``limit + 1``."""
    x1 = 0.5 * (energy - lam)
    x2 = 0.5 * energy
    x3 = 1.0
    rho2 = rho * rho
    if _in_region_exit(x1, x2, x3, rho2, bound):
        return 0
    for n in range(1, limit + 1):
        x1, x2, x3 = _trace_step(digits[n - 1], x1, x2, x3)
        if _in_region_exit(x1, x2, x3, rho2, bound):
            return n
    return limit + 1


@njit(cache=True, nogil=True)
def escape_depths(lam, energies, digits, limit, threshold, out):
    for i in range(energies.shape[0]):
        out[i] = escape_depth(lam, energies[i], digits, limit, threshold)


@njit(cache=True, nogil=True)
def region_depths(lam, energies, limits, digits, rho, bound, out):
    for i in range(energies.shape[0]):
        out[i] = region_depth(lam, energies[i], digits, limits[i], rho, bound)


@njit(cache=True, nogil=True)
def _alive(lam, e, digits, depth, rdepth, threshold, use_region, rho, bound):
    if escape_depth(lam, e, digits, depth, threshold) <= depth:
        return False
    if use_region and region_depth(lam, e, digits, rdepth, rho, bound) <= rdepth:
        return False
    return True


@njit(cache=True, nogil=True)
def bisect_edges(
    lam, inside, outside, depths, rdepths, digits, threshold, use_region, rho, bound, tol, max_halvings, out
):
    """Refine edges between an alive energy ``inside[i]`` and a dead energy ``outside[i]``.

    An energy is alive when its orbit does not escape within ``depths[i]`` steps
    and, when ``use_region``, stays in the region for ``rdepths[i]`` steps.  The
    bracket is halved until it is no longer than ``tol`` or ``max_halvings`` is
    reached; the outer end of the final bracket is returned so that unresolved
    energies are included.
    """
    for i in range(inside.shape[0]):
        a = inside[i]
        b = outside[i]
        d = depths[i]
        rd = rdepths[i]
        k = 0
        while abs(b - a) > tol and k < max_halvings:
            m = 0.5 * (a + b)
            if _alive(lam, m, digits, d, rd, threshold, use_region, rho, bound):
                a = m
            else:
                b = m
            k += 1
        out[i] = b
