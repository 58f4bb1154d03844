"""Vectorized bracketing helpers used for calibration and interval inversion."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import ConvergenceError


def bisect_increasing(
    f: Callable[[np.ndarray], np.ndarray],
    lo: np.ndarray,
    hi: np.ndarray,
    target: np.ndarray | float = 0.0,
    tol: float = 1e-12,
    maxiter: int = 200,
) -> np.ndarray:
    """Elementwise bisection for ``f(x) = target`` with ``f`` nondecreasing.

    ``lo`` and ``hi`` must bracket the target: ``f(lo) <= target <= f(hi)``.
    Iterates until every bracket is narrower than ``tol`` or ``maxiter`` halvings.
    Returns the midpoint of the final bracket.
    """
    lo = np.array(lo, dtype=float, copy=True)
    hi = np.array(hi, dtype=float, copy=True)
    lo, hi = np.broadcast_arrays(lo, hi)
    lo = lo.copy()
    hi = hi.copy()
    target = np.broadcast_to(np.asarray(target, dtype=float), lo.shape)
    for _ in range(maxiter):
        if np.all(hi - lo <= tol):
            break
        mid = 0.5 * (lo + hi)
        below = f(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def expand_bracket(
    g: Callable[[float], float],
    lo: float,
    hi: float,
    max_expansions: int = 200,
) -> tuple[float, float]:
    """Widen ``[lo, hi]`` until the nonincreasing scalar ``g`` changes sign.

    Expects ``g(lo) >= 0 >= g(hi)`` once the bracket is wide enough. The width
    doubles on each side that has not yet crossed.
    """
    step = max(hi - lo, 1.0)
    for _ in range(max_expansions):
        g_lo, g_hi = g(lo), g(hi)
        if g_lo >= 0.0 and g_hi <= 0.0:
            return lo, hi
        if g_lo < 0.0:
            lo -= step
        if g_hi > 0.0:
            hi += step
        step *= 2.0
    raise ConvergenceError(
        f"could not bracket root after {max_expansions} expansions (last [{lo}, {hi}])"
    )
