"""Confidence intervals and confidence distributions from a private summary.

Every interval is ``{theta0 : p(theta0, z) >= alpha}`` for one of the
p-values in :mod:`dpbinom.one_sided` / :mod:`dpbinom.two_sided`, found by
bisection in ``theta0``. The ``*_bounds`` functions are vectorized over
``z`` and are what the simulation harness calls; the ``ci_*`` functions
wrap them for a single summary.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np

from .distributions import PrivacyParams, binom_pmf, cdf_offset
from .errors import DomainError
from .one_sided import _check_count, _check_open_unit, ump_pvalue
from .two_sided import MonotonicityWarning, approx_pvalue, umau_threshold

__all__ = [
    "IntervalKind",
    "IntervalResult",
    "CdResult",
    "lower_bounds",
    "upper_bounds",
    "bonferroni_bounds",
    "approx_bounds",
    "ci_lower",
    "ci_upper",
    "ci_bonferroni",
    "ci_approx_umpu",
    "ci_umau",
    "confidence_distribution",
]

THETA_TOL = 1e-8


class IntervalKind(str, enum.Enum):
    LOWER_ONE_SIDED = "lower"
    UPPER_ONE_SIDED = "upper"
    BONFERRONI = "bonferroni"
    APPROX_UMPU = "approx"
    UMAU = "umau"


@dataclass(frozen=True)
class IntervalResult:
    lower: float
    upper: float
    coverage: float
    kind: IntervalKind
    z: float

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def __contains__(self, theta) -> bool:
        return self.lower <= theta <= self.upper

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "coverage": self.coverage,
            "kind": self.kind.value,
            "z": self.z,
        }


@dataclass(frozen=True, eq=False)
class CdResult:
    """Confidence distribution ``H(theta) = p(theta, z)`` on a grid."""

    grid: np.ndarray
    values: np.ndarray
    z: float
    n: int
    privacy: PrivacyParams

    def median(self) -> float:
        """Grid point where ``H`` first reaches 1/2 (no interpolation)."""
        idx = int(np.searchsorted(self.values, 0.5, side="left"))
        return float(self.grid[min(idx, len(self.grid) - 1)])


# ---------------------------------------------------------------------------
# one-sided inversions (vectorized over z)


def _bisect_theta(fn, lo, hi, tol=THETA_TOL):
    """Boundary of a predicate that is False at ``lo`` and True at ``hi``."""
    lo, hi = lo.astype(float).copy(), hi.astype(float).copy()
    while np.any(np.abs(hi - lo) > tol):
        mid = 0.5 * (lo + hi)
        ok = fn(mid)
        hi = np.where(ok, mid, hi)
        lo = np.where(ok, lo, mid)
    return 0.5 * (lo + hi)


def _tail_matrix(z: np.ndarray, n: int, privacy: PrivacyParams, upper: bool) -> np.ndarray:
    # F_N(x - z) does not depend on theta0; compute once per z
    x = np.arange(n + 1, dtype=float)
    t = z[:, None] - x if upper else x - z[:, None]
    return cdf_offset(t, privacy.b, privacy.q)


def lower_bounds(z, n: int, alpha: float, privacy: PrivacyParams) -> np.ndarray:
    """``L = inf{theta0 : p_greater(theta0, z) >= alpha}`` for each ``z``.

    ``L = 0`` when the p-value already reaches ``alpha`` at ``theta0 = 0``;
    ``L = 1`` when it never does.
    """
    n = _check_count(n)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    F = _tail_matrix(z, n, privacy, upper=False)

    def covered(theta):
        return np.sum(F * binom_pmf(n, theta), axis=-1) >= alpha

    zeros, ones = np.zeros_like(z), np.ones_like(z)
    at0, at1 = covered(zeros), covered(ones)
    inner = ~at0 & at1
    out = np.where(at0, 0.0, 1.0)
    if inner.any():
        Fi = F[inner]
        out[inner] = _bisect_theta(
            lambda th: np.sum(Fi * binom_pmf(n, th), axis=-1) >= alpha,
            zeros[inner],
            ones[inner],
        )
    return out


def upper_bounds(z, n: int, alpha: float, privacy: PrivacyParams) -> np.ndarray:
    """``U = sup{theta0 : 1 - p_greater(theta0, z) >= alpha}`` for each ``z``."""
    n = _check_count(n)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    F = _tail_matrix(z, n, privacy, upper=True)

    def covered(theta):
        return np.sum(F * binom_pmf(n, theta), axis=-1) >= alpha

    zeros, ones = np.zeros_like(z), np.ones_like(z)
    at0, at1 = covered(zeros), covered(ones)
    inner = at0 & ~at1
    out = np.where(at1, 1.0, 0.0)
    if inner.any():
        Fi = F[inner]
        # predicate "not covered" is False at 0 and True at 1
        out[inner] = _bisect_theta(
            lambda th: np.sum(Fi * binom_pmf(n, th), axis=-1) < alpha,
            zeros[inner],
            ones[inner],
        )
    return out


def bonferroni_bounds(z, n: int, alpha: float, privacy: PrivacyParams):
    """``[L, U]`` from the two one-sided intervals at ``alpha / 2``."""
    return lower_bounds(z, n, alpha / 2, privacy), upper_bounds(z, n, alpha / 2, privacy)


# ---------------------------------------------------------------------------
# two-sided inversion around an anchor


def _outer_crossing(pvals_fn, z, anchor, alpha, side: str, probe: int):
    """Outermost ``theta`` on one side of ``anchor`` with ``p >= alpha``.

    ``side='lower'`` scans ``[0, anchor]``; ``'upper'`` scans ``[anchor, 1]``.
    A probe grid locates the outermost covered grid point; bisection then
    refines between it and its uncovered outer neighbour.
    """
    frac = np.linspace(0.0, 1.0, probe)
    if side == "lower":
        grid = anchor[:, None] * frac[None, :]  # 0 -> anchor
    else:
        grid = anchor[:, None] + (1.0 - anchor[:, None]) * frac[::-1][None, :]  # 1 -> anchor
    zz = np.broadcast_to(z[:, None], grid.shape)
    ok = pvals_fn(zz, grid) >= alpha
    if np.any(np.count_nonzero(np.diff(ok.astype(int), axis=1), axis=1) > 1):
        warnings.warn(
            "two-sided p-value is not unimodal in theta0; using outermost crossing",
            MonotonicityWarning,
            stacklevel=3,
        )
    any_ok = ok.any(axis=1)
    first = np.argmax(ok, axis=1)  # outermost covered grid index
    rows = np.arange(len(z))
    out = np.where(any_ok, grid[rows, first], anchor)
    refine = any_ok & (first > 0)
    if refine.any():
        zr = z[refine]
        inside = grid[rows[refine], first[refine]]
        outside = grid[rows[refine], first[refine] - 1]
        out[refine] = _bisect_theta(lambda th: pvals_fn(zr, th) >= alpha, outside, inside)
    return out


def approx_bounds(z, n: int, alpha: float, privacy: PrivacyParams, probe: int = 41):
    """Invert the approximately unbiased p-value around ``clamp(z / n)``."""
    n = _check_count(n)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    anchor = np.clip(z / n, 0.0, 1.0)

    def pv(zz, th):
        return approx_pvalue(zz, n, th, privacy)

    return (
        _outer_crossing(pv, z, anchor, alpha, "lower", probe),
        _outer_crossing(pv, z, anchor, alpha, "upper", probe),
    )


# ---------------------------------------------------------------------------
# public wrappers


def _validate(n, alpha):
    _check_count(n)
    _check_open_unit("alpha", alpha)


def ci_lower(z: float, n: int, alpha: float, privacy: PrivacyParams) -> IntervalResult:
    """UMA one-sided interval ``[L, 1]``."""
    _validate(n, alpha)
    lo = float(lower_bounds(z, n, alpha, privacy)[0])
    return IntervalResult(lo, 1.0, 1 - alpha, IntervalKind.LOWER_ONE_SIDED, float(z))


def ci_upper(z: float, n: int, alpha: float, privacy: PrivacyParams) -> IntervalResult:
    """UMA one-sided interval ``[0, U]``."""
    _validate(n, alpha)
    hi = float(upper_bounds(z, n, alpha, privacy)[0])
    return IntervalResult(0.0, hi, 1 - alpha, IntervalKind.UPPER_ONE_SIDED, float(z))


def ci_bonferroni(z: float, n: int, alpha: float, privacy: PrivacyParams) -> IntervalResult:
    _validate(n, alpha)
    lo, hi = bonferroni_bounds(z, n, alpha, privacy)
    return IntervalResult(float(lo[0]), float(hi[0]), 1 - alpha, IntervalKind.BONFERRONI, float(z))


def ci_approx_umpu(z: float, n: int, alpha: float, privacy: PrivacyParams) -> IntervalResult:
    _validate(n, alpha)
    lo, hi = approx_bounds(z, n, alpha, privacy)
    return IntervalResult(float(lo[0]), float(hi[0]), 1 - alpha, IntervalKind.APPROX_UMPU, float(z))


def umau_covers(z, theta0: float, n: int, alpha: float, privacy: PrivacyParams):
    """Whether ``theta0`` lies in the UMAU interval, i.e. ``|z - k| < t``.

    Equivalent to ``umau_pvalue(z, theta0) > alpha`` when the rejection
    predicate is monotone in alpha, but needs one solve instead of a search.
    """
    if theta0 <= 0.0 or theta0 >= 1.0:
        return np.zeros_like(np.asarray(z, dtype=float), dtype=bool)
    k, t = umau_threshold(n, theta0, alpha, privacy)
    return np.abs(np.asarray(z, dtype=float) - k) < t


def ci_umau(
    z: float,
    n: int,
    alpha: float,
    privacy: PrivacyParams,
    tol: float = 1e-6,
    probe: int = 21,
) -> IntervalResult:
    """Interval from inverting the UMAU p-value; one UMPU solve per probe."""
    _validate(n, alpha)
    z = float(z)
    edge = 1e-6
    anchor = np.array([np.clip(z / n, edge, 1 - edge)])
    zz = np.array([z])

    def pv(zs, th):
        th = np.asarray(th, dtype=float)
        out = np.empty(th.shape)
        for idx, v in np.ndenumerate(th):
            v = float(np.clip(v, edge, 1 - edge))
            out[idx] = 1.0 if umau_covers(z, v, n, alpha, privacy) else 0.0
        return out

    # the cover predicate stands in for "p >= alpha"; threshold at 1/2
    lo = _outer_crossing_scalar(pv, zz, anchor, "lower", probe, tol)
    hi = _outer_crossing_scalar(pv, zz, anchor, "upper", probe, tol)
    lo = 0.0 if lo <= edge else lo
    hi = 1.0 if hi >= 1 - edge else hi
    return IntervalResult(lo, hi, 1 - alpha, IntervalKind.UMAU, z)


def _outer_crossing_scalar(pv, zz, anchor, side, probe, tol):
    frac = np.linspace(0.0, 1.0, probe)
    a = float(anchor[0])
    grid = a * frac if side == "lower" else a + (1.0 - a) * frac[::-1]
    ok = pv(zz, grid) > 0.5
    if np.count_nonzero(np.diff(ok.astype(int))) > 1:
        warnings.warn(
            "UMAU coverage is not an interval on the probe grid; using outermost crossing",
            MonotonicityWarning,
            stacklevel=3,
        )
    if not ok.any():
        return a
    first = int(np.argmax(ok))
    if first == 0:
        return float(grid[0])
    inside, outside = float(grid[first]), float(grid[first - 1])
    while abs(inside - outside) > tol:
        mid = 0.5 * (inside + outside)
        if pv(zz, np.array([mid]))[0] > 0.5:
            inside = mid
        else:
            outside = mid
    return 0.5 * (inside + outside)


def confidence_distribution(z: float, n: int, privacy: PrivacyParams, grid) -> CdResult:
    """``H(theta) = p_greater(theta, z)`` on an increasing grid in ``[0, 1]``.

    ``H(0) = F_N(-z)`` and ``H(1) = F_N(n - z)`` are generally not 0 and 1;
    values are reported as is.
    """
    n = _check_count(n)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be a strictly increasing 1-D sequence")
    if grid[0] < 0.0 or grid[-1] > 1.0:
        raise DomainError("grid must lie within [0, 1]")
    values = np.atleast_1d(ump_pvalue(float(z), n, grid, privacy, "greater"))
    values = np.maximum.accumulate(values)  # float noise only
    return CdResult(grid=grid, values=values, z=float(z), n=n, privacy=privacy)
