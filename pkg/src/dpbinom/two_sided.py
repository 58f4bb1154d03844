"""Two-sided DP tests of ``H0: theta = theta0``.

Three constructions are provided:

* Bonferroni: the sum of the two one-sided UMP tests at level ``alpha / 2``.
* UMPU: ``phi(x) = F_N(|x - k| - m)`` with ``(k, m)`` solving the size and
  unbiasedness equations; no closed form for ``k`` exists, so it is solved
  numerically.
* Approximately unbiased: the p-value ``P(|X + N - n theta0| >= |z - n theta0|)``
  and the UMPU-shaped test centered at ``k = n theta0``.
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from ._roots import expand_bracket
from .distributions import PmfVector, PrivacyParams, binom_pmf, cdf_offset
from .errors import ConvergenceError, DomainError
from .one_sided import (
    TestVector,
    _check_count,
    _check_open_unit,
    _null_weights,
    greater_pvalue,
    less_pvalue,
    test_vector_one_sided,
    ump_pvalue,
)

__all__ = [
    "UmpuSolution",
    "MonotonicityWarning",
    "bonferroni_pvalue",
    "bonferroni_test_vector",
    "umpu_solve",
    "umpu_test_vector",
    "approx_pvalue",
    "approx_test_vector",
    "approx_induced_test_vector",
    "umau_threshold",
    "umau_pvalue",
]

_RTOL = 4 * np.finfo(float).eps


class MonotonicityWarning(RuntimeWarning):
    """A search assumed a monotone predicate and found it was not."""


@dataclass(frozen=True)
class UmpuSolution:
    """Center ``k`` and offset ``m`` of the DP-UMPU test plus residuals."""

    k: float
    m: float
    n: int
    theta0: float
    alpha: float
    privacy: PrivacyParams
    size_residual: float
    unbiased_residual: float


def _umpu_phi(x: np.ndarray, k: float, m: float, b: float, q: float) -> np.ndarray:
    # x == k falls in the x >= k branch; both branches agree there
    return cdf_offset(np.abs(x - k) - m, b, q)


def _two_tail_phi(x: np.ndarray, k: float, t: float, b: float, q: float) -> np.ndarray:
    """``P(|x + N - k| >= t)`` for ``t >= 0``."""
    return cdf_offset(x - k - t, b, q) + cdf_offset(k - x - t, b, q)


# ---------------------------------------------------------------------------
# Bonferroni


def bonferroni_pvalue(z, n: int, theta0, privacy: PrivacyParams, null_pmf=None):
    """``min(1, 2 min(p, 1 - p))`` with ``p`` the one-sided ``greater`` p-value."""
    n = _check_count(n)
    w = _null_weights(n, theta0, null_pmf)
    p_hi = greater_pvalue(z, w, privacy.b, privacy.q)
    p_lo = less_pvalue(z, w, privacy.b, privacy.q)
    out = np.clip(2.0 * np.minimum(p_hi, p_lo), 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def bonferroni_test_vector(
    n: int, theta0: float, alpha: float, privacy: PrivacyParams, null_pmf=None
) -> TestVector:
    """Rejection probabilities of ``bonferroni_pvalue <= alpha``."""
    _check_open_unit("alpha", alpha)
    hi = test_vector_one_sided(n, theta0, alpha / 2, privacy, "greater", null_pmf)
    lo = test_vector_one_sided(n, theta0, alpha / 2, privacy, "less", null_pmf)
    return TestVector(
        n=int(n),
        phi=hi.phi + lo.phi,
        theta0=float(theta0),
        alpha=float(alpha),
        privacy=privacy,
        kind="bonferroni",
        info={"m_greater": hi.info["m"], "m_less": lo.info["m"]},
    )


# ---------------------------------------------------------------------------
# UMPU


def _solve_offset(phi_of_m, w: np.ndarray, alpha: float, lo: float, hi: float) -> float:
    """Offset where the size ``phi_of_m(m) @ w`` (decreasing in m) hits alpha."""

    def g(m):
        return float(phi_of_m(m) @ w) - alpha

    lo, hi = expand_bracket(g, lo, hi)
    return brentq(g, lo, hi, xtol=1e-14, rtol=_RTOL, maxiter=500)


@functools.lru_cache(maxsize=4096)
def _umpu_cached(n: int, theta0: float, alpha: float, b: float, q: float):
    x = np.arange(n + 1, dtype=float)
    w = binom_pmf(n, theta0)
    centered = x - n * theta0

    def offset(k):
        return _solve_offset(lambda m: _umpu_phi(x, k, m, b, q), w, alpha, -1.0, n + 1.0)

    def h(k):
        m = offset(k)
        return float(centered @ (_umpu_phi(x, k, m, b, q) * w))

    lo, hi = -1.0, n + 1.0
    h_lo, h_hi = h(lo), h(hi)
    if h_lo == 0.0:
        k = lo
    elif h_hi == 0.0:
        k = hi
    elif h_lo * h_hi > 0:
        raise ConvergenceError(
            f"unbiasedness residual does not change sign on [-1, n+1]: {h_lo:.3e}, {h_hi:.3e}"
        )
    else:
        k = brentq(h, lo, hi, xtol=1e-13, rtol=_RTOL, maxiter=500)
    m = offset(k)
    phi = _umpu_phi(x, k, m, b, q)
    return k, m, float(phi @ w) - alpha, float(centered @ (phi * w))


def umpu_solve(n: int, theta0: float, alpha: float, privacy: PrivacyParams) -> UmpuSolution:
    """Solve for the DP-UMPU center ``k`` and offset ``m``.

    The unbiasedness residual ``h(k) = E[(X - n theta0) phi_k(X)]`` with ``m``
    re-calibrated to size ``alpha`` at each ``k`` is positive at ``k = -1``
    and negative at ``k = n + 1``; Brent's method on ``h`` finds a crossing.
    Results are memoized.
    """
    n = _check_count(n)
    if n < 1:
        raise DomainError("two-sided tests need n >= 1")
    _check_open_unit("theta0", theta0)
    _check_open_unit("alpha", alpha)
    k, m, r_size, r_unb = _umpu_cached(n, float(theta0), float(alpha), privacy.b, privacy.q)
    if abs(r_size) > 1e-8 or abs(r_unb) > 1e-6:
        raise ConvergenceError(
            f"UMPU solve left residuals size={r_size:.3e}, unbiasedness={r_unb:.3e}"
        )
    return UmpuSolution(k, m, n, float(theta0), float(alpha), privacy, r_size, r_unb)


def umpu_test_vector(n: int, theta0: float, alpha: float, privacy: PrivacyParams) -> TestVector:
    sol = umpu_solve(n, theta0, alpha, privacy)
    x = np.arange(n + 1, dtype=float)
    return TestVector(
        n=int(n),
        phi=_umpu_phi(x, sol.k, sol.m, privacy.b, privacy.q),
        theta0=float(theta0),
        alpha=float(alpha),
        privacy=privacy,
        kind="umpu",
        info={"k": sol.k, "m": sol.m, "unbiased_residual": sol.unbiased_residual},
    )


# ---------------------------------------------------------------------------
# asymptotically unbiased


def approx_pvalue(z, n: int, theta0, privacy: PrivacyParams, null_pmf=None):
    """``P(|X + N - n theta0| >= |z - n theta0|)`` via two one-sided p-values.

    With ``T = |z - n theta0|`` this is
    ``p(theta0, n theta0 + T) + 1 - p(theta0, n theta0 - T)``.
    """
    n = _check_count(n)
    w = _null_weights(n, theta0, null_pmf)
    center = n * np.asarray(theta0, dtype=float)
    t = np.abs(np.asarray(z, dtype=float) - center)
    b, q = privacy.b, privacy.q
    p = greater_pvalue(center + t, w, b, q) + less_pvalue(center - t, w, b, q)
    p = np.clip(p, 0.0, 1.0)
    return float(p) if p.ndim == 0 else p


def approx_test_vector(
    n: int, theta0: float, alpha: float, privacy: PrivacyParams, null_pmf=None
) -> TestVector:
    """UMPU-shaped test ``F_N(|x - n theta0| - m)`` with the center fixed.

    Only the offset is calibrated, so the size is exact but unbiasedness
    holds only asymptotically. At ``theta0 = 1/2`` it coincides with
    ``umpu_test_vector``.
    """
    n = _check_count(n)
    _check_open_unit("alpha", alpha)
    _check_open_unit("theta0", theta0)
    w = _null_weights(n, theta0, null_pmf)
    x = np.arange(n + 1, dtype=float)
    b, q = privacy.b, privacy.q
    k = n * theta0
    m = _solve_offset(lambda m: _umpu_phi(x, k, m, b, q), w, alpha, -1.0, n + 1.0)
    phi = _umpu_phi(x, k, m, b, q)
    return TestVector(
        n=n,
        phi=phi,
        theta0=float(theta0),
        alpha=float(alpha),
        privacy=privacy,
        kind="approx-umpu",
        info={"k": k, "m": m, "unbiased_residual": float((x - k) @ (phi * w))},
    )


def approx_induced_test_vector(
    n: int, theta0: float, alpha: float, privacy: PrivacyParams, null_pmf=None
) -> TestVector:
    """Exact rejection probabilities of ``approx_pvalue(x + N) <= alpha``.

    This thresholds ``|Z - n theta0|`` at ``t``, giving
    ``phi(x) = F_N(x - k - t) + F_N(k - x - t)``. It keeps both noise tails
    and so is not identical to ``approx_test_vector``.
    """
    n = _check_count(n)
    _check_open_unit("alpha", alpha)
    _check_open_unit("theta0", theta0)
    w = _null_weights(n, theta0, null_pmf)
    k = n * theta0
    t = _two_tail_threshold(n, k, w, alpha, privacy.b, privacy.q)
    x = np.arange(n + 1, dtype=float)
    return TestVector(
        n=n,
        phi=_two_tail_phi(x, k, t, privacy.b, privacy.q),
        theta0=float(theta0),
        alpha=float(alpha),
        privacy=privacy,
        kind="approx-umpu-induced",
        info={"k": k, "t": t},
    )


def _two_tail_threshold(n, k, w, alpha, b, q) -> float:
    x = np.arange(n + 1, dtype=float)
    return _solve_offset(lambda t: _two_tail_phi(x, k, t, b, q), w, alpha, 0.0, n + 1.0)


# ---------------------------------------------------------------------------
# UMAU p-value


@functools.lru_cache(maxsize=65536)
def _umau_cached(n: int, theta0: float, alpha: float, b: float, q: float):
    k = _umpu_cached(n, theta0, alpha, b, q)[0]
    w = binom_pmf(n, theta0)
    return k, _two_tail_threshold(n, k, w, alpha, b, q)


def umau_threshold(n: int, theta0: float, alpha: float, privacy: PrivacyParams):
    """Center ``k(alpha)`` of the UMPU test and the cut ``t(alpha)`` on ``|Z - k|``.

    ``t`` is set so that rejecting when ``|Z - k| >= t`` has size exactly
    ``alpha``.
    """
    umpu_solve(n, theta0, alpha, privacy)  # validates and raises on bad residuals
    return _umau_cached(int(n), float(theta0), float(alpha), privacy.b, privacy.q)


def _umau_probe_grid(size: int) -> np.ndarray:
    small = np.geomspace(1e-6, 0.02, max(size // 5, 2), endpoint=False)
    rest = np.linspace(0.02, 1 - 1e-6, size - small.size)
    return np.concatenate([small, rest])


def umau_pvalue(
    z: float,
    n: int,
    theta0: float,
    privacy: PrivacyParams,
    tol: float = 1e-4,
    probe: int = 50,
) -> float:
    """Smallest ``alpha`` whose UMPU-centered cut rejects ``z``.

    The rejection predicate ``|z - k(alpha)| >= t(alpha)`` is assumed
    monotone in ``alpha``. It is evaluated on a ``probe``-point grid; a
    ``MonotonicityWarning`` is issued if it flips more than once, and the
    first crossing is refined by bisection to ``tol``.
    """
    z = float(z)

    def rejects(a):
        k, t = umau_threshold(n, theta0, float(a), privacy)
        return abs(z - k) >= t

    grid = _umau_probe_grid(probe)
    flags = np.array([rejects(a) for a in grid])
    if np.count_nonzero(np.diff(flags.astype(int))) > 1 or (flags.any() and not flags[-1]):
        warnings.warn(
            f"UMAU rejection predicate is not monotone in alpha at z={z}",
            MonotonicityWarning,
            stacklevel=2,
        )
    if not flags.any():
        return 1.0
    first = int(np.argmax(flags))
    if first == 0:
        return float(grid[0])
    lo, hi = float(grid[first - 1]), float(grid[first])
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if rejects(mid):
            hi = mid
        else:
            lo = mid
    return hi
