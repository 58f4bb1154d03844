"""Tulap noise, null pmfs, and the Laplace sampler used by the baseline.

The Tulap distribution ``Tulap(m, b, q)`` is the law of ``G1 - G2 + U + m``
with ``G1, G2`` iid geometric on ``{0, 1, 2, ...}`` (success probability
``1 - b``) and ``U ~ Uniform(-1/2, 1/2)``, symmetrically truncated to its
central ``1 - q`` mass. Releasing ``X + Tulap(0, b, q)`` for a
sensitivity-one integer statistic ``X`` is ``(epsilon, delta)``-DP when
``b = exp(-epsilon)`` and ``q = 2 delta b / (1 - b + 2 delta b)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlog1py, xlogy

from ._roots import bisect_increasing
from .errors import DomainError

__all__ = [
    "PrivacyParams",
    "TulapParams",
    "PmfVector",
    "privacy_to_tulap",
    "tulap_cdf",
    "tulap_quantile",
    "tulap_sample",
    "binom_pmf",
    "binom_pmf_vector",
    "hypergeom_pmf_vector",
    "laplace_sample",
    "as_generator",
]

MIN_EPSILON = 1e-10
MAX_B = 1.0 - 1e-12


@dataclass(frozen=True)
class PrivacyParams:
    """An ``(epsilon, delta)`` budget and the Tulap shape it induces."""

    epsilon: float
    delta: float = 0.0

    def __post_init__(self):
        eps, delta = self.epsilon, self.delta
        if not (isinstance(eps, (int, float)) and math.isfinite(eps)):
            raise DomainError(f"epsilon must be a finite real, got {eps!r}")
        if not (isinstance(delta, (int, float)) and math.isfinite(delta)):
            raise DomainError(f"delta must be a finite real, got {delta!r}")
        if eps < MIN_EPSILON:
            raise DomainError(f"epsilon must be >= {MIN_EPSILON}, got {eps}")
        if not 0.0 <= delta < 1.0:
            raise DomainError(f"delta must lie in [0, 1), got {delta}")
        object.__setattr__(self, "epsilon", float(eps))
        object.__setattr__(self, "delta", float(delta))

    @property
    def b(self) -> float:
        return min(math.exp(-self.epsilon), MAX_B)

    @property
    def q(self) -> float:
        b, d = self.b, self.delta
        return 2.0 * d * b / (1.0 - b + 2.0 * d * b)

    def tulap(self, m: float = 0.0) -> "TulapParams":
        return TulapParams(m=m, b=self.b, q=self.q)


@dataclass(frozen=True)
class TulapParams:
    """Location ``m``, geometric base ``b`` and truncation mass ``q``.

    ``b = 0`` is allowed and gives ``Uniform(m - 1/2, m + 1/2)``, the
    ``epsilon -> infinity`` limit.
    """

    m: float = 0.0
    b: float = 0.5
    q: float = 0.0

    def __post_init__(self):
        if not math.isfinite(self.m):
            raise DomainError(f"location must be finite, got {self.m}")
        if not 0.0 <= self.b < 1.0:
            raise DomainError(f"b must lie in [0, 1), got {self.b}")
        if not 0.0 <= self.q < 1.0:
            raise DomainError(f"q must lie in [0, 1), got {self.q}")


@dataclass(frozen=True, eq=False)
class PmfVector:
    """Probabilities of ``0, 1, ..., n`` under a null distribution."""

    n: int
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.shape[0] != self.n + 1:
            raise DomainError(f"expected {self.n + 1} weights, got shape {w.shape}")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise DomainError("pmf weights must be finite and nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise DomainError(f"pmf weights sum to {w.sum()!r}, not 1")
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.n + 1


def privacy_to_tulap(epsilon: float, delta: float = 0.0) -> PrivacyParams:
    """Validate ``(epsilon, delta)`` and derive ``b = e^-epsilon`` and ``q``."""
    return PrivacyParams(epsilon, delta)


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, a seed, or a SeedSequence."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


# ---------------------------------------------------------------------------
# cdf


def _cdf0(t, b: float) -> np.ndarray:
    """cdf of ``Tulap(0, b, 0)`` at offsets ``t`` (finite array)."""
    t = np.asarray(t, dtype=float)
    if b == 0.0:
        return np.clip(t + 0.5, 0.0, 1.0)
    k = np.rint(t)  # ties to even
    scale = np.power(b, np.abs(k)) / (1.0 + b)
    lower = scale * (b + (t - k + 0.5) * (1.0 - b))
    upper = 1.0 - scale * (b + (k - t + 0.5) * (1.0 - b))
    return np.where(t <= 0.0, lower, upper)


def _truncate(f0: np.ndarray, q: float) -> np.ndarray:
    if q == 0.0:
        return f0
    return np.clip((f0 - 0.5 * q) / (1.0 - q), 0.0, 1.0)


def cdf_offset(t, b: float, q: float) -> np.ndarray:
    """cdf of ``Tulap(0, b, q)``; handles infinite offsets."""
    t = np.asarray(t, dtype=float)
    if np.any(np.isnan(t)):
        raise DomainError("cdf argument is NaN")
    finite = np.isfinite(t)
    if finite.all():
        return _truncate(_cdf0(t, b), q)
    out = np.where(t > 0, 1.0, 0.0)
    safe = np.where(finite, t, 0.0)
    return np.where(finite, _truncate(_cdf0(safe, b), q), out)


def tulap_cdf(x, params: TulapParams):
    """Evaluate ``P(N <= x)`` for ``N ~ Tulap(m, b, q)``.

    Vectorized over ``x``; returns a float for scalar input.
    """
    out = cdf_offset(np.asarray(x, dtype=float) - params.m, params.b, params.q)
    return float(out) if out.ndim == 0 else out


def tulap_quantile(p, params: TulapParams):
    """Inverse cdf by bisection, accurate to about ``1e-12`` in ``x``."""
    p_arr = np.asarray(p, dtype=float)
    if np.any(~((p_arr > 0.0) & (p_arr < 1.0))):
        raise DomainError("quantile level must lie strictly inside (0, 1)")
    b, q = params.b, params.q
    level = 0.5 * q + p_arr * (1.0 - q)
    tail = np.minimum(level, 1.0 - level)
    if b == 0.0:
        half = np.ones_like(tail)
    else:
        half = np.log(tail * (1.0 + b)) / math.log(b) + 2.0
    half = np.maximum(half, 1.0)
    t = bisect_increasing(
        lambda s: _truncate(_cdf0(s, b), q), -half, half, target=p_arr, tol=1e-13
    )
    out = t + params.m
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# sampling


def _draw_untruncated(b: float, size, rng: np.random.Generator) -> np.ndarray:
    u = rng.uniform(-0.5, 0.5, size)
    if b == 0.0:
        return u
    # numpy's geometric counts trials (support 1, 2, ...); shift to failures.
    g1 = rng.geometric(1.0 - b, size) - 1
    g2 = rng.geometric(1.0 - b, size) - 1
    return (g1 - g2) + u


def tulap_sample(params: TulapParams, rng, size=None):
    """Draw from ``Tulap(m, b, q)`` by geometric differences plus uniform noise.

    When ``q > 0`` draws outside the central ``1 - q`` mass of the
    untruncated law are rejected and redrawn.
    """
    rng = as_generator(rng)
    b, q = params.b, params.q
    shape = () if size is None else size
    draws = np.asarray(_draw_untruncated(b, shape, rng), dtype=float)
    if q > 0.0:
        lo, hi = 0.5 * q, 1.0 - 0.5 * q
        flat = draws.reshape(-1)
        bad = np.flatnonzero(~_accept(flat, b, lo, hi))
        while bad.size:
            fresh = _draw_untruncated(b, bad.size, rng)
            flat[bad] = fresh
            bad = bad[~_accept(fresh, b, lo, hi)]
        draws = flat.reshape(shape)
    draws = draws + params.m
    return float(draws) if size is None else draws


def _accept(t: np.ndarray, b: float, lo: float, hi: float) -> np.ndarray:
    f0 = _cdf0(t, b)
    return (f0 >= lo) & (f0 <= hi)


def laplace_sample(scale: float, rng, size=None):
    """Centered Laplace draws with the given scale."""
    if not (math.isfinite(scale) and scale > 0):
        raise DomainError(f"Laplace scale must be positive, got {scale}")
    out = as_generator(rng).laplace(0.0, scale, size)
    return float(out) if size is None else out


# ---------------------------------------------------------------------------
# null pmfs


def _log_choose(n: int) -> np.ndarray:
    x = np.arange(n + 1, dtype=float)
    return gammaln(n + 1.0) - gammaln(x + 1.0) - gammaln(n - x + 1.0)


def binom_pmf(n: int, theta) -> np.ndarray:
    """Binomial pmf rows for each ``theta``; shape ``theta.shape + (n + 1,)``.

    Computed in log space and renormalized so rows sum to one; point masses
    at ``theta`` in ``{0, 1}`` are exact.
    """
    if n < 0 or int(n) != n:
        raise DomainError(f"n must be a nonnegative integer, got {n}")
    n = int(n)
    theta = np.asarray(theta, dtype=float)
    if np.any(~((theta >= 0.0) & (theta <= 1.0))):
        raise DomainError("theta must lie in [0, 1]")
    x = np.arange(n + 1, dtype=float)
    th = theta[..., None]
    logp = _log_choose(n) + xlogy(x, th) + xlog1py(n - x, -th)
    w = np.exp(logp - logp.max(axis=-1, keepdims=True))
    return w / w.sum(axis=-1, keepdims=True)


def binom_pmf_vector(n: int, theta: float) -> PmfVector:
    """``C(n, x) theta^x (1 - theta)^(n - x)`` for ``x = 0..n``."""
    return PmfVector(int(n), binom_pmf(n, float(theta)))


def hypergeom_pmf_vector(n: int) -> PmfVector:
    """Null law of the median-test count: ``C(n, t) C(n, n - t) / C(2n, n)``."""
    if n < 1 or int(n) != n:
        raise DomainError(f"n must be a positive integer, got {n}")
    logc = _log_choose(int(n))
    logp = 2.0 * logc
    w = np.exp(logp - logp.max())
    w /= w.sum()
    # enforce exact symmetry lost to rounding
    w = 0.5 * (w + w[::-1])
    return PmfVector(int(n), w)
