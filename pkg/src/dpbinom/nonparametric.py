"""Private sign and median tests via sensitivity-one counting statistics."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .distributions import PrivacyParams, hypergeom_pmf_vector
from .errors import DomainError
from .one_sided import PrivateSummary, privatize, ump_pvalue
from .two_sided import approx_pvalue

__all__ = [
    "Alternative",
    "PairedSample",
    "TwoSample",
    "NonparametricResult",
    "sign_statistic",
    "sign_test",
    "median_statistic",
    "median_test",
]


class Alternative(str, enum.Enum):
    GREATER = "greater"
    LESS = "less"
    TWO_SIDED = "two-sided"


def _alternative(alt) -> Alternative:
    if isinstance(alt, str):
        alt = alt.lower().replace("_", "-")
        if alt == "twosided":
            alt = "two-sided"
    try:
        return Alternative(alt)
    except ValueError:
        raise DomainError(f"unknown alternative {alt!r}") from None


@dataclass(frozen=True, eq=False)
class PairedSample:
    """Pairs ``(x_i, y_i)``; tied pairs are dropped by the sign test."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise DomainError("paired sample needs two 1-D arrays of equal length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_pairs(cls, pairs) -> "PairedSample":
        arr = np.asarray(pairs, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])

    @property
    def ties(self) -> np.ndarray:
        return self.x == self.y

    @property
    def n_effective(self) -> int:
        return int(np.count_nonzero(~self.ties))


@dataclass(frozen=True, eq=False)
class TwoSample:
    """Two independent samples of equal size with no shared values."""

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float).ravel()
        ys = np.asarray(self.ys, dtype=float).ravel()
        if xs.size != ys.size:
            raise DomainError(f"median test needs equal sample sizes, got {xs.size} and {ys.size}")
        if xs.size == 0:
            raise DomainError("median test needs non-empty samples")
        if np.unique(np.concatenate([xs, ys])).size != 2 * xs.size:
            raise DomainError("median test requires all 2n values to be distinct")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def n(self) -> int:
        return int(self.xs.size)


@dataclass(frozen=True)
class NonparametricResult:
    summary: PrivateSummary
    p_value: float
    alternative: Alternative
    theta0: float
    ties_dropped: int = 0

    @property
    def z(self) -> float:
        return self.summary.z

    def to_dict(self) -> dict:
        d = self.summary.to_dict()
        d.update(
            p_value=self.p_value,
            alternative=self.alternative.value,
            theta0=self.theta0,
            ties_dropped=self.ties_dropped,
        )
        return d


def sign_statistic(sample: PairedSample) -> tuple[int, int]:
    """``(#{x_i > y_i}, n_effective)`` after dropping tied pairs."""
    keep = ~sample.ties
    n_eff = int(np.count_nonzero(keep))
    if n_eff == 0:
        raise DomainError("every pair is tied; the sign test is undefined")
    return int(np.count_nonzero(sample.x[keep] > sample.y[keep])), n_eff


def sign_test(
    sample: PairedSample,
    theta0: float,
    privacy: PrivacyParams,
    rng,
    alternative="greater",
) -> NonparametricResult:
    """Privatize the sign count and post-process it into a p-value.

    ``theta0`` is the null value of ``P(X > Y)``; ``0.5`` tests equal medians.
    """
    alt = _alternative(alternative)
    t, n_eff = sign_statistic(sample)
    summary = privatize(t, n_eff, privacy, rng)
    if alt is Alternative.TWO_SIDED:
        p = approx_pvalue(summary.z, n_eff, theta0, privacy)
    else:
        p = ump_pvalue(summary.z, n_eff, theta0, privacy, alt.value)
    return NonparametricResult(
        summary=summary,
        p_value=float(p),
        alternative=alt,
        theta0=float(theta0),
        ties_dropped=len(sample.x) - n_eff,
    )


def median_statistic(ts: TwoSample) -> int:
    """Number of ``x`` values ranking above ``n`` in the pooled sample."""
    pooled = np.concatenate([ts.xs, ts.ys])
    ranks = np.searchsorted(np.sort(pooled), ts.xs, side="right")  # 1-based ranks
    return int(np.count_nonzero(ranks > ts.n))


def median_test(ts: TwoSample, privacy: PrivacyParams, rng, alternative="greater") -> NonparametricResult:
    """Private median test with the ``HyperGeom(n, n, n)`` null."""
    alt = _alternative(alternative)
    t = median_statistic(ts)
    n = ts.n
    raw = privatize(t, n, privacy, rng)
    summary = PrivateSummary(z=raw.z, n=n, privacy=privacy, null_pmf_kind="hypergeometric")
    null = hypergeom_pmf_vector(n)
    if alt is Alternative.TWO_SIDED:
        p = approx_pvalue(summary.z, n, 0.5, privacy, null_pmf=null)
    else:
        p = ump_pvalue(summary.z, n, 0.5, privacy, alt.value, null_pmf=null)
    return NonparametricResult(summary=summary, p_value=float(p), alternative=alt, theta0=0.5)
