"""One-sided DP-UMP tests and p-values for a binomial count.

Everything here is a function of the private summary ``Z = X + N`` with
``N ~ Tulap(0, b, q)``. The UMP test for ``H0: theta <= theta0`` rejects
with probability ``phi(x) = F_N(x - m)``, which is exactly
``P(X + N >= m | X = x)``, so thresholding ``Z`` at ``m`` and drawing
``Bernoulli(phi(x))`` are the same procedure.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from ._roots import expand_bracket
from .distributions import (
    PmfVector,
    PrivacyParams,
    as_generator,
    binom_pmf,
    cdf_offset,
    tulap_sample,
)
from .errors import ConvergenceError, DomainError

__all__ = [
    "Side",
    "TestVector",
    "PrivateSummary",
    "Decision",
    "DPReport",
    "privatize",
    "calibrate_m",
    "test_vector_one_sided",
    "ump_pvalue",
    "decide",
    "verify_dp",
]


class Side(str, enum.Enum):
    GREATER = "greater"
    LESS = "less"


def _side(side) -> Side:
    try:
        return Side(side.lower() if isinstance(side, str) else side)
    except ValueError:
        raise DomainError(f"side must be 'greater' or 'less', got {side!r}") from None


@dataclass(frozen=True, eq=False)
class TestVector:
    """A randomized test on ``{0..n}``: ``phi[x]`` is the rejection probability.

    ``info`` holds construction details such as the calibrated offset ``m``
    or the UMPU center ``k``.
    """

    __test__ = False  # not a pytest class

    n: int
    phi: np.ndarray
    theta0: float
    alpha: float
    privacy: PrivacyParams | None
    kind: str
    info: dict = field(default_factory=dict)

    def size(self, null_pmf: PmfVector | None = None) -> float:
        w = binom_pmf(self.n, self.theta0) if null_pmf is None else null_pmf.weights
        return float(self.phi @ w)


@dataclass(frozen=True)
class PrivateSummary:
    """The single DP release ``z = x + Tulap(0, b, q)`` and its provenance."""

    z: float
    n: int
    privacy: PrivacyParams
    null_pmf_kind: str = "binomial"

    def to_dict(self) -> dict:
        return {
            "z": self.z,
            "n": self.n,
            "epsilon": self.privacy.epsilon,
            "delta": self.privacy.delta,
            "null_pmf_kind": self.null_pmf_kind,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PrivateSummary":
        return cls(
            z=float(d["z"]),
            n=int(d["n"]),
            privacy=PrivacyParams(float(d["epsilon"]), float(d.get("delta", 0.0))),
            null_pmf_kind=d.get("null_pmf_kind", "binomial"),
        )


@dataclass(frozen=True)
class Decision:
    reject: bool
    rejection_probability: float


@dataclass(frozen=True)
class DPReport:
    """Worst slack of the four families of adjacent-count DP inequalities."""

    max_violation: float
    worst: dict
    passed: bool


# ---------------------------------------------------------------------------


def _check_count(n) -> int:
    if int(n) != n or n < 0:
        raise DomainError(f"n must be a nonnegative integer, got {n}")
    return int(n)


def _check_open_unit(name: str, v: float) -> float:
    if not 0.0 < v < 1.0:
        raise DomainError(f"{name} must lie strictly inside (0, 1), got {v}")
    return float(v)


def _null_weights(n: int, theta0, null_pmf: PmfVector | None) -> np.ndarray:
    if null_pmf is None:
        return binom_pmf(n, theta0)
    if not isinstance(null_pmf, PmfVector):
        null_pmf = PmfVector(n, np.asarray(null_pmf, dtype=float))
    if null_pmf.n != n:
        raise DomainError(f"null pmf has n={null_pmf.n}, expected {n}")
    return null_pmf.weights


def greater_pvalue(z, weights: np.ndarray, b: float, q: float) -> np.ndarray:
    """``sum_x F_N(x - z) w[x]`` broadcast over leading axes of ``z``/``weights``."""
    z = np.asarray(z, dtype=float)
    x = np.arange(weights.shape[-1], dtype=float)
    return np.sum(cdf_offset(x - z[..., None], b, q) * weights, axis=-1)


def less_pvalue(z, weights: np.ndarray, b: float, q: float) -> np.ndarray:
    """``1 - greater_pvalue``, evaluated through the symmetric tail."""
    z = np.asarray(z, dtype=float)
    x = np.arange(weights.shape[-1], dtype=float)
    return np.sum(cdf_offset(z[..., None] - x, b, q) * weights, axis=-1)


def privatize(x: int, n: int, privacy: PrivacyParams, rng) -> PrivateSummary:
    """Release ``z = x + Tulap(0, b, q)``; the only step that touches data."""
    n = _check_count(n)
    if int(x) != x or not 0 <= x <= n:
        raise DomainError(f"count x must be an integer in [0, {n}], got {x}")
    noise = tulap_sample(privacy.tulap(0.0), as_generator(rng))
    return PrivateSummary(z=float(x) + noise, n=n, privacy=privacy)


def calibrate_m(
    n: int,
    theta0: float,
    alpha: float,
    privacy: PrivacyParams,
    side="greater",
    null_pmf: PmfVector | None = None,
) -> float:
    """Offset ``m`` giving the one-sided test exact size ``alpha``.

    ``greater``: ``sum F_N(x - m) pmf[x] = alpha``.
    ``less``: ``sum (1 - F_N(x - m)) pmf[x] = alpha``.
    """
    n = _check_count(n)
    side = _side(side)
    if null_pmf is None:
        _check_open_unit("theta0", theta0)
    _check_open_unit("alpha", alpha)
    w = _null_weights(n, theta0, null_pmf)
    return _calibrate(w, alpha, privacy.b, privacy.q, side)


def _calibrate(w: np.ndarray, alpha: float, b: float, q: float, side: Side) -> float:
    n = w.shape[0] - 1
    x = np.arange(n + 1, dtype=float)
    if side is Side.GREATER:
        def g(m):
            return float(cdf_offset(x - m, b, q) @ w) - alpha
    else:
        # 1 - F(x - m) = F(m - x); size increases with m, so flip the sign
        def g(m):
            return alpha - float(cdf_offset(m - x, b, q) @ w)

    lo, hi = expand_bracket(g, -1.0, n + 1.0)
    m = brentq(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    if abs(g(m)) > 1e-10:
        raise ConvergenceError(f"size calibration stalled: residual {g(m):.3e} at m={m}")
    return float(m)


def test_vector_one_sided(
    n: int,
    theta0: float,
    alpha: float,
    privacy: PrivacyParams,
    side="greater",
    null_pmf: PmfVector | None = None,
) -> TestVector:
    """The DP-UMP one-sided test as a rejection-probability vector."""
    side = _side(side)
    m = calibrate_m(n, theta0, alpha, privacy, side, null_pmf)
    x = np.arange(n + 1, dtype=float)
    if side is Side.GREATER:
        phi = cdf_offset(x - m, privacy.b, privacy.q)
    else:
        phi = cdf_offset(m - x, privacy.b, privacy.q)
    return TestVector(
        n=int(n),
        phi=phi,
        theta0=float(theta0),
        alpha=float(alpha),
        privacy=privacy,
        kind=f"ump-{side.value}",
        info={"m": m},
    )


test_vector_one_sided.__test__ = False  # not a pytest test


def ump_pvalue(
    z,
    n: int,
    theta0,
    privacy: PrivacyParams,
    side="greater",
    null_pmf: PmfVector | None = None,
):
    """Exact one-sided p-value ``P(X + N >= z)`` under the null.

    For ``side='less'`` this is ``P(X + N <= z) = 1 - P(X + N >= z)``.
    ``z`` and ``theta0`` broadcast against each other; ``theta0`` may sit on
    the boundary ``{0, 1}``, where the null collapses to a point mass.
    """
    n = _check_count(n)
    side = _side(side)
    w = _null_weights(n, theta0, null_pmf)
    fn = greater_pvalue if side is Side.GREATER else less_pvalue
    p = np.clip(fn(z, w, privacy.b, privacy.q), 0.0, 1.0)
    return float(p) if p.ndim == 0 else p


def decide(tv: TestVector, x: int, rng) -> Decision:
    """Draw the randomized decision ``Bernoulli(phi[x])``."""
    if int(x) != x or not 0 <= x <= tv.n:
        raise IndexError(f"count {x} outside 0..{tv.n}")
    p = float(tv.phi[int(x)])
    return Decision(reject=bool(as_generator(rng).random() < p), rejection_probability=p)


def verify_dp(tv, privacy: PrivacyParams, slack: float = 1e-12) -> DPReport:
    """Check the ``4n`` adjacent-count inequalities for a test vector.

    A test is ``(epsilon, delta)``-DP iff for every ``x`` in ``1..n``::

        phi(x)       <= e^eps phi(x-1)       + delta
        phi(x-1)     <= e^eps phi(x)         + delta
        1 - phi(x)   <= e^eps (1 - phi(x-1)) + delta
        1 - phi(x-1) <= e^eps (1 - phi(x))   + delta
    """
    phi = np.asarray(tv.phi if isinstance(tv, TestVector) else tv, dtype=float)
    e = np.inf if privacy.epsilon > 700 else np.exp(privacy.epsilon)
    d = privacy.delta
    cur, prev = phi[1:], phi[:-1]
    with np.errstate(over="ignore", invalid="ignore"):
        gaps = {
            "up": cur - (e * prev + d),
            "down": prev - (e * cur + d),
            "up_complement": (1 - cur) - (e * (1 - prev) + d),
            "down_complement": (1 - prev) - (e * (1 - cur) + d),
        }
    # inf * 0 from a huge epsilon means the constraint cannot bind
    gaps = {k: np.where(np.isnan(v), -np.inf, v) for k, v in gaps.items()}
    worst = {k: float(v.max()) if v.size else -np.inf for k, v in gaps.items()}
    max_violation = max(worst.values()) if phi.size > 1 else -np.inf
    return DPReport(max_violation=max_violation, worst=worst, passed=max_violation <= slack)
