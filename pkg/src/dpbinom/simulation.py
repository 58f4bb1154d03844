"""Exact power and Monte Carlo experiments for the private binomial tests.

Each experiment returns a :class:`SimResult` whose rows carry an estimate and
its Monte Carlo standard error (zero for exact computations). Randomness is
seeded per grid point from ``SeedSequence(seed, spawn_key=(point,))`` so a
point's numbers do not depend on which other points run or in what order.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .distributions import PrivacyParams, binom_pmf, tulap_sample
from .errors import DomainError
from .intervals import approx_bounds, bonferroni_bounds
from .one_sided import TestVector, greater_pvalue, test_vector_one_sided, ump_pvalue
from .two_sided import approx_test_vector, bonferroni_test_vector, umpu_test_vector

__all__ = [
    "METHODS",
    "SimConfig",
    "SimResult",
    "exact_power",
    "baseline_normal_pvalue",
    "nonprivate_pvalue",
    "power_vs_n",
    "type1_sweep",
    "two_sided_power_sweep",
    "ci_width_sweep",
    "run_figure",
]

METHODS = ("UmpLeft", "UmpRight", "Umpu", "ApproxUmpu", "Bonferroni", "BaselineNormal", "NonPrivate")
COLUMNS = (
    "figure", "metric", "n", "theta0", "theta", "epsilon", "delta", "alpha",
    "replicates", "method", "estimate", "mc_se",
)


@dataclass
class SimConfig:
    """One experiment. ``n_grid`` and ``theta_grid`` may be length one."""

    figure: str
    n_grid: tuple = (30,)
    theta0: float = 0.9
    theta_grid: tuple = (0.95,)
    epsilon: float = 1.0
    delta: float = 0.0
    alpha: float = 0.05
    replicates: int = 10_000
    seed: int = 0
    methods: tuple = ()
    workers: int = 1

    def __post_init__(self):
        self.n_grid = tuple(int(v) for v in np.atleast_1d(self.n_grid))
        self.theta_grid = tuple(float(v) for v in np.atleast_1d(self.theta_grid))
        if self.replicates < 1:
            raise DomainError("replicates must be >= 1")
        if any(not 0.0 <= t <= 1.0 for t in self.theta_grid):
            raise DomainError("theta grid must lie within [0, 1]")
        if any(n < 1 for n in self.n_grid):
            raise DomainError("sample sizes must be >= 1")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise DomainError(f"unknown methods {sorted(unknown)}")

    @property
    def privacy(self) -> PrivacyParams:
        return PrivacyParams(self.epsilon, self.delta)

    @classmethod
    def for_figure(cls, figure, **overrides) -> "SimConfig":
        """Preset grid and parameters for one experiment, with keyword overrides."""
        figure = str(figure)
        presets = {
            "1": dict(n_grid=(10, 20, 30, 50, 75, 100, 150, 200, 300), theta0=0.9,
                      theta_grid=(0.95,), replicates=10_000,
                      methods=("UmpLeft", "BaselineNormal", "NonPrivate")),
            "2": dict(n_grid=(30,), theta_grid=tuple(np.round(np.arange(0.05, 0.951, 0.05), 2)),
                      replicates=100_000, methods=("UmpLeft", "BaselineNormal")),
            "3": dict(n_grid=(30,), theta0=0.1, epsilon=0.1,
                      theta_grid=tuple(np.round(np.linspace(0, 1, 101), 2))),
            "4": dict(n_grid=(30,), theta0=0.1, epsilon=0.1,
                      theta_grid=tuple(np.round(np.linspace(0, 0.2, 41), 3))),
            "5": dict(n_grid=(100,), theta0=0.5, epsilon=0.1,
                      theta_grid=tuple(np.round(np.linspace(0, 1, 101), 2))),
            "6": dict(n_grid=(10, 20, 30, 40, 50, 75, 100, 150, 200, 300), theta0=0.8,
                      theta_grid=(0.75,), epsilon=0.1),
            "7": dict(n_grid=(30,), theta0=0.5, replicates=1000,
                      theta_grid=(0.01,) + tuple(np.round(np.arange(0.05, 0.951, 0.05), 2)) + (0.99,)),
            "8": dict(n_grid=tuple(range(10, 31, 2)) + tuple(range(35, 101, 5)), theta0=0.5, theta_grid=(0.5,),
                      replicates=1000),
        }
        if figure not in presets:
            raise DomainError(f"no preset for figure {figure!r}")
        params = dict(presets[figure])
        if figure in {"3", "4", "5", "6"}:
            params.setdefault("methods", ("UmpLeft", "UmpRight", "Umpu", "ApproxUmpu", "Bonferroni"))
            params["replicates"] = 1
        if figure in {"7", "8"}:
            params["methods"] = ("Bonferroni", "ApproxUmpu")
        params.update(overrides)
        return cls(figure=figure, **params)


@dataclass
class SimResult:
    config: SimConfig
    rows: list = field(default_factory=list)

    def select(self, **match) -> list:
        return [r for r in self.rows if all(r[k] == v for k, v in match.items())]

    def value(self, **match) -> float:
        rows = self.select(**match)
        if len(rows) != 1:
            raise KeyError(f"{len(rows)} rows match {match}")
        return rows[0]["estimate"]

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO() if fh is None else fh
        writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({k: _fmt(row[k]) for k in COLUMNS})
        return buf.getvalue() if fh is None else ""

    def manifest(self, version: str) -> dict:
        return {"config": dataclasses.asdict(self.config), "seed": self.config.seed, "version": version}


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    return v


def _point_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _row(cfg: SimConfig, metric, n, theta, method, estimate, mc_se, theta0=None):
    return {
        "figure": cfg.figure,
        "metric": metric,
        "n": int(n),
        "theta0": float(cfg.theta0 if theta0 is None else theta0),
        "theta": float(theta),
        "epsilon": cfg.epsilon,
        "delta": cfg.delta,
        "alpha": cfg.alpha,
        "replicates": cfg.replicates,
        "method": method,
        "estimate": float(estimate),
        "mc_se": float(mc_se),
    }


def _rate_row(cfg, metric, n, theta, method, hits, theta0=None):
    # integer counts, one division: order of accumulation cannot matter
    r = cfg.replicates
    p = int(np.count_nonzero(hits)) / r
    return _row(cfg, metric, n, theta, method, p, math.sqrt(p * (1 - p) / r), theta0)


def _map(cfg: SimConfig, fn, items):
    if cfg.workers > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


# ---------------------------------------------------------------------------
# building blocks


def exact_power(tv: TestVector, theta):
    """``sum_x phi[x] Binom(n, theta)[x]``, vectorized over ``theta``."""
    out = binom_pmf(tv.n, theta) @ tv.phi
    return float(out) if np.ndim(out) == 0 else out


def baseline_normal_pvalue(zprime, n: int, theta0: float, epsilon: float, variance: str = "null"):
    """Normal-approximation p-value for ``z' = x + Laplace(1/epsilon)``.

    ``1 - Phi((z' - n theta0) / sd)`` with ``sd^2 = n theta0 (1 - theta0) + 2 / epsilon^2``
    (``variance='null'``) or ``n / 4 + 2 / epsilon^2`` (``variance='quarter'``,
    the worst-case binomial variance).
    """
    if not (math.isfinite(epsilon) and epsilon > 0):
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    if variance == "null":
        var = n * theta0 * (1 - theta0) + 2 / epsilon**2
    elif variance == "quarter":
        var = n / 4 + 2 / epsilon**2
    else:
        raise DomainError(f"variance must be 'null' or 'quarter', got {variance!r}")
    out = ndtr(-(np.asarray(zprime, dtype=float) - n * theta0) / math.sqrt(var))
    return float(out) if np.ndim(out) == 0 else out


def nonprivate_pvalue(z, n: int, theta0: float):
    """Randomized exact binomial p-value ``P(X + U >= z)``, ``U ~ Unif(-1/2, 1/2)``.

    This is the one-sided UMP p-value with the geometric part of the noise
    removed (the ``epsilon -> infinity`` limit), fed ``z = x + U``.
    """
    out = greater_pvalue(z, binom_pmf(n, theta0), 0.0, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def _one_sided_draws(cfg: SimConfig, n: int, theta: float, index: int):
    rng = _point_rng(cfg.seed, index)
    r = cfg.replicates
    x = rng.binomial(n, theta, r)
    z = x + tulap_sample(cfg.privacy.tulap(), rng, r)
    zprime = x + rng.laplace(0.0, 1.0 / cfg.epsilon, r)
    znp = x + rng.uniform(-0.5, 0.5, r)
    return z, zprime, znp


def _one_sided_rows(cfg, n, theta, theta0, index, metric):
    z, zprime, znp = _one_sided_draws(cfg, n, theta, index)
    rows = []
    methods = cfg.methods or ("UmpLeft", "BaselineNormal", "NonPrivate")
    if "UmpLeft" in methods:
        p = ump_pvalue(z, n, theta0, cfg.privacy, "greater")
        rows.append(_rate_row(cfg, metric, n, theta, "UmpLeft", p < cfg.alpha, theta0))
    if "BaselineNormal" in methods:
        p = baseline_normal_pvalue(zprime, n, theta0, cfg.epsilon)
        rows.append(_rate_row(cfg, metric, n, theta, "BaselineNormal", p < cfg.alpha, theta0))
    if "NonPrivate" in methods:
        p = nonprivate_pvalue(znp, n, theta0)
        rows.append(_rate_row(cfg, metric, n, theta, "NonPrivate", p < cfg.alpha, theta0))
    return rows


# ---------------------------------------------------------------------------
# experiments


def power_vs_n(cfg: SimConfig) -> SimResult:
    """Empirical power across ``n`` at a single true ``theta`` (one-sided tests)."""
    theta = cfg.theta_grid[0]
    items = list(enumerate(cfg.n_grid))
    chunks = _map(cfg, lambda it: _one_sided_rows(cfg, it[1], theta, cfg.theta0, it[0], "power"), items)
    return SimResult(cfg, [r for c in chunks for r in c])


def type1_sweep(cfg: SimConfig) -> SimResult:
    """Empirical type I error with the truth on the null boundary, per ``theta0``."""
    n = cfg.n_grid[0]
    items = list(enumerate(cfg.theta_grid))
    chunks = _map(cfg, lambda it: _one_sided_rows(cfg, n, it[1], it[1], it[0], "type1"), items)
    return SimResult(cfg, [r for c in chunks for r in c])


_TWO_SIDED_BUILDERS = {
    "UmpLeft": lambda n, t0, a, p: test_vector_one_sided(n, t0, a, p, "greater"),
    "UmpRight": lambda n, t0, a, p: test_vector_one_sided(n, t0, a, p, "less"),
    "Umpu": umpu_test_vector,
    "ApproxUmpu": approx_test_vector,
    "Bonferroni": bonferroni_test_vector,
}


def two_sided_power_sweep(cfg: SimConfig) -> SimResult:
    """Exact power curves of the one- and two-sided tests (no simulation)."""
    methods = cfg.methods or tuple(_TWO_SIDED_BUILDERS)
    thetas = np.asarray(cfg.theta_grid)

    def point(n):
        rows = []
        for method in methods:
            tv = _TWO_SIDED_BUILDERS[method](n, cfg.theta0, cfg.alpha, cfg.privacy)
            power = np.atleast_1d(exact_power(tv, thetas))
            rows.extend(_row(cfg, "power", n, t, method, p, 0.0) for t, p in zip(thetas, power))
        return rows

    chunks = _map(cfg, point, cfg.n_grid)
    return SimResult(cfg, [r for c in chunks for r in c])


def ci_width_sweep(cfg: SimConfig) -> SimResult:
    """Mean width and coverage of the Bonferroni and approximate UMPU intervals."""
    points = [(n, t) for n in cfg.n_grid for t in cfg.theta_grid]
    privacy = cfg.privacy
    r = cfg.replicates

    def point(item):
        index, (n, theta) = item
        rng = _point_rng(cfg.seed, index)
        x = rng.binomial(n, theta, r)
        z = x + tulap_sample(privacy.tulap(), rng, r)
        bounds = {
            "Bonferroni": bonferroni_bounds(z, n, cfg.alpha, privacy),
            "ApproxUmpu": approx_bounds(z, n, cfg.alpha, privacy),
        }
        rows = []
        for method in cfg.methods or ("Bonferroni", "ApproxUmpu"):
            lo, hi = bounds[method]
            width = hi - lo
            sd = float(width.std(ddof=1)) if r > 1 else 0.0
            rows.append(_row(cfg, "width", n, theta, method, width.mean(), sd / math.sqrt(r)))
            rows.append(_rate_row(cfg, "coverage", n, theta, method, (lo <= theta) & (theta <= hi)))
        return rows

    chunks = _map(cfg, point, list(enumerate(points)))
    return SimResult(cfg, [row for c in chunks for row in c])


def run_figure(cfg: SimConfig) -> SimResult:
    if cfg.figure == "1":
        return power_vs_n(cfg)
    if cfg.figure == "2":
        return type1_sweep(cfg)
    if cfg.figure in {"3", "4", "5", "6"}:
        return two_sided_power_sweep(cfg)
    if cfg.figure in {"7", "8"}:
        return ci_width_sweep(cfg)
    raise DomainError(f"unknown figure {cfg.figure!r}")


def manifest_json(result: SimResult, version: str) -> str:
    return json.dumps(result.manifest(version), indent=2, sort_keys=True)
