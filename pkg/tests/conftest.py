import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def tulap_cdf_series(x, m, b, q, kmax=3000):
    """Untruncated cdf as an explicit sum over the discrete Laplace lattice, then truncated."""
    k = np.arange(-kmax, kmax + 1)
    pk = (1 - b) / (1 + b) * b ** np.abs(k)
    u = np.clip(x - m - k + 0.5, 0.0, 1.0)
    f0 = float(np.sum(pk * u))
    return min(max((f0 - q / 2) / (1 - q), 0.0), 1.0)


def dp_lp_max_power(n, null_w, alpha, privacy, alt_w, extra_eq=()):
    """Best power over all (epsilon, delta)-DP test vectors of size alpha, by linear programming."""
    from scipy.optimize import linprog

    e, d, size = np.exp(privacy.epsilon), privacy.delta, n + 1
    rows, rhs = [], []
    for x in range(1, size):
        for i, j in ((x, x - 1), (x - 1, x)):
            r = np.zeros(size)
            r[i], r[j] = 1.0, -e
            rows.append(r)
            rhs.append(d)
            rows.append(-r)
            rhs.append(d + e - 1.0)
    a_eq = np.vstack([null_w, *extra_eq])
    b_eq = [alpha] + [0.0] * len(extra_eq)
    res = linprog(-alt_w, A_ub=np.array(rows), b_ub=rhs, A_eq=a_eq, b_eq=b_eq,
                  bounds=[(0, 1)] * size, method="highs")
    assert res.status == 0, res.message
    return -res.fun


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.summary_lines():
        terminalreporter.write_line(line)
