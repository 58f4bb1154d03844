"""Differentially private hypothesis tests and confidence intervals for binomial data."""

from .distributions import (
    PmfVector,
    PrivacyParams,
    TulapParams,
    binom_pmf,
    binom_pmf_vector,
    hypergeom_pmf_vector,
    privacy_to_tulap,
    tulap_cdf,
    tulap_quantile,
    tulap_sample,
)
from .errors import ConvergenceError, DomainError
from .intervals import (
    CdResult,
    IntervalKind,
    IntervalResult,
    ci_approx_umpu,
    ci_bonferroni,
    ci_lower,
    ci_umau,
    ci_upper,
    confidence_distribution,
)
from .nonparametric import (
    Alternative,
    NonparametricResult,
    PairedSample,
    TwoSample,
    median_test,
    sign_test,
)
from .one_sided import (
    PrivateSummary,
    Side,
    TestVector,
    calibrate_m,
    decide,
    privatize,
    test_vector_one_sided,
    ump_pvalue,
    verify_dp,
)
from .simulation import SimConfig, SimResult, exact_power, run_figure
from .two_sided import (
    UmpuSolution,
    approx_pvalue,
    approx_test_vector,
    bonferroni_pvalue,
    bonferroni_test_vector,
    umau_pvalue,
    umpu_solve,
    umpu_test_vector,
)

__version__ = "0.1.0"
