"""Numerical verification of stochastic stability for Gaussian spin glasses.

Exact per-sample enumeration plus disorder Monte Carlo for the
Sherrington-Kirkpatrick and Edwards-Anderson models: quenched overlap means,
three independent estimators of the stochastic-stability derivative DeltaG,
the zero-average overlap identities, and the volume-rate stability bound.
"""

__version__ = "0.1.0"

from .errors import (CapacityError, ObservableSyntaxError, SpinstabError,
                     UsageError)
from .estimators import (RunPlan, beta2_integral, delta_g_rhs, delta_g_via_beta,
                         delta_g_via_iden, delta_g_via_lambda_fd,
                         quenched_expectation, quenched_free_energy,
                         quenched_log_partition)
from .models import DisorderSample, ModelSpec, covariance_scale, model_from_string
from .observables import (OverlapMonomial, OverlapPolynomial, canonicalize,
                          delta_g, format_polynomial, parse_polynomial,
                          replica_count)
from .stats import Estimate
from .verify import (CheckReport, check_sumlaw, check_theorem1, check_theorem2,
                     fluctuation_decomposition, rate_sweep, resolve_sign,
                     wick_selfcheck)

__all__ = [
    "CapacityError", "CheckReport", "DisorderSample", "Estimate", "ModelSpec",
    "ObservableSyntaxError", "OverlapMonomial", "OverlapPolynomial", "RunPlan",
    "SpinstabError", "UsageError", "beta2_integral", "canonicalize",
    "check_sumlaw", "check_theorem1", "check_theorem2", "covariance_scale",
    "delta_g", "delta_g_rhs", "delta_g_via_beta", "delta_g_via_iden",
    "delta_g_via_lambda_fd", "fluctuation_decomposition", "format_polynomial",
    "model_from_string", "parse_polynomial", "quenched_expectation",
    "quenched_free_energy", "quenched_log_partition", "rate_sweep",
    "replica_count", "resolve_sign", "wick_selfcheck", "__version__",
]
