"""Reduced-sample self-checks runnable from the CLI.

Each check is a named zero-argument callable returning True/False.  The suite
mirrors the full acceptance checks at sample counts that finish in seconds,
and it is the target of the --mutate negative control: corrupting a DeltaG
coefficient must flip at least one verdict to FAIL.
"""

from __future__ import annotations

from .engine import build_weights, naive_replica_expectation, replica_expectation
from .estimators import RunPlan, delta_g_rhs
from .models import ModelSpec, sample_disorder
from .observables import OverlapPolynomial, delta_g
from .streams import DisorderStream
from .verify import (check_sumlaw, check_theorem1, check_theorem2,
                     fluctuation_decomposition, wick_selfcheck)

_SEED = 20260825


def _check_engine_oracle() -> bool:
    """Factor-graph contraction matches the direct sum over replica tuples."""
    model = ModelSpec.sk(5)
    disorder = sample_disorder(model, DisorderStream(_SEED), 0)
    weights = build_weights(model, disorder, beta=0.7, lam=0.3)
    poly = (OverlapPolynomial.q(1, 2).times_q(1, 3)
            + OverlapPolynomial.q(2, 3).scaled(-0.5))
    fast = replica_expectation(weights, poly)
    slow = naive_replica_expectation(weights, poly)
    return abs(fast - slow) <= 1e-12


def _check_uniform_anchor() -> bool:
    """At beta = 0 the quenched DeltaG polynomial mean has the closed form
    2(N-1)/N^3 for G = q12 on the SK model (uniform product measure)."""
    n = 6
    plan = RunPlan(ModelSpec.sk(n), beta=0.0, n_samples=8, seed=_SEED)
    est = delta_g_rhs(plan, OverlapPolynomial.q(1, 2))
    expected = 2.0 * (n - 1) / n ** 3
    # exact per sample at beta = 0, so only roundoff scatter remains
    return abs(est.mean - expected) <= 1e-12 and est.stderr <= 1e-12


def _check_coefficients_balance() -> bool:
    """DeltaG coefficients sum to zero for any G (constants are invariant)."""
    for poly in (OverlapPolynomial.q(1, 2),
                 OverlapPolynomial.q(1, 2).times_q(3, 4),
                 OverlapPolynomial.q(1, 2).times_q(1, 2)):
        if abs(delta_g(poly).coefficient_sum()) > 1e-12:
            return False
    return True


def _check_theorem2() -> bool:
    report = check_theorem2(ModelSpec.sk(4), OverlapPolynomial.q(1, 2),
                            beta=0.5, lam=0.0, n_samples=800, seed=_SEED)
    return report.passed


def _check_theorem1() -> bool:
    report = check_theorem1(ModelSpec.sk(4), OverlapPolynomial.q(1, 2),
                            beta1=0.3, beta2=0.8, nodes=9,
                            n_samples=400, seed=_SEED)
    return report.passed


def _check_sumlaw() -> bool:
    report = check_sumlaw(ModelSpec.sk(4), OverlapPolynomial.q(1, 2),
                          beta=0.6, lam=0.64, n_samples=2000, seed=_SEED)
    return report.passed


def _check_decomposition() -> bool:
    report = fluctuation_decomposition(ModelSpec.sk(4), OverlapPolynomial.q(1, 2),
                                       beta=0.5, n_samples=500, seed=_SEED)
    return report.passed


def _check_wick() -> bool:
    return wick_selfcheck(n_samples=200_000, seed=_SEED).passed


def reduced_checks(threads: int | None = None):
    """Ordered (name, callable) pairs for the CLI selftest."""
    del threads  # sample counts are small enough that one worker suffices
    return [
        ("engine-vs-direct-sum", _check_engine_oracle),
        ("uniform-measure-anchor", _check_uniform_anchor),
        ("delta-g-coefficient-balance", _check_coefficients_balance),
        ("overlap-identities", _check_theorem2),
        ("stability-bound", _check_theorem1),
        ("deformation-sum-law", _check_sumlaw),
        ("fluctuation-decomposition", _check_decomposition),
        ("gaussian-integration-by-parts", _check_wick),
    ]
