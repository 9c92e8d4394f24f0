"""Disorder Monte Carlo over coupling samples: quenched means, quenched free
energy, and three estimators of DeltaG = d/dlambda <G>_lambda.

All estimators share the same per-sample layout: draw disorder sample i from
the counter-based stream, compute an exact per-sample quantity with the
enumeration engine, then average in ascending index order.  Stencil and
quadrature combinations are differenced per sample first (common random
numbers), so the reported stderr is that of the combined per-sample
quantity.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .engine import AttachmentSpec, WeightTable, build_weights, replica_expectation
from .errors import UsageError
from .models import ModelSpec, covariance_scale, sample_disorder
from .observables import OverlapPolynomial, delta_g, replica_count
from .stats import Estimate, sample_map
from .streams import DisorderStream

DELTA_G_ESTIMATORS = ("iden", "beta", "lambda_fd", "rhs")


@dataclass(frozen=True)
class RunPlan:
    """Parameters of one disorder-averaged computation."""

    model: ModelSpec
    beta: float
    lam: float = 0.0
    n_samples: int = 1000
    seed: int = 0
    threads: int = 1
    h_beta: float | None = None    # default 1e-2 * max(1, beta)
    h_lambda: float = 1e-2

    def __post_init__(self):
        if self.beta < 0 or self.lam < 0:
            raise UsageError("beta and lambda must be nonnegative")
        if self.n_samples < 2:
            raise UsageError("n_samples must be at least 2")
        if self.h_lambda <= 0 or (self.h_beta is not None and self.h_beta <= 0):
            raise UsageError("finite-difference steps must be positive")

    @property
    def beta_step(self) -> float:
        return self.h_beta if self.h_beta is not None else 1e-2 * max(1.0, self.beta)

    def stream(self) -> DisorderStream:
        return DisorderStream(self.seed)

    def with_seed(self, seed: int) -> "RunPlan":
        return replace(self, seed=seed)


def _weights_at(plan: RunPlan, disorder, beta=None, lam=None) -> WeightTable:
    return build_weights(plan.model,
                         disorder,
                         plan.beta if beta is None else beta,
                         plan.lam if lam is None else lam)


def per_sample_values(plan: RunPlan, kernel) -> np.ndarray:
    """kernel(disorder) for every sample index, in order.  kernel must be a
    pure function of the disorder sample; that makes the reduction
    independent of the thread count."""
    stream = plan.stream()
    model = plan.model

    def one(i: int):
        return kernel(sample_disorder(model, stream, i))

    return sample_map(one, plan.n_samples, plan.threads)


# ---------------------------------------------------------------------------
# quenched means and free energy

def quenched_expectation(plan: RunPlan, poly: OverlapPolynomial) -> Estimate:
    """<G>_lambda estimated over n i.i.d. disorder samples."""
    values = per_sample_values(
        plan, lambda d: replica_expectation(_weights_at(plan, d), poly))
    return Estimate.from_samples(values)


def quenched_log_partition(plan: RunPlan) -> Estimate:
    """A(beta) = Av[ln Z_lambda]."""
    values = per_sample_values(plan, lambda d: _weights_at(plan, d).log_partition)
    return Estimate.from_samples(values)


def quenched_free_energy(plan: RunPlan) -> Estimate:
    """F = -A/beta; defined only for beta > 0."""
    if plan.beta == 0:
        raise UsageError("free energy F = -A/beta needs beta > 0 (A itself is fine)")
    a = quenched_log_partition(plan)
    return Estimate(mean=-a.mean / plan.beta, stderr=a.stderr / plan.beta,
                    n_samples=a.n_samples)


# ---------------------------------------------------------------------------
# per-sample DeltaG kernels (shared by the public estimators and the verifier)

def iden_per_sample(weights: WeightTable, poly: OverlapPolynomial, beta: float) -> float:
    """Thermal-covariance form: sum_l [Omega(h_l G) - Omega(h) Omega(G)],
    divided by -2 beta, with h = H/s."""
    R = replica_count(poly)
    omega_g = replica_expectation(weights, poly)
    omega_h = replica_expectation(weights, OverlapPolynomial.constant(1.0),
                                  attach=AttachmentSpec.energy(1))
    total = 0.0
    for l in range(1, R + 1):
        omega_hg = replica_expectation(weights, poly, attach=AttachmentSpec.energy(l))
        total += omega_hg - omega_h * omega_g
    return total / (-2.0 * beta)


def _beta_fd_per_sample(plan: RunPlan, disorder, poly, beta: float, step: float) -> float:
    if beta - step <= 0:
        step = beta / 2.0
    g_plus = replica_expectation(_weights_at(plan, disorder, beta=beta + step), poly)
    g_minus = replica_expectation(_weights_at(plan, disorder, beta=beta - step), poly)
    s = covariance_scale(plan.model)
    return (g_plus - g_minus) / (2.0 * step) / (2.0 * beta * s)


def _lambda_fd_per_sample(plan: RunPlan, disorder, poly, beta: float,
                          lam: float, step: float) -> float:
    if lam == 0.0:
        g_plus = replica_expectation(_weights_at(plan, disorder, beta=beta, lam=step), poly)
        g_zero = replica_expectation(_weights_at(plan, disorder, beta=beta, lam=0.0), poly)
        return (g_plus - g_zero) / step
    if lam - step < 0:
        step = lam
    g_plus = replica_expectation(_weights_at(plan, disorder, beta=beta, lam=lam + step), poly)
    g_minus = replica_expectation(_weights_at(plan, disorder, beta=beta, lam=lam - step), poly)
    return (g_plus - g_minus) / (2.0 * step)


# ---------------------------------------------------------------------------
# public DeltaG estimators

def delta_g_via_iden(plan: RunPlan, G: OverlapPolynomial) -> Estimate:
    """DeltaG from the exact-in-lambda thermal covariance identity (the
    default estimator)."""
    if plan.beta == 0:
        raise UsageError("delta_g_via_iden needs beta > 0; use delta_g_rhs at beta = 0")
    values = per_sample_values(
        plan, lambda d: iden_per_sample(_weights_at(plan, d), G, plan.beta))
    return Estimate.from_samples(values)


def delta_g_via_beta(plan: RunPlan, G: OverlapPolynomial) -> Estimate:
    """DeltaG from the chain rule 2*beta*s * d/dlambda = d/dbeta, via a
    central finite difference in beta with common disorder samples."""
    if plan.beta == 0:
        raise UsageError("delta_g_via_beta needs beta > 0")
    step = plan.beta_step
    values = per_sample_values(
        plan, lambda d: _beta_fd_per_sample(plan, d, G, plan.beta, step))
    return Estimate.from_samples(values)


def delta_g_via_lambda_fd(plan: RunPlan, G: OverlapPolynomial) -> Estimate:
    """DeltaG from a finite difference in lambda (forward at lambda = 0,
    where per-sample weights are not smooth; central otherwise), with
    common disorder and perturbation couplings across the stencil."""
    values = per_sample_values(
        plan, lambda d: _lambda_fd_per_sample(plan, d, G, plan.beta, plan.lam, plan.h_lambda))
    return Estimate.from_samples(values)


def delta_g_rhs(plan: RunPlan, G: OverlapPolynomial) -> Estimate:
    """Quenched mean of the explicit DeltaG polynomial over R+2 replicas."""
    return quenched_expectation(plan, delta_g(G))


def delta_g_per_sample_matrix(plan: RunPlan, G: OverlapPolynomial,
                              which: tuple[str, ...]) -> np.ndarray:
    """Per-sample values of several DeltaG estimators on common disorder
    samples; column order follows `which`.  Used by the verifier to
    difference estimators per sample."""
    unknown = set(which) - set(DELTA_G_ESTIMATORS)
    if unknown:
        raise UsageError(f"unknown estimators {sorted(unknown)}")
    if ("iden" in which or "beta" in which) and plan.beta == 0:
        raise UsageError("iden/beta estimators need beta > 0")
    dg_poly = delta_g(G) if "rhs" in which else None
    beta_step = plan.beta_step

    def kernel(d):
        row = []
        weights = _weights_at(plan, d) if ("iden" in which or "rhs" in which) else None
        for name in which:
            if name == "iden":
                row.append(iden_per_sample(weights, G, plan.beta))
            elif name == "beta":
                row.append(_beta_fd_per_sample(plan, d, G, plan.beta, beta_step))
            elif name == "lambda_fd":
                row.append(_lambda_fd_per_sample(plan, d, G, plan.beta, plan.lam,
                                                 plan.h_lambda))
            else:
                row.append(replica_expectation(weights, dg_poly))
        return row

    return per_sample_values(plan, kernel)


# ---------------------------------------------------------------------------
# beta^2 quadrature

def simpson_weights(a: float, b: float, nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Uniform grid and composite Simpson weights on [a, b]; nodes odd >= 3."""
    if nodes < 3 or nodes % 2 == 0:
        raise UsageError("Simpson quadrature needs an odd node count >= 3")
    grid = np.linspace(a, b, nodes)
    h = (b - a) / (nodes - 1)
    w = np.ones(nodes)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return grid, w * (h / 3.0)


def integrand_nodes(beta1: float, beta2: float, nodes: int):
    if not 0 < beta1 < beta2:
        raise UsageError("need 0 < beta1 < beta2")
    u_grid, weights = simpson_weights(beta1 ** 2, beta2 ** 2, nodes)
    return np.sqrt(u_grid), weights


def beta2_integral_per_sample(plan: RunPlan, G: OverlapPolynomial, beta1: float,
                              beta2: float, nodes: int,
                              estimator: str = "iden") -> np.ndarray:
    """Per-sample composite Simpson quadrature of DeltaG over beta^2 in
    [beta1^2, beta2^2], common disorder across all nodes."""
    betas, quad_w = integrand_nodes(beta1, beta2, nodes)
    if estimator not in DELTA_G_ESTIMATORS:
        raise UsageError(f"unknown estimator {estimator!r}")
    dg_poly = delta_g(G) if estimator == "rhs" else None
    step = plan.beta_step

    def kernel(d):
        node_vals = np.empty(len(betas))
        for j, beta in enumerate(betas):
            if estimator == "iden":
                node_vals[j] = iden_per_sample(_weights_at(plan, d, beta=beta), G, beta)
            elif estimator == "beta":
                node_vals[j] = _beta_fd_per_sample(plan, d, G, beta, step)
            elif estimator == "lambda_fd":
                node_vals[j] = _lambda_fd_per_sample(plan, d, G, beta, plan.lam,
                                                     plan.h_lambda)
            else:
                node_vals[j] = replica_expectation(_weights_at(plan, d, beta=beta), dg_poly)
        return float(node_vals @ quad_w)

    return per_sample_values(plan, kernel)


def beta2_integral(plan: RunPlan, G: OverlapPolynomial, beta1: float, beta2: float,
                   nodes: int, estimator: str = "iden") -> Estimate:
    """Integral of <DeltaG>_lambda d(beta^2) over [beta1^2, beta2^2]."""
    return Estimate.from_samples(
        beta2_integral_per_sample(plan, G, beta1, beta2, nodes, estimator))


def endpoint_difference_per_sample(plan: RunPlan, G: OverlapPolynomial,
                                   beta1: float, beta2: float) -> np.ndarray:
    """Per-sample (Omega(G)(beta2) - Omega(G)(beta1)) / s, common disorder."""
    s = covariance_scale(plan.model)

    def kernel(d):
        g2 = replica_expectation(_weights_at(plan, d, beta=beta2), G)
        g1 = replica_expectation(_weights_at(plan, d, beta=beta1), G)
        return (g2 - g1) / s

    return per_sample_values(plan, kernel)
