"""Metropolis sampling backend for volumes beyond the enumeration caps.

R independent single-spin-flip chains per disorder sample realize the
R-replica product state; the quenched average runs over disorder samples as
usual.  Chains are driven by per-chain counter-based streams, so every
trajectory is reproducible from (seed, sample index, chain index) and the
batched driver below reproduces the sequential reference sweep exactly.

Error bars combine the thermal error of each chain's time average (blocking)
with the scatter across disorder samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import models
from .errors import UsageError
from .models import DisorderSample, ModelSpec, bonds, sample_disorder
from .observables import OverlapPolynomial, replica_count
from .stats import Estimate, blocking_stderr, integrated_autocorr
from .streams import DisorderStream

_DRIFT_CHECK_INTERVAL = 1000   # sweeps between cached-log-weight audits
_DRIFT_TOLERANCE = 1e-8


@dataclass
class ChainState:
    """One Markov chain: spins, cached log weight, sweep counter."""

    spins: np.ndarray      # +-1 int8, length V
    log_weight: float
    sweeps: int = 0


@dataclass(frozen=True)
class McPlan:
    """Sampling schedule for mc_quenched_expectation."""

    replicas: int
    sweeps: int
    n_samples: int
    seed: int
    burn_in: int | None = None   # None: 10 * thinning * autocorrelation pilot
    thinning: int = 1

    def __post_init__(self):
        if self.replicas < 1 or self.n_samples < 2 or self.thinning < 1:
            raise UsageError("need replicas >= 1, n_samples >= 2, thinning >= 1")
        if self.burn_in is not None and not 0 <= self.burn_in < self.sweeps:
            raise UsageError("need 0 <= burn_in < sweeps")


def local_field_matrices(model: ModelSpec, disorder: DisorderSample):
    """Symmetric V x V matrices (WH, WK) with zero diagonal such that
    flipping site k changes H by 2*sigma_k*(WH[k] . sigma) and K by
    -2*sigma_k*(WK[k] . sigma)."""
    V = model.volume
    if model.kind == "sk":
        root_n = math.sqrt(model.n_spins)
        wh = (disorder.main + disorder.main.T) / root_n
        wk = (disorder.perturbation + disorder.perturbation.T) / model.n_spins
        np.fill_diagonal(wh, 0.0)
        np.fill_diagonal(wk, 0.0)
        return wh, wk
    pairs = bonds(model)
    wh = np.zeros((V, V))
    wk = np.zeros((V, V))
    root_b = math.sqrt(model.bond_count)
    for (a, b), j, jp in zip(pairs, disorder.main, disorder.perturbation):
        wh[a, b] += j
        wh[b, a] += j
        wk[a, b] += jp / root_b
        wk[b, a] += jp / root_b
    return wh, wk


def _w_eff(model, disorder, beta, lam):
    # d(logW) for a flip at k is 2*sigma_k*(w_eff[k] . sigma)
    wh, wk = local_field_matrices(model, disorder)
    return -beta * wh - math.sqrt(lam) * wk


def log_weight_of(model: ModelSpec, disorder: DisorderSample, beta: float,
                  lam: float, spins: np.ndarray) -> float:
    return (-beta * models.hamiltonian(model, disorder, spins)
            + math.sqrt(lam) * models.perturbation(model, disorder, spins))


def initial_state(model: ModelSpec, disorder: DisorderSample, beta: float,
                  lam: float, rng: np.random.Generator) -> ChainState:
    spins = rng.integers(0, 2, size=model.volume).astype(np.int8) * 2 - 1
    return ChainState(spins=spins,
                      log_weight=log_weight_of(model, disorder, beta, lam, spins))


def metropolis_sweep(model: ModelSpec, disorder: DisorderSample, beta: float,
                     lam: float, state: ChainState,
                     rng: np.random.Generator) -> ChainState:
    """One full sweep of single-spin Metropolis proposals in fixed site
    order; detailed balance w.r.t. the weights exp(-beta*H + sqrt(lam)*K).
    Draws exactly one uniform per site (stream parity with the batched
    driver).  Reference implementation; hot paths use _simulate_batch."""
    w = _w_eff(model, disorder, beta, lam)
    spins = state.spins.astype(np.float64)
    logw = state.log_weight
    u = rng.random(model.volume)
    for k in range(model.volume):
        dlw = 2.0 * spins[k] * float(w[k] @ spins)
        if u[k] < math.exp(min(dlw, 50.0)):
            spins[k] = -spins[k]
            logw += dlw
    state = ChainState(spins=spins.astype(np.int8), log_weight=logw,
                       sweeps=state.sweeps + 1)
    if state.sweeps % _DRIFT_CHECK_INTERVAL == 0:
        exact = log_weight_of(model, disorder, beta, lam, state.spins)
        if abs(exact - state.log_weight) > _DRIFT_TOLERANCE:
            raise RuntimeError(
                f"cached log-weight drifted by {abs(exact - state.log_weight):.3g}")
        state.log_weight = exact
    return state


# ---------------------------------------------------------------------------
# batched driver: all (disorder sample, chain) pairs advance together

def _poly_values(model: ModelSpec, poly: OverlapPolynomial,
                 spins: np.ndarray) -> np.ndarray:
    """Evaluate the polynomial per disorder sample; spins has shape
    (n_samples, R, V) with replica label k mapped to chain k-1."""
    if model.kind == "sk":
        feat = spins / math.sqrt(model.n_spins)
        def q(k, l):
            return np.einsum("nv,nv->n", feat[:, k - 1], feat[:, l - 1]) ** 2
    else:
        pairs = bonds(model)
        bond_spins = spins[..., pairs[:, 0]] * spins[..., pairs[:, 1]]
        feat = bond_spins / math.sqrt(model.bond_count)
        def q(k, l):
            return np.einsum("nb,nb->n", feat[:, k - 1], feat[:, l - 1])
    total = np.zeros(spins.shape[0])
    for mono, coeff in poly.terms.items():
        term = np.full(spins.shape[0], coeff)
        for (k, l), exp in mono.factors:
            term = term * q(k, l) ** exp
        total += term
    return total


def _simulate_batch(model, disorders, beta, lam, rngs, sweeps, burn_in, thinning,
                    poly, spins=None, chunk=64):
    """Advance n_samples x R chains for `sweeps` sweeps and record the
    polynomial every `thinning` sweeps after burn-in.  Returns the series
    (n_samples, T)."""
    n = len(disorders)
    R = len(rngs[0])
    V = model.volume
    w = np.empty((n, R, V, V))
    for i, d in enumerate(disorders):
        w[i, :] = _w_eff(model, d, beta, lam)
    w = w.reshape(n * R, V, V)

    if spins is None:
        spins = np.empty((n, R, V))
        for i in range(n):
            for r in range(R):
                spins[i, r] = rngs[i][r].integers(0, 2, size=V) * 2.0 - 1.0
    flat = spins.reshape(n * R, V)
    logw = np.array([
        log_weight_of(model, disorders[i // R], beta, lam, flat[i])
        for i in range(n * R)])

    series = []
    done = 0
    while done < sweeps:
        block = min(chunk, sweeps - done)
        u = np.empty((n, R, block, V))
        for i in range(n):
            for r in range(R):
                u[i, r] = rngs[i][r].random((block, V))
        u = u.reshape(n * R, block, V)
        for t in range(block):
            for k in range(V):
                dlw = 2.0 * flat[:, k] * np.einsum("cv,cv->c", w[:, k, :], flat)
                accept = u[:, t, k] < np.exp(np.minimum(dlw, 50.0))
                flat[accept, k] *= -1.0
                logw[accept] += dlw[accept]
            sweep_index = done + t + 1
            if sweep_index > burn_in and (sweep_index - burn_in - 1) % thinning == 0:
                series.append(_poly_values(model, poly, spins))
            if sweep_index % _DRIFT_CHECK_INTERVAL == 0:
                exact = np.array([
                    log_weight_of(model, disorders[i // R], beta, lam, flat[i])
                    for i in range(n * R)])
                drift = np.max(np.abs(exact - logw))
                if drift > _DRIFT_TOLERANCE:
                    raise RuntimeError(f"cached log-weight drifted by {drift:.3g}")
                logw = exact
        done += block
    return np.asarray(series).T if series else np.empty((n, 0))


def _auto_burn_in(model, beta, lam, plan: McPlan) -> int:
    """Pilot run estimating the integrated autocorrelation time of the
    energy on a throwaway stream; burn-in defaults to 10 * thinning * tau."""
    stream = DisorderStream(plan.seed)
    disorder = sample_disorder(model, stream, 0)
    rng = stream.rng("burn-in-pilot")
    state = initial_state(model, disorder, beta, lam, rng)
    pilot = min(max(200, plan.sweeps // 4), 2000)
    energies = np.empty(pilot)
    w = _w_eff(model, disorder, beta, lam)
    spins = state.spins.astype(np.float64)
    for t in range(pilot):
        u = rng.random(model.volume)
        for k in range(model.volume):
            dlw = 2.0 * spins[k] * float(w[k] @ spins)
            if u[k] < math.exp(min(dlw, 50.0)):
                spins[k] = -spins[k]
        energies[t] = models.hamiltonian(model, disorder, spins.astype(np.int8))
    tau = integrated_autocorr(energies[pilot // 5:])
    burn = int(math.ceil(10.0 * plan.thinning * tau))
    return min(burn, plan.sweeps - 1)


def mc_quenched_expectation(model: ModelSpec, poly: OverlapPolynomial, beta: float,
                            lam: float, plan: McPlan) -> Estimate:
    """Quenched mean of an overlap polynomial by Metropolis sampling.

    Per disorder sample, the monomials are time-averaged over R independent
    chains after burn-in; the stderr combines each sample's blocking
    (thermal) error with the scatter across samples."""
    R = replica_count(poly)
    if plan.replicas < R:
        raise UsageError(
            f"polynomial needs {R} replicas but the plan provides {plan.replicas}")
    burn_in = plan.burn_in if plan.burn_in is not None else _auto_burn_in(
        model, beta, lam, plan)

    stream = DisorderStream(plan.seed)
    disorders = [sample_disorder(model, stream, i) for i in range(plan.n_samples)]
    rngs = [[stream.rng(i, "chain", r) for r in range(plan.replicas)]
            for i in range(plan.n_samples)]
    series = _simulate_batch(model, disorders, beta, lam, rngs, plan.sweeps,
                             burn_in, plan.thinning, poly)
    if series.shape[1] == 0:
        raise UsageError("no measurements: burn_in consumed all sweeps")

    sample_means = series.mean(axis=1)
    thermal_vars = np.array([blocking_stderr(row) ** 2 for row in series])
    n = plan.n_samples
    disorder_var = sample_means.var(ddof=1) if n >= 2 else 0.0
    stderr = math.sqrt(disorder_var / n + thermal_vars.mean() / n)
    return Estimate(mean=float(sample_means.mean()), stderr=float(stderr), n_samples=n)
