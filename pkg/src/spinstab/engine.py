"""Exact per-disorder-sample computation of partition functions and
R-replica product expectations of overlap polynomials.

Everything is computed in the log domain from the full table of 2^V
Boltzmann weights exp(-beta*H + sqrt(lambda)*K).  Replica expectations are
evaluated by variable elimination on the factor graph whose variables are
replicas (domain size 2^V) and whose pair factors are overlap powers.
Degree-0/1 eliminations are vector sums and matvecs, degree-2 eliminations
are three-index contractions, and higher degrees fall back to conditioning
on one replica's configuration.  Costs are predicted before running and
checked against a cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from scipy.special import logsumexp

from . import models
from .errors import CapacityError, UsageError
from .models import ModelSpec, DisorderSample, covariance_scale
from .observables import OverlapMonomial, OverlapPolynomial

ENUMERATION_CAP = 20          # max spins for the full weight table
DENSE_MATRIX_CAP = 10         # cache full 2^V x 2^V overlap matrices up to here
ELIMINATION_COST_CAP = 2 ** 36
_ROW_BLOCK = 1 << 10

ENERGY_PER_SCALE = "energy_per_scale"


@dataclass(frozen=True)
class AttachmentSpec:
    """Optional per-replica single-configuration factors.

    The only supported factor is the energy per covariance scale,
    h(sigma) = H(sigma)/s, attached to each replica listed once.
    """

    energy_replicas: tuple[int, ...] = ()

    def __post_init__(self):
        if len(set(self.energy_replicas)) != len(self.energy_replicas):
            raise UsageError("at most one attachment per replica label")
        if any(r < 1 for r in self.energy_replicas):
            raise UsageError("replica labels must be positive")

    @classmethod
    def energy(cls, *replicas: int) -> "AttachmentSpec":
        return cls(energy_replicas=tuple(replicas))


NO_ATTACHMENT = AttachmentSpec()


class WeightTable:
    """Log Boltzmann weights of one replica over all 2^V configurations at
    fixed (beta, lambda), for one disorder sample.  Immutable after
    construction and freely shareable across threads."""

    def __init__(self, model: ModelSpec, beta: float, lam: float,
                 energies: np.ndarray, perturbations: np.ndarray):
        self.model = model
        self.beta = float(beta)
        self.lam = float(lam)
        self.energies = energies
        self.perturbations = perturbations
        self.log_weights = -self.beta * energies + math.sqrt(self.lam) * perturbations
        self._matvec_cache: dict = {}

    @cached_property
    def log_partition(self) -> float:
        return float(logsumexp(self.log_weights))

    @cached_property
    def probabilities(self) -> np.ndarray:
        p = np.exp(self.log_weights - self.log_partition)
        p.setflags(write=False)
        return p

    @cached_property
    def energy_per_scale(self) -> np.ndarray:
        h = self.energies / covariance_scale(self.model)
        h.setflags(write=False)
        return h


def build_weights(model: ModelSpec, disorder: DisorderSample, beta: float,
                  lam: float = 0.0, enumeration_cap: int = ENUMERATION_CAP) -> WeightTable:
    """Tabulate log weights -beta*H(sigma) + sqrt(lambda)*K(sigma) for all
    configurations."""
    if beta < 0 or lam < 0:
        raise UsageError("beta and lambda must be nonnegative")
    if model.volume > enumeration_cap:
        raise CapacityError(
            f"volume {model.volume} exceeds the enumeration cap of {enumeration_cap} spins")
    energies = models.energies_all(model, disorder)
    if lam > 0:
        perturbations = models.perturbations_all(model, disorder)
    else:
        perturbations = np.zeros_like(energies)
    return WeightTable(model, beta, lam, energies, perturbations)


def log_partition(weights: WeightTable) -> float:
    """ln Z, overflow-safe via log-sum-exp."""
    return weights.log_partition


# ---------------------------------------------------------------------------
# overlap kernels

@lru_cache(maxsize=32)
def _dense_overlap_power(model: ModelSpec, exponent: int) -> np.ndarray:
    Q = models.overlap_rows(model, 0, 1 << model.volume)
    if exponent != 1:
        Q = Q ** exponent
    Q.setflags(write=False)
    return Q


def _edge_matvec(weights: WeightTable, factor, vec: np.ndarray) -> np.ndarray:
    """Apply one pair factor (overlap power or dense matrix) to a vector.

    Matvecs of the bare Boltzmann vector are cached on the weight table;
    elimination revisits them constantly.
    """
    if isinstance(factor, np.ndarray):
        return factor @ vec
    exponent = factor
    model = weights.model
    cacheable = vec is weights.probabilities
    if cacheable and exponent in weights._matvec_cache:
        return weights._matvec_cache[exponent]
    if model.volume <= DENSE_MATRIX_CAP:
        out = _dense_overlap_power(model, exponent) @ vec
    else:
        n = 1 << model.volume
        out = np.empty(n)
        for start in range(0, n, _ROW_BLOCK):
            stop = min(start + _ROW_BLOCK, n)
            block = models.overlap_rows(model, start, stop)
            if exponent != 1:
                block = block ** exponent
            out[start:stop] = block @ vec
        # Q is symmetric, so row blocks act as column blocks.
    if cacheable:
        weights._matvec_cache[exponent] = out
    return out


def _edge_dense(weights: WeightTable, factor) -> np.ndarray:
    if isinstance(factor, np.ndarray):
        return factor
    model = weights.model
    if model.volume <= DENSE_MATRIX_CAP:
        return _dense_overlap_power(model, factor)
    Q = models.overlap_rows(model, 0, 1 << model.volume)
    return Q ** factor if factor != 1 else Q


def _edge_column(weights: WeightTable, factor, code: int) -> np.ndarray:
    if isinstance(factor, np.ndarray):
        return factor[:, code]
    col = models.overlap_with_all(weights.model, code)
    return col ** factor if factor != 1 else col


# ---------------------------------------------------------------------------
# elimination

def _pick_node(adj: dict[int, dict[int, object]]):
    degrees = sorted((len(nbrs), node) for node, nbrs in adj.items())
    min_deg, node = degrees[0]
    if min_deg <= 2:
        return node, min_deg
    # All degrees >= 3: condition on the busiest replica instead.
    max_deg, node = max((len(nbrs), node) for node, nbrs in adj.items())
    return node, max_deg


def _predict_cost(adj: dict[int, set[int]], volume: int) -> float:
    """Mirror the elimination strategy on the bare graph and sum step costs."""
    adj = {n: set(s) for n, s in adj.items()}
    cost = 0.0
    while adj:
        node, deg = _pick_node({n: dict.fromkeys(s) for n, s in adj.items()})
        nbrs = adj.pop(node)
        for nb in nbrs:
            adj[nb].discard(node)
        if deg == 0:
            cost += 2.0 ** volume
        elif deg == 1:
            cost += 4.0 ** volume
        elif deg == 2:
            cost += 8.0 ** volume
            a, b = sorted(nbrs)
            adj[a].add(b)
            adj[b].add(a)
        else:
            cost += 2.0 ** volume * (deg * 2.0 ** volume + _predict_cost(adj, volume))
            break
    return cost


def _eliminate(weights: WeightTable, unary: dict[int, np.ndarray],
               edges: dict[frozenset, object]) -> float:
    adj: dict[int, dict[int, object]] = {n: {} for n in unary}
    for key, factor in edges.items():
        a, b = sorted(key)
        adj[a][b] = factor
        adj[b][a] = factor

    scalar = 1.0
    while adj:
        node, deg = _pick_node(adj)
        nbrs = adj.pop(node)
        p = unary.pop(node)
        if deg == 0:
            scalar *= float(p.sum())
        elif deg == 1:
            (nb, factor), = nbrs.items()
            del adj[nb][node]
            unary[nb] = unary[nb] * _edge_matvec(weights, factor, p)
        elif deg == 2:
            (na, fa), (nb, fb) = nbrs.items()
            del adj[na][node]
            del adj[nb][node]
            message = np.einsum("k,kl,km->lm", p,
                                _edge_dense(weights, fa), _edge_dense(weights, fb))
            if na > nb:
                message = message.T
                na, nb = nb, na
            existing = adj[na].get(nb)
            if existing is not None:
                message = message * _edge_dense(weights, existing)
            adj[na][nb] = message
            adj[nb][na] = message.T
        else:
            # Condition on this replica's configuration and recurse.
            for nb in nbrs:
                del adj[nb][node]
            total = 0.0
            for code in range(p.shape[0]):
                w = p[code]
                if w == 0.0:
                    continue
                sub_unary = dict(unary)
                for nb, factor in nbrs.items():
                    sub_unary[nb] = sub_unary[nb] * _edge_column(weights, factor, code)
                sub_edges = {frozenset((a, b)): f
                             for a, nb_map in adj.items() for b, f in nb_map.items() if a < b}
                total += w * _eliminate(weights, sub_unary, sub_edges)
            return scalar * total
    return scalar


def _validate_labels(poly: OverlapPolynomial, attach: AttachmentSpec):
    labels = poly.labels() | set(attach.energy_replicas)
    if any(lab < 1 for lab in labels):
        raise UsageError("replica labels must be >= 1")


def _monomial_expectation(weights: WeightTable, mono: OverlapMonomial,
                          attach: AttachmentSpec, cost_cap: float) -> float:
    labels = sorted(mono.labels() | set(attach.energy_replicas))
    if not labels:
        return 1.0
    base = weights.probabilities
    unary: dict[int, np.ndarray] = {}
    for lab in labels:
        if lab in attach.energy_replicas:
            unary[lab] = base * weights.energy_per_scale
        else:
            unary[lab] = base
    edges: dict[frozenset, object] = {frozenset(pair): exp for pair, exp in mono.factors}

    graph = {lab: set() for lab in labels}
    for key in edges:
        a, b = sorted(key)
        graph[a].add(b)
        graph[b].add(a)
    predicted = _predict_cost(graph, weights.model.volume)
    if predicted > cost_cap:
        raise CapacityError(
            f"predicted elimination cost {predicted:.3g} exceeds cap {cost_cap:.3g} "
            f"for monomial {mono}")
    return _eliminate(weights, unary, edges)


def replica_expectation(weights: WeightTable, poly: OverlapPolynomial,
                        attach: AttachmentSpec = NO_ATTACHMENT,
                        cost_cap: float = ELIMINATION_COST_CAP) -> float:
    """Omega_lambda(G * product of attachments) under the R-fold product of
    the table's normalized Boltzmann weights.  Exact up to rounding."""
    _validate_labels(poly, attach)
    total = 0.0
    for mono, coeff in sorted(poly.terms.items(), key=lambda mc: mc[0].factors):
        total += coeff * _monomial_expectation(weights, mono, attach, cost_cap)
    return total


def naive_replica_expectation(weights: WeightTable, poly: OverlapPolynomial,
                              attach: AttachmentSpec = NO_ATTACHMENT) -> float:
    """Direct sum over all R-tuples of configurations; the engine's test
    oracle.  Refuses state spaces beyond 2^30 tuples."""
    _validate_labels(poly, attach)
    labels = sorted(poly.labels() | set(attach.energy_replicas))
    R = max(labels) if labels else 1
    if weights.model.volume * R > 30:
        raise CapacityError(
            f"naive oracle needs 2^{weights.model.volume * R} tuples (cap 2^30)")
    base = weights.probabilities
    vectors = []
    for lab in range(1, R + 1):
        v = base * weights.energy_per_scale if lab in attach.energy_replicas else base
        vectors.append(v)

    total = 0.0
    letters = "abcdefghijklmnop"
    for mono, coeff in poly.terms.items():
        operands = list(vectors)
        subs = [letters[i] for i in range(R)]
        for (k, l), exp in mono.factors:
            Q = _dense_overlap_power(weights.model, exp)
            operands.append(Q)
            subs.append(letters[k - 1] + letters[l - 1])
        expr = ",".join(subs) + "->"
        total += coeff * float(np.einsum(expr, *operands, optimize=False))
    return total
