"""Gaussian spin-glass models: Sherrington-Kirkpatrick and Edwards-Anderson.

Defines the model geometry, Hamiltonian H, independent perturbation field K,
overlap kernel Q, covariance scale s (Av[H(sigma)H(tau)] = s * Q(sigma,tau)),
and i.i.d. standard-normal disorder sampling.

Spin configurations are bit-packed integers: bit i of the code is site i
(little-endian, row-major site order for lattices), bit value 1 <-> spin +1.
Most operations also accept an explicit +-1 spin vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import UsageError
from .streams import DisorderStream

PERIODIC = "periodic"
FREE = "free"

# Block length for sweeps over the full configuration space.
_ENUM_BLOCK = 1 << 14


@dataclass(frozen=True)
class ModelSpec:
    """Which Gaussian model: SK with n_spins sites, or an EA lattice.

    For EA, ``side_lengths`` are the lattice extents (every side >= 2) and
    ``boundary`` is "periodic" (default) or "free".
    """

    kind: str  # "sk" | "ea"
    n_spins: int = 0
    side_lengths: tuple[int, ...] = ()
    boundary: str = PERIODIC

    def __post_init__(self):
        if self.kind == "sk":
            if self.n_spins < 1:
                raise UsageError("SK model needs n_spins >= 1")
        elif self.kind == "ea":
            if len(self.side_lengths) < 1:
                raise UsageError("EA model needs at least one side length")
            if any(L < 2 for L in self.side_lengths):
                raise UsageError("EA side lengths must all be >= 2")
            if self.boundary not in (PERIODIC, FREE):
                raise UsageError(f"unknown boundary {self.boundary!r}")
        else:
            raise UsageError(f"unknown model kind {self.kind!r}")

    @classmethod
    def sk(cls, n_spins: int) -> "ModelSpec":
        return cls(kind="sk", n_spins=int(n_spins))

    @classmethod
    def ea(cls, side_lengths, boundary: str = PERIODIC) -> "ModelSpec":
        return cls(kind="ea", side_lengths=tuple(int(L) for L in side_lengths),
                   boundary=boundary)

    @property
    def volume(self) -> int:
        if self.kind == "sk":
            return self.n_spins
        return math.prod(self.side_lengths)

    @property
    def dimension(self) -> int:
        if self.kind != "ea":
            raise UsageError("dimension is defined only for EA models")
        return len(self.side_lengths)

    @property
    def bond_count(self) -> int:
        return len(bonds(self))

    def describe(self) -> str:
        if self.kind == "sk":
            return f"sk:{self.n_spins}"
        dims = "x".join(str(L) for L in self.side_lengths)
        return f"ea:{dims}:{self.boundary}"


def model_from_string(text: str) -> ModelSpec:
    """Parse a model descriptor: "sk:8", "ea:3x3", "ea:4x4:free"."""
    parts = text.strip().lower().split(":")
    try:
        if parts[0] == "sk" and len(parts) == 2:
            return ModelSpec.sk(int(parts[1]))
        if parts[0] == "ea" and len(parts) in (2, 3):
            sides = [int(tok) for tok in parts[1].split("x")]
            boundary = parts[2] if len(parts) == 3 else PERIODIC
            return ModelSpec.ea(sides, boundary)
    except ValueError as exc:
        raise UsageError(f"bad model descriptor {text!r}: {exc}") from exc
    raise UsageError(f"bad model descriptor {text!r} (want sk:N or ea:LxL[:boundary])")


@dataclass(frozen=True)
class DisorderSample:
    """One joint realization of main couplings (for H) and perturbation
    couplings (for K).  SK: full N x N tables over ordered site pairs,
    diagonal included.  EA: one entry per bond."""

    main: np.ndarray
    perturbation: np.ndarray

    def __post_init__(self):
        if self.main.shape != self.perturbation.shape:
            raise UsageError("main and perturbation couplings must share a shape")


@lru_cache(maxsize=None)
def bonds(model: ModelSpec) -> np.ndarray:
    """Nearest-neighbor bonds of an EA lattice as an (|B|, 2) site-index array.

    Periodic boundaries emit one bond per (site, direction), |B| = d * V
    (pairs are doubled on side length 2, matching the covariance count).
    """
    if model.kind != "ea":
        raise UsageError("bonds are defined only for EA models")
    sides = model.side_lengths
    pairs = []
    for flat in range(model.volume):
        coords = list(np.unravel_index(flat, sides))
        for axis, L in enumerate(sides):
            if coords[axis] + 1 < L:
                nb = coords.copy()
                nb[axis] += 1
            elif model.boundary == PERIODIC:
                nb = coords.copy()
                nb[axis] = 0
            else:
                continue
            pairs.append((flat, int(np.ravel_multi_index(nb, sides))))
    out = np.asarray(pairs, dtype=np.int64)
    out.setflags(write=False)
    return out


def covariance_scale(model: ModelSpec) -> float:
    """Scale s in Av[H(sigma) H(tau)] = s * Q(sigma, tau): N for SK, |B| for EA."""
    if model.kind == "sk":
        return float(model.n_spins)
    return float(model.bond_count)


def coupling_shape(model: ModelSpec) -> tuple[int, ...]:
    if model.kind == "sk":
        return (model.n_spins, model.n_spins)
    return (model.bond_count,)


def sample_disorder(model: ModelSpec, stream: DisorderStream, index: int) -> DisorderSample:
    """Fresh i.i.d. standard-normal couplings; bit-reproducible given
    (stream.seed, index)."""
    rng = stream.rng(int(index))
    shape = coupling_shape(model)
    return DisorderSample(main=rng.standard_normal(shape),
                          perturbation=rng.standard_normal(shape))


# ---------------------------------------------------------------------------
# configuration codecs

def spins_of(config: int, volume: int) -> np.ndarray:
    """Bit-packed code -> +-1 spin vector (int8)."""
    bits = (int(config) >> np.arange(volume)) & 1
    return (2 * bits - 1).astype(np.int8)


def code_of(spins) -> int:
    """+-1 spin vector -> bit-packed code."""
    spins = np.asarray(spins)
    bits = (spins > 0).astype(np.int64)
    return int((bits << np.arange(len(spins))).sum())


def _as_spins(config, volume: int) -> np.ndarray:
    if isinstance(config, (int, np.integer)):
        return spins_of(int(config), volume)
    spins = np.asarray(config)
    if spins.shape != (volume,):
        raise UsageError(f"config length {spins.shape} does not match volume {volume}")
    return spins


@lru_cache(maxsize=8)
def spin_block(volume: int, start: int, stop: int) -> np.ndarray:
    """Spin vectors of configuration codes [start, stop) as a float64 matrix."""
    codes = np.arange(start, stop, dtype=np.int64)
    bits = (codes[:, None] >> np.arange(volume)[None, :]) & 1
    return (2.0 * bits - 1.0)


def _bond_spins(model: ModelSpec, spins: np.ndarray) -> np.ndarray:
    pairs = bonds(model)
    return spins[..., pairs[:, 0]] * spins[..., pairs[:, 1]]


def _check_shapes(model: ModelSpec, disorder: DisorderSample):
    if disorder.main.shape != coupling_shape(model):
        raise UsageError(
            f"disorder shape {disorder.main.shape} does not match model "
            f"{model.describe()} (want {coupling_shape(model)})")


# ---------------------------------------------------------------------------
# Hamiltonian, perturbation, overlap

def hamiltonian(model: ModelSpec, disorder: DisorderSample, config) -> float:
    """Energy H(sigma).

    SK:  -(1/sqrt(N)) sum_{i,j=1..N} J_ij sigma_i sigma_j  (diagonal included).
    EA:  -sum_{bonds b} J_b sigma_b   with sigma_b the bond spin product.
    """
    _check_shapes(model, disorder)
    spins = _as_spins(config, model.volume).astype(np.float64)
    if model.kind == "sk":
        return float(-(spins @ disorder.main @ spins) / math.sqrt(model.n_spins))
    return float(-_bond_spins(model, spins) @ disorder.main)


def perturbation(model: ModelSpec, disorder: DisorderSample, config) -> float:
    """Perturbation field K(sigma), built from the independent couplings so
    that Av[K(sigma)K(tau)] = Q(sigma,tau) exactly.

    SK:  (1/N) sum_{i,j} J'_ij sigma_i sigma_j.
    EA:  (1/sqrt(|B|)) sum_b J'_b sigma_b.
    """
    _check_shapes(model, disorder)
    spins = _as_spins(config, model.volume).astype(np.float64)
    if model.kind == "sk":
        return float((spins @ disorder.perturbation @ spins) / model.n_spins)
    return float(_bond_spins(model, spins) @ disorder.perturbation
                 / math.sqrt(model.bond_count))


def overlap(model: ModelSpec, sigma, tau) -> float:
    """Overlap kernel Q(sigma, tau): squared site overlap for SK, bond overlap
    for EA.  Always 1 on the diagonal and bounded by 1 in absolute value."""
    s = _as_spins(sigma, model.volume).astype(np.float64)
    t = _as_spins(tau, model.volume).astype(np.float64)
    if model.kind == "sk":
        return float(np.mean(s * t) ** 2)
    return float(np.mean(_bond_spins(model, s) * _bond_spins(model, t)))


# ---------------------------------------------------------------------------
# vectorized sweeps over the whole configuration space (used by the engine)

def _blocked(volume: int, fn) -> np.ndarray:
    n = 1 << volume
    out = np.empty(n)
    for start in range(0, n, _ENUM_BLOCK):
        stop = min(start + _ENUM_BLOCK, n)
        out[start:stop] = fn(spin_block(volume, start, stop))
    return out


def energies_all(model: ModelSpec, disorder: DisorderSample) -> np.ndarray:
    """H(sigma) for every configuration code, in code order."""
    _check_shapes(model, disorder)
    if model.kind == "sk":
        J = disorder.main
        root_n = math.sqrt(model.n_spins)
        return _blocked(model.volume,
                        lambda S: -np.einsum("ci,ij,cj->c", S, J, S) / root_n)
    J = disorder.main
    return _blocked(model.volume, lambda S: -_bond_spins(model, S) @ J)


def perturbations_all(model: ModelSpec, disorder: DisorderSample) -> np.ndarray:
    """K(sigma) for every configuration code, in code order."""
    _check_shapes(model, disorder)
    if model.kind == "sk":
        Jp = disorder.perturbation
        return _blocked(model.volume,
                        lambda S: np.einsum("ci,ij,cj->c", S, Jp, S) / model.n_spins)
    Jp = disorder.perturbation
    root_b = math.sqrt(model.bond_count)
    return _blocked(model.volume, lambda S: _bond_spins(model, S) @ Jp / root_b)


def overlap_feature_matrix(model: ModelSpec) -> np.ndarray:
    """Per-configuration feature rows F with Q = (F F^T)**2 / N**2 for SK
    (site spins) or Q = F F^T / |B| for EA (bond spins).  Materialized in
    full; callers block over rows for large volumes."""
    n = 1 << model.volume
    if model.kind == "sk":
        F = np.vstack([spin_block(model.volume, s, min(s + _ENUM_BLOCK, n))
                       for s in range(0, n, _ENUM_BLOCK)])
        return F
    return np.vstack([_bond_spins(model, spin_block(model.volume, s, min(s + _ENUM_BLOCK, n)))
                      for s in range(0, n, _ENUM_BLOCK)])


@lru_cache(maxsize=4)
def _feature_matrix_cached(model: ModelSpec) -> np.ndarray:
    F = overlap_feature_matrix(model)
    F.setflags(write=False)
    return F


def overlap_rows(model: ModelSpec, row_start: int, row_stop: int) -> np.ndarray:
    """Rows [row_start, row_stop) of the full overlap matrix Q."""
    F = _feature_matrix_cached(model)
    block = F[row_start:row_stop] @ F.T
    if model.kind == "sk":
        block /= model.n_spins
        np.square(block, out=block)
    else:
        block /= model.bond_count
    return block


def overlap_with_all(model: ModelSpec, config: int) -> np.ndarray:
    """Q(sigma, .) for a fixed configuration against all codes."""
    F = _feature_matrix_cached(model)
    row = F @ F[int(config)]
    if model.kind == "sk":
        row /= model.n_spins
        np.square(row, out=row)
    else:
        row /= model.bond_count
    return row
