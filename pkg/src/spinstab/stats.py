"""Estimates, error bars, and the parallel sample map.

Disorder samples are i.i.d., so plain standard errors apply across samples.
Correlated Markov-chain series get blocking error bars; nonlinear
combinations of disorder means get delete-one jackknife errors.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

TOLERANCE_FLOOR = 1e-10


@dataclass(frozen=True)
class Estimate:
    """(mean, standard error, sample count) of a disorder-averaged quantity."""

    mean: float
    stderr: float
    n_samples: int

    @classmethod
    def from_samples(cls, values: np.ndarray) -> "Estimate":
        values = np.asarray(values, dtype=np.float64)
        n = values.shape[0]
        stderr = float(values.std(ddof=1) / np.sqrt(n)) if n >= 2 else 0.0
        return cls(mean=float(values.mean()), stderr=stderr, n_samples=n)

    def combined_stderr(self, other: "Estimate") -> float:
        return float(np.hypot(self.stderr, other.stderr))

    def agrees_with(self, other: "Estimate", n_sigma: float = 3.0,
                    floor: float = TOLERANCE_FLOOR) -> bool:
        return abs(self.mean - other.mean) <= n_sigma * self.combined_stderr(other) + floor

    def to_dict(self) -> dict:
        return {"mean": self.mean, "stderr": self.stderr, "n_samples": self.n_samples}


def jackknife_stderr(loo_values: np.ndarray) -> float:
    """Standard error from delete-one estimates of a statistic."""
    loo = np.asarray(loo_values, dtype=np.float64)
    n = loo.shape[0]
    if n < 2:
        return 0.0
    return float(np.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))


def loo_means(values: np.ndarray) -> np.ndarray:
    """Delete-one means of a sample array, vectorized."""
    values = np.asarray(values, dtype=np.float64)
    n = values.shape[0]
    return (values.sum() - values) / (n - 1)


def blocking_stderr(series: np.ndarray, min_blocks: int = 16) -> float:
    """Flyvbjerg-Petersen blocking error of the mean of a correlated series.

    Halves the block count until fewer than min_blocks remain and returns
    the largest level estimate (the plateau bounds the true error from
    below at small blocks).
    """
    x = np.asarray(series, dtype=np.float64)
    best = 0.0
    while x.shape[0] >= min_blocks:
        n = x.shape[0]
        best = max(best, float(x.std(ddof=1) / np.sqrt(n)))
        if n % 2:
            x = x[:-1]
        x = 0.5 * (x[0::2] + x[1::2])
    return best


def blocking_curve(series: np.ndarray, min_blocks: int = 16) -> np.ndarray:
    """Per-level blocking stderr estimates, smallest blocks first."""
    x = np.asarray(series, dtype=np.float64)
    out = []
    while x.shape[0] >= min_blocks:
        out.append(float(x.std(ddof=1) / np.sqrt(x.shape[0])))
        if x.shape[0] % 2:
            x = x[:-1]
        x = 0.5 * (x[0::2] + x[1::2])
    return np.asarray(out)


def integrated_autocorr(series: np.ndarray, max_lag: int | None = None) -> float:
    """Integrated autocorrelation time, summing until the first negative
    autocorrelation estimate."""
    x = np.asarray(series, dtype=np.float64)
    x = x - x.mean()
    n = x.shape[0]
    var = float(x @ x) / n
    if var == 0.0 or n < 4:
        return 1.0
    tau = 1.0
    for lag in range(1, max_lag or n // 4):
        rho = float(x[:-lag] @ x[lag:]) / ((n - lag) * var)
        if rho <= 0.0:
            break
        tau += 2.0 * rho
    return tau


def default_threads() -> int:
    env = os.environ.get("SPINSTAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def sample_map(fn, n_samples: int, threads: int = 1) -> np.ndarray:
    """Evaluate fn(index) for index = 0..n-1, optionally across a thread
    pool, and return results in ascending index order.  Reduction order is
    therefore independent of the worker count, so downstream means are
    bit-identical for any `threads`."""
    if threads <= 1 or n_samples < 4:
        return np.asarray([fn(i) for i in range(n_samples)], dtype=np.float64)
    chunk = max(1, (n_samples + 4 * threads - 1) // (4 * threads))
    ranges = [(s, min(s + chunk, n_samples)) for s in range(0, n_samples, chunk)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda r: [fn(i) for i in range(r[0], r[1])], ranges))
    flat = [row for part in parts for row in part]
    return np.asarray(flat, dtype=np.float64)
