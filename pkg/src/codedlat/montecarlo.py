"""Seeded Monte Carlo sampling of coded and uncoded overall run-times.

A worker's run-time is its computation time plus its communication time; the
coded task finishes at the k-th smallest worker total, the uncoded task at
the largest.  Communication is sampled structurally by default: a geometric
number of transmission attempts per packet, each attempt Exponential(mu2).
The per-packet collapse of that sum into a single exponential is therefore a
property under test here, not an assumption; the collapsed sampler is an
opt-in fast path.

Trials are grouped into fixed-size blocks, each drawing from its own
substream of the master seed, so estimates depend only on (seed, trials) and
never on scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import kth_min_sum
from .model import (
    DivisibilityError,
    EstimateWithCI,
    RangeError,
    SystemParams,
    iter_blocks,
    sample_exponential,
    sample_geometric,
    substream,
    uncoded_erasure,
)

__all__ = [
    "TrialOutcome",
    "sample_worker_times",
    "sample_trial",
    "sample_runtime",
    "sample_comm_times",
    "runtime_samples",
    "uncoded_runtime_samples",
    "estimate_expected_runtime",
    "estimate_uncoded_runtime",
]

_TAG_CODED = 0xC0DE
_TAG_UNCODED = 0x10AD
_TAG_COMM = 0x5E9D

_METHODS = ("structural", "collapsed")


@dataclass(frozen=True)
class TrialOutcome:
    """One realized task: total run-time plus optional per-worker components."""

    runtime: float
    per_worker: tuple[tuple[float, float], ...] | None = None


def sample_worker_times(params: SystemParams, rng: np.random.Generator):
    """One trial's per-worker computation and communication time vectors.

    Literal construction: X_i ~ Exponential((k/m) mu1); S_i accumulates, for
    each of the m/k packets, a Geometric(1-eps) number of attempt times,
    each Exponential(mu2).
    """
    n = params.n
    X = sample_exponential(params.comp_rate, rng, size=n)
    S = np.empty(n)
    for i in range(n):
        total = 0.0
        for _ in range(params.shard_size):
            attempts = sample_geometric(1.0 - params.epsilon, rng)
            total += sample_exponential(params.mu2, rng, size=attempts).sum()
        S[i] = total
    return X, S


def sample_trial(params: SystemParams, rng: np.random.Generator) -> TrialOutcome:
    """One full trial with per-worker detail retained."""
    X, S = sample_worker_times(params, rng)
    runtime = kth_min_sum(X, S, params.k)
    return TrialOutcome(runtime=runtime, per_worker=tuple(zip(X.tolist(), S.tolist())))


def sample_runtime(params: SystemParams, rng: np.random.Generator) -> float:
    """One coded run-time: the k-th smallest of the per-worker totals."""
    X, S = sample_worker_times(params, rng)
    return kth_min_sum(X, S, params.k)


def _attempt_counts(rng, shape: int, epsilon: float, size):
    """Total transmissions to deliver `shape` packets: shape + negative-binomial failures."""
    if epsilon == 0.0:
        return np.full(size, shape, dtype=np.int64)
    return shape + rng.negative_binomial(shape, 1.0 - epsilon, size=size)


def _comm_block(params: SystemParams, rng, size, method: str):
    if method == "structural":
        counts = _attempt_counts(rng, params.shard_size, params.epsilon, size)
        return rng.standard_gamma(counts) / params.mu2
    if method == "collapsed":
        return rng.standard_gamma(params.shard_size, size=size) / params.comm_rate
    raise RangeError(f"method must be one of {_METHODS}, got {method!r}")


def sample_comm_times(params: SystemParams, trials: int, seed: int, method: str = "structural") -> np.ndarray:
    """Vectorized draws of one worker's total communication time S_i."""
    out = np.empty(trials)
    pos = 0
    for block, size in iter_blocks(trials):
        rng = substream(seed, _TAG_COMM, block)
        out[pos:pos + size] = _comm_block(params, rng, size, method)
        pos += size
    return out


def runtime_samples(params: SystemParams, trials: int, seed: int, method: str = "structural") -> np.ndarray:
    """Vectorized coded run-time draws T = kth-min(X_i + S_i)."""
    n, k = params.n, params.k
    out = np.empty(trials)
    pos = 0
    for block, size in iter_blocks(trials):
        rng = substream(seed, _TAG_CODED, block)
        X = rng.exponential(1.0 / params.comp_rate, size=(size, n))
        S = _comm_block(params, rng, (size, n), method)
        out[pos:pos + size] = np.partition(X + S, k - 1, axis=1)[:, k - 1]
        pos += size
    return out


def uncoded_runtime_samples(params: SystemParams, trials: int, seed: int) -> np.ndarray:
    """Vectorized uncoded run-time draws: the slowest of n equal-split workers.

    k = m: each worker gets a k/n fraction of one shard; computation rate
    (n/k) mu1, one packet per worker at rate (n/k) mu2 with erasure
    eps' = 1 - (1-eps)^(k/n).  General k: the coded sampler at code
    dimension n (shards of m/n single-inner-product packets, erasure
    unchanged), which requires n | m.
    """
    n, k, m = params.n, params.k, params.m
    out = np.empty(trials)
    if k == m:
        eps_u = uncoded_erasure(params.epsilon, k, n)
        comp_scale = k / (n * params.mu1)
        attempt_scale = k / (n * params.mu2)
        pos = 0
        for block, size in iter_blocks(trials):
            rng = substream(seed, _TAG_UNCODED, block)
            X = rng.exponential(comp_scale, size=(size, n))
            counts = 1 if eps_u == 0.0 else rng.geometric(1.0 - eps_u, size=(size, n))
            S = rng.standard_gamma(counts, size=(size, n)) * attempt_scale
            out[pos:pos + size] = np.max(X + S, axis=1)
            pos += size
        return out

    if m % n != 0:
        raise DivisibilityError(f"uncoded comparison at general k needs n | m, got n={n}, m={m}")
    full_rate = SystemParams(n=n, k=n, m=m, mu1=params.mu1, mu2=params.mu2, epsilon=params.epsilon)
    pos = 0
    for block, size in iter_blocks(trials):
        rng = substream(seed, _TAG_UNCODED, block)
        X = rng.exponential(1.0 / full_rate.comp_rate, size=(size, n))
        S = _comm_block(full_rate, rng, (size, n), "structural")
        out[pos:pos + size] = np.max(X + S, axis=1)
        pos += size
    return out


def _estimate(samples: np.ndarray, trials: int, seed: int) -> EstimateWithCI:
    mean = float(np.mean(samples))
    std_error = float(np.std(samples, ddof=1) / math.sqrt(trials))
    return EstimateWithCI(mean=mean, std_error=std_error, trials=trials, seed=seed)


def estimate_expected_runtime(
    params: SystemParams, trials: int = 100_000, seed: int = 0, method: str = "structural"
) -> EstimateWithCI:
    """Monte Carlo estimate of the expected coded run-time E[T]."""
    if trials < 100:
        raise RangeError(f"need at least 100 trials for a CI, got {trials}")
    return _estimate(runtime_samples(params, trials, seed, method), trials, seed)


def estimate_uncoded_runtime(params: SystemParams, trials: int = 100_000, seed: int = 0) -> EstimateWithCI:
    """Monte Carlo estimate of the expected uncoded run-time E[T_uncoded]."""
    if trials < 100:
        raise RangeError(f"need at least 100 trials for a CI, got {trials}")
    return _estimate(uncoded_runtime_samples(params, trials, seed), trials, seed)
