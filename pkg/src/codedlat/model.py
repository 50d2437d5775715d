"""Shared parameter types, validation, and the seeded sampling primitives.

Every stochastic engine in this package consumes the same frozen parameter
objects and the same reproducibility contract: a 64-bit master seed plus a
deterministic substream derivation, so results never depend on execution
order or on how many workers run trials concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "UNLIMITED",
    "RangeError",
    "DivisibilityError",
    "PreconditionError",
    "ConsistencyError",
    "SystemParams",
    "RetransmissionPolicy",
    "ConstraintSet",
    "EstimateWithCI",
    "validate",
    "uncoded_erasure",
    "sample_exponential",
    "sample_geometric",
    "sample_erlang",
    "substream",
    "iter_blocks",
    "load_config",
]

#: Explicit "no cap on retransmissions" marker.  Stored as math.inf so the
#: usual comparisons (gamma >= m/k, gamma <= gamma_t) work unchanged.
UNLIMITED = math.inf


class RangeError(ValueError):
    """A parameter is outside its admissible range."""


class DivisibilityError(ValueError):
    """A workload split would produce fractional shards."""


class PreconditionError(ValueError):
    """An operation was called outside its stated precondition."""


class ConsistencyError(RuntimeError):
    """Two internally redundant computations disagree."""


@dataclass(frozen=True)
class SystemParams:
    """System tuple (n, k, m, mu1, mu2, epsilon) shared by every engine.

    n        -- number of worker nodes
    k        -- code dimension: results from any k workers finish the task
    m        -- total number of inner products in the task
    mu1      -- completion rate of a single inner product (1/time)
    mu2      -- transmission rate of a single packet (1/time)
    epsilon  -- probability that any one packet transmission is erased
    """

    n: int
    k: int
    m: int
    mu1: float
    mu2: float
    epsilon: float

    def __post_init__(self):
        validate(self)

    @property
    def shard_size(self) -> int:
        """Inner products per worker, m/k (packets each worker must deliver)."""
        return self.m // self.k

    @property
    def comp_rate(self) -> float:
        """Rate of a worker's total computation time, (k/m) * mu1."""
        return self.k * self.mu1 / self.m

    @property
    def comm_rate(self) -> float:
        """Effective per-packet delivery rate with retransmissions, (1-epsilon) * mu2."""
        return (1.0 - self.epsilon) * self.mu2

    def replace(self, **kwargs) -> "SystemParams":
        fields = dict(n=self.n, k=self.k, m=self.m, mu1=self.mu1, mu2=self.mu2, epsilon=self.epsilon)
        fields.update(kwargs)
        return SystemParams(**fields)


def validate(params: SystemParams) -> None:
    """Check all SystemParams invariants; raise on the first violation.

    Raises DivisibilityError if k does not divide m, RangeError for any
    out-of-range field.  k must divide m exactly: engines agree on an
    integer shard size rather than silently rounding.
    """
    n, k, m = params.n, params.k, params.m
    if not (isinstance(n, (int, np.integer)) and isinstance(k, (int, np.integer)) and isinstance(m, (int, np.integer))):
        raise RangeError(f"n, k, m must be integers, got ({n!r}, {k!r}, {m!r})")
    if n < 1:
        raise RangeError(f"worker count n must be >= 1, got {n}")
    if not 1 <= k <= n:
        raise RangeError(f"code dimension k must satisfy 1 <= k <= n, got k={k}, n={n}")
    if m < 1:
        raise RangeError(f"workload m must be >= 1, got {m}")
    if m % k != 0:
        raise DivisibilityError(f"k={k} does not divide m={m}; fractional shards are rejected")
    if not params.mu1 > 0:
        raise RangeError(f"mu1 must be positive, got {params.mu1}")
    if not params.mu2 > 0:
        raise RangeError(f"mu2 must be positive, got {params.mu2}")
    if not 0.0 <= params.epsilon < 1.0:
        raise RangeError(f"epsilon must lie in [0, 1), got {params.epsilon}")


@dataclass(frozen=True)
class RetransmissionPolicy:
    """Per-worker transmission cap gamma and optional system-wide cap gamma_t.

    gamma = UNLIMITED means workers retransmit until every packet is
    delivered.  A finite gamma below a worker's shard size is legal but makes
    that worker's success probability exactly zero.
    """

    gamma: float = UNLIMITED
    gamma_t: float | None = None

    def __post_init__(self):
        g = self.gamma
        if g != UNLIMITED and (not isinstance(g, (int, np.integer)) or g < 1):
            raise RangeError(f"gamma must be a positive integer or UNLIMITED, got {g!r}")
        if self.gamma_t is not None:
            gt = self.gamma_t
            if not isinstance(gt, (int, np.integer)) or gt < 1:
                raise RangeError(f"gamma_t must be a positive integer, got {gt!r}")
            if g != UNLIMITED and g > gt:
                raise RangeError(f"gamma={g} exceeds the bandwidth cap gamma_t={gt}")

    @property
    def is_unlimited(self) -> bool:
        return self.gamma == UNLIMITED


@dataclass(frozen=True)
class ConstraintSet:
    """Risk level alpha, success slack delta, and latency budget tau_t."""

    alpha: float
    delta: float
    tau_t: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise RangeError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not 0.0 <= self.delta <= 1.0:
            raise RangeError(f"delta must lie in [0, 1], got {self.delta}")
        if not self.tau_t > 0:
            raise RangeError(f"tau_t must be positive, got {self.tau_t}")


@dataclass(frozen=True)
class EstimateWithCI:
    """Monte Carlo point estimate with its normal-approximation standard error.

    Reproducible: the same (seed, trials) pair yields a bit-identical mean.
    """

    mean: float
    std_error: float
    trials: int
    seed: int

    def __post_init__(self):
        if self.trials < 1:
            raise RangeError(f"trials must be >= 1, got {self.trials}")
        if not self.std_error >= 0:
            raise RangeError(f"std_error must be >= 0, got {self.std_error}")


def uncoded_erasure(epsilon: float, k: int, n: int) -> float:
    """Erasure probability seen by the uncoded scheme's longer-fraction packets.

    When the same task is spread over all n workers without coding, each
    worker's payload shrinks by k/n, so its packet occupies a k/n fraction of
    the coded packet length l.  With a fixed bit-error rate eps_b, the coded
    scheme sees epsilon = 1-(1-eps_b)^l and the uncoded scheme sees
    1-(1-eps_b)^(l*k/n); eliminating eps_b between the two gives

        epsilon' = 1 - (1 - epsilon)^(k/n)

    so neither l nor eps_b ever needs to be supplied.
    """
    if not 0.0 <= epsilon < 1.0:
        raise RangeError(f"epsilon must lie in [0, 1), got {epsilon}")
    if not 1 <= k <= n:
        raise RangeError(f"need 1 <= k <= n, got k={k}, n={n}")
    return -math.expm1((k / n) * math.log1p(-epsilon))


def sample_exponential(rate: float, rng: np.random.Generator, size=None):
    """Draw from Exponential(rate); mean 1/rate."""
    if not rate > 0:
        raise RangeError(f"rate must be positive, got {rate}")
    return rng.exponential(1.0 / rate, size=size)


def sample_geometric(success_prob: float, rng: np.random.Generator, size=None):
    """Number of Bernoulli(success_prob) attempts up to and including the first success."""
    if not 0.0 < success_prob <= 1.0:
        raise RangeError(f"success_prob must lie in (0, 1], got {success_prob}")
    if success_prob == 1.0:
        return 1 if size is None else np.ones(size, dtype=np.int64)
    return rng.geometric(success_prob, size=size)


def sample_erlang(shape: int, rate: float, rng: np.random.Generator, size=None):
    """Sum of `shape` independent Exponential(rate) variables."""
    if not (isinstance(shape, (int, np.integer)) and shape >= 1):
        raise RangeError(f"shape must be a positive integer, got {shape!r}")
    if not rate > 0:
        raise RangeError(f"rate must be positive, got {rate}")
    return rng.gamma(shape, 1.0 / rate, size=size)


_SEED_MASK = (1 << 64) - 1


def substream(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for (seed, path).

    Paths index blocks of trials (and grid cells), so any partition of the
    work across processes reproduces the same draws.  Path components are
    folded into the SeedSequence spawn key.
    """
    key = tuple(int(p) & 0xFFFFFFFF for p in path)
    ss = np.random.SeedSequence(entropy=int(seed) & _SEED_MASK, spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


#: Trials per substream block.  Fixed: estimates are a function of
#: (seed, trials) alone, whatever the execution schedule.
BLOCK_TRIALS = 8192


def iter_blocks(trials: int, block: int = BLOCK_TRIALS):
    """Yield (block_index, block_size) pairs covering `trials`."""
    if trials < 1:
        raise RangeError(f"trials must be >= 1, got {trials}")
    index = 0
    done = 0
    while done < trials:
        size = min(block, trials - done)
        yield index, size
        index += 1
        done += size


def load_config(doc: dict):
    """Build (SystemParams, RetransmissionPolicy, ConstraintSet | None) from a JSON document.

    Recognised keys: n, k, m, mu1, mu2, epsilon, gamma, gamma_t, alpha,
    delta, tau_t.  A missing or null gamma means UNLIMITED; the constraint
    set is returned only when all three of alpha/delta/tau_t are present.
    """
    try:
        params = SystemParams(
            n=int(doc["n"]),
            k=int(doc["k"]),
            m=int(doc["m"]),
            mu1=float(doc["mu1"]),
            mu2=float(doc["mu2"]),
            epsilon=float(doc["epsilon"]),
        )
    except KeyError as exc:
        raise RangeError(f"config is missing required key {exc}") from exc
    gamma = doc.get("gamma")
    gamma = UNLIMITED if gamma in (None, "unlimited") else int(gamma)
    gamma_t = doc.get("gamma_t")
    policy = RetransmissionPolicy(gamma=gamma, gamma_t=None if gamma_t is None else int(gamma_t))
    constraints = None
    if all(key in doc and doc[key] is not None for key in ("alpha", "delta", "tau_t")):
        constraints = ConstraintSet(alpha=float(doc["alpha"]), delta=float(doc["delta"]), tau_t=float(doc["tau_t"]))
    return params, policy, constraints
