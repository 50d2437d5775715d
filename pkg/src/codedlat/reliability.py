"""Finite-retransmission regime: success probabilities and censored run-times.

With at most gamma transmissions per worker, a worker fails outright when its
m/k packets cannot all be delivered within the budget, and a failed task has
infinite run-time.  The per-worker success probability p is a negative
binomial tail, the system probability P_s a binomial tail over workers; both
are evaluated exactly in log space.  Latency questions (Pr[T' <= tau] and the
risk quantile T^(alpha)) are answered by a seeded simulation engine built
around common random numbers: one set of base draws per trial serves every
erasure probability and every transmission cap, which makes the obvious
monotonicities hold pathwise instead of up to Monte Carlo noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .model import (
    UNLIMITED,
    EstimateWithCI,
    PreconditionError,
    RangeError,
    SystemParams,
    iter_blocks,
    sample_exponential,
    substream,
)

__all__ = [
    "SuccessProfile",
    "CensoredRuntime",
    "worker_success_prob",
    "system_success_prob",
    "sample_censored_comm_time",
    "censored_runtime_samples",
    "censored_sample_grid",
    "runtime_cdf",
    "runtime_cdf_curve",
    "latency_quantile",
    "cdf_estimate",
    "empirical_quantile",
]

_TAG_CENSORED = 0xCE45


@dataclass(frozen=True)
class SuccessProfile:
    """Per-worker and whole-system success probabilities at a given cap."""

    p: float
    p_s: float
    gamma: float

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0 and 0.0 <= self.p_s <= 1.0):
            raise RangeError(f"probabilities out of range: p={self.p}, p_s={self.p_s}")


@dataclass(frozen=True)
class CensoredRuntime:
    """A run-time that may be infinite when the retransmission budget ran out."""

    value: float

    @property
    def is_infinite(self) -> bool:
        return math.isinf(self.value)


def worker_success_prob(params: SystemParams, gamma: float) -> float:
    """Probability one worker delivers all m/k packets within gamma transmissions.

    The number of transmissions needed is negative binomial, so

        p = sum_{i=0}^{gamma - m/k} C(m/k + i - 1, i) (1-eps)^(m/k) eps^i,

    summed in log space term by term.  Returns 0 when gamma < m/k (the
    budget cannot even cover one transmission per packet) and 1 for an
    unlimited budget.
    """
    if gamma == UNLIMITED:
        return 1.0
    if not (isinstance(gamma, (int, np.integer)) and gamma >= 1):
        raise RangeError(f"gamma must be a positive integer or UNLIMITED, got {gamma!r}")
    shape = params.shard_size
    if gamma < shape:
        return 0.0
    eps = params.epsilon
    if eps == 0.0:
        return 1.0
    i = np.arange(0, gamma - shape + 1, dtype=float)
    log_terms = (
        gammaln(shape + i) - gammaln(i + 1) - gammaln(shape)
        + shape * math.log1p(-eps) + i * math.log(eps)
    )
    return float(min(1.0, math.exp(logsumexp(log_terms))))


def system_success_prob(params: SystemParams, gamma: float) -> SuccessProfile:
    """Probability at least k of n workers succeed: the binomial tail at k."""
    p = worker_success_prob(params, gamma)
    n, k = params.n, params.k
    if p == 0.0:
        return SuccessProfile(p=p, p_s=0.0, gamma=gamma)
    if p == 1.0:
        return SuccessProfile(p=p, p_s=1.0, gamma=gamma)
    i = np.arange(k, n + 1, dtype=float)
    log_terms = (
        gammaln(n + 1) - gammaln(i + 1) - gammaln(n - i + 1)
        + i * math.log(p) + (n - i) * math.log1p(-p)
    )
    p_s = float(min(1.0, math.exp(logsumexp(log_terms))))
    return SuccessProfile(p=p, p_s=p_s, gamma=gamma)


def sample_censored_comm_time(params: SystemParams, gamma: int, rng: np.random.Generator) -> CensoredRuntime:
    """One worker's communication time under the cap, packet by packet.

    Transmissions are drawn until m/k deliveries succeed or the budget is
    spent.  On success the elapsed time is the sum of one Exponential(mu2)
    per transmission actually used; on failure the run-time is infinite
    (when it failed no longer matters).
    """
    shape = params.shard_size
    if not (isinstance(gamma, (int, np.integer)) and gamma >= shape):
        raise PreconditionError(f"need gamma >= m/k = {shape}, got {gamma!r}")
    delivered = 0
    used = 0
    while delivered < shape and used < gamma:
        used += 1
        if rng.random() >= params.epsilon:
            delivered += 1
    if delivered < shape:
        return CensoredRuntime(math.inf)
    total = sample_exponential(params.mu2, rng, size=used).sum()
    return CensoredRuntime(float(total))


# --- vectorized censored-run-time engine --------------------------------------


def _attempts_from_uniforms(U: np.ndarray, epsilon: float) -> np.ndarray:
    """Per-packet transmission counts via inverse-CDF coupling.

    N = ceil(log(1-U) / log(eps)) is Geometric(1-eps) in U and, for a fixed
    U, nondecreasing in eps -- the coupling that makes censored run-times
    pathwise monotone across an erasure grid.
    """
    if epsilon == 0.0:
        return np.ones(U.shape, dtype=np.int64)
    counts = np.ceil(np.log1p(-U) / math.log(epsilon)).astype(np.int64)
    return np.maximum(counts, 1)


def censored_sample_grid(
    params: SystemParams,
    epsilons,
    gammas,
    trials: int,
    seed: int,
    slab_shape: int | None = None,
    slab_cap: int | None = None,
) -> np.ndarray:
    """Censored run-time samples over an (epsilon, gamma) grid, shape
    (len(epsilons), len(gammas), trials), float32, inf marking failures.

    All cells are derived from one set of base draws per trial block:
    standard exponentials for computation, per-packet uniforms for erasures,
    and cumulative attempt times.  Consequences, exact per path: samples are
    nondecreasing in epsilon and nonincreasing in gamma, and two calls with
    matching (seed, trials, slab_shape, slab_cap) share randomness even for
    different k, which is what grid optimizers need for noise-free
    comparisons.  params.epsilon is ignored in favour of the grid.
    """
    n, k = params.n, params.k
    shape = params.shard_size
    epsilons = [float(e) for e in epsilons]
    gammas = [int(g) for g in gammas]
    if not epsilons or not gammas:
        raise RangeError("need at least one epsilon and one gamma")
    if any(not 0.0 <= e < 1.0 for e in epsilons):
        raise RangeError(f"epsilons must lie in [0, 1), got {epsilons}")
    if min(gammas) < shape:
        raise PreconditionError(f"every gamma must be >= m/k = {shape}, got {gammas}")
    slab_shape = shape if slab_shape is None else int(slab_shape)
    slab_cap = max(gammas) if slab_cap is None else int(slab_cap)
    if slab_shape < shape or slab_cap < max(gammas):
        raise RangeError("slab dimensions must cover the requested shard size and caps")

    comp_scale = 1.0 / params.comp_rate
    out = np.empty((len(epsilons), len(gammas), trials), dtype=np.float32)
    pos = 0
    for block, size in iter_blocks(trials):
        rng = substream(seed, _TAG_CENSORED, block)
        comp_std = rng.standard_exponential((size, n))
        U = rng.random((size, n, slab_shape))
        attempt_cum = np.cumsum(rng.standard_exponential((size, n, slab_cap)), axis=2)
        X = comp_std * comp_scale
        for ei, eps in enumerate(epsilons):
            counts = _attempts_from_uniforms(U[:, :, :shape], eps).sum(axis=2)
            gather = np.minimum(counts, slab_cap) - 1
            finish = np.take_along_axis(attempt_cum, gather[:, :, None], axis=2)[:, :, 0] / params.mu2
            for gi, gamma in enumerate(gammas):
                total = np.where(counts <= gamma, X + finish, np.inf)
                out[ei, gi, pos:pos + size] = np.partition(total, k - 1, axis=1)[:, k - 1]
        pos += size
    return out


def censored_runtime_samples(params: SystemParams, gamma: int, trials: int, seed: int) -> np.ndarray:
    """Censored run-time draws T' at the parameters' own erasure probability."""
    grid = censored_sample_grid(params, [params.epsilon], [gamma], trials, seed)
    return grid[0, 0].astype(np.float64)


def cdf_estimate(samples: np.ndarray, tau: float, trials: int, seed: int) -> EstimateWithCI:
    """Empirical Pr[sample <= tau] with its binomial standard error."""
    hits = float(np.count_nonzero(samples <= tau))
    p_hat = hits / trials
    std_error = math.sqrt(p_hat * (1.0 - p_hat) / (trials - 1)) if trials > 1 else 0.0
    return EstimateWithCI(mean=p_hat, std_error=std_error, trials=trials, seed=seed)


def runtime_cdf(params: SystemParams, gamma: int, tau: float, trials: int, seed: int) -> EstimateWithCI:
    """Estimate Pr[T' <= tau]; infinite run-times count as failures."""
    if not tau > 0:
        raise RangeError(f"tau must be positive, got {tau}")
    samples = censored_runtime_samples(params, gamma, trials, seed)
    return cdf_estimate(samples, tau, trials, seed)


def runtime_cdf_curve(params: SystemParams, gammas, tau: float, trials: int, seed: int) -> list[EstimateWithCI]:
    """Pr[T' <= tau] across a gamma grid under common random numbers.

    Sharing draws across the grid makes the curve nondecreasing in gamma
    exactly, not merely in expectation.
    """
    if not tau > 0:
        raise RangeError(f"tau must be positive, got {tau}")
    grid = censored_sample_grid(params, [params.epsilon], list(gammas), trials, seed)
    return [cdf_estimate(grid[0, gi], tau, trials, seed) for gi in range(grid.shape[1])]


def empirical_quantile(samples: np.ndarray, alpha: float, trials: int) -> float:
    """Lower empirical (1-alpha)-quantile with infinities above all finite values.

    Returns the ceil((1-alpha) * trials)-th order statistic: the smallest
    tau whose empirical CDF reaches 1-alpha.  math.inf signals that no
    finite budget achieves the target (estimated success probability below
    1-alpha).
    """
    if not 0.0 < alpha < 1.0:
        raise RangeError(f"alpha must lie in (0, 1), got {alpha}")
    index = math.ceil((1.0 - alpha) * trials) - 1
    index = min(max(index, 0), trials - 1)
    return float(np.partition(samples, index)[index])


def latency_quantile(params: SystemParams, gamma: int, alpha: float, trials: int, seed: int) -> float:
    """Smallest latency budget met with probability 1-alpha, or math.inf.

    Estimated as the lower empirical quantile of the censored sample; the
    infinite mass sits above every finite value, so the quantile is infinite
    exactly when the estimated success probability falls short of 1-alpha.
    """
    samples = censored_runtime_samples(params, gamma, trials, seed)
    return empirical_quantile(samples, alpha, trials)
