"""Closed-form latency machinery.

Harmonic-number identities give exact expectations for exponential order
statistics, which drive two-sided bounds on the expected overall run-time of
the coded scheme.  For multi-packet shards the communication time per worker
is Erlang, and the bounds need expected Erlang order statistics; those come
from an alternating finite sum that is numerically treacherous, so this
module evaluates it in log space with sign tracking and falls back to Monte
Carlo when cancellation is detected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy.special import gammaln, logsumexp

from .model import (
    ConsistencyError,
    DivisibilityError,
    PreconditionError,
    RangeError,
    SystemParams,
    substream,
    uncoded_erasure,
)

__all__ = [
    "harmonic",
    "BoundPair",
    "bounds_max_k",
    "erlang_coefficients",
    "ErlangOrderStatTable",
    "erlang_order_stat_means",
    "bounds_general_k",
    "uncoded_bounds",
    "AsymptoticBounds",
    "asymptotic_bounds",
    "kth_min_sum",
    "prop1_lower",
    "prop2_upper",
]

_HARMONIC_CACHE = [0.0]


def harmonic(j: int) -> float:
    """Partial harmonic sum H_j = sum_{i=1}^{j} 1/i, with H_0 = 0."""
    if not (isinstance(j, (int, np.integer)) and j >= 0):
        raise RangeError(f"harmonic is defined for integers j >= 0, got {j!r}")
    while len(_HARMONIC_CACHE) <= j:
        _HARMONIC_CACHE.append(_HARMONIC_CACHE[-1] + 1.0 / len(_HARMONIC_CACHE))
    return _HARMONIC_CACHE[j]


@dataclass(frozen=True)
class BoundPair:
    """Two-sided bound [lower, upper] on an expected run-time.

    argmax_index_lower is the (smallest) inner index attaining the lower
    bound's maximization; argmin_index_upper the one attaining the upper
    bound's minimization.
    """

    lower: float
    upper: float
    argmax_index_lower: int
    argmin_index_upper: int

    def __post_init__(self):
        if self.lower > self.upper + 1e-9 * max(1.0, abs(self.upper)):
            raise ConsistencyError(f"lower bound {self.lower} exceeds upper bound {self.upper}")

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper


def _extremize(values, indices, want_max: bool) -> tuple[float, int]:
    """Extreme value and the smallest index attaining it (deterministic ties)."""
    values = np.asarray(values, dtype=float)
    pos = int(np.argmax(values)) if want_max else int(np.argmin(values))
    return float(values[pos]), int(indices[pos])


def bounds_max_k(params: SystemParams) -> BoundPair:
    """Run-time bounds for the single-packet regime k = m.

    With one inner product per worker, computation times are Exponential(mu1)
    and delivered-communication times Exponential((1-eps)*mu2), so both sides
    reduce to harmonic sums:

        lower = max_{i in [k]}   (H_n - H_{n-k+i-1})/mu1 + (H_n - H_{n-i})/((1-eps) mu2)
        upper = min_{i in [k..n]} (H_n - H_{i-k})/mu1    + (H_n - H_{n-i})/((1-eps) mu2)

    The lower maximand is convex in i, so the maximum sits at an endpoint:
    i = k when eps >= 1 - mu1/mu2 (communication is the slower stage,
    yielding 1/(n mu1) + (H_n - H_{n-k})/((1-eps) mu2)), i = 1 otherwise.
    The exhaustive maximization is cross-checked against that two-branch
    form and a ConsistencyError is raised if they ever disagree.
    """
    if params.k != params.m:
        raise PreconditionError(f"bounds_max_k requires k = m, got k={params.k}, m={params.m}")
    n, k = params.n, params.k
    mu1, cr = params.mu1, params.comm_rate
    Hn = harmonic(n)

    i_low = np.arange(1, k + 1)
    lower_vals = [(Hn - harmonic(n - k + i - 1)) / mu1 + (Hn - harmonic(n - i)) / cr for i in i_low]
    lower, arg_lower = _extremize(lower_vals, i_low, want_max=True)

    if params.epsilon >= 1.0 - mu1 / params.mu2:
        branch = 1.0 / (n * mu1) + (Hn - harmonic(n - k)) / cr
    else:
        branch = (Hn - harmonic(n - k)) / mu1 + 1.0 / (n * cr)
    if abs(branch - lower) > 1e-9 * max(1.0, abs(lower)):
        raise ConsistencyError(
            f"two-branch lower bound {branch} disagrees with exhaustive maximization {lower} "
            f"at n={n}, k={k}, mu1={mu1}, mu2={params.mu2}, eps={params.epsilon}"
        )

    i_up = np.arange(k, n + 1)
    upper_vals = [(Hn - harmonic(i - k)) / mu1 + (Hn - harmonic(n - i)) / cr for i in i_up]
    upper, arg_upper = _extremize(upper_vals, i_up, want_max=False)
    return BoundPair(lower, upper, arg_lower, arg_upper)


# --- expansion coefficients of truncated-exponential powers ------------------

_EXACT_COEFF_LIMIT = 5000  # beyond this many terms the exact rationals get unwieldy


def _exact_erlang_coefficients(x: int, y: int) -> list[Fraction]:
    base = [Fraction(1, math.factorial(j)) for j in range(x)]
    poly = [Fraction(1)]
    for _ in range(y):
        out = [Fraction(0)] * (len(poly) + x - 1)
        for i, ci in enumerate(poly):
            if ci:
                for j, bj in enumerate(base):
                    out[i + j] += ci * bj
        poly = out
    return poly


def erlang_coefficients(x: int, y: int) -> np.ndarray:
    """Coefficients a_q of t^q in (sum_{j=0}^{x-1} t^j / j!)^y, q = 0..(x-1)*y.

    Computed by repeated polynomial multiplication, exactly in rational
    arithmetic for moderate sizes and in log space above
    ``(x-1)*y > 5000`` terms (where a handful of extreme coefficients may
    underflow to zero in float64).
    """
    if not (isinstance(x, (int, np.integer)) and x >= 1):
        raise RangeError(f"x must be a positive integer, got {x!r}")
    if not (isinstance(y, (int, np.integer)) and y >= 0):
        raise RangeError(f"y must be a nonnegative integer, got {y!r}")
    if (x - 1) * y <= _EXACT_COEFF_LIMIT:
        return np.array([float(c) for c in _exact_erlang_coefficients(x, y)])
    log_aq = _log_erlang_coefficient_table(x, y)[y]
    return np.exp(log_aq)


def _log_conv(cur: np.ndarray, log_base: np.ndarray) -> np.ndarray:
    """Log-space polynomial product of cur with the length-x base polynomial."""
    x = len(log_base)
    out = np.full((len(cur) + x - 1, x), -np.inf)
    for j in range(x):
        out[j:j + len(cur), j] = cur + log_base[j]
    return logsumexp(out, axis=1)


@lru_cache(maxsize=32)
def _log_erlang_coefficient_table(x: int, y_max: int) -> tuple[np.ndarray, ...]:
    """log a_q(x, y) arrays for every y in 0..y_max (coefficients are positive)."""
    log_base = -gammaln(np.arange(1, x + 1, dtype=float))
    tables = [np.zeros(1)]
    for _ in range(y_max):
        tables.append(_log_conv(tables[-1], log_base))
    return tuple(tables)


# --- Erlang order-statistic means --------------------------------------------

#: Hard cap on the inner-series length (x-1)(n-i+p); larger tables go
#: straight to the Monte Carlo estimator.
_CLOSED_FORM_TERM_CAP = 2000

#: Declare a closed-form entry unusable once the alternating sum has
#: cancelled away more than this many decimal digits.
_CANCELLATION_DIGITS = 12.0

_MC_FALLBACK_TRIALS = 10**6
_TABLE_SEED = 0xE71A
_MC_CHUNK = 100_000


@dataclass(frozen=True)
class ErlangOrderStatTable:
    """Expected order statistics E[G_(1)] <= ... <= E[G_(n)] of n iid
    Erlang(shape, rate 1) variables.

    method records how the entries were produced: "closed_form" for the
    alternating-series evaluation, "monte_carlo_fallback" when at least one
    entry had to be re-estimated by simulation.
    """

    n: int
    shape: int
    means: np.ndarray = field(repr=False)
    method: str

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        means.setflags(write=False)
        object.__setattr__(self, "means", means)
        if len(means) != self.n:
            raise ConsistencyError(f"table length {len(means)} != n={self.n}")
        if not np.all(np.isfinite(means)) or not np.all(means > 0):
            raise ConsistencyError("order-statistic means must be finite and positive")
        if np.any(np.diff(means) < 0):
            raise ConsistencyError("order-statistic means must be nondecreasing")
        if means[-1] < self.shape * (1 - 1e-9):
            raise ConsistencyError("largest order statistic cannot undercut the single-variable mean")

    def mean(self, i: int) -> float:
        """E[G_(i)] for 1-based order index i."""
        if not 1 <= i <= self.n:
            raise RangeError(f"order index must lie in [1, {self.n}], got {i}")
        return float(self.means[i - 1])

    def to_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["i", "mean", "method"])
            for i, value in enumerate(self.means, start=1):
                writer.writerow([i, repr(float(value)), self.method])


def _erlang_os_means_mc(n: int, shape: int, trials: int) -> np.ndarray:
    """Plain Monte Carlo estimate of all n Erlang(shape, 1) order-stat means.

    Seeded deterministically from (n, shape) so tables are reproducible
    across runs and processes.
    """
    rng = substream(_TABLE_SEED, n, shape)
    totals = np.zeros(n)
    done = 0
    while done < trials:
        b = min(_MC_CHUNK, trials - done)
        draws = rng.standard_gamma(shape, size=(b, n)).astype(np.float32)
        draws.sort(axis=1)
        totals += draws.sum(axis=0, dtype=np.float64)
        done += b
    return totals / trials


def _closed_form_entries(n: int, shape: int) -> tuple[np.ndarray, np.ndarray]:
    """Alternating-series values and per-entry instability flags.

    E[G_(i)] = n! / ((i-1)! (n-i)! Gamma(shape)) *
               sum_{p=0}^{i-1} (-1)^p C(i-1, p) * I(n-i+p)
    with I(y) = sum_q a_q(shape, y) Gamma(shape+q+1) / (y+1)^(shape+q+1).

    I(y) depends on p and i only through y, so it is evaluated once per y in
    log space.  The signed p-sum is tracked relative to its absolute mass;
    an entry is flagged when the surviving fraction shows more than
    _CANCELLATION_DIGITS digits of cancellation (or is nonpositive or
    non-finite, which is the same disease at full strength).
    """
    log_base = -gammaln(np.arange(1, shape + 1, dtype=float))
    inner_log = np.empty(n)
    cur = np.zeros(1)
    for y in range(n):
        if y > 0:
            cur = _log_conv(cur, log_base)
        q = np.arange(len(cur), dtype=float)
        inner_log[y] = logsumexp(cur + gammaln(shape + q + 1) - (shape + q + 1) * math.log(y + 1))

    means = np.empty(n)
    flagged = np.zeros(n, dtype=bool)
    for i in range(1, n + 1):
        p = np.arange(i)
        log_binom = math.lgamma(i) - gammaln(p + 1) - gammaln(i - p)
        log_terms = log_binom + inner_log[n - i + p]
        signs = np.where(p % 2 == 0, 1.0, -1.0)
        peak = log_terms.max()
        scaled = np.exp(log_terms - peak)
        signed_sum = float((signs * scaled).sum())
        abs_sum = float(scaled.sum())
        log_pref = (
            math.lgamma(n + 1) - math.lgamma(i) - math.lgamma(n - i + 1) - math.lgamma(shape)
        )
        if signed_sum <= 0.0 or not np.isfinite(signed_sum):
            flagged[i - 1] = True
            means[i - 1] = np.nan
            continue
        lost_digits = math.log10(abs_sum / signed_sum)
        if lost_digits > _CANCELLATION_DIGITS:
            flagged[i - 1] = True
            means[i - 1] = np.nan
            continue
        means[i - 1] = math.exp(log_pref + peak + math.log(signed_sum))
    return means, flagged


@lru_cache(maxsize=128)
def erlang_order_stat_means(n: int, shape: int, mc_trials: int = _MC_FALLBACK_TRIALS) -> ErlangOrderStatTable:
    """Expected order statistics of n iid Erlang(shape, rate 1) variables.

    shape = 1 reduces to exponential order statistics and is returned in the
    exact harmonic form H_n - H_{n-i}.  Larger shapes use the alternating
    closed form, capped at (shape-1)*(n-1) <= 2000 series terms; capped-out
    tables and entries with detected catastrophic cancellation (including
    any entry left non-monotone against a simulated neighbour) are replaced
    by a 10^6-trial Monte Carlo estimate and the table is marked
    monte_carlo_fallback.
    """
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise RangeError(f"n must be a positive integer, got {n!r}")
    if not (isinstance(shape, (int, np.integer)) and shape >= 1):
        raise RangeError(f"shape must be a positive integer, got {shape!r}")
    n, shape = int(n), int(shape)

    if shape == 1:
        Hn = harmonic(n)
        means = np.array([Hn - harmonic(n - i) for i in range(1, n + 1)])
        return ErlangOrderStatTable(n=n, shape=shape, means=means, method="closed_form")

    if (shape - 1) * (n - 1) > _CLOSED_FORM_TERM_CAP:
        means = _erlang_os_means_mc(n, shape, mc_trials)
        return ErlangOrderStatTable(n=n, shape=shape, means=means, method="monte_carlo_fallback")

    means, flagged = _closed_form_entries(n, shape)
    if flagged.any():
        mc = _erlang_os_means_mc(n, shape, mc_trials)
        means = np.where(flagged, mc, means)
        # A surviving closed-form entry that breaks monotonicity against its
        # neighbours is cancellation that slipped under the digit threshold.
        while True:
            bad = np.nonzero(np.diff(means) < 0)[0]
            bad = [j for j in bad if not (flagged[j] and flagged[j + 1])]
            if not bad:
                break
            for j in bad:
                flagged[j] = flagged[j + 1] = True
            means = np.where(flagged, mc, means)
        return ErlangOrderStatTable(n=n, shape=shape, means=means, method="monte_carlo_fallback")
    return ErlangOrderStatTable(n=n, shape=shape, means=means, method="closed_form")


# --- general-k and uncoded bounds --------------------------------------------


def bounds_general_k(params: SystemParams) -> BoundPair:
    """Run-time bounds for any shard size m/k.

    Communication per worker is Erlang(m/k, (1-eps) mu2) once retransmission
    is folded in, so the harmonic communication terms of the k = m case are
    replaced by expected Erlang order statistics:

        lower = max_{i in [k]}    m (H_n - H_{n-k+i-1})/(k mu1) + E[G_(i)]/((1-eps) mu2)
        upper = min_{i in [k..n]} m (H_n - H_{i-k})/(k mu1)     + E[G_(i)]/((1-eps) mu2)

    For k = m the table entries are exact harmonic differences, making this
    bit-for-bit identical to bounds_max_k.
    """
    n, k, m = params.n, params.k, params.m
    mu1, cr = params.mu1, params.comm_rate
    Hn = harmonic(n)
    table = erlang_order_stat_means(n, params.shard_size)

    i_low = np.arange(1, k + 1)
    lower_vals = [
        m * (Hn - harmonic(n - k + i - 1)) / (k * mu1) + table.mean(i) / cr for i in i_low
    ]
    lower, arg_lower = _extremize(lower_vals, i_low, want_max=True)

    i_up = np.arange(k, n + 1)
    upper_vals = [m * (Hn - harmonic(i - k)) / (k * mu1) + table.mean(i) / cr for i in i_up]
    upper, arg_upper = _extremize(upper_vals, i_up, want_max=False)
    return BoundPair(lower, upper, arg_lower, arg_upper)


def uncoded_bounds(params: SystemParams) -> BoundPair:
    """Run-time bounds for the uncoded scheme that spreads m over all n workers.

    The master must wait for every worker, so both extremizations run over
    the full index range.  Two regimes:

    * k = m (single-packet comparison): each worker handles a k/n fraction
      of one shard, its packet shortens accordingly, and the erasure
      probability becomes eps' = 1 - (1-eps)^(k/n).  Rates scale to
      (n/k) mu1 and (n/k)(1-eps') mu2 and everything stays exponential.
      The exhaustive lower maximization is checked against its two-branch
      endpoint form, as in bounds_max_k.
    * general k: the coded formulas evaluated at code dimension n, i.e.
      shards of m/n packets (n must divide m) with the erasure probability
      unchanged, since packets still carry one inner product each.
    """
    n, k, m = params.n, params.k, params.m
    mu1, mu2 = params.mu1, params.mu2
    Hn = harmonic(n)

    if k == m:
        eps_u = uncoded_erasure(params.epsilon, k, n)
        cr = (1.0 - eps_u) * mu2
        scale = k / n
        i_all = np.arange(1, n + 1)
        lower_vals = [
            scale * ((Hn - harmonic(i - 1)) / mu1 + (Hn - harmonic(n - i)) / cr) for i in i_all
        ]
        lower, arg_lower = _extremize(lower_vals, i_all, want_max=True)
        if eps_u >= 1.0 - mu1 / mu2:
            branch = scale * (1.0 / (n * mu1) + Hn / cr)
        else:
            branch = scale * (Hn / mu1 + 1.0 / (n * cr))
        if abs(branch - lower) > 1e-9 * max(1.0, abs(lower)):
            raise ConsistencyError(
                f"uncoded two-branch lower bound {branch} disagrees with exhaustive value {lower}"
            )
        upper = scale * (Hn / mu1 + Hn / cr)
        return BoundPair(lower, upper, arg_lower, n)

    if m % n != 0:
        raise DivisibilityError(
            f"uncoded comparison at general k needs n | m, got n={n}, m={m}"
        )
    as_full_rate = SystemParams(n=n, k=n, m=m, mu1=mu1, mu2=mu2, epsilon=params.epsilon)
    return bounds_general_k(as_full_rate)


@dataclass(frozen=True)
class AsymptoticBounds:
    """Large-n approximations of the k = m bounds (diagnostic only)."""

    lower_asym: float
    upper_asym: float
    i_star: float


def asymptotic_bounds(params: SystemParams, rate: float | None = None) -> AsymptoticBounds:
    """Large-n approximation of bounds_max_k at fixed code rate R = k/n < 1.

    Replaces harmonic differences by logarithms:

        lower ~ 1/(n mu1) + log(n/(n-k)) / ((1-eps) mu2)   if eps >= 1 - mu1/mu2
                log(n/(n-k)) / mu1 + 1/(n (1-eps) mu2)     otherwise
        upper ~ log(n/(i*-k)) / mu1 + log(n/(n-i*)) / ((1-eps) mu2)

    where the upper-bound index is relaxed to the real minimiser

        i* = (mu1 k + (1-eps) mu2 n) / (mu1 + (1-eps) mu2).

    This is a large-n diagnostic; integer-index exhaustive search in
    bounds_max_k stays authoritative.
    """
    if params.k != params.m:
        raise PreconditionError(f"asymptotic_bounds requires k = m, got k={params.k}, m={params.m}")
    n, k = params.n, params.k
    if k >= n:
        raise RangeError(f"asymptotic regime needs code rate k/n < 1, got k={k}, n={n}")
    if rate is not None and abs(rate - k / n) > 1e-12:
        raise RangeError(f"rate={rate} is inconsistent with k/n={k / n}")
    mu1, cr = params.mu1, params.comm_rate
    log_ratio = math.log(n / (n - k))
    if params.epsilon >= 1.0 - mu1 / params.mu2:
        lower = 1.0 / (n * mu1) + log_ratio / cr
    else:
        lower = log_ratio / mu1 + 1.0 / (n * cr)
    i_star = (mu1 * k + cr * n) / (mu1 + cr)
    upper = math.log(n / (i_star - k)) / mu1 + math.log(n / (n - i_star)) / cr
    return AsymptoticBounds(lower_asym=lower, upper_asym=upper, i_star=i_star)


# --- order-statistic inequalities for sums -----------------------------------


def _check_pair(a, b, k: int) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 1 or a.shape != b.shape:
        raise RangeError(f"need two equal-length vectors, got shapes {a.shape} and {b.shape}")
    if not 1 <= k <= len(a):
        raise RangeError(f"k must lie in [1, {len(a)}], got {k}")
    return a, b


def kth_min_sum(a, b, k: int) -> float:
    """Exact k-th smallest value of the elementwise sums {a_i + b_i}."""
    a, b = _check_pair(a, b, k)
    return float(np.partition(a + b, k - 1)[k - 1])


def prop1_lower(a, b, k: int) -> float:
    """Order-statistic lower bound: kth-min(a_i + b_i) >= max_{i in [k]} a_(k-i+1) + b_(i)."""
    a, b = _check_pair(a, b, k)
    a_sorted = np.sort(a)
    b_sorted = np.sort(b)
    return float(np.max(a_sorted[k - 1::-1] + b_sorted[:k]))


def prop2_upper(a, b, k: int) -> float:
    """Order-statistic upper bound: kth-min(a_i + b_i) <= min_{i in [k..n]} a_(n+k-i) + b_(i)."""
    a, b = _check_pair(a, b, k)
    n = len(a)
    a_sorted = np.sort(a)
    b_sorted = np.sort(b)
    i = np.arange(k, n + 1)
    return float(np.min(a_sorted[n + k - i - 1] + b_sorted[i - 1]))
