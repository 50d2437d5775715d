"""Exhaustive constrained search over code dimension and transmission cap.

Three resource-allocation problems share one grid evaluation:

  * minimize the latency quantile T^(alpha) subject to gamma <= gamma_t and
    P_s >= 1 - delta;
  * minimize the transmission cap gamma subject to P_s >= 1 - delta and
    T^(alpha) <= tau_t (equivalently Pr[T' <= tau_t] >= 1 - alpha);
  * maximize P_s subject to gamma <= gamma_t and T^(alpha) <= tau_t.

Success probabilities are exact, so those filters are deterministic.  Only
the latency side carries Monte Carlo noise: a cell passes a latency
constraint only when its estimate clears the threshold by two standard
errors, and cells inside that band are reported as marginal rather than
silently included.  All cells of a sweep share common random numbers, so
comparisons across k, gamma, and epsilon are never noise-broken.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .analytic import bounds_general_k
from .model import ConstraintSet, RangeError, SystemParams
from .reliability import (
    cdf_estimate,
    censored_sample_grid,
    empirical_quantile,
    system_success_prob,
)

__all__ = [
    "TaskFamily",
    "DesignSpace",
    "CellStats",
    "OptimizationResult",
    "AchievablePoint",
    "RateDesign",
    "min_latency",
    "min_bandwidth",
    "max_success",
    "optimal_rate_upper_bound",
    "sweep_epsilon",
]


@dataclass(frozen=True)
class TaskFamily:
    """Problem instance with the code dimension k left open for the search."""

    n: int
    m: int
    mu1: float
    mu2: float
    epsilon: float

    def __post_init__(self):
        if self.n < 1 or self.m < 1:
            raise RangeError(f"need n >= 1 and m >= 1, got n={self.n}, m={self.m}")
        if not (self.mu1 > 0 and self.mu2 > 0):
            raise RangeError(f"rates must be positive, got mu1={self.mu1}, mu2={self.mu2}")
        if not 0.0 <= self.epsilon < 1.0:
            raise RangeError(f"epsilon must lie in [0, 1), got {self.epsilon}")

    def with_k(self, k: int) -> SystemParams:
        return SystemParams(n=self.n, k=k, m=self.m, mu1=self.mu1, mu2=self.mu2, epsilon=self.epsilon)


def divisors_leq(m: int, n: int) -> list[int]:
    """Divisors of m not exceeding n, ascending."""
    return [k for k in range(1, min(m, n) + 1) if m % k == 0]


@dataclass(frozen=True)
class DesignSpace:
    """Candidate code dimensions and, per dimension, candidate caps.

    The default space takes every divisor of m up to n whose shard fits the
    cap, with gamma running from the shard size m/k to gamma_cap.
    """

    k_candidates: tuple[int, ...]
    gamma_candidates: dict[int, tuple[int, ...]] = field(repr=False)

    def __post_init__(self):
        for k in self.k_candidates:
            if k not in self.gamma_candidates:
                raise RangeError(f"no gamma candidates for k={k}")

    @classmethod
    def default(cls, n: int, m: int, gamma_cap: int) -> "DesignSpace":
        ks = [k for k in divisors_leq(m, n) if m // k <= gamma_cap]
        gammas = {k: tuple(range(m // k, gamma_cap + 1)) for k in ks}
        return cls(k_candidates=tuple(ks), gamma_candidates=gammas)

    @property
    def max_gamma(self) -> int | None:
        caps = [max(gs) for gs in self.gamma_candidates.values() if gs]
        return max(caps) if caps else None


@dataclass(frozen=True)
class CellStats:
    """Everything the three problems need to know about one (k, gamma) cell."""

    k: int
    gamma: int
    p: float
    p_s: float
    t_alpha: float
    cdf_tau: object = None  # EstimateWithCI when a latency budget was evaluated
    latency_pass: bool | None = None
    latency_marginal: bool | None = None


@dataclass(frozen=True)
class OptimizationResult:
    problem: str
    feasible: bool
    k_star: int | None
    gamma_star: int | None
    t_alpha: float
    p_s: float
    cells: tuple[CellStats, ...]
    marginal: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class AchievablePoint:
    """One point of an achievable curve; infeasible points carry p_s = 0."""

    epsilon: float
    k_star: int | None
    gamma_star: int | None
    t_alpha: float
    p_s: float


def _evaluate_cells(
    family: TaskFamily,
    space: DesignSpace,
    alpha: float,
    trials: int,
    seed: int,
    tau_t: float | None,
    epsilons=None,
) -> dict[float, list[CellStats]]:
    """Exact success probabilities plus simulated latency stats per cell.

    One censored-sample grid per k covers every epsilon and gamma at once;
    slab dimensions are fixed by the whole space so different k share base
    draws too.
    """
    eps_list = [family.epsilon] if epsilons is None else [float(e) for e in epsilons]
    per_eps: dict[float, list[CellStats]] = {e: [] for e in eps_list}
    if not space.k_candidates:
        return per_eps
    slab_shape = max(family.m // k for k in space.k_candidates)
    slab_cap = space.max_gamma
    for k in space.k_candidates:
        gammas = list(space.gamma_candidates[k])
        if not gammas:
            continue
        params = family.with_k(k)
        grid = censored_sample_grid(
            params, eps_list, gammas, trials, seed, slab_shape=slab_shape, slab_cap=slab_cap
        )
        for ei, eps in enumerate(eps_list):
            params_eps = params.replace(epsilon=eps)
            for gi, gamma in enumerate(gammas):
                profile = system_success_prob(params_eps, gamma)
                samples = grid[ei, gi]
                t_alpha = empirical_quantile(samples, alpha, trials)
                cdf = lat_pass = lat_marginal = None
                if tau_t is not None:
                    cdf = cdf_estimate(samples, tau_t, trials, seed)
                    slack = cdf.mean - (1.0 - alpha)
                    lat_pass = slack >= 2.0 * cdf.std_error
                    lat_marginal = abs(slack) < 2.0 * cdf.std_error
                per_eps[eps].append(
                    CellStats(
                        k=k,
                        gamma=gamma,
                        p=profile.p,
                        p_s=profile.p_s,
                        t_alpha=t_alpha,
                        cdf_tau=cdf,
                        latency_pass=lat_pass,
                        latency_marginal=lat_marginal,
                    )
                )
    return per_eps


def _marginal_pairs(cells) -> tuple[tuple[int, int], ...]:
    return tuple((c.k, c.gamma) for c in cells if c.latency_marginal)


def _solve_min_latency(cells, gamma_t: float, delta: float) -> OptimizationResult:
    survivors = [c for c in cells if c.gamma <= gamma_t and c.p_s >= 1.0 - delta]
    best = min(survivors, key=lambda c: (c.t_alpha, c.gamma, c.k), default=None)
    if best is None or math.isinf(best.t_alpha):
        return OptimizationResult(
            "min_latency", False, None, None, math.inf, 0.0, tuple(cells), _marginal_pairs(cells)
        )
    return OptimizationResult(
        "min_latency", True, best.k, best.gamma, best.t_alpha, best.p_s, tuple(cells), _marginal_pairs(cells)
    )


def _solve_min_bandwidth(cells, delta: float) -> OptimizationResult:
    survivors = [c for c in cells if c.p_s >= 1.0 - delta and c.latency_pass]
    best = min(survivors, key=lambda c: (c.gamma, c.k), default=None)
    if best is None:
        return OptimizationResult(
            "min_bandwidth", False, None, None, math.inf, 0.0, tuple(cells), _marginal_pairs(cells)
        )
    return OptimizationResult(
        "min_bandwidth", True, best.k, best.gamma, best.t_alpha, best.p_s, tuple(cells), _marginal_pairs(cells)
    )


def _solve_max_success(cells, gamma_t: float) -> OptimizationResult:
    survivors = [c for c in cells if c.gamma <= gamma_t and c.latency_pass]
    best = max(survivors, key=lambda c: (c.p_s, -c.gamma, -c.k), default=None)
    if best is None:
        return OptimizationResult(
            "max_success", False, None, None, math.inf, 0.0, tuple(cells), _marginal_pairs(cells)
        )
    return OptimizationResult(
        "max_success", True, best.k, best.gamma, best.t_alpha, best.p_s, tuple(cells), _marginal_pairs(cells)
    )


def min_latency(
    family: TaskFamily,
    gamma_t: int,
    delta: float,
    alpha: float,
    trials: int = 100_000,
    seed: int = 0,
    space: DesignSpace | None = None,
) -> OptimizationResult:
    """Latency-quantile minimization under bandwidth and success constraints.

    Pairs are filtered by the exact P_s >= 1 - delta and gamma <= gamma_t;
    the quantile objective is then estimated only on survivors.  Ties break
    toward smaller gamma, then smaller k.
    """
    space = DesignSpace.default(family.n, family.m, gamma_t) if space is None else space
    cells = _evaluate_cells(family, space, alpha, trials, seed, tau_t=None)[family.epsilon]
    return _solve_min_latency(cells, gamma_t, delta)


def min_bandwidth(
    family: TaskFamily,
    delta: float,
    alpha: float,
    tau_t: float,
    trials: int = 100_000,
    seed: int = 0,
    space: DesignSpace | None = None,
    gamma_cap: int = 64,
) -> OptimizationResult:
    """Smallest cap gamma for which some k meets success and latency targets.

    The latency condition T^(alpha) <= tau_t is applied in its equivalent
    form Pr[T' <= tau_t] >= 1 - alpha, with the two-standard-error pass
    rule.  The search runs over the design space's caps (by default up to
    gamma_cap); an empty survivor set is reported as infeasible.
    """
    space = DesignSpace.default(family.n, family.m, gamma_cap) if space is None else space
    cells = _evaluate_cells(family, space, alpha, trials, seed, tau_t=tau_t)[family.epsilon]
    return _solve_min_bandwidth(cells, delta)


def max_success(
    family: TaskFamily,
    gamma_t: int,
    alpha: float,
    tau_t: float,
    trials: int = 100_000,
    seed: int = 0,
    space: DesignSpace | None = None,
) -> OptimizationResult:
    """Success-probability maximization under bandwidth and latency budgets.

    P_s is exact; when no pair meets the latency budget the result carries
    P_s = 0 rather than an error, matching the achievable-curve convention.
    """
    space = DesignSpace.default(family.n, family.m, gamma_t) if space is None else space
    cells = _evaluate_cells(family, space, alpha, trials, seed, tau_t=tau_t)[family.epsilon]
    return _solve_max_success(cells, gamma_t)


@dataclass(frozen=True)
class RateDesign:
    """Upper-bound-minimizing code rate over the candidate dimensions."""

    rate: float
    k: int
    upper_bound: float


def optimal_rate_upper_bound(
    n: int, m: int, mu1: float, mu2: float, epsilon: float, k_candidates=None
) -> RateDesign:
    """Code rate R* = k*/n minimizing the closed-form upper bound on E[T]."""
    ks = divisors_leq(m, n) if k_candidates is None else sorted(int(k) for k in k_candidates)
    if not ks:
        raise RangeError(f"no admissible code dimensions for n={n}, m={m}")
    best_k, best_upper = None, math.inf
    for k in ks:
        pair = bounds_general_k(SystemParams(n=n, k=k, m=m, mu1=mu1, mu2=mu2, epsilon=epsilon))
        if pair.upper < best_upper:
            best_k, best_upper = k, pair.upper
    return RateDesign(rate=best_k / n, k=best_k, upper_bound=best_upper)


def sweep_epsilon(
    family: TaskFamily,
    constraints: ConstraintSet,
    gamma_t: int,
    epsilon_grid,
    trials: int,
    seed: int,
    space: DesignSpace | None = None,
) -> dict[str, list[AchievablePoint]]:
    """Achievable curves across an erasure grid, one entry per problem.

    Every (k, gamma, epsilon) cell is evaluated once from shared base draws;
    the same cell table then feeds all three problems, so the three curves
    are mutually consistent and deterministic in (seed, trials).
    """
    space = DesignSpace.default(family.n, family.m, gamma_t) if space is None else space
    eps_list = [float(e) for e in epsilon_grid]
    per_eps = _evaluate_cells(
        family, space, constraints.alpha, trials, seed, tau_t=constraints.tau_t, epsilons=eps_list
    )
    curves: dict[str, list[AchievablePoint]] = {"min_latency": [], "min_bandwidth": [], "max_success": []}
    for eps in eps_list:
        cells = per_eps[eps]
        solutions = {
            "min_latency": _solve_min_latency(cells, gamma_t, constraints.delta),
            "min_bandwidth": _solve_min_bandwidth(cells, constraints.delta),
            "max_success": _solve_max_success(cells, gamma_t),
        }
        for name, res in solutions.items():
            curves[name].append(
                AchievablePoint(
                    epsilon=eps,
                    k_star=res.k_star,
                    gamma_star=res.gamma_star,
                    t_alpha=res.t_alpha,
                    p_s=res.p_s if res.feasible else 0.0,
                )
            )
    return curves
