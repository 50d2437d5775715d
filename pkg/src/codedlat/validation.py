"""Cross-engine oracle suite.

Each engine is checked against an independent route to the same quantity:
the Markov solver against Monte Carlo means, the closed-form bounds against
both, the structural communication sampler against its collapsed
distribution, and the order-statistic inequalities against brute force.
The suite is deterministic in its seed, and a test-only fault flag exists to
prove the checks can fail: it builds the Markov chain with the error-free
communication rate, which must break the sandwich check whenever the
erasure probability is positive.
"""

from __future__ import annotations

from dataclasses import dataclass

from scipy import stats as sps

from . import analytic, ctmc, montecarlo
from .model import SystemParams, substream

__all__ = ["CheckResult", "ValidationReport", "run_validation"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    seed: int
    checks: tuple[CheckResult, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def render(self) -> str:
        lines = [f"validation suite (seed={self.seed})"]
        for c in self.checks:
            lines.append(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
        lines.append("result: " + ("all checks passed" if self.ok else "FAILURES detected"))
        return "\n".join(lines)


def _chain_value(params: SystemParams, inject_comm_fault: bool) -> float:
    comm_rate = params.mu2 if inject_comm_fault else params.comm_rate
    spec = ctmc.ChainSpec(n=params.n, k=params.k, comp_rate=params.mu1, comm_rate=comm_rate)
    return ctmc.expected_hitting_time(spec)


def _check_ctmc_vs_mc(seed: int, trials: int) -> CheckResult:
    worst = ("", 0.0)
    for idx, (n, k) in enumerate([(2, 1), (5, 2), (10, 5)]):
        for eps in (0.0, 0.3):
            for mu1, mu2 in ((1.0, 1.0), (10.0, 1.0)):
                params = SystemParams(n=n, k=k, m=k, mu1=mu1, mu2=mu2, epsilon=eps)
                exact = _chain_value(params, inject_comm_fault=False)
                est = montecarlo.estimate_expected_runtime(params, trials, seed + idx)
                z = abs(exact - est.mean) / est.std_error
                if z > worst[1]:
                    worst = (f"n={n},k={k},eps={eps},mu=({mu1},{mu2})", z)
    ok = worst[1] <= 3.0
    return CheckResult("ctmc_vs_monte_carlo", ok, f"worst |z| = {worst[1]:.2f} at {worst[0]} (limit 3)")


def _check_lemma1_ks(seed: int, trials: int) -> CheckResult:
    worst_p, worst_mean_err = 1.0, 0.0
    for eps in (0.2, 0.5):
        for mu2 in (1.0, 5.0):
            params = SystemParams(n=1, k=1, m=1, mu1=1.0, mu2=mu2, epsilon=eps)
            draws = montecarlo.sample_comm_times(params, trials, seed)
            rate = params.comm_rate
            res = sps.kstest(draws, sps.expon(scale=1.0 / rate).cdf)
            worst_p = min(worst_p, res.pvalue)
            worst_mean_err = max(worst_mean_err, abs(draws.mean() * rate - 1.0))
    ok = worst_p >= 0.01 and worst_mean_err <= 0.01
    return CheckResult(
        "communication_time_collapse",
        ok,
        f"min KS p-value {worst_p:.4f} (limit 0.01), worst mean error {worst_mean_err:.4%} (limit 1%)",
    )


def _check_propositions(seed: int, cases: int) -> CheckResult:
    rng = substream(seed, 0xB0)
    violations = 0
    for _ in range(cases):
        n = int(rng.integers(1, 21))
        k = int(rng.integers(1, n + 1))
        if rng.random() < 0.5:
            a, b = rng.random(n), rng.random(n)
        else:
            a, b = rng.pareto(1.5, n), rng.pareto(1.5, n)
        mid = analytic.kth_min_sum(a, b, k)
        if not analytic.prop1_lower(a, b, k) <= mid <= analytic.prop2_upper(a, b, k):
            violations += 1
    return CheckResult(
        "order_statistic_inequalities", violations == 0, f"{violations} violations in {cases} random instances"
    )


def _check_theorem2_sandwich(seed: int, inject_comm_fault: bool) -> CheckResult:
    bad = []
    for n, k in [(2, 1), (5, 2), (10, 5), (20, 10)]:
        for eps in (0.0, 0.1, 0.3, 0.5):
            for mu1, mu2 in ((1.0, 1.0), (10.0, 1.0), (1.0, 10.0)):
                params = SystemParams(n=n, k=k, m=k, mu1=mu1, mu2=mu2, epsilon=eps)
                pair = analytic.bounds_max_k(params)
                value = _chain_value(params, inject_comm_fault)
                if not pair.contains(value):
                    bad.append(f"n={n},k={k},eps={eps},mu=({mu1},{mu2})")
    return CheckResult(
        "single_packet_sandwich",
        not bad,
        "chain value inside [lower, upper] everywhere" if not bad else f"violated at {bad[:3]}",
    )


def _check_theorem3_sandwich(seed: int, trials: int) -> CheckResult:
    worst = ("", 0.0)
    ok = True
    for n, k, m in [(10, 5, 20), (20, 10, 100), (20, 4, 100)]:
        for eps in (0.0, 0.3):
            params = SystemParams(n=n, k=k, m=m, mu1=1.0, mu2=2.0, epsilon=eps)
            pair = analytic.bounds_general_k(params)
            est = montecarlo.estimate_expected_runtime(params, trials, seed + n + k)
            slack = 3.0 * est.std_error
            if not (pair.lower - slack <= est.mean <= pair.upper + slack):
                ok = False
                worst = (f"n={n},k={k},m={m},eps={eps}", est.mean)
    detail = "Monte Carlo mean within bounds (3-SE slack) on all cells" if ok else f"violated at {worst[0]}"
    return CheckResult("general_k_sandwich", ok, detail)


def _check_erasure_monotonicity(seed: int) -> CheckResult:
    eps_grid = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5]
    params0 = SystemParams(n=10, k=5, m=5, mu1=1.0, mu2=1.0, epsilon=0.0)
    lowers, uppers, chain = [], [], []
    for eps in eps_grid:
        params = params0.replace(epsilon=eps)
        pair = analytic.bounds_max_k(params)
        lowers.append(pair.lower)
        uppers.append(pair.upper)
        chain.append(_chain_value(params, inject_comm_fault=False))
    ok = (
        all(x <= y for x, y in zip(lowers, lowers[1:]))
        and all(x <= y for x, y in zip(uppers, uppers[1:]))
        and all(x <= y for x, y in zip(chain, chain[1:]))
    )
    return CheckResult(
        "erasure_monotonicity", ok, "bounds and chain value nondecreasing over the erasure grid"
    )


def run_validation(seed: int = 20240601, trials: int = 20000, inject_comm_fault: bool = False) -> ValidationReport:
    """Run every cross-engine check; deterministic for a fixed seed.

    inject_comm_fault is a negative control: it swaps the chain's folded
    communication rate for the error-free one inside the sandwich check,
    which must produce a failure (positive erasure grid points sit in the
    grid precisely for that reason).
    """
    checks = (
        _check_ctmc_vs_mc(seed, trials),
        _check_lemma1_ks(seed, max(trials, 10**5)),
        _check_propositions(seed, 2000),
        _check_theorem2_sandwich(seed, inject_comm_fault),
        _check_theorem3_sandwich(seed, trials),
        _check_erasure_monotonicity(seed),
    )
    return ValidationReport(seed=seed, checks=checks)
