"""Exact expected run-time in the single-packet regime via a Markov chain.

State (u, v) counts workers that have finished computing (u) and workers
whose result the master has already received (v).  Computation edges fire at
rate (n-u)*mu1 and delivery edges at rate (u-v)*(1-eps)*mu2; the task is done
when v reaches k.  Every transition increases u+v, so the chain is a DAG and
first-step analysis solves it exactly in one backward sweep, no linear
solver needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import PreconditionError, RangeError, SystemParams

__all__ = [
    "MarkovState",
    "ChainSpec",
    "transitions",
    "expected_hitting_time",
    "hitting_time_curve",
    "to_dot",
]


@dataclass(frozen=True)
class MarkovState:
    """Lattice point (u, v): u workers computed, v results received (v <= u)."""

    u: int
    v: int


@dataclass(frozen=True)
class ChainSpec:
    """Chain dimensions and the two folded transition rates.

    comm_rate already includes the erasure factor: a delivered packet takes
    an Exponential((1-eps)*mu2) total time once retransmissions are folded
    in, which is what makes the process Markov in (u, v).
    """

    n: int
    k: int
    comp_rate: float
    comm_rate: float

    def __post_init__(self):
        if not (self.n >= 1 and 1 <= self.k <= self.n):
            raise RangeError(f"need 1 <= k <= n, got k={self.k}, n={self.n}")
        if not (self.comp_rate > 0 and self.comm_rate > 0):
            raise RangeError(
                f"rates must be positive, got comp_rate={self.comp_rate}, comm_rate={self.comm_rate}"
            )

    @classmethod
    def from_params(cls, params: SystemParams) -> "ChainSpec":
        """Build the chain for SystemParams; exact only in the k = m regime."""
        if params.k != params.m:
            raise PreconditionError(
                f"the (u, v) chain models k = m; got k={params.k}, m={params.m}"
            )
        return cls(n=params.n, k=params.k, comp_rate=params.mu1, comm_rate=params.comm_rate)


def _check_state(state: MarkovState, spec: ChainSpec) -> None:
    if not (0 <= state.v <= state.u <= spec.n and state.v <= spec.k):
        raise RangeError(f"state {state} violates 0 <= v <= u <= n, v <= k for {spec}")


def transitions(state: MarkovState, spec: ChainSpec) -> list[tuple[MarkovState, float]]:
    """Outgoing (next_state, rate) edges; empty exactly at absorbing states."""
    _check_state(state, spec)
    u, v = state.u, state.v
    out = []
    if v == spec.k:
        return out
    if v <= u < spec.n:
        out.append((MarkovState(u + 1, v), (spec.n - u) * spec.comp_rate))
    if 0 <= v < min(u, spec.k):
        out.append((MarkovState(u, v + 1), (u - v) * spec.comm_rate))
    return out


def expected_hitting_time(spec: ChainSpec) -> float:
    """Expected time from (0, 0) to the absorbing set {v = k}.

    Backward first-step recursion E[s] = 1/R(s) + sum rate/R(s) * E[next].
    States are swept by decreasing u+v: both edges from (u, v) land on
    u+v+1, so each anti-diagonal depends only on the previous one and can be
    filled as a vector operation.  O(nk) time, one (n+2) x (k+1) table.
    """
    n, k = spec.n, spec.k
    mu_c, mu_v = spec.comp_rate, spec.comm_rate
    expect = np.zeros((n + 2, k + 1))  # row n+1 is padding for the u = n edge case
    for s in range(n + k - 1, -1, -1):
        u_lo = max((s + 1) // 2, s - k + 1, 0)
        u_hi = min(n, s)
        if u_lo > u_hi:
            continue
        u = np.arange(u_lo, u_hi + 1)
        v = s - u
        rc = np.where(u < n, (n - u) * mu_c, 0.0)
        rv = (u - v) * mu_v
        total = rc + rv
        expect[u, v] = (1.0 + rc * expect[u + 1, v] + rv * expect[u, v + 1]) / total
    return float(expect[0, 0])


def hitting_time_curve(n_values, k, mu1: float, mu2: float, epsilon: float):
    """Expected run-time over an n grid at fixed k (or k = k(n) when callable).

    Returns [(n, E[T])] rows; for fixed k the curve is nonincreasing in n
    since extra workers only add redundancy.
    """
    if not 0.0 <= epsilon < 1.0:
        raise RangeError(f"epsilon must lie in [0, 1), got {epsilon}")
    rows = []
    for n in n_values:
        k_n = k(n) if callable(k) else k
        spec = ChainSpec(n=int(n), k=int(k_n), comp_rate=mu1, comm_rate=(1.0 - epsilon) * mu2)
        rows.append((int(n), expected_hitting_time(spec)))
    return rows


def to_dot(spec: ChainSpec) -> str:
    """GraphViz DOT rendering of the reachable transition diagram.

    Intended for small chains; the state count is (n+1)(k+1)-ish and the
    layout becomes unreadable well before the solver slows down.
    """
    lines = ["digraph chain {", "  rankdir=LR;", '  node [shape=circle, fontsize=10];']
    for u in range(spec.n + 1):
        for v in range(min(u, spec.k) + 1):
            state = MarkovState(u, v)
            style = ' style=filled fillcolor="#dddddd"' if v == spec.k else ""
            lines.append(f'  "u{u}v{v}" [label="({u},{v})"{style}];')
            for nxt, rate in transitions(state, spec):
                lines.append(f'  "u{u}v{v}" -> "u{nxt.u}v{nxt.v}" [label="{rate:g}"];')
    lines.append("}")
    return "\n".join(lines)
