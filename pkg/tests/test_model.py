import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from codedlat import model
from codedlat.model import (
    UNLIMITED,
    ConstraintSet,
    DivisibilityError,
    RangeError,
    RetransmissionPolicy,
    SystemParams,
    load_config,
    sample_erlang,
    sample_exponential,
    sample_geometric,
    substream,
    uncoded_erasure,
)


def test_validate_accepts_consistent_params():
    SystemParams(n=5, k=2, m=4, mu1=1.0, mu2=1.0, epsilon=0.1)


def test_validate_rejects_indivisible_workload():
    with pytest.raises(DivisibilityError):
        SystemParams(n=5, k=3, m=4, mu1=1.0, mu2=1.0, epsilon=0.1)


@pytest.mark.parametrize(
    "fields",
    [
        dict(n=5, k=6, m=6, mu1=1.0, mu2=1.0, epsilon=0.1),  # k > n
        dict(n=0, k=1, m=1, mu1=1.0, mu2=1.0, epsilon=0.1),
        dict(n=5, k=1, m=1, mu1=0.0, mu2=1.0, epsilon=0.1),
        dict(n=5, k=1, m=1, mu1=1.0, mu2=-2.0, epsilon=0.1),
        dict(n=5, k=1, m=1, mu1=1.0, mu2=1.0, epsilon=1.0),
        dict(n=5, k=1, m=1, mu1=1.0, mu2=1.0, epsilon=-0.1),
    ],
)
def test_validate_rejects_out_of_range(fields):
    with pytest.raises(RangeError):
        SystemParams(**fields)


def test_shard_and_rates():
    p = SystemParams(n=4, k=2, m=10, mu1=3.0, mu2=2.0, epsilon=0.5)
    assert p.shard_size == 5
    assert p.comp_rate == pytest.approx(0.6)
    assert p.comm_rate == pytest.approx(1.0)


def test_uncoded_erasure_values():
    assert uncoded_erasure(0.0, 3, 7) == 0.0
    assert uncoded_erasure(0.19, 1, 2) == pytest.approx(0.1, abs=1e-12)
    assert uncoded_erasure(0.3, 5, 5) == pytest.approx(0.3, abs=1e-12)


def test_uncoded_erasure_rejects_bad_inputs():
    with pytest.raises(RangeError):
        uncoded_erasure(1.0, 1, 2)
    with pytest.raises(RangeError):
        uncoded_erasure(0.2, 3, 2)


@given(
    eps=st.floats(0.0, 0.95),
    eps2=st.floats(0.0, 0.95),
    k=st.integers(1, 50),
    n=st.integers(1, 50),
)
def test_uncoded_erasure_monotonicity(eps, eps2, k, n):
    if k > n:
        k, n = n, k
    lo, hi = sorted((eps, eps2))
    assert uncoded_erasure(lo, k, n) <= uncoded_erasure(hi, k, n) + 1e-15
    if k < n:
        assert uncoded_erasure(eps, k, n) <= uncoded_erasure(eps, k + 1, n) + 1e-15


def test_sampling_means():
    rng = substream(7)
    assert sample_exponential(2.0, rng, size=10**6).mean() == pytest.approx(0.5, rel=0.01)
    rng = substream(8)
    assert sample_geometric(0.7, rng, size=10**6).mean() == pytest.approx(1 / 0.7, rel=0.01)
    rng = substream(9)
    assert sample_erlang(3, 2.0, rng, size=10**6).mean() == pytest.approx(1.5, rel=0.01)


def test_sampling_rejects_bad_parameters():
    rng = substream(1)
    with pytest.raises(RangeError):
        sample_exponential(0.0, rng)
    with pytest.raises(RangeError):
        sample_geometric(0.0, rng)
    with pytest.raises(RangeError):
        sample_geometric(1.2, rng)
    with pytest.raises(RangeError):
        sample_erlang(0, 1.0, rng)
    with pytest.raises(RangeError):
        sample_erlang(2, -1.0, rng)


def test_geometric_success_prob_one():
    rng = substream(2)
    assert sample_geometric(1.0, rng) == 1
    assert np.all(sample_geometric(1.0, rng, size=5) == 1)


def test_substreams_reproducible_and_independent_of_order():
    a1 = substream(42, 3).standard_normal(4)
    b1 = substream(42, 4).standard_normal(4)
    b2 = substream(42, 4).standard_normal(4)
    a2 = substream(42, 3).standard_normal(4)
    assert np.array_equal(a1, a2)
    assert np.array_equal(b1, b2)
    assert not np.array_equal(a1, b1)


def test_computation_time_scaling_invariant():
    # empirical mean of X_i must track m/(k*mu1) for the declared rate
    p = SystemParams(n=4, k=2, m=10, mu1=4.0, mu2=1.0, epsilon=0.0)
    draws = sample_exponential(p.comp_rate, substream(11), size=10**5)
    se = draws.std(ddof=1) / math.sqrt(draws.size)
    assert abs(draws.mean() - p.m / (p.k * p.mu1)) <= 3 * se


def test_retransmission_policy():
    assert RetransmissionPolicy().is_unlimited
    pol = RetransmissionPolicy(gamma=5, gamma_t=8)
    assert not pol.is_unlimited
    with pytest.raises(RangeError):
        RetransmissionPolicy(gamma=9, gamma_t=8)
    with pytest.raises(RangeError):
        RetransmissionPolicy(gamma=0)
    with pytest.raises(RangeError):
        RetransmissionPolicy(gamma=2.5)


def test_constraint_set_ranges():
    ConstraintSet(alpha=0.05, delta=0.01, tau_t=10.0)
    with pytest.raises(RangeError):
        ConstraintSet(alpha=0.0, delta=0.01, tau_t=10.0)
    with pytest.raises(RangeError):
        ConstraintSet(alpha=0.05, delta=1.5, tau_t=10.0)
    with pytest.raises(RangeError):
        ConstraintSet(alpha=0.05, delta=0.0, tau_t=0.0)


def test_load_config_roundtrip():
    doc = {"n": 40, "k": 20, "m": 120, "mu1": 1, "mu2": 5, "epsilon": 0.3,
           "gamma": 13, "gamma_t": 13, "alpha": 0.03, "delta": 0.01, "tau_t": 8.6}
    params, policy, constraints = load_config(doc)
    assert params.n == 40 and params.shard_size == 6
    assert policy.gamma == 13 and policy.gamma_t == 13
    assert constraints.alpha == 0.03

    params, policy, constraints = load_config({"n": 2, "k": 1, "m": 1, "mu1": 1, "mu2": 1, "epsilon": 0.0})
    assert policy.gamma == UNLIMITED and policy.gamma_t is None
    assert constraints is None

    with pytest.raises(RangeError):
        load_config({"n": 2, "k": 1, "mu1": 1, "mu2": 1, "epsilon": 0.0})


def test_iter_blocks_partitions_exactly():
    blocks = list(model.iter_blocks(20000, block=8192))
    assert [size for _, size in blocks] == [8192, 8192, 3616]
    assert [idx for idx, _ in blocks] == [0, 1, 2]
