import math

import numpy as np
import pytest
from scipy import stats as sps

from codedlat import montecarlo, reliability
from codedlat.model import (
    UNLIMITED,
    EstimateWithCI,
    PreconditionError,
    RangeError,
    SystemParams,
    substream,
)
from codedlat.reliability import (
    censored_sample_grid,
    latency_quantile,
    runtime_cdf,
    runtime_cdf_curve,
    sample_censored_comm_time,
    system_success_prob,
    worker_success_prob,
)


def _params(n=40, k=20, m=120, mu1=1.0, mu2=5.0, eps=0.3):
    return SystemParams(n=n, k=k, m=m, mu1=mu1, mu2=mu2, epsilon=eps)


def test_worker_success_single_packet():
    params = _params(k=40, m=40)  # shard of one packet
    assert worker_success_prob(params, 2) == pytest.approx(1 - 0.3**2, abs=1e-12)


def test_worker_success_zero_failures_allowed():
    params = _params(k=40)  # shard of three packets
    assert worker_success_prob(params, 3) == pytest.approx(0.7**3, abs=1e-12)


def test_worker_success_hand_sum():
    params = _params(k=40)
    expected = 0.343 * (1 + 3 * 0.3 + 6 * 0.09)
    assert worker_success_prob(params, 5) == pytest.approx(expected, abs=1e-12)


def test_worker_success_edge_cases():
    params = _params(k=40)
    assert worker_success_prob(params, 2) == 0.0  # below the shard size
    assert worker_success_prob(params, UNLIMITED) == 1.0
    assert worker_success_prob(_params(eps=0.0, k=40), 3) == 1.0
    with pytest.raises(RangeError):
        worker_success_prob(params, 0)


def test_worker_success_matches_negative_binomial_tail():
    params = _params(k=20)  # shard 6
    for gamma in (6, 9, 13, 20):
        expected = sps.nbinom(6, 0.7).cdf(gamma - 6)
        assert worker_success_prob(params, gamma) == pytest.approx(expected, rel=1e-12)


def test_system_success_single_worker():
    params = SystemParams(n=1, k=1, m=2, mu1=1.0, mu2=1.0, epsilon=0.4)
    profile = system_success_prob(params, 4)
    assert profile.p_s == pytest.approx(profile.p, rel=1e-12)


def test_system_success_matches_binomial_tail():
    params = _params(k=30)
    profile = system_success_prob(params, 8)
    expected = sps.binom(40, profile.p).sf(29)
    assert profile.p_s == pytest.approx(expected, rel=1e-10)


def test_worker_success_monotone_in_k():
    # fewer packets per worker can only help, for a fixed cap
    gamma = 12
    values = [worker_success_prob(_params(k=k), gamma) for k in (10, 20, 30, 40)]
    assert all(a <= b + 1e-15 for a, b in zip(values, values[1:]))


def test_system_success_error_free_limit():
    assert system_success_prob(_params(eps=0.0), 6).p_s == 1.0


def test_censored_comm_time_error_free():
    params = _params(eps=0.0)
    draw = sample_censored_comm_time(params, 6, substream(5))
    assert not draw.is_infinite and draw.value > 0


def test_censored_comm_time_failure_rate():
    params = _params(k=40, eps=0.5)  # shard 3
    rng = substream(17)
    fails = sum(sample_censored_comm_time(params, 4, rng).is_infinite for _ in range(20000))
    p = worker_success_prob(params, 4)
    se = math.sqrt(p * (1 - p) / 20000)
    assert fails / 20000 == pytest.approx(1 - p, abs=3 * se)


def test_censored_comm_time_precondition():
    with pytest.raises(PreconditionError):
        sample_censored_comm_time(_params(), 5, substream(1))  # shard is 6


def test_grid_monotone_in_gamma_and_epsilon_pathwise():
    params = _params()
    grid = censored_sample_grid(params, [0.1, 0.3, 0.5], [6, 8, 12], 4000, 3)
    assert np.all(grid[:, 1, :] <= grid[:, 0, :])  # larger cap never slower
    assert np.all(grid[:, 2, :] <= grid[:, 1, :])
    assert np.all(grid[0, :, :] <= grid[1, :, :])  # cleaner channel never slower
    assert np.all(grid[1, :, :] <= grid[2, :, :])


def test_grid_failure_fraction_tracks_exact_probability():
    params = _params(k=30, eps=0.4)  # shard 4
    gamma = 6
    samples = reliability.censored_runtime_samples(params, gamma, 10**5, 11)
    finite = np.isfinite(samples).mean()
    p_s = system_success_prob(params, gamma).p_s
    se = math.sqrt(p_s * (1 - p_s) / 10**5)
    assert finite == pytest.approx(p_s, abs=3 * se)


def test_cdf_below_success_probability():
    params = _params()
    est = runtime_cdf(params, 8, 9.0, 20000, 2)
    assert est.mean <= system_success_prob(params, 8).p_s + 3 * est.std_error


def test_cdf_converges_to_success_probability_for_large_tau():
    params = _params(k=30)
    est = runtime_cdf(params, 6, 1e9, 50000, 4)
    p_s = system_success_prob(params, 6).p_s
    assert est.mean == pytest.approx(p_s, abs=3 * est.std_error + 1e-12)


def test_cdf_curve_nondecreasing_under_crn():
    params = _params()
    curve = runtime_cdf_curve(params, range(6, 21), 8.6, 20000, 9)
    values = [e.mean for e in curve]
    assert all(a <= b for a, b in zip(values, values[1:]))


def test_cdf_converges_to_unlimited_regime():
    params = _params(k=30, eps=0.2)
    est = runtime_cdf(params, 40, 6.0, 50000, 21)
    unlimited = montecarlo.runtime_samples(params, 50000, 22)
    ref = float((unlimited <= 6.0).mean())
    se = math.hypot(est.std_error, math.sqrt(ref * (1 - ref) / 50000))
    assert est.mean == pytest.approx(ref, abs=3 * se)


def test_quantile_infeasible_when_success_too_rare():
    params = SystemParams(n=3, k=3, m=9, mu1=1.0, mu2=1.0, epsilon=0.5)
    value = latency_quantile(params, 3, 0.1, 5000, 5)
    assert math.isinf(value)


def test_quantile_alpha_near_one_approaches_minimum():
    params = _params(k=30, eps=0.1)
    samples = reliability.censored_runtime_samples(params, 10, 5000, 6)
    q = reliability.empirical_quantile(samples, 0.99999, 5000)
    assert q == pytest.approx(float(np.min(samples)), rel=1e-6)


def test_quantile_consistent_with_cdf():
    params = _params(k=20)
    q = latency_quantile(params, 13, 0.03, 30000, 8)
    est = runtime_cdf(params, 13, q, 30000, 8)
    assert est.mean >= 0.97  # same seed: the quantile is exactly the CDF inverse
    assert math.isfinite(q)


def test_grid_rejects_bad_arguments():
    params = _params()
    with pytest.raises(PreconditionError):
        censored_sample_grid(params, [0.1], [3], 100, 1)  # cap below the shard
    with pytest.raises(RangeError):
        censored_sample_grid(params, [], [6], 100, 1)
    with pytest.raises(RangeError):
        censored_sample_grid(params, [1.0], [6], 100, 1)
    with pytest.raises(RangeError):
        runtime_cdf(params, 8, -1.0, 200, 1)


def test_success_profile_validation():
    with pytest.raises(RangeError):
        reliability.SuccessProfile(p=1.5, p_s=0.5, gamma=3)
