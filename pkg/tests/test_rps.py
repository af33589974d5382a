import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from delaylab.appdelay import sub_mtu_params
from delaylab.errors import InstabilityError, InvalidDistributionError, ModelRangeError, ValidationError
from delaylab.rps import (QueueMoments, RpsParams, ServiceMoments, batch_poisson_moments,
                          mean_delay_zero_switchover, mean_wait_nonzero_switchover, offered_load,
                          rps_intermediates, switchover_limit_check)


def single(lam, p, p2, **kw):
    return RpsParams([QueueMoments.batch_poisson(lam)], [ServiceMoments(p, p2)], gamma=[1.0], **kw)


def random_params(rng, n=None, gamma=None, unit=1.0):
    n = n or int(rng.integers(2, 7))
    rho = rng.uniform(0.05, 0.95)
    p = rng.uniform(0.2, 3.0, n) * unit
    p2 = p * p * rng.uniform(1, 2, n)
    b = rng.uniform(1, 3, n)
    b2 = b * b * rng.uniform(1, 2, n)
    a = rho * rng.dirichlet(np.ones(n)) / p
    return RpsParams([QueueMoments.batch_poisson(a[i] / b[i], b[i], b2[i]) for i in range(n)],
                     [ServiceMoments(p[i], p2[i]) for i in range(n)], gamma=gamma)


# -- batch moments ---------------------------------------------------------

def test_unit_batches_are_poisson():
    assert batch_poisson_moments(10, 1, 1) == (10, 10)


@pytest.mark.parametrize("lam,sampler,b,b2", [
    (5.0, lambda rng, k: rng.choice([1.0, 3.0], k), 2.0, 5.0),
    (10.0, lambda rng, k: rng.exponential(0.75, k), 0.75, 1.125),
])
def test_batch_moments_against_simulated_increments(lam, sampler, b, b2):
    a, e = batch_poisson_moments(lam, b, b2)
    rng = np.random.default_rng(3)
    reps = 200_000
    for t in (0.5, 1.0, 2.0):
        counts = rng.poisson(lam * t, reps)
        draws = sampler(rng, int(counts.sum()))
        owner = np.repeat(np.arange(reps), counts)
        inc = np.bincount(owner, weights=draws, minlength=reps)
        m1, m2 = inc.mean(), (inc**2).mean()
        # linear-quadratic model: E[A] = a t, E[A^2] = e t + a^2 t^2
        assert abs(m1 - a * t) < 4 * inc.std() / math.sqrt(reps)
        assert abs(m2 - (e * t + (a * t) ** 2)) < 4 * (inc**2).std() / math.sqrt(reps)


def test_bad_batch_moments():
    with pytest.raises(InvalidDistributionError):
        batch_poisson_moments(1.0, 2.0, 3.0)
    with pytest.raises(ValidationError):
        batch_poisson_moments(0.0, 1.0, 1.0)


# -- parameter validation ---------------------------------------------------

def test_offered_load_table1():
    par = RpsParams([QueueMoments.batch_poisson(10)] * 4, [ServiceMoments(0.75 / 70, 2e-4)] * 4)
    assert offered_load(par)[1] == pytest.approx(0.4286, abs=1e-4)
    par = RpsParams([QueueMoments.batch_poisson(16.7)] * 4, [ServiceMoments(0.75 / 70, 2e-4)] * 4)
    assert par.rho == pytest.approx(0.7157, abs=1e-4)


def test_unstable_rejected():
    with pytest.raises(InstabilityError, match="rho"):
        single(100.0, 0.01, 1e-4)


def test_gamma_validation():
    q, s = [QueueMoments.batch_poisson(1)] * 2, [ServiceMoments(0.1, 0.01)] * 2
    with pytest.raises(ValidationError):
        RpsParams(q, s, gamma=[0.7, 0.7])
    with pytest.raises(ValidationError):
        RpsParams(q, s, gamma=[1.0, 0.0])


# -- zero switchover ---------------------------------------------------------

@settings(max_examples=300, deadline=None)
@given(lam=st.floats(0.01, 100.0), p=st.floats(1e-4, 1.0), cv2=st.floats(0.0, 4.0),
       load=st.floats(0.001, 0.949))
def test_pollaczek_khinchine_reduction(lam, p, cv2, load):
    p = load / lam
    p2 = p * p * (1 + cv2)
    got = mean_delay_zero_switchover(single(lam, p, p2))[0]
    pk = lam * p2 / (2 * (1 - load)) + p
    assert got == pytest.approx(pk, rel=1e-12)


def test_empty_system_delay_is_service():
    par = RpsParams([QueueMoments.batch_poisson(1e-9)] * 3,
                    [ServiceMoments(p, 2 * p * p) for p in (0.01, 0.02, 0.03)])
    assert mean_delay_zero_switchover(par) == pytest.approx([0.01, 0.02, 0.03], rel=1e-6)


def test_zero_switchover_ignores_gamma(rng):
    par = random_params(rng, n=4)
    other = RpsParams.from_arrays(par.a, par.e, par.p, par.p2, par.b, par.b2,
                                  gamma=[0.1, 0.2, 0.3, 0.4])
    assert np.array_equal(mean_delay_zero_switchover(par), mean_delay_zero_switchover(other))


def test_permutation_symmetry(rng):
    for _ in range(50):
        par = random_params(rng)
        perm = rng.permutation(par.n)
        shuffled = RpsParams.from_arrays(par.a[perm], par.e[perm], par.p[perm], par.p2[perm],
                                         par.b[perm], par.b2[perm])
        assert mean_delay_zero_switchover(shuffled) == pytest.approx(
            mean_delay_zero_switchover(par)[perm], rel=1e-13)


def test_time_scaling(rng):
    for _ in range(50):
        par = random_params(rng)
        k = float(rng.uniform(0.01, 100))
        scaled = RpsParams.from_arrays(par.a / k, par.e / k, par.p * k, par.p2 * k * k, par.b, par.b2)
        assert mean_delay_zero_switchover(scaled) == pytest.approx(
            k * mean_delay_zero_switchover(par), rel=1e-12)
        sw = par.with_switchover(1e-4 * par.p.mean())
        sw_scaled = scaled.with_switchover(1e-4 * k * par.p.mean())
        assert mean_wait_nonzero_switchover(sw_scaled).mean_wait == pytest.approx(
            k * mean_wait_nonzero_switchover(sw).mean_wait, rel=1e-9)


def test_monotone_in_each_rate(rng):
    for _ in range(20):
        par = random_params(rng)
        for l in range(par.n):
            prev = mean_delay_zero_switchover(par)
            for f in np.linspace(1.0, 0.99 / par.rho, 8)[1:]:
                a = par.a.copy()
                a[l] = par.a[l] * f
                if np.dot(a, par.p) >= 1:
                    break
                cur = mean_delay_zero_switchover(RpsParams.from_arrays(
                    a, par.e * a / par.a, par.p, par.p2, par.b, par.b2))
                assert np.all(cur >= prev - 1e-15)
                prev = cur


def test_table1_value():
    from delaylab import Scenario, Uniform
    sc = Scenario.homogeneous([10] * 4, Uniform(750, 1500), mtu_bytes=1500, capacity_pkts_per_s=70)
    assert mean_delay_zero_switchover(sub_mtu_params(sc)) * 1e3 == pytest.approx([14.9] * 4, abs=0.05)


# -- nonzero switchover --------------------------------------------------------

def test_intermediates_need_switchover(rng):
    with pytest.raises(ValidationError, match="switchover"):
        rps_intermediates(random_params(rng))


def test_intermediates_symmetric():
    q, s = [QueueMoments.batch_poisson(20)] * 2, [ServiceMoments(0.01, 2e-4)] * 2
    mid = rps_intermediates(RpsParams(q, s, switchover=1e-3))
    assert mid.chi[0] == mid.chi[1] and mid.psi[0] == mid.psi[1]
    assert np.array_equal(mid.nabla, mid.nabla.T)


def test_chi_tends_to_one(rng):
    par = random_params(rng)
    for eps, tol in ((1e-4, 1e-2), (1e-8, 1e-6), (1e-12, 1e-10)):
        assert rps_intermediates(par.with_switchover(eps)).chi == pytest.approx(1.0, abs=tol)


def test_intermediates_finite_and_psi_nonnegative(rng):
    for _ in range(1000):
        par = random_params(rng)
        eps = float(rng.uniform(1e-6, 1e-3)) * par.p.mean()
        mid = rps_intermediates(par.with_switchover(eps))
        assert np.all(np.isfinite(mid.nabla))
        assert np.all(mid.psi >= 0)


def test_symmetric_queues_share_wait():
    q, s = [QueueMoments.batch_poisson(15, 1.5, 3.0)] * 3, [ServiceMoments(0.01, 1.5e-4)] * 3
    sol = mean_wait_nonzero_switchover(RpsParams(q, s, switchover=5e-4))
    assert np.ptp(sol.mean_wait) == 0.0
    assert np.all((sol.prob_nonempty >= 0) & (sol.prob_nonempty <= 1))


def test_switchover_too_large():
    with pytest.raises(ModelRangeError):
        mean_wait_nonzero_switchover(single(30.0, 0.02, 4e-4, switchover=0.05))


def _vacation_sim(lam, p, s, n_pkts, seed):
    """Single queue, one packet per visit, a constant switchover after every
    visit (served or empty).  Returns mean arrival-to-departure time."""
    rng = np.random.default_rng(seed)
    arrivals = np.cumsum(rng.exponential(1.0 / lam, n_pkts)).tolist()
    boundary, total, ceil = 0.0, 0.0, math.ceil
    for a in arrivals:
        start = boundary if a <= boundary else boundary + ceil((a - boundary) / s) * s
        done = start + p
        total += done - a
        boundary = done + s
    return total / n_pkts


def test_single_queue_matches_vacation_oracle():
    lam, p, s = 30.0, 0.02, 0.004
    want = mean_wait_nonzero_switchover(single(lam, p, p * p, switchover=s)).mean_wait[0]
    reps = np.array([_vacation_sim(lam, p, s, 100_000, seed) for seed in range(10)])
    se = reps.std(ddof=1) / math.sqrt(len(reps))
    assert abs(reps.mean() - want) < 3 * se


# -- limit --------------------------------------------------------------------

def _table1_params():
    from delaylab import Scenario, Uniform
    sc = Scenario.homogeneous([10] * 4, Uniform(750, 1500), mtu_bytes=1500, capacity_pkts_per_s=70)
    return sub_mtu_params(sc)


def test_limit_sequence_converges_geometrically():
    par = _table1_params()
    unit = par.p.mean()
    rep = switchover_limit_check(par, unit * np.array([1e-2, 1e-3, 1e-4, 1e-5, 1e-6]))
    assert rep.monotone
    worst = rep.gaps.max(axis=1)
    ratios = worst[1:] / worst[:-1]
    assert np.all(ratios < 0.2)
    # switchover as a fraction of the mean service time
    assert rep.relative_gaps[0].max() < 0.10
    assert rep.relative_gaps[-1].max() < 1e-4
    assert np.ptp(rep.gaps, axis=1).max() <= 1e-15 * rep.limit.max()


def test_limit_in_seconds_is_not_a_small_perturbation():
    # 10 ms of switchover is as long as a whole service; the general form
    # is then far from its limit
    rep = switchover_limit_check(_table1_params(), [1e-2, 1e-9])
    assert rep.relative_gaps[0].max() > 1.0
    assert rep.relative_gaps[1].max() < 1e-6


def test_limit_consistency_randomized(rng):
    for _ in range(200):
        par = random_params(rng)
        rep = switchover_limit_check(par, [1e-9 * par.p.mean()])
        assert rep.relative_gaps.max() < 1e-6


def test_limit_check_rejects_bad_sequence():
    with pytest.raises(ValidationError):
        switchover_limit_check(_table1_params(), [1e-3, 1e-2])
