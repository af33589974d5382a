import io
import math

import numpy as np
import pytest

from delaylab.appdelay import SUB_MTU, SUPER_MTU, mean_delay
from delaylab.distributions import Deterministic, Exponential, Uniform
from delaylab.errors import ConfigurationError, ValidationError
from delaylab.mac import MacParams, aggregate_capacity
from delaylab.sim import (available_backends, estimate_capacity, generate_arrivals, get_kernels,
                          replication_seeds, run_dcf_simulation, run_rps_oracle, trace_csv)
from delaylab.sim.engine import TRACE_HEADER, n_fragments

from conftest import table_scenario

MAC = MacParams()
needs_both = pytest.mark.skipif(len(available_backends()) < 2, reason="compiled kernels not built")


def _same(a, b):
    assert np.array_equal(a.rep_means, b.rep_means)
    for ra, rb in zip(a.runs, b.runs):
        assert np.array_equal(ra.delivery, rb.delivery, equal_nan=True)
        assert ra.end_time == rb.end_time


# -- backends and determinism -----------------------------------------------

@needs_both
@pytest.mark.parametrize("engine", ["dcf", "rps"])
def test_backends_bit_identical(engine, table1):
    sc = table_scenario([6, 9, 12, 3], Exponential(1600), 69.2, SUB_MTU)
    for scen in (table1, sc):
        fn = run_dcf_simulation if engine == "dcf" else run_rps_oracle
        kw = dict(seed=4, replications=2, horizon=60.0)
        _same(fn(scen, backend="cython", **kw), fn(scen, backend="python", **kw))


@needs_both
def test_saturated_backends_bit_identical():
    for n in (1, 3, 12):
        a = estimate_capacity(n, MAC, seed=9, horizon=20.0, backend="cython")
        b = estimate_capacity(n, MAC, seed=9, horizon=20.0, backend="python")
        assert a == b


def test_reruns_bit_identical(table1, table5, backend):
    for fn, sc in ((run_dcf_simulation, table1), (run_rps_oracle, table5), (run_dcf_simulation, table5)):
        kw = dict(seed=123, replications=3, horizon=40.0, backend=backend)
        _same(fn(sc, **kw), fn(sc, **kw))


def test_parallel_replications_match_serial(table1):
    kw = dict(seed=5, replications=4, horizon=40.0)
    _same(run_dcf_simulation(table1, workers=1, **kw), run_dcf_simulation(table1, workers=2, **kw))


def test_seed_handling():
    seeds = replication_seeds(1, 30)
    assert len(set(seeds)) == 30 and seeds == replication_seeds(1, 30)
    assert seeds != replication_seeds(2, 30)
    with pytest.raises(ConfigurationError, match="seed"):
        replication_seeds([1, 2, 2], 3)
    with pytest.raises(ConfigurationError):
        replication_seeds([1, 2], 3)
    with pytest.raises(ConfigurationError):
        replication_seeds(1, 0)


def test_duplicate_seed_rejected_by_engines(table1):
    with pytest.raises(ConfigurationError):
        run_dcf_simulation(table1, seed=[7, 7], replications=2, horizon=5.0)
    with pytest.raises(ConfigurationError):
        run_rps_oracle(table1, seed=[7, 7], replications=2, horizon=5.0)


def test_horizon_or_budget_required(table1):
    with pytest.raises(ConfigurationError):
        run_rps_oracle(table1, replications=2)
    with pytest.raises(ConfigurationError):
        run_rps_oracle(table1, replications=2, horizon=10.0, warmup=1.0)


# -- hygiene ------------------------------------------------------------------

@pytest.mark.parametrize("engine", ["dcf", "rps"])
def test_conservation_and_little(engine, table1, table5):
    fn = run_dcf_simulation if engine == "dcf" else run_rps_oracle
    for sc in (table1, table5, table_scenario([2, 15, 5, 9], Uniform(300, 1500), 70.0)):
        st = fn(sc, seed=21, replications=3, horizon=400.0)
        for run in st.runs:
            assert run.conservation_ok()
            assert np.all(run.arrived == run.delivered() + run.in_queue())
            assert run.arrived.sum() == run.arrivals.n_must or run.arrived.sum() >= run.arrivals.n_must
            assert np.all(np.abs(run.little_ratio() - 1) < 0.05)


def test_dcf_delay_lower_bound(backend):
    sc = table_scenario([3, 3, 3], Uniform(1500, 4500), 70.0, SUPER_MTU)
    st = run_dcf_simulation(sc, MAC, seed=2, replications=2, horizon=200.0, backend=backend)
    for run in st.runs:
        ok = ~np.isnan(run.delivery)
        nb = run.arrivals.nbytes[ok]
        nf = n_fragments(nb, 1500.0)
        # every fragment carries a header; payload adds up to the packet
        airtime = (nf * MAC.header_bits + 8 * nb) / MAC.data_rate_bps
        assert np.all(run.delays()[ok] >= airtime - 1e-12)
        assert np.all(run.fragments[ok] == nf)


def test_dcf_contention_free_single_node(backend):
    sc = table_scenario([0.2], Deterministic(1500), 70.0)
    st = run_dcf_simulation(sc, MAC, seed=3, replications=4, horizon=4000.0, backend=backend)
    fixed = MAC.frame_airtime(12000.0) + MAC.sifs + MAC.ack_time
    want = (MAC.W - 1) / 2 * MAC.slot_time + fixed
    d = np.concatenate([r.delays()[r.measured_mask()] for r in st.runs])
    slots = (d - fixed) / MAC.slot_time
    on_lattice = np.abs(slots - np.round(slots)) < 1e-6
    assert on_lattice.mean() > 0.99
    assert np.all((np.round(slots[on_lattice]) >= 0) & (np.round(slots[on_lattice]) < MAC.W))
    assert abs(d[on_lattice].mean() - want) < 4 * d[on_lattice].std() / math.sqrt(on_lattice.sum())


def test_rps_oracle_md1(backend):
    lam, C = 35.0, 70.0
    sc = table_scenario([lam], Deterministic(1500), C)
    st = run_rps_oracle(sc, seed=8, replications=10, horizon=3000.0, backend=backend)
    p = 1 / C
    rho = lam * p
    pk = lam * p * p / (2 * (1 - rho)) + p
    assert abs(st.mean[0] - pk) < 3 * st.se[0]


def test_rps_oracle_symmetric_queues():
    sc = table_scenario([12] * 4, Uniform(750, 1500), 70.0)
    st = run_rps_oracle(sc, seed=2, replications=30, horizon=400.0)
    for i in range(4):
        for j in range(i + 1, 4):
            assert abs(st.mean[i] - st.mean[j]) < 3 * math.hypot(st.se[i], st.se[j])


def test_rps_oracle_table1_within_two_percent(table1):
    st = run_rps_oracle(table1, seed=1, replications=30, packet_budget=400_000)
    want = mean_delay(table1).d_avg
    assert np.all(np.abs(st.mean / want - 1) < 0.02)


def test_rps_oracle_load_weighted_mean_matches():
    # with unequal loads the per-queue split differs from the closed form,
    # but the work-conserving load-weighted average does not
    sc = table_scenario([2.0, 6.0, 10.0, 14.0], Uniform(750, 1500), 70.0)
    st = run_rps_oracle(sc, seed=3, replications=30, packet_budget=600_000)
    w = np.array(sc.lambdas) / sum(sc.lambdas)
    sim = st.rep_means @ w
    want = float(mean_delay(sc).d_avg @ w)
    se = sim.std(ddof=1) / math.sqrt(len(sim))
    assert abs(sim.mean() - want) < 3 * se + 1e-3 * want


def test_dcf_table1_near_analytic(table1):
    st = run_dcf_simulation(table1, MAC, seed=1, replications=10, packet_budget=100_000)
    assert np.all(np.abs(st.mean * 1e3 / 14.95 - 1) < 0.10)
    assert np.all(st.ci_half_width > 0)
    assert st.total_packets > 0.9 * 100_000 * 0.9


# -- capacity -------------------------------------------------------------------

def test_saturated_single_node():
    est = estimate_capacity(1, MAC, seed=1, horizon=400.0)
    t_frame = MAC.success_time(12000.0) + (MAC.W - 1) / 2 * MAC.slot_time
    assert est.collisions == 0
    assert est.pkts_per_s == pytest.approx(1 / t_frame, rel=0.005)


def test_saturated_matches_model_and_is_flat():
    sim4 = estimate_capacity(4, MAC, seed=2, horizon=300.0).pkts_per_s
    assert sim4 == pytest.approx(aggregate_capacity(MAC, 4, 12000.0).pkts_per_s, rel=0.10)
    c2 = estimate_capacity(2, MAC, seed=3, horizon=300.0).pkts_per_s
    c20 = estimate_capacity(20, MAC, seed=4, horizon=300.0).pkts_per_s
    # relative drop from the larger value
    assert (max(c2, c20) - min(c2, c20)) / max(c2, c20) < 0.20


def test_capacity_rejects_no_nodes():
    with pytest.raises(ValidationError):
        estimate_capacity(0)


# -- kernels and plumbing ---------------------------------------------------------

def test_kernel_reports_exhausted_uniforms(backend, table1):
    k = get_kernels(backend)
    arr = generate_arrivals(table1, 5.0, np.random.default_rng(0))
    n = table1.n
    state = k.dcf_kernel(arr.time, arr.node, arr.by_node, arr.node_start, arr.nbytes, 1500.0,
                         np.random.default_rng(1).random(3), n, arr.n_must, 32, 5, 20e-6, 10e-6,
                         50e-6, 304e-6, 704.0, 1e6, -1.0, 1, np.full(arr.size, np.nan),
                         np.zeros(n, np.int64), np.zeros(n, np.int64), np.zeros(3, np.int64))
    assert state[3] == 1


def test_arrivals_layout(table1, rng):
    arr = generate_arrivals(table1, 100.0, rng)
    assert np.all(np.diff(arr.time) >= 0)
    assert arr.n_must == np.searchsorted(arr.time, 100.0)
    for i in range(table1.n):
        idx = arr.by_node[arr.node_start[i]:arr.node_start[i + 1]]
        assert np.all(arr.node[idx] == i) and np.all(np.diff(idx) > 0)


def test_trace_output(table1):
    st = run_dcf_simulation(table1, seed=1, replications=2, horizon=20.0)
    run = st.runs[0]
    text = trace_csv(run)
    lines = text.strip().split("\n")
    assert lines[0] == ",".join(TRACE_HEADER) == "node,arrival_time_s,delivery_time_s,bytes,fragments"
    assert len(lines) - 1 == int(run.delivered().sum())
    node, a, d, b, f = lines[1].split(",")
    assert float(d) > float(a) and int(f) == 1


def test_summary_fields(table1):
    st = run_rps_oracle(table1, seed=1, replications=5, horizon=100.0)
    assert st.engine == "rps-oracle" and len(st.seeds) == 5
    assert st.rep_means.shape == (5, 4)
    assert np.all(st.mean >= 750 / 1500 / 70)
    assert st.capacity_estimate == pytest.approx(table1.rho * 70, rel=0.1)
    assert np.all(st.ci_half_width > st.se)
