"""Replicated simulation runs and their statistics.

Each replication draws all arrivals and packet lengths up front with numpy,
hands flat arrays to a kernel (compiled or pure Python), and gets back the
delivery epoch of every packet.  Delays, occupancy and confidence
intervals are all computed here from those arrays.

Measurement window: packets arriving in ``[warmup * T, T)`` are measured.
Arrivals keep coming until ``T * (1 + tail)`` so that the packets near
``T`` still see competing traffic, and the run stops once every packet that
arrived before ``T`` has been delivered.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from ..appdelay import SUB_MTU, Scenario
from ..distributions import poisson_arrival_times
from ..errors import ConfigurationError, ValidationError
from ..mac import MacParams
from . import backend as _backend

log = logging.getLogger(__name__)

DEFAULT_REPLICATIONS = 30
DEFAULT_WARMUP = 0.1
ARRIVAL_TAIL = 0.1


@dataclass
class Arrivals:
    time: np.ndarray
    node: np.ndarray
    nbytes: np.ndarray
    by_node: np.ndarray
    node_start: np.ndarray
    n_must: int

    @property
    def size(self):
        return len(self.time)


def generate_arrivals(scenario: Scenario, horizon: float, rng: np.random.Generator,
                      tail: float = ARRIVAL_TAIL) -> Arrivals:
    gen_until = horizon * (1.0 + tail)
    times, nodes, lengths = [], [], []
    for i, (lam, dist) in enumerate(zip(scenario.lambdas, scenario.dists)):
        t = poisson_arrival_times(lam, gen_until, rng)
        times.append(t)
        nodes.append(np.full(len(t), i, dtype=np.int64))
        lengths.append(np.asarray(dist.sample(rng, len(t)), dtype=float))
    time = np.concatenate(times)
    order = np.argsort(time, kind="stable")
    time = np.ascontiguousarray(time[order])
    node = np.ascontiguousarray(np.concatenate(nodes)[order])
    nbytes = np.ascontiguousarray(np.concatenate(lengths)[order])
    by_node = np.ascontiguousarray(np.argsort(node, kind="stable").astype(np.int64))
    counts = np.bincount(node, minlength=scenario.n)
    node_start = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    n_must = int(np.searchsorted(time, horizon, side="left"))
    return Arrivals(time, node, nbytes, by_node, node_start, n_must)


def n_fragments(nbytes: np.ndarray, mtu: float) -> np.ndarray:
    return np.maximum(np.ceil(nbytes / mtu), 1).astype(np.int64)


@dataclass
class RunResult:
    """One replication."""

    seed: int
    arrivals: Arrivals
    delivery: np.ndarray
    fragments: np.ndarray
    window: tuple[float, float]
    end_time: float
    arrived: np.ndarray      # per node, admitted by end_time
    head: np.ndarray         # per node, packets that left the queue
    counters: dict = field(default_factory=dict)

    def delays(self) -> np.ndarray:
        return self.delivery - self.arrivals.time

    def measured_mask(self) -> np.ndarray:
        t0, t1 = self.window
        a = self.arrivals.time
        return (a >= t0) & (a < t1)

    def node_delays(self, i: int) -> np.ndarray:
        mask = self.measured_mask() & (self.arrivals.node == i)
        return self.delays()[mask]

    @property
    def n_nodes(self):
        return len(self.arrived)

    def delivered(self) -> np.ndarray:
        ok = ~np.isnan(self.delivery)
        return np.bincount(self.arrivals.node[ok], minlength=self.n_nodes)

    def in_queue(self) -> np.ndarray:
        return self.arrived - self.head

    def conservation_ok(self) -> bool:
        return bool(np.array_equal(self.arrived, self.delivered() + self.in_queue()))

    def mean_in_system(self) -> np.ndarray:
        """Time-average packets in system per node over the window."""
        t0, t1 = self.window
        a = self.arrivals.time
        d = np.where(np.isnan(self.delivery), np.inf, self.delivery)
        overlap = np.clip(np.minimum(d, t1) - np.maximum(a, t0), 0.0, None)
        return np.bincount(self.arrivals.node, weights=overlap, minlength=self.n_nodes) / (t1 - t0)

    def arrival_rate(self) -> np.ndarray:
        t0, t1 = self.window
        mask = self.measured_mask()
        return np.bincount(self.arrivals.node[mask], minlength=self.n_nodes) / (t1 - t0)

    def little_ratio(self) -> np.ndarray:
        """L / (lambda * W) per node; 1 when Little's law holds exactly."""
        w = np.array([self.node_delays(i).mean() for i in range(self.n_nodes)])
        return self.mean_in_system() / (self.arrival_rate() * w)

    def throughput(self) -> np.ndarray:
        """Delivered packets per second, per node, within the window."""
        t0, t1 = self.window
        d = self.delivery
        ok = (~np.isnan(d)) & (d >= t0) & (d < t1)
        return np.bincount(self.arrivals.node[ok], minlength=self.n_nodes) / (t1 - t0)

    def trace_rows(self):
        ok = ~np.isnan(self.delivery)
        arr = self.arrivals
        for j in np.flatnonzero(ok):
            yield (int(arr.node[j]), float(arr.time[j]), float(self.delivery[j]),
                   float(arr.nbytes[j]), int(self.fragments[j]))


TRACE_HEADER = ("node", "arrival_time_s", "delivery_time_s", "bytes", "fragments")


def write_trace(run: RunResult, fh) -> None:
    """Per-packet trace: one comma-separated record per delivered packet."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRACE_HEADER)
    for node, a, d, nbytes, nf in run.trace_rows():
        w.writerow((node, repr(a), repr(d), repr(nbytes), nf))


@dataclass
class NodeStats:
    count: int
    mean: float
    variance: float
    se: float
    ci_half_width: float
    throughput: float
    mean_in_system: float


@dataclass
class DelayStats:
    """Across-replication summary.  Means are averages of replication
    means; standard errors and CIs (95 %, Student t) come from the spread of
    those replication means."""

    engine: str
    backend: str
    seeds: list[int]
    nodes: list[NodeStats]
    rep_means: np.ndarray            # (replications, n)
    aggregate_mean: float
    aggregate_se: float
    capacity_estimate: float         # MTU-equivalents per second delivered
    runs: list[RunResult] = field(default_factory=list, repr=False)

    @property
    def mean(self) -> np.ndarray:
        return np.array([s.mean for s in self.nodes])

    @property
    def se(self) -> np.ndarray:
        return np.array([s.se for s in self.nodes])

    @property
    def ci_half_width(self) -> np.ndarray:
        return np.array([s.ci_half_width for s in self.nodes])

    @property
    def total_packets(self) -> int:
        return int(sum(s.count for s in self.nodes))


def _t_quantile(r: int) -> float:
    return float(stats.t.ppf(0.975, r - 1)) if r > 1 else math.nan


def summarize(runs: Sequence[RunResult], engine: str, backend: str, mtu: float) -> DelayStats:
    n = runs[0].n_nodes
    r = len(runs)
    rep_means = np.array([[run.node_delays(i).mean() if len(run.node_delays(i)) else np.nan
                           for i in range(n)] for run in runs])
    agg = np.array([run.delays()[run.measured_mask()].mean() for run in runs])
    tq = _t_quantile(r)
    nodes = []
    for i in range(n):
        samples = [run.node_delays(i) for run in runs]
        col = rep_means[:, i]
        se = float(col.std(ddof=1) / math.sqrt(r)) if r > 1 else math.nan
        nodes.append(NodeStats(
            count=int(sum(len(s) for s in samples)),
            mean=float(col.mean()),
            variance=float(np.concatenate(samples).var()) if samples else math.nan,
            se=se,
            ci_half_width=tq * se,
            throughput=float(np.mean([run.throughput()[i] for run in runs])),
            mean_in_system=float(np.mean([run.mean_in_system()[i] for run in runs])),
        ))
    cap = []
    for run in runs:
        t0, t1 = run.window
        d = run.delivery
        ok = (~np.isnan(d)) & (d >= t0) & (d < t1)
        cap.append(run.arrivals.nbytes[ok].sum() / mtu / (t1 - t0))
    return DelayStats(
        engine=engine, backend=backend, seeds=[run.seed for run in runs], nodes=nodes,
        rep_means=rep_means, aggregate_mean=float(agg.mean()),
        aggregate_se=float(agg.std(ddof=1) / math.sqrt(r)) if r > 1 else math.nan,
        capacity_estimate=float(np.mean(cap)), runs=list(runs))


def replication_seeds(seed, replications: int) -> list[int]:
    """Expand a base seed into one distinct seed per replication, or
    validate an explicit list."""
    if replications < 1:
        raise ConfigurationError("need at least one replication", "replications")
    if isinstance(seed, (list, tuple, np.ndarray)):
        seeds = [int(s) for s in seed]
        if len(seeds) != replications:
            raise ConfigurationError(f"{len(seeds)} seeds given for {replications} replications", "seed")
        if len(set(seeds)) != len(seeds):
            raise ConfigurationError("seed reused across replications", "seed")
        return seeds
    ss = np.random.SeedSequence(int(seed))
    return [int(c.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1)) for c in ss.spawn(replications)]


def resolve_horizon(scenario: Scenario, replications: int, warmup: float,
                    horizon: float | None, packet_budget: int | None) -> float:
    if not 0.0 <= warmup < 1.0:
        raise ConfigurationError("warmup fraction must lie in [0, 1)", "warmup")
    if horizon is None:
        if packet_budget is None:
            raise ConfigurationError("give a horizon or a packet budget", "horizon")
        total_rate = sum(scenario.lambdas)
        horizon = packet_budget / (replications * total_rate * (1.0 - warmup))
    if not horizon > 0:
        raise ConfigurationError("horizon must be positive", "horizon")
    return float(horizon)


def _map(fn, jobs, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(job) for job in jobs]


# -- random polling oracle -------------------------------------------------

def _rps_replication(job) -> RunResult:
    scenario, horizon, warmup, seed, kernel_name = job
    kernels = _backend.get_kernels(kernel_name)
    rng = np.random.default_rng(seed)
    arr = generate_arrivals(scenario, horizon, rng)
    unit = scenario.unit_service
    if scenario.regime == SUB_MTU:
        nfrag = np.ones(arr.size, dtype=np.int64)
        service = arr.nbytes / scenario.mtu_bytes * unit
    else:
        nfrag = n_fragments(arr.nbytes, scenario.mtu_bytes)
        service = np.full(arr.size, unit)
    uniforms = rng.random(int(nfrag.sum()) + 1)
    delivery = np.full(arr.size, np.nan)
    arrived = np.zeros(scenario.n, dtype=np.int64)
    head = np.zeros(scenario.n, dtype=np.int64)
    state = kernels.rps_kernel(arr.time, arr.node, arr.by_node, arr.node_start, nfrag,
                               np.ascontiguousarray(service), uniforms, scenario.n, arr.n_must,
                               delivery, arrived, head)
    assert state[3] == 0, "uniform buffer sized to the fragment count cannot run dry"
    return RunResult(seed=seed, arrivals=arr, delivery=delivery, fragments=nfrag,
                     window=(warmup * horizon, horizon), end_time=float(state[0]),
                     arrived=arrived, head=head,
                     counters={"decisions": int(state[2]), "service": service})


def run_rps_oracle(scenario: Scenario, seed=0, replications: int = DEFAULT_REPLICATIONS,
                   horizon: float | None = None, packet_budget: int | None = None,
                   warmup: float = DEFAULT_WARMUP, workers: int = 1,
                   backend: str | None = None) -> DelayStats:
    """Simulate the abstract polling server directly.

    A single server picks a nonempty queue uniformly at random and serves one
    fragment: ``omega * P / C`` seconds in the sub-MTU regime, ``P / C`` per
    MTU-sized fragment (``ceil(bytes / MTU)`` of them) in the super-MTU one.
    """
    horizon = resolve_horizon(scenario, replications, warmup, horizon, packet_budget)
    seeds = replication_seeds(seed, replications)
    name = _backend.backend_name(backend)
    runs = _map(_rps_replication, [(scenario, horizon, warmup, s, name) for s in seeds], workers)
    return summarize(runs, "rps-oracle", name, scenario.mtu_bytes)


# -- DCF -------------------------------------------------------------------

def _mac_args(mac: MacParams):
    return (int(mac.W), int(mac.m), mac.slot_time, mac.sifs, mac.difs, mac.ack_time,
            float(mac.header_bits), mac.data_rate_bps,
            -1.0 if mac.collision_time is None else mac.collision_time,
            1 if mac.include_overhead else 0)


def _dcf_replication(job) -> RunResult:
    scenario, mac, horizon, warmup, seed, kernel_name = job
    kernels = _backend.get_kernels(kernel_name)
    rng = np.random.default_rng(seed)
    arr = generate_arrivals(scenario, horizon, rng)
    nfrag = n_fragments(arr.nbytes, scenario.mtu_bytes)
    # backoff draws come from a child stream so that growing the buffer
    # keeps its prefix (and hence the run) unchanged
    backoff_seed = rng.integers(2**63)
    size = 4 * int(nfrag.sum()) + 16 * scenario.n + 64
    while True:
        uniforms = np.random.default_rng(backoff_seed).random(size)
        delivery = np.full(arr.size, np.nan)
        arrived = np.zeros(scenario.n, dtype=np.int64)
        head = np.zeros(scenario.n, dtype=np.int64)
        counters = np.zeros(3, dtype=np.int64)
        state = kernels.dcf_kernel(arr.time, arr.node, arr.by_node, arr.node_start, arr.nbytes,
                                   float(scenario.mtu_bytes), uniforms, scenario.n, arr.n_must,
                                   *_mac_args(mac), delivery, arrived, head, counters)
        if state[3] == 0:
            break
        size *= 2
        log.debug("dcf replication %d: growing uniform buffer to %d", seed, size)
    return RunResult(seed=seed, arrivals=arr, delivery=delivery, fragments=nfrag,
                     window=(warmup * horizon, horizon), end_time=float(state[0]),
                     arrived=arrived, head=head,
                     counters={"successes": int(counters[0]), "collisions": int(counters[1]),
                               "idle_slots": int(counters[2]), "uniforms": int(state[2])})


def run_dcf_simulation(scenario: Scenario, mac: MacParams | None = None, seed=0,
                       replications: int = DEFAULT_REPLICATIONS, horizon: float | None = None,
                       packet_budget: int | None = None, warmup: float = DEFAULT_WARMUP,
                       workers: int = 1, backend: str | None = None) -> DelayStats:
    """Slot-level CSMA/CA simulation of the cell.

    Packets longer than the MTU go out as ``ceil(bytes / MTU)`` fragments;
    a packet's delay runs from its arrival to the delivery of its last
    fragment.  The scenario's capacity figure is not used here.
    """
    mac = mac or MacParams()
    if scenario.rho >= 0.95:
        log.warning("analytic load %.3f is close to saturation", scenario.rho)
    horizon = resolve_horizon(scenario, replications, warmup, horizon, packet_budget)
    seeds = replication_seeds(seed, replications)
    name = _backend.backend_name(backend)
    runs = _map(_dcf_replication, [(scenario, mac, horizon, warmup, s, name) for s in seeds], workers)
    return summarize(runs, "dcf", name, scenario.mtu_bytes)


@dataclass(frozen=True)
class CapacityEstimate:
    pkts_per_s: float
    bits_per_s: float
    successes: int
    collisions: int
    idle_slots: int
    elapsed: float


def estimate_capacity(n: int, mac: MacParams | None = None, seed: int = 0,
                      mtu_bytes: float = 1500.0, horizon: float = 200.0,
                      backend: str | None = None) -> CapacityEstimate:
    """Saturated run: every node always holds an MTU-sized frame."""
    if n < 1:
        raise ValidationError("node count must be >= 1", "n")
    mac = mac or MacParams()
    kernels = _backend.get_kernels(backend)
    rng = np.random.default_rng(seed)
    # one draw per attempt; attempts per second are bounded by 1/slot
    size = int(n + 2 * horizon / mac.frame_airtime(8.0 * mtu_bytes) * n) + 64
    backoff_seed = rng.integers(2**63)
    while True:
        uniforms = np.random.default_rng(backoff_seed).random(size)
        counters = np.zeros(3, dtype=np.int64)
        state = kernels.saturated_kernel(n, float(mtu_bytes), float(horizon), uniforms,
                                         *_mac_args(mac), counters)
        if state[3] == 0:
            break
        size *= 2
    elapsed = float(state[0])
    succ = int(counters[0])
    return CapacityEstimate(pkts_per_s=succ / elapsed, bits_per_s=succ * 8.0 * mtu_bytes / elapsed,
                            successes=succ, collisions=int(counters[1]),
                            idle_slots=int(counters[2]), elapsed=elapsed)


def trace_csv(run: RunResult) -> str:
    buf = io.StringIO()
    write_trace(run, buf)
    return buf.getvalue()
