"""Discrete-event validation engines: a slotted DCF simulator and a direct
simulation of the random polling server."""
from .backend import available_backends, backend_name, get_kernels
from .engine import (
    CapacityEstimate,
    DelayStats,
    NodeStats,
    RunResult,
    estimate_capacity,
    generate_arrivals,
    replication_seeds,
    run_dcf_simulation,
    run_rps_oracle,
    trace_csv,
    write_trace,
)

__all__ = [
    "CapacityEstimate", "DelayStats", "NodeStats", "RunResult", "available_backends",
    "backend_name", "estimate_capacity", "generate_arrivals", "get_kernels",
    "replication_seeds", "run_dcf_simulation", "run_rps_oracle", "trace_csv", "write_trace",
]
