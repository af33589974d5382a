"""Saturated DCF contention model: attempt-probability fixed point and
renewal-reward channel capacity.

Times are seconds, rates per second, lengths in bits unless a name says
otherwise.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import Any

from .errors import ValidationError

DEFAULT_TOL = 1e-12
MAX_BISECTION_ITER = 200


@dataclass(frozen=True)
class MacParams:
    """PHY/MAC constants.

    Defaults mimic 802.11b DSSS at 1 Mb/s with the long PLCP preamble.
    ``header_bits`` is everything that rides with a payload: PLCP (192 us
    worth at 1 Mb/s), MAC header + FCS (28 B), LLC/SNAP (8 B), IPv4 (20 B)
    and UDP (8 B).  ``ack_time`` is the full ACK frame incl. its preamble.

    ``collision_time`` of ``None`` means "derive from the colliding frame":
    longest frame airtime + DIFS.
    """

    W: int = 32
    m: int = 5
    slot_time: float = 20e-6
    difs: float = 50e-6
    sifs: float = 10e-6
    ack_time: float = 304e-6
    header_bits: float = 704.0
    data_rate_bps: float = 1e6
    collision_time: float | None = None
    #: add SIFS + ACK + DIFS to the success slot; False gives T_S = (H + E[P]) / R
    include_overhead: bool = True

    def __post_init__(self):
        if int(self.W) != self.W or self.W < 2:
            raise ValidationError("W must be an integer >= 2", "mac.W")
        if int(self.m) != self.m or self.m < 0:
            raise ValidationError("m must be an integer >= 0", "mac.m")
        for name in ("slot_time", "difs", "sifs", "ack_time", "data_rate_bps"):
            if not getattr(self, name) > 0:
                raise ValidationError("must be > 0", f"mac.{name}")
        if self.header_bits < 0:
            raise ValidationError("must be >= 0", "mac.header_bits")
        if self.collision_time is not None and not self.collision_time > 0:
            raise ValidationError("must be > 0", "mac.collision_time")

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "MacParams":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown keys {sorted(unknown)}", "mac")
        return cls(**d)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def frame_airtime(self, payload_bits: float) -> float:
        return (self.header_bits + payload_bits) / self.data_rate_bps

    def success_time(self, payload_bits: float) -> float:
        t = self.frame_airtime(payload_bits)
        if self.include_overhead:
            t += self.sifs + self.ack_time + self.difs
        return t

    def collision_duration(self, payload_bits: float) -> float:
        if self.collision_time is not None:
            return self.collision_time
        t = self.frame_airtime(payload_bits)
        if self.include_overhead:
            t += self.difs
        return t


@dataclass(frozen=True)
class FixedPointResult:
    beta: float
    p: float
    residual: float
    iterations: int = 0


@dataclass(frozen=True)
class SlotProbabilities:
    p_s: float
    p_i: float
    p_c: float


@dataclass(frozen=True)
class Capacity:
    bits_per_s: float
    pkts_per_s: float
    beta: float
    slots: SlotProbabilities


def attempt_prob_backoff(p: float, W: int, m: int) -> float:
    """Attempt probability implied by binary exponential backoff at
    conditional collision probability ``p``.

    Written with the geometric sum (1 - (2p)^m) / (1 - 2p) expanded so the
    removable singularity at p = 1/2 never produces 0/0.
    """
    geom = math.fsum((2.0 * p) ** k for k in range(m))
    return 2.0 / ((W + 1) + p * W * geom)


def attempt_prob_collision(p: float, n: int) -> float:
    """Per-node attempt probability that makes the collision probability
    seen by a tagged node equal ``p`` when ``n`` nodes contend."""
    return 1.0 - (1.0 - p) ** (1.0 / (n - 1))


def solve_fixed_point(params: MacParams, n: int, tol: float = DEFAULT_TOL) -> FixedPointResult:
    """Bisection on p in [0, 1) for the crossing of the two attempt curves.

    The backoff curve decreases in p, the collision curve increases from 0
    to 1, so their difference changes sign exactly once on [0, 1].
    """
    if n < 1 or int(n) != n:
        raise ValidationError("node count must be an integer >= 1", "n")
    if not tol > 0:
        raise ValidationError("tolerance must be positive", "tol")
    W, m = params.W, params.m
    if n == 1:
        return FixedPointResult(beta=2.0 / (W + 1), p=0.0, residual=0.0)

    def gap(p):
        return attempt_prob_backoff(p, W, m) - attempt_prob_collision(p, n)

    lo, hi = 0.0, 1.0
    mid = 0.5
    it = 0
    for it in range(1, MAX_BISECTION_ITER + 1):
        mid = 0.5 * (lo + hi)
        g = gap(mid)
        if g > 0:
            lo = mid
        else:
            hi = mid
        if abs(g) <= tol * 1e-3 or hi - lo <= 1e-17:
            break
    p = mid
    beta_coll = attempt_prob_collision(p, n)
    residual = abs(attempt_prob_backoff(p, W, m) - beta_coll)
    return FixedPointResult(beta=attempt_prob_backoff(p, W, m), p=p, residual=residual, iterations=it)


def slot_probabilities(beta: float, n: int) -> SlotProbabilities:
    if not 0.0 <= beta <= 1.0:
        raise ValidationError("beta must lie in [0, 1]", "beta")
    if n < 1:
        raise ValidationError("node count must be >= 1", "n")
    p_s = n * beta * (1.0 - beta) ** (n - 1)
    p_i = (1.0 - beta) ** n
    # grouped so that (p_s + p_i) + p_c rounds back to exactly 1.0
    return SlotProbabilities(p_s=p_s, p_i=p_i, p_c=1.0 - (p_s + p_i))


def throughput(slots: SlotProbabilities, mean_packet_bits: float, t_idle: float,
               t_success: float, t_collision: float) -> float:
    """Renewal-reward rate: expected payload per slot over expected slot length."""
    denom = slots.p_i * t_idle + slots.p_s * t_success + slots.p_c * t_collision
    return slots.p_s * mean_packet_bits / denom


def aggregate_capacity(params: MacParams, n: int, mean_packet_bits: float,
                       tol: float = DEFAULT_TOL) -> Capacity:
    """Saturated channel capacity with ``n`` contenders."""
    if not mean_packet_bits > 0:
        raise ValidationError("mean packet length must be positive", "mean_packet_bits")
    fp = solve_fixed_point(params, n, tol)
    slots = slot_probabilities(fp.beta, n)
    s = throughput(slots, mean_packet_bits, params.slot_time,
                   params.success_time(mean_packet_bits),
                   params.collision_duration(mean_packet_bits))
    return Capacity(bits_per_s=s, pkts_per_s=s / mean_packet_bits, beta=fp.beta, slots=slots)
