"""Application-packet mean delay in a DCF cell, for packets that fit in one
MTU and for packets that are fragmented into several.

The cell is treated as a constant-rate server: one MTU takes ``P/C``
seconds where ``C`` is the channel capacity in MTU-sized packets per
second.  ``C`` is a scenario input.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .distributions import NormalizedMoments, PacketLengthDist, normalized_moments
from .errors import InstabilityError, RegimeMismatchError, ValidationError
from .rps import QueueMoments, RpsParams, ServiceMoments, mean_delay_zero_switchover

SUB_MTU = "sub_mtu"
SUPER_MTU = "super_mtu"
REGIMES = (SUB_MTU, SUPER_MTU)

#: ``literal`` uses the distribution's second moment; ``mean_square``
#: replaces it with omega**2 (the reading under which the published
#: exponential super-MTU numbers come out).
OMEGA2_MODES = ("literal", "mean_square")


@dataclass(frozen=True)
class Scenario:
    lambdas: tuple[float, ...]
    dists: tuple[PacketLengthDist, ...]
    mtu_bytes: float
    capacity_pkts_per_s: float
    regime: str = SUB_MTU
    omega2_mode: str = "literal"
    name: str = ""

    def __post_init__(self):
        if len(self.lambdas) == 0:
            raise ValidationError("need at least one node", "lambdas")
        if len(self.dists) != len(self.lambdas):
            raise ValidationError("one distribution per node required", "dists")
        for i, lam in enumerate(self.lambdas):
            if not lam > 0:
                raise ValidationError("arrival rate must be positive", f"lambdas[{i}]")
        if not self.mtu_bytes > 0:
            raise ValidationError("must be positive", "mtu_bytes")
        if not self.capacity_pkts_per_s > 0:
            raise ValidationError("must be positive", "capacity_pkts_per_s")
        if self.regime not in REGIMES:
            raise ValidationError(f"regime must be one of {REGIMES}", "regime")
        if self.omega2_mode not in OMEGA2_MODES:
            raise ValidationError(f"omega2_mode must be one of {OMEGA2_MODES}", "omega2_mode")
        self._check_regime()
        rho = self.rho
        if not rho < 1.0:
            raise InstabilityError(rho, "lambdas")

    @classmethod
    def homogeneous(cls, lambdas: Sequence[float], dist: PacketLengthDist, **kw) -> "Scenario":
        lambdas = tuple(float(x) for x in lambdas)
        return cls(lambdas=lambdas, dists=(dist,) * len(lambdas), **kw)

    def _check_regime(self):
        for i, d in enumerate(self.dists):
            lo, hi = d.support()
            if self.regime == SUB_MTU:
                bad, what = hi > self.mtu_bytes, "extends above"
            else:
                bad, what = lo < self.mtu_bytes, "extends below"
            if not bad:
                continue
            msg = f"{d.kind} length distribution {what} the MTU ({self.mtu_bytes:g} B) in {self.regime} regime"
            if d.bounded:
                raise RegimeMismatchError(msg, f"dists[{i}]")
            warnings.warn(msg, stacklevel=4)

    @property
    def n(self) -> int:
        return len(self.lambdas)

    @property
    def unit_service(self) -> float:
        """Seconds to serve one MTU, P/C."""
        return 1.0 / self.capacity_pkts_per_s

    def moments(self) -> list[NormalizedMoments]:
        out = [normalized_moments(d, self.mtu_bytes) for d in self.dists]
        if self.omega2_mode == "mean_square":
            out = [NormalizedMoments(m.omega, m.omega**2) for m in out]
        return out

    @property
    def rho(self) -> float:
        return float(sum(lam * m.omega for lam, m in zip(self.lambdas, self.moments()))
                     * self.unit_service)

    def with_lambdas(self, lambdas: Sequence[float]) -> "Scenario":
        return replace(self, lambdas=tuple(float(x) for x in lambdas))


@dataclass(frozen=True)
class AnalyticDelays:
    d_avg: np.ndarray
    rho: float
    fragment_delay: np.ndarray | None = None
    cycle_time: np.ndarray | None = None
    regime: str = SUB_MTU
    extra: dict = field(default_factory=dict)

    @property
    def d_max(self) -> float:
        return float(self.d_avg.max())


def sub_mtu_params(scenario: Scenario) -> RpsParams:
    """Single-packet batches, service time omega * P / C."""
    unit = scenario.unit_service
    queues, services = [], []
    for lam, m in zip(scenario.lambdas, scenario.moments()):
        queues.append(QueueMoments.batch_poisson(lam, 1.0, 1.0))
        services.append(ServiceMoments(p=m.omega * unit, p2=m.omega2 * unit * unit))
    return RpsParams(queues, services)


def super_mtu_params(scenario: Scenario) -> RpsParams:
    """Batches of MTU-sized units (real-valued batch size omega), each
    served in P / C."""
    unit = scenario.unit_service
    queues, services = [], []
    for lam, m in zip(scenario.lambdas, scenario.moments()):
        queues.append(QueueMoments.batch_poisson(lam, m.omega, m.omega2))
        services.append(ServiceMoments(p=unit, p2=unit * unit))
    return RpsParams(queues, services)


def mean_delay_sub_mtu(scenario: Scenario) -> AnalyticDelays:
    if scenario.regime != SUB_MTU:
        raise RegimeMismatchError("scenario is not in the sub-MTU regime", "regime")
    params = sub_mtu_params(scenario)
    return AnalyticDelays(d_avg=mean_delay_zero_switchover(params), rho=params.rho, regime=SUB_MTU)


def fragment_delay(scenario: Scenario, node: int | None = None):
    """Mean delay of one MTU-sized fragment; all nodes, or just ``node``."""
    if scenario.regime != SUPER_MTU:
        raise RegimeMismatchError("fragment delay is defined for the super-MTU regime", "regime")
    d = mean_delay_zero_switchover(super_mtu_params(scenario))
    return d if node is None else float(d[node])


def super_mtu_delay(omega, omega2, unit_service: float, rho: float):
    """Closed-form mean packet delay for fragmented packets.

    Exposed separately so the published numbers can be re-evaluated at
    a quoted (rounded) load instead of the computed one.
    """
    omega = np.asarray(omega, dtype=float)
    omega2 = np.asarray(omega2, dtype=float)
    if not rho < 1.0:
        raise InstabilityError(rho)
    return unit_service / 4.0 * (3.0 - omega + omega2 * (1.0 + omega) / (omega * (1.0 - rho)))


def packet_from_fragment_delay(d_frag, omega, unit_service: float):
    """Packet delay from the fragment delay: ((w+1)/2) d - ((w-1)/2) P/C.

    This is the combination the closed form in :func:`super_mtu_delay`
    expands to.
    """
    omega = np.asarray(omega, dtype=float)
    return (omega + 1.0) / 2.0 * d_frag - (omega - 1.0) / 2.0 * unit_service


def mean_delay_super_mtu(scenario: Scenario) -> AnalyticDelays:
    if scenario.regime != SUPER_MTU:
        raise RegimeMismatchError("scenario is not in the super-MTU regime", "regime")
    moments = scenario.moments()
    omega = np.array([m.omega for m in moments])
    omega2 = np.array([m.omega2 for m in moments])
    unit = scenario.unit_service
    params = super_mtu_params(scenario)
    d_frag = mean_delay_zero_switchover(params)
    d_avg = super_mtu_delay(omega, omega2, unit, params.rho)
    return AnalyticDelays(
        d_avg=d_avg,
        rho=params.rho,
        fragment_delay=d_frag,
        cycle_time=d_frag - unit,
        regime=SUPER_MTU,
        extra={"via_fragment": packet_from_fragment_delay(d_frag, omega, unit)},
    )


def mean_delay(scenario: Scenario) -> AnalyticDelays:
    if scenario.regime == SUB_MTU:
        return mean_delay_sub_mtu(scenario)
    return mean_delay_super_mtu(scenario)
