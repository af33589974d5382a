"""1-limited random polling system: mean waiting times.

Two evaluation paths are provided:

* :func:`mean_wait_nonzero_switchover`: the general closed form for a
  memoryless polling policy with strictly positive switchover times;
* :func:`mean_delay_zero_switchover`: its limit as every switchover time
  shrinks to zero, which is what a DCF cell looks like to a packet.

:func:`switchover_limit_check` evaluates the first at a shrinking constant
switchover and reports the gap to the second, which keeps the limit
algebra honest.

Arrivals follow the linear-quadratic model E[A(t)] = a t,
E[A(t)^2] = e t + a^2 t^2; cross-queue correlations are zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InstabilityError, InvalidDistributionError, ModelRangeError, ValidationError

fsum = math.fsum


@dataclass(frozen=True)
class QueueMoments:
    a: float
    e: float
    b: float = 1.0
    b2: float = 1.0
    lam: float | None = None

    def __post_init__(self):
        if not (self.a > 0 and self.e > 0):
            raise ValidationError("arrival moments a, e must be positive")
        if not self.b > 0 or self.b2 < self.b * self.b * (1 - 1e-12):
            raise InvalidDistributionError("batch moments need b > 0 and b2 >= b**2")

    @classmethod
    def batch_poisson(cls, lam: float, b: float = 1.0, b2: float = 1.0) -> "QueueMoments":
        a, e = batch_poisson_moments(lam, b, b2)
        return cls(a=a, e=e, b=b, b2=b2, lam=lam)


@dataclass(frozen=True)
class ServiceMoments:
    p: float
    p2: float

    def __post_init__(self):
        if not self.p > 0 or self.p2 < self.p * self.p * (1 - 1e-12):
            raise InvalidDistributionError("service moments need p > 0 and p2 >= p**2")


def batch_poisson_moments(lam: float, b: float, b2: float) -> tuple[float, float]:
    """(a, e) of a Poisson stream of rate ``lam`` carrying i.i.d. batches
    with mean ``b`` and second moment ``b2``."""
    if not lam > 0:
        raise ValidationError("batch rate must be positive", "lambda")
    if not b > 0:
        raise ValidationError("mean batch size must be positive", "b")
    if b2 < b * b * (1 - 1e-12):
        raise InvalidDistributionError("b2 < b**2 is impossible", "b2")
    return lam * b, lam * b2


class RpsParams:
    """Per-queue arrival/service moments, polling weights and switchover.

    All per-queue quantities are stored as float arrays of length n.
    ``gamma`` defaults to 1/n; switchover defaults to zero.
    """

    def __init__(self, queues: Sequence[QueueMoments], services: Sequence[ServiceMoments],
                 gamma: Sequence[float] | None = None,
                 switchover: Sequence[float] | float | None = None,
                 switchover2: Sequence[float] | float | None = None):
        n = len(queues)
        if n == 0 or len(services) != n:
            raise ValidationError("need one service law per queue (and at least one queue)")
        self.n = n
        self.a = np.array([q.a for q in queues], dtype=float)
        self.e = np.array([q.e for q in queues], dtype=float)
        self.b = np.array([q.b for q in queues], dtype=float)
        self.b2 = np.array([q.b2 for q in queues], dtype=float)
        self.p = np.array([s.p for s in services], dtype=float)
        self.p2 = np.array([s.p2 for s in services], dtype=float)

        g = np.full(n, 1.0 / n) if gamma is None else np.asarray(gamma, dtype=float)
        if g.shape != (n,) or abs(fsum(g) - 1.0) > 1e-9:
            raise ValidationError("polling weights must sum to 1", "gamma")
        if n > 1 and np.any((g <= 0) | (g >= 1)):
            raise ValidationError("each polling weight must lie in (0, 1)", "gamma")
        self.gamma = g

        s = np.zeros(n) if switchover is None else np.broadcast_to(
            np.asarray(switchover, dtype=float), (n,)).copy()
        if np.any(s < 0):
            raise ValidationError("switchover means must be >= 0", "switchover")
        if switchover2 is None:
            s2 = s * s  # constant switchover
        else:
            s2 = np.broadcast_to(np.asarray(switchover2, dtype=float), (n,)).copy()
            if np.any(s2 < s * s * (1 - 1e-12)):
                raise InvalidDistributionError("switchover second moment < mean**2", "switchover2")
        self.s, self.s2 = s, s2

        self.rho_i = self.a * self.p
        self.rho = fsum(self.rho_i)
        if not self.rho < 1.0:
            raise InstabilityError(self.rho)

    @classmethod
    def from_arrays(cls, a, e, p, p2, b=None, b2=None, **kw) -> "RpsParams":
        n = len(a)
        b = np.ones(n) if b is None else b
        b2 = np.ones(n) if b2 is None else b2
        queues = [QueueMoments(a=a[i], e=e[i], b=b[i], b2=b2[i]) for i in range(n)]
        services = [ServiceMoments(p=p[i], p2=p2[i]) for i in range(n)]
        return cls(queues, services, **kw)

    def with_switchover(self, s, s2=None) -> "RpsParams":
        return RpsParams.from_arrays(self.a, self.e, self.p, self.p2, self.b, self.b2,
                                     gamma=self.gamma, switchover=s, switchover2=s2)

    @property
    def mean_switchover(self) -> float:
        """Polling-weighted mean switchover, sum_j s_j gamma_j."""
        return fsum(self.s * self.gamma)


@dataclass(frozen=True)
class RpsIntermediates:
    chi: np.ndarray
    nabla: np.ndarray
    psi: np.ndarray


@dataclass(frozen=True)
class RpsSolution:
    mean_queue: np.ndarray | None
    prob_nonempty: np.ndarray | None
    mean_wait: np.ndarray
    rho: float


def offered_load(params: RpsParams) -> tuple[np.ndarray, float]:
    return params.rho_i.copy(), params.rho


def rps_intermediates(params: RpsParams) -> RpsIntermediates:
    if np.any(params.s <= 0):
        raise ValidationError(
            "the general form needs strictly positive switchover times; "
            "use mean_delay_zero_switchover for the zero limit", "switchover")
    a, e, p, p2, g = params.a, params.e, params.p, params.p2, params.gamma
    s_i, s2_i = params.s, params.s2
    rho = params.rho
    s = params.mean_switchover
    one_m = 1.0 - rho

    chi = 1.0 - s * a / g - rho * s * a / (2.0 * g * one_m)

    common = fsum(g * s2_i + (p2 + 2.0 * s_i * p) * a * s / one_m)
    aa = np.outer(a, a)
    # e_ij = 0 off the diagonal
    nabla = (aa * common
             + s * np.diag(e + a) / one_m
             - aa * s * (s_i[:, None] + s_i[None, :] + p[:, None] + p[None, :]) / one_m)

    row = np.array([fsum(p * nabla[i]) for i in range(params.n)])
    psi = np.diag(nabla) / (2.0 * g) + a / (2.0 * g * one_m) * row
    return RpsIntermediates(chi=chi, nabla=nabla, psi=psi)


def mean_wait_nonzero_switchover(params: RpsParams) -> RpsSolution:
    """Mean queue length at period starts, P{queue nonempty} and mean
    packet delay for strictly positive switchover times."""
    mid = rps_intermediates(params)
    a, p, g = params.a, params.p, params.gamma
    rho, s = params.rho, params.mean_switchover
    one_m = 1.0 - rho
    chi, psi = mid.chi, mid.psi

    if np.any(chi <= 0):
        raise ModelRangeError("chi <= 0: switchover too large for this load")
    denom = 1.0 - fsum(p * a * a * s / (2.0 * g * one_m * chi))
    if not denom > 0:
        raise ModelRangeError(f"normalising denominator {denom:.3g} <= 0: switchover too large")
    k = fsum(p * psi / chi) / denom
    mean_queue = psi / chi + s * a * a / (2.0 * g * one_m * chi) * k

    prob = s * a / (g * one_m)
    if np.any(prob > 1.0):
        raise ModelRangeError("P{Q_i >= 1} > 1: switchover too large for this load")

    b, b2 = params.b, params.b2
    wait = (mean_queue / (a * prob)
            - (1.0 - params.rho_i) / a
            - (b2 - b) / (2.0 * a * b))
    return RpsSolution(mean_queue=mean_queue, prob_nonempty=prob, mean_wait=wait, rho=rho)


def mean_delay_zero_switchover(params: RpsParams) -> np.ndarray:
    """Per-queue mean delay (arrival to end of service) with zero switchover.

    The result does not depend on the polling weights.
    """
    a, e, p, p2 = params.a, params.e, params.p, params.p2
    one_m = 1.0 - params.rho
    shared = fsum((p2 - p * p) * a) / (2.0 * one_m)
    own = 0.5 * p * (1.0 + e / (a * one_m))
    # vanishes for batch-Poisson input, where e/a == b2/b
    batch = e / (2.0 * a) * (e / a - params.b2 / params.b)
    return shared + own + batch


@dataclass(frozen=True)
class LimitReport:
    epsilons: np.ndarray
    gaps: np.ndarray           # (len(eps), n) absolute gaps
    relative_gaps: np.ndarray  # gaps / zero-switchover delay
    limit: np.ndarray

    @property
    def monotone(self) -> bool:
        worst = self.gaps.max(axis=1)
        return bool(np.all(np.diff(worst) <= 0))


def switchover_limit_check(params: RpsParams, epsilons: Sequence[float]) -> LimitReport:
    """Evaluate the general form at constant switchover eps (second moment
    eps**2) for each eps and compare with the zero-switchover delay."""
    eps = np.asarray(epsilons, dtype=float)
    if np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise ValidationError("need a strictly decreasing sequence of positive epsilons", "epsilons")
    limit = mean_delay_zero_switchover(params)
    gaps = np.empty((len(eps), params.n))
    for k, x in enumerate(eps):
        sol = mean_wait_nonzero_switchover(params.with_switchover(x))
        gaps[k] = np.abs(sol.mean_wait - limit)
    return LimitReport(epsilons=eps, gaps=gaps, relative_gaps=gaps / limit, limit=limit)
