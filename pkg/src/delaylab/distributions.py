"""Packet-length distributions, arrival sampling and MTU-normalised moments.

Lengths are in bytes and treated as real numbers; the simulators derive
integer fragment counts from them.  All samplers take a
:class:`numpy.random.Generator` so that every stream is seedable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import InvalidDistributionError, ValidationError


@dataclass(frozen=True)
class NormalizedMoments:
    """Moments of Omega = length / MTU."""

    omega: float
    omega2: float

    def __post_init__(self):
        if not self.omega > 0:
            raise ValidationError("omega must be positive", "omega")
        # relative slack: omega2 == omega**2 can round either way
        if self.omega2 < self.omega**2 * (1 - 1e-12):
            raise InvalidDistributionError("omega2 < omega**2", "omega2")

    @property
    def variance(self) -> float:
        return max(self.omega2 - self.omega**2, 0.0)


class PacketLengthDist:
    """Base class.  Subclasses provide closed-form moments and a sampler."""

    kind: str = ""
    #: True when the support is a finite interval the regime check can trust.
    bounded: bool = True

    def mean(self) -> float:
        raise NotImplementedError

    def second_moment(self) -> float:
        raise NotImplementedError

    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int | None = None):
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError

    def variance(self) -> float:
        return max(self.second_moment() - self.mean() ** 2, 0.0)


@dataclass(frozen=True)
class Deterministic(PacketLengthDist):
    bytes: float
    kind = "det"

    def __post_init__(self):
        if not self.bytes > 0:
            raise ValidationError("packet length must be positive", "bytes")

    def mean(self):
        return float(self.bytes)

    def second_moment(self):
        return float(self.bytes) ** 2

    def support(self):
        return (float(self.bytes), float(self.bytes))

    def sample(self, rng, size=None):
        if size is None:
            return float(self.bytes)
        return np.full(size, float(self.bytes))

    def to_dict(self):
        return {"kind": "det", "bytes": self.bytes}


@dataclass(frozen=True)
class Uniform(PacketLengthDist):
    """Uniform on the half-open interval [lo, hi)."""

    lo: float
    hi: float
    kind = "uniform"

    def __post_init__(self):
        if not self.lo > 0:
            raise ValidationError("lower bound must be positive", "lo")
        if not self.lo < self.hi:
            raise ValidationError("need lo < hi", "hi")

    def mean(self):
        return (self.lo + self.hi) / 2.0

    def second_moment(self):
        width = self.hi - self.lo
        return width * width / 12.0 + self.mean() ** 2

    def support(self):
        return (float(self.lo), float(self.hi))

    def sample(self, rng, size=None):
        return rng.uniform(self.lo, self.hi, size)

    def to_dict(self):
        return {"kind": "uniform", "lo": self.lo, "hi": self.hi}


@dataclass(frozen=True)
class Exponential(PacketLengthDist):
    """Exponential lengths, optionally conditioned on ``length <= truncate_at``.

    Untruncated by default: the sub-MTU reproduction scenarios use the
    literal distribution even though it has mass above the MTU.
    """

    mean_bytes: float
    truncate_at: float | None = None
    kind = "exp"

    @property
    def bounded(self):
        return self.truncate_at is not None

    def __post_init__(self):
        if not self.mean_bytes > 0:
            raise ValidationError("mean must be positive", "mean")
        if self.truncate_at is not None and not self.truncate_at > 0:
            raise ValidationError("truncation point must be positive", "truncate_at")

    def _tail(self):
        return math.exp(-self.truncate_at / self.mean_bytes)

    def mean(self):
        mu = self.mean_bytes
        if self.truncate_at is None:
            return mu
        c, q = self.truncate_at, self._tail()
        return mu - c * q / (1.0 - q)

    def second_moment(self):
        mu = self.mean_bytes
        if self.truncate_at is None:
            return 2.0 * mu * mu
        c, q = self.truncate_at, self._tail()
        return (2 * mu * mu - q * (c * c + 2 * mu * c + 2 * mu * mu)) / (1.0 - q)

    def support(self):
        return (0.0, math.inf if self.truncate_at is None else float(self.truncate_at))

    def sample(self, rng, size=None):
        if self.truncate_at is None:
            return rng.exponential(self.mean_bytes, size)
        # inverse CDF of the conditioned law
        u = rng.random(size)
        return -self.mean_bytes * np.log1p(-u * (1.0 - self._tail()))

    def to_dict(self):
        d: dict[str, Any] = {"kind": "exp", "mean": self.mean_bytes}
        if self.truncate_at is not None:
            d["truncate_at"] = self.truncate_at
        return d


@dataclass(frozen=True)
class Empirical(PacketLengthDist):
    """Finite distribution given as (bytes, weight) pairs; weights sum to 1."""

    points: tuple[tuple[float, float], ...]
    kind = "empirical"

    def __post_init__(self):
        if not self.points:
            raise ValidationError("empty distribution", "points")
        for i, (length, weight) in enumerate(self.points):
            if not length > 0:
                raise ValidationError("lengths must be positive", f"points[{i}]")
            if weight < 0:
                raise ValidationError("weights must be nonnegative", f"points[{i}]")
        total = math.fsum(w for _, w in self.points)
        if abs(total - 1.0) > 1e-9:
            raise InvalidDistributionError(f"weights sum to {total}, not 1", "points")

    def _arrays(self):
        lengths = np.array([p[0] for p in self.points], dtype=float)
        weights = np.array([p[1] for p in self.points], dtype=float)
        return lengths, weights / weights.sum()

    def mean(self):
        return math.fsum(x * w for x, w in self.points)

    def second_moment(self):
        return math.fsum(x * x * w for x, w in self.points)

    def support(self):
        live = [x for x, w in self.points if w > 0]
        return (min(live), max(live))

    def sample(self, rng, size=None):
        lengths, weights = self._arrays()
        return rng.choice(lengths, size=size, p=weights)

    def to_dict(self):
        return {"kind": "empirical", "points": [list(p) for p in self.points]}


def dist_from_dict(spec: dict[str, Any], field: str = "distribution") -> PacketLengthDist:
    """Parse ``{"kind": "uniform", "lo": 750, "hi": 1500}`` and friends."""
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValidationError("expected an object with a 'kind' key", field)
    kind = spec["kind"]
    try:
        if kind in ("det", "deterministic"):
            return Deterministic(float(spec["bytes"]))
        if kind == "uniform":
            return Uniform(float(spec["lo"]), float(spec["hi"]))
        if kind in ("exp", "exponential"):
            trunc = spec.get("truncate_at")
            return Exponential(float(spec["mean"]), None if trunc is None else float(trunc))
        if kind == "empirical":
            return Empirical(tuple((float(x), float(w)) for x, w in spec["points"]))
    except KeyError as exc:
        raise ValidationError(f"missing key {exc.args[0]!r}", field) from None
    except ValidationError as exc:
        raise type(exc)(str(exc), field) from None
    raise ValidationError(f"unknown distribution kind {kind!r}", field)


def normalized_moments(dist: PacketLengthDist, mtu_bytes: float) -> NormalizedMoments:
    """Mean and second moment of the length measured in MTUs."""
    if not mtu_bytes > 0:
        raise ValidationError("MTU must be positive", "mtu_bytes")
    return NormalizedMoments(dist.mean() / mtu_bytes, dist.second_moment() / mtu_bytes**2)


def sample_length(dist: PacketLengthDist, rng: np.random.Generator) -> float:
    return float(dist.sample(rng))


def next_interarrival(lam: float, rng: np.random.Generator) -> float:
    """Exponential gap of a rate-``lam`` Poisson stream, in seconds."""
    if not lam > 0:
        raise ValidationError("rate must be positive", "lambda")
    return float(rng.exponential(1.0 / lam))


def poisson_arrival_times(lam: float, horizon: float, rng: np.random.Generator) -> np.ndarray:
    """All arrival epochs of a rate-``lam`` Poisson process on [0, horizon).

    Draws the count first, then sorts uniform epochs (the order-statistics
    construction), which is one vectorised call instead of a gap loop.
    """
    if not lam > 0:
        raise ValidationError("rate must be positive", "lambda")
    count = rng.poisson(lam * horizon)
    return np.sort(rng.uniform(0.0, horizon, count))
