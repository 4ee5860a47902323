"""Model types: per-link channel parameters and rate-distortion points."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import math

from .probability import binary_convolve, check_prob


def _check_crossover_vector(v: Sequence[float], name: str, L: int) -> tuple:
    v = tuple(float(x) for x in v)
    if len(v) != L:
        raise ValueError(f"{name} must have length {L}, got {len(v)}")
    for x in v:
        check_prob(x, name)
        if x > 0.5:
            raise ValueError(
                f"{name} entries must lie in [0, 0.5]; {x} is a relabelled "
                f"crossover of {1 - x}"
            )
    return v


@dataclass(frozen=True)
class CeoModel:
    """Per-link parameters of the binary CEO setup.

    p[l]     : observation-noise crossover of link l (source to observation).
    d[l]     : test-channel crossover of link l (observation to fine description).
    delta[l] : splitter crossover of link l (fine to coarse description);
               delta[L-1] is always 0, and delta[l] == 0 means the splitter
               of link l is disabled (coarse and fine descriptions coincide).
    """

    p: tuple
    d: tuple
    delta: tuple = field(default=())

    def __post_init__(self):
        L = len(self.p)
        if L < 1:
            raise ValueError("need at least one link")
        object.__setattr__(self, "p", _check_crossover_vector(self.p, "p", L))
        object.__setattr__(self, "d", _check_crossover_vector(self.d, "d", L))
        delta = self.delta if self.delta else (0.0,) * L
        delta = _check_crossover_vector(delta, "delta", L)
        if delta[L - 1] != 0.0:
            raise ValueError("delta[L-1] must be 0 (last link is never split)")
        object.__setattr__(self, "delta", delta)

    @property
    def L(self) -> int:
        return len(self.p)

    def split_enabled(self, l: int) -> bool:
        """True when link l (0-based) carries a coarse/fine split."""
        return l < self.L - 1 and self.delta[l] > 0.0

    def flip_u(self, l: int) -> float:
        """Effective crossover of U_l seen from the source: P_l = p_l * d_l."""
        return binary_convolve(self.p[l], self.d[l])

    def flip_w(self, l: int) -> float:
        """Effective crossover of W_l seen from the source: p_l * d_l * delta_l."""
        return binary_convolve(self.flip_u(l), self.delta[l])


@dataclass(frozen=True)
class RatePoint:
    """A rate-distortion operating point (rates in bits/symbol, log-loss in bits)."""

    per_link_rates: tuple
    sum_rate: float
    distortion: float

    def __post_init__(self):
        rates = tuple(float(r) for r in self.per_link_rates)
        object.__setattr__(self, "per_link_rates", rates)
        if any(r < -1e-12 for r in rates):
            raise ValueError("per-link rates must be non-negative")
        if self.distortion < 0:
            raise ValueError("distortion must be non-negative")
        if abs(math.fsum(rates) - self.sum_rate) > 1e-9:
            raise ValueError("sum_rate must equal the sum of per-link rates")

    @classmethod
    def of(cls, rates: Sequence[float], distortion: float) -> "RatePoint":
        rates = tuple(float(r) for r in rates)
        return cls(rates, math.fsum(rates), float(distortion))
