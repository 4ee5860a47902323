"""Scalar binary-probability primitives: entropy, convolution, validation.

All logarithms are base 2; entropies are in bits.
"""

from __future__ import annotations

import math
from typing import Iterable

import numpy as np


def check_prob(x: float, name: str = "probability") -> float:
    """Validate that ``x`` is a real number in [0, 1] and return it as float.

    NaN is rejected.  Raises ValueError otherwise.
    """
    x = float(x)
    if math.isnan(x) or not (0.0 <= x <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {x!r}")
    return x


def binary_entropy(x: float) -> float:
    """h_b(x) = -x log2 x - (1-x) log2 (1-x), with 0 log 0 = 0."""
    x = check_prob(x, "entropy argument")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


def binary_entropy_vec(x: np.ndarray) -> np.ndarray:
    """Vectorised binary entropy; endpoints map to 0."""
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)) or np.any((x < 0) | (x > 1)):
        raise ValueError("entropy arguments must lie in [0, 1]")
    out = np.zeros_like(x)
    inner = (x > 0) & (x < 1)
    xi = x[inner]
    out[inner] = -xi * np.log2(xi) - (1 - xi) * np.log2(1 - xi)
    return out


def binary_convolve(p: float, d: float) -> float:
    """Crossover of two cascaded BSCs: p*d = p(1-d) + (1-p)d.

    Commutative and associative; 0 is the identity and 1/2 absorbs.
    """
    p = check_prob(p, "first crossover")
    d = check_prob(d, "second crossover")
    return p * (1.0 - d) + (1.0 - p) * d


def convolve_chain(probs: Iterable[float]) -> float:
    """Left fold of binary_convolve over a sequence (0 for an empty chain)."""
    q = 0.0
    for r in probs:
        q = binary_convolve(q, r)
    return q


def llr_from_flip(q: float, clip: float = 30.0) -> float:
    """Natural-log LLR ln((1-q)/q) of a BSC observation, positive favouring 0.

    Saturated to +/- clip so downstream message passing stays finite.
    """
    q = check_prob(q, "flip probability")
    if q <= 0.0:
        return clip
    if q >= 1.0:
        return -clip
    return float(np.clip(math.log((1.0 - q) / q), -clip, clip))
