"""Shared test oracles: brute-force enumerations kept independent of the
library code paths they check."""

from __future__ import annotations

from itertools import product

import numpy as np
import pytest


def brute_joint_entropy(flips) -> float:
    """Entropy of binary variables observing a fair coin through independent
    BSCs, by enumerating the coin and every noise bit."""
    pmf = {}
    for x in (0, 1):
        for noise in product((0, 1), repeat=len(flips)):
            pr = 0.5
            for e, nl in zip(flips, noise):
                pr *= e if nl else (1 - e)
            key = tuple(x ^ nl for nl in noise)
            pmf[key] = pmf.get(key, 0.0) + pr
    vals = np.array([v for v in pmf.values() if v > 0])
    return float(-(vals * np.log2(vals)).sum())


def brute_coset_marginals(H_dense, syndrome, prior_llrs, phi=None):
    """Exact bitwise LLRs of a coset code by full enumeration.

    ``phi`` optionally carries (gallager_map, per-block observation llrs)
    to weight configurations through the mapped output.
    """
    n = H_dense.shape[0]
    w0 = np.zeros(n)
    w1 = np.zeros(n)
    for bits in product((0, 1), repeat=n):
        b = np.array(bits, dtype=np.uint8)
        if not np.array_equal(H_dense.T @ b % 2, syndrome):
            continue
        weight = float(np.exp(-(b * prior_llrs).sum()))
        if phi is not None:
            gmap, lam = phi
            vals = b.reshape(-1, gmap.K) @ (1 << np.arange(gmap.K - 1, -1, -1))
            out = (vals >= gmap.threshold).astype(int)
            weight *= float(np.exp(-(out * lam).sum()))
        w1 += weight * b
        w0 += weight * (1 - b)
    return np.log(w0) - np.log(w1)


@pytest.fixture(scope="session")
def rng_factory():
    def make(seed):
        return np.random.Generator(np.random.Philox(seed))

    return make
