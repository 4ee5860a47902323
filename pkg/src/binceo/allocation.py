"""Optimal test-channel allocation: minimize D_th + mu * R_th over d in [0, 0.5]^L.

The objective is smooth but non-convex near link-dropout boundaries, and the
ordering d_1 <= ... <= d_L is known to hold at any optimum when the noise
parameters are sorted ascending, so the search space is restricted to ordered
vectors.  The optimizer seeds from a coarse ordered lattice (keeping the best
candidate in each dropout stratum), then refines with per-coordinate scans and
golden-section line searches, probing the exact endpoints 0 and 0.5 so that
degenerate optima are returned exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bounds import d_th, r_th
from .model import CeoModel
from .probability import check_prob

DROPOUT_TOL = 1e-4
_GOLD = (math.sqrt(5.0) - 1.0) / 2.0
_F_TIE = 1e-10


@dataclass(frozen=True)
class AllocationResult:
    """Outcome of one objective minimization at tradeoff slope mu."""

    mu: float
    d_star: tuple
    F_value: float
    r_th: float
    d_th: float
    active_links: int

    def __post_init__(self):
        if abs(self.F_value - (self.d_th + self.mu * self.r_th)) > 1e-9:
            raise ValueError("inconsistent objective value")


class _Objective:
    """Vectorised evaluation of F for batches of ordered d-vectors."""

    def __init__(self, p: Sequence[float], mu: float):
        self.p = np.asarray(p, dtype=float)
        self.L = len(p)
        self.mu = float(mu)
        bits = np.arange(2**self.L)
        # match[l, j] = 1 when digit l (MSB first) of j is 0
        self.zero_digit = np.array(
            [[(j >> (self.L - 1 - l)) & 1 == 0 for j in bits] for l in range(self.L)]
        )

    @staticmethod
    def _hb(x: np.ndarray) -> np.ndarray:
        out = np.zeros_like(x)
        inner = (x > 0) & (x < 1)
        xi = x[inner]
        out[inner] = -xi * np.log2(xi) - (1 - xi) * np.log2(1 - xi)
        return out

    def __call__(self, D: np.ndarray) -> np.ndarray:
        """F for each row of D (shape (batch, L))."""
        D = np.atleast_2d(np.asarray(D, dtype=float))
        P = self.p * (1 - D) + (1 - self.p) * D
        batch = D.shape[0]
        Q = np.ones((batch, 2**self.L))
        for l in range(self.L):
            Q *= np.where(self.zero_digit[l], P[:, l, None], 1 - P[:, l, None])
        q = (Q + Q[:, ::-1]) / 2.0
        with np.errstate(divide="ignore", invalid="ignore"):
            H = -np.sum(np.where(q > 0, q * np.log2(q), 0.0), axis=1)
        r = H - self._hb(D).sum(axis=1)
        dist = 1.0 + self._hb(P).sum(axis=1) - H
        return dist + self.mu * r


def objective_F(model: CeoModel, mu: float) -> float:
    """F = d_th + mu * r_th for a fully specified model."""
    if mu < 0:
        raise ValueError("mu must be non-negative")
    return d_th(model) + mu * r_th(model)


def _ordered_lattice(L: int, step: int) -> np.ndarray:
    """All non-decreasing vectors over the grid {0, 1/step, ..., 1/2}."""
    levels = np.linspace(0.0, 0.5, step + 1)
    out = []

    def rec(prefix, lo):
        if len(prefix) == L:
            out.append(prefix)
            return
        for i in range(lo, len(levels)):
            rec(prefix + [levels[i]], i)

    rec([], 0)
    return np.array(out)


def _coordinate_refine(obj: _Objective, d0: np.ndarray, tol: float = 1e-9):
    """Cyclic per-coordinate minimization keeping the vector ordered."""
    d = np.array(d0, dtype=float)
    L = obj.L
    f = float(obj(d[None, :])[0])
    for _ in range(60):
        moved = 0.0
        for l in range(L):
            lo = d[l - 1] if l > 0 else 0.0
            hi = d[l + 1] if l < L - 1 else 0.5
            if hi - lo < 1e-15:
                continue
            # coarse scan of the window (F need not be unimodal here), then
            # golden-section around the best sample; probe exact endpoints
            grid = np.linspace(lo, hi, 25)
            cand = np.repeat(d[None, :], len(grid), axis=0)
            cand[:, l] = grid
            vals = obj(cand)
            k = int(np.argmin(vals))
            a = grid[max(k - 1, 0)]
            b = grid[min(k + 1, len(grid) - 1)]
            x1 = b - _GOLD * (b - a)
            x2 = a + _GOLD * (b - a)
            probe = d.copy()
            probe[l] = x1
            f1 = float(obj(probe[None, :])[0])
            probe[l] = x2
            f2 = float(obj(probe[None, :])[0])
            while b - a > 1e-11:
                if f1 <= f2:
                    b, x2, f2 = x2, x1, f1
                    x1 = b - _GOLD * (b - a)
                    probe[l] = x1
                    f1 = float(obj(probe[None, :])[0])
                else:
                    a, x1, f1 = x1, x2, f2
                    x2 = a + _GOLD * (b - a)
                    probe[l] = x2
                    f2 = float(obj(probe[None, :])[0])
            best_x, best_f = (x1, f1) if f1 <= f2 else (x2, f2)
            for x_end in (lo, hi, 0.0 if l == 0 else lo, 0.5 if l == L - 1 else hi):
                probe[l] = x_end
                fe = float(obj(probe[None, :])[0])
                if fe <= best_f + 1e-14:
                    best_x, best_f = x_end, fe
            if best_f < f - 1e-15:
                moved = max(moved, abs(best_x - d[l]))
                d[l] = best_x
                f = best_f
            else:
                probe[l] = d[l]
        if moved < tol:
            break
    return d, f


def _snap_endpoints(obj: _Objective, d: np.ndarray, f: float):
    """Snap coordinates to exact 0 / 0.5 whenever that does not hurt F."""
    d = d.copy()
    for l in range(obj.L):
        for target in (0.0, 0.5):
            if d[l] == target:
                continue
            probe = d.copy()
            probe[l] = target
            probe.sort()
            fp = float(obj(probe[None, :])[0])
            if fp <= f + 1e-13:
                d, f = probe, fp
    return d, f


def optimize_d(p: Sequence[float], mu: float, warm_starts: Sequence = ()) -> AllocationResult:
    """Minimize F = D_th + mu * R_th over ordered d in [0, 0.5]^L.

    ``p`` need not be sorted; the result is reported in the original link
    order.  Among minimizers within 1e-10 in F the lexicographically
    smallest d (in sorted-p order) is returned.
    """
    if mu < 0:
        raise ValueError("mu must be non-negative")
    p = [check_prob(x, "noise parameter") for x in p]
    order = np.argsort(np.asarray(p), kind="stable")
    inv = np.argsort(order)
    ps = [p[i] for i in order]
    L = len(ps)
    obj = _Objective(ps, mu)

    step = 64 if L <= 4 else (32 if L <= 6 else 16)
    lattice = _ordered_lattice(L, step)
    vals = obj(lattice)
    # keep the best lattice point within each dropout stratum so competing
    # local basins near a dropout boundary all get refined
    strata = {}
    dropped = (lattice >= 0.5 - 1.0 / step).sum(axis=1)
    for i in range(len(lattice)):
        key = int(dropped[i])
        if key not in strata or vals[i] < strata[key][0]:
            strata[key] = (vals[i], lattice[i])
    seeds = [d for _, d in sorted(strata.values())[:8]]
    for w in warm_starts:
        w = np.clip(np.asarray(w, dtype=float), 0.0, 0.5)
        seeds.append(np.sort(w))

    best_d, best_f = None, np.inf
    for seed in seeds:
        d, f = _coordinate_refine(obj, seed)
        d, f = _snap_endpoints(obj, d, f)
        if f < best_f - _F_TIE or (
            abs(f - best_f) <= _F_TIE and tuple(d) < tuple(best_d)
        ):
            best_d, best_f = d, f

    d_sorted = tuple(float(x) for x in best_d)
    d_out = tuple(d_sorted[inv[i]] for i in range(L))
    model = CeoModel(p=tuple(p), d=d_out)
    rt, dt = r_th(model), d_th(model)
    return AllocationResult(
        mu=float(mu),
        d_star=d_out,
        F_value=dt + mu * rt,
        r_th=rt,
        d_th=dt,
        active_links=int(sum(1 for x in d_out if x < 0.5 - DROPOUT_TOL)),
    )


def sweep_mu(p: Sequence[float], mu_grid: Sequence[float]) -> list:
    """One AllocationResult per mu, warm-starting each from the previous optimum."""
    grid = [float(m) for m in mu_grid]
    if not grid:
        raise ValueError("mu grid must not be empty")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise ValueError("mu grid must be sorted ascending")
    results = []
    prev = None
    for mu in grid:
        warm = (prev.d_star,) if prev is not None else ()
        prev = optimize_d(p, mu, warm_starts=warm)
        results.append(prev)
    return results


def find_mu_thresholds(p: Sequence[float], tol: float = 1e-4) -> list:
    """mu values at which links drop out (d_k* reaches 0.5), ascending.

    Returns L thresholds; the last is mu_max, beyond which every link is
    inactive and F = 1.  Found by bisection on the active-link count, which
    is non-increasing in mu.
    """
    p = [check_prob(x, "noise parameter") for x in p]
    L = len(p)
    p_min = min(p)
    mu_hi = (1.0 - 2.0 * p_min) ** 2 + 0.05  # last dropout is at (1-2p_min)^2

    cache = {}

    def active(mu: float) -> int:
        if mu not in cache:
            cache[mu] = optimize_d(p, mu).active_links
        return cache[mu]

    thresholds = []
    lo = 0.0
    for target in range(L - 1, -1, -1):
        a, b = lo, mu_hi
        if active(a) <= target:
            thresholds.append(a)
            continue
        while b - a > tol:
            mid = 0.5 * (a + b)
            if active(mid) <= target:
                b = mid
            else:
                a = mid
        thresholds.append(b)
        lo = a
    return thresholds
