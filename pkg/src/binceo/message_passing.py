"""Iterative message passing: BiP quantization, SP syndrome decoding, and
joint demapping-plus-decoding through a Gallager map.

LLR convention everywhere: natural log, positive favours bit 0, saturated at
+/- LLR_MAX.  All schedules are flooding with a fixed edge order, so results
are deterministic given the seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .bits import BitBlock, make_rng
from .probability import binary_entropy
from .sparse_codes import SparseBinaryMatrix

LLR_MAX = 30.0
_TANH_CAP = 1.0 - 1e-15


def hb_inverse(h: float) -> float:
    """Inverse of binary entropy on [0, 0.5], by bisection."""
    h = min(max(h, 0.0), 1.0)
    lo, hi = 0.0, 0.5
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if binary_entropy(mid) < h:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Gallager mapping
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GallagerMap:
    """Deterministic map from K-bit patterns to one bit with bias |S_1|/2^K.

    S_1 holds the round(2^K * delta) largest K-bit integers (first bit of a
    pattern is the most significant digit), so phi(s) = 1 iff int(s) >=
    threshold.  Uniform input bits produce output bias exactly s1_size/2^K.
    """

    K: int
    delta: float
    s1_size: int
    threshold: int

    @property
    def s1_patterns(self) -> frozenset:
        return frozenset(range(self.threshold, 2**self.K))


def build_phi(K: int, delta: float) -> GallagerMap:
    if not (1 <= K <= 16):
        raise ValueError("K must be in 1..16")
    if not (0.0 <= delta <= 0.5):
        raise ValueError("delta must be in [0, 0.5]")
    s1 = int(round((2**K) * delta))
    return GallagerMap(K=K, delta=float(delta), s1_size=s1, threshold=2**K - s1)


def apply_phi(gmap: GallagerMap, c: BitBlock) -> BitBlock:
    """Blockwise application of phi to a length-nK block."""
    bits = c.to_array()
    if bits.size % gmap.K:
        raise ValueError(f"length {bits.size} not divisible by K={gmap.K}")
    blocks = bits.reshape(-1, gmap.K)
    weights = 1 << np.arange(gmap.K - 1, -1, -1)
    vals = blocks @ weights
    return BitBlock((vals >= gmap.threshold).astype(np.uint8))


def _phi_ge_probs(q: np.ndarray, threshold: int, K: int):
    """P(val >= threshold) and the per-bit forced conditionals.

    q: (n, K) probabilities that each bit is 1.  Returns (base, cond) with
    base shape (n,) and cond shape (n, K, 2) = P(val >= t | bit_b = v).
    """
    tbits = [(threshold >> (K - 1 - j)) & 1 for j in range(K)]
    if threshold >= 2**K:
        n = q.shape[0]
        return np.zeros(n), np.zeros((n, K, 2))
    if threshold <= 0:
        n = q.shape[0]
        return np.ones(n), np.ones((n, K, 2))

    def dp(qm):
        acc = np.zeros(qm.shape[0])
        eq = np.ones(qm.shape[0])
        for j in range(K):
            if tbits[j] == 0:
                acc = acc + eq * qm[:, j]
                eq = eq * (1.0 - qm[:, j])
            else:
                eq = eq * qm[:, j]
        return acc + eq

    base = dp(q)
    cond = np.empty((q.shape[0], K, 2))
    for b in range(K):
        for v in (0, 1):
            qm = q.copy()
            qm[:, b] = float(v)
            cond[:, b, v] = dp(qm)
    return base, cond


def phi_factor_messages(q: np.ndarray, obs_llr: np.ndarray, gmap: GallagerMap) -> np.ndarray:
    """Extrinsic LLR messages from each phi factor to its K input bits.

    q: (n, K) incoming Pr(bit=1); obs_llr: (n,) LLR of the phi output
    (positive favours 0).  Returns (n, K) messages.
    """
    lam = np.clip(obs_llr, -LLR_MAX, LLR_MAX)
    w0 = np.exp(lam / 2.0)[:, None]
    w1 = np.exp(-lam / 2.0)[:, None]
    _, cond = _phi_ge_probs(q, gmap.threshold, gmap.K)
    ev0 = w0 * (1.0 - cond[:, :, 0]) + w1 * cond[:, :, 0]
    ev1 = w0 * (1.0 - cond[:, :, 1]) + w1 * cond[:, :, 1]
    with np.errstate(divide="ignore"):
        msg = np.log(ev0) - np.log(ev1)
    return np.clip(np.nan_to_num(msg, nan=0.0, posinf=LLR_MAX, neginf=-LLR_MAX),
                   -LLR_MAX, LLR_MAX)


def phi_output_llr(q: np.ndarray, gmap: GallagerMap) -> np.ndarray:
    """LLR of the phi output of each block given input-bit beliefs q."""
    base, _ = _phi_ge_probs(q, gmap.threshold, gmap.K)
    p1 = np.clip(base, 1e-300, 1 - 1e-16)
    return np.clip(np.log1p(-p1) - np.log(p1), -LLR_MAX, LLR_MAX)


# ---------------------------------------------------------------------------
# Edge-indexed factor graphs
# ---------------------------------------------------------------------------


class EdgeGraph:
    """Bipartite var/factor edge arrays with segment reductions.

    Edges are stored grouped by factor; ``to_var_order`` permutes into
    grouping by variable.  Segment helpers tolerate empty groups.
    """

    def __init__(self, H: SparseBinaryMatrix):
        self.n_vars = H.rows
        self.n_facs = H.cols
        self.fac_ptr = H.col_ptr
        self.var_of_edge = H.col_rows
        self.n_edges = H.nnz
        order = np.argsort(self.var_of_edge, kind="stable")
        self.to_var_order = order
        self.from_var_order = np.argsort(order, kind="stable")
        self.var_ptr = np.zeros(self.n_vars + 1, dtype=np.int64)
        np.add.at(self.var_ptr, self.var_of_edge + 1, 1)
        np.cumsum(self.var_ptr, out=self.var_ptr)
        self.fac_of_edge = np.repeat(np.arange(self.n_facs), np.diff(self.fac_ptr))

    @staticmethod
    def _segment_sum(values: np.ndarray, ptr: np.ndarray) -> np.ndarray:
        # cumulative-sum based segment reduction; exact for ints, tolerant
        # of empty segments at either end
        csum = np.concatenate([[values.dtype.type(0)], np.cumsum(values)])
        return csum[ptr[1:]] - csum[ptr[:-1]]

    def var_sum_excl(self, edge_vals_facorder: np.ndarray) -> np.ndarray:
        """Per edge: sum of the other edges at the same variable (fac order in/out)."""
        v = edge_vals_facorder[self.to_var_order]
        totals = self._segment_sum(v, self.var_ptr)
        excl = totals[self.var_of_edge[self.to_var_order]] - v
        return excl[self.from_var_order]

    def var_totals(self, edge_vals_facorder: np.ndarray) -> np.ndarray:
        v = edge_vals_facorder[self.to_var_order]
        return self._segment_sum(v, self.var_ptr)

    def fac_prod_excl(self, tanh_vals: np.ndarray) -> np.ndarray:
        """Per edge: product of tanh values of the other edges at its factor.

        Computed in sign/log-magnitude form with explicit zero handling so
        near-zero messages stay exact.
        """
        t = tanh_vals
        zero = t == 0.0
        mag = np.where(zero, 1.0, np.abs(t))
        logs = np.log(mag)
        neg = (t < 0).astype(np.int64)
        zc = self._segment_sum(zero.astype(np.int64), self.fac_ptr)[self.fac_of_edge]
        logsum = self._segment_sum(logs, self.fac_ptr)[self.fac_of_edge]
        negsum = self._segment_sum(neg, self.fac_ptr)[self.fac_of_edge]
        excl_log = logsum - np.where(zero, 0.0, logs)
        excl_neg = negsum - neg
        prod = np.exp(excl_log) * np.where(excl_neg & 1, -1.0, 1.0)
        # zero count at the factor: 0 -> plain exclusion; 1 -> only the zero
        # edge sees a nonzero product; >=2 -> everything is zero
        out = np.where(zc == 0, prod, np.where((zc == 1) & zero, prod, 0.0))
        return out

    def fac_prod_total(self, tanh_vals: np.ndarray) -> np.ndarray:
        """Per factor: product over all its edges (1 for empty factors)."""
        t = tanh_vals
        zero = t == 0.0
        mag = np.where(zero, 1.0, np.abs(t))
        zc = self._segment_sum(zero.astype(np.int64), self.fac_ptr)
        logsum = self._segment_sum(np.log(mag), self.fac_ptr)
        negsum = self._segment_sum((t < 0).astype(np.int64), self.fac_ptr)
        prod = np.exp(logsum) * np.where(negsum & 1, -1.0, 1.0)
        return np.where(zc > 0, 0.0, prod)


def _llr_from_tanh(x: np.ndarray) -> np.ndarray:
    return np.clip(2.0 * np.arctanh(np.clip(x, -_TANH_CAP, _TANH_CAP)),
                   -LLR_MAX, LLR_MAX)


# ---------------------------------------------------------------------------
# Sum-product syndrome decoding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpOptions:
    max_iters: int = 200
    llr_max: float = LLR_MAX
    # exit as soon as the hard decision satisfies the syndrome; disable (or
    # set stable_tol) to iterate to the message fixed point, e.g. for exact
    # marginals on cycle-free graphs
    exit_on_syndrome: bool = True
    stable_tol: Optional[float] = None


@dataclass
class SpResult:
    bits: BitBlock
    posteriors: np.ndarray
    converged: bool
    iterations: int


def sp_decode_syndrome(H: SparseBinaryMatrix, syndrome: BitBlock,
                       priors: np.ndarray, opts: SpOptions = SpOptions()) -> SpResult:
    """Bitwise-MAP estimate of x from x @ H = syndrome and independent priors.

    Flooding schedule with early exit once the hard decision satisfies the
    coset constraint; on iteration exhaustion the best marginals so far are
    returned with converged=False.
    """
    if syndrome.n != H.cols:
        raise ValueError("syndrome length must equal the check count")
    priors = np.clip(np.asarray(priors, dtype=float), -opts.llr_max, opts.llr_max)
    if priors.shape[0] != H.rows:
        raise ValueError("one prior per variable required")
    g = EdgeGraph(H)
    s = syndrome.to_array()
    sign = 1.0 - 2.0 * s[g.fac_of_edge]
    c2v = np.zeros(g.n_edges)
    post = priors.copy()
    bits = (post < 0).astype(np.uint8)
    it = 0
    satisfied = False
    for it in range(1, opts.max_iters + 1):
        v2c = np.clip(priors[g.var_of_edge] + g.var_sum_excl(c2v),
                      -opts.llr_max, opts.llr_max)
        c2v = _llr_from_tanh(sign * g.fac_prod_excl(np.tanh(v2c / 2.0)))
        prev = post
        post = np.clip(priors + g.var_totals(c2v), -opts.llr_max, opts.llr_max)
        bits = (post < 0).astype(np.uint8)
        satisfied = bool(np.array_equal(H.mul_left_bits(bits), s))
        stable = opts.stable_tol is None or np.max(np.abs(post - prev), initial=0.0) <= opts.stable_tol
        if satisfied and opts.exit_on_syndrome and stable:
            return SpResult(BitBlock(bits), post, True, it)
    return SpResult(BitBlock(bits), post, satisfied, it)


# ---------------------------------------------------------------------------
# Joint demapping and decoding
# ---------------------------------------------------------------------------


@dataclass
class JointResult:
    c_bits: BitBlock
    posteriors: np.ndarray
    converged: bool
    iterations: int


def joint_demap_decode(H: SparseBinaryMatrix, gmap: GallagerMap,
                       channel_llrs: np.ndarray, syndrome: BitBlock,
                       opts: SpOptions = SpOptions(),
                       priors: Optional[np.ndarray] = None) -> JointResult:
    """Decode the c-sequence of a coset code observed through a Gallager map.

    The factor graph couples the parity checks of H (over the nK c-bits,
    with the given syndrome) with one phi factor per K-block carrying the
    observed LLR of the mapped output bit.
    """
    nK = H.rows
    if nK % gmap.K:
        raise ValueError("variable count must be a multiple of K")
    n = nK // gmap.K
    channel_llrs = np.asarray(channel_llrs, dtype=float)
    if channel_llrs.shape[0] != n:
        raise ValueError("one channel LLR per super-symbol required")
    if syndrome.n != H.cols:
        raise ValueError("syndrome length must equal the check count")
    pri = np.zeros(nK) if priors is None else np.asarray(priors, dtype=float)
    g = EdgeGraph(H)
    s = syndrome.to_array()
    sign = 1.0 - 2.0 * s[g.fac_of_edge]
    c2v = np.zeros(g.n_edges)
    phi2v = np.zeros(nK)
    post = pri.copy()
    bits = (post < 0).astype(np.uint8)
    it = 0
    satisfied = False
    for it in range(1, opts.max_iters + 1):
        base = pri + g.var_totals(c2v)
        # variable -> phi: everything except the phi message itself
        q = 1.0 / (1.0 + np.exp(np.clip(base, -opts.llr_max, opts.llr_max)))
        phi2v = phi_factor_messages(q.reshape(n, gmap.K), channel_llrs, gmap).ravel()
        # variable -> check: prior + phi + other checks
        v2c = np.clip((pri + phi2v)[g.var_of_edge] + g.var_sum_excl(c2v),
                      -opts.llr_max, opts.llr_max)
        c2v = _llr_from_tanh(sign * g.fac_prod_excl(np.tanh(v2c / 2.0)))
        prev = post
        post = np.clip(pri + phi2v + g.var_totals(c2v), -opts.llr_max, opts.llr_max)
        bits = (post < 0).astype(np.uint8)
        satisfied = bool(np.array_equal(H.mul_left_bits(bits), s))
        stable = opts.stable_tol is None or np.max(np.abs(post - prev), initial=0.0) <= opts.stable_tol
        if satisfied and opts.exit_on_syndrome and stable:
            return JointResult(BitBlock(bits), post, True, it)
    return JointResult(BitBlock(bits), post, satisfied, it)


# ---------------------------------------------------------------------------
# BiP quantization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BipOptions:
    iters_per_round: int = 6
    decimate_frac: float = 0.03
    confidence: float = 8.0
    damping: float = 0.9
    restarts: int = 1
    design_distortion: Optional[float] = None
    llr_max: float = LLR_MAX
    seed: int = 0


@dataclass
class BipResult:
    info: BitBlock
    codeword: BitBlock
    distortion: float
    converged: bool
    rounds: int


def _bip_core(g: EdgeGraph, tilt0: np.ndarray, opts: BipOptions,
              rng: Optional[np.random.Generator]) -> np.ndarray:
    """Decimation-driven BiP; returns the fixed information bits."""
    m = g.n_vars
    fixed = np.full(m, -1, dtype=np.int64)
    fac_sign = np.ones(g.n_facs)
    edge_active = np.ones(g.n_edges, dtype=bool)
    v2c = np.zeros(g.n_edges)
    if rng is not None:
        v2c = rng.normal(0.0, 0.1, g.n_edges)
    while (fixed < 0).any():
        undecided = fixed < 0
        for _ in range(opts.iters_per_round):
            t = np.where(edge_active, np.tanh(v2c / 2.0), 1.0)
            c2v = _llr_from_tanh((tilt0 * fac_sign)[g.fac_of_edge] * g.fac_prod_excl(t))
            c2v = np.where(edge_active, c2v, 0.0)
            prop = np.clip(g.var_sum_excl(c2v), -opts.llr_max, opts.llr_max)
            v2c = opts.damping * prop + (1.0 - opts.damping) * v2c
            v2c = np.where(edge_active, v2c, 0.0)
        bias = g.var_totals(c2v)
        cand = np.nonzero(undecided)[0]
        confident = cand[np.abs(bias[cand]) >= opts.confidence]
        if len(confident):
            to_fix = confident
        else:
            count = max(1, int(math.ceil(opts.decimate_frac * len(cand))))
            to_fix = cand[np.argsort(np.abs(bias[cand]))[::-1][:count]]
        vals = (bias[to_fix] < 0).astype(np.int64)
        fixed[to_fix] = vals
        flip = to_fix[vals == 1]
        if len(flip):
            sel = np.isin(g.var_of_edge, flip) & edge_active
            np.multiply.at(fac_sign, g.fac_of_edge[sel], -1.0)
        edge_active &= ~np.isin(g.var_of_edge, to_fix)
        v2c = np.where(edge_active, v2c, 0.0)
    return fixed


def _greedy_polish(G: SparseBinaryMatrix, info: np.ndarray, y: np.ndarray,
                   max_passes: int = 12) -> np.ndarray:
    """Flip information bits while any single flip reduces the distortion.

    Each pass flips a maximal set of improving variables whose codeword
    positions do not interact, so the gain of every accepted flip is exact.
    """
    info = info.copy()
    mism = (G.mul_left_bits(info) != y)
    deg = G.row_degrees()
    for _ in range(max_passes):
        hits = np.zeros(G.rows, dtype=np.int64)
        np.add.at(hits, np.repeat(np.arange(G.rows), deg), mism[G.row_cols])
        delta = deg - 2 * hits
        cand = np.nonzero(delta < 0)[0]
        if not len(cand):
            break
        touched = np.zeros(G.cols, dtype=bool)
        flipped = False
        for v in cand[np.argsort(delta[cand])]:
            pos = G.row_cols[G.row_ptr[v]: G.row_ptr[v + 1]]
            if touched[pos].any():
                continue
            info[v] ^= 1
            mism[pos] = ~mism[pos]
            touched[pos] = True
            flipped = True
        if not flipped:
            break
    return info


def bip_quantize(G: SparseBinaryMatrix, target: BitBlock,
                 opts: BipOptions = BipOptions()) -> BipResult:
    """Quantize ``target`` to a nearby codeword of the LDGM code with generator G.

    Bias propagation with hard decimation: every round the most biased
    undecided information variables are clamped (all those past the
    confidence threshold, or a small fraction otherwise).  Restarts once
    with a perturbed message initialization when the realized distortion
    misses the design value by a wide margin.
    """
    if target.n != G.cols:
        raise ValueError("target length must equal the code block length")
    m, n = G.rows, G.cols
    design = opts.design_distortion
    if design is None:
        design = hb_inverse(max(1.0 - m / n, 0.0))
    design = min(max(design, 1e-3), 0.499)
    gamma = math.log((1.0 - design) / design)
    g = EdgeGraph(G)
    y = target.to_array()
    tilt0 = (1.0 - 2.0 * y.astype(float)) * math.tanh(gamma / 2.0)

    best = None
    for attempt in range(opts.restarts + 1):
        rng = None if attempt == 0 else make_rng((opts.seed, attempt))
        fixed = _bip_core(g, tilt0, opts, rng)
        info_bits = _greedy_polish(G, fixed.astype(np.uint8), y)
        codeword = BitBlock(G.mul_left_bits(info_bits))
        dist = codeword.hamming(target) / n
        if best is None or dist < best.distortion:
            best = BipResult(BitBlock(info_bits), codeword, dist, True, attempt)
        if best.distortion <= design + 0.04:
            return best
    best.converged = False
    return best


# ---------------------------------------------------------------------------
# BiP quantization through a Gallager map (fine-description encoder)
# ---------------------------------------------------------------------------


def _layer_graph(G: SparseBinaryMatrix):
    """Edge arrays of the information-variable <-> codeword-bit XOR layer."""
    return EdgeGraph(G)


def _greedy_polish_mapped(G: SparseBinaryMatrix, gmap: GallagerMap,
                          info: np.ndarray, y: np.ndarray,
                          max_passes: int = 6) -> np.ndarray:
    """Accept information-bit flips that reduce the mapped-image distortion."""
    K = gmap.K
    weights = 1 << np.arange(K - 1, -1, -1)
    info = info.copy()
    c = G.mul_left_bits(info)
    blocks = c.reshape(-1, K)
    phi = (blocks @ weights >= gmap.threshold).astype(np.uint8)
    for _ in range(max_passes):
        improved = False
        for v in range(G.rows):
            pos = G.row_cols[G.row_ptr[v]: G.row_ptr[v + 1]]
            if not len(pos):
                continue
            blk = np.unique(pos // K)
            old = int((phi[blk] != y[blk]).sum())
            c[pos] ^= 1
            new_phi = (blocks[blk] @ weights >= gmap.threshold).astype(np.uint8)
            new = int((new_phi != y[blk]).sum())
            if new < old:
                phi[blk] = new_phi
                info[v] ^= 1
                improved = True
            else:
                c[pos] ^= 1
        if not improved:
            break
    return info


def bip_quantize_mapped(G: SparseBinaryMatrix, gmap: GallagerMap, target: BitBlock,
                        design_distortion: float,
                        opts: BipOptions = BipOptions()) -> BipResult:
    """Find a codeword c of G whose mapped image phi(c) is close to ``target``.

    G generates length-nK sequences; the objective is Hamming distance
    between the blockwise phi image (length n) and the target.  Returns the
    information bits, the mapped image as the codeword field, and the
    realized distortion on the phi output.
    """
    nK = G.cols
    if nK % gmap.K:
        raise ValueError("code length must be a multiple of K")
    n = nK // gmap.K
    if target.n != n:
        raise ValueError("target length must equal the mapped length")
    design = min(max(design_distortion, 1e-3), 0.499)
    gamma = math.log((1.0 - design) / design)
    g = EdgeGraph(G)
    y = target.to_array()
    obs_llr = (1.0 - 2.0 * y.astype(float)) * gamma

    best = None
    for attempt in range(opts.restarts + 1):
        rng = None if attempt == 0 else make_rng((opts.seed, attempt + 17))
        fixed = np.full(G.rows, -1, dtype=np.int64)
        fac_sign = np.ones(g.n_facs)  # one XOR factor per c position
        edge_active = np.ones(g.n_edges, dtype=bool)
        v2c = np.zeros(g.n_edges) if rng is None else rng.normal(0.0, 0.1, g.n_edges)
        phi2c = np.zeros(nK)
        while (fixed < 0).any():
            undecided = fixed < 0
            for _ in range(opts.iters_per_round):
                t = np.where(edge_active, np.tanh(v2c / 2.0), 1.0)
                # c-bit belief as seen by the phi layer: XOR of its info vars
                up = fac_sign * g.fac_prod_total(np.where(edge_active, t, 1.0))
                q = 0.5 * (1.0 - up)  # Pr(c-bit = 1)
                phi2c = phi_factor_messages(q.reshape(n, gmap.K), obs_llr, gmap).ravel()
                tphi = np.tanh(phi2c / 2.0)
                c2v = _llr_from_tanh((tphi * fac_sign)[g.fac_of_edge] * g.fac_prod_excl(t))
                c2v = np.where(edge_active, c2v, 0.0)
                prop = np.clip(g.var_sum_excl(c2v), -opts.llr_max, opts.llr_max)
                v2c = opts.damping * prop + (1.0 - opts.damping) * v2c
                v2c = np.where(edge_active, v2c, 0.0)
            bias = g.var_totals(c2v)
            cand = np.nonzero(undecided)[0]
            confident = cand[np.abs(bias[cand]) >= opts.confidence]
            if len(confident):
                to_fix = confident
            else:
                count = max(1, int(math.ceil(opts.decimate_frac * len(cand))))
                to_fix = cand[np.argsort(np.abs(bias[cand]))[::-1][:count]]
            vals = (bias[to_fix] < 0).astype(np.int64)
            fixed[to_fix] = vals
            flip = to_fix[vals == 1]
            if len(flip):
                sel = np.isin(g.var_of_edge, flip) & edge_active
                np.multiply.at(fac_sign, g.fac_of_edge[sel], -1.0)
            edge_active &= ~np.isin(g.var_of_edge, to_fix)
            v2c = np.where(edge_active, v2c, 0.0)
        info_bits = _greedy_polish_mapped(G, gmap, fixed.astype(np.uint8), y)
        c = BitBlock(G.mul_left_bits(info_bits))
        mapped = apply_phi(gmap, c)
        dist = mapped.hamming(target) / n
        if best is None or dist < best.distortion:
            best = BipResult(BitBlock(info_bits), c, dist, True, attempt)
        if best.distortion <= design + 0.04:
            return best
    best.converged = False
    return best
