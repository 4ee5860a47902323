"""Sparse GF(2) codes: LDGM quantizers, LDPC binning matrices, size planning.

Matrix convention follows row-vector multiplication: a SparseBinaryMatrix
maps length-``rows`` inputs to length-``cols`` outputs, so a generator has
shape (info bits x block length) and a parity-check matrix has shape
(block length x check count); the syndrome of x is x @ H.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Sequence

import numpy as np

from . import bounds
from .bits import BitBlock
from .model import CeoModel


class InfeasiblePlanError(ValueError):
    """A size plan produced a non-positive code dimension."""


class SparseBinaryMatrix:
    """Immutable sparse GF(2) matrix with row- and column-indexed adjacency."""

    __slots__ = ("rows", "cols", "col_ptr", "col_rows", "row_ptr", "row_cols", "nnz")

    def __init__(self, rows: int, cols: int, entries):
        self.rows = int(rows)
        self.cols = int(cols)
        ent = np.asarray(list(entries) if not isinstance(entries, np.ndarray) else entries,
                         dtype=np.int64)
        if ent.size == 0:
            ent = ent.reshape(0, 2)
        if ent.ndim != 2 or ent.shape[1] != 2:
            raise ValueError("entries must be (row, col) pairs")
        r, c = ent[:, 0], ent[:, 1]
        if ent.size and (r.min() < 0 or r.max() >= self.rows or c.min() < 0 or c.max() >= self.cols):
            raise ValueError("entry out of bounds")
        keys = r * self.cols + c
        if len(np.unique(keys)) != len(keys):
            raise ValueError("duplicate entries")
        self.nnz = int(len(keys))
        order = np.argsort(keys, kind="stable")
        self.row_cols = c[order]
        self.row_ptr = np.zeros(self.rows + 1, dtype=np.int64)
        np.add.at(self.row_ptr, r + 1, 1)
        np.cumsum(self.row_ptr, out=self.row_ptr)
        order_c = np.argsort(c * self.rows + r, kind="stable")
        self.col_rows = r[order_c]
        self.col_ptr = np.zeros(self.cols + 1, dtype=np.int64)
        np.add.at(self.col_ptr, c + 1, 1)
        np.cumsum(self.col_ptr, out=self.col_ptr)

    def entries(self) -> np.ndarray:
        """(nnz, 2) array of (row, col), sorted by row then column."""
        rows = np.repeat(np.arange(self.rows), np.diff(self.row_ptr))
        return np.column_stack([rows, self.row_cols])

    def mul_left_bits(self, bits: np.ndarray) -> np.ndarray:
        """(x @ self) over GF(2) for an unpacked 0/1 vector of length rows."""
        if bits.shape[0] != self.rows:
            raise ValueError(f"dimension mismatch: {bits.shape[0]} vs {self.rows} rows")
        if self.nnz == 0:
            return np.zeros(self.cols, dtype=np.uint8)
        acc = np.zeros(self.cols, dtype=np.int64)
        np.add.at(acc, np.repeat(np.arange(self.cols), np.diff(self.col_ptr)),
                  bits[self.col_rows].astype(np.int64))
        return (acc & 1).astype(np.uint8)

    def col_degrees(self) -> np.ndarray:
        return np.diff(self.col_ptr)

    def row_degrees(self) -> np.ndarray:
        return np.diff(self.row_ptr)

    def dense(self) -> np.ndarray:
        out = np.zeros((self.rows, self.cols), dtype=np.uint8)
        ent = self.entries()
        if len(ent):
            out[ent[:, 0], ent[:, 1]] = 1
        return out


def syndrome(H: SparseBinaryMatrix, x: BitBlock) -> BitBlock:
    """s = x @ H over GF(2); linear in x."""
    return BitBlock(H.mul_left_bits(x.to_array()))


def assemble_compound(Htilde: SparseBinaryMatrix, Hhat: SparseBinaryMatrix) -> SparseBinaryMatrix:
    """Column-concatenate (Htilde, Hhat) over a common variable set.

    For any codeword of the quantization code the first Htilde.cols syndrome
    bits vanish, so decoders treat those checks as zero-syndrome constraints
    and the Hhat checks as carrying the transmitted bin syndrome.
    """
    if Htilde.rows != Hhat.rows:
        raise ValueError("row (variable) count mismatch")
    left = Htilde.entries()
    right = Hhat.entries()
    if len(right):
        right = right + np.array([0, Htilde.cols])
    ent = np.vstack([left, right]) if len(left) or len(right) else []
    return SparseBinaryMatrix(Htilde.rows, Htilde.cols + Hhat.cols, ent)


def build_ldgm(n: int, m: int, rng: np.random.Generator, check_degree: int = 4):
    """Systematic LDGM pair: generator G = [I | P] and parity Htilde = [P^T | I].

    Each parity column of P picks ``check_degree`` distinct information rows
    uniformly at random, so codeword-bit degrees are regular and information
    row degrees are Poisson-distributed.  G @ Htilde = 0 by construction.
    """
    if not (1 <= m <= n):
        raise ValueError("need 1 <= m <= n")
    dc = min(check_degree, m)
    g_entries = [(i, i) for i in range(m)]
    h_entries = []
    for j in range(n - m):
        rows = rng.choice(m, size=dc, replace=False)
        for i in rows:
            g_entries.append((int(i), m + j))
            h_entries.append((int(i), j))
    for j in range(n - m):
        h_entries.append((m + j, j))
    G = SparseBinaryMatrix(m, n, g_entries)
    Ht = SparseBinaryMatrix(n, n - m, h_entries)
    return G, Ht


@dataclass(frozen=True)
class DegreeDistribution:
    """Edge-perspective degree distributions (degree -> edge fraction)."""

    lambda_coeffs: Dict[int, float]
    rho_coeffs: Dict[int, float]

    def __post_init__(self):
        for name, coeffs in (("lambda", self.lambda_coeffs), ("rho", self.rho_coeffs)):
            if not coeffs:
                raise ValueError(f"{name} coefficients are empty")
            if any(d < 1 for d in coeffs):
                raise ValueError(f"{name} degrees must be >= 1")
            if any(v < 0 for v in coeffs.values()):
                raise ValueError(f"{name} fractions must be non-negative")
            if abs(math.fsum(coeffs.values()) - 1.0) > 1e-9:
                raise ValueError(f"{name} fractions must sum to 1")

    @classmethod
    def normalized(cls, lambda_coeffs: Dict[int, float],
                   rho_coeffs: Dict[int, float]) -> "DegreeDistribution":
        """Construct after rescaling each family to unit sum (published
        coefficient tables are rounded and can be off by ~1e-3)."""
        ls = math.fsum(lambda_coeffs.values())
        rs = math.fsum(rho_coeffs.values())
        return cls({d: f / ls for d, f in lambda_coeffs.items()},
                   {d: f / rs for d, f in rho_coeffs.items()})

    def mean_inv(self, which: str) -> float:
        coeffs = self.lambda_coeffs if which == "lambda" else self.rho_coeffs
        return math.fsum(f / d for d, f in coeffs.items())


def _node_counts(coeffs: Dict[int, float], edges: int, nodes: int) -> Dict[int, int]:
    """Node counts per degree by largest remainder, forced to the given totals.

    The residual node and edge discrepancies are absorbed by the most
    frequent degree (shifting nodes between it and adjacent degrees).
    """
    quotas = {d: edges * f / d for d, f in coeffs.items()}
    counts = {d: int(math.floor(q)) for d, q in quotas.items()}
    rem = sorted(quotas, key=lambda d: quotas[d] - counts[d], reverse=True)
    short = nodes - sum(counts.values())
    for d in rem:
        if short <= 0:
            break
        counts[d] += 1
        short -= 1
    if short > 0:  # pad with the smallest available degree
        counts[min(counts)] += short
    elif short < 0:
        for d in sorted(counts, key=lambda d: quotas[d] - counts[d]):
            take = min(counts[d], -short)
            counts[d] -= take
            short += take
            if short == 0:
                break
    # absorb any remaining edge mismatch by shifting nodes between adjacent
    # degrees, starting from the most frequent class
    diff = edges - sum(d * c for d, c in counts.items())
    guard = 0
    while diff != 0:
        guard += 1
        if guard > 10 * (abs(diff) + len(counts) + 1):
            raise ValueError("irreconcilable edge counts for the degree distribution")
        movable = [d for d, c in counts.items() if c > 0 and (d > 1 or diff > 0)]
        if not movable:
            raise ValueError("irreconcilable edge counts for the degree distribution")
        top = max(movable, key=lambda d: counts[d])
        step = 1 if diff > 0 else -1
        take = min(abs(diff), counts[top])
        counts[top + step] = counts.get(top + step, 0) + take
        counts[top] -= take
        diff -= step * take
    return {d: c for d, c in counts.items() if c > 0}


def _sockets(counts: Dict[int, int], total_nodes: int, rng) -> np.ndarray:
    degs = np.zeros(total_nodes, dtype=np.int64)
    idx = 0
    for d in sorted(counts):
        c = counts[d]
        degs[idx: idx + c] = d
        idx += c
    rng.shuffle(degs)
    return np.repeat(np.arange(total_nodes), degs)


def _remove_short_cycles(var_of_edge, chk_of_edge, n_vars, rng, passes: int = 6):
    """Swap edge endpoints until no duplicate edges remain; then reduce
    4-cycles best-effort for a few passes."""
    E = len(var_of_edge)
    for _ in range(200):
        keys = chk_of_edge.astype(np.int64) * n_vars + var_of_edge
        order = np.argsort(keys)
        dup = np.nonzero(np.diff(keys[order]) == 0)[0]
        if not len(dup):
            break
        for e in order[dup]:
            f = int(rng.integers(E))
            var_of_edge[e], var_of_edge[f] = var_of_edge[f], var_of_edge[e]
    else:
        raise ValueError("could not remove duplicate edges")
    for _ in range(passes):
        swapped = 0
        pair_seen = {}
        order = np.argsort(chk_of_edge, kind="stable")
        by_check = np.split(order, np.searchsorted(chk_of_edge[order],
                                                   np.arange(1, chk_of_edge.max() + 1 if len(chk_of_edge) else 1)))
        for edges in by_check:
            vs = var_of_edge[edges]
            srt = np.argsort(vs)
            vs_s, edges_s = vs[srt], edges[srt]
            for a in range(len(vs_s)):
                for b in range(a + 1, len(vs_s)):
                    key = (int(vs_s[a]), int(vs_s[b]))
                    if key in pair_seen:
                        e = int(edges_s[b])
                        f = int(rng.integers(E))
                        var_of_edge[e], var_of_edge[f] = var_of_edge[f], var_of_edge[e]
                        swapped += 1
                        break
                    pair_seen[key] = True
                else:
                    continue
                break
        # swapping may have reintroduced duplicates; clean them up
        for _ in range(50):
            keys = chk_of_edge.astype(np.int64) * n_vars + var_of_edge
            order = np.argsort(keys)
            dup = np.nonzero(np.diff(keys[order]) == 0)[0]
            if not len(dup):
                break
            for e in order[dup]:
                f = int(rng.integers(E))
                var_of_edge[e], var_of_edge[f] = var_of_edge[f], var_of_edge[e]
        if swapped == 0:
            break
    return var_of_edge, chk_of_edge


def build_ldpc(n_vars: int, n_checks: int, dd: DegreeDistribution,
               rng: np.random.Generator) -> SparseBinaryMatrix:
    """Random parity-check matrix realizing the requested degree distribution.

    Edge sockets on both sides are filled by largest-remainder rounding and
    matched through a random permutation; duplicate edges are always
    resolved and 4-cycles are reduced best-effort.  The edge counts implied
    by the two perspectives must agree within 1% before rounding.
    """
    e_rho = n_checks / dd.mean_inv("rho")
    e_lam = n_vars / dd.mean_inv("lambda")
    if abs(e_rho - e_lam) > 0.01 * max(e_rho, e_lam):
        raise ValueError(
            f"irreconcilable edge counts: lambda implies {e_lam:.1f}, rho implies {e_rho:.1f}"
        )
    E = int(round(e_rho))
    var_counts = _node_counts(dd.lambda_coeffs, E, n_vars)
    chk_counts = _node_counts(dd.rho_coeffs, E, n_checks)
    var_sockets = _sockets(var_counts, n_vars, rng)
    chk_sockets = _sockets(chk_counts, n_checks, rng)
    if len(var_sockets) != len(chk_sockets):
        # rounding pushed the two sides apart by a few sockets; trim the excess
        # from maximal-degree nodes
        m = min(len(var_sockets), len(chk_sockets))
        if max(len(var_sockets), len(chk_sockets)) - m > max(4, E // 100):
            raise ValueError("irreconcilable edge counts after rounding")
        var_sockets, chk_sockets = var_sockets[:m], chk_sockets[:m]
    perm = rng.permutation(len(var_sockets))
    var_of_edge = var_sockets[perm].copy()
    chk_of_edge = chk_sockets.copy()
    var_of_edge, chk_of_edge = _remove_short_cycles(var_of_edge, chk_of_edge, n_vars, rng)
    return SparseBinaryMatrix(n_vars, n_checks,
                              np.column_stack([var_of_edge, chk_of_edge]))


def build_binning_matrix(n_vars: int, n_checks: int, dd: DegreeDistribution,
                         support: int, rng: np.random.Generator) -> SparseBinaryMatrix:
    """Bin-syndrome block Hhat whose columns live on the first ``support``
    variables (the information positions of a systematic quantizer).

    Variable degrees over the support follow the lambda profile (forced to
    the exact node and edge totals by largest-remainder rounding); check
    degrees follow rho.  Keeping the syndrome on the information positions
    makes the coset constraints act directly on the code dimension, which
    the sum-product decoder needs to get a decoding wave started; the
    parity positions are pinned afterwards through the quantizer's own
    parity checks.
    """
    if not (1 <= support <= n_vars):
        raise ValueError("support must select a leading block of variables")
    E = int(round(n_checks / dd.mean_inv("rho")))
    chk_counts = _node_counts(dd.rho_coeffs, E, n_checks)
    chk_sockets = _sockets(chk_counts, n_checks, rng)
    var_counts = _node_counts(dd.lambda_coeffs, len(chk_sockets), support)
    var_sockets = _sockets(var_counts, support, rng)
    m = min(len(var_sockets), len(chk_sockets))
    var_sockets, chk_sockets = var_sockets[:m], chk_sockets[:m]
    perm = rng.permutation(m)
    var_of_edge, chk_of_edge = _remove_short_cycles(
        var_sockets[perm].copy(), chk_sockets.copy(), support, rng)
    return SparseBinaryMatrix(n_vars, n_checks,
                              np.column_stack([var_of_edge, chk_of_edge]))


def identity_binning_matrix(n_vars: int, support: int) -> SparseBinaryMatrix:
    """Degenerate bin block sending the information positions verbatim."""
    return SparseBinaryMatrix(n_vars, support,
                              np.column_stack([np.arange(support), np.arange(support)]))


def realized_edge_distributions(H: SparseBinaryMatrix):
    """Edge-perspective (lambda, rho) maps realized by a matrix."""
    lam, rho = {}, {}
    for d, cnt in zip(*np.unique(H.row_degrees(), return_counts=True)):
        if d > 0:
            lam[int(d)] = float(d * cnt / H.nnz)
    for d, cnt in zip(*np.unique(H.col_degrees(), return_counts=True)):
        if d > 0:
            rho[int(d)] = float(d * cnt / H.nnz)
    return lam, rho


def tv_distance(a: Dict[int, float], b: Dict[int, float]) -> float:
    keys = set(a) | set(b)
    return 0.5 * math.fsum(abs(a.get(k, 0.0) - b.get(k, 0.0)) for k in keys)


def save_matrix(H: SparseBinaryMatrix, path) -> None:
    """Line-oriented sparse text format: 'rows cols nnz' then 'row col' lines."""
    with open(path, "w") as fh:
        fh.write(f"{H.rows} {H.cols} {H.nnz}\n")
        for r, c in H.entries():
            fh.write(f"{r} {c}\n")


def load_matrix(path) -> SparseBinaryMatrix:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3:
            raise ValueError("bad header; expected 'rows cols nnz'")
        rows, cols, nnz = map(int, header)
        ent = np.loadtxt(fh, dtype=np.int64, ndmin=2) if nnz else np.zeros((0, 2), np.int64)
    if len(ent) != nnz:
        raise ValueError(f"expected {nnz} entries, found {len(ent)}")
    return SparseBinaryMatrix(rows, cols, ent)


@dataclass(frozen=True)
class PlanEps:
    """Per-code rate slacks (all entries >= 0, one per link; unused slots 0)."""

    quant: tuple = ()
    coarse_bin: tuple = ()
    fine_quant: tuple = ()
    fine_bin: tuple = ()

    @classmethod
    def zeros(cls, L: int) -> "PlanEps":
        z = (0.0,) * L
        return cls(z, z, z, z)

    def filled(self, L: int) -> "PlanEps":
        def pad(v):
            v = tuple(float(x) for x in v) + (0.0,) * (L - len(v))
            if any(x < 0 for x in v):
                raise ValueError("eps entries must be >= 0")
            return v[:L]

        return PlanEps(pad(self.quant), pad(self.coarse_bin),
                       pad(self.fine_quant), pad(self.fine_bin))


@dataclass(frozen=True)
class CodeSizes:
    """Integer code dimensions for one model at block length n.

    m[l]      : information length of the coarse LDGM of link l.
    k[l]      : transmitted coarse syndrome bits (None for link 1, which
                sends the full index).
    K[l], M[l], kprime[l] : super-symbol width, fine LDGM information
                length and transmitted fine syndrome bits for split links
                (None where the splitter is disabled).
    """

    n: int
    m: tuple
    k: tuple
    K: tuple
    M: tuple
    kprime: tuple
    eps: PlanEps
    rate_report: tuple = field(default=(), compare=False)

    def transmitted_bits(self) -> int:
        total = self.m[0] + sum(x for x in self.k[1:] if x)
        total += sum(x for x in self.kprime if x)
        return total


def plan_sizes(model: CeoModel, n: int, K: Sequence[int] = (),
               eps: PlanEps | None = None) -> CodeSizes:
    """Integer code sizes realizing the scheme's rate relations at slack eps.

    Coarse quantizers: m_l/n = I(Y_l;W_l) + eps.quant[l].
    Coarse binning:    (m_l-k_l)/n = I(W_1..W_{l-1};W_l) - eps.coarse_bin[l].
    Fine quantizers:   M_l/n = I(Y_l;U_l|W_l) + eps.fine_quant[l].
    Fine binning:      (M_l-k'_l)/n = I(side;U_l|W_l) - eps.fine_bin[l].
    Raises InfeasiblePlanError when any size comes out non-positive.
    """
    L = model.L
    if n < 1000:
        raise ValueError("block length below 1000 is not supported")
    eps = (eps or PlanEps.zeros(L)).filled(L)
    K = tuple(int(k) for k in K) + (0,) * L
    m, k, Ms, kp, Kt = [], [None], [], [], []
    report = []
    for l in range(L):
        quant = bounds.coarse_quant_rate(model, l)
        ml = round(n * (quant + eps.quant[l]))
        if ml <= 0 or ml > n:
            raise InfeasiblePlanError(f"coarse code of link {l + 1}: m = {ml}")
        m.append(ml)
        report.append((f"ldgm_w{l + 1}", quant, ml / n))
        if l >= 1:
            gain = bounds.coarse_bin_gain(model, l)
            # a syndrome longer than the index is never sent; the bin block
            # degenerates to plain index transmission at k = m
            kl = min(ml, ml - round(n * (gain - eps.coarse_bin[l])))
            if kl < 0:
                raise InfeasiblePlanError(f"coarse syndrome of link {l + 1}: k = {kl}")
            k.append(kl)
            report.append((f"bin_w{l + 1}", gain, (ml - kl) / n))
    for l in range(L):
        if not model.split_enabled(l):
            Ms.append(None)
            kp.append(None)
            Kt.append(None)
            continue
        if K[l] < 1:
            raise InfeasiblePlanError(f"link {l + 1} is split but K is missing")
        fine = bounds.mi_fine_given_coarse(model.d[l], model.delta[l])
        Ml = round(n * (fine + eps.fine_quant[l]))
        gain = bounds.fine_bin_gain(model, l)
        kpl = min(Ml, Ml - round(n * (gain - eps.fine_bin[l])))
        if Ml <= 0 or kpl < 0:
            raise InfeasiblePlanError(
                f"fine code of link {l + 1}: M = {Ml}, k' = {kpl}")
        Ms.append(Ml)
        kp.append(kpl)
        Kt.append(K[l])
        report.append((f"ldgm_c{l + 1}", fine, Ml / n))
        report.append((f"bin_c{l + 1}", gain, (Ml - kpl) / n))
    return CodeSizes(n=int(n), m=tuple(m), k=tuple(k), K=tuple(Kt), M=tuple(Ms),
                     kprime=tuple(kp), eps=eps, rate_report=tuple(report))
