"""Exact rate-distortion bounds for the binary CEO problem at fixed test channels.

Everything here reduces to one primitive: the joint entropy of binary
variables that each observe the symmetric source through an independent
BSC.  For effective crossovers (e_1, ..., e_k) the joint pmf is

    q_j = (Q_j + Q_{2^k-1-j}) / 2,   Q_j = prod_l eta(e_l, b_l(j)),

with eta(e, 0) = e, eta(e, 1) = 1 - e and b_1(j) the most significant digit
of the k-bit expansion of j.  Per-link descriptions are binary-symmetric, so
a coarse description behaves like the source through the composed crossover
p*d*delta and a fine one through p*d; any mixed joint entropy is therefore
an instance of the same formula.

Entropy sums rely on numpy's pairwise summation; published comparisons are
made at 1e-9 absolute.
"""

from __future__ import annotations

import math
import re
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .model import CeoModel, RatePoint
from .probability import binary_convolve, binary_entropy, check_prob

_MAX_L = 24


def flip_probs(model: CeoModel) -> list:
    """Per-link effective crossovers P_l = p_l * d_l."""
    return [model.flip_u(l) for l in range(model.L)]


def q_products(P: Sequence[float]) -> np.ndarray:
    """Vector of 2^L conditional pattern probabilities Q_j.

    Q_j = prod_l eta(P_l, b_l(j)) where the first entry of P owns the most
    significant digit of j (so for L=3, index 4 = 100b pairs 1-P_1 with P_2
    and P_3).  Sums to 1.
    """
    L = len(P)
    if L > _MAX_L:
        raise ValueError(f"L={L} exceeds the supported maximum {_MAX_L}")
    Q = np.ones(1)
    for e in P:
        e = check_prob(e, "flip probability")
        Q = np.kron(Q, np.array([e, 1.0 - e]))
    return Q


def joint_entropy_bsc(flips: Sequence[float]) -> float:
    """Joint entropy (bits) of variables observing the source through BSCs.

    Empty selection has zero entropy.
    """
    if len(flips) == 0:
        return 0.0
    Q = q_products(flips)
    q = (Q + Q[::-1]) / 2.0
    q = q[q > 0]
    return float(-np.sum(q * np.log2(q)))


def entropy_U(model: CeoModel) -> float:
    """H(U_1, ..., U_L) of the fine descriptions."""
    return joint_entropy_bsc(flip_probs(model))


_TOKEN = re.compile(r"^([uw])([1-9][0-9]*)$")


def _subset_flips(model: CeoModel, subset: Iterable[str]) -> list:
    """Effective crossovers for tokens like 'W1', 'u3' (1-based links)."""
    seen = set()
    flips = []
    for token in subset:
        m = _TOKEN.match(str(token).strip().lower())
        if not m:
            raise ValueError(f"bad subset token {token!r}; expected e.g. 'W1' or 'U3'")
        kind, link = m.group(1), int(m.group(2))
        if not (1 <= link <= model.L):
            raise ValueError(f"link {link} out of range 1..{model.L}")
        if link in seen:
            raise ValueError(f"link {link} selected twice")
        seen.add(link)
        l = link - 1
        flips.append(model.flip_w(l) if kind == "w" else model.flip_u(l))
    return flips


def joint_entropy_subset(model: CeoModel, subset: Iterable[str]) -> float:
    """Exact joint entropy of a per-link selection of coarse/fine descriptions.

    ``subset`` holds tokens 'Wl' or 'Ul' (1-based), at most one per link.
    """
    return joint_entropy_bsc(_subset_flips(model, subset))


def r_th(model: CeoModel) -> float:
    """Minimum sum rate at the given test channels: H(U) - sum_l h_b(d_l)."""
    return entropy_U(model) - math.fsum(binary_entropy(d) for d in model.d)


def d_th(model: CeoModel) -> float:
    """Minimum log-loss at the given test channels: 1 + sum_l h_b(P_l) - H(U)."""
    return 1.0 + math.fsum(binary_entropy(P) for P in flip_probs(model)) - entropy_U(model)


def mi_fine_given_coarse(d: float, delta: float) -> float:
    """Quantization rate of the split stage: I(Y;U|W) = h_b(delta*d) - h_b(d)."""
    return binary_entropy(binary_convolve(delta, d)) - binary_entropy(d)


def _w_tokens(upto: int) -> list:
    return [f"W{j}" for j in range(1, upto + 1)]


def coarse_quant_rate(model: CeoModel, l: int) -> float:
    """I(Y_l; W_l) = 1 - h_b(d_l * delta_l) (1 - h_b(d_L) for the last link)."""
    if l == model.L - 1:
        return 1.0 - binary_entropy(model.d[l])
    return 1.0 - binary_entropy(binary_convolve(model.d[l], model.delta[l]))


def coarse_bin_gain(model: CeoModel, l: int) -> float:
    """Binning gain of the coarse stage of link l (0-based, l >= 1).

    I(W_1..W_{l}; W_{l+1}) in 1-based terms; for the last link the target is
    U_L.  Computed as H(prev) + 1 - H(prev, target).
    """
    prev = [model.flip_w(j) for j in range(l)]
    target = model.flip_u(l) if l == model.L - 1 else model.flip_w(l)
    return joint_entropy_bsc(prev) + 1.0 - joint_entropy_bsc(prev + [target])


def fine_bin_gain(model: CeoModel, l: int) -> float:
    """Binning gain of the fine stage of link l (0-based, l <= L-2).

    I(W_1..W_{l-1}, U_{l+1}..U_L ; U_l | W_l), evaluated as the entropy drop
    when the coarse description of link l is replaced by the fine one:
    H(side, W_l) - H(side, U_l).
    """
    side = [model.flip_w(j) for j in range(l)]
    side += [model.flip_u(j) for j in range(l + 1, model.L)]
    return joint_entropy_bsc(side + [model.flip_w(l)]) - joint_entropy_bsc(
        side + [model.flip_u(l)]
    )


def mi_binning_terms(model: CeoModel) -> dict:
    """All quantization- and binning-rate terms of the successive scheme.

    Keys use the mutual-information notation of the decoding order
    (W_1, ..., W_{L-1}, U_L, ..., U_1), e.g. for L=3:
    'I(Y1;W1)', 'I(W1;W2)', 'I(W1,W2;U3)', 'I(Y2;U2|W2)',
    'I(W1,U3;U2|W2)', 'I(U2,U3;U1|W1)'.  All values are >= 0.
    """
    L = model.L
    terms = {}
    for l in range(L - 1):
        link = l + 1
        terms[f"I(Y{link};W{link})"] = coarse_quant_rate(model, l)
        if l >= 1:
            prev = ",".join(_w_tokens(l))
            terms[f"I({prev};W{link})"] = coarse_bin_gain(model, l)
    prev = ",".join(_w_tokens(L - 1)) if L > 1 else ""
    terms[f"I(Y{L};U{L})"] = coarse_quant_rate(model, L - 1)
    if L > 1:
        terms[f"I({prev};U{L})"] = coarse_bin_gain(model, L - 1)
    for l in range(L - 1):
        link = l + 1
        terms[f"I(Y{link};U{link}|W{link})"] = mi_fine_given_coarse(
            model.d[l], model.delta[l]
        )
        side = _w_tokens(l) + [f"U{j}" for j in range(link + 1, L + 1)]
        terms[f"I({','.join(side)};U{link}|W{link})"] = fine_bin_gain(model, l)
    return terms


def link_rate_targets(model: CeoModel) -> RatePoint:
    """Ideal per-link rates of the successive scheme at zero code slack.

    Link l pays its coarse stage I(Y_l;W_l|W_1..W_{l-1}) plus its fine stage
    I(Y_l;U_l|W_1..W_l, U_{l+1}..U_L); the last link pays only
    I(Y_L;U_L|W_1..W_{L-1}).  The chain rule over the decoding order makes
    the total equal r_th exactly; the distortion field carries d_th.
    """
    L = model.L
    rates = [0.0] * L
    for l in range(L - 1):
        rates[l] += coarse_quant_rate(model, l) - coarse_bin_gain(model, l)
        rates[l] += mi_fine_given_coarse(model.d[l], model.delta[l]) - fine_bin_gain(
            model, l
        )
    rates[L - 1] = coarse_quant_rate(model, L - 1) - coarse_bin_gain(model, L - 1)
    return RatePoint.of(rates, d_th(model))


def region_check(point: RatePoint, model: CeoModel, tol: float = 1e-9):
    """Membership test for the fixed-test-channel rate-distortion region.

    Checks every subset-rate constraint
        sum_{l in A} R_l >= H(U_A | U_{A^c}) - sum_{l in A} h_b(d_l)
    plus the distortion constraint D >= d_th.  Returns (ok, violations)
    where violations lists human-readable descriptions of failed constraints.
    """
    L = model.L
    if L > 16:
        raise ValueError("region_check enumerates 2^L - 1 subsets; L <= 16 only")
    P = flip_probs(model)
    H_all = joint_entropy_bsc(P)
    violations = []
    for size in range(1, L + 1):
        for A in combinations(range(L), size):
            comp = [P[l] for l in range(L) if l not in A]
            bound = H_all - joint_entropy_bsc(comp) - math.fsum(
                binary_entropy(model.d[l]) for l in A
            )
            got = math.fsum(point.per_link_rates[l] for l in A)
            if got < bound - tol:
                names = ",".join(str(l + 1) for l in A)
                violations.append(
                    f"sum rate of links {{{names}}} = {got:.9f} < {bound:.9f}"
                )
    dth = d_th(model)
    if point.distortion < dth - tol:
        violations.append(f"distortion {point.distortion:.9f} < D_th {dth:.9f}")
    return (not violations, violations)
