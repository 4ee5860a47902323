"""End-to-end successive Wyner-Ziv chain: per-link encoders, the (2L-1)-step
successive decoder, soft reconstruction and log-loss measurement.

Side-information beliefs are never estimated from data: every stage prior is
computed analytically from the model's effective crossovers.  For coarse
stages the already-decoded blocks bear on the target only through the
source, so the exact prior is the source posterior pushed through the
target's effective BSC.  For fine stages the observations share the target
link's observation-plus-test noise, so the exact likelihood marginalizes
that shared term explicitly.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import bounds
from .bits import RNG_ALGORITHM, BitBlock, make_rng, sample_bernoulli_block
from .model import CeoModel, RatePoint
from .probability import binary_convolve
from .message_passing import (
    BipOptions,
    GallagerMap,
    SpOptions,
    apply_phi,
    bip_quantize,
    bip_quantize_mapped,
    build_phi,
    joint_demap_decode,
    sp_decode_syndrome,
)
from .sparse_codes import (
    CodeSizes,
    DegreeDistribution,
    SparseBinaryMatrix,
    assemble_compound,
    build_binning_matrix,
    build_ldgm,
    identity_binning_matrix,
    syndrome,
)

LOG_LOSS_CLIP = 2.0**-20

# Default bin-block profiles, found by threshold measurements on the
# systematic-support syndrome graphs.  A single decoded side block gives a
# near-uniform moderate-LLR channel, where the irregular profile wins; two
# or more side blocks polarize the priors (positions where the blocks
# disagree carry no information), where the regular graph is markedly more
# robust.  Check degree 3 throughout: higher degrees starve the decoding
# wave at these noise levels.
BIN_DD_PAIR = DegreeDistribution.normalized(
    {2: 0.45, 3: 0.30, 9: 0.25}, {3: 1.0})
BIN_DD_MULTI = DegreeDistribution.normalized({3: 1.0}, {3: 1.0})


def default_bin_dd(stage_index: int) -> DegreeDistribution:
    """Bin-block profile for the coarse stage of link ``stage_index`` (0-based)."""
    return BIN_DD_PAIR if stage_index <= 1 else BIN_DD_MULTI


@dataclass(frozen=True)
class CoarseCode:
    G: SparseBinaryMatrix
    Htilde: SparseBinaryMatrix
    Hhat: Optional[SparseBinaryMatrix]
    Hfull: Optional[SparseBinaryMatrix]


@dataclass(frozen=True)
class FineCode:
    G: SparseBinaryMatrix
    Htilde: SparseBinaryMatrix
    Hhat: SparseBinaryMatrix
    Hfull: SparseBinaryMatrix
    gmap: GallagerMap


@dataclass(frozen=True)
class CeoCodes:
    """Constructed code ensemble for one model and size plan."""

    model: CeoModel
    sizes: CodeSizes
    coarse: tuple
    fine: tuple

    @property
    def compound_count(self) -> int:
        return sum(1 for c in self.coarse if c.Hhat is not None) + sum(
            1 for f in self.fine if f is not None
        )


def ldgm_check_degree_for_rate(rate: float) -> int:
    """Parity-column weight giving near-optimal BiP distortion at this rate."""
    return int(max(3, min(10, round(3 + 8.5 * rate))))


def _binning_block(n_vars: int, support: int, k: int, dd, rng):
    """Lambda-profile bin block, degenerating to the raw index at k >= support
    and to an empty block at k == 0 (nothing transmitted)."""
    if k == 0:
        return SparseBinaryMatrix(n_vars, 0, [])
    if k >= support:
        return identity_binning_matrix(n_vars, support)
    return build_binning_matrix(n_vars, k, dd, support, rng)


def build_codes(
    model: CeoModel,
    sizes: CodeSizes,
    seed,
    dd_map: Optional[dict] = None,
    ldgm_check_degree: Optional[int] = None,
) -> CeoCodes:
    """Build all LDGM quantizers and LDPC binning blocks of the scheme.

    ``dd_map`` optionally pins the binning degree distribution per block,
    keyed 'H2'..'HL' for the coarse stages and 'H1', 'H2p', ... for the
    fine ones.  A syndrome budget of at least the quantizer's information
    length degenerates that block to plain index transmission.
    """
    L = model.L
    dd_map = dd_map or {}
    root = np.random.SeedSequence(seed if not isinstance(seed, tuple) else list(seed))
    seeds = root.spawn(2 * L)
    coarse = []
    for l in range(L):
        rng = np.random.Generator(np.random.Philox(seeds[l]))
        dc = ldgm_check_degree or ldgm_check_degree_for_rate(sizes.m[l] / sizes.n)
        G, Ht = build_ldgm(sizes.n, sizes.m[l], rng, check_degree=dc)
        if l == 0:
            coarse.append(CoarseCode(G, Ht, None, None))
            continue
        dd = dd_map.get(f"H{l + 1}", default_bin_dd(l))
        Hhat = _binning_block(sizes.n, sizes.m[l], sizes.k[l], dd, rng)
        coarse.append(CoarseCode(G, Ht, Hhat, assemble_compound(Ht, Hhat)))
    fine = []
    for l in range(L):
        if sizes.M[l] is None:
            fine.append(None)
            continue
        rng = np.random.Generator(np.random.Philox(seeds[L + l]))
        nK = sizes.n * sizes.K[l]
        dc = ldgm_check_degree or ldgm_check_degree_for_rate(sizes.M[l] / nK)
        G, Ht = build_ldgm(nK, sizes.M[l], rng, check_degree=dc)
        key = "H1" if l == 0 else f"H{l + 1}p"
        dd = dd_map.get(key, BIN_DD_PAIR)
        Hhat = _binning_block(nK, sizes.M[l], sizes.kprime[l], dd, rng)
        gmap = build_phi(sizes.K[l], model.delta[l])
        fine.append(FineCode(G, Ht, Hhat, assemble_compound(Ht, Hhat), gmap))
    codes = CeoCodes(model=model, sizes=sizes, coarse=tuple(coarse), fine=tuple(fine))
    if all(model.split_enabled(l) for l in range(L - 1)):
        assert codes.compound_count == 2 * L - 2
    return codes


# ---------------------------------------------------------------------------
# Analytic side-information beliefs
# ---------------------------------------------------------------------------


def _side_flip(model: CeoModel, kind: str, l: int) -> float:
    return model.flip_w(l) if kind == "w" else model.flip_u(l)


def source_posterior_llr(model: CeoModel, side: Sequence, blocks: Sequence[BitBlock],
                         n: int) -> np.ndarray:
    """Per-position LLR of the source given decoded blocks.

    ``side`` lists (kind, link) pairs with kind 'w' or 'u'; each block is an
    independent BSC observation of the source with the corresponding
    effective crossover.
    """
    llr = np.zeros(n)
    for (kind, l), blk in zip(side, blocks):
        e = min(max(_side_flip(model, kind, l), 1e-12), 1 - 1e-12)
        lam = math.log((1 - e) / e)
        llr += lam * (1.0 - 2.0 * blk.to_array().astype(float))
    return llr


def coarse_stage_priors(model: CeoModel, target_kind: str, target_l: int,
                        side: Sequence, blocks: Sequence[BitBlock],
                        n: int) -> np.ndarray:
    """Exact prior LLRs for a coarse stage target given decoded side blocks."""
    x_llr = source_posterior_llr(model, side, blocks, n)
    e = _side_flip(model, target_kind, target_l)
    return 2.0 * np.arctanh(np.tanh(x_llr / 2.0) * (1.0 - 2.0 * e))


def fine_stage_observation_llr(model: CeoModel, l: int, w_hat: BitBlock,
                               side: Sequence, blocks: Sequence[BitBlock]) -> np.ndarray:
    """Exact likelihood LLR of the split bit of link l at every position.

    The split bit v satisfies w_l xor side_j = v xor s xor t_j where
    s ~ Ber(p_l * d_l) is shared across observations and t_j is the side
    block's own effective noise; the shared term is marginalized exactly.
    """
    n = w_hat.n
    if not side:
        return np.zeros(n)
    s_flip = binary_convolve(model.p[l], model.d[l])
    w = w_hat.to_array()
    obs = np.stack([w ^ blk.to_array() for blk in blocks], axis=1).astype(float)
    flips = np.array([
        min(max(_side_flip(model, kind, j), 1e-12), 1 - 1e-12) for kind, j in side
    ])
    log_e = np.log(flips)
    log_ne = np.log1p(-flips)
    ev = {0: np.zeros(n), 1: np.zeros(n)}
    for v in (0, 1):
        acc = np.zeros(n)
        for s_val, s_pr in ((0, 1.0 - s_flip), (1, s_flip)):
            t = np.abs(obs - ((v + s_val) % 2))  # t_j needed to explain obs
            logp = t @ log_e + (1.0 - t) @ log_ne
            acc += s_pr * np.exp(logp)
        ev[v] = np.clip(acc, 1e-300, None)
    return np.log(ev[0]) - np.log(ev[1])


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------


@dataclass
class EncodedMessages:
    """Bits actually sent to the decoder, per link."""

    w1_index: BitBlock
    coarse_syndromes: tuple  # index l>=1 holds the coarse (or last-link) syndrome
    fine_syndromes: tuple    # per link, None when the splitter is disabled

    def link_bits(self, l: int, L: int) -> int:
        total = 0
        if l == 0:
            total += self.w1_index.n
        elif self.coarse_syndromes[l] is not None:
            total += self.coarse_syndromes[l].n
        if self.fine_syndromes[l] is not None:
            total += self.fine_syndromes[l].n
        return total

    def total_bits(self, L: int) -> int:
        return sum(self.link_bits(l, L) for l in range(L))


@dataclass
class EncoderTruth:
    w: tuple
    u: tuple
    c: tuple
    w1_info: BitBlock
    quant_dist_w: tuple   # realized d_H(w_l, y_l)/n
    quant_dist_u: tuple   # realized d_H(u_l, y_l)/n
    converged: tuple


def encode_all(model: CeoModel, codes: CeoCodes, y: Sequence[BitBlock],
               bip_opts: BipOptions = BipOptions()) -> tuple:
    """Run every link's quantizers and assemble the transmitted messages."""
    L = model.L
    n = codes.sizes.n
    w, u, c, flags = [], [], [], []
    dist_w, dist_u = [], []
    w1_info = None
    for l in range(L):
        design_w = binary_convolve(model.d[l], model.delta[l]) if l < L - 1 else model.d[l]
        res = bip_quantize(codes.coarse[l].G, y[l],
                           BipOptions(**{**bip_opts.__dict__,
                                         "design_distortion": design_w,
                                         "seed": (bip_opts.seed, l)}))
        w.append(res.codeword)
        dist_w.append(res.distortion)
        ok = res.converged
        if l == 0:
            w1_info = res.info
        if codes.fine[l] is not None:
            fine = codes.fine[l]
            target = y[l] ^ res.codeword
            resf = bip_quantize_mapped(fine.G, fine.gmap, target, model.d[l],
                                       BipOptions(**{**bip_opts.__dict__,
                                                     "seed": (bip_opts.seed, 100 + l)}))
            c.append(resf.codeword)
            u.append(w[l] ^ apply_phi(fine.gmap, resf.codeword))
            ok = ok and resf.converged
        else:
            c.append(None)
            u.append(w[l])
        dist_u.append(u[l].hamming(y[l]) / n)
        flags.append(ok)

    coarse_syn = [None]
    for l in range(1, L):
        blk = u[l] if l == L - 1 else w[l]
        coarse_syn.append(syndrome(codes.coarse[l].Hhat, blk))
    fine_syn = []
    for l in range(L):
        if codes.fine[l] is None:
            fine_syn.append(None)
        else:
            fine_syn.append(syndrome(codes.fine[l].Hhat, c[l]))
    msgs = EncodedMessages(w1_index=w1_info, coarse_syndromes=tuple(coarse_syn),
                           fine_syndromes=tuple(fine_syn))
    truth = EncoderTruth(w=tuple(w), u=tuple(u), c=tuple(c), w1_info=w1_info,
                         quant_dist_w=tuple(dist_w), quant_dist_u=tuple(dist_u),
                         converged=tuple(flags))
    return msgs, truth


# ---------------------------------------------------------------------------
# Successive decoding
# ---------------------------------------------------------------------------


@dataclass
class DecodeResult:
    u_hat: tuple
    w_hat: tuple
    stage_converged: dict
    stage_iterations: dict


def _compound_syndrome(Htilde_cols: int, sent: BitBlock) -> BitBlock:
    z = np.zeros(Htilde_cols + sent.n, dtype=np.uint8)
    z[Htilde_cols:] = sent.to_array()
    return BitBlock(z)


def successive_decode(model: CeoModel, codes: CeoCodes, msgs: EncodedMessages,
                      sp_opts: SpOptions = SpOptions()) -> DecodeResult:
    """(2L-1)-step successive decoder following the order W_1..W_{L-1}, U_L..U_1.

    Non-converged stages are recorded and decoding proceeds with their best
    marginals, so downstream error propagation is measured rather than
    hidden.
    """
    L = model.L
    n = codes.sizes.n
    w_hat: list = [None] * L
    u_hat: list = [None] * L
    conv, iters = {}, {}

    w_hat[0] = BitBlock(codes.coarse[0].G.mul_left_bits(msgs.w1_index.to_array()))
    side = [("w", 0)]
    side_blocks = [w_hat[0]]

    for l in range(1, L):
        target_kind = "u" if l == L - 1 else "w"
        priors = coarse_stage_priors(model, target_kind, l, side, side_blocks, n)
        syn = _compound_syndrome(codes.coarse[l].Htilde.cols, msgs.coarse_syndromes[l])
        res = sp_decode_syndrome(codes.coarse[l].Hfull, syn, priors, sp_opts)
        name = f"u{L}" if l == L - 1 else f"w{l + 1}"
        conv[name], iters[name] = res.converged, res.iterations
        if l == L - 1:
            u_hat[l] = res.bits
            w_hat[l] = res.bits
        else:
            w_hat[l] = res.bits
            side.append(("w", l))
            side_blocks.append(res.bits)

    for l in range(L - 2, -1, -1):
        if codes.fine[l] is None:
            u_hat[l] = w_hat[l]
            continue
        fine = codes.fine[l]
        obs_side = [("w", j) for j in range(l)] + [("u", j) for j in range(l + 1, L)]
        obs_blocks = [w_hat[j] for j in range(l)] + [u_hat[j] for j in range(l + 1, L)]
        chan = fine_stage_observation_llr(model, l, w_hat[l], obs_side, obs_blocks)
        syn = _compound_syndrome(fine.Htilde.cols, msgs.fine_syndromes[l])
        res = joint_demap_decode(fine.Hfull, fine.gmap, chan, syn, sp_opts)
        u_hat[l] = w_hat[l] ^ apply_phi(fine.gmap, res.c_bits)
        conv[f"u{l + 1}"], iters[f"u{l + 1}"] = res.converged, res.iterations

    return DecodeResult(u_hat=tuple(u_hat), w_hat=tuple(w_hat),
                        stage_converged=conv, stage_iterations=iters)


# ---------------------------------------------------------------------------
# Reconstruction and measurement
# ---------------------------------------------------------------------------


def soft_reconstruct(model: CeoModel, u_hat: Sequence[BitBlock]) -> np.ndarray:
    """Per-position posterior Pr(X_t = 1) given the decoded fine descriptions."""
    n = u_hat[0].n
    llr = source_posterior_llr(model, [("u", l) for l in range(model.L)], u_hat, n)
    return 1.0 / (1.0 + np.exp(np.clip(llr, -500, 500)))


def log_loss(x: BitBlock, xhat: np.ndarray, clip: float = LOG_LOSS_CLIP) -> float:
    """Average log(1 / xhat_t(x_t)) in bits, with posterior clipping."""
    xa = x.to_array().astype(float)
    p = np.where(xa == 1.0, xhat, 1.0 - xhat)
    p = np.clip(p, clip, 1.0)
    return float(np.mean(-np.log2(p)))


# ---------------------------------------------------------------------------
# Trials
# ---------------------------------------------------------------------------


@dataclass
class TrialResult:
    d_em: float
    gap: float
    stage_bers: dict
    quant_dist_w: tuple
    quant_dist_u: tuple
    per_link_bits: tuple
    stage_converged: dict
    encoder_converged: tuple
    wall_clock: float


def sample_sources(model: CeoModel, n: int, rng: np.random.Generator):
    """Draw the source block and the per-link noisy observations."""
    x = sample_bernoulli_block(n, 0.5, rng)
    y = [x ^ sample_bernoulli_block(n, model.p[l], rng) for l in range(model.L)]
    return x, y


def _as_seedseq(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def run_trial(model: CeoModel, codes: Optional[CeoCodes], seed,
              bip_opts: BipOptions = BipOptions(),
              sp_opts: SpOptions = SpOptions(),
              decode_bypass: bool = False) -> TrialResult:
    """One block through the full chain (or the reconstruction oracle)."""
    if decode_bypass:
        return run_bypass_trial(model, codes.sizes.n, seed)
    t0 = time.perf_counter()
    rng = np.random.Generator(np.random.Philox(_as_seedseq(seed)))
    L = model.L
    n = codes.sizes.n
    x, y = sample_sources(model, n, rng)
    bip_seed = int(rng.integers(2**62))
    msgs, truth = encode_all(model, codes, y,
                             BipOptions(**{**bip_opts.__dict__, "seed": bip_seed}))
    dec = successive_decode(model, codes, msgs, sp_opts)
    bers = {}
    for l in range(1, L - 1):
        bers[f"w{l + 1}"] = dec.w_hat[l].hamming(truth.w[l]) / n
    bers[f"u{L}"] = dec.u_hat[L - 1].hamming(truth.u[L - 1]) / n
    for l in range(L - 2, -1, -1):
        if codes.fine[l] is not None:
            bers[f"u{l + 1}"] = dec.u_hat[l].hamming(truth.u[l]) / n
    d_em = log_loss(x, soft_reconstruct(model, dec.u_hat))
    return TrialResult(
        d_em=d_em,
        gap=d_em - bounds.d_th(model),
        stage_bers=bers,
        quant_dist_w=truth.quant_dist_w,
        quant_dist_u=truth.quant_dist_u,
        per_link_bits=tuple(msgs.link_bits(l, L) for l in range(L)),
        stage_converged=dec.stage_converged,
        encoder_converged=truth.converged,
        wall_clock=time.perf_counter() - t0,
    )


def run_bypass_trial(model: CeoModel, n: int, seed) -> TrialResult:
    """Reconstruction oracle: true test-channel outputs, no coding."""
    t0 = time.perf_counter()
    rng = np.random.Generator(np.random.Philox(_as_seedseq(seed)))
    x, y = sample_sources(model, n, rng)
    u = [y[l] ^ sample_bernoulli_block(n, model.d[l], rng) for l in range(model.L)]
    d_em = log_loss(x, soft_reconstruct(model, u))
    ideal = bounds.link_rate_targets(model)
    return TrialResult(
        d_em=d_em, gap=d_em - bounds.d_th(model), stage_bers={},
        quant_dist_w=(), quant_dist_u=(),
        per_link_bits=tuple(int(round(r * n)) for r in ideal.per_link_rates),
        stage_converged={}, encoder_converged=(),
        wall_clock=time.perf_counter() - t0)


@dataclass
class ExperimentReport:
    """Aggregate of independent blocks plus per-block detail."""

    n: int
    blocks: int
    seed: int
    rng_algorithm: str
    r_th: float
    d_th: float
    rate_targets: tuple
    per_link_rates: tuple
    sum_rate: float
    d_em: float
    gap: float
    d_em_std: float
    sigma_mc: float
    stage_bers: dict
    quant_dist_w: tuple
    quant_dist_u: tuple
    converged_fraction: float
    log_loss_clip_exp: int
    wall_clock: float
    trials: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = dict(self.__dict__)
        out["trials"] = [dict(t.__dict__) for t in self.trials]
        return out


def _mean_tuple(rows) -> tuple:
    if not rows or not rows[0]:
        return ()
    return tuple(float(np.mean([r[i] for r in rows])) for i in range(len(rows[0])))


def run_experiment(model: CeoModel, codes: Optional[CeoCodes], seed: int, blocks: int,
                   bip_opts: BipOptions = BipOptions(),
                   sp_opts: SpOptions = SpOptions(),
                   decode_bypass: bool = False,
                   n: Optional[int] = None,
                   threads: int = 1) -> ExperimentReport:
    """Average independent blocks into one report.

    Blocks are seeded by spawning the root seed, so reports are reproducible
    regardless of scheduling; with threads > 1 independent blocks run in a
    thread pool and are gathered in index order.
    """
    t0 = time.perf_counter()
    if blocks < 1:
        raise ValueError("need at least one block")
    ss = np.random.SeedSequence(seed)
    child_seeds = ss.spawn(blocks)

    def one(i: int) -> TrialResult:
        if decode_bypass and codes is None:
            return run_bypass_trial(model, n, child_seeds[i])
        return run_trial(model, codes, child_seeds[i], bip_opts, sp_opts,
                         decode_bypass=decode_bypass)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            trials = list(pool.map(one, range(blocks)))
    else:
        trials = [one(i) for i in range(blocks)]

    d_ems = np.array([t.d_em for t in trials])
    bers: dict = {}
    for t in trials:
        for k, v in t.stage_bers.items():
            bers.setdefault(k, []).append(v)
    all_conv = [
        all(t.stage_converged.values()) and all(t.encoder_converged) for t in trials
    ]
    block_n = codes.sizes.n if codes is not None else n
    ideal = bounds.link_rate_targets(model)
    rates = _mean_tuple([t.per_link_bits for t in trials])
    rates = tuple(r / block_n for r in rates)
    return ExperimentReport(
        n=block_n,
        blocks=blocks,
        seed=seed,
        rng_algorithm=RNG_ALGORITHM,
        r_th=bounds.r_th(model),
        d_th=bounds.d_th(model),
        rate_targets=ideal.per_link_rates,
        per_link_rates=rates,
        sum_rate=float(sum(rates)),
        d_em=float(d_ems.mean()),
        gap=float(d_ems.mean() - bounds.d_th(model)),
        d_em_std=float(d_ems.std(ddof=1)) if blocks > 1 else 0.0,
        sigma_mc=float(d_ems.std(ddof=1) / math.sqrt(blocks)) if blocks > 1 else 0.0,
        stage_bers={k: float(np.mean(v)) for k, v in sorted(bers.items())},
        quant_dist_w=_mean_tuple([t.quant_dist_w for t in trials]),
        quant_dist_u=_mean_tuple([t.quant_dist_u for t in trials]),
        converged_fraction=float(np.mean(all_conv)),
        log_loss_clip_exp=-20,
        wall_clock=time.perf_counter() - t0,
        trials=trials,
    )
