import numpy as np
import pytest

from binceo.bits import BitBlock, make_rng
from binceo.message_passing import (BipOptions, SpOptions, apply_phi,
                                    bip_quantize, bip_quantize_mapped,
                                    build_phi, hb_inverse, joint_demap_decode,
                                    phi_factor_messages, phi_output_llr,
                                    sp_decode_syndrome)
from binceo.probability import binary_entropy, llr_from_flip
from binceo.sparse_codes import SparseBinaryMatrix, build_ldgm, syndrome

from conftest import brute_coset_marginals

EXACT = SpOptions(max_iters=80, exit_on_syndrome=False)


def bits(s):
    return BitBlock(np.array([int(c) for c in s], dtype=np.uint8))


class TestGallagerMap:
    def test_identity_on_one_bit(self):
        g = build_phi(1, 0.5)
        assert g.s1_size == 1
        b = bits("0110")
        assert apply_phi(g, b) == b

    def test_constant_zero_map(self):
        g = build_phi(4, 0.0)
        assert g.s1_size == 0
        out = apply_phi(g, BitBlock(make_rng(0).integers(0, 2, 32).astype(np.uint8)))
        assert out.weight() == 0

    def test_three_bit_quarter_bias(self):
        g = build_phi(3, 0.25)
        assert g.s1_size == 2
        assert sorted(g.s1_patterns) == [6, 7]
        # uniform input bias is exactly |S1| / 2^K
        all_patterns = BitBlock(np.array(
            [int(b) for v in range(8) for b in f"{v:03b}"], dtype=np.uint8))
        out = apply_phi(g, all_patterns)
        assert out.weight() / 8 == 0.25

    def test_blockwise_matches_table_lookup(self):
        g = build_phi(4, 0.3)
        rng = make_rng(5)
        c = rng.integers(0, 2, 4 * 50).astype(np.uint8)
        out = apply_phi(g, BitBlock(c)).to_array()
        for t in range(50):
            val = int("".join(map(str, c[4 * t: 4 * t + 4])), 2)
            assert out[t] == (1 if val >= g.threshold else 0)

    def test_validation(self):
        with pytest.raises(ValueError):
            build_phi(0, 0.2)
        with pytest.raises(ValueError):
            build_phi(4, 0.7)
        g = build_phi(3, 0.25)
        with pytest.raises(ValueError):
            apply_phi(g, bits("0101"))


class TestPhiFactor:
    def test_dp_matches_enumeration(self, rng_factory):
        rng = rng_factory(7)
        for K in (1, 2, 3, 5):
            for delta in (0.1, 0.25, 0.5):
                g = build_phi(K, delta)
                q = rng.uniform(0.05, 0.95, (4, K))
                lam = rng.normal(0, 1.5, 4)
                msgs = phi_factor_messages(q, lam, g)
                post = phi_output_llr(q, g)
                for t in range(4):
                    # enumerate the block
                    p1 = 0.0
                    ev = {0: np.zeros(K), 1: np.zeros(K)}
                    w0, w1 = np.exp(lam[t] / 2), np.exp(-lam[t] / 2)
                    for v in range(2**K):
                        pr = 1.0
                        bits_v = [(v >> (K - 1 - j)) & 1 for j in range(K)]
                        for j, b in enumerate(bits_v):
                            pr *= q[t, j] if b else 1 - q[t, j]
                        out = 1 if v >= g.threshold else 0
                        p1 += pr * out
                        for j, b in enumerate(bits_v):
                            base = pr / (q[t, j] if b else 1 - q[t, j])
                            ev[b][j] += base * (w1 if out else w0)
                    want = np.log(ev[0]) - np.log(ev[1])
                    assert np.allclose(msgs[t], want, atol=1e-9)
                    want_post = np.log(1 - p1) - np.log(p1) if 0 < p1 < 1 else None
                    if want_post is not None and abs(want_post) < 29:
                        assert post[t] == pytest.approx(want_post, abs=1e-9)


class TestSpDecode:
    def test_tree_marginals_exact(self, rng_factory):
        rng = rng_factory(9)
        ent = [(0, 0), (1, 0), (1, 1), (2, 1), (3, 1), (3, 2), (4, 2), (5, 3), (4, 3)]
        H = SparseBinaryMatrix(6, 4, ent)
        for t in range(5):
            x = rng.integers(0, 2, 6).astype(np.uint8)
            s = H.mul_left_bits(x)
            pri = rng.normal(0, 2, 6)
            res = sp_decode_syndrome(H, BitBlock(s), pri, EXACT)
            oracle = brute_coset_marginals(H.dense(), s, pri)
            assert np.max(np.abs(res.posteriors - oracle)) < 1e-9

    def test_clamped_priors_one_iteration(self):
        H = SparseBinaryMatrix(5, 3, [(0, 0), (1, 0), (2, 1), (3, 1), (4, 2), (0, 2)])
        x = np.array([1, 0, 1, 1, 0], dtype=np.uint8)
        pri = 30.0 * (1 - 2 * x.astype(float))
        res = sp_decode_syndrome(H, syndrome(H, BitBlock(x)), pri, SpOptions())
        assert res.converged and res.iterations == 1
        assert res.bits == BitBlock(x)

    def test_no_checks_returns_prior_signs(self):
        H = SparseBinaryMatrix(4, 0, [])
        pri = np.array([1.0, -2.0, 0.5, -0.1])
        res = sp_decode_syndrome(H, BitBlock.zeros(0), pri, SpOptions())
        assert res.converged
        assert np.array_equal(res.bits.to_array(), [0, 1, 0, 1])

    def test_syndrome_consistency_when_converged(self, rng_factory):
        rng = rng_factory(10)
        from binceo.sparse_codes import DegreeDistribution, build_ldpc
        dd = DegreeDistribution({3: 1.0}, {6: 1.0})
        H = build_ldpc(400, 200, dd, make_rng(11))
        x = rng.integers(0, 2, 400).astype(np.uint8)
        noisy = x ^ (rng.random(400) < 0.04).astype(np.uint8)
        pri = llr_from_flip(0.04) * (1 - 2 * noisy.astype(float))
        res = sp_decode_syndrome(H, syndrome(H, BitBlock(x)), pri, SpOptions())
        assert res.converged
        assert np.array_equal(H.mul_left_bits(res.bits.to_array()),
                              syndrome(H, BitBlock(x)).to_array())

    def test_gf2_covariance(self, rng_factory):
        # flipping the observation and the syndrome consistently flips the output
        rng = rng_factory(12)
        from binceo.sparse_codes import DegreeDistribution, build_ldpc
        dd = DegreeDistribution({3: 1.0}, {6: 1.0})
        H = build_ldpc(120, 60, dd, make_rng(13))
        x = rng.integers(0, 2, 120).astype(np.uint8)
        pri = rng.normal(0, 1.5, 120)
        s = syndrome(H, BitBlock(x))
        res = sp_decode_syndrome(H, s, pri, SpOptions(max_iters=40))
        flip = rng.integers(0, 2, 120).astype(np.uint8)
        s2 = s ^ syndrome(H, BitBlock(flip))
        pri2 = pri * (1 - 2 * flip.astype(float))
        res2 = sp_decode_syndrome(H, s2, pri2, SpOptions(max_iters=40))
        assert res2.bits == res.bits ^ BitBlock(flip)
        signs = 1.0 - 2.0 * flip.astype(float)
        assert np.allclose(res2.posteriors, res.posteriors * signs, atol=1e-9)

    def test_posteriors_saturated(self, rng_factory):
        rng = rng_factory(14)
        H = SparseBinaryMatrix(6, 3, [(0, 0), (1, 0), (2, 1), (3, 1), (4, 2), (5, 2)])
        pri = rng.normal(0, 50, 6)
        res = sp_decode_syndrome(H, BitBlock.zeros(3), pri, SpOptions(max_iters=30))
        assert np.all(np.abs(res.posteriors) <= 30.0 + 1e-12)


class TestJointDemap:
    def test_tree_marginals_exact(self, rng_factory):
        rng = rng_factory(15)
        gmap = build_phi(2, 0.25)
        H = SparseBinaryMatrix(6, 2, [(1, 0), (2, 0), (3, 1), (4, 1)])
        for t in range(5):
            c = rng.integers(0, 2, 6).astype(np.uint8)
            s = H.mul_left_bits(c)
            lam = rng.normal(0, 1.5, 3)
            pri = rng.normal(0, 1.0, 6)
            res = joint_demap_decode(H, gmap, lam, BitBlock(s), EXACT, priors=pri)
            oracle = brute_coset_marginals(H.dense(), s, pri, phi=(gmap, lam))
            assert np.max(np.abs(res.posteriors - oracle)) < 1e-9

    def test_k1_identity_reduces_to_sp(self, rng_factory):
        rng = rng_factory(16)
        g1 = build_phi(1, 0.5)
        H = SparseBinaryMatrix(5, 3, [(0, 0), (1, 0), (1, 1), (2, 1), (3, 2), (4, 2)])
        x = rng.integers(0, 2, 5).astype(np.uint8)
        s = syndrome(H, BitBlock(x))
        lam = rng.normal(0, 2, 5)
        ra = joint_demap_decode(H, g1, lam, s, EXACT)
        rb = sp_decode_syndrome(H, s, lam, EXACT)
        assert np.allclose(ra.posteriors, rb.posteriors, atol=1e-9)
        assert ra.c_bits == rb.bits

    def test_noiseless_constraint_satisfaction(self, rng_factory):
        # tiny random priors break the exact ties between the multiple c
        # sequences consistent with a noiseless observation, which otherwise
        # trap flooding BP in limit cycles
        rng = rng_factory(17)
        gmap = build_phi(2, 0.25)
        G, Ht = build_ldgm(24, 10, make_rng(18))
        v = rng.integers(0, 2, 10).astype(np.uint8)
        c = BitBlock(G.mul_left_bits(v))
        phi_out = apply_phi(gmap, c)
        lam = 30.0 * (1 - 2 * phi_out.to_array().astype(float))
        s = syndrome(Ht, c)
        tie_break = rng.normal(0, 1e-3, 24)
        res = joint_demap_decode(Ht, gmap, lam, s, SpOptions(max_iters=200),
                                 priors=tie_break)
        assert res.converged
        assert apply_phi(gmap, res.c_bits) == phi_out
        assert syndrome(Ht, res.c_bits) == s


class TestBip:
    def test_codeword_target_zero_distortion(self):
        G, _ = build_ldgm(40, 12, make_rng(19))
        v = make_rng(20).integers(0, 2, 12).astype(np.uint8)
        target = BitBlock(G.mul_left_bits(v))
        res = bip_quantize(G, target, BipOptions(seed=1))
        assert res.distortion == 0.0
        assert res.codeword == target

    def test_rate_one_identity(self):
        G, _ = build_ldgm(32, 32, make_rng(21))
        target = BitBlock(make_rng(22).integers(0, 2, 32).astype(np.uint8))
        res = bip_quantize(G, target, BipOptions(seed=2))
        assert res.distortion == 0.0

    def test_against_exhaustive_search(self):
        # acceptance-scale check lives in test_acceptance; this is a smoke run
        ratios = []
        for trial in range(20):
            G, _ = build_ldgm(24, 8, make_rng((1, trial)), check_degree=4)
            y = BitBlock(make_rng((2, trial)).integers(0, 2, 24).astype(np.uint8))
            res = bip_quantize(G, y, BipOptions(seed=trial, restarts=3,
                                                iters_per_round=10))
            dense = G.dense()
            best = min(int(((np.array([(v >> i) & 1 for i in range(8)],
                                      dtype=np.uint8) @ dense % 2)
                            ^ y.to_array()).sum()) for v in range(256))
            assert res.distortion * 24 >= best  # oracle really is a lower bound
            ratios.append((res.distortion * 24) / max(best, 1))
        assert np.mean(ratios) <= 1.15

    def test_gf2_covariance(self):
        G, _ = build_ldgm(30, 10, make_rng(23))
        y = BitBlock(make_rng(24).integers(0, 2, 30).astype(np.uint8))
        res = bip_quantize(G, y, BipOptions(seed=3))
        flipped_info = np.ones(10, dtype=np.uint8)
        y2 = y ^ BitBlock(G.mul_left_bits(flipped_info))
        res2 = bip_quantize(G, y2, BipOptions(seed=3))
        assert res2.distortion == pytest.approx(res.distortion, abs=1e-12)
        assert res2.codeword == res.codeword ^ BitBlock(G.mul_left_bits(flipped_info))

    def test_design_distortion_default(self):
        assert hb_inverse(binary_entropy(0.11)) == pytest.approx(0.11, abs=1e-9)
        assert hb_inverse(1.0) == pytest.approx(0.5, abs=1e-6)
        assert hb_inverse(0.0) == pytest.approx(0.0, abs=1e-6)


class TestBipMapped:
    def test_constraint_quality_small(self):
        gmap = build_phi(2, 0.25)
        nK, M = 48, 20
        G, _ = build_ldgm(nK, M, make_rng(25))
        target = BitBlock(make_rng(26).integers(0, 2, 24).astype(np.uint8))
        res = bip_quantize_mapped(G, gmap, target, 0.3, BipOptions(seed=4, restarts=2))
        # the mapped image must really be phi of an actual codeword
        assert apply_phi(gmap, res.codeword) == \
            apply_phi(gmap, BitBlock(G.mul_left_bits(res.info.to_array())))
        assert res.distortion <= 0.5
