import collections

import numpy as np
import pytest

from binceo import bounds
from binceo.bits import BitBlock, make_rng
from binceo.model import CeoModel
from binceo.presets import EX5_DD, EX6_DD, get_preset
from binceo.sparse_codes import (CodeSizes, DegreeDistribution,
                                 InfeasiblePlanError, PlanEps,
                                 SparseBinaryMatrix, assemble_compound,
                                 build_binning_matrix, build_ldgm, build_ldpc,
                                 identity_binning_matrix, load_matrix,
                                 plan_sizes, realized_edge_distributions,
                                 save_matrix, syndrome, tv_distance)


class TestSparseMatrix:
    def test_rejects_duplicates_and_out_of_bounds(self):
        with pytest.raises(ValueError):
            SparseBinaryMatrix(2, 2, [(0, 0), (0, 0)])
        with pytest.raises(ValueError):
            SparseBinaryMatrix(2, 2, [(2, 0)])

    def test_dense_roundtrip(self, rng_factory):
        rng = rng_factory(1)
        ent = {(int(r), int(c)) for r, c in
               zip(rng.integers(0, 7, 12), rng.integers(0, 5, 12))}
        H = SparseBinaryMatrix(7, 5, list(ent))
        dense = H.dense()
        assert dense.sum() == len(ent)
        assert np.array_equal(np.sort(H.entries(), axis=0),
                              np.sort(np.argwhere(dense), axis=0))


class TestSyndrome:
    def test_zero_input(self):
        H = SparseBinaryMatrix(4, 3, [(0, 0), (1, 1), (2, 2), (3, 0)])
        assert syndrome(H, BitBlock.zeros(4)) == BitBlock.zeros(3)

    def test_permutation_matrix(self):
        perm = [2, 0, 3, 1]
        H = SparseBinaryMatrix(4, 4, [(i, perm[i]) for i in range(4)])
        x = BitBlock(np.array([1, 0, 1, 1], dtype=np.uint8))
        s = syndrome(H, x).to_array()
        want = np.zeros(4, dtype=np.uint8)
        for i, j in enumerate(perm):
            want[j] = x.to_array()[i]
        assert np.array_equal(s, want)

    def test_matches_dense_oracle_and_linearity(self, rng_factory):
        rng = rng_factory(2)
        for _ in range(20):
            rows, cols = int(rng.integers(2, 40)), int(rng.integers(1, 30))
            mask = rng.random((rows, cols)) < 0.2
            H = SparseBinaryMatrix(rows, cols, np.argwhere(mask))
            a = BitBlock(rng.integers(0, 2, rows).astype(np.uint8))
            b = BitBlock(rng.integers(0, 2, rows).astype(np.uint8))
            dense = H.dense()
            assert np.array_equal(syndrome(H, a).to_array(),
                                  a.to_array() @ dense % 2)
            assert syndrome(H, a ^ b) == syndrome(H, a) ^ syndrome(H, b)


class TestLdgm:
    def test_rate_one_code(self):
        G, Ht = build_ldgm(16, 16, make_rng(0))
        assert np.array_equal(G.dense(), np.eye(16, dtype=np.uint8))
        assert Ht.cols == 0

    def test_parity_identity(self, rng_factory):
        for seed in range(5):
            n, m = 60, 25
            G, Ht = build_ldgm(n, m, make_rng(seed))
            for _ in range(5):
                v = make_rng((seed, 99)).integers(0, 2, m).astype(np.uint8)
                cw = BitBlock(G.mul_left_bits(v))
                assert syndrome(Ht, cw).weight() == 0

    def test_codeword_bit_degrees_regular(self):
        G, _ = build_ldgm(10_000, 5400, make_rng(3), check_degree=4)
        parity_degrees = G.col_degrees()[5400:]
        assert np.mean(parity_degrees) == pytest.approx(4, rel=0.05)
        assert set(np.unique(parity_degrees)) == {4}


class TestLdpc:
    def test_degenerate_permutation(self):
        dd = DegreeDistribution({1: 1.0}, {1: 1.0})
        H = build_ldpc(12, 12, dd, make_rng(4))
        assert H.nnz == 12
        assert np.array_equal(np.sort(H.row_degrees()), np.ones(12))
        assert np.array_equal(np.sort(H.col_degrees()), np.ones(12))

    def test_socket_histograms_exact(self):
        dd = DegreeDistribution({2: 0.5, 6: 0.5}, {6: 1.0})
        n, k = 2000, 1000
        H = build_ldpc(n, k, dd, make_rng(5))
        assert set(np.unique(H.col_degrees())) == {6}
        counts = collections.Counter(H.row_degrees())
        # edge fractions 0.5/0.5 over degrees 2 and 6 -> node counts 1500/500
        assert counts[2] == pytest.approx(1500, abs=5)
        assert counts[6] == pytest.approx(500, abs=5)

    def test_published_profile_tv_distance(self):
        dd = EX5_DD["H2"]
        n = 10_000
        n_checks = round(n * dd.mean_inv("rho") / dd.mean_inv("lambda"))
        H = build_ldpc(n, n_checks, dd, make_rng(6))
        lam, rho = realized_edge_distributions(H)
        assert tv_distance(lam, dd.lambda_coeffs) <= 0.02
        assert tv_distance(rho, dd.rho_coeffs) <= 0.02

    def test_no_duplicate_edges_in_any_build(self):
        for name, dd in list(EX6_DD.items())[:3]:
            n_checks = round(4000 * dd.mean_inv("rho") / dd.mean_inv("lambda"))
            H = build_ldpc(4000, n_checks, dd, make_rng(hash(name) % 997))
            keys = H.entries()[:, 0] * H.cols + H.entries()[:, 1]
            assert len(np.unique(keys)) == H.nnz

    def test_irreconcilable_edge_counts(self):
        dd = DegreeDistribution({2: 1.0}, {8: 1.0})
        with pytest.raises(ValueError):
            build_ldpc(1000, 1000, dd, make_rng(7))

    def test_validation(self):
        with pytest.raises(ValueError):
            DegreeDistribution({2: 0.6, 3: 0.6}, {4: 1.0})
        with pytest.raises(ValueError):
            DegreeDistribution({0: 1.0}, {4: 1.0})


class TestCompound:
    def test_empty_hat_is_identity(self):
        _, Ht = build_ldgm(30, 12, make_rng(8))
        empty = SparseBinaryMatrix(30, 0, [])
        H = assemble_compound(Ht, empty)
        assert H.cols == Ht.cols and H.nnz == Ht.nnz

    def test_codeword_prefix_zero(self):
        G, Ht = build_ldgm(40, 15, make_rng(9))
        Hhat = build_binning_matrix(40, 10, DegreeDistribution({3: 1.0}, {3: 1.0}),
                                    15, make_rng(10))
        H = assemble_compound(Ht, Hhat)
        v = make_rng(11).integers(0, 2, 15).astype(np.uint8)
        cw = BitBlock(G.mul_left_bits(v))
        s = syndrome(H, cw).to_array()
        assert s[: Ht.cols].sum() == 0

    def test_non_codeword_generically_nonzero(self):
        G, Ht = build_ldgm(40, 15, make_rng(12))
        hits = 0
        for t in range(20):
            x = BitBlock(make_rng((13, t)).integers(0, 2, 40).astype(np.uint8))
            hits += syndrome(Ht, x).weight() > 0
        assert hits >= 19

    def test_row_mismatch(self):
        _, Ht = build_ldgm(30, 12, make_rng(14))
        with pytest.raises(ValueError):
            assemble_compound(Ht, SparseBinaryMatrix(29, 2, [(0, 0)]))


class TestBinningMatrix:
    def test_support_restriction(self):
        H = build_binning_matrix(100, 40, DegreeDistribution({3: 1.0}, {3: 1.0}),
                                 60, make_rng(15))
        assert H.rows == 100 and H.cols == 40
        assert H.row_degrees()[60:].sum() == 0

    def test_identity_block(self):
        H = identity_binning_matrix(10, 4)
        x = BitBlock(np.array([1, 0, 1, 1, 0, 0, 0, 1, 1, 0], dtype=np.uint8))
        assert np.array_equal(syndrome(H, x).to_array(), x.to_array()[:4])


class TestSaveLoad:
    def test_roundtrip(self, tmp_path):
        dd = DegreeDistribution({2: 0.5, 4: 0.5}, {4: 1.0})
        H = build_ldpc(300, round(300 / dd.mean_inv("lambda") * dd.mean_inv("rho")),
                       dd, make_rng(16))
        path = tmp_path / "H.txt"
        save_matrix(H, path)
        header = path.read_text().splitlines()[0].split()
        assert [int(x) for x in header] == [H.rows, H.cols, H.nnz]
        H2 = load_matrix(path)
        assert np.array_equal(H.entries(), H2.entries())


class TestPlanSizes:
    def test_rate_one_quantizers(self):
        m = CeoModel(p=(0.0, 0.0), d=(0.0, 0.0))
        sizes = plan_sizes(m, 2000)
        assert sizes.m == (2000, 2000)

    def test_three_link_corner_sizes_match_study(self):
        pre = get_preset("example5_corner")
        sizes = plan_sizes(pre["model"], 10_000, eps=pre["eps"])
        for got, want in zip(sizes.m, (5400, 4000, 500)):
            assert abs(got - want) / want <= 0.02

    def test_four_link_corner_sizes_match_study(self):
        model = CeoModel(p=(0.1,) * 4, d=(0.1,) * 4)
        eps = PlanEps(quant=(0.019,) * 4,
                      coarse_bin=(0.0, 0.0146, 0.0329, 0.0356))
        sizes = plan_sizes(model, 10_000, eps=eps)
        for got, want in zip(sizes.m, (5500, 5500, 5500, 5500)):
            assert abs(got - want) / want <= 0.03
        for got, want in zip(sizes.k[1:], (4400, 4000, 3600)):
            assert abs(got - want) / want <= 0.03

    def test_zero_slack_rate_identities(self):
        m = CeoModel(p=(0.2, 0.205, 0.21), d=(0.098034, 0.162914, 0.375794),
                     delta=(0.1024, 0.141, 0.0))
        n = 10_000
        sizes = plan_sizes(m, n, K=(7, 6, 0))
        assert sizes.m[0] == pytest.approx(n * bounds.coarse_quant_rate(m, 0), abs=0.5)
        assert sizes.m[1] - sizes.k[1] == pytest.approx(
            n * bounds.coarse_bin_gain(m, 1), abs=0.5)
        assert sizes.m[2] - sizes.k[2] == pytest.approx(
            n * bounds.coarse_bin_gain(m, 2), abs=0.5)
        assert sizes.M[0] == pytest.approx(
            n * bounds.mi_fine_given_coarse(m.d[0], m.delta[0]), abs=0.5)
        assert sizes.M[0] - sizes.kprime[0] == pytest.approx(
            n * bounds.fine_bin_gain(m, 0), abs=0.5)
        assert sizes.M[1] - sizes.kprime[1] == pytest.approx(
            n * bounds.fine_bin_gain(m, 1), abs=0.5)

    def test_infeasible_plan_raises(self):
        m = CeoModel(p=(0.3, 0.3), d=(0.49, 0.49))
        with pytest.raises(InfeasiblePlanError):
            plan_sizes(m, 1000)  # rate-0 quantizers round to zero size

    def test_split_needs_K(self):
        m = CeoModel(p=(0.2, 0.2), d=(0.1, 0.1), delta=(0.1, 0.0))
        with pytest.raises(InfeasiblePlanError):
            plan_sizes(m, 2000)

    def test_transmitted_bits(self):
        pre = get_preset("example5_corner")
        sizes = plan_sizes(pre["model"], 10_000, eps=pre["eps"])
        assert sizes.transmitted_bits() == sizes.m[0] + sizes.k[1] + sizes.k[2]
