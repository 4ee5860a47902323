import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from binceo.bits import (BitBlock, hamming_distance, make_rng,
                         sample_bernoulli_block, xor_blocks)


def blk(s):
    return BitBlock(np.array([int(c) for c in s], dtype=np.uint8))


def test_hamming_reference():
    assert hamming_distance(blk("0000"), blk("0000")) == 0
    assert hamming_distance(blk("0000"), blk("1111")) == 4
    assert hamming_distance(blk("0110"), blk("1100")) == 2


def test_xor_reference():
    zero = BitBlock.zeros(4)
    a = blk("0110")
    assert xor_blocks(a, zero) == a
    assert xor_blocks(a, a) == zero
    assert xor_blocks(blk("0110"), blk("1100")) == blk("1010")


def test_length_mismatch():
    with pytest.raises(ValueError):
        xor_blocks(blk("01"), blk("011"))
    with pytest.raises(ValueError):
        hamming_distance(blk("01"), blk("011"))


@settings(max_examples=50)
@given(st.integers(1, 300), st.integers(0, 2**32 - 1))
def test_packed_ops_match_numpy(n, seed):
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 2, n).astype(np.uint8)
    b = rng.integers(0, 2, n).astype(np.uint8)
    A, B = BitBlock(a), BitBlock(b)
    assert np.array_equal((A ^ B).to_array(), a ^ b)
    assert A.hamming(B) == int((a ^ b).sum())
    assert A.weight() == int(a.sum())
    assert np.array_equal(A.to_array(), a)


def test_bernoulli_degenerate():
    rng = make_rng(0)
    assert sample_bernoulli_block(64, 0.0, rng).weight() == 0
    assert sample_bernoulli_block(64, 1.0, rng).weight() == 64


def test_bernoulli_law_of_large_numbers():
    rng = make_rng(42)
    b = sample_bernoulli_block(10**6, 0.1, rng)
    assert b.weight() / 10**6 == pytest.approx(0.1, abs=1e-3)


def test_bernoulli_determinism():
    a = sample_bernoulli_block(999, 0.3, make_rng(7))
    b = sample_bernoulli_block(999, 0.3, make_rng(7))
    assert a == b


def test_rejects_non_binary():
    with pytest.raises(ValueError):
        BitBlock(np.array([0, 1, 2], dtype=np.uint8))
