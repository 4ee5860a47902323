"""Fixed-length binary blocks with packed storage and a reproducible RNG.

BitBlock packs bits into uint64 words so XOR and Hamming distance run at
machine-word speed on blocks up to 10^5 bits and beyond.  Blocks are
immutable; all operations return new blocks.

The RNG used throughout the package is numpy's Philox counter-based
generator, so parallel Monte Carlo trials can be seeded reproducibly via
SeedSequence spawning.  Its name is recorded in experiment reports.
"""

from __future__ import annotations

import numpy as np

from .probability import check_prob

RNG_ALGORITHM = "philox"

_WORD = 64


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator for reproducible, spawnable randomness."""
    return np.random.Generator(np.random.Philox(seed))


class BitBlock:
    """Immutable fixed-length sequence of bits, stored packed.

    Construct from any 0/1 sequence or via :meth:`from_packed`.
    """

    __slots__ = ("_words", "n")

    def __init__(self, bits):
        arr = np.asarray(bits, dtype=np.uint8)
        if arr.ndim != 1:
            raise ValueError("bits must be one-dimensional")
        if arr.size and arr.max(initial=0) > 1:
            raise ValueError("bits must be 0 or 1")
        self.n = int(arr.size)
        padded = np.zeros(((self.n + _WORD - 1) // _WORD) * _WORD, dtype=np.uint8)
        padded[: self.n] = arr
        packed = np.packbits(padded, bitorder="little")
        self._words = packed.view(np.uint64)
        self._words.setflags(write=False)

    @classmethod
    def zeros(cls, n: int) -> "BitBlock":
        blk = cls.__new__(cls)
        blk.n = int(n)
        words = np.zeros((n + _WORD - 1) // _WORD, dtype=np.uint64)
        words.setflags(write=False)
        blk._words = words
        return blk

    @classmethod
    def from_packed(cls, words: np.ndarray, n: int) -> "BitBlock":
        blk = cls.__new__(cls)
        blk.n = int(n)
        w = np.array(words, dtype=np.uint64)
        # mask tail bits beyond n so equality and weight are well defined
        tail = n % _WORD
        if tail and w.size:
            w[-1] &= np.uint64((1 << tail) - 1)
        w.setflags(write=False)
        blk._words = w
        return blk

    def __len__(self) -> int:
        return self.n

    def to_array(self) -> np.ndarray:
        """Unpacked uint8 array of 0/1 values, length n."""
        bits = np.unpackbits(self._words.view(np.uint8), bitorder="little")
        return bits[: self.n].copy()

    def __xor__(self, other: "BitBlock") -> "BitBlock":
        if self.n != other.n:
            raise ValueError(f"length mismatch: {self.n} vs {other.n}")
        return BitBlock.from_packed(self._words ^ other._words, self.n)

    def hamming(self, other: "BitBlock") -> int:
        if self.n != other.n:
            raise ValueError(f"length mismatch: {self.n} vs {other.n}")
        return int(np.bitwise_count(self._words ^ other._words).sum())

    def weight(self) -> int:
        return int(np.bitwise_count(self._words).sum())

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BitBlock)
            and self.n == other.n
            and bool(np.array_equal(self._words, other._words))
        )

    def __hash__(self):
        return hash((self.n, self._words.tobytes()))

    def __repr__(self) -> str:
        if self.n <= 32:
            return f"BitBlock('{''.join(map(str, self.to_array()))}')"
        return f"BitBlock(n={self.n}, weight={self.weight()})"


def xor_blocks(a: BitBlock, b: BitBlock) -> BitBlock:
    """Positionwise XOR of equal-length blocks."""
    return a ^ b


def hamming_distance(a: BitBlock, b: BitBlock) -> int:
    """Count of positions where the blocks differ."""
    return a.hamming(b)


def sample_bernoulli_block(n: int, q: float, rng: np.random.Generator) -> BitBlock:
    """i.i.d. Bernoulli(q) block of length n, deterministic given the rng state."""
    if n < 1:
        raise ValueError("block length must be >= 1")
    q = check_prob(q, "bernoulli parameter")
    return BitBlock((rng.random(n) < q).astype(np.uint8))
