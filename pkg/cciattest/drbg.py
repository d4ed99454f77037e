"""Hash based deterministic generators."""

import hashlib

import numpy as np
from numpy.typing import NDArray

from cciattest.exceptions import NonceExhaustedError

BLOCK_BYTES = 32
WORDS_PER_BLOCK = BLOCK_BYTES // 4
FEISTEL_ROUNDS = 4


class HashDrbg:
    """SHA-256 in counter mode: block i is ``H(seed || LE64(i))``.

    Args:
        seed: Generator seed.
    """

    def __init__(self, seed: bytes) -> None:
        self.seed = bytes(seed)

    def block(self, index: int) -> bytes:
        """Return output block `index`."""
        return hashlib.sha256(
            self.seed + index.to_bytes(8, "little")
        ).digest()

    def read(self, length: int, offset: int = 0) -> bytes:
        """Return `length` output bytes starting at byte `offset`."""
        if length < 0 or offset < 0:
            raise ValueError(f"Invalid range: offset={offset} {length=}")
        first = offset // BLOCK_BYTES
        last = -(-(offset + length) // BLOCK_BYTES)
        data = b"".join(self.block(i) for i in range(first, last))
        skip = offset - first * BLOCK_BYTES
        return data[skip : skip + length]

    def words32(self, start: int, count: int) -> NDArray[np.uint32]:
        """Return `count` little-endian 32-bit words from word `start`."""
        return np.frombuffer(
            self.read(4 * count, 4 * start), dtype="<u4"
        ).astype(np.uint32)


class FeistelNonceSource:
    """Nonces from a keyed Feistel permutation of a counter.

    The permutation is a bijection on ``8 * width`` bits, so no value
    repeats before the counter space is used up.

    Args:
        key: Key of the round function.
        width: Nonce width in bytes.
        start: First counter value.
    """

    def __init__(self, key: bytes, width: int, start: int = 0) -> None:
        self.key = bytes(key)
        self.width = width
        self.half_bits = 4 * width
        self.counter = start

    @property
    def space(self) -> int:
        """Number of distinct nonces."""
        return 1 << (8 * self.width)

    def _round(self, index: int, value: int) -> int:
        digest = hashlib.sha256(
            self.key
            + bytes([index])
            + value.to_bytes(self.width, "little")
        ).digest()
        return int.from_bytes(digest, "little") & ((1 << self.half_bits) - 1)

    def permute(self, counter: int) -> int:
        """Map a counter value to its nonce."""
        mask = (1 << self.half_bits) - 1
        left, right = counter >> self.half_bits, counter & mask
        for i in range(FEISTEL_ROUNDS):
            left, right = right, left ^ self._round(i, right)
        return (left << self.half_bits) | right

    def next_value(self) -> int:
        """Return the next nonce value."""
        if self.counter >= self.space:
            raise NonceExhaustedError(
                f"All {self.space} nonces of width {self.width} were issued"
            )
        value = self.permute(self.counter)
        self.counter += 1
        return value
