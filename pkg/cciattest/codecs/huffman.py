"""Canonical Huffman block codec.

Each block carries its own code-length table, so a block is decodable
without any other block. The table is written either densely (256
nibble-packed lengths) or, for blocks with few distinct byte values, as a
sparse list of ``(symbol, length)`` pairs; a leading tag byte tells them
apart.
"""

import collections
import heapq
import itertools

from cciattest.codecs.base import Codec, CodecId
from cciattest.exceptions import CorruptBlockError

MAX_CODE_LENGTH = 15
DENSE_TAG = 0
DENSE_TABLE_BYTES = 128
MAX_SPARSE_SYMBOLS = 63


def code_lengths(counts: dict[int, int]) -> dict[int, int]:
    """Return Huffman code lengths for a mapping of symbols to counts.

    A single-symbol alphabet gets a one-bit code so that every symbol
    still occupies at least one bit in the payload.
    """
    if len(counts) == 1:
        return {next(iter(counts)): 1}
    tie = itertools.count()
    heap = [
        (count, next(tie), {symbol: 0})
        for symbol, count in sorted(counts.items())
    ]
    heapq.heapify(heap)
    while len(heap) > 1:
        weight_a, _, depths_a = heapq.heappop(heap)
        weight_b, _, depths_b = heapq.heappop(heap)
        merged = {
            symbol: depth + 1
            for symbol, depth in itertools.chain(
                depths_a.items(), depths_b.items()
            )
        }
        heapq.heappush(heap, (weight_a + weight_b, next(tie), merged))
    return heap[0][2]


def limited_code_lengths(counts: dict[int, int]) -> dict[int, int]:
    """Return code lengths no longer than `MAX_CODE_LENGTH` bits.

    Counts are halved (never below one) until the tree is shallow enough.
    """
    lengths = code_lengths(counts)
    while max(lengths.values()) > MAX_CODE_LENGTH:
        counts = {symbol: max(1, c // 2) for symbol, c in counts.items()}
        lengths = code_lengths(counts)
    return lengths


def canonical_codes(lengths: dict[int, int]) -> dict[int, tuple[int, int]]:
    """Assign canonical codes in (length, symbol) order.

    Args:
        lengths: Mapping of symbol to code length in bits.

    Returns:
        Mapping of symbol to ``(length, code)``.
    """
    codes: dict[int, tuple[int, int]] = {}
    code = 0
    previous = 0
    for symbol, length in sorted(
        lengths.items(), key=lambda item: (item[1], item[0])
    ):
        code <<= length - previous
        codes[symbol] = (length, code)
        code += 1
        previous = length
    return codes


def _write_table(lengths: dict[int, int]) -> bytes:
    if len(lengths) <= MAX_SPARSE_SYMBOLS:
        pairs = itertools.chain.from_iterable(sorted(lengths.items()))
        return bytes([len(lengths), *pairs])
    table = [lengths.get(symbol, 0) for symbol in range(256)]
    packed = bytes(
        (table[i] << 4) | table[i + 1] for i in range(0, 256, 2)
    )
    return bytes([DENSE_TAG]) + packed


def _read_table(payload: bytes) -> tuple[dict[int, int], int]:
    """Parse the code-length table, returning lengths and payload offset."""
    if not payload:
        raise CorruptBlockError("empty huffman payload")
    tag = payload[0]
    lengths: dict[int, int] = {}
    if tag == DENSE_TAG:
        offset = 1 + DENSE_TABLE_BYTES
        if len(payload) < offset:
            raise CorruptBlockError("truncated huffman length table")
        for i, byte in enumerate(payload[1:offset]):
            for symbol, length in (
                (2 * i, byte >> 4),
                (2 * i + 1, byte & 15),
            ):
                if length:
                    lengths[symbol] = length
    elif tag <= MAX_SPARSE_SYMBOLS:
        offset = 1 + 2 * tag
        if len(payload) < offset:
            raise CorruptBlockError("truncated huffman symbol list")
        for i in range(tag):
            symbol, length = payload[1 + 2 * i], payload[2 + 2 * i]
            if not 1 <= length <= MAX_CODE_LENGTH or symbol in lengths:
                raise CorruptBlockError(
                    f"invalid huffman entry for symbol {symbol}"
                )
            lengths[symbol] = length
    else:
        raise CorruptBlockError(f"unknown huffman table tag {tag}")

    if not lengths:
        raise CorruptBlockError("huffman table has no symbols")
    kraft = sum(1 << (MAX_CODE_LENGTH - n) for n in lengths.values())
    if kraft > 1 << MAX_CODE_LENGTH:
        raise CorruptBlockError("code lengths violate the Kraft inequality")
    return lengths, offset


class CanonicalHuffmanCodec(Codec):
    """Byte-oriented canonical Huffman coding, one table per block."""

    codec_id = CodecId.CANONICAL_HUFFMAN

    def encode(self, raw: bytes, table: bytes | None = None) -> bytes:
        """Encode one block."""
        if not raw:
            return b""
        lengths = limited_code_lengths(dict(collections.Counter(raw)))
        words = {
            symbol: format(code, f"0{length}b")
            for symbol, (length, code) in canonical_codes(lengths).items()
        }
        bits = "".join(words[byte] for byte in raw)
        bits += "0" * (-len(bits) % 8)
        body = int(bits, 2).to_bytes(len(bits) // 8, "big")
        return _write_table(lengths) + body

    def decode(
        self, payload: bytes, size: int, table: bytes | None = None
    ) -> bytes:
        """Decode one block of `size` bytes."""
        if size == 0:
            if payload:
                raise CorruptBlockError("payload for an empty block")
            return b""
        lengths, offset = _read_table(payload)
        symbols = {
            code: symbol
            for symbol, code in canonical_codes(lengths).items()
        }
        body = payload[offset:]
        bits = (
            format(int.from_bytes(body, "big"), f"0{len(body) * 8}b")
            if body
            else ""
        )

        out = bytearray()
        code = length = consumed = 0
        for bit in bits:
            consumed += 1
            code = (code << 1) | (bit == "1")
            length += 1
            symbol = symbols.get((length, code))
            if symbol is not None:
                out.append(symbol)
                code = length = 0
                if len(out) == size:
                    break
            elif length > MAX_CODE_LENGTH:
                raise CorruptBlockError("invalid huffman code in payload")

        if len(out) != size:
            raise CorruptBlockError(
                f"huffman payload decoded to {len(out)} of {size} bytes"
            )
        if len(bits) - consumed >= 8:
            raise CorruptBlockError("trailing bytes after huffman payload")
        return bytes(out)
