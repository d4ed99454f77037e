"""Static dictionary codec over aligned 16-bit instruction words."""

import functools
import logging

import numpy as np

from cciattest.codecs.base import Codec, CodecId
from cciattest.exceptions import CorruptBlockError

LOG = logging.getLogger(__name__)

ESCAPE = 0xFF
MAX_ENTRIES = 256
MAX_USABLE_ENTRIES = ESCAPE


def build_dictionary(data: bytes, max_entries: int = MAX_ENTRIES) -> bytes:
    """Build a dictionary of the most frequent 16-bit words in `data`.

    Words are read little-endian at even offsets. Only words occurring at
    least twice are worth an entry; ties are broken by word value so the
    table is deterministic. Index 0xFF is reserved as the literal escape,
    which caps the usable table at 255 entries.

    Args:
        data: The complete uncompressed image.
        max_entries: Upper bound of dictionary entries.

    Returns:
        Serialized dictionary: 2-byte LE entry count followed by the
        entries as 2-byte LE words.
    """
    if not 0 <= max_entries <= MAX_ENTRIES:
        raise ValueError(
            f"max_entries must be in [0, {MAX_ENTRIES}]: {max_entries}"
        )
    limit = min(max_entries, MAX_USABLE_ENTRIES)
    words = np.frombuffer(data[: len(data) // 2 * 2], dtype="<u2")
    counts = np.bincount(words, minlength=1 << 16)
    candidates = np.flatnonzero(counts >= 2)
    order = np.lexsort((candidates, -counts[candidates]))
    entries = candidates[order][:limit].astype("<u2")
    LOG.debug(f"dictionary: {len(entries)} entries from {len(words)} words")
    return len(entries).to_bytes(2, "little") + entries.tobytes()


@functools.lru_cache(maxsize=32)
def parse_dictionary(table: bytes) -> tuple[int, ...]:
    """Return the dictionary entries of a serialized table."""
    if len(table) < 2:
        raise CorruptBlockError("dictionary table too short")
    count = int.from_bytes(table[:2], "little")
    if count > MAX_USABLE_ENTRIES or len(table) != 2 + 2 * count:
        raise CorruptBlockError(
            f"dictionary table of {len(table)} bytes declares {count} entries"
        )
    return tuple(np.frombuffer(table[2:], dtype="<u2").tolist())


@functools.lru_cache(maxsize=32)
def _index(table: bytes) -> dict[int, int]:
    return {word: i for i, word in enumerate(parse_dictionary(table))}


class StaticDictionaryCodec(Codec):
    """One image-wide dictionary; hits become a single index byte.

    A word missing from the dictionary is written as the escape byte
    followed by the literal word. An odd trailing byte is written as the
    escape followed by that byte.
    """

    codec_id = CodecId.STATIC_DICTIONARY

    def prepare(self, data: bytes) -> bytes:
        """Build the image-wide dictionary."""
        return build_dictionary(data)

    def encode(self, raw: bytes, table: bytes | None = None) -> bytes:
        """Encode one block against `table`."""
        if table is None:
            raise ValueError("static-dictionary codec requires a table")
        index = _index(table)
        out = bytearray()
        even = len(raw) // 2 * 2
        for offset in range(0, even, 2):
            word = raw[offset] | raw[offset + 1] << 8
            hit = index.get(word)
            if hit is None:
                out += bytes([ESCAPE, raw[offset], raw[offset + 1]])
            else:
                out.append(hit)
        if even < len(raw):
            out += bytes([ESCAPE, raw[-1]])
        return bytes(out)

    def decode(
        self, payload: bytes, size: int, table: bytes | None = None
    ) -> bytes:
        """Decode one block of `size` bytes against `table`."""
        if table is None:
            raise ValueError("static-dictionary codec requires a table")
        entries = parse_dictionary(table)
        out = bytearray()
        pos = 0
        while len(out) < size:
            if pos >= len(payload):
                raise CorruptBlockError(
                    f"dictionary payload ended after {len(out)} of {size}"
                )
            code = payload[pos]
            pos += 1
            if code != ESCAPE:
                if code >= len(entries) or size - len(out) < 2:
                    raise CorruptBlockError(f"invalid dictionary index {code}")
                out += entries[code].to_bytes(2, "little")
                continue
            width = min(2, size - len(out))
            if pos + width > len(payload):
                raise CorruptBlockError("truncated dictionary literal")
            out += payload[pos : pos + width]
            pos += width
        if pos != len(payload):
            raise CorruptBlockError("trailing bytes after dictionary payload")
        return bytes(out)
