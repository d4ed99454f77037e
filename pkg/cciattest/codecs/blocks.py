"""Block-wise compression with a line address table (LAT).

Every block is compressed on its own and framed with one flag byte, so
that decompression can start at any LAT entry point.
"""

import functools
import logging
import math
from typing import Any

from pydantic import BaseModel, ConfigDict

from cciattest.codecs.base import CodecId
from cciattest.codecs.registry import get_codec, to_codec_id
from cciattest.exceptions import (
    CorruptBlockError,
    LatOverflowError,
    UnsupportedBlockSizeError,
)

LOG = logging.getLogger(__name__)

SUPPORTED_BLOCK_SIZES = (64, 128, 256, 512, 1024, 2048)
STORED = 0
CODED = 1
LAT_ENTRY_WIDTH = 3
LAT_MAX_OFFSET = (1 << 24) - 1


def check_block_size(s: int) -> None:
    """Raise if `s` is not a supported block size."""
    if s not in SUPPORTED_BLOCK_SIZES:
        raise UnsupportedBlockSizeError(
            f"Block size {s} not in {SUPPORTED_BLOCK_SIZES}"
        )


class BlockCompressedImage(BaseModel):
    """A code image compressed block by block.

    Attributes:
        blocks: Framed blocks (flag byte followed by payload).
        block_size: Uncompressed block size in bytes.
        original_length: Length of the uncompressed image.
        codec: Codec of the coded blocks.
        dictionary: Serialized static dictionary, if the codec uses one.
    """

    model_config = ConfigDict(frozen=True)

    blocks: tuple[bytes, ...]
    block_size: int
    original_length: int
    codec: CodecId
    dictionary: bytes | None = None

    def model_post_init(self, __context: Any) -> None:
        """Post-initialization validation."""
        expected = math.ceil(self.original_length / self.block_size)
        if len(self.blocks) != expected:
            raise ValueError(
                f"{len(self.blocks)} blocks for {self.original_length} bytes"
                f" at block size {self.block_size}, expected {expected}"
            )

    @functools.cached_property
    def stream(self) -> bytes:
        """Serialized block stream as stored in the compressed region."""
        return b"".join(self.blocks)

    @property
    def block_count(self) -> int:
        """Number of blocks."""
        return len(self.blocks)

    @property
    def compressed_length(self) -> int:
        """Bytes occupied by the block stream plus the dictionary."""
        return len(self.stream) + len(self.dictionary or b"")

    @property
    def ratio(self) -> float:
        """Compressed over uncompressed length."""
        return self.compressed_length / self.original_length

    def block_length(self, index: int) -> int:
        """Uncompressed length of block `index`."""
        start = index * self.block_size
        return min(self.block_size, self.original_length - start)


class Lat(BaseModel):
    """Line address table: entry point of every block in the stream."""

    model_config = ConfigDict(frozen=True)

    entries: tuple[int, ...]

    def model_post_init(self, __context: Any) -> None:
        """Post-initialization validation."""
        if self.entries and self.entries[0] != 0:
            raise ValueError(f"First LAT entry must be 0: {self.entries[0]}")
        for a, b in zip(self.entries, self.entries[1:]):
            if b <= a:
                raise ValueError(f"LAT entries not increasing: {a}, {b}")
        if self.entries and self.entries[-1] > LAT_MAX_OFFSET:
            raise LatOverflowError(
                f"LAT offset {self.entries[-1]} exceeds 24 bits"
            )

    def __len__(self) -> int:
        return len(self.entries)

    def to_bytes(self) -> bytes:
        """Serialize as little-endian 24-bit entries."""
        return b"".join(
            entry.to_bytes(LAT_ENTRY_WIDTH, "little") for entry in self.entries
        )

    @staticmethod
    def from_bytes(data: bytes) -> "Lat":
        """Parse a serialized LAT."""
        if len(data) % LAT_ENTRY_WIDTH:
            raise CorruptBlockError(
                f"LAT length {len(data)} is not a multiple of "
                f"{LAT_ENTRY_WIDTH}"
            )
        return Lat(
            entries=tuple(
                int.from_bytes(data[i : i + LAT_ENTRY_WIDTH], "little")
                for i in range(0, len(data), LAT_ENTRY_WIDTH)
            )
        )


def compress_blocks(
    data: bytes, codec: CodecId | str, s: int
) -> BlockCompressedImage:
    """Compress `data` in independent blocks of `s` bytes.

    Blocks whose coded payload is not shorter than the raw block are
    stored verbatim.

    Args:
        data: Uncompressed image, non-empty.
        codec: Codec used for the coded blocks.
        s: Block size, one of `SUPPORTED_BLOCK_SIZES`.

    Returns:
        The block compressed image.
    """
    check_block_size(s)
    if not data:
        raise ValueError("Cannot compress an empty image")
    codec_id = to_codec_id(codec)
    impl = get_codec(codec_id)
    table = impl.prepare(data)

    blocks = []
    stored = 0
    for start in range(0, len(data), s):
        raw = data[start : start + s]
        coded = impl.encode(raw, table)
        if len(coded) < len(raw):
            blocks.append(bytes([CODED]) + coded)
        else:
            blocks.append(bytes([STORED]) + raw)
            stored += 1
    img = BlockCompressedImage(
        blocks=tuple(blocks),
        block_size=s,
        original_length=len(data),
        codec=codec_id,
        dictionary=table,
    )
    LOG.debug(
        f"{codec_id.value} s={s}: {len(data)} -> {img.compressed_length} "
        f"bytes, {stored}/{len(blocks)} stored"
    )
    return img


def build_lat(img: BlockCompressedImage) -> Lat:
    """Return the entry point of every block of `img`."""
    entries = []
    offset = 0
    for block in img.blocks:
        entries.append(offset)
        offset += len(block)
    if entries and entries[-1] > LAT_MAX_OFFSET:
        raise LatOverflowError(f"LAT offset {entries[-1]} exceeds 24 bits")
    return Lat(entries=tuple(entries))


def decompress_block(
    img: BlockCompressedImage, lat: Lat, block_index: int
) -> bytes:
    """Decompress a single block using its LAT entry point.

    Only the bytes between the block's entry point and the next one are
    read.

    Raises:
        IndexError: `block_index` is not a block of `img`.
        CorruptBlockError: The block framing or payload is invalid.
    """
    if not 0 <= block_index < len(lat):
        raise IndexError(
            f"Block index {block_index} out of range [0, {len(lat)})"
        )
    start = lat.entries[block_index]
    end = (
        lat.entries[block_index + 1]
        if block_index + 1 < len(lat)
        else len(img.stream)
    )
    chunk = img.stream[start:end]
    size = img.block_length(block_index)
    if not chunk:
        raise CorruptBlockError(f"Block {block_index} is empty")
    flag, payload = chunk[0], chunk[1:]
    if flag == STORED:
        if len(payload) != size:
            raise CorruptBlockError(
                f"Stored block {block_index} holds {len(payload)} of "
                f"{size} bytes"
            )
        return payload
    if flag == CODED:
        return get_codec(img.codec).decode(payload, size, img.dictionary)
    raise CorruptBlockError(f"Block {block_index} has flag {flag}")


def decompress_image(img: BlockCompressedImage) -> bytes:
    """Decompress every block of `img` in order."""
    lat = build_lat(img)
    return b"".join(
        decompress_block(img, lat, i) for i in range(img.block_count)
    )
