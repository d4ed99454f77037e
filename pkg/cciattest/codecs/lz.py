"""General purpose LZ77 codec (raw DEFLATE) with a block-bounded window."""

import zlib

from cciattest.codecs.base import Codec, CodecId
from cciattest.exceptions import CorruptBlockError

MIN_WINDOW_BITS = 9
MAX_WINDOW_BITS = 15


def window_bits(size: int) -> int:
    """Return the smallest DEFLATE window covering a block of `size`."""
    bits = (size - 1).bit_length()
    return max(MIN_WINDOW_BITS, min(MAX_WINDOW_BITS, bits))


class LzGeneralCodec(Codec):
    """DEFLATE without zlib/gzip framing, one stream per block."""

    codec_id = CodecId.LZ_GENERAL

    def encode(self, raw: bytes, table: bytes | None = None) -> bytes:
        """Encode one block at maximum compression."""
        compressor = zlib.compressobj(
            level=9,
            method=zlib.DEFLATED,
            wbits=-window_bits(len(raw)),
            memLevel=9,
        )
        return compressor.compress(raw) + compressor.flush()

    def decode(
        self, payload: bytes, size: int, table: bytes | None = None
    ) -> bytes:
        """Decode one block of `size` bytes."""
        decompressor = zlib.decompressobj(wbits=-MAX_WINDOW_BITS)
        try:
            out = decompressor.decompress(payload)
        except zlib.error as e:
            raise CorruptBlockError(f"invalid deflate stream: {e}") from e
        if not decompressor.eof or decompressor.unused_data:
            raise CorruptBlockError("deflate stream is truncated or padded")
        if len(out) != size:
            raise CorruptBlockError(
                f"deflate payload decoded to {len(out)} of {size} bytes"
            )
        return out
