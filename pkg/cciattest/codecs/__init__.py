"""Block codecs."""

from cciattest.codecs.base import Codec, CodecId
from cciattest.codecs.blocks import (
    SUPPORTED_BLOCK_SIZES,
    BlockCompressedImage,
    Lat,
    build_lat,
    compress_blocks,
    decompress_block,
    decompress_image,
)
from cciattest.codecs.dictionary import build_dictionary
from cciattest.codecs.registry import get_codec

__all__ = [
    "SUPPORTED_BLOCK_SIZES",
    "BlockCompressedImage",
    "Codec",
    "CodecId",
    "Lat",
    "build_dictionary",
    "build_lat",
    "compress_blocks",
    "decompress_block",
    "decompress_image",
    "get_codec",
]
