"""Codec lookup."""

from cciattest.codecs.base import Codec, CodecId
from cciattest.codecs.dictionary import StaticDictionaryCodec
from cciattest.codecs.huffman import CanonicalHuffmanCodec
from cciattest.codecs.lz import LzGeneralCodec
from cciattest.exceptions import UnknownCodecError

CODECS: dict[CodecId, Codec] = {
    CodecId.CANONICAL_HUFFMAN: CanonicalHuffmanCodec(),
    CodecId.STATIC_DICTIONARY: StaticDictionaryCodec(),
    CodecId.LZ_GENERAL: LzGeneralCodec(),
}


def to_codec_id(codec: CodecId | str) -> CodecId:
    """Return the `CodecId` named by `codec`."""
    try:
        return CodecId(codec)
    except ValueError as e:
        raise UnknownCodecError(f"Unknown codec: {codec}") from e


def get_codec(codec: CodecId | str) -> Codec:
    """Return the registered codec instance for `codec`."""
    return CODECS[to_codec_id(codec)]
