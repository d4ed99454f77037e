"""Codec interface."""

import abc
import enum


class CodecId(str, enum.Enum):
    """Registered block codecs."""

    CANONICAL_HUFFMAN = "canonical-huffman"
    STATIC_DICTIONARY = "static-dictionary"
    LZ_GENERAL = "lz-general"


class Codec(metaclass=abc.ABCMeta):
    """Abstract lossless block codec.

    A codec compresses one block at a time without any context shared
    between blocks. Codecs that need an image-wide side table (the static
    dictionary) build it in `prepare` and receive it back on every call.
    """

    codec_id: CodecId

    def prepare(self, data: bytes) -> bytes | None:
        """Build the serialized side table for a whole image.

        Args:
            data: The complete uncompressed image.

        Returns:
            The side table, or None when the codec does not use one.
        """
        return None

    @abc.abstractmethod
    def encode(self, raw: bytes, table: bytes | None = None) -> bytes:
        """Encode one block, returning the coded payload (no framing)."""

    @abc.abstractmethod
    def decode(
        self, payload: bytes, size: int, table: bytes | None = None
    ) -> bytes:
        """Decode one coded payload back into `size` bytes.

        Raises:
            CorruptBlockError: The payload is not a valid encoding of
                `size` bytes.
        """
