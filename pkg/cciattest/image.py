"""Code images and the packed program memory layout."""

import logging
from typing import Any
from urllib.parse import quote, unquote

from pydantic import ConfigDict, Field, field_validator

from cciattest.codecs import (
    BlockCompressedImage,
    CodecId,
    build_lat,
    compress_blocks,
    decompress_image,
)
from cciattest.config import (
    DEFAULT_CAPACITY,
    BaseModel,
    ProtocolOption,
    parse_key_value,
)
from cciattest.drbg import HashDrbg
from cciattest.exceptions import (
    CapacityExceededError,
    ImageFormatError,
    OptionMismatchError,
)

LOG = logging.getLogger(__name__)

PRW_SEED_BYTES = 8


class CodeImage(BaseModel):
    """The uncompressed program as uploaded by the verifier."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    data: bytes
    name: str = "image"

    def model_post_init(self, __context: Any) -> None:
        """Post-initialization validation."""
        if not self.data:
            raise ImageFormatError(f"Code image {self.name} is empty")

    def __len__(self) -> int:
        return len(self.data)


class Region(BaseModel):
    """A contiguous byte range of program memory."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    offset: int = Field(..., ge=0)
    length: int = Field(..., ge=0)

    @property
    def end(self) -> int:
        """First offset after the region."""
        return self.offset + self.length

    def extract(self, memory: bytes) -> bytes:
        """Return the bytes of `memory` inside the region."""
        return memory[self.offset : self.end]


class MemoryLayout(BaseModel):
    """Region boundaries of program memory.

    Regions follow each other in the order compressed image, LAT,
    dictionary, pseudorandom fill and exactly cover the capacity.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    capacity: int = DEFAULT_CAPACITY
    compressed: Region
    lat: Region | None = None
    dictionary: Region | None = None
    prw: Region

    def model_post_init(self, __context: Any) -> None:
        """Post-initialization validation."""
        offset = 0
        for name, region in self.regions().items():
            if region.offset != offset:
                raise ValueError(
                    f"Region {name} starts at {region.offset}, "
                    f"expected {offset}"
                )
            offset = region.end
        if offset != self.capacity:
            raise ValueError(
                f"Regions end at {offset}, capacity is {self.capacity}"
            )

    def regions(self) -> dict[str, Region]:
        """Present regions in memory order."""
        ordered = {
            "compressed": self.compressed,
            "lat": self.lat,
            "dictionary": self.dictionary,
            "prw": self.prw,
        }
        return {k: v for k, v in ordered.items() if v is not None}

    @staticmethod
    def tile(
        capacity: int,
        compressed_length: int,
        lat_length: int | None = None,
        dict_length: int | None = None,
    ) -> "MemoryLayout":
        """Lay out the regions back to back and fill the rest with PRW.

        Raises:
            CapacityExceededError: The regions do not fit in `capacity`.
        """
        used = compressed_length + (lat_length or 0) + (dict_length or 0)
        if used > capacity:
            raise CapacityExceededError(
                f"{used} bytes of code and tables exceed the capacity of "
                f"{capacity} bytes"
            )
        compressed = Region(offset=0, length=compressed_length)
        offset = compressed.end
        lat = dictionary = None
        if lat_length is not None:
            lat = Region(offset=offset, length=lat_length)
            offset = lat.end
        if dict_length is not None:
            dictionary = Region(offset=offset, length=dict_length)
            offset = dictionary.end
        return MemoryLayout(
            capacity=capacity,
            compressed=compressed,
            lat=lat,
            dictionary=dictionary,
            prw=Region(offset=offset, length=capacity - offset),
        )


class PrwSpec(BaseModel):
    """Seed and length of the pseudorandom fill."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    seed: bytes = bytes(PRW_SEED_BYTES)
    length: int = Field(0, ge=0)

    @field_validator("seed", mode="before")
    @classmethod
    def parse_seed(cls, value: Any) -> Any:
        """Accept hex strings and integers."""
        if isinstance(value, int):
            return value.to_bytes(PRW_SEED_BYTES, "little")
        if isinstance(value, str):
            return bytes.fromhex(value)
        return value

    def model_post_init(self, __context: Any) -> None:
        """Post-initialization validation."""
        if len(self.seed) != PRW_SEED_BYTES:
            raise ValueError(
                f"PRW seed must be {PRW_SEED_BYTES} bytes: {len(self.seed)}"
            )


class Manifest(BaseModel):
    """Pack parameters recorded next to the memory file."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    codec: CodecId
    block_size: int
    ci_length: int
    prw_seed: bytes
    option: ProtocolOption
    layout: MemoryLayout
    block_offsets: tuple[int, ...]
    name: str = "image"

    @field_validator("prw_seed", mode="before")
    @classmethod
    def parse_seed(cls, value: Any) -> Any:
        """Accept hex strings."""
        return bytes.fromhex(value) if isinstance(value, str) else value

    @field_validator("block_offsets", mode="before")
    @classmethod
    def parse_offsets(cls, value: Any) -> Any:
        """Accept the single value form of the key=value format."""
        return [value] if isinstance(value, (str, int)) else value

    def to_text(self) -> str:
        """Serialize to the key=value sidecar format.

        The image name is percent-encoded so separators survive.
        """
        lines = [
            f"name={quote(self.name, safe='')}",
            f"codec={self.codec.value}",
            f"block_size={self.block_size}",
            f"ci_length={self.ci_length}",
            f"prw_seed={self.prw_seed.hex()}",
            f"option={self.option.value}",
            f"layout.capacity={self.layout.capacity}",
        ]
        for name, region in self.layout.regions().items():
            lines.append(f"layout.{name}.offset={region.offset}")
            lines.append(f"layout.{name}.length={region.length}")
        lines.append(
            "block_offsets=" + ",".join(str(o) for o in self.block_offsets)
        )
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_text(text: str) -> "Manifest":
        """Parse the key=value sidecar format."""
        fields = parse_key_value(text)
        if isinstance(fields.get("name"), str):
            fields["name"] = unquote(fields["name"])
        return Manifest(**fields)


class PackedImage(BaseModel):
    """Program memory content with its manifest."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    memory: bytes
    manifest: Manifest

    def model_post_init(self, __context: Any) -> None:
        """Post-initialization validation."""
        layout = self.manifest.layout
        if len(self.memory) != layout.capacity:
            raise ValueError(
                f"Memory of {len(self.memory)} bytes for capacity "
                f"{layout.capacity}"
            )
        check_option(self.manifest.option, self.manifest.codec, layout)

    @property
    def layout(self) -> MemoryLayout:
        """Region boundaries."""
        return self.manifest.layout

    @property
    def option(self) -> ProtocolOption:
        """Protocol option the memory was packed for."""
        return self.manifest.option

    def region(self, name: str) -> bytes:
        """Return the bytes of region `name`, empty if absent."""
        region = self.layout.regions().get(name)
        return b"" if region is None else region.extract(self.memory)


def check_option(
    option: ProtocolOption, codec: CodecId, layout: MemoryLayout | None = None
) -> None:
    """Raise if `codec` or `layout` does not suit protocol `option`."""
    uses_dictionary = codec == CodecId.STATIC_DICTIONARY
    if (option == ProtocolOption.DICTIONARY) != uses_dictionary:
        raise OptionMismatchError(
            f"Option {option.value} does not support codec {codec.value}"
        )
    if layout is None:
        return
    expected = {
        ProtocolOption.BASIC: (False, False),
        ProtocolOption.DICTIONARY: (False, True),
        ProtocolOption.LAT: (True, False),
    }[option]
    if (layout.lat is not None, layout.dictionary is not None) != expected:
        raise OptionMismatchError(
            f"Layout regions {list(layout.regions())} do not match option "
            f"{option.value}"
        )


def generate_prw(spec: PrwSpec) -> bytes:
    """Expand a PRW spec into pseudorandom bytes."""
    return HashDrbg(spec.seed).read(spec.length)


def pack(
    ci: CodeImage,
    codec: CodecId | str,
    s_h: int,
    capacity: int = DEFAULT_CAPACITY,
    prw_seed: bytes = bytes(PRW_SEED_BYTES),
    option: ProtocolOption | str = ProtocolOption.LAT,
) -> PackedImage:
    """Compress `ci` and lay it out in program memory.

    Args:
        ci: Code image to upload.
        codec: Honest block codec.
        s_h: Honest block size.
        capacity: Program memory size in bytes.
        prw_seed: Seed of the pseudorandom fill.
        option: Protocol option deciding which tables are stored.

    Returns:
        The packed image.

    Raises:
        CapacityExceededError: Code and tables do not fit in `capacity`.
        UnknownCodecError: `codec` is not registered.
        UnsupportedBlockSizeError: `s_h` is not a supported block size.
    """
    if capacity <= 0 or capacity % 2:
        raise ValueError(f"Capacity must be even and positive: {capacity}")
    option = ProtocolOption(option)
    img = compress_blocks(ci.data, codec, s_h)
    check_option(option, img.codec)
    if len(ci) > capacity:
        raise CapacityExceededError(
            f"Code image of {len(ci)} bytes exceeds capacity {capacity}"
        )

    lat = build_lat(img)
    lat_bytes = lat.to_bytes() if option == ProtocolOption.LAT else None
    dict_bytes = (
        img.dictionary if option == ProtocolOption.DICTIONARY else None
    )
    layout = MemoryLayout.tile(
        capacity,
        len(img.stream),
        None if lat_bytes is None else len(lat_bytes),
        None if dict_bytes is None else len(dict_bytes),
    )
    prw = generate_prw(PrwSpec(seed=prw_seed, length=layout.prw.length))
    memory = img.stream + (lat_bytes or b"") + (dict_bytes or b"") + prw
    manifest = Manifest(
        name=ci.name,
        codec=img.codec,
        block_size=s_h,
        ci_length=len(ci),
        prw_seed=prw_seed,
        option=option,
        layout=layout,
        block_offsets=lat.entries,
    )
    LOG.info(
        f"Packed {ci.name}: {len(ci)} -> {len(img.stream)} bytes "
        f"({img.codec.value}, s_h={s_h}), prw {layout.prw.length} bytes"
    )
    return PackedImage(memory=memory, manifest=manifest)


def unpack(packed: PackedImage) -> BlockCompressedImage:
    """Recover the block compressed image stored in `packed`."""
    manifest = packed.manifest
    stream = packed.region("compressed")
    bounds = (*manifest.block_offsets, len(stream))
    blocks = tuple(stream[a:b] for a, b in zip(bounds, bounds[1:]))
    dictionary = packed.region("dictionary") or None
    return BlockCompressedImage(
        blocks=blocks,
        block_size=manifest.block_size,
        original_length=manifest.ci_length,
        codec=manifest.codec,
        dictionary=dictionary,
    )


def unpack_code_image(packed: PackedImage) -> CodeImage:
    """Recover the original code image stored in `packed`."""
    return CodeImage(
        data=decompress_image(unpack(packed)), name=packed.manifest.name
    )
