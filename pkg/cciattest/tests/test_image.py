import numpy as np
import pytest

from cciattest.codecs import CodecId, build_lat, compress_blocks
from cciattest.config import ProtocolOption
from cciattest.exceptions import (
    CapacityExceededError,
    ImageFormatError,
    OptionMismatchError,
)
from cciattest.image import (
    CodeImage,
    Manifest,
    MemoryLayout,
    PackedImage,
    PrwSpec,
    Region,
    generate_prw,
    pack,
    unpack,
    unpack_code_image,
)
from cciattest.samples import SAMPLE_SIZES, sample_image, synthetic_image


class TestPack:
    """Test packing code images into program memory."""

    def test_lat_layout(self, sense_image: CodeImage) -> None:
        """Test option 2b stores stream, LAT and fill back to back."""
        packed = pack(sense_image, "canonical-huffman", 512, capacity=8192)
        img = compress_blocks(sense_image.data, "canonical-huffman", 512)
        layout = packed.layout
        assert len(packed.memory) == 8192
        assert layout.compressed == Region(offset=0, length=len(img.stream))
        assert layout.lat is not None
        assert layout.dictionary is None
        assert packed.region("lat") == build_lat(img).to_bytes()
        assert packed.region("prw") == generate_prw(
            PrwSpec(seed=bytes(8), length=layout.prw.length)
        )
        assert layout.prw.end == 8192

    def test_basic_layout(self, sense_image: CodeImage) -> None:
        """Test option 1 keeps neither LAT nor dictionary."""
        packed = pack(sense_image, "lz-general", 256, 8192, option="1")
        assert list(packed.layout.regions()) == ["compressed", "prw"]
        assert packed.region("lat") == b""

    def test_dictionary_layout(self, sense_image: CodeImage) -> None:
        """Test option 2a stores the static dictionary."""
        packed = pack(
            sense_image, "static-dictionary", 512, 8192, option="2a"
        )
        assert list(packed.layout.regions()) == [
            "compressed",
            "dictionary",
            "prw",
        ]
        assert unpack(packed).dictionary == packed.region("dictionary")

    @pytest.mark.parametrize(
        ("codec", "option"),
        [
            ("lz-general", "2a"),
            ("static-dictionary", "2b"),
            ("static-dictionary", "1"),
        ],
    )
    def test_option_mismatch(
        self, sense_image: CodeImage, codec: str, option: str
    ) -> None:
        """Test the dictionary codec belongs to option 2a only."""
        with pytest.raises(OptionMismatchError):
            pack(sense_image, codec, 512, 8192, option=option)

    def test_image_exceeds_capacity(self, sense_image: CodeImage) -> None:
        """Test an image larger than program memory."""
        with pytest.raises(CapacityExceededError, match="exceeds capacity"):
            pack(sense_image, "lz-general", 512, capacity=2048)

    def test_stream_exceeds_capacity(self) -> None:
        """Test stored block framing that no longer fits."""
        ci = CodeImage(data=np.random.default_rng(0).bytes(4000))
        with pytest.raises(CapacityExceededError, match="exceed the capacity"):
            pack(ci, "lz-general", 512, capacity=4000)

    @pytest.mark.parametrize("capacity", [0, -2, 8191])
    def test_invalid_capacity(
        self, sense_image: CodeImage, capacity: int
    ) -> None:
        """Test capacities that are not positive and even."""
        with pytest.raises(ValueError, match="even and positive"):
            pack(sense_image, "lz-general", 512, capacity=capacity)

    @pytest.mark.parametrize(
        ("codec", "option"),
        [
            ("canonical-huffman", "2b"),
            ("lz-general", "1"),
            ("static-dictionary", "2a"),
        ],
    )
    def test_unpack_round_trip(
        self, sense_image: CodeImage, codec: str, option: str
    ) -> None:
        """Test the code image is recovered from every option."""
        packed = pack(sense_image, codec, 128, 8192, option=option)
        assert unpack_code_image(packed).data == sense_image.data


class TestManifest:
    """Test the manifest sidecar."""

    def test_text_round_trip(self, small_packed: PackedImage) -> None:
        """Test the key=value form parses back to the same manifest."""
        manifest = small_packed.manifest
        text = manifest.to_text()
        assert "layout.lat.length=18" in text
        assert "prw_seed=0102030405060708" in text
        assert Manifest.from_text(text) == manifest

    def test_single_block(self) -> None:
        """Test a one-block image keeps a one-entry offset list."""
        packed = pack(CodeImage(data=b"tiny", name="t"), "lz-general", 64, 64)
        assert Manifest.from_text(packed.manifest.to_text()).block_offsets == (
            0,
        )

    @pytest.mark.parametrize("name", ["fw,v2", "fw#2", "a=b c", "100%"])
    def test_name_round_trip(self, name: str) -> None:
        """Test names holding format separators survive the sidecar."""
        ci = CodeImage(data=b"tiny", name=name)
        manifest = pack(ci, "lz-general", 64, 64).manifest
        assert manifest.name == name
        assert Manifest.from_text(manifest.to_text()) == manifest

    def test_memory_length_checked(self, small_packed: PackedImage) -> None:
        """Test memory must match the layout capacity."""
        with pytest.raises(ValueError, match="for capacity 8192"):
            PackedImage(
                memory=small_packed.memory[:-2],
                manifest=small_packed.manifest,
            )


class TestLayout:
    """Test region tiling."""

    def test_gap(self) -> None:
        """Test regions must follow each other."""
        with pytest.raises(ValueError, match="Region prw starts at 12"):
            MemoryLayout(
                capacity=20,
                compressed=Region(offset=0, length=10),
                prw=Region(offset=12, length=8),
            )

    def test_short(self) -> None:
        """Test regions must cover the capacity."""
        with pytest.raises(ValueError, match="capacity is 20"):
            MemoryLayout(
                capacity=20,
                compressed=Region(offset=0, length=10),
                prw=Region(offset=10, length=8),
            )

    def test_tile(self) -> None:
        """Test tiling with both tables."""
        layout = MemoryLayout.tile(100, 40, 9, 6)
        assert layout.lat == Region(offset=40, length=9)
        assert layout.dictionary == Region(offset=49, length=6)
        assert layout.prw == Region(offset=55, length=45)
        with pytest.raises(CapacityExceededError):
            MemoryLayout.tile(50, 40, 9, 6)


class TestPrw:
    """Test the pseudorandom fill."""

    @pytest.mark.parametrize(
        "seed", [0x0807060504030201, "0102030405060708"]
    )
    def test_seed_forms(self, seed: int | str) -> None:
        """Test integer and hex seeds."""
        assert PrwSpec(seed=seed).seed == bytes(range(1, 9))

    def test_seed_length(self) -> None:
        """Test seeds must be eight bytes."""
        with pytest.raises(ValueError, match="must be 8 bytes"):
            PrwSpec(seed=b"short")

    def test_deterministic(self) -> None:
        """Test the fill depends on the seed only."""
        spec = PrwSpec(seed=b"abcdefgh", length=100)
        assert generate_prw(spec) == generate_prw(spec)
        assert generate_prw(spec)[:50] == generate_prw(
            PrwSpec(seed=b"abcdefgh", length=50)
        )
        assert generate_prw(spec) != generate_prw(
            PrwSpec(seed=b"hgfedcba", length=100)
        )


class TestSamples:
    """Test the synthetic sample images."""

    @pytest.mark.parametrize(("name", "size"), list(SAMPLE_SIZES.items()))
    def test_sizes(self, name: str, size: int) -> None:
        """Test the samples have their nominal sizes."""
        ci = sample_image(name)
        assert len(ci) == size
        assert ci.name == name
        assert sample_image(name) == ci

    def test_compressible(self, oscilloscope_image: CodeImage) -> None:
        """Test the samples compress, LZ better at large blocks."""
        huffman = compress_blocks(
            oscilloscope_image.data, CodecId.CANONICAL_HUFFMAN, 512
        )
        lz = compress_blocks(oscilloscope_image.data, CodecId.LZ_GENERAL, 2048)
        assert 0.5 < huffman.ratio < 1.0
        assert lz.ratio < huffman.ratio

    @pytest.mark.parametrize("length", [1, 63, 70, 1000])
    def test_small_lengths(self, length: int) -> None:
        """Test very short images keep the requested length."""
        assert len(synthetic_image(length)) == length

    def test_invalid(self) -> None:
        """Test empty images cannot be generated."""
        with pytest.raises(ValueError, match="length must be positive"):
            synthetic_image(0)

    def test_empty_code_image(self) -> None:
        """Test a code image must hold data."""
        with pytest.raises(ImageFormatError):
            CodeImage(data=b"")

    def test_unknown_sample(self) -> None:
        """Test unknown sample names."""
        with pytest.raises(ValueError, match="Unknown sample"):
            sample_image("blink")

    def test_option_default(self, small_packed: PackedImage) -> None:
        """Test packing defaults to the LAT option."""
        assert small_packed.option == ProtocolOption.LAT
