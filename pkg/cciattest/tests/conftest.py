import pytest

from cciattest.codecs import CodecId
from cciattest.config import PROFILES, DeviceProfile
from cciattest.image import CodeImage, PackedImage, pack
from cciattest.protocol import Verifier, VerifierPolicy, auto_calibrate
from cciattest.samples import sample_image

SMALL_CAPACITY = 8192


@pytest.fixture(scope="session")
def sense_image() -> CodeImage:
    """Smallest bundled sample image."""
    return sample_image("sense")


@pytest.fixture(scope="session")
def oscilloscope_image() -> CodeImage:
    """Largest bundled sample image."""
    return sample_image("multi-hop-oscilloscope")


@pytest.fixture
def slow_node() -> DeviceProfile:
    """Device profile reading program memory at 1 MB/s."""
    return PROFILES["slow-node"]


@pytest.fixture(scope="session")
def small_packed(sense_image: CodeImage) -> PackedImage:
    """Sense image packed with Huffman blocks of 512 bytes in 8 KiB."""
    return pack(
        sense_image,
        CodecId.CANONICAL_HUFFMAN,
        512,
        capacity=SMALL_CAPACITY,
        prw_seed=bytes.fromhex("0102030405060708"),
    )


@pytest.fixture
def small_policy(
    small_packed: PackedImage, slow_node: DeviceProfile
) -> VerifierPolicy:
    """Calibrated policy for the small packed image."""
    t_em, t_pm = auto_calibrate(small_packed, slow_node)
    return VerifierPolicy(t_em=t_em, t_pm=t_pm)


@pytest.fixture
def small_verifier(
    small_packed: PackedImage, small_policy: VerifierPolicy
) -> Verifier:
    """Verifier holding the small packed image."""
    return Verifier(small_packed, small_policy, nonce_key=b"test")
