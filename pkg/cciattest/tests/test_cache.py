import numpy as np
import pytest

from cciattest.cache import (
    DecompressionCache,
    access,
    looped_trace,
    random_trace,
    run_trace,
    sequential_trace,
)
from cciattest.codecs import BlockCompressedImage, build_lat, compress_blocks
from cciattest.config import DeviceProfile
from cciattest.image import CodeImage


@pytest.fixture(scope="module")
def img(sense_image: CodeImage) -> BlockCompressedImage:
    """Sense image in blocks of 256 bytes."""
    return compress_blocks(sense_image.data, "lz-general", 256)


def test_access(img: BlockCompressedImage, sense_image: CodeImage) -> None:
    """Test fetched bytes and hit accounting."""
    lat = build_lat(img)
    cache = DecompressionCache(1)
    assert access(300, cache, img, lat) == (sense_image.data[300], False)
    assert access(301, cache, img, lat) == (sense_image.data[301], True)
    assert access(0, cache, img, lat)[1] is False
    assert access(300, cache, img, lat)[1] is False
    assert (cache.hit_count, cache.miss_count) == (1, 3)
    assert cache.bytes_decompressed == 3 * 256
    with pytest.raises(IndexError):
        access(len(sense_image), cache, img, lat)


def test_lru_order() -> None:
    """Test the least recently used block is evicted."""
    cache = DecompressionCache(2)
    cache.insert(0, b"a")
    cache.insert(1, b"b")
    cache.lookup(0)
    cache.insert(2, b"c")
    assert list(cache.resident) == [0, 2]


def test_invalid_capacity() -> None:
    """Test empty caches."""
    with pytest.raises(ValueError, match="at least one block"):
        DecompressionCache(0)


def test_thrash(img: BlockCompressedImage) -> None:
    """Test alternating between two blocks misses every time in one slot."""
    trace = np.array([0, 256] * 5)
    report = run_trace(trace, 1, img, build_lat(img))
    assert (report.misses, report.hits) == (10, 0)


def test_full_residency(img: BlockCompressedImage) -> None:
    """Test a second pass hits only when every block fits."""
    lat = build_lat(img)
    cache = DecompressionCache(img.block_count)
    for address in range(img.original_length):
        access(address, cache, img, lat)
    assert cache.miss_count == img.block_count
    for address in range(img.original_length):
        access(address, cache, img, lat)
    assert cache.miss_count == img.block_count


def test_inclusion(img: BlockCompressedImage) -> None:
    """Test a larger LRU cache never misses more on the same trace."""
    lat = build_lat(img)
    rng = np.random.default_rng(7)
    for _ in range(100):
        trace = rng.integers(0, img.original_length, size=200)
        sizes = (1, 2, 3, 4, 8, img.block_count)
        misses = [run_trace(trace, k, img, lat).misses for k in sizes]
        assert misses == sorted(misses, reverse=True)
        # a cache holding every block misses each block at most once
        assert misses[-1] <= img.block_count


def test_run_trace(
    img: BlockCompressedImage, slow_node: DeviceProfile
) -> None:
    """Test a sequential scan misses once per block."""
    report = run_trace(
        sequential_trace(img.original_length),
        1,
        img,
        build_lat(img),
        slow_node,
    )
    assert report.misses == img.block_count
    assert report.hits == img.original_length - img.block_count
    # lz-general decompresses at 1 MB/s on the slow node
    assert report.modeled_ms == pytest.approx(
        report.bytes_decompressed / 1000
    )


def test_run_trace_without_rate(
    img: BlockCompressedImage, slow_node: DeviceProfile
) -> None:
    """Test profiles lacking a rate for the image codec."""
    bare = slow_node.model_copy(update={"decomp_bw": {}})
    with pytest.raises(ValueError, match="no decompression bandwidth"):
        run_trace(sequential_trace(512), 1, img, build_lat(img), bare)


def test_traces() -> None:
    """Test the synthetic trace generators."""
    assert sequential_trace(3, repeat=2).tolist() == [0, 1, 2, 0, 1, 2]
    looped = looped_trace(1000, loops=2, body=10, iterations=3)
    assert len(looped) == 1000 + 2 * 10 * 3
    trace = random_trace(50, 20, seed=1)
    assert len(trace) == 20
    assert trace.min() >= 0 and trace.max() < 50
