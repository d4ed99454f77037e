"""Execution model of a device decompressing code on demand.

Instruction fetches go through a cache of decompressed blocks; a miss
locates the block with the LAT and decompresses it.
"""

import collections
import logging
from collections.abc import Iterable

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel

from cciattest.codecs import BlockCompressedImage, Lat, decompress_block
from cciattest.config import DeviceProfile
from cciattest.timing import CostCounters, elapsed

LOG = logging.getLogger(__name__)


class DecompressionCache:
    """LRU cache of decompressed blocks.

    Args:
        capacity_blocks: Number of blocks the cache holds.
    """

    def __init__(self, capacity_blocks: int = 1) -> None:
        if capacity_blocks < 1:
            raise ValueError(
                f"Cache must hold at least one block: {capacity_blocks}"
            )
        self.capacity_blocks = capacity_blocks
        self.resident: collections.OrderedDict[int, bytes] = (
            collections.OrderedDict()
        )
        self.miss_count = 0
        self.hit_count = 0
        self.bytes_decompressed = 0

    def lookup(self, block_index: int) -> bytes | None:
        """Return a resident block and mark it most recently used."""
        block = self.resident.get(block_index)
        if block is not None:
            self.resident.move_to_end(block_index)
        return block

    def insert(self, block_index: int, block: bytes) -> None:
        """Insert a block, evicting the least recently used one if full."""
        self.resident[block_index] = block
        self.resident.move_to_end(block_index)
        while len(self.resident) > self.capacity_blocks:
            evicted, _ = self.resident.popitem(last=False)
            LOG.debug(f"evicted block {evicted}")


def access(
    addr: int,
    cache: DecompressionCache,
    img: BlockCompressedImage,
    lat: Lat,
) -> tuple[int, bool]:
    """Fetch the code image byte at `addr` through `cache`.

    Returns:
        The byte value and whether the access hit the cache.

    Raises:
        IndexError: `addr` lies outside the code image.
    """
    if not 0 <= addr < img.original_length:
        raise IndexError(
            f"Address {addr} out of range [0, {img.original_length})"
        )
    index, offset = divmod(addr, img.block_size)
    block = cache.lookup(index)
    if block is not None:
        cache.hit_count += 1
        return block[offset], True
    block = decompress_block(img, lat, index)
    cache.insert(index, block)
    cache.miss_count += 1
    cache.bytes_decompressed += img.block_size
    return block[offset], False


class CacheReport(BaseModel):
    """Cache statistics of one trace."""

    block_size: int
    capacity_blocks: int
    misses: int
    hits: int
    bytes_decompressed: int
    modeled_ms: float


def run_trace(
    trace: Iterable[int],
    capacity_blocks: int,
    img: BlockCompressedImage,
    lat: Lat,
    profile: DeviceProfile | None = None,
) -> CacheReport:
    """Replay an address trace and report cache statistics.

    The modeled time is the decompression work divided by the profile's
    decompression bandwidth for the image codec; it is 0 without a
    profile.

    Raises:
        ValueError: The profile has no decompression bandwidth for the
            image codec.
    """
    cache = DecompressionCache(capacity_blocks)
    for addr in trace:
        access(int(addr), cache, img, lat)
    modeled_ms = 0.0
    if profile is not None:
        cost = CostCounters()
        cost.add_decompression(img.codec, cache.bytes_decompressed)
        modeled_ms = 1000 * elapsed(cost, profile)
    LOG.debug(
        f"trace: capacity={capacity_blocks} misses={cache.miss_count} "
        f"hits={cache.hit_count}"
    )
    return CacheReport(
        block_size=img.block_size,
        capacity_blocks=capacity_blocks,
        misses=cache.miss_count,
        hits=cache.hit_count,
        bytes_decompressed=cache.bytes_decompressed,
        modeled_ms=modeled_ms,
    )


def sequential_trace(length: int, repeat: int = 1) -> NDArray[np.int64]:
    """Scan every address of an image of `length` bytes in order."""
    return np.tile(np.arange(length, dtype=np.int64), repeat)


def looped_trace(
    length: int,
    loops: int = 8,
    body: int = 256,
    iterations: int = 16,
    seed: int = 0,
) -> NDArray[np.int64]:
    """Sequential code with `loops` hot loops executed `iterations` times."""
    rng = np.random.default_rng(seed)
    body = min(body, length)
    starts = np.sort(rng.integers(0, length - body + 1, size=loops))
    parts = [np.arange(length, dtype=np.int64)]
    for start in starts:
        loop = np.arange(start, start + body, dtype=np.int64)
        parts.append(np.tile(loop, iterations))
    return np.concatenate(parts)


def random_trace(
    length: int, count: int, seed: int = 0
) -> NDArray[np.int64]:
    """Uniformly random addresses."""
    rng = np.random.default_rng(seed)
    return rng.integers(0, length, size=count, dtype=np.int64)
