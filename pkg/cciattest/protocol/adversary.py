"""Attack planning and cost simulation of attacking provers.

A compression attacker recompresses part of the stored code with a better
codec or a larger block size and uses the freed program memory for bogus
code. To answer a challenge it regenerates the honest content on the fly,
so its digest is correct and only the elapsed time betrays it.
"""

import collections
import enum
import functools
import logging
import math
from typing import NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from cciattest.codecs import (
    SUPPORTED_BLOCK_SIZES,
    BlockCompressedImage,
    CodecId,
    Lat,
    compress_blocks,
    decompress_image,
)
from cciattest.config import DEFAULT_CAPACITY, DeviceProfile
from cciattest.exceptions import InfeasiblePlanError
from cciattest.image import CodeImage, PackedImage, unpack
from cciattest.protocol.attestation import (
    Nonce,
    VerifierPolicy,
    derive_permutation,
    digest_memory,
    honest_cost,
)
from cciattest.timing import (
    MB,
    CostCounters,
    calibrate_thresholds,
    elapsed,
)

LOG = logging.getLogger(__name__)

DEFAULT_BOGUS_PAYLOAD = 1024
HUFFMAN_ROUTINE_PAYLOAD = 1707
DETECTION_THRESHOLD_S = 5.0
CALIBRATION_PREFIX_BYTES = 8


class RecompressionMode(str, enum.Enum):
    """Input of the attacker codec."""

    # attacker compresses the reconstructed plain image
    PLAIN = "plain"
    # attacker compresses the honest block stream
    LAYERED = "layered"


@functools.lru_cache(maxsize=64)
def _compressed(data: bytes, codec: CodecId, s: int) -> BlockCompressedImage:
    return compress_blocks(data, codec, s)


def _attacker_input(
    ci: bytes, honest: BlockCompressedImage, mode: RecompressionMode
) -> bytes:
    return ci if mode == RecompressionMode.PLAIN else honest.stream


def total_gain(
    ci: CodeImage,
    c_h: CodecId | str,
    s_h: int,
    c_a: CodecId | str,
    s_a: int,
    mode: RecompressionMode | str = RecompressionMode.PLAIN,
) -> int:
    """Bytes freed by recompressing the whole image.

    The result is ``|C_h(CI)| - |C_a(CI)|`` and may be zero or negative.
    In layered mode the attacker codec runs over the honest stream.
    """
    mode = RecompressionMode(mode)
    honest = _compressed(ci.data, CodecId(c_h), s_h)
    attacker = _compressed(
        _attacker_input(ci.data, honest, mode), CodecId(c_a), s_a
    )
    return honest.compressed_length - attacker.compressed_length


def blocks_needed(payload: int, gain_per_block: float) -> int | None:
    """Attacker blocks to recompress for `payload` bytes of bogus code.

    Returns:
        The ceiling of ``payload / gain_per_block``, 0 for an empty payload
        and None when a block gains nothing.
    """
    if payload <= 0:
        return 0
    if gain_per_block <= 0:
        return None
    return math.ceil(payload / gain_per_block)


class AttackPlan(BaseModel):
    """Analytic evaluation of one attacker pipeline against one image."""

    model_config = ConfigDict(frozen=True)

    c_h: CodecId
    s_h: int
    c_a: CodecId
    s_a: int
    mode: RecompressionMode = RecompressionMode.PLAIN
    ci_length: int
    honest_length: int
    attacker_length: int
    bogus_payload_bytes: int = DEFAULT_BOGUS_PAYLOAD
    total_gain: int
    blocks_total: int
    gain_per_block: float
    blocks_needed: int | None
    feasible: bool
    memory_overhead_bytes: float = 0.0
    est_attest_seconds: float = 0.0
    threshold: float = DETECTION_THRESHOLD_S
    detectable: bool = False

    @property
    def identical(self) -> bool:
        """True if the attacker repeats the honest pipeline."""
        return (
            self.mode == RecompressionMode.PLAIN
            and self.c_a == self.c_h
            and self.s_a == self.s_h
        )

    @property
    def attacker_ratio(self) -> float:
        """Attacker compression ratio over the code image."""
        return self.attacker_length / self.ci_length


def memory_overhead(plan: AttackPlan) -> float:
    """Program memory read volume caused by the recompressed blocks.

    Every recompressed block is decompressed about ``s_a`` times, each
    time reading its ``s_a * |C_a(CI)| / |CI|`` compressed bytes.

    Raises:
        InfeasiblePlanError: The plan cannot free enough memory.
    """
    if plan.identical:
        return 0.0
    if not plan.feasible or plan.blocks_needed is None:
        raise InfeasiblePlanError(
            f"{plan.c_a.value}/{plan.s_a} cannot free "
            f"{plan.bogus_payload_bytes} bytes"
        )
    return plan.blocks_needed * plan.s_a * plan.attacker_ratio * plan.s_a


def plan_attack(
    ci: CodeImage,
    c_h: CodecId | str,
    s_h: int,
    c_a: CodecId | str,
    s_a: int,
    profile: DeviceProfile,
    payload: int = DEFAULT_BOGUS_PAYLOAD,
    threshold: float = DETECTION_THRESHOLD_S,
    mode: RecompressionMode | str = RecompressionMode.PLAIN,
    capacity: int = DEFAULT_CAPACITY,
) -> AttackPlan:
    """Evaluate the attacker pipeline ``(c_a, s_a)`` against ``(c_h, s_h)``.

    Args:
        ci: Code image.
        c_h: Honest codec.
        s_h: Honest block size.
        c_a: Attacker codec.
        s_a: Attacker block size.
        profile: Device the attestation time is estimated on.
        payload: Bytes of bogus code, decompressor and attacker LAT.
        threshold: Attestation time above which the attack is detected.
        mode: Attacker input, see `RecompressionMode`.
        capacity: Program memory size hashed by every response.

    Returns:
        The plan; infeasible plans carry no overhead and are never
        detectable.
    """
    c_h, c_a = CodecId(c_h), CodecId(c_a)
    mode = RecompressionMode(mode)
    honest = _compressed(ci.data, c_h, s_h)
    attacker = _compressed(_attacker_input(ci.data, honest, mode), c_a, s_a)
    gain = honest.compressed_length - attacker.compressed_length
    blocks_total = attacker.block_count
    gain_per_block = gain / blocks_total
    needed = blocks_needed(payload, gain_per_block)
    plan = AttackPlan(
        c_h=c_h,
        s_h=s_h,
        c_a=c_a,
        s_a=s_a,
        mode=mode,
        ci_length=len(ci),
        honest_length=honest.compressed_length,
        attacker_length=attacker.compressed_length,
        bogus_payload_bytes=payload,
        total_gain=gain,
        blocks_total=blocks_total,
        gain_per_block=gain_per_block,
        blocks_needed=needed,
        feasible=needed is not None and needed <= blocks_total,
        threshold=threshold,
    )
    honest_seconds = elapsed(
        honest_cost(capacity, CALIBRATION_PREFIX_BYTES), profile
    )
    if not plan.feasible:
        return plan.model_copy(update={"est_attest_seconds": honest_seconds})
    overhead = memory_overhead(plan)
    est = honest_seconds + overhead / profile.pm_read_bw
    return plan.model_copy(
        update={
            "memory_overhead_bytes": overhead,
            "est_attest_seconds": est,
            "detectable": est > threshold,
        }
    )


def feasibility_sweep(
    ci: CodeImage,
    c_h: CodecId | str,
    s_h_set: list[int],
    c_a_set: list[CodecId],
    s_a_set: list[int],
    profile: DeviceProfile,
    payload: int = DEFAULT_BOGUS_PAYLOAD,
    threshold: float = DETECTION_THRESHOLD_S,
    capacity: int = DEFAULT_CAPACITY,
) -> list[AttackPlan]:
    """Plan every attacker pipeline against every honest block size."""
    plans = [
        plan_attack(
            ci,
            c_h,
            s_h,
            c_a,
            s_a,
            profile,
            payload=payload,
            threshold=threshold,
            capacity=capacity,
        )
        for s_h in s_h_set
        for c_a in c_a_set
        for s_a in s_a_set
    ]
    LOG.info(
        f"Sweep over {len(plans)} plans: "
        f"{sum(p.feasible for p in plans)} feasible, "
        f"{sum(p.detectable for p in plans)} detectable"
    )
    return plans


class Segment(BaseModel):
    """Honest stream bytes regenerated from the same attacker blocks."""

    model_config = ConfigDict(frozen=True)

    start: int
    length: int
    reads_per_byte: int
    decomp_per_byte: int
    key: tuple[int, ...]


class _Unit(NamedTuple):
    gain: int
    segments: list[Segment]


def _plain_units(
    honest: BlockCompressedImage,
    attacker: BlockCompressedImage,
    offsets: list[int],
) -> list[_Unit]:
    unit = max(honest.block_size, attacker.block_size)
    units = []
    for begin in range(0, honest.original_length, unit):
        end = min(begin + unit, honest.original_length)
        a_range = range(
            begin // attacker.block_size,
            math.ceil(end / attacker.block_size),
        )
        segments = []
        h_bytes = 0
        for j in range(
            begin // honest.block_size, math.ceil(end / honest.block_size)
        ):
            lo = j * honest.block_size
            hi = lo + honest.block_length(j)
            covering = [
                a
                for a in a_range
                if a * attacker.block_size < hi
                and (a + 1) * attacker.block_size > lo
            ]
            length = len(honest.blocks[j])
            h_bytes += length
            segments.append(
                Segment(
                    start=offsets[j],
                    length=length,
                    reads_per_byte=sum(
                        len(attacker.blocks[a]) for a in covering
                    ),
                    decomp_per_byte=sum(
                        attacker.block_length(a) for a in covering
                    ),
                    key=tuple(covering),
                )
            )
        a_bytes = sum(len(attacker.blocks[a]) for a in a_range)
        units.append(_Unit(gain=h_bytes - a_bytes, segments=segments))
    return units


def _layered_units(
    honest: BlockCompressedImage, attacker: BlockCompressedImage
) -> list[_Unit]:
    units = []
    for a, block in enumerate(attacker.blocks):
        length = attacker.block_length(a)
        segment = Segment(
            start=a * attacker.block_size,
            length=length,
            reads_per_byte=len(block),
            decomp_per_byte=length,
            key=(a,),
        )
        units.append(_Unit(gain=length - len(block), segments=[segment]))
    return units


def recompressed_segments(
    img: PackedImage, plan: AttackPlan, full: bool = False
) -> list[Segment]:
    """Choose the honest stream ranges the attacker recompresses.

    Units with the largest gain are taken first until the freed memory
    holds the bogus payload and the attacker dictionary.

    Args:
        img: Honest packed image.
        plan: Attacker pipeline.
        full: Recompress every unit regardless of the payload.

    Raises:
        InfeasiblePlanError: The positive gain units free too little.
    """
    honest = unpack(img)
    if (honest.codec, honest.block_size) != (plan.c_h, plan.s_h):
        raise ValueError(
            f"Plan targets {plan.c_h.value}/{plan.s_h}, image holds "
            f"{honest.codec.value}/{honest.block_size}"
        )
    ci = decompress_image(honest)
    attacker = _compressed(
        _attacker_input(ci, honest, plan.mode), plan.c_a, plan.s_a
    )
    if plan.mode == RecompressionMode.PLAIN:
        units = _plain_units(
            honest, attacker, list(img.manifest.block_offsets)
        )
    else:
        units = _layered_units(honest, attacker)
    if full:
        return [s for unit in units for s in unit.segments]

    need = plan.bogus_payload_bytes
    if need <= 0:
        return []
    need += len(attacker.dictionary or b"")
    chosen: list[Segment] = []
    freed = 0
    for unit in sorted(units, key=lambda u: -u.gain):
        if freed >= need or unit.gain <= 0:
            break
        chosen.extend(unit.segments)
        freed += unit.gain
    if freed < need:
        raise InfeasiblePlanError(
            f"{plan.c_a.value}/{plan.s_a} frees {freed} of {need} bytes"
        )
    return sorted(chosen, key=lambda s: s.start)


def _cached_cost(
    segments: list[Segment],
    capacity: int,
    order: np.ndarray,
    cache_blocks: int,
) -> tuple[int, int]:
    owner = np.full(capacity, -1, dtype=np.int64)
    for i, segment in enumerate(segments):
        owner[segment.start : segment.start + segment.length] = i
    byte_order = np.stack([2 * order, 2 * order + 1], axis=1).ravel()
    touched = owner[byte_order]
    touched = touched[touched >= 0]
    cache: collections.OrderedDict[tuple[int, ...], None] = (
        collections.OrderedDict()
    )
    reads = decomp = 0
    for i in touched.tolist():
        segment = segments[i]
        if segment.key in cache:
            cache.move_to_end(segment.key)
            continue
        reads += segment.reads_per_byte
        decomp += segment.decomp_per_byte
        cache[segment.key] = None
        if len(cache) > cache_blocks:
            cache.popitem(last=False)
    return reads, decomp


def attack_cost(
    img: PackedImage,
    plan: AttackPlan,
    prefix_bytes: int,
    full: bool = False,
    order: np.ndarray | None = None,
    cache_blocks: int = 1,
) -> CostCounters:
    """Work of a compression attacker answering one challenge.

    Without `order` every attested byte of a recompressed range costs a
    read and a decompression of its covering attacker blocks. With the
    word traversal `order` the attacker keeps `cache_blocks` decompressed
    attacker blocks in an LRU cache.
    """
    segments = recompressed_segments(img, plan, full=full)
    capacity = img.layout.capacity
    covered = sum(s.length for s in segments)
    if order is None:
        reads = sum(s.length * s.reads_per_byte for s in segments)
        decomp = sum(s.length * s.decomp_per_byte for s in segments)
    else:
        reads, decomp = _cached_cost(segments, capacity, order, cache_blocks)
    cost = CostCounters(
        pm_bytes=capacity - covered + reads,
        hash_bytes=capacity + prefix_bytes,
    )
    if decomp:
        cost.add_decompression(plan.c_a, decomp)
    LOG.debug(
        f"{plan.c_a.value}/{plan.s_a}: {len(segments)} segments, "
        f"{covered} bytes regenerated, {reads / MB:.2f} MB read"
    )
    return cost


@functools.lru_cache(maxsize=8)
def regenerate_memory(img: PackedImage, plan: AttackPlan) -> bytes:
    """Program memory content as rebuilt by the attacker.

    The attacker decompresses its own image and restores the honest
    compressed region; the remaining regions are kept untouched.
    """
    honest = unpack(img)
    ci = decompress_image(honest)
    attacker = _compressed(
        _attacker_input(ci, honest, plan.mode), plan.c_a, plan.s_a
    )
    restored = decompress_image(attacker)
    if plan.mode == RecompressionMode.PLAIN:
        restored = compress_blocks(restored, plan.c_h, plan.s_h).stream
    return restored + img.memory[len(restored) :]


def simulate_compression_attacker(
    img: PackedImage,
    plan: AttackPlan,
    nonce: Nonce,
    policy: VerifierPolicy,
    cached: bool = False,
    cache_blocks: int = 1,
    full: bool = False,
) -> tuple[bytes, CostCounters]:
    """Answer a challenge as a compression attacker.

    Args:
        img: Honest packed image the attacker started from.
        plan: Attacker pipeline.
        nonce: Challenge.
        policy: Verifier policy deciding the hash and prefix.
        cached: Keep decompressed attacker blocks in an LRU cache while
            following the traversal order of `nonce`.
        cache_blocks: Attacker blocks held by the cache.
        full: Recompress the whole image.

    Returns:
        The digest, equal to the honest one, and the work spent.

    Raises:
        InfeasiblePlanError: The plan cannot hold the bogus payload.
    """
    if not full and not plan.feasible:
        raise InfeasiblePlanError(
            f"{plan.c_a.value}/{plan.s_a} against {plan.c_h.value}/"
            f"{plan.s_h} is infeasible"
        )
    prefix_bytes = len(policy.prefix(nonce))
    order = None
    if cached:
        order = derive_permutation(nonce, img.layout.capacity // 2)
    cost = attack_cost(
        img,
        plan,
        prefix_bytes,
        full=full,
        order=order,
        cache_blocks=cache_blocks,
    )
    x = digest_memory(regenerate_memory(img, plan), nonce, policy)
    return x, cost


def external_profile(
    profile: DeviceProfile, ext_bandwidth: float | None
) -> DeviceProfile:
    """`profile` with the external memory bandwidth replaced."""
    if ext_bandwidth is None:
        return profile
    if ext_bandwidth <= 0:
        raise ValueError(f"ext_bandwidth must be positive: {ext_bandwidth}")
    return profile.model_copy(update={"em_read_bw": ext_bandwidth})


def external_memory_cost(capacity: int, prefix_bytes: int) -> CostCounters:
    """Work of hashing program memory kept in external memory."""
    return CostCounters(em_bytes=capacity, hash_bytes=capacity + prefix_bytes)


def simulate_external_memory_attacker(
    img: PackedImage,
    ext_bandwidth: float | None,
    nonce: Nonce,
    policy: VerifierPolicy,
    profile: DeviceProfile,
) -> tuple[bytes, CostCounters, DeviceProfile]:
    """Answer from an honest copy of program memory held externally.

    Args:
        img: Honest program memory, copied to external memory.
        ext_bandwidth: External memory read rate in bytes/s, None keeps
            the rate of `profile`.
        nonce: Challenge nonce.
        policy: Verifier policy defining the digest.
        profile: Device the attacker runs on.

    Returns:
        The digest, the work spent and the profile that converts the work
        into time, reading external memory at `ext_bandwidth`.
    """
    x = digest_memory(img.memory, nonce, policy)
    cost = external_memory_cost(
        img.layout.capacity, len(policy.prefix(nonce))
    )
    return x, cost, external_profile(profile, ext_bandwidth)


class LatGainReport(BaseModel):
    """Memory freed by compressing the LAT."""

    lat_bytes: int
    compressed_bytes: int
    gain: int


def lat_compression_attack(lat: Lat, c_a: CodecId | str) -> LatGainReport:
    """Compress the LAT as a single block with the attacker codec."""
    data = lat.to_bytes()
    if not data:
        return LatGainReport(lat_bytes=0, compressed_bytes=0, gain=0)
    s = next(
        (s for s in SUPPORTED_BLOCK_SIZES if s >= len(data)),
        SUPPORTED_BLOCK_SIZES[-1],
    )
    compressed = compress_blocks(data, c_a, s).compressed_length
    return LatGainReport(
        lat_bytes=len(data),
        compressed_bytes=compressed,
        gain=max(0, len(data) - compressed),
    )


def auto_calibrate(
    img: PackedImage,
    profile: DeviceProfile,
    prefix_bytes: int = CALIBRATION_PREFIX_BYTES,
    ext_bandwidth: float | None = None,
    margin: float = 1.5,
) -> tuple[float, float]:
    """Calibrate ``(T_em, T_pm)`` from the modeled provers on `profile`.

    The compression attack reference is a full recompression of the
    image with the general LZ codec at the largest block size.
    """
    capacity = img.layout.capacity
    honest = elapsed(honest_cost(capacity, prefix_bytes), profile)
    ext = elapsed(
        external_memory_cost(capacity, prefix_bytes),
        external_profile(profile, ext_bandwidth),
    )
    manifest = img.manifest
    ci = CodeImage(data=decompress_image(unpack(img)), name=manifest.name)
    plan = plan_attack(
        ci,
        manifest.codec,
        manifest.block_size,
        CodecId.LZ_GENERAL,
        SUPPORTED_BLOCK_SIZES[-1],
        profile,
        payload=0,
        capacity=capacity,
    )
    pm = elapsed(attack_cost(img, plan, prefix_bytes, full=True), profile)
    return calibrate_thresholds(honest, ext, pm, margin)
