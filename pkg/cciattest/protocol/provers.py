"""Prover models answering attestation challenges."""

import hashlib
import logging

from cciattest.codecs import CodecId, build_lat
from cciattest.config import DeviceProfile
from cciattest.image import PackedImage, unpack
from cciattest.protocol.adversary import (
    AttackPlan,
    external_profile,
    lat_compression_attack,
    simulate_compression_attacker,
    simulate_external_memory_attacker,
)
from cciattest.protocol.attestation import (
    Nonce,
    Prover,
    RateLimiter,
    VerifierPolicy,
    digest_memory,
    honest_cost,
)
from cciattest.timing import CostCounters

LOG = logging.getLogger(__name__)


class HonestProver(Prover):
    """Hashes its untouched program memory."""

    def __init__(
        self,
        img: PackedImage,
        profile: DeviceProfile,
        limiter: RateLimiter | None = None,
    ) -> None:
        super().__init__("honest", profile, limiter)
        self.img = img

    def compute(
        self, nonce: Nonce, policy: VerifierPolicy
    ) -> tuple[bytes, CostCounters]:
        """Hash the untouched program memory."""
        x = digest_memory(self.img.memory, nonce, policy)
        cost = honest_cost(self.img.layout.capacity, len(policy.prefix(nonce)))
        return x, cost


class TamperedProver(Prover):
    """Program memory partly overwritten by bogus code.

    Args:
        img: Image the device was provisioned with.
        profile: Device class.
        bogus: Bytes written over program memory.
        offset: Address of the bogus bytes.
    """

    def __init__(
        self,
        img: PackedImage,
        profile: DeviceProfile,
        bogus: bytes = b"\x00" * 64,
        offset: int = 0,
    ) -> None:
        super().__init__("tampered", profile)
        if not bogus or offset < 0:
            raise ValueError("bogus code must be non-empty at offset >= 0")
        if offset + len(bogus) > len(img.memory):
            raise ValueError("bogus code does not fit in program memory")
        memory = bytearray(img.memory)
        memory[offset : offset + len(bogus)] = bogus
        if bytes(memory) == img.memory:
            raise ValueError("bogus code equals the stored content")
        self.memory = bytes(memory)

    def compute(
        self, nonce: Nonce, policy: VerifierPolicy
    ) -> tuple[bytes, CostCounters]:
        """Hash the tampered memory."""
        x = digest_memory(self.memory, nonce, policy)
        cost = honest_cost(len(self.memory), len(policy.prefix(nonce)))
        return x, cost


class ExternalMemoryAttacker(Prover):
    """Keeps the honest memory in slower external memory."""

    def __init__(
        self,
        img: PackedImage,
        profile: DeviceProfile,
        ext_bandwidth: float | None = None,
    ) -> None:
        super().__init__(
            "external-memory", external_profile(profile, ext_bandwidth)
        )
        self.img = img
        self.ext_bandwidth = ext_bandwidth

    def compute(
        self, nonce: Nonce, policy: VerifierPolicy
    ) -> tuple[bytes, CostCounters]:
        """Hash program memory kept in external memory."""
        x, cost, _ = simulate_external_memory_attacker(
            self.img, self.ext_bandwidth, nonce, policy, self.profile
        )
        return x, cost


class CompressionAttacker(Prover):
    """Regenerates recompressed code on the fly.

    Args:
        img: Honest packed image.
        profile: Device class.
        plan: Feasible attacker pipeline.
        cached: Give the attacker an LRU cache of decompressed blocks.
        cache_blocks: Blocks held by that cache.
        full: Recompress the whole image.
    """

    def __init__(
        self,
        img: PackedImage,
        profile: DeviceProfile,
        plan: AttackPlan,
        cached: bool = False,
        cache_blocks: int = 1,
        full: bool = False,
    ) -> None:
        super().__init__("compression", profile)
        self.img = img
        self.plan = plan
        self.cached = cached
        self.cache_blocks = cache_blocks
        self.full = full

    def compute(
        self, nonce: Nonce, policy: VerifierPolicy
    ) -> tuple[bytes, CostCounters]:
        """Regenerate the recompressed code while hashing."""
        return simulate_compression_attacker(
            self.img,
            self.plan,
            nonce,
            policy,
            cached=self.cached,
            cache_blocks=self.cache_blocks,
            full=self.full,
        )


class ReplayAttacker(Prover):
    """Answers from recorded ``(nonce, x)`` pairs.

    An unknown nonce is answered with a guess, which never matches.
    """

    def __init__(
        self,
        profile: DeviceProfile,
        recorded: dict[Nonce, bytes] | None = None,
    ) -> None:
        super().__init__("replay", profile)
        self.recorded = dict(recorded or {})

    def observe(self, nonce: Nonce, x: bytes | None) -> None:
        """Record an eavesdropped pair."""
        if x is not None:
            self.recorded[nonce] = x

    def compute(
        self, nonce: Nonce, policy: VerifierPolicy
    ) -> tuple[bytes, CostCounters]:
        """Answer from the recordings."""
        x = self.recorded.get(nonce)
        if x is None:
            LOG.debug(f"replay: no recording for {nonce.hex()}")
            x = hashlib.sha256(b"replay" + nonce.to_bytes()).digest()
        return x, CostCounters()


class LatCompressor(Prover):
    """Stores the LAT compressed with the attacker codec.

    Every attested LAT byte costs a decompression of the whole LAT.
    """

    def __init__(
        self,
        img: PackedImage,
        profile: DeviceProfile,
        c_a: CodecId | str = CodecId.LZ_GENERAL,
    ) -> None:
        super().__init__("lat-compressor", profile)
        self.img = img
        self.c_a = CodecId(c_a)
        self.report = lat_compression_attack(build_lat(unpack(img)), self.c_a)

    def compute(
        self, nonce: Nonce, policy: VerifierPolicy
    ) -> tuple[bytes, CostCounters]:
        """Hash memory, decompressing the LAT per attested LAT byte."""
        x = digest_memory(self.img.memory, nonce, policy)
        capacity = self.img.layout.capacity
        lat = len(self.img.region("lat"))
        cost = CostCounters(
            pm_bytes=capacity - lat + lat * self.report.compressed_bytes,
            hash_bytes=capacity + len(policy.prefix(nonce)),
        )
        if lat:
            cost.add_decompression(self.c_a, lat * self.report.lat_bytes)
        return x, cost


PROVERS = (
    "honest",
    "tampered",
    "external-memory",
    "compression",
    "replay",
    "lat-compressor",
)
