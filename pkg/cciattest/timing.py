"""Device cost model, simulated clock and threshold calibration."""

import logging
import math

import numpy as np
from pydantic import BaseModel, Field

from cciattest.codecs import CodecId
from cciattest.config import PROFILES, DeviceProfile, get_profile
from cciattest.exceptions import CalibrationError

LOG = logging.getLogger(__name__)

MB = 1_000_000

__all__ = [
    "MB",
    "PROFILES",
    "CostCounters",
    "DeviceProfile",
    "SimClock",
    "calibrate_thresholds",
    "elapsed",
    "to_ns",
    "within",
    "get_profile",
]


class CostCounters(BaseModel):
    """Work done by a prover while answering one challenge."""

    pm_bytes: int = Field(0, ge=0)
    em_bytes: int = Field(0, ge=0)
    hash_bytes: int = Field(0, ge=0)
    decomp_bytes: dict[CodecId, int] = Field(default_factory=dict)

    def add_decompression(self, codec: CodecId, size: int) -> None:
        """Account `size` decompressed bytes of `codec`."""
        self.decomp_bytes[codec] = self.decomp_bytes.get(codec, 0) + size

    def __add__(self, other: "CostCounters") -> "CostCounters":
        decomp = dict(self.decomp_bytes)
        for codec, size in other.decomp_bytes.items():
            decomp[codec] = decomp.get(codec, 0) + size
        return CostCounters(
            pm_bytes=self.pm_bytes + other.pm_bytes,
            em_bytes=self.em_bytes + other.em_bytes,
            hash_bytes=self.hash_bytes + other.hash_bytes,
            decomp_bytes=decomp,
        )

    @property
    def total_decomp_bytes(self) -> int:
        """Decompressed bytes over all codecs."""
        return sum(self.decomp_bytes.values())


def elapsed(cost: CostCounters, profile: DeviceProfile) -> float:
    """Convert work counters into seconds on `profile`.

    The result is the sum of every counter divided by its bandwidth.
    """
    seconds = cost.pm_bytes / profile.pm_read_bw
    seconds += cost.em_bytes / profile.em_read_bw
    seconds += cost.hash_bytes / profile.hash_bw
    for codec in sorted(cost.decomp_bytes, key=lambda c: c.value):
        size = cost.decomp_bytes[codec]
        if not size:
            continue
        if codec not in profile.decomp_bw:
            raise ValueError(
                f"Profile {profile.name} has no decompression bandwidth "
                f"for {codec.value}"
            )
        seconds += size / profile.decomp_bw[codec]
    return seconds


NS_PER_S = 1_000_000_000


def to_ns(seconds: float) -> int:
    """Round seconds to integer nanoseconds."""
    return round(seconds * NS_PER_S)


def within(epsilon_ns: int, threshold: float) -> bool:
    """Return True if `epsilon_ns` does not exceed `threshold` seconds."""
    return epsilon_ns <= math.ceil(threshold * NS_PER_S)


class SimClock:
    """Deterministic simulated clock with nanosecond ticks.

    Args:
        start: Initial time in seconds.
        jitter: Upper bound in seconds of the uniform delay added on every
            advance.
        seed: Seed of the jitter generator.
    """

    def __init__(
        self, start: float = 0.0, jitter: float = 0.0, seed: int = 0
    ) -> None:
        if start < 0 or jitter < 0:
            raise ValueError("start and jitter must be non-negative")
        self._now_ns = to_ns(start)
        self.jitter = jitter
        self._rng = np.random.default_rng(seed)

    @property
    def now_ns(self) -> int:
        """Current simulated time in nanoseconds."""
        return self._now_ns

    @property
    def now(self) -> float:
        """Current simulated time in seconds."""
        return self._now_ns / NS_PER_S

    def advance(self, seconds: float) -> int:
        """Advance the clock and return the new time in nanoseconds."""
        if seconds < 0:
            raise ValueError(f"Cannot advance by {seconds} s")
        self._now_ns += to_ns(seconds)
        if self.jitter:
            self._now_ns += to_ns(self._rng.uniform(0.0, self.jitter))
        return self._now_ns


def calibrate_thresholds(
    honest_cost: float,
    ext_attack_cost: float,
    pm_attack_cost: float,
    margin: float = 1.5,
) -> tuple[float, float]:
    """Choose the timing thresholds ``(T_em, T_pm)``.

    ``T_em`` is the honest time scaled by `margin`; ``T_pm`` is the
    geometric mean of ``T_em`` and the compression attack time, so both
    lie strictly between the honest and attack times.

    Args:
        honest_cost: Elapsed seconds of an honest prover.
        ext_attack_cost: Elapsed seconds of an external memory attacker.
        pm_attack_cost: Elapsed seconds of a compression attacker.
        margin: Factor of at least 1 applied to the honest time.

    Raises:
        CalibrationError: The costs do not separate honest from attack
            provers under `margin`.
    """
    if margin < 1:
        raise ValueError(f"margin must be at least 1: {margin}")
    if not 0 < honest_cost < ext_attack_cost < pm_attack_cost:
        raise CalibrationError(
            f"Costs are not separable: honest={honest_cost:.6f} s, "
            f"external={ext_attack_cost:.6f} s, "
            f"compression={pm_attack_cost:.6f} s"
        )
    t_em = honest_cost * margin
    if t_em >= ext_attack_cost:
        raise CalibrationError(
            f"T_em={t_em:.6f} s with margin {margin} does not stay below "
            f"the external memory attack time {ext_attack_cost:.6f} s"
        )
    t_pm = math.sqrt(t_em * pm_attack_cost)
    LOG.info(f"Calibrated T_em={t_em:.6f} s, T_pm={t_pm:.6f} s")
    return t_em, t_pm
