"""Challenge-response code attestation.

The verifier sends a fresh nonce; the prover hashes its whole program
memory, 16-bit word by word, in an order derived from the nonce. The
verifier accepts when the digest matches its own reference and the
answer arrived within the timing threshold.
"""

import abc
import enum
import functools
import hashlib
import logging
import math
from typing import Any

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel as RawBaseModel
from pydantic import ConfigDict, Field, field_validator

from cciattest.config import (
    MIN_NONCE_WIDTH,
    BaseModel,
    DeviceProfile,
    ProtocolOption,
)
from cciattest.drbg import FeistelNonceSource, HashDrbg
from cciattest.exceptions import OptionMismatchError
from cciattest.image import PackedImage
from cciattest.timing import (
    NS_PER_S,
    CostCounters,
    SimClock,
    elapsed,
    within,
)

LOG = logging.getLogger(__name__)

DIGEST_BYTES = 32
KEY_BYTES = 16
WORD_BYTES = 2
DEFAULT_NONCE_WIDTH = 8


class Nonce(RawBaseModel):
    """Challenge nonce."""

    model_config = ConfigDict(frozen=True)

    value: int = Field(..., ge=0)
    width: int = Field(DEFAULT_NONCE_WIDTH, ge=MIN_NONCE_WIDTH)

    def model_post_init(self, __context: Any) -> None:
        """Post-initialization validation."""
        if self.value >= 1 << (8 * self.width):
            raise ValueError(
                f"Nonce {self.value} does not fit in {self.width} bytes"
            )

    def to_bytes(self) -> bytes:
        """Little-endian encoding over the nonce width."""
        return self.value.to_bytes(self.width, "little")

    def hex(self) -> str:
        """Hex string of the encoding."""
        return self.to_bytes().hex()


class Challenge(RawBaseModel):
    """Nonce sent by the verifier at `issued_at` (ns)."""

    model_config = ConfigDict(frozen=True)

    nonce: Nonce
    issued_at: int


class Response(RawBaseModel):
    """Digest received by the verifier at `received_at` (ns).

    `x` is None when the prover refused to answer.
    """

    model_config = ConfigDict(frozen=True)

    x: bytes | None
    received_at: int


class Verdict(str, enum.Enum):
    """Outcome of one protocol run."""

    ACCEPT = "accept"
    REJECT_HASH = "reject-hash"
    REJECT_TIMING = "reject-timing"
    ABORT = "abort"


class AttestationTranscript(RawBaseModel):
    """Record of one protocol run."""

    model_config = ConfigDict(frozen=True)

    run_id: int
    nonce: Nonce
    x: bytes | None
    epsilon: float
    verdict: Verdict
    prover_model: str
    cost: CostCounters = Field(default_factory=CostCounters)
    repeated_nonce: bool = False

    @property
    def epsilon_ms(self) -> float:
        """Elapsed time in milliseconds."""
        return 1000 * self.epsilon


class VerifierPolicy(BaseModel):
    """Acceptance rules of the verifier."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    t_em: float = Field(..., gt=0)
    t_pm: float = Field(..., gt=0)
    retry_factor: int = 2
    max_mismatches: int = 2
    option: ProtocolOption = ProtocolOption.LAT
    key: bytes | None = None
    hash_name: str = "sha256"
    nonce_width: int = Field(DEFAULT_NONCE_WIDTH, ge=MIN_NONCE_WIDTH)

    @field_validator("key", mode="before")
    @classmethod
    def parse_key(cls, value: Any) -> Any:
        """Accept hex strings."""
        return bytes.fromhex(value) if isinstance(value, str) else value

    def model_post_init(self, __context: Any) -> None:
        """Post-initialization validation."""
        if self.t_pm <= self.t_em:
            raise ValueError(
                f"T_pm ({self.t_pm}) must exceed T_em ({self.t_em})"
            )
        if self.key is not None and len(self.key) != KEY_BYTES:
            raise ValueError(f"Key must be {KEY_BYTES} bytes")
        digest_size = hashlib.new(self.hash_name).digest_size
        if digest_size != DIGEST_BYTES:
            raise ValueError(
                f"{self.hash_name} digests are {digest_size} bytes, "
                f"expected {DIGEST_BYTES}"
            )

    @property
    def threshold(self) -> float:
        """Acceptance threshold ``min(T_em, T_pm)``."""
        return min(self.t_em, self.t_pm)

    def prefix(self, nonce: Nonce) -> bytes:
        """Hash input preceding the memory words."""
        return (self.key or b"") + nonce.to_bytes()


class FreshnessLedger:
    """Nonces issued by a verifier and the transcripts of its runs."""

    def __init__(self) -> None:
        self.seen: set[Nonce] = set()
        self.transcripts: list[AttestationTranscript] = []
        self._answered: set[Nonce] = set()

    def register(self, nonce: Nonce) -> bool:
        """Record an issued nonce, returning False if it was seen before."""
        if nonce in self.seen:
            LOG.warning(f"Nonce {nonce.hex()} was issued before")
            return False
        self.seen.add(nonce)
        return True

    def answered(self, nonce: Nonce) -> bool:
        """Return True if a run under `nonce` was already recorded."""
        return nonce in self._answered

    def record(self, transcript: AttestationTranscript) -> None:
        """Append a transcript."""
        self._answered.add(transcript.nonce)
        self.transcripts.append(transcript)


@functools.lru_cache(maxsize=64)
def derive_permutation(nonce: Nonce, word_count: int) -> NDArray[np.int64]:
    """Return the nonce-derived traversal order of `word_count` words.

    A Fisher-Yates shuffle driven by a hash counter DRBG seeded with the
    nonce. Each swap index is drawn uniformly from ``[0, i]`` by rejection
    sampling over 32-bit words.

    Args:
        nonce: Seed of the traversal.
        word_count: Number of memory words, at least 1.

    Returns:
        Read-only array holding a permutation of ``range(word_count)``.
    """
    if word_count < 1:
        raise ValueError(f"word_count must be positive: {word_count}")
    drbg = HashDrbg(nonce.to_bytes())
    bounds = np.arange(word_count, 1, -1, dtype=np.uint64)
    draws = np.empty(len(bounds), dtype=np.int64)
    done = 0
    cursor = 0
    while done < len(bounds):
        need = len(bounds) - done
        words = drbg.words32(cursor, need).astype(np.uint64)
        bound = bounds[done:]
        limit = (1 << 32) - (1 << 32) % bound
        rejected = np.flatnonzero(words >= limit)
        take = need if rejected.size == 0 else int(rejected[0])
        draws[done : done + take] = words[:take] % bound[:take]
        done += take
        # a rejected word is consumed and the same draw is retried
        cursor += take + (0 if rejected.size == 0 else 1)

    order = list(range(word_count))
    for i, j in zip(range(word_count - 1, 0, -1), draws.tolist()):
        order[i], order[j] = order[j], order[i]
    perm = np.array(order, dtype=np.int64)
    perm.flags.writeable = False
    return perm


def memory_words(memory: bytes) -> NDArray[np.uint16]:
    """View program memory as little-endian 16-bit words."""
    if len(memory) % WORD_BYTES:
        raise ValueError(f"Memory length {len(memory)} is odd")
    return np.frombuffer(memory, dtype="<u2")


def digest_memory(
    memory: bytes, nonce: Nonce, policy: VerifierPolicy
) -> bytes:
    """Hash `memory` in the traversal order of `nonce`."""
    words = memory_words(memory)
    perm = derive_permutation(nonce, len(words))
    h = hashlib.new(policy.hash_name)
    h.update(policy.prefix(nonce))
    h.update(words[perm].astype("<u2").tobytes())
    return h.digest()


def compute_response(
    img: PackedImage, nonce: Nonce, policy: VerifierPolicy
) -> bytes:
    """Compute the response digest x of `img` for `nonce`.

    ``x = H(prefix || w[p(0)] || w[p(1)] || ...)`` over all 16-bit words
    of program memory, where p is the nonce permutation and prefix is the
    nonce, or the key followed by the nonce in the keyed variant.

    Raises:
        OptionMismatchError: `img` was packed for another option.
    """
    if img.option != policy.option:
        raise OptionMismatchError(
            f"Image packed for option {img.option.value}, policy expects "
            f"{policy.option.value}"
        )
    return digest_memory(img.memory, nonce, policy)


def min_nonce_width(runs: int) -> int:
    """Smallest nonce width in bytes whose space covers `runs` runs."""
    if runs < 0:
        raise ValueError(f"runs must be non-negative: {runs}")
    width = math.ceil(max(runs - 1, 1).bit_length() / 8)
    return max(MIN_NONCE_WIDTH, width)


def nonce_runs(
    lifetime_s: float, interval_s: float, retry_factor: int = 2
) -> int:
    """Protocol runs over a prover lifetime, counting retries."""
    if lifetime_s < 0 or interval_s <= 0:
        raise ValueError("lifetime must be >= 0 and interval > 0")
    return math.ceil(lifetime_s / interval_s) * max(1, retry_factor)


class Verifier:
    """Verifier holding the reference memory, policy and ledger.

    Args:
        reference: Program memory the prover is expected to hold.
        policy: Acceptance rules.
        nonce_key: Key of the nonce permutation.
        ledger: Freshness ledger, a new one by default.
    """

    def __init__(
        self,
        reference: PackedImage,
        policy: VerifierPolicy,
        nonce_key: bytes = b"",
        ledger: FreshnessLedger | None = None,
    ) -> None:
        if reference.option != policy.option:
            raise OptionMismatchError(
                f"Reference packed for option {reference.option.value}, "
                f"policy expects {policy.option.value}"
            )
        self.reference = reference
        self.policy = policy
        self.ledger = ledger if ledger is not None else FreshnessLedger()
        self.nonces = FeistelNonceSource(nonce_key, policy.nonce_width)

    def issue_nonce(self) -> Nonce:
        """Draw a nonce that was never issued before."""
        while True:
            nonce = Nonce(
                value=self.nonces.next_value(), width=self.policy.nonce_width
            )
            if self.ledger.register(nonce):
                return nonce

    def expected(self, nonce: Nonce) -> bytes:
        """Reference digest for `nonce`."""
        return compute_response(self.reference, nonce, self.policy)

    def judge(
        self, nonce: Nonce, x: bytes | None, epsilon_ns: int
    ) -> Verdict:
        """Decide one run from the received digest and elapsed time."""
        if x is None:
            return Verdict.ABORT
        if x != self.expected(nonce):
            return Verdict.REJECT_HASH
        if not within(epsilon_ns, self.policy.threshold):
            return Verdict.REJECT_TIMING
        return Verdict.ACCEPT


class RateDecision(str, enum.Enum):
    """Prover reaction to a challenge."""

    RESPOND = "respond"
    REFUSE = "refuse"


class RateLimiter:
    """At most `n_max` responses per epoch of `epoch` seconds."""

    def __init__(self, epoch: float, n_max: int) -> None:
        if epoch <= 0 or n_max < 0:
            raise ValueError("epoch must be positive and n_max >= 0")
        self.epoch = epoch
        self.n_max = n_max
        self.current_epoch: int | None = None
        self.counter = 0

    def request(self, t: float) -> RateDecision:
        """Decide whether to answer a challenge received at `t`."""
        epoch = math.floor(t / self.epoch)
        if epoch != self.current_epoch:
            self.current_epoch = epoch
            self.counter = 0
        if self.counter >= self.n_max:
            LOG.warning(f"Refusing challenge at t={t:.3f} s in epoch {epoch}")
            return RateDecision.REFUSE
        self.counter += 1
        return RateDecision.RESPOND


def rate_limit(prover: RateLimiter, t: float) -> RateDecision:
    """Apply `prover`'s rate limit to a request at time `t`."""
    return prover.request(t)


class Prover(metaclass=abc.ABCMeta):
    """A device answering attestation challenges.

    Args:
        name: Label of the prover model, written to transcripts.
        profile: Device class the cost model runs on.
        limiter: Optional rate limit on answered challenges.
    """

    def __init__(
        self,
        name: str,
        profile: DeviceProfile,
        limiter: RateLimiter | None = None,
    ) -> None:
        self.name = name
        self.profile = profile
        self.limiter = limiter
        self.last_cost = CostCounters()

    @abc.abstractmethod
    def compute(
        self, nonce: Nonce, policy: VerifierPolicy
    ) -> tuple[bytes, CostCounters]:
        """Return the digest for `nonce` and the work spent on it."""

    def seconds(self, cost: CostCounters) -> float:
        """Time the prover needs for `cost`."""
        return elapsed(cost, self.profile)

    def respond(
        self, nonce: Nonce, policy: VerifierPolicy, clock: SimClock
    ) -> bytes | None:
        """Answer a challenge, advancing `clock` by the work done.

        Returns None when the rate limit refuses the challenge.
        """
        refused = (
            self.limiter is not None
            and rate_limit(self.limiter, clock.now) == RateDecision.REFUSE
        )
        if refused:
            self.last_cost = CostCounters()
            return None
        x, cost = self.compute(nonce, policy)
        clock.advance(self.seconds(cost))
        self.last_cost = cost
        return x


def honest_cost(capacity: int, prefix_bytes: int) -> CostCounters:
    """Work of hashing every program memory byte once."""
    return CostCounters(pm_bytes=capacity, hash_bytes=capacity + prefix_bytes)


def run_attestation(
    verifier: Verifier, prover: Prover, clock: SimClock
) -> AttestationTranscript:
    """Run the protocol once between `verifier` and `prover`.

    The verifier draws a fresh nonce at t0, the prover answers while the
    simulated clock advances, and the verdict is recorded in the ledger.

    Raises:
        NonceExhaustedError: The verifier ran out of fresh nonces.
    """
    nonce = verifier.issue_nonce()
    challenge = Challenge(nonce=nonce, issued_at=clock.now_ns)
    x = prover.respond(nonce, verifier.policy, clock)
    response = Response(x=x, received_at=clock.now_ns)
    epsilon_ns = response.received_at - challenge.issued_at
    verdict = verifier.judge(nonce, response.x, epsilon_ns)
    transcript = AttestationTranscript(
        run_id=len(verifier.ledger.transcripts),
        nonce=nonce,
        x=response.x,
        epsilon=epsilon_ns / NS_PER_S,
        verdict=verdict,
        prover_model=prover.name,
        cost=prover.last_cost,
        repeated_nonce=verifier.ledger.answered(nonce),
    )
    verifier.ledger.record(transcript)
    LOG.debug(
        f"run {transcript.run_id} {prover.name}: nonce={nonce.hex()} "
        f"eps={transcript.epsilon_ms:.3f} ms -> {verdict.value}"
    )
    return transcript
