"""Retry and abort policy of the verifier."""

import enum
import logging
from collections.abc import Iterable

from cciattest.protocol.attestation import (
    AttestationTranscript,
    Nonce,
    Prover,
    Verdict,
    Verifier,
    run_attestation,
)
from cciattest.timing import SimClock

LOG = logging.getLogger(__name__)


class Decision(str, enum.Enum):
    """Verifier decision over a series of runs."""

    TRUSTED = "trusted"
    COMPROMISED = "compromised"
    UNDECIDED = "undecided"


class RetryController:
    """Turn a stream of verdicts into a decision.

    A timing rejection may be a false negative, so it earns a retry. The
    retry budget is `retry_factor` times the hash mismatches seen so far,
    never less than one retry. The prover is compromised after
    `max_mismatches` hash mismatches under distinct nonces, after an
    abort, or when the budget is used up.

    Args:
        retry_factor: Retries granted per hash mismatch.
        max_mismatches: Hash mismatches that end the protocol.
    """

    def __init__(
        self, retry_factor: int = 2, max_mismatches: int = 2
    ) -> None:
        self.retry_factor = retry_factor
        self.max_mismatches = max_mismatches
        self.runs = 0
        self.mismatch_nonces: set[Nonce | int] = set()
        self.decision = Decision.UNDECIDED

    @property
    def mismatches(self) -> int:
        """Hash mismatches under distinct nonces."""
        return len(self.mismatch_nonces)

    @property
    def budget(self) -> int:
        """Retries allowed after the first run."""
        return max(1, self.retry_factor * self.mismatches)

    def observe(
        self, verdict: Verdict, nonce: Nonce | None = None
    ) -> Decision:
        """Feed one verdict and return the current decision."""
        if self.decision != Decision.UNDECIDED:
            return self.decision
        self.runs += 1
        if verdict == Verdict.ACCEPT:
            self.decision = Decision.TRUSTED
        elif verdict == Verdict.ABORT:
            self.decision = Decision.COMPROMISED
        else:
            if verdict == Verdict.REJECT_HASH:
                self.mismatch_nonces.add(
                    nonce if nonce is not None else self.runs
                )
            if self.mismatches >= self.max_mismatches:
                self.decision = Decision.COMPROMISED
            elif self.runs - 1 >= self.budget:
                self.decision = Decision.COMPROMISED
        LOG.debug(
            f"run {self.runs}: {verdict.value} -> {self.decision.value} "
            f"(mismatches={self.mismatches}, budget={self.budget})"
        )
        return self.decision


def retry_controller(
    outcomes: Iterable[Verdict],
    retry_factor: int = 2,
    max_mismatches: int = 2,
) -> Decision:
    """Decide from a sequence of verdicts.

    Verdicts after the decision are ignored; a sequence that ends before
    a decision yields `Decision.UNDECIDED`.
    """
    controller = RetryController(retry_factor, max_mismatches)
    for verdict in outcomes:
        if controller.observe(Verdict(verdict)) != Decision.UNDECIDED:
            break
    return controller.decision


def attest_until_decided(
    verifier: Verifier,
    prover: Prover,
    clock: SimClock,
    max_runs: int = 16,
) -> tuple[Decision, list[AttestationTranscript]]:
    """Repeat the protocol until the retry policy reaches a decision.

    Args:
        verifier: Verifier issuing challenges.
        prover: Prover under test.
        clock: Simulated clock shared by both parties.
        max_runs: Upper bound of runs; the decision stays undecided if
            it is reached.

    Returns:
        The decision and the transcripts of every run.
    """
    controller = RetryController(
        verifier.policy.retry_factor, verifier.policy.max_mismatches
    )
    transcripts: list[AttestationTranscript] = []
    while len(transcripts) < max_runs:
        transcript = run_attestation(verifier, prover, clock)
        transcripts.append(transcript)
        decision = controller.observe(transcript.verdict, transcript.nonce)
        if decision != Decision.UNDECIDED:
            break
    LOG.info(
        f"{prover.name}: {controller.decision.value} after "
        f"{len(transcripts)} runs"
    )
    return controller.decision, transcripts
