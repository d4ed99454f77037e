"""Attestation protocol, retry policy and prover models."""

from cciattest.protocol.adversary import (
    AttackPlan,
    auto_calibrate,
    blocks_needed,
    feasibility_sweep,
    lat_compression_attack,
    memory_overhead,
    plan_attack,
    simulate_compression_attacker,
    simulate_external_memory_attacker,
    total_gain,
)
from cciattest.protocol.attestation import (
    AttestationTranscript,
    Nonce,
    Prover,
    RateLimiter,
    Verdict,
    Verifier,
    VerifierPolicy,
    compute_response,
    derive_permutation,
    rate_limit,
    run_attestation,
)
from cciattest.protocol.provers import (
    CompressionAttacker,
    ExternalMemoryAttacker,
    HonestProver,
    LatCompressor,
    ReplayAttacker,
    TamperedProver,
)
from cciattest.protocol.retry import (
    Decision,
    RetryController,
    attest_until_decided,
    retry_controller,
)

__all__ = [
    "AttackPlan",
    "AttestationTranscript",
    "CompressionAttacker",
    "Decision",
    "ExternalMemoryAttacker",
    "HonestProver",
    "LatCompressor",
    "Nonce",
    "Prover",
    "RateLimiter",
    "ReplayAttacker",
    "RetryController",
    "TamperedProver",
    "Verdict",
    "Verifier",
    "VerifierPolicy",
    "attest_until_decided",
    "auto_calibrate",
    "blocks_needed",
    "compute_response",
    "derive_permutation",
    "feasibility_sweep",
    "lat_compression_attack",
    "memory_overhead",
    "plan_attack",
    "rate_limit",
    "retry_controller",
    "run_attestation",
    "simulate_compression_attacker",
    "simulate_external_memory_attacker",
    "total_gain",
]
