from types import SimpleNamespace

import pytest

from cciattest.codecs import (
    SUPPORTED_BLOCK_SIZES,
    CodecId,
    Lat,
    build_lat,
    compress_blocks,
)
from cciattest.config import DeviceProfile
from cciattest.exceptions import InfeasiblePlanError
from cciattest.image import CodeImage, PackedImage, pack
from cciattest.protocol import (
    AttackPlan,
    CompressionAttacker,
    ExternalMemoryAttacker,
    HonestProver,
    LatCompressor,
    Verdict,
    Verifier,
    VerifierPolicy,
    adversary,
    auto_calibrate,
    blocks_needed,
    feasibility_sweep,
    lat_compression_attack,
    memory_overhead,
    plan_attack,
    compute_response,
    run_attestation,
    simulate_external_memory_attacker,
    total_gain,
)
from cciattest.protocol.adversary import (
    attack_cost,
    external_profile,
    recompressed_segments,
    regenerate_memory,
)
from cciattest.protocol.attestation import Nonce, honest_cost
from cciattest.samples import SAMPLE_SIZES, sample_image
from cciattest.timing import SimClock, elapsed

HUFFMAN = CodecId.CANONICAL_HUFFMAN
LZ = CodecId.LZ_GENERAL


def make_plan(**fields) -> AttackPlan:
    """Plan of a Huffman/512 image attacked with LZ/2048."""
    defaults = {
        "c_h": HUFFMAN,
        "s_h": 512,
        "c_a": LZ,
        "s_a": 2048,
        "ci_length": 100,
        "honest_length": 80,
        "attacker_length": 51,
        "total_gain": 29,
        "blocks_total": 13,
        "gain_per_block": 2.2,
        "blocks_needed": 9,
        "feasible": True,
    }
    return AttackPlan(**{**defaults, **fields})


@pytest.fixture
def stub_lengths(monkeypatch: pytest.MonkeyPatch) -> None:
    """Honest Huffman images of 20000 bytes, LZ images of 17000 bytes."""

    def compressed(data: bytes, codec: CodecId, s: int) -> SimpleNamespace:
        length = 20000 if codec == HUFFMAN else 17000
        return SimpleNamespace(
            compressed_length=length, block_count=13, stream=b""
        )

    monkeypatch.setattr(adversary, "_compressed", compressed)


@pytest.fixture(scope="module")
def oscilloscope_packed(oscilloscope_image: CodeImage) -> PackedImage:
    """Largest sample packed with Huffman blocks of 512 bytes."""
    return pack(oscilloscope_image, HUFFMAN, 512)


class TestPlanning:
    """Test the analytic attack planning."""

    @pytest.mark.usefixtures("stub_lengths")
    def test_total_gain(self, oscilloscope_image: CodeImage) -> None:
        """Test the gain is the difference of compressed lengths."""
        assert total_gain(oscilloscope_image, HUFFMAN, 512, LZ, 2048) == 3000

    @pytest.mark.parametrize(
        ("payload", "gain", "expected"),
        [
            (1024, 100.0, 11),
            (1024, 1024.0, 1),
            (1707, 230.0, 8),
            (0, 0.0, 0),
            (-5, 10.0, 0),
            (10, 0.0, None),
            (10, -3.0, None),
        ],
    )
    def test_blocks_needed(
        self, payload: int, gain: float, expected: int | None
    ) -> None:
        """Test the ceiling and the degenerate cases."""
        assert blocks_needed(payload, gain) == expected

    def test_memory_overhead(self) -> None:
        """Test reads of about s_a compressed blocks per block."""
        assert memory_overhead(make_plan()) == pytest.approx(
            9 * 2048 * 0.51 * 2048
        )

    def test_identical_pipeline_has_no_overhead(self) -> None:
        """Test an attacker repeating the honest pipeline."""
        plan = make_plan(c_a=HUFFMAN, s_a=512, feasible=False)
        assert plan.identical
        assert memory_overhead(plan) == 0.0

    def test_infeasible_overhead(self) -> None:
        """Test overhead of a plan freeing too little memory."""
        with pytest.raises(InfeasiblePlanError):
            memory_overhead(make_plan(feasible=False, blocks_needed=None))

    @pytest.mark.usefixtures("stub_lengths")
    def test_plan_attack(
        self, oscilloscope_image: CodeImage, slow_node: DeviceProfile
    ) -> None:
        """Test the estimated attestation time of a feasible plan."""
        plan = plan_attack(
            oscilloscope_image, HUFFMAN, 512, LZ, 2048, slow_node
        )
        assert plan.total_gain == 3000
        assert plan.blocks_needed == 5
        assert plan.feasible
        overhead = 5 * 2048 * (17000 / 25906) * 2048
        assert plan.memory_overhead_bytes == pytest.approx(overhead)
        honest = (131072 + 131072 + 8) / 1e6
        assert plan.est_attest_seconds == pytest.approx(
            honest + overhead / 1e6
        )
        assert plan.detectable

    @pytest.mark.usefixtures("stub_lengths")
    def test_plan_not_enough_blocks(
        self, oscilloscope_image: CodeImage, slow_node: DeviceProfile
    ) -> None:
        """Test payloads beyond the total gain are infeasible."""
        plan = plan_attack(
            oscilloscope_image, HUFFMAN, 512, LZ, 2048, slow_node, 5000
        )
        assert plan.blocks_needed == 22
        assert not plan.feasible
        assert not plan.detectable
        assert plan.memory_overhead_bytes == 0.0

    def test_identical_plan_infeasible(
        self, sense_image: CodeImage, slow_node: DeviceProfile
    ) -> None:
        """Test recompressing with the honest pipeline frees nothing."""
        plan = plan_attack(sense_image, LZ, 512, LZ, 512, slow_node)
        assert plan.total_gain == 0
        assert plan.blocks_needed is None
        assert not plan.feasible

    def test_sweep(
        self, sense_image: CodeImage, slow_node: DeviceProfile
    ) -> None:
        """Test one plan per combination and the detection rule."""
        plans = feasibility_sweep(
            sense_image,
            HUFFMAN,
            [256, 512],
            [LZ, HUFFMAN],
            [1024, 2048],
            slow_node,
            payload=64,
            threshold=0.3,
        )
        assert len(plans) == 8
        for plan in plans:
            assert plan.detectable == (
                plan.feasible and plan.est_attest_seconds > 0.3
            )
        assert feasibility_sweep(
            sense_image, HUFFMAN, [512], [], [2048], slow_node
        ) == []


class TestCompressionAttacker:
    """Test the simulated compression attacker."""

    @pytest.mark.parametrize("mode", ["plain", "layered"])
    def test_regenerated_memory(
        self, small_packed: PackedImage, mode: str
    ) -> None:
        """Test the attacker rebuilds the honest memory exactly."""
        plan = make_plan(mode=mode)
        assert regenerate_memory(small_packed, plan) == small_packed.memory

    @pytest.mark.parametrize("mode", ["plain", "layered"])
    def test_correct_digest_slower(
        self,
        small_packed: PackedImage,
        small_policy: VerifierPolicy,
        slow_node: DeviceProfile,
        sense_image: CodeImage,
        mode: str,
    ) -> None:
        """Test the digest matches but full recompression is too slow."""
        plan = plan_attack(
            sense_image, HUFFMAN, 512, LZ, 2048, slow_node, 0, mode=mode
        )
        verifier = Verifier(small_packed, small_policy)
        prover = CompressionAttacker(small_packed, slow_node, plan, full=True)
        transcript = run_attestation(verifier, prover, SimClock())
        assert transcript.x == verifier.expected(transcript.nonce)
        assert transcript.verdict == Verdict.REJECT_TIMING

    @pytest.mark.parametrize("s_a", [512, 1024, 2048])
    def test_full_recompression_reads(
        self,
        oscilloscope_packed: PackedImage,
        oscilloscope_image: CodeImage,
        slow_node: DeviceProfile,
        s_a: int,
    ) -> None:
        """Test reads of about s_a times the attacker image size."""
        plan = plan_attack(
            oscilloscope_image, HUFFMAN, 512, LZ, s_a, slow_node, 0
        )
        segments = recompressed_segments(oscilloscope_packed, plan, True)
        reads = sum(s.length * s.reads_per_byte for s in segments)
        ratio = reads / (plan.s_a * plan.attacker_length)
        assert 0.5 <= ratio <= 2.0
        covered = sum(s.length for s in segments)
        cost = attack_cost(oscilloscope_packed, plan, 8, full=True)
        assert cost.pm_bytes == 131072 - covered + reads
        assert cost.hash_bytes == 131072 + 8

    def test_end_to_end_rejection(
        self,
        oscilloscope_packed: PackedImage,
        oscilloscope_image: CodeImage,
        slow_node: DeviceProfile,
    ) -> None:
        """Test calibrated thresholds accept honest and reject attacks."""
        t_em, t_pm = auto_calibrate(oscilloscope_packed, slow_node)
        verifier = Verifier(
            oscilloscope_packed, VerifierPolicy(t_em=t_em, t_pm=t_pm)
        )
        plan = plan_attack(
            oscilloscope_image, HUFFMAN, 512, LZ, 2048, slow_node, 0
        )
        provers = [
            HonestProver(oscilloscope_packed, slow_node),
            ExternalMemoryAttacker(oscilloscope_packed, slow_node),
            CompressionAttacker(
                oscilloscope_packed, slow_node, plan, full=True
            ),
        ]
        clock = SimClock()
        verdicts = [
            run_attestation(verifier, p, clock).verdict for p in provers
        ]
        assert verdicts == [
            Verdict.ACCEPT,
            Verdict.REJECT_TIMING,
            Verdict.REJECT_TIMING,
        ]

    def test_cache_never_costs_more(
        self,
        small_packed: PackedImage,
        small_policy: VerifierPolicy,
        slow_node: DeviceProfile,
        sense_image: CodeImage,
    ) -> None:
        """Test a larger attacker cache reads no more memory."""
        plan = plan_attack(sense_image, HUFFMAN, 512, LZ, 2048, slow_node, 0)
        nonce = Nonce(value=99)
        reads = [
            adversary.simulate_compression_attacker(
                small_packed,
                plan,
                nonce,
                small_policy,
                cached=True,
                cache_blocks=k,
                full=True,
            )[1].pm_bytes
            for k in (1, 2, 4)
        ]
        assert reads == sorted(reads, reverse=True)

    def test_infeasible_plan(
        self,
        small_packed: PackedImage,
        small_policy: VerifierPolicy,
        slow_node: DeviceProfile,
    ) -> None:
        """Test an infeasible plan cannot be simulated."""
        plan = make_plan(feasible=False, blocks_needed=None)
        with pytest.raises(InfeasiblePlanError):
            adversary.simulate_compression_attacker(
                small_packed, plan, Nonce(value=1), small_policy
            )

    def test_mismatched_plan(self, small_packed: PackedImage) -> None:
        """Test plans written for another honest pipeline."""
        with pytest.raises(ValueError, match="Plan targets"):
            recompressed_segments(small_packed, make_plan(s_h=1024))

    def test_empty_payload(self, small_packed: PackedImage) -> None:
        """Test nothing is recompressed without bogus code."""
        plan = make_plan(bogus_payload_bytes=0)
        assert recompressed_segments(small_packed, plan) == []
        cost = attack_cost(small_packed, plan, 8)
        assert cost == honest_cost(8192, 8)


class TestOtherAttackers:
    """Test external memory and LAT attackers."""

    def test_external_memory(
        self,
        small_verifier: Verifier,
        small_packed: PackedImage,
        slow_node: DeviceProfile,
    ) -> None:
        """Test external memory answers correctly but late."""
        prover = ExternalMemoryAttacker(small_packed, slow_node)
        transcript = run_attestation(small_verifier, prover, SimClock())
        assert transcript.x == small_verifier.expected(transcript.nonce)
        assert transcript.verdict == Verdict.REJECT_TIMING
        assert transcript.cost.em_bytes == 8192

    def test_external_bandwidth(
        self, small_packed: PackedImage, slow_node: DeviceProfile
    ) -> None:
        """Test every word is read at the external memory rate."""
        policy = VerifierPolicy(t_em=1.0, t_pm=2.0)
        nonce = Nonce(value=9)
        x, cost, profile = simulate_external_memory_attacker(
            small_packed, 2e5, nonce, policy, slow_node
        )
        assert x == compute_response(small_packed, nonce, policy)
        assert profile.em_read_bw == 2e5
        assert (cost.em_bytes, cost.pm_bytes) == (8192, 0)
        honest = elapsed(honest_cost(8192, 8), slow_node)
        assert elapsed(cost, profile) > honest
        assert elapsed(cost, profile) > elapsed(cost, slow_node)

    def test_external_profile(self, slow_node: DeviceProfile) -> None:
        """Test the external bandwidth override."""
        assert external_profile(slow_node, None) is slow_node
        assert external_profile(slow_node, 1e3).em_read_bw == 1e3
        with pytest.raises(ValueError, match="ext_bandwidth"):
            external_profile(slow_node, 0.0)

    def test_lat_gain(self, sense_image: CodeImage) -> None:
        """Test the LAT gain is never negative."""
        lat = build_lat(compress_blocks(sense_image.data, HUFFMAN, 512))
        for codec in CodecId:
            report = lat_compression_attack(lat, codec)
            assert report.lat_bytes == 18
            assert report.gain == max(0, 18 - report.compressed_bytes)

    def test_lat_gain_empty(self) -> None:
        """Test an empty table frees nothing."""
        report = lat_compression_attack(Lat(entries=()), LZ)
        assert (report.lat_bytes, report.gain) == (0, 0)

    def test_lat_compressor(
        self,
        small_verifier: Verifier,
        small_packed: PackedImage,
        slow_node: DeviceProfile,
    ) -> None:
        """Test the compressed LAT keeps the digest and costs reads."""
        prover = LatCompressor(small_packed, slow_node)
        transcript = run_attestation(small_verifier, prover, SimClock())
        assert transcript.x == small_verifier.expected(transcript.nonce)
        honest = honest_cost(8192, 8)
        assert transcript.cost.pm_bytes > honest.pm_bytes
        assert elapsed(transcript.cost, slow_node) > elapsed(
            honest, slow_node
        )


class TestCalibratedDetection:
    """Test calibrated thresholds against every feasible attack."""

    @pytest.mark.parametrize("s_h", [512, 1024, 2048])
    @pytest.mark.parametrize("c_h", [HUFFMAN, LZ])
    @pytest.mark.parametrize("sample", list(SAMPLE_SIZES))
    def test_feasible_plans_rejected(
        self, sample: str, c_h: CodecId, s_h: int, slow_node: DeviceProfile
    ) -> None:
        """Test every feasible recompression misses the threshold."""
        ci = sample_image(sample)
        packed = pack(ci, c_h, s_h)
        t_em, t_pm = auto_calibrate(packed, slow_node)
        verifier = Verifier(packed, VerifierPolicy(t_em=t_em, t_pm=t_pm))
        plans = feasibility_sweep(
            ci,
            c_h,
            [s_h],
            list(CodecId),
            list(SUPPORTED_BLOCK_SIZES),
            slow_node,
        )
        clock = SimClock()
        for plan in (p for p in plans if p.feasible):
            prover = CompressionAttacker(packed, slow_node, plan)
            transcript = run_attestation(verifier, prover, clock)
            assert transcript.verdict == Verdict.REJECT_TIMING, (
                f"{plan.c_a.value}/{plan.s_a} accepted"
            )

    def test_honest_accepted_at_default_capacity(
        self, sense_image: CodeImage, slow_node: DeviceProfile
    ) -> None:
        """Test 1000 honest runs pass over a full program memory."""
        packed = pack(sense_image, HUFFMAN, 512)
        assert packed.layout.capacity == 131072
        t_em, t_pm = auto_calibrate(packed, slow_node)
        verifier = Verifier(packed, VerifierPolicy(t_em=t_em, t_pm=t_pm))
        prover = HonestProver(packed, slow_node)
        clock = SimClock()
        verdicts = {
            run_attestation(verifier, prover, clock).verdict
            for _ in range(1000)
        }
        assert verdicts == {Verdict.ACCEPT}
