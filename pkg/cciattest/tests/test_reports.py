from pathlib import Path

import pandas as pd

from cciattest.cache import CacheReport
from cciattest.codecs import CodecId
from cciattest.image import CodeImage
from cciattest.protocol import AttackPlan, AttestationTranscript, Verdict
from cciattest.protocol.attestation import Nonce
from cciattest.reports import (
    REFERENCE_TABLE,
    SWEEP_COLUMNS,
    TRANSCRIPT_COLUMNS,
    cache_frame,
    ratio_frame,
    sweep_frame,
    table1_frame,
    transcript_frame,
    write_csv,
)


def plan(feasible: bool) -> AttackPlan:
    """Plan row of a Huffman/512 image attacked with LZ/2048."""
    return AttackPlan(
        c_h=CodecId.CANONICAL_HUFFMAN,
        s_h=512,
        c_a=CodecId.LZ_GENERAL,
        s_a=2048,
        ci_length=100,
        honest_length=80,
        attacker_length=60,
        total_gain=20,
        blocks_total=1,
        gain_per_block=20.0,
        blocks_needed=3,
        feasible=feasible,
    )


def test_transcript_frame() -> None:
    """Test aborted runs leave the digest empty."""
    transcripts = [
        AttestationTranscript(
            run_id=0,
            nonce=Nonce(value=1),
            x=b"\x01\x02",
            epsilon=0.25,
            verdict=Verdict.ACCEPT,
            prover_model="honest",
        ),
        AttestationTranscript(
            run_id=1,
            nonce=Nonce(value=2),
            x=None,
            epsilon=0.0,
            verdict=Verdict.ABORT,
            prover_model="honest",
        ),
    ]
    frame = transcript_frame(transcripts)
    assert list(frame.columns) == TRANSCRIPT_COLUMNS
    assert frame["x_hex"].tolist() == ["0102", ""]
    assert frame["nonce_hex"][0] == "0100000000000000"
    assert frame["epsilon_ms"][0] == 250.0


def test_sweep_frame() -> None:
    """Test infeasible plans have no block count."""
    frame = sweep_frame([plan(True), plan(False)])
    assert list(frame.columns) == SWEEP_COLUMNS
    assert frame["blocks_needed"][0] == 3
    assert pd.isna(frame["blocks_needed"][1])
    assert sweep_frame([]).empty


def test_ratio_frame(sense_image: CodeImage) -> None:
    """Test one ratio per codec and block size."""
    frame = ratio_frame(sense_image, [CodecId.LZ_GENERAL], [512, 2048])
    assert frame["block_size"].tolist() == [512, 2048]
    assert (frame["ci_bytes"] == 2860).all()
    assert (
        frame["ratio"] == frame["compressed_bytes"] / frame["ci_bytes"]
    ).all()


def test_cache_frame() -> None:
    """Test cache reports map to rows."""
    report = CacheReport(
        block_size=512,
        capacity_blocks=2,
        misses=3,
        hits=4,
        bytes_decompressed=1536,
        modeled_ms=1.5,
    )
    frame = cache_frame([report])
    assert frame.iloc[0].to_dict() == {
        "s_h": 512,
        "capacity": 2,
        "misses": 3,
        "hits": 4,
        "bytes_decompressed": 1536,
        "modeled_ms": 1.5,
    }


def test_table1_frame(sense_image: CodeImage) -> None:
    """Test measured values next to the published ones."""
    frame = table1_frame({"sense": sense_image})
    row = frame.iloc[0]
    assert row["lat_bytes"] == REFERENCE_TABLE["sense"]["lat_bytes"]
    assert row["max_bogus"] >= 0
    assert 0 < row["max_bogus_uncompressed"] < 2860
    assert {f"lat_{c.value}" for c in CodecId} <= set(frame.columns)


def test_write_csv(tmp_path: Path) -> None:
    """Test parent directories are created."""
    fp = write_csv(pd.DataFrame({"a": [1]}), tmp_path / "x" / "a.csv")
    assert fp.read_text() == "a\n1\n"
