"""Command line front end of the attestation simulator."""

import argparse
import logging
import sys
from collections.abc import Callable
from pathlib import Path
from typing import Any, NoReturn

from cciattest.cache import looped_trace, run_trace
from cciattest.codecs import CodecId, build_lat, compress_blocks
from cciattest.config import ExperimentConfig
from cciattest.exceptions import (
    AttestationSimError,
    CalibrationError,
    CapacityExceededError,
    ConfigError,
    InfeasiblePlanError,
)
from cciattest.image import CodeImage, PackedImage, pack
from cciattest.loader import load_code_image
from cciattest.protocol import (
    CompressionAttacker,
    ExternalMemoryAttacker,
    HonestProver,
    LatCompressor,
    Prover,
    RateLimiter,
    ReplayAttacker,
    TamperedProver,
    Verifier,
    VerifierPolicy,
    auto_calibrate,
    feasibility_sweep,
    plan_attack,
    run_attestation,
)
from cciattest.reports import (
    cache_frame,
    ratio_frame,
    sweep_frame,
    table1_frame,
    transcript_frame,
    write_csv,
)
from cciattest.samples import SAMPLE_SIZES, sample_image
from cciattest.timing import SimClock

LOG = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s [%(levelname)8s] %(message)s"
LOG_DATE_FORMAT = "%Y-%m-%dT%H:%M:%S"
DEFAULT_SAMPLE = "multi-hop-oscilloscope"
CACHE_CAPACITIES = (1, 2, 4, 8)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INFEASIBLE = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    """Merge the config file with the command line overrides."""
    base = {} if args.config is None else _config_fields(args.config)
    overrides = {
        "image": args.image,
        "codec": args.codec,
        "block_size": args.block_size,
        "capacity": args.capacity,
        "profile": args.profile,
        "attacker": args.attacker,
        "runs": args.runs,
        "seed": args.seed,
        "out": args.out,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig(**base)
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _config_fields(fp: Path) -> dict[str, Any]:
    config = ExperimentConfig.from_fp(fp)
    return config.model_dump(exclude_unset=True)


def code_image(config: ExperimentConfig, sample: str | None) -> CodeImage:
    """Load the configured image or a bundled sample."""
    if config.image is not None:
        return load_code_image(config.image, config.image_format)
    return sample_image(sample or DEFAULT_SAMPLE)


def pack_image(config: ExperimentConfig, ci: CodeImage) -> PackedImage:
    """Pack `ci` with the configured codec, block size and option."""
    return pack(
        ci,
        config.codec,
        config.block_size,
        capacity=config.capacity,
        prw_seed=config.seed_bytes,
        option=config.option,
    )


def make_policy(
    config: ExperimentConfig, packed: PackedImage
) -> VerifierPolicy:
    """Verifier policy with given or calibrated thresholds."""
    profile = config.get_profile()
    t_em, t_pm = config.t_em, config.t_pm
    if t_em is None or t_pm is None:
        prefix = len(config.key_bytes or b"") + config.nonce_width
        t_em, t_pm = auto_calibrate(
            packed,
            profile,
            prefix_bytes=prefix,
            ext_bandwidth=config.ext_bandwidth,
            margin=config.margin,
        )
    return VerifierPolicy(
        t_em=t_em,
        t_pm=t_pm,
        option=config.option,
        key=config.key,
        hash_name=config.hash_name,
        nonce_width=config.nonce_width,
    )


def make_prover(
    config: ExperimentConfig, packed: PackedImage, ci: CodeImage
) -> Prover:
    """Build the configured prover model."""
    profile = config.get_profile()
    name = config.attacker
    if name == "honest":
        limiter = None
        if config.rate_limit is not None:
            limiter = RateLimiter(config.epoch, config.rate_limit)
        return HonestProver(packed, profile, limiter)
    if name == "tampered":
        return TamperedProver(packed, profile, bogus=b"\xaa" * 64)
    if name == "external-memory":
        return ExternalMemoryAttacker(packed, profile, config.ext_bandwidth)
    if name == "compression":
        plan = plan_attack(
            ci,
            config.codec,
            config.block_size,
            config.attacker_codec,
            config.attacker_block_size,
            profile,
            payload=config.bogus_payload,
            threshold=config.detect_threshold,
            mode=config.recompression,
            capacity=config.capacity,
        )
        if not plan.feasible:
            raise InfeasiblePlanError(
                f"{plan.c_a.value}/{plan.s_a} cannot hide "
                f"{plan.bogus_payload_bytes} bytes"
            )
        return CompressionAttacker(
            packed, profile, plan, cached=config.cached_attacker
        )
    if name == "replay":
        return ReplayAttacker(profile)
    if name == "lat-compressor":
        return LatCompressor(packed, profile, config.attacker_codec)
    raise ConfigError(f"Unknown attacker: {name}")


def cmd_pack(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """Write the packed memory image and its manifest."""
    ci = code_image(config, args.sample)
    packed = pack_image(config, ci)
    config.out.mkdir(parents=True, exist_ok=True)
    memory_fp = config.out / f"{ci.name}.bin"
    manifest_fp = config.out / f"{ci.name}.manifest"
    memory_fp.write_bytes(packed.memory)
    manifest_fp.write_text(packed.manifest.to_text())
    print(f"{memory_fp}\n{manifest_fp}")
    return EXIT_OK


def cmd_attest(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """Run the protocol `runs` times and write the transcripts."""
    ci = code_image(config, args.sample)
    packed = pack_image(config, ci)
    policy = make_policy(config, packed)
    verifier = Verifier(packed, policy, nonce_key=config.seed_bytes)
    prover = make_prover(config, packed, ci)
    clock = SimClock(
        jitter=config.jitter, seed=int.from_bytes(config.seed_bytes, "little")
    )
    transcripts = [
        run_attestation(verifier, prover, clock) for _ in range(config.runs)
    ]
    frame = transcript_frame(transcripts)
    write_csv(frame, config.out / "transcripts.csv")
    counts = frame["verdict"].value_counts().to_dict()
    LOG.info(f"{prover.name}: {counts}")
    print(frame.to_string(index=False))
    return EXIT_OK


def cmd_plan(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """Evaluate one attacker pipeline."""
    ci = code_image(config, args.sample)
    plan = plan_attack(
        ci,
        config.codec,
        config.block_size,
        config.attacker_codec,
        config.attacker_block_size,
        config.get_profile(),
        payload=config.bogus_payload,
        threshold=config.detect_threshold,
        mode=config.recompression,
        capacity=config.capacity,
    )
    config.out.mkdir(parents=True, exist_ok=True)
    (config.out / "plan.json").write_text(plan.model_dump_json(indent=2))
    print(plan.model_dump_json(indent=2))
    if not plan.feasible:
        raise InfeasiblePlanError(
            f"{plan.c_a.value}/{plan.s_a} cannot hide "
            f"{plan.bogus_payload_bytes} bytes"
        )
    return EXIT_OK


def cmd_sweep(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """Write the feasibility matrix and the block size ratio report."""
    ci = code_image(config, args.sample)
    plans = feasibility_sweep(
        ci,
        config.codec,
        config.block_sizes,
        config.attacker_codecs,
        config.attacker_block_sizes,
        config.get_profile(),
        payload=config.bogus_payload,
        threshold=config.detect_threshold,
        capacity=config.capacity,
    )
    write_csv(sweep_frame(plans), config.out / "sweep.csv")
    write_csv(
        ratio_frame(ci, list(CodecId), config.block_sizes),
        config.out / "ratios.csv",
    )
    return EXIT_OK


def cmd_cache(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """Replay a looped trace through caches of several sizes."""
    ci = code_image(config, args.sample)
    profile = config.get_profile()
    trace = looped_trace(len(ci))
    reports = []
    for s in config.block_sizes:
        img = compress_blocks(ci.data, config.codec, s)
        lat = build_lat(img)
        reports.extend(
            run_trace(trace, capacity, img, lat, profile)
            for capacity in CACHE_CAPACITIES
        )
    write_csv(cache_frame(reports), config.out / "cache.csv")
    return EXIT_OK


def cmd_table1(config: ExperimentConfig, args: argparse.Namespace) -> int:
    """Report the maximum bogus code size per image."""
    if config.image is not None or args.sample is not None:
        ci = code_image(config, args.sample)
        images = {ci.name: ci}
    else:
        images = {name: sample_image(name) for name in SAMPLE_SIZES}
    frame = table1_frame(images, config.codec, config.block_size)
    write_csv(frame, config.out / "table1.csv")
    print(frame.to_string(index=False))
    return EXIT_OK


COMMANDS: dict[
    str, Callable[[ExperimentConfig, argparse.Namespace], int]
] = {
    "pack": cmd_pack,
    "attest": cmd_attest,
    "plan": cmd_plan,
    "sweep": cmd_sweep,
    "cache": cmd_cache,
    "table1": cmd_table1,
}


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one sub-command per experiment."""
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="Config file")
    common.add_argument("--image", type=Path, help="Raw or Intel HEX image")
    common.add_argument(
        "--sample", choices=list(SAMPLE_SIZES), help="Bundled sample image"
    )
    common.add_argument("--codec", help="Honest codec id")
    common.add_argument("--block-size", type=int, help="Honest block size")
    common.add_argument("--capacity", type=int, help="Program memory bytes")
    common.add_argument("--profile", help="Device profile name")
    common.add_argument("--attacker", help="Prover model")
    common.add_argument("--runs", type=int, help="Protocol runs")
    common.add_argument("--seed", help="8 byte hex seed")
    common.add_argument("--out", type=Path, help="Output directory")
    common.add_argument(
        "-v", "--verbose", action="store_true", help="Debug logging"
    )

    parser = _Parser(prog="cciattest", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, command in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=command.__doc__)
    return parser


def main(argv: list[str] | None = None) -> int:
    """Parse arguments, run the command and return the exit status."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format=LOG_FORMAT,
        datefmt=LOG_DATE_FORMAT,
    )
    try:
        config = load_config(args)
        return COMMANDS[args.command](config, args)
    except (InfeasiblePlanError, CalibrationError, CapacityExceededError) as e:
        LOG.error(str(e))
        return EXIT_INFEASIBLE
    except (AttestationSimError, FileNotFoundError, ValueError) as e:
        LOG.error(str(e))
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
