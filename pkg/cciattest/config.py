"""Configuration."""

import enum
import json
from pathlib import Path
from typing import Any, Literal, TypeVar

import yaml
from pydantic import BaseModel as RawBaseModel
from pydantic import ConfigDict, Field, ValidationError, model_validator

from cciattest.codecs import SUPPORTED_BLOCK_SIZES, CodecId
from cciattest.exceptions import ConfigError

KEY_VALUE_SUFFIXES = (".conf", ".cfg", ".txt", ".kv")
DEFAULT_CAPACITY = 131072
DEFAULT_SEED = "00" * 8
MIN_NONCE_WIDTH = 4

T = TypeVar("T", bound="BaseModel")


def parse_key_value(text: str) -> dict[str, Any]:
    """Parse the line-oriented ``key=value`` format.

    Blank lines and ``#`` comments are skipped. Dotted keys build nested
    mappings and comma separated values become lists.

    Args:
        text: Content of the file.

    Returns:
        Nested dictionary of string values.
    """
    result: dict[str, Any] = {}
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value: {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        *parents, leaf = key.split(".")
        node = result
        for parent in parents:
            node = node.setdefault(parent, {})
            if not isinstance(node, dict):
                raise ConfigError(f"line {lineno}: {key} redefines a value")
        if "," in value:
            node[leaf] = [v.strip() for v in value.split(",") if v.strip()]
        else:
            node[leaf] = value
    return result


class BaseModel(RawBaseModel):
    """Base model for all configurations."""

    model_config = ConfigDict(extra="forbid")

    @classmethod
    def from_fp(cls: type[T], fp: Path) -> T:
        """Load config from json, yaml or key=value files."""
        fp = Path(fp)
        if fp.suffix == ".json":
            data = json.loads(fp.read_text())
        elif fp.suffix in (".yaml", ".yml"):
            data = yaml.safe_load(fp.read_text())
        elif fp.suffix in KEY_VALUE_SUFFIXES:
            data = parse_key_value(fp.read_text())
        else:
            raise ValueError(f"File extension not supported: {fp.suffix}")
        try:
            return cls(**(data or {}))
        except ValidationError as e:
            raise ConfigError(f"Invalid config {fp}: {e}") from e


class ProtocolOption(str, enum.Enum):
    """Program memory layouts of the attestation protocol.

    Option 1 attests the compressed image and fill only, option 2a adds a
    static dictionary and option 2b adds a line address table.
    """

    BASIC = "1"
    DICTIONARY = "2a"
    LAT = "2b"


class DeviceProfile(BaseModel):
    """Throughputs of a prover device class, in bytes per second."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    name: str
    pm_read_bw: float = Field(..., description="program memory read")
    em_read_bw: float = Field(..., description="external memory read")
    hash_bw: float = Field(..., description="defaults to pm_read_bw")
    decomp_bw: dict[CodecId, float] = Field(default_factory=dict)

    @model_validator(mode="before")
    @classmethod
    def default_hash_bw(cls, data: Any) -> Any:
        """Use the program memory bandwidth when no hash figure is given."""
        if isinstance(data, dict) and data.get("hash_bw") is None:
            data = {**data, "hash_bw": data.get("pm_read_bw")}
        return data

    def model_post_init(self, __context: Any) -> None:
        """Post-initialization validation."""
        rates = {
            "pm_read_bw": self.pm_read_bw,
            "em_read_bw": self.em_read_bw,
            "hash_bw": self.hash_bw,
            **{f"decomp_bw.{k.value}": v for k, v in self.decomp_bw.items()},
        }
        for key, rate in rates.items():
            if rate <= 0:
                raise ValueError(f"{key} must be positive: {rate}")


def _scaled_profile(name: str, pm_read_bw: float) -> DeviceProfile:
    # em is 4x slower than pm; decompression rates per codec family
    scale = pm_read_bw / 1e6
    return DeviceProfile(
        name=name,
        pm_read_bw=pm_read_bw,
        em_read_bw=pm_read_bw / 4,
        hash_bw=pm_read_bw,
        decomp_bw={
            CodecId.CANONICAL_HUFFMAN: 0.5e6 * scale,
            CodecId.STATIC_DICTIONARY: 2e6 * scale,
            CodecId.LZ_GENERAL: 1e6 * scale,
        },
    )


PROFILES: dict[str, DeviceProfile] = {
    "slow-node": _scaled_profile("slow-node", 1e6),
    "fast-node": _scaled_profile("fast-node", 50e6),
}


def get_profile(name: str, fp: Path | None = None) -> DeviceProfile:
    """Return a built-in profile or load one from `fp`."""
    if fp is not None:
        return DeviceProfile.from_fp(fp)
    if name not in PROFILES:
        raise ConfigError(
            f"Unknown profile: {name}, expected one of {list(PROFILES)}"
        )
    return PROFILES[name]


class ExperimentConfig(BaseModel):
    """Configuration of a command line experiment."""

    image: Path | None = None
    image_format: Literal["raw", "intel-hex"] | None = None
    codec: CodecId = CodecId.CANONICAL_HUFFMAN
    block_size: int = 512
    block_sizes: list[int] = Field(
        default_factory=lambda: list(SUPPORTED_BLOCK_SIZES),
        description="honest block sizes of sweep and ratio reports",
    )
    capacity: int = DEFAULT_CAPACITY
    option: ProtocolOption = ProtocolOption.LAT
    profile: str = "slow-node"
    profile_fp: Path | None = None
    t_em: float | None = None
    t_pm: float | None = None
    auto_calibrate: bool = True
    margin: float = 1.5
    attacker: str = "honest"
    attacker_codecs: list[CodecId] = Field(
        default_factory=lambda: list(CodecId)
    )
    attacker_block_sizes: list[int] = Field(
        default_factory=lambda: list(SUPPORTED_BLOCK_SIZES)
    )
    attacker_codec: CodecId = CodecId.LZ_GENERAL
    attacker_block_size: int = 2048
    recompression: Literal["plain", "layered"] = "plain"
    cached_attacker: bool = False
    ext_bandwidth: float | None = None
    bogus_payload: int = 1024
    detect_threshold: float = 5.0
    runs: int = 10
    seed: str = DEFAULT_SEED
    nonce_width: int = 8
    key: str | None = None
    hash_name: str = "sha256"
    jitter: float = 0.0
    rate_limit: int | None = None
    epoch: float = 3600.0
    out: Path = Path("out")

    @model_validator(mode="before")
    @classmethod
    def listify(cls, data: Any) -> Any:
        """Accept a single value where the key=value format gives no list."""
        if not isinstance(data, dict):
            return data
        data = dict(data)
        for key in ("block_sizes", "attacker_codecs", "attacker_block_sizes"):
            if isinstance(data.get(key), str):
                value = data[key].strip()
                data[key] = [value] if value else []
        return data

    def model_post_init(self, __context: Any) -> None:
        """Post-initialization validation."""
        for s in (
            self.block_size,
            *self.block_sizes,
            *self.attacker_block_sizes,
        ):
            if s not in SUPPORTED_BLOCK_SIZES:
                raise ValueError(
                    f"Block size {s} not in {SUPPORTED_BLOCK_SIZES}"
                )
        if self.profile_fp is None and self.profile not in PROFILES:
            raise ValueError(f"Unknown profile: {self.profile}")
        if self.nonce_width < MIN_NONCE_WIDTH:
            raise ValueError(
                f"nonce_width must be at least {MIN_NONCE_WIDTH} bytes"
            )
        if (
            self.t_em is not None
            and self.t_pm is not None
            and self.t_pm <= self.t_em
        ):
            raise ValueError(f"t_pm {self.t_pm} must exceed t_em {self.t_em}")
        if not self.auto_calibrate and None in (self.t_em, self.t_pm):
            raise ValueError("t_em and t_pm are required without calibration")
        if self.capacity <= 0 or self.capacity % 2:
            raise ValueError(
                f"capacity must be even and positive: {self.capacity}"
            )
        if len(self.seed_bytes) != 8:
            raise ValueError(f"seed must be 8 bytes of hex: {self.seed}")
        if self.key is not None and len(self.key_bytes or b"") != 16:
            raise ValueError("key must be 16 bytes of hex")

    @property
    def seed_bytes(self) -> bytes:
        """Seed as bytes."""
        return bytes.fromhex(self.seed)

    @property
    def key_bytes(self) -> bytes | None:
        """Key of the keyed response variant, if any."""
        return None if self.key is None else bytes.fromhex(self.key)

    def get_profile(self) -> DeviceProfile:
        """Return the configured device profile."""
        return get_profile(self.profile, self.profile_fp)
