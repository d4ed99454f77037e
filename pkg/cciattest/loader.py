"""Loaders of code images and address traces."""

import logging
from collections.abc import Iterable
from pathlib import Path
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from cciattest.exceptions import ImageFormatError
from cciattest.image import CodeImage

LOG = logging.getLogger(__name__)

ImageFormat = Literal["raw", "intel-hex"]

DATA = 0x00
EOF = 0x01
EXTENDED_LINEAR_ADDRESS = 0x04
ERASED = 0xFF
HEX_SUFFIXES = (".hex", ".ihex", ".ihx")
RECORD_BYTES = 16
ADDRESS_SPACE = 1 << 32


def record_checksum(body: bytes) -> int:
    """Two's complement of the byte sum of a record."""
    return (-sum(body)) & 0xFF


def format_record(record_type: int, address: int, data: bytes) -> str:
    """Return one Intel HEX record line."""
    body = bytes([len(data)]) + address.to_bytes(2, "big")
    body += bytes([record_type]) + data
    return f":{(body + bytes([record_checksum(body)])).hex().upper()}"


def parse_record(line: str, lineno: int = 0) -> tuple[int, int, bytes]:
    """Parse a record into ``(type, address, data)``.

    Raises:
        ImageFormatError: The record is malformed or its checksum is wrong.
    """
    if not line.startswith(":"):
        raise ImageFormatError(f"line {lineno}: record must start with ':'")
    try:
        raw = bytes.fromhex(line[1:])
    except ValueError as e:
        raise ImageFormatError(f"line {lineno}: invalid hex digits") from e
    if len(raw) < 5 or len(raw) != 5 + raw[0]:
        raise ImageFormatError(f"line {lineno}: bad record length")
    if record_checksum(raw[:-1]) != raw[-1]:
        raise ImageFormatError(
            f"line {lineno}: checksum mismatch, expected "
            f"{record_checksum(raw[:-1]):02X} got {raw[-1]:02X}"
        )
    return raw[3], int.from_bytes(raw[1:3], "big"), raw[4:-1]


def parse_intel_hex(lines: Iterable[str]) -> bytes:
    """Assemble the records of an Intel HEX file into contiguous bytes.

    Gaps between records are filled with the erased flash value 0xFF and
    the image starts at the lowest address that holds data.

    Raises:
        ImageFormatError: On malformed records, checksum mismatches,
            addresses past 32 bits, overlapping data, missing EOF record or
            an image without data.
    """
    chunks: dict[int, int] = {}
    upper = 0
    seen_eof = False
    for lineno, raw_line in enumerate(lines, start=1):
        line = raw_line.strip()
        if not line:
            continue
        if seen_eof:
            raise ImageFormatError(f"line {lineno}: record after EOF")
        record_type, address, data = parse_record(line, lineno)
        if record_type == DATA:
            if address + len(data) > 0x10000:
                raise ImageFormatError(
                    f"line {lineno}: record crosses a 64 KiB segment"
                )
            base = upper + address
            if base + len(data) > ADDRESS_SPACE:
                raise ImageFormatError(f"line {lineno}: address overflow")
            for i, byte in enumerate(data):
                if base + i in chunks:
                    raise ImageFormatError(
                        f"line {lineno}: address {base + i:#x} written twice"
                    )
                chunks[base + i] = byte
        elif record_type == EOF:
            seen_eof = True
        elif record_type == EXTENDED_LINEAR_ADDRESS:
            if len(data) != 2:
                raise ImageFormatError(
                    f"line {lineno}: extended address needs 2 bytes"
                )
            upper = int.from_bytes(data, "big") << 16
        else:
            raise ImageFormatError(
                f"line {lineno}: unsupported record type {record_type:02X}"
            )
    if not seen_eof:
        raise ImageFormatError("missing EOF record")
    if not chunks:
        raise ImageFormatError("empty image: no data records")

    start, end = min(chunks), max(chunks) + 1
    image = np.full(end - start, ERASED, dtype=np.uint8)
    addresses = np.fromiter(chunks, dtype=np.int64) - start
    image[addresses] = np.fromiter(chunks.values(), dtype=np.uint8)
    LOG.debug(f"intel hex: {len(chunks)} bytes at {start:#x}..{end:#x}")
    return image.tobytes()


def export_intel_hex(
    data: bytes, base_address: int = 0, record_bytes: int = RECORD_BYTES
) -> str:
    """Write `data` as Intel HEX with extended linear address records."""
    if base_address + len(data) > ADDRESS_SPACE:
        raise ValueError("Image does not fit in a 32 bit address space")
    lines = []
    upper = 0
    offset = 0
    while offset < len(data):
        address = base_address + offset
        if address >> 16 != upper:
            upper = address >> 16
            lines.append(
                format_record(
                    EXTENDED_LINEAR_ADDRESS, 0, upper.to_bytes(2, "big")
                )
            )
        size = min(
            record_bytes, len(data) - offset, 0x10000 - (address & 0xFFFF)
        )
        chunk = data[offset : offset + size]
        lines.append(format_record(DATA, address & 0xFFFF, chunk))
        offset += size
    lines.append(format_record(EOF, 0, b""))
    return "\n".join(lines) + "\n"


def infer_format(path: Path) -> ImageFormat:
    """Guess the image format from the file suffix."""
    return "intel-hex" if path.suffix.lower() in HEX_SUFFIXES else "raw"


def load_code_image(
    path: Path, fmt: ImageFormat | None = None, name: str | None = None
) -> CodeImage:
    """Load a code image from a raw binary or an Intel HEX file.

    Args:
        path: Image file.
        fmt: File format, inferred from the suffix when None.
        name: Label of the image, the file stem by default.

    Returns:
        The code image.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Image not found: {path}")
    fmt = fmt or infer_format(path)
    if fmt == "intel-hex":
        data = parse_intel_hex(path.read_text().splitlines())
    elif fmt == "raw":
        data = path.read_bytes()
    else:
        raise ValueError(f"Unknown image format: {fmt}")
    LOG.info(f"Loaded {path} ({fmt}): {len(data)} bytes")
    return CodeImage(data=data, name=name or path.stem)


def load_trace(path: Path) -> NDArray[np.int64]:
    """Load an address trace with one decimal address per line."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Trace not found: {path}")
    text = path.read_text()
    if not text.strip():
        return np.zeros(0, dtype=np.int64)
    return np.atleast_1d(np.loadtxt(path, dtype=np.int64, comments="#"))
