"""Synthetic firmware-like code images.

The images are generated, not real firmware: a vector table, routines
built from a small skewed vocabulary of 16-bit instruction words and
repeated with small mutations, and ASCII string tables. Their sizes
match common sensor network applications.
"""

import logging

import numpy as np

from cciattest.image import CodeImage

LOG = logging.getLogger(__name__)

SAMPLE_SIZES: dict[str, int] = {
    "multi-hop-oscilloscope": 25906,
    "base-station": 15240,
    "sense": 2860,
}

VECTOR_TABLE_BYTES = 64
VOCABULARY_WORDS = 128
ROUTINES = 24
MUTATION_RATE = 0.1
STRING_SHARE = 0.12
LEXICON = (
    "radio",
    "timer",
    "sensor",
    "send",
    "recv",
    "fail",
    "ok",
    "init",
    "buffer",
    "node",
    "route",
    "beacon",
    "led",
    "adc",
    "queue",
    "busy",
)


def _vocabulary(rng: np.random.Generator) -> np.ndarray:
    low = rng.choice(256, size=24, replace=False)
    high = rng.choice(256, size=16, replace=False)
    pairs = np.array([(lo, hi) for hi in high for lo in low])
    picked = pairs[rng.choice(len(pairs), VOCABULARY_WORDS, replace=False)]
    return (picked[:, 0] | picked[:, 1] << 8).astype(np.uint16)


def _strings(rng: np.random.Generator, length: int) -> bytes:
    out = bytearray()
    while len(out) < length:
        words = rng.choice(LEXICON, size=int(rng.integers(1, 5)))
        out += " ".join(words).encode("ascii") + b"\x00"
    return bytes(out[:length])


def synthetic_image(length: int, seed: int = 0, name: str = "") -> CodeImage:
    """Generate a deterministic firmware-like image of `length` bytes.

    Args:
        length: Image length in bytes.
        seed: Generator seed.
        name: Image label, `synthetic-<length>` by default.

    Returns:
        The code image.
    """
    if length <= 0:
        raise ValueError(f"length must be positive: {length}")
    rng = np.random.default_rng(seed)
    vocabulary = _vocabulary(rng)
    weights = 1.0 / np.arange(1, VOCABULARY_WORDS + 1)
    weights /= weights.sum()

    vectors = (0x0100 + 4 * np.arange(VECTOR_TABLE_BYTES // 2)).astype("<u2")
    routines = [
        rng.choice(vocabulary, size=int(rng.integers(16, 61)), p=weights)
        for _ in range(ROUTINES)
    ]
    strings = _strings(rng, int(length * STRING_SHARE))

    code_bytes = max(0, length - VECTOR_TABLE_BYTES - len(strings))
    chunks = []
    produced = 0
    while produced < code_bytes:
        routine = routines[int(rng.integers(ROUTINES))].copy()
        mutated = rng.random(len(routine)) < MUTATION_RATE
        routine[mutated] = rng.choice(
            vocabulary, size=int(mutated.sum()), p=weights
        )
        chunks.append(routine.astype("<u2").tobytes())
        produced += 2 * len(routine)
    code = b"".join(chunks)[:code_bytes]

    data = (vectors.tobytes() + code + strings)[:length]
    LOG.debug(f"synthetic image: {length} bytes, seed {seed}")
    return CodeImage(data=data, name=name or f"synthetic-{length}")


def sample_image(name: str) -> CodeImage:
    """Return the bundled sample image `name`."""
    if name not in SAMPLE_SIZES:
        raise ValueError(
            f"Unknown sample: {name}, expected one of {list(SAMPLE_SIZES)}"
        )
    seed = list(SAMPLE_SIZES).index(name)
    return synthetic_image(SAMPLE_SIZES[name], seed=seed, name=name)
