class AttestationSimError(Exception):
    """Base error of the attestation simulator."""

    pass


class ConfigError(AttestationSimError):
    """Invalid or unknown configuration entry."""

    pass


class ImageFormatError(AttestationSimError):
    """Malformed code image file (bad record, checksum, overflow, empty)."""

    pass


class CapacityExceededError(AttestationSimError):
    """Image regions do not fit the program memory."""

    pass


class UnknownCodecError(AttestationSimError):
    """Codec id is not registered."""

    pass


class UnsupportedBlockSizeError(AttestationSimError):
    """Block size outside the supported set."""

    pass


class CorruptBlockError(AttestationSimError):
    """A compressed block cannot be decoded."""

    pass


class LatOverflowError(AttestationSimError):
    """A line address table offset does not fit in 24 bits."""

    pass


class OptionMismatchError(AttestationSimError):
    """Packed image and verifier policy use different protocol options."""

    pass


class NonceExhaustedError(AttestationSimError):
    """The verifier cannot issue another fresh nonce."""

    pass


class InfeasiblePlanError(AttestationSimError):
    """An attack plan cannot free enough program memory."""

    pass


class CalibrationError(AttestationSimError):
    """Honest and attack costs are not separable."""

    pass
