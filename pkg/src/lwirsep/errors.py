"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit 2, data and
file-format problems exit 3, numerical failures exit 4.
"""


class ConfigError(ValueError):
    """Bad or unknown configuration key/value."""


class DataFormatError(RuntimeError):
    """Malformed dataset/checkpoint file, version or hash mismatch."""


class WithheldComponentError(AttributeError):
    """Attempt to read a radiative component a field-like record withholds."""


class TrainingDivergedError(RuntimeError):
    """Non-finite loss encountered during optimization."""


class DegenerateInversionError(RuntimeError):
    """Emissivity inversion produced no valid band."""
