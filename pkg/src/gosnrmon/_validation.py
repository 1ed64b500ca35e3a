"""Exceptions and input-checking helpers shared across the package."""

import numpy as np


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class InvalidConfigError(ValueError):
    """A configuration is inconsistent or cannot be executed.

    ``path`` points at the offending field (e.g. ``"link.spans[2].length_km"``)
    when the error comes from parsing a structured config.
    """

    def __init__(self, message, path=None):
        self.path = path
        if path:
            message = f"{path}: {message}"
        super().__init__(message)


def check_pol_count(pol_count):
    if pol_count not in (1, 2):
        raise InvalidArgumentError(f"pol_count must be 1 or 2, got {pol_count!r}")
    return int(pol_count)


def as_field_array(samples):
    """Return samples as a read-only complex128 array of shape (pol, n)."""
    arr = np.array(samples, dtype=np.complex128, copy=True)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise InvalidArgumentError(f"samples must be 1-D or 2-D, got shape {arr.shape}")
    check_pol_count(arr.shape[0])
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("samples must be finite")
    arr.flags.writeable = False
    return arr


def check_waveform(w, name="waveform"):
    """Validate that ``w`` behaves like a :class:`ComplexWaveform`."""
    from .waveform import ComplexWaveform

    if not isinstance(w, ComplexWaveform):
        raise InvalidArgumentError(f"{name} must be a ComplexWaveform, got {type(w).__name__}")
    if w.n_samples == 0:
        raise InvalidArgumentError(f"{name} is empty")
    return w


def check_same_shape(a, b):
    if a.samples.shape != b.samples.shape:
        raise InvalidArgumentError(
            f"waveform shapes differ: {a.samples.shape} vs {b.samples.shape}"
        )


def check_blocks(blocks):
    blocks = list(blocks)
    if not blocks:
        raise InvalidArgumentError("at least one block is required")
    return blocks
