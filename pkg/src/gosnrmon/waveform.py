"""Baseband waveforms: QPSK symbol generation, RRC shaping, power handling, AWGN.

Amplitudes are in sqrt(mW) so ``|E|**2`` reads directly in mW. Arrays are laid
out as ``(pol, time)``. All FFT-based filtering is circular: a block is one
period of a periodic signal, which keeps shaping, matched filtering and the
split-step propagation exactly consistent with each other.
"""

import struct
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from ._validation import (
    InvalidArgumentError,
    as_field_array,
    check_pol_count,
    check_waveform,
)
from .rng import make_rng

QPSK = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / np.sqrt(2.0)


@dataclass(frozen=True)
class SymbolFrame:
    """Modulation symbols, shape (pol, count), plus the symbol rate."""

    symbols: np.ndarray
    baud_rate: float
    seed: int = None

    def __post_init__(self):
        object.__setattr__(self, "symbols", as_field_array(self.symbols))
        if not self.baud_rate > 0:
            raise InvalidArgumentError(f"baud_rate must be > 0, got {self.baud_rate}")

    @property
    def pol_count(self):
        return self.symbols.shape[0]

    @property
    def count(self):
        return self.symbols.shape[1]


@dataclass(frozen=True)
class ComplexWaveform:
    """Sampled complex field, shape (pol, n), in sqrt(mW)."""

    samples: np.ndarray
    sample_rate: float
    center_offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "samples", as_field_array(self.samples))
        if not self.sample_rate > 0:
            raise InvalidArgumentError(f"sample_rate must be > 0, got {self.sample_rate}")

    @property
    def pol_count(self):
        return self.samples.shape[0]

    @property
    def n_samples(self):
        return self.samples.shape[1]

    def with_samples(self, samples):
        return ComplexWaveform(samples, self.sample_rate, self.center_offset)

    def __mul__(self, c):
        return self.with_samples(self.samples * c)

    __rmul__ = __mul__

    def __add__(self, other):
        if self.samples.shape != other.samples.shape or self.sample_rate != other.sample_rate:
            raise InvalidArgumentError("cannot add waveforms of different shape or rate")
        return self.with_samples(self.samples + other.samples)

    def __sub__(self, other):
        return self + other * -1.0


def generate_symbols(count, pol_count=2, seed=0, baud_rate=68e9):
    """Draw i.i.d. uniform QPSK symbols from ``{±1±j}/√2``.

    Each polarization has exactly unit symbol energy because QPSK is
    constant-modulus.
    """
    if int(count) < 1:
        raise InvalidArgumentError(f"count must be >= 1, got {count}")
    pol_count = check_pol_count(pol_count)
    rng = make_rng(seed)
    idx = rng.integers(0, 4, size=(pol_count, int(count)))
    return SymbolFrame(QPSK[idx], baud_rate, seed)


def frequency_grid(n, sample_rate):
    return sfft.fftfreq(n, d=1.0 / sample_rate)


def rrc_response(freqs, baud_rate, rolloff):
    """Frequency response of a root-raised-cosine filter (unit passband gain)."""
    if not 0.0 <= rolloff <= 1.0:
        raise InvalidArgumentError(f"rolloff must be in [0, 1], got {rolloff}")
    af = np.abs(np.asarray(freqs, dtype=float))
    f1 = (1.0 - rolloff) * baud_rate / 2.0
    f2 = (1.0 + rolloff) * baud_rate / 2.0
    h = np.zeros_like(af)
    h[af <= f1] = 1.0
    if rolloff > 0:
        edge = (af > f1) & (af <= f2)
        h[edge] = np.sqrt(0.5 * (1.0 + np.cos(np.pi / (rolloff * baud_rate) * (af[edge] - f1))))
    return h


def shape_pulse(frame, rolloff=0.1, samples_per_symbol=2):
    """Upsample and filter symbols with a circular RRC, normalized to 1 mW.

    Symbol ``k`` is centred on sample ``k * samples_per_symbol``.
    """
    sps = int(samples_per_symbol)
    if sps < 2:
        raise InvalidArgumentError(f"samples_per_symbol must be >= 2 (aliasing), got {samples_per_symbol}")
    n = frame.count * sps
    up = np.zeros((frame.pol_count, n), dtype=np.complex128)
    up[:, ::sps] = frame.symbols
    fs = frame.baud_rate * sps
    h = rrc_response(frequency_grid(n, fs), frame.baud_rate, rolloff)
    x = sfft.ifft(sfft.fft(up, axis=-1) * h, axis=-1)
    w = ComplexWaveform(x, fs)
    return set_average_power(w, 0.0)


def matched_filter(w, baud_rate, rolloff=0.1):
    h = rrc_response(frequency_grid(w.n_samples, w.sample_rate), baud_rate, rolloff)
    return w.with_samples(sfft.ifft(sfft.fft(w.samples, axis=-1) * h, axis=-1))


def average_power(w):
    """Time-mean of the total instantaneous power summed over polarizations, in mW."""
    check_waveform(w)
    return float(np.mean(np.sum(np.abs(w.samples) ** 2, axis=0)))


def dbm_to_mw(p_dbm):
    return 10.0 ** (p_dbm / 10.0)


def mw_to_dbm(p_mw):
    return 10.0 * np.log10(p_mw)


def set_average_power(w, p_dbm):
    """Scale ``w`` so its average total power equals ``p_dbm``."""
    p = average_power(w)
    if p == 0.0:
        raise InvalidArgumentError("cannot set the power of an all-zero waveform")
    return w * np.sqrt(dbm_to_mw(p_dbm) / p)


def generate_awgn(shape_of, total_power_mw, seed):
    """Circular complex white Gaussian noise shaped like ``shape_of``.

    ``total_power_mw`` is the mean of ``sum_pol |n|**2``; each real quadrature
    has variance ``total_power_mw / (2 * pol_count)``.
    """
    if total_power_mw < 0:
        raise InvalidArgumentError(f"noise power must be >= 0, got {total_power_mw}")
    shape = shape_of.samples.shape
    if total_power_mw == 0:
        return shape_of.with_samples(np.zeros(shape, dtype=np.complex128))
    rng = make_rng(seed)
    sigma = np.sqrt(total_power_mw / (2.0 * shape[0]))
    n = sigma * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return shape_of.with_samples(n)


def evm(received, reference):
    """RMS error vector magnitude of ``received`` relative to ``reference``."""
    err = np.sum(np.abs(received - reference) ** 2)
    return float(np.sqrt(err / np.sum(np.abs(reference) ** 2)))


# Binary capture format: "FPWV" little-endian, see README for the layout.
_FPWV_HEADER = struct.Struct("<4sHBddQ")
FPWV_MAGIC = b"FPWV"
FPWV_VERSION = 1


def encode_fpwv(w):
    """Serialize a waveform to FPWV bytes."""
    head = _FPWV_HEADER.pack(
        FPWV_MAGIC, FPWV_VERSION, w.pol_count, float(w.sample_rate),
        float(w.center_offset), w.n_samples,
    )
    # (n, pol) complex -> per sample, per pol, (re, im)
    body = np.ascontiguousarray(w.samples.T).view(np.float64).astype("<f8", copy=False)
    return head + body.tobytes()


def decode_fpwv(data):
    """Parse FPWV bytes back into a :class:`ComplexWaveform`."""
    if len(data) < _FPWV_HEADER.size:
        raise InvalidArgumentError("FPWV data shorter than its header")
    magic, version, pols, fs, offset, n = _FPWV_HEADER.unpack_from(data)
    if magic != FPWV_MAGIC:
        raise InvalidArgumentError(f"bad FPWV magic {magic!r}")
    if version != FPWV_VERSION:
        raise InvalidArgumentError(f"unsupported FPWV version {version}")
    check_pol_count(pols)
    expected = _FPWV_HEADER.size + 16 * pols * n
    if len(data) != expected:
        raise InvalidArgumentError(f"FPWV payload size {len(data)} != expected {expected}")
    flat = np.frombuffer(data, dtype="<f8", offset=_FPWV_HEADER.size).astype(np.float64)
    samples = flat.view(np.complex128).reshape(n, pols).T
    return ComplexWaveform(samples, fs, offset)
