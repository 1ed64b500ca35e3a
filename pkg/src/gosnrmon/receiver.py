"""Receiver DSP: dispersion compensation to the z = 0 plane, demodulation, and
the split of the received field into a regenerated reference and a residual.

Everything downstream of :func:`build_reference_and_residual` works on fields
normalized by the complex least-squares gain ``a``, so the received field
reads ``e_tot_0 = u_ref + delta_e`` with ``u_ref`` at unit power. Any complex
scaling of the received field therefore cancels before correlation.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import InvalidArgumentError, check_waveform
from .link import cumulative_beta2
from .ssfm import channel_select, dispersion_step
from .waveform import QPSK, SymbolFrame, matched_filter, shape_pulse

UNRELIABLE_DECISIONS = "unreliable-decisions"
ERROR_RATE_LIMIT = 1e-2


class UnreliableDecisionsWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RxOutput:
    """Receiver output for one block, all fields on the z = 0 plane."""

    e_tot_0: object
    u_ref: object
    delta_e: object
    fit_scale: complex
    decision_error_rate: float = float("nan")
    flags: tuple = field(default=())

    @property
    def raw_residual(self):
        """Residual in the units of the received field (``fit_scale * delta_e``)."""
        return self.delta_e * self.fit_scale


def compensate_dispersion(w, plan):
    """Undo the link's accumulated dispersion, moving ``w`` from z = L to z = 0."""
    return dispersion_step(w, -cumulative_beta2(plan, plan.total_length_km))


def front_end(w, baud_rate, rolloff=0.1, samples_per_symbol=2, offset_hz=0.0):
    """Select the test channel with a brick-wall filter of width ``(1+rolloff)·baud``."""
    return channel_select(w, offset_hz, (1.0 + rolloff) * baud_rate,
                          out_sample_rate=baud_rate * samples_per_symbol)


def hard_decision(r):
    return (np.sign(r.real) + 1j * np.sign(r.imag)) / np.sqrt(2.0)


def demodulate(w0, frame_hint=None, rolloff=0.1, samples_per_symbol=2,
               pilot_length=1024, mode=None):
    """Matched filter, decimate, align phase/scale, and take hard QPSK decisions.

    ``mode`` is ``"genie"`` (least-squares alignment on the first
    ``pilot_length`` symbols of ``frame_hint``) or ``"blind"`` (fourth-power
    phase estimate, principal branch). It defaults to genie when a hint is
    given. Returns ``(decided_frame, decision_error_rate)``; the error rate is
    NaN without a hint.
    """
    check_waveform(w0, "w0")
    sps = int(samples_per_symbol)
    baud = w0.sample_rate / sps
    mode = mode or ("genie" if frame_hint is not None else "blind")
    r = matched_filter(w0, baud, rolloff).samples[:, ::sps]
    if mode == "genie":
        if frame_hint is None:
            raise InvalidArgumentError("genie mode needs frame_hint")
        ref = frame_hint.symbols[:, :pilot_length]
        rp = r[:, : ref.shape[1]]
        a = np.vdot(ref, rp) / np.vdot(ref, ref)
        r = r / a
    elif mode == "blind":
        theta = np.angle(-np.mean(r**4)) / 4.0
        r = r * np.exp(-1j * theta)
        r = r / np.sqrt(np.mean(np.abs(r) ** 2))
    else:
        raise InvalidArgumentError(f"unknown demodulation mode {mode!r}")
    decided = SymbolFrame(hard_decision(r), baud, None)
    rate = float("nan")
    if frame_hint is not None:
        rate = float(np.mean(np.abs(decided.symbols - frame_hint.symbols) > 1e-9))
        if rate > ERROR_RATE_LIMIT:
            warnings.warn(f"{UNRELIABLE_DECISIONS}: symbol error rate {rate:.3g}",
                          UnreliableDecisionsWarning, stacklevel=2)
    return decided, rate


def build_reference_and_residual(w0, decided, rolloff=0.1, samples_per_symbol=2,
                                 decision_error_rate=float("nan")):
    """Regenerate ``u_ref`` from decisions and split ``w0 = a·u_ref + residual``."""
    check_waveform(w0, "w0")
    if not np.any(w0.samples):
        raise InvalidArgumentError("received field is all zero")
    u = shape_pulse(decided, rolloff, samples_per_symbol)
    if u.samples.shape != w0.samples.shape:
        raise InvalidArgumentError(
            f"decided symbols give shape {u.samples.shape}, field has {w0.samples.shape}"
        )
    a = complex(np.vdot(u.samples, w0.samples) / np.vdot(u.samples, u.samples))
    e0 = w0 * (1.0 / a)
    delta = e0 - u
    flags = ()
    if decision_error_rate > ERROR_RATE_LIMIT:
        flags = (UNRELIABLE_DECISIONS,)
    return RxOutput(e0, u, delta, a, decision_error_rate, flags)


class Receiver(TransformerMixin, BaseEstimator):
    """Received field at z = L -> :class:`RxOutput` on the z = 0 plane.

    Parameters
    ----------
    plan : PropagationPlan
        Link whose accumulated dispersion is compensated.
    baud_rate : float
        Symbol rate of the test channel in Hz.
    rolloff, samples_per_symbol : float, int
        Pulse-shape parameters, shared with the transmitter.
    mode : {"genie", "blind"}
        Decision alignment; genie needs transmitted frames in ``transform``.
    front_end_filter : bool
        Apply the brick-wall channel filter (and resample to
        ``samples_per_symbol``) before compensation.
    """

    def __init__(self, plan=None, baud_rate=68e9, rolloff=0.1, samples_per_symbol=2,
                 mode="genie", pilot_length=1024, front_end_filter=True):
        self.plan = plan
        self.baud_rate = baud_rate
        self.rolloff = rolloff
        self.samples_per_symbol = samples_per_symbol
        self.mode = mode
        self.pilot_length = pilot_length
        self.front_end_filter = front_end_filter

    def fit(self, X=None, y=None):
        if self.plan is None:
            raise InvalidArgumentError("Receiver needs a propagation plan")
        return self

    def _one(self, w, frame):
        if self.front_end_filter:
            w = front_end(w, self.baud_rate, self.rolloff, self.samples_per_symbol)
        w0 = compensate_dispersion(w, self.plan)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UnreliableDecisionsWarning)
            decided, rate = demodulate(w0, frame, self.rolloff, self.samples_per_symbol,
                                       self.pilot_length, self.mode)
        return build_reference_and_residual(w0, decided, self.rolloff,
                                            self.samples_per_symbol, rate)

    def transform(self, X, frames=None):
        """Process one waveform or a list of waveforms (one per block)."""
        self.fit()
        single = not isinstance(X, (list, tuple))
        waves = [X] if single else list(X)
        if frames is None:
            frames = [None] * len(waves)
        elif single:
            frames = [frames]
        out = [self._one(w, f) for w, f in zip(waves, frames)]
        return out[0] if single else out


__all__ = [
    "QPSK", "RxOutput", "Receiver", "compensate_dispersion", "demodulate",
    "build_reference_and_residual", "front_end", "UnreliableDecisionsWarning",
]
