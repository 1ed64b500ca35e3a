"""Split-step Fourier propagation through a :class:`PropagationPlan`.

Sign convention (shared by the receiver and the correlation templates)::

    dE/dz = -j (β2/2) d²E/dt² - (α/2) E - j γ_eff |E|² E

With numpy's FFT convention this makes the linear step a multiplication of the
spectrum by ``exp(+j (B/2) ω²)`` where ``B = ∫β2 dz`` is the accumulated GVD.
"""

from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from ._validation import InvalidConfigError, check_waveform, check_pol_count
from .link import FiberSegment, LumpedGain, LumpedLoss, NoiseStep
from .rng import derive_seed
from .waveform import ComplexWaveform, frequency_grid, generate_awgn

PS2 = 1e-24  # ps^2 -> s^2
MANAKOV = 8.0 / 9.0


@dataclass(frozen=True)
class SsfmConfig:
    """Split-step settings.

    Without ``max_phase_rad`` every span is cut into equal steps no longer
    than ``step_km``. With it, steps are sized so the nonlinear phase per step
    stays at ``max_phase_rad`` (short steps where the power is high), and
    ``step_km`` caps the step length.
    """

    step_km: float = 0.25
    max_phase_rad: float = None
    manakov: bool = None
    reference_bandwidth_hz: float = None
    nonlinear: bool = True
    noise: bool = True

    def __post_init__(self):
        if not self.step_km > 0:
            raise InvalidConfigError(f"step_km must be > 0, got {self.step_km}")
        if self.max_phase_rad is not None and not self.max_phase_rad > 0:
            raise InvalidConfigError(f"max_phase_rad must be > 0, got {self.max_phase_rad}")

    def use_manakov(self, pol_count):
        return pol_count == 2 if self.manakov is None else bool(self.manakov)


def angular_frequency(n, sample_rate):
    return 2.0 * np.pi * frequency_grid(n, sample_rate)


def _dispersion_phase(omega2, beta2_total_ps2):
    return np.exp(1j * (0.5 * beta2_total_ps2 * PS2) * omega2)


def dispersion_step(w, beta2_total_ps2):
    """Apply accumulated GVD ``beta2_total_ps2`` (ps^2) in the frequency domain."""
    check_waveform(w)
    if beta2_total_ps2 == 0:
        return w
    omega2 = angular_frequency(w.n_samples, w.sample_rate) ** 2
    spec = sfft.fft(w.samples, axis=-1) * _dispersion_phase(omega2, beta2_total_ps2)
    return w.with_samples(sfft.ifft(spec, axis=-1))


def effective_length(alpha_per_km, length_km):
    if alpha_per_km == 0:
        return length_km
    return -np.expm1(-alpha_per_km * length_km) / alpha_per_km


def nonlinear_step(w, gamma_per_w_km, effective_km, manakov):
    """Kerr phase rotation ``exp(-j γ_eff P_tot L_eff)``; |E| is untouched."""
    check_waveform(w)
    if effective_km < 0:
        raise InvalidConfigError(f"effective_km must be >= 0, got {effective_km}")
    gamma = gamma_per_w_km * (MANAKOV if manakov else 1.0)
    if gamma == 0 or effective_km == 0:
        return w
    x = w.samples
    p_w = np.sum(x.real**2 + x.imag**2, axis=0) * 1e-3
    return w.with_samples(x * np.exp(-1j * (gamma * effective_km) * p_w))


def _step_lengths(seg, cfg, p0_w, gamma_eff):
    L = seg.length_km
    if cfg.max_phase_rad is None or gamma_eff * p0_w == 0:
        n = max(1, int(np.ceil(L / cfg.step_km - 1e-9)))
        return np.full(n, L / n)
    a = seg.alpha_per_km
    steps = []
    z = 0.0
    while z < L - 1e-12:
        if a == 0:
            h = cfg.max_phase_rad / (gamma_eff * p0_w)
        else:
            arg = np.exp(-a * z) - cfg.max_phase_rad * a / (gamma_eff * p0_w)
            h = np.inf if arg <= 0 else -np.log(arg) / a - z
        h = min(h, cfg.step_km, L - z)
        # avoid a sliver at the span end
        if L - z - h < 1e-3 * cfg.step_km:
            h = L - z
        steps.append(h)
        z += h
    return np.array(steps)


def propagate(w, plan, cfg=SsfmConfig(), seed=None):
    """Propagate ``w`` (launch field, sqrt(mW)) through ``plan``.

    Fibre segments use the symmetric split step with the nonlinear phase
    weighted by the effective length of the step; gains, point losses and
    noise injections are lumped. Noise node ``i`` draws from the stream
    ``derive_seed(seed, i)``.
    """
    check_waveform(w)
    check_pol_count(w.pol_count)
    shortest = min(s.length_km for s in plan.segments)
    if cfg.step_km > shortest + 1e-12:
        raise InvalidConfigError(f"step_km {cfg.step_km} exceeds the shortest span ({shortest} km)")
    manakov = cfg.use_manakov(w.pol_count)
    omega2 = angular_frequency(w.n_samples, w.sample_rate) ** 2
    x = np.array(w.samples)
    fs = w.sample_rate
    noise_index = 0

    for step in plan.steps:
        if isinstance(step, FiberSegment):
            gamma = step.gamma_per_w_km * (MANAKOV if manakov else 1.0) if cfg.nonlinear else 0.0
            p0_w = float(np.mean(np.sum(np.abs(x) ** 2, axis=0))) * 1e-3
            hs = _step_lengths(step, cfg, p0_w, gamma)
            b2 = step.beta2_ps2_per_km
            a = step.alpha_per_km
            if gamma == 0:
                spec = sfft.fft(x, axis=-1) * _dispersion_phase(omega2, b2 * step.length_km)
                x = sfft.ifft(spec, axis=-1) * np.exp(-a * step.length_km / 2.0)
                continue
            spec = sfft.fft(x, axis=-1)
            pending = 0.0
            for h in hs:
                spec *= _dispersion_phase(omega2, b2 * (pending + h / 2.0))
                x = sfft.ifft(spec, axis=-1)
                p_w = np.sum(x.real**2 + x.imag**2, axis=0) * 1e-3
                x *= np.exp(-1j * (gamma * effective_length(a, h)) * p_w)
                x *= np.exp(-a * h / 2.0)
                spec = sfft.fft(x, axis=-1)
                pending = h / 2.0
            spec *= _dispersion_phase(omega2, b2 * pending)
            x = sfft.ifft(spec, axis=-1)
        elif isinstance(step, LumpedGain):
            x *= 10.0 ** (step.gain_db / 20.0)
        elif isinstance(step, LumpedLoss):
            x *= 10.0 ** (-step.loss_db / 20.0)
        elif isinstance(step, NoiseStep):
            if cfg.noise:
                total = step.psd(cfg.reference_bandwidth_hz) * fs
                if seed is None:
                    raise InvalidConfigError("a seed is required when the plan injects noise")
                n = generate_awgn(w, total, derive_seed(seed, noise_index))
                x += n.samples
            noise_index += 1
    return ComplexWaveform(x, fs, w.center_offset)


def _shift_bins(offset_hz, n, fs):
    k = int(round(offset_hz * n / fs))
    return k, k * fs / n


def occupied_band(w, threshold=1e-12):
    """(low, high) frequency edges where the power spectrum exceeds ``threshold`` x peak."""
    psd = np.sum(np.abs(sfft.fft(w.samples, axis=-1)) ** 2, axis=0)
    f = frequency_grid(w.n_samples, w.sample_rate)
    on = psd > threshold * psd.max() if psd.max() > 0 else np.zeros_like(psd, bool)
    if not on.any():
        return 0.0, 0.0
    return float(f[on].min()), float(f[on].max())


def wdm_multiplex(channels):
    """Sum baseband channels shifted to their offsets (snapped to the FFT grid).

    ``channels`` is a list of ``(ComplexWaveform, offset_hz)`` sharing one
    sample rate and length.
    """
    if not channels:
        raise InvalidConfigError("no channels to multiplex")
    first = channels[0][0]
    n, fs = first.n_samples, first.sample_rate
    total = np.zeros((first.pol_count, n), dtype=np.complex128)
    for w, offset in channels:
        if w.n_samples != n or w.sample_rate != fs or w.pol_count != first.pol_count:
            raise InvalidConfigError("multiplexed channels must share length, rate and pol count")
        lo, hi = occupied_band(w)
        k, snapped = _shift_bins(offset, n, fs)
        if lo + snapped < -fs / 2 or hi + snapped >= fs / 2:
            raise InvalidConfigError(
                f"channel at {offset / 1e9:.1f} GHz overflows the simulated band ±{fs / 2e9:.1f} GHz"
            )
        total += sfft.ifft(np.roll(sfft.fft(w.samples, axis=-1), k, axis=-1), axis=-1)
    return ComplexWaveform(total, fs, 0.0)


def channel_select(w, offset_hz, bandwidth_hz, out_sample_rate=None):
    """Brick-wall select ``bandwidth_hz`` around ``offset_hz`` and move it to baseband.

    With ``out_sample_rate`` the spectrum is also cropped to that rate (an
    exact decimation, since nothing outside the passband survives).
    """
    check_waveform(w)
    n, fs = w.n_samples, w.sample_rate
    k, _ = _shift_bins(offset_hz, n, fs)
    spec = np.roll(sfft.fft(w.samples, axis=-1), -k, axis=-1)
    f = frequency_grid(n, fs)
    spec[:, np.abs(f) > bandwidth_hz / 2.0] = 0.0
    if out_sample_rate is None or out_sample_rate == fs:
        return ComplexWaveform(sfft.ifft(spec, axis=-1), fs, 0.0)
    m = int(round(n * out_sample_rate / fs))
    if m > n or abs(m * fs / n - out_sample_rate) > 1e-6 * out_sample_rate:
        raise InvalidConfigError(f"cannot resample {fs} Hz to {out_sample_rate} Hz with {n} samples")
    if bandwidth_hz > out_sample_rate:
        raise InvalidConfigError("selected bandwidth exceeds the output sample rate")
    f_out = frequency_grid(m, out_sample_rate)
    idx = np.round(f_out * n / fs).astype(int) % n
    cropped = spec[:, idx] * (m / n)
    return ComplexWaveform(sfft.ifft(cropped, axis=-1), out_sample_rate, 0.0)
