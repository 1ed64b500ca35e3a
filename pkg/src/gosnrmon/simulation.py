"""One block of transmit -> link -> receive, shared by the scenario runner and
the effective-SNR oracle."""

from dataclasses import dataclass, replace

import numpy as np

from ._validation import InvalidConfigError
from .receiver import Receiver
from .rng import NEIGHBOR, NOISE, SYMBOLS, derive_seed
from .ssfm import propagate, wdm_multiplex
from .waveform import generate_symbols, set_average_power, shape_pulse


@dataclass(frozen=True)
class SignalConfig:
    """Test-channel signal and block structure.

    ``sim_samples_per_symbol`` sets the simulation bandwidth (raise it for
    WDM); the receiver always works at ``samples_per_symbol``.
    """

    baud_rate: float = 68e9
    pol_count: int = 2
    rolloff: float = 0.1
    samples_per_symbol: int = 2
    symbols_per_block: int = 2**17
    blocks: int = 16
    sim_samples_per_symbol: int = None

    def __post_init__(self):
        if self.blocks < 1:
            raise InvalidConfigError("blocks must be >= 1", "signal.blocks")
        n = self.symbols_per_block
        if n < 1 or n & (n - 1):
            raise InvalidConfigError("symbols_per_block must be a power of two", "signal.symbols_per_block")
        if self.pol_count not in (1, 2):
            raise InvalidConfigError("pol_count must be 1 or 2", "signal.pol_count")
        if self.samples_per_symbol < 2:
            raise InvalidConfigError("samples_per_symbol must be >= 2", "signal.samples_per_symbol")
        if not 0 <= self.rolloff <= 1:
            raise InvalidConfigError("rolloff must be in [0, 1]", "signal.rolloff")
        if self.sim_sps < self.samples_per_symbol:
            raise InvalidConfigError("sim_samples_per_symbol must be >= samples_per_symbol",
                                     "signal.sim_samples_per_symbol")

    @property
    def sim_sps(self):
        return self.sim_samples_per_symbol or self.samples_per_symbol


def block_seeds(root_seed, block, neighbors=()):
    """All seeds used by one block, keyed by stream name."""
    seeds = {
        "symbols": derive_seed(root_seed, SYMBOLS, block),
        "noise": derive_seed(root_seed, NOISE, block),
    }
    for k, nb in enumerate(neighbors):
        seeds[f"neighbor{k}"] = derive_seed(root_seed, NEIGHBOR, block, nb.seed)
    return seeds


def transmit(plan, signal, root_seed, block):
    """Launch field (test channel plus WDM neighbours) and the test-channel frame."""
    seeds = block_seeds(root_seed, block, plan.wdm_neighbors)
    frame = generate_symbols(signal.symbols_per_block, signal.pol_count, seeds["symbols"], signal.baud_rate)
    w = set_average_power(shape_pulse(frame, signal.rolloff, signal.sim_sps), plan.launch_power_dbm)
    if plan.wdm_neighbors:
        chans = [(w, 0.0)]
        for k, nb in enumerate(plan.wdm_neighbors):
            f = generate_symbols(signal.symbols_per_block, signal.pol_count, seeds[f"neighbor{k}"],
                                 signal.baud_rate)
            nw = set_average_power(shape_pulse(f, signal.rolloff, signal.sim_sps), nb.power_dbm)
            chans.append((nw, nb.offset_hz))
        w = wdm_multiplex(chans)
    return w, frame


def simulate_block(plan, signal, ssfm_cfg, root_seed, block):
    """Propagate one block; returns ``(field_at_L, transmitted_frame)``."""
    w, frame = transmit(plan, signal, root_seed, block)
    cfg = ssfm_cfg
    if cfg.reference_bandwidth_hz is None:
        cfg = replace(cfg, reference_bandwidth_hz=signal.baud_rate)
    out = propagate(w, plan, cfg, derive_seed(root_seed, NOISE, block))
    return out, frame


def receiver_for(plan, signal, mode="genie"):
    return Receiver(plan, signal.baud_rate, signal.rolloff, signal.samples_per_symbol, mode)


def symbol_snr(rx_field, frame, plan, signal):
    """Matched-filter SNR (linear) of the test channel against the known frame.

    Returns ``(signal_power, noise_power)`` at the symbol decision point after
    the front-end filter and full dispersion compensation.
    """
    from .receiver import compensate_dispersion, front_end
    from .waveform import matched_filter

    w = front_end(rx_field, signal.baud_rate, signal.rolloff, signal.samples_per_symbol)
    w0 = compensate_dispersion(w, plan)
    r = matched_filter(w0, signal.baud_rate, signal.rolloff).samples[:, :: signal.samples_per_symbol]
    s = frame.symbols
    a = np.vdot(s, r) / np.vdot(s, s)
    err = r - a * s
    return float(np.abs(a) ** 2 * np.mean(np.abs(s) ** 2)), float(np.mean(np.abs(err) ** 2))
