"""Longitudinal gOSNR monitoring from receiver-side correlation templates."""

__version__ = "0.1.0"

from ._validation import InvalidArgumentError, InvalidConfigError
from .correlation import CorrelationProfile, ProfileEstimator, build_template, correlate, n_erp, profile, profiles
from .gosnr import (
    GosnrEstimator,
    GosnrProfile,
    ReferenceProfile,
    analytic_ase_osnr,
    effective_snr_oracle,
    gosnr_from_profiles,
)
from .link import LinkSpec, PropagationPlan, compile_link, link_from_config, link_to_config
from .receiver import Receiver, RxOutput, build_reference_and_residual, compensate_dispersion, demodulate
from .scenario import ScenarioConfig, config_from_dict, load_config, preset, run
from .simulation import SignalConfig
from .ssfm import SsfmConfig, channel_select, dispersion_step, nonlinear_step, propagate, wdm_multiplex
from .waveform import (
    ComplexWaveform,
    SymbolFrame,
    decode_fpwv,
    encode_fpwv,
    generate_symbols,
    set_average_power,
    shape_pulse,
)

__all__ = [
    "ComplexWaveform", "CorrelationProfile", "GosnrEstimator", "GosnrProfile", "InvalidArgumentError",
    "InvalidConfigError", "LinkSpec", "ProfileEstimator", "PropagationPlan", "Receiver", "ReferenceProfile",
    "RxOutput", "ScenarioConfig", "SignalConfig", "SsfmConfig", "SymbolFrame", "analytic_ase_osnr",
    "build_reference_and_residual", "build_template", "channel_select", "compensate_dispersion",
    "compile_link", "config_from_dict", "correlate", "decode_fpwv", "demodulate", "dispersion_step",
    "effective_snr_oracle", "encode_fpwv", "generate_symbols", "gosnr_from_profiles", "link_from_config",
    "link_to_config", "load_config", "n_erp", "nonlinear_step", "preset", "profile", "profiles", "propagate",
    "run", "set_average_power", "shape_pulse", "wdm_multiplex",
]
