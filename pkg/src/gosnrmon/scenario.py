"""Scenario configuration, named presets and the end-to-end runner.

A scenario config is a JSON-compatible dict::

    {
      "name": "fig2a",
      "link": {...},                      # see gosnrmon.link
      "signal": {"baud_rate": 68e9, "pol_count": 2, "rolloff": 0.1,
                 "samples_per_symbol": 2, "symbols_per_block": 131072,
                 "blocks": 16, "sim_samples_per_symbol": null},
      "ssfm": {"step_km": 5.0, "max_phase_rad": 0.005, "manakov": null,
               "nonlinear": true, "noise": true},
      "estimator": {"z_step_km": 5.0, "correlation_convention": "real",
                    "ceiling_db": 40.0, "floor_db": -10.0,
                    "ratio_model": "erp-gaussian", "demod_mode": "genie",
                    "pilot_length": 1024, "oracle": false, "oracle_blocks": 2,
                    "oracle_symbols_per_block": 16384},
      "seed": 1,
      "outputs": "out/fig2a",
      "deviations": ["..."]
    }

Only ``link`` and ``seed`` are required. :func:`run` returns the artifacts as
strings; writing them to disk is left to the caller (the CLI).
"""

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import __version__
from ._validation import InvalidConfigError
from .correlation import NPPE, PPE, _check_grid, block_correlations, reduce_blocks
from .gosnr import (
    RATIO_MODELS,
    GosnrEstimator,
    ReferenceProfile,
    UnsupportedInAnalyticError,
    analytic_ase_osnr,
    effective_snr_oracle,
    lin_to_db,
    r_factor,
)
from .link import LinkSpec, compile_link, link_from_config, link_to_config
from .receiver import Receiver
from .simulation import SignalConfig, block_seeds, simulate_block, transmit
from .ssfm import SsfmConfig
from .svg import line_plot

PRESETS = ("fig2a", "fig2b", "fig2c", "fig3", "pointloss", "xpm")


@dataclass(frozen=True)
class EstimatorConfig:
    z_step_km: float = 5.0
    correlation_convention: str = "real"
    ceiling_db: float = 40.0
    floor_db: float = -10.0
    ratio_model: str = "erp-gaussian"
    demod_mode: str = "genie"
    pilot_length: int = 1024
    oracle: bool = False
    oracle_blocks: int = 2
    oracle_symbols_per_block: int = 2**14

    def __post_init__(self):
        p = "estimator"
        if not self.z_step_km > 0:
            raise InvalidConfigError("must be > 0", f"{p}.z_step_km")
        if self.correlation_convention not in ("real", "magnitude"):
            raise InvalidConfigError("must be 'real' or 'magnitude'", f"{p}.correlation_convention")
        if not self.floor_db < self.ceiling_db:
            raise InvalidConfigError("floor_db must be below ceiling_db", f"{p}.floor_db")
        if self.ratio_model not in RATIO_MODELS:
            raise InvalidConfigError(f"must be one of {RATIO_MODELS}", f"{p}.ratio_model")
        if self.demod_mode not in ("genie", "blind"):
            raise InvalidConfigError("must be 'genie' or 'blind'", f"{p}.demod_mode")
        if self.oracle_blocks < 1:
            raise InvalidConfigError("must be >= 1", f"{p}.oracle_blocks")


@dataclass(frozen=True)
class ScenarioConfig:
    link: LinkSpec
    seed: int
    signal: SignalConfig = SignalConfig()
    ssfm: SsfmConfig = SsfmConfig()
    estimator: EstimatorConfig = EstimatorConfig()
    name: str = "custom"
    outputs: str = None
    deviations: tuple = field(default=())

    def __post_init__(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise InvalidConfigError("seed must be a non-negative integer", "seed")

    @property
    def plan(self):
        return compile_link(self.link)

    def to_dict(self):
        return {
            "name": self.name,
            "link": link_to_config(self.link),
            "signal": asdict(self.signal),
            "ssfm": {k: v for k, v in asdict(self.ssfm).items() if k != "reference_bandwidth_hz"},
            "estimator": asdict(self.estimator),
            "seed": self.seed,
            "outputs": self.outputs,
            "deviations": list(self.deviations),
        }

    def config_hash(self):
        """SHA-256 of the canonical config (output directory excluded)."""
        d = self.to_dict()
        d.pop("outputs")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def with_overrides(self, seed=None, blocks=None, outputs=None):
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        if blocks is not None:
            cfg = replace(cfg, signal=replace(cfg.signal, blocks=blocks))
        if outputs is not None:
            cfg = replace(cfg, outputs=outputs)
        return cfg


_INT_FIELDS = {"pol_count", "samples_per_symbol", "symbols_per_block", "blocks",
               "sim_samples_per_symbol", "pilot_length", "oracle_blocks", "oracle_symbols_per_block"}
_BOOL_FIELDS = {"manakov", "nonlinear", "noise", "oracle"}
_STR_FIELDS = {"correlation_convention", "demod_mode", "ratio_model"}
_NULLABLE = {"max_phase_rad", "manakov", "sim_samples_per_symbol"}


def _section(cfg, key, cls, path_prefix, exclude=()):
    raw = cfg.get(key) or {}
    if not isinstance(raw, dict):
        raise InvalidConfigError("expected an object", path_prefix)
    names = {f.name for f in fields(cls)} - set(exclude)
    unknown = set(raw) - names
    if unknown:
        raise InvalidConfigError(f"unknown keys {sorted(unknown)}", path_prefix)
    kwargs = {}
    for k, v in raw.items():
        p = f"{path_prefix}.{k}"
        if v is None:
            if k not in _NULLABLE:
                raise InvalidConfigError("must not be null", p)
            kwargs[k] = None
        elif k in _BOOL_FIELDS:
            if not isinstance(v, bool):
                raise InvalidConfigError(f"expected true/false, got {v!r}", p)
            kwargs[k] = v
        elif k in _STR_FIELDS:
            if not isinstance(v, str):
                raise InvalidConfigError(f"expected a string, got {v!r}", p)
            kwargs[k] = v
        else:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise InvalidConfigError(f"expected a number, got {v!r}", p)
            if k in _INT_FIELDS:
                if v != int(v):
                    raise InvalidConfigError(f"expected an integer, got {v!r}", p)
                v = int(v)
            kwargs[k] = v
    try:
        return cls(**kwargs)
    except InvalidConfigError as exc:
        if exc.path:
            raise
        raise InvalidConfigError(str(exc), path_prefix) from None


_TOP_KEYS = {"name", "link", "signal", "ssfm", "estimator", "seed", "outputs", "deviations"}


def config_from_dict(cfg):
    """Parse and validate a scenario dict; errors name the offending field."""
    if not isinstance(cfg, dict):
        raise InvalidConfigError("scenario config must be an object", "<root>")
    unknown = set(cfg) - _TOP_KEYS
    if unknown:
        raise InvalidConfigError(f"unknown keys {sorted(unknown)}", "<root>")
    if "link" not in cfg:
        raise InvalidConfigError("missing required field", "link")
    if "seed" not in cfg:
        raise InvalidConfigError("missing required field (no wall-clock seeding)", "seed")
    link = link_from_config(cfg["link"], "link")
    signal = _section(cfg, "signal", SignalConfig, "signal")
    ssfm = _section(cfg, "ssfm", SsfmConfig, "ssfm", exclude=("reference_bandwidth_hz",))
    est = _section(cfg, "estimator", EstimatorConfig, "estimator")
    dev = cfg.get("deviations") or []
    if not isinstance(dev, list) or not all(isinstance(d, str) for d in dev):
        raise InvalidConfigError("expected a list of strings", "deviations")
    outputs = cfg.get("outputs")
    if outputs is not None and not isinstance(outputs, str):
        raise InvalidConfigError("expected a path string", "outputs")
    return ScenarioConfig(link, cfg["seed"], signal, ssfm, est, str(cfg.get("name", "custom")),
                          outputs, tuple(dev))


def load_config(text):
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidConfigError(f"invalid JSON: {exc}", "<root>") from None
    return config_from_dict(raw)


# --- presets ----------------------------------------------------------------

_DESK_BLOCKS = "block count chosen for desk-scale runtime"


def _chain_amps(n_spans, set_snr_db=None, first=1, degraded=None):
    amps = []
    for k in range(first, n_spans + 1):
        a = {"before_span": k, "gain_db": "auto"}
        snr = (degraded or {}).get(k, set_snr_db)
        if snr is not None:
            a["set_snr_db"] = snr
        amps.append(a)
    return amps


def preset(name, pin_dbm=None, set_snr_db=None, injection_span=4, neighbor_power_dbm=8.0,
           point_loss=True, blocks=None, seed=1):
    """Fully populated :class:`ScenarioConfig` for a named setup.

    ============  =================================================================
    fig2a         6x80 km, 0 dBm, one 20 dB set-SNR injection (span 2, 4 or 6 input)
    fig2b         as fig2a with the injection level swept (``set_snr_db``, default 15)
    fig2c         6x80 km, 0 dBm, 20 dB injection at every span input
    fig3          12x80 km amplifier chain (25 dB set-SNR per amp), 0 or 5 dBm
    pointloss     12x75 km chain at 5 dBm, 7 dB loss after span 4, degraded amp 5
    xpm           12x75 km chain at 5 dBm with 4 WDM neighbours (-10 or +8 dBm)
    ============  =================================================================
    """
    if name not in PRESETS:
        raise InvalidConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}", "preset")
    dev = []
    ssfm = {"step_km": 5.0, "max_phase_rad": 5e-3}
    signal = {"blocks": 16}
    estimator = {}
    if name in ("fig2a", "fig2b", "fig2c"):
        if name == "fig2a" and injection_span not in (2, 4, 6):
            raise InvalidConfigError("injection_span must be 2, 4 or 6", "preset.injection_span")
        link = {"launch_power_dbm": 0.0 if pin_dbm is None else pin_dbm,
                "spans": {"count": 6, "length_km": 80.0},
                "amps": _chain_amps(6, first=2)}
        if name == "fig2c":
            snr = 20.0 if set_snr_db is None else set_snr_db
            link["noise_injections"] = [{"before_span": k, "set_snr_db": snr} for k in range(1, 7)]
        else:
            snr = set_snr_db if set_snr_db is not None else (15.0 if name == "fig2b" else 20.0)
            link["noise_injections"] = [{"before_span": injection_span, "set_snr_db": snr}]
        dev.append("amplifiers are noiseless; link noise comes only from the set-SNR injections")
    elif name == "fig3":
        snr = 25.0 if set_snr_db is None else set_snr_db
        link = {"launch_power_dbm": 0.0 if pin_dbm is None else pin_dbm,
                "spans": {"count": 12, "length_km": 80.0},
                "amps": _chain_amps(12, snr)}
        signal["blocks"] = 8
        estimator["oracle"] = True
        dev.append(f"per-amplifier set-SNR {snr:g} dB")
        dev.append(_DESK_BLOCKS)
    elif name == "pointloss":
        snr = 25.0 if set_snr_db is None else set_snr_db
        loss = 7.0 if point_loss else 0.0
        link = {"launch_power_dbm": 5.0 if pin_dbm is None else pin_dbm,
                "spans": {"count": 12, "length_km": 75.0},
                "amps": _chain_amps(12, snr, degraded={5: snr - loss})}
        if point_loss:
            link["point_losses"] = [{"after_span": 4, "loss_db": 7.0}]
        signal["blocks"] = 8
        dev.append(f"per-amplifier set-SNR {snr:g} dB; the amplifier after the loss is degraded by the loss")
        dev.append("single channel: no WDM neighbours")
        dev.append(_DESK_BLOCKS)
    else:
        snr = 25.0 if set_snr_db is None else set_snr_db
        link = {"launch_power_dbm": 5.0 if pin_dbm is None else pin_dbm,
                "spans": {"count": 12, "length_km": 75.0},
                "amps": _chain_amps(12, snr),
                "wdm_neighbors": [{"offset_hz": off, "power_dbm": neighbor_power_dbm, "seed": k}
                                  for k, off in enumerate((-200e9, -100e9, 100e9, 200e9))]}
        signal.update(symbols_per_block=2**14, sim_samples_per_symbol=8, blocks=8)
        ssfm = {"step_km": 1.0, "max_phase_rad": 5e-3}
        estimator["oracle"] = True
        dev.append("4 WDM neighbours at 100 GHz spacing (desk scale)")
        dev.append("2^14 symbols per block at 8 samples/symbol in simulation (desk scale)")
        dev.append(_DESK_BLOCKS)
    if blocks is not None:
        signal["blocks"] = blocks
    cfg = {"name": name, "link": link, "signal": signal, "ssfm": ssfm, "estimator": estimator,
           "seed": seed, "outputs": f"out/{name}", "deviations": dev}
    return config_from_dict(cfg)


# --- running ----------------------------------------------------------------


@dataclass
class RunResult:
    """In-memory outputs of :func:`run`. ``artifacts`` maps file names to text."""

    config: ScenarioConfig
    artifacts: dict
    manifest: dict
    estimator: GosnrEstimator
    reference: ReferenceProfile = None
    oracle_snr_db: float = None
    span_gosnr_db: np.ndarray = None

    @property
    def ppe(self):
        return self.estimator.ppe_

    @property
    def nppe(self):
        return self.estimator.nppe_

    @property
    def gosnr(self):
        return self.estimator.profile_

    @property
    def flagged(self):
        return int(sum(v != "ok" for v in self.gosnr.validity)) + len(self.ppe.flags)

    @property
    def end_gosnr_db(self):
        """Windowed estimate over the last span."""
        return float(self.span_gosnr_db[-1])


def _receiver(config, plan):
    s, e = config.signal, config.estimator
    return Receiver(plan, s.baud_rate, s.rolloff, s.samples_per_symbol, e.demod_mode, e.pilot_length)


def process_block(config, plan, z_grid, block, waveform=None):
    """Simulate (unless ``waveform`` is given), receive and correlate one block.

    Returns ``(correlations[2, n_z], flags, decision_error_rate)``.
    """
    if waveform is None:
        waveform, frame = simulate_block(plan, config.signal, config.ssfm, config.seed, block)
    else:
        _, frame = transmit(plan, config.signal, config.seed, block)
    # blind mode has a four-fold phase ambiguity, so the known frame is not compared
    hint = frame if config.estimator.demod_mode == "genie" else None
    rx = _receiver(config, plan).transform(waveform, hint)
    corr = block_correlations(rx, plan, z_grid, (PPE, NPPE))
    return corr, rx.flags, rx.decision_error_rate


def _process_star(args):
    return process_block(*args)


def simulate(config, blocks=None):
    """Propagate every block; yields ``(block_index, received_waveform)``."""
    plan = config.plan
    for b in range(config.signal.blocks if blocks is None else blocks):
        w, _ = simulate_block(plan, config.signal, config.ssfm, config.seed, b)
        yield b, w


def run(config, workers=1, svg=False, waveforms=None):
    """End-to-end scenario: blocks -> profiles -> gOSNR -> references -> artifacts.

    ``waveforms`` (one received field per block) skips the simulation, which is
    how the ``estimate`` command processes captured files. Blocks may run in
    ``workers`` processes; results are reduced in block order.
    """
    t0 = time.perf_counter()
    plan = config.plan
    z = _check_grid(plan, plan.z_grid(config.estimator.z_step_km))
    n_blocks = config.signal.blocks if waveforms is None else len(waveforms)
    jobs = [(config, plan, z, b, None if waveforms is None else waveforms[b]) for b in range(n_blocks)]
    if workers > 1 and n_blocks > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_process_star, jobs))
    else:
        results = [_process_star(j) for j in jobs]
    t_blocks = time.perf_counter() - t0

    per = np.array([r[0] for r in results])
    flags = tuple(sorted({f for r in results for f in r[1]}))
    e = config.estimator
    ppe = reduce_blocks(PPE, z, per[:, 0, :], e.correlation_convention, flags)
    nppe = reduce_blocks(NPPE, z, per[:, 1, :], e.correlation_convention, flags)
    est = GosnrEstimator(plan, config.signal.baud_rate, e.z_step_km, z, e.correlation_convention,
                         e.ratio_model, e.ceiling_db, e.floor_db).fit_profiles(ppe, nppe)
    spans = est.span_estimates()

    f_baud = config.signal.baud_rate
    artifacts = {"ppe.csv": ppe.to_csv(), "nppe.csv": nppe.to_csv(), "gosnr.csv": est.profile_.to_csv()}
    buf = ["span,start_km,gosnr_db"]
    for k, (s0, g) in enumerate(zip(plan.span_starts_km, spans), start=1):
        buf.append(f"{k},{s0:.6g},{g:.9f}")
    artifacts["span_gosnr.csv"] = "\n".join(buf) + "\n"

    reference = None
    try:
        reference = analytic_ase_osnr(plan, z, f_baud, e.ceiling_db)
        artifacts["reference_ase.csv"] = reference.to_csv()
    except UnsupportedInAnalyticError:
        pass

    oracle_db = None
    t1 = time.perf_counter()
    if e.oracle and waveforms is None:
        sig = replace(config.signal, symbols_per_block=min(e.oracle_symbols_per_block,
                                                           config.signal.symbols_per_block),
                      blocks=e.oracle_blocks)
        oracle_db = effective_snr_oracle(plan, config.seed, e.oracle_blocks, sig, config.ssfm)
        osnr = oracle_db + lin_to_db(r_factor(f_baud))
        artifacts["reference_oracle.csv"] = ReferenceProfile(
            np.array([plan.total_length_km]), np.array([osnr]), ("ase", "nli")).to_csv()
    t_oracle = time.perf_counter() - t1

    if svg:
        series = [("estimated gOSNR", z, np.where(est.profile_.ok, est.profile_.gosnr_db, np.nan), False)]
        if reference is not None:
            series.append(("set OSNR (ASE)", z, reference.osnr_db, True))
        artifacts["gosnr.svg"] = line_plot(series, f"{config.name}: longitudinal gOSNR",
                                           "z (km)", "gOSNR (dB / 12.5 GHz)")
        norm = np.max(np.abs(ppe.values)) or 1.0
        artifacts["profiles.svg"] = line_plot(
            [("PPE", z, ppe.values / norm, False), ("NPPE", z, nppe.values / norm, False)],
            f"{config.name}: correlation profiles", "z (km)", "correlation (norm.)")

    manifest = {
        "scenario": config.name,
        "config_hash": config.config_hash(),
        "config": config.to_dict(),
        "root_seed": config.seed,
        "block_seeds": [block_seeds(config.seed, b, plan.wdm_neighbors) for b in range(n_blocks)],
        "artifacts": sorted(artifacts),
        "version": __version__,
        "timings_s": {"blocks": round(t_blocks, 3), "oracle": round(t_oracle, 3),
                      "total": round(time.perf_counter() - t0, 3)},
        "deviations": list(config.deviations),
        "flags": list(flags),
        "decision_error_rate": [r[2] for r in results],
        "flagged_points": int(sum(v != "ok" for v in est.profile_.validity)),
        "span_gosnr_db": [None if not np.isfinite(g) else round(float(g), 6) for g in spans],
        "oracle_snr_db": oracle_db,
        "imag_leakage": {"PPE": ppe.imag_leakage, "NPPE": nppe.imag_leakage},
    }
    return RunResult(config, artifacts, manifest, est, reference, oracle_db, spans)
