"""Link topology and its compilation into an ordered propagation plan.

A :class:`LinkSpec` lists fibre spans, amplifiers, point losses and noise
injections in propagation order. :func:`compile_link` resolves automatic
gains and set-SNR noise levels against the nominal power of the test channel
and produces a :class:`PropagationPlan` whose cumulative dispersion map
``B(z)`` (ps^2) is shared by the fibre simulator, the receiver and the
correlation templates.

Config schema (JSON-compatible, span numbers are 1-based)::

    {
      "launch_power_dbm": 0.0,
      "fiber": {"alpha_db_per_km": 0.2, "dispersion_ps_nm_km": 17.0,
                "gamma_per_w_km": 1.3, "reference_wavelength_nm": 1550.0},
      "spans": [{"length_km": 80.0}, ...]       # or {"count": 6, "length_km": 80}
      "amps": [{"before_span": 2, "gain_db": "auto", "set_snr_db": 20.0}],
      "point_losses": [{"after_span": 4, "loss_db": 7.0}],
      "noise_injections": [{"before_span": 4, "set_snr_db": 20.0}],
      "wdm_neighbors": [{"offset_hz": 1.0e11, "power_dbm": -10.0, "seed": 1}]
    }

``before_span = n_spans + 1`` places a node after the last span. Amplifiers
take at most one of ``set_snr_db`` / ``noise_figure_db``.
"""

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.constants as const

from ._validation import InvalidArgumentError, InvalidConfigError

C_NM_PER_PS = const.c * 1e9 / 1e12

SSMF = {
    "alpha_db_per_km": 0.2,
    "dispersion_ps_nm_km": 17.0,
    "gamma_per_w_km": 1.3,
    "reference_wavelength_nm": 1550.0,
}


def beta2_from_dispersion(d_ps_nm_km, wavelength_nm=1550.0):
    """GVD coefficient in ps^2/km from the dispersion parameter D."""
    return -d_ps_nm_km * wavelength_nm**2 / (2.0 * np.pi * C_NM_PER_PS)


@dataclass(frozen=True)
class FiberSpan:
    length_km: float
    alpha_db_per_km: float = SSMF["alpha_db_per_km"]
    dispersion_ps_nm_km: float = SSMF["dispersion_ps_nm_km"]
    gamma_per_w_km: float = SSMF["gamma_per_w_km"]
    reference_wavelength_nm: float = SSMF["reference_wavelength_nm"]

    def __post_init__(self):
        if not self.length_km > 0:
            raise InvalidConfigError(f"span length must be > 0, got {self.length_km}")
        if self.alpha_db_per_km < 0:
            raise InvalidConfigError(f"alpha must be >= 0, got {self.alpha_db_per_km}")
        if self.gamma_per_w_km < 0:
            raise InvalidConfigError(f"gamma must be >= 0, got {self.gamma_per_w_km}")

    @property
    def beta2_ps2_per_km(self):
        return beta2_from_dispersion(self.dispersion_ps_nm_km, self.reference_wavelength_nm)

    @property
    def loss_db(self):
        return self.alpha_db_per_km * self.length_km


@dataclass(frozen=True)
class AmplifierNode:
    """Lumped amplifier. ``gain_db="auto"`` restores the power lost since the previous amplifier."""

    gain_db: object = "auto"
    set_snr_db: float = None
    noise_figure_db: float = None

    def __post_init__(self):
        if self.gain_db != "auto" and not np.isfinite(self.gain_db):
            raise InvalidConfigError(f"gain_db must be finite or 'auto', got {self.gain_db}")
        if self.set_snr_db is not None and self.noise_figure_db is not None:
            raise InvalidConfigError("amplifier takes set_snr_db or noise_figure_db, not both")
        if self.set_snr_db is not None and not self.set_snr_db > 0:
            raise InvalidConfigError(f"set_snr_db must be > 0 dB, got {self.set_snr_db}")

    @property
    def noise_mode(self):
        if self.set_snr_db is not None:
            return "set_snr"
        if self.noise_figure_db is not None:
            return "noise_figure"
        return "none"


@dataclass(frozen=True)
class PointLoss:
    loss_db: float

    def __post_init__(self):
        if self.loss_db < 0:
            raise InvalidConfigError(f"loss_db must be >= 0, got {self.loss_db}")


@dataclass(frozen=True)
class NoiseInjection:
    """Gainless white-noise source at ``set_snr_db`` relative to the test channel."""

    set_snr_db: float


@dataclass(frozen=True)
class WdmNeighbor:
    offset_hz: float
    power_dbm: float
    seed: int = 0


@dataclass(frozen=True)
class LinkSpec:
    elements: tuple
    launch_power_dbm: float = 0.0
    wdm_neighbors: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(self.elements))
        object.__setattr__(self, "wdm_neighbors", tuple(self.wdm_neighbors))

    @property
    def spans(self):
        return [e for e in self.elements if isinstance(e, FiberSpan)]

    @property
    def total_length_km(self):
        return math.fsum(s.length_km for s in self.spans)

    @classmethod
    def from_config(cls, cfg, path="link"):
        return link_from_config(cfg, path)

    def to_config(self):
        return link_to_config(self)


# --- plan -------------------------------------------------------------------


@dataclass(frozen=True)
class FiberSegment:
    start_z_km: float
    length_km: float
    alpha_db_per_km: float
    beta2_ps2_per_km: float
    gamma_per_w_km: float
    span_index: int

    @property
    def alpha_per_km(self):
        """Power attenuation coefficient in 1/km."""
        return self.alpha_db_per_km * np.log(10.0) / 10.0


@dataclass(frozen=True)
class LumpedGain:
    start_z_km: float
    gain_db: float


@dataclass(frozen=True)
class LumpedLoss:
    start_z_km: float
    loss_db: float


@dataclass(frozen=True)
class NoiseStep:
    """White noise added at ``start_z_km``.

    Set-SNR nodes carry ``inband_power_mw`` (noise power inside the
    reference bandwidth, normally the baud rate); noise-figure nodes carry an
    absolute ``psd_mw_per_hz``.
    """

    start_z_km: float
    signal_power_mw: float
    inband_power_mw: float = None
    psd_mw_per_hz: float = None

    @property
    def snr_db(self):
        if self.inband_power_mw is None:
            return None
        return 10.0 * np.log10(self.signal_power_mw / self.inband_power_mw)

    def psd(self, reference_bandwidth_hz):
        if self.psd_mw_per_hz is not None:
            return self.psd_mw_per_hz
        if reference_bandwidth_hz is None:
            raise InvalidConfigError("set-SNR noise needs a reference bandwidth (the baud rate)")
        return self.inband_power_mw / reference_bandwidth_hz


@dataclass(frozen=True)
class PropagationPlan:
    steps: tuple
    total_length_km: float
    launch_power_dbm: float
    breakpoints_km: np.ndarray = field(repr=False)
    breakpoint_beta2_ps2: np.ndarray = field(repr=False)
    wdm_neighbors: tuple = ()

    @property
    def segments(self):
        return [s for s in self.steps if isinstance(s, FiberSegment)]

    @property
    def noise_steps(self):
        return [s for s in self.steps if isinstance(s, NoiseStep)]

    @property
    def span_starts_km(self):
        return np.array([s.start_z_km for s in self.segments])

    def cumulative_beta2(self, z_km):
        return cumulative_beta2(self, z_km)

    def z_grid(self, step_km):
        n = int(round(self.total_length_km / step_km))
        grid = np.arange(n + 1) * step_km
        return grid[grid <= self.total_length_km + 1e-9]


def compile_link(spec):
    """Resolve a :class:`LinkSpec` into a :class:`PropagationPlan`."""
    if not spec.elements:
        raise InvalidConfigError("link has no elements")
    if not spec.spans:
        raise InvalidConfigError("link needs at least one fibre span")
    if spec.launch_power_dbm is None:
        raise InvalidConfigError("launch_power_dbm undefined: amplifiers have no signal power reference")

    p_sig = 10.0 ** (spec.launch_power_dbm / 10.0)
    pending_loss_db = 0.0
    z_parts = []
    steps = []
    span_index = 0
    bps = [0.0]
    bvals = [0.0]
    b_parts = []
    for el in spec.elements:
        z = math.fsum(z_parts)
        if isinstance(el, FiberSpan):
            steps.append(FiberSegment(z, el.length_km, el.alpha_db_per_km,
                                      el.beta2_ps2_per_km, el.gamma_per_w_km, span_index))
            span_index += 1
            z_parts.append(el.length_km)
            b_parts.append(el.beta2_ps2_per_km * el.length_km)
            bps.append(math.fsum(z_parts))
            bvals.append(math.fsum(b_parts))
            p_sig *= 10.0 ** (-el.loss_db / 10.0)
            pending_loss_db += el.loss_db
        elif isinstance(el, PointLoss):
            steps.append(LumpedLoss(z, el.loss_db))
            p_sig *= 10.0 ** (-el.loss_db / 10.0)
            pending_loss_db += el.loss_db
        elif isinstance(el, AmplifierNode):
            gain = pending_loss_db if el.gain_db == "auto" else float(el.gain_db)
            pending_loss_db = 0.0
            steps.append(LumpedGain(z, gain))
            p_sig *= 10.0 ** (gain / 10.0)
            if el.noise_mode == "set_snr":
                steps.append(NoiseStep(z, p_sig, inband_power_mw=p_sig / 10.0 ** (el.set_snr_db / 10.0)))
            elif el.noise_mode == "noise_figure":
                nu = const.c / (spans_wavelength_nm(spec) * 1e-9)
                g_lin = 10.0 ** (gain / 10.0)
                psd_w = 10.0 ** (el.noise_figure_db / 10.0) * const.h * nu * max(g_lin - 1.0, 0.0)
                steps.append(NoiseStep(z, p_sig, psd_mw_per_hz=psd_w * 1e3))
        elif isinstance(el, NoiseInjection):
            if not el.set_snr_db > 0:
                raise InvalidConfigError(f"set_snr_db must be > 0 dB, got {el.set_snr_db}")
            steps.append(NoiseStep(z, p_sig, inband_power_mw=p_sig / 10.0 ** (el.set_snr_db / 10.0)))
        else:
            raise InvalidConfigError(f"unknown link element {el!r}")
    return PropagationPlan(
        steps=tuple(steps),
        total_length_km=math.fsum(z_parts),
        launch_power_dbm=spec.launch_power_dbm,
        breakpoints_km=np.array(bps),
        breakpoint_beta2_ps2=np.array(bvals),
        wdm_neighbors=spec.wdm_neighbors,
    )


def spans_wavelength_nm(spec):
    return spec.spans[0].reference_wavelength_nm


def cumulative_beta2(plan, z_km):
    """Accumulated GVD ``B(z) = ∫_0^z β2 dz'`` in ps^2 (piecewise linear).

    Accepts a scalar or an array of positions in ``[0, L]``.
    """
    z = np.asarray(z_km, dtype=float)
    L = plan.total_length_km
    tol = 1e-9 * max(L, 1.0)
    if np.any(z < -tol) or np.any(z > L + tol):
        raise InvalidArgumentError(f"z must lie in [0, {L}] km, got {z_km}")
    z = np.clip(z, 0.0, L)
    bp, bv = plan.breakpoints_km, plan.breakpoint_beta2_ps2
    slopes = np.array([s.beta2_ps2_per_km for s in plan.segments])
    idx = np.clip(np.searchsorted(bp, z, side="right") - 1, 0, len(bp) - 2)
    out = bv[idx] + slopes[idx] * (z - bp[idx])
    out = np.where(z == bp[-1], bv[-1], out)
    return float(out) if out.ndim == 0 else out


# --- config -----------------------------------------------------------------


def _number(cfg, key, path, default=None, required=False):
    if key not in cfg:
        if required:
            raise InvalidConfigError("missing required field", f"{path}.{key}")
        return default
    val = cfg[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise InvalidConfigError(f"expected a number, got {val!r}", f"{path}.{key}")
    return float(val)


def _span_number(item, key, n_spans, path, lo):
    if key not in item:
        raise InvalidConfigError("missing required field", f"{path}.{key}")
    k = item[key]
    if isinstance(k, bool) or not isinstance(k, int) or not lo <= k <= n_spans + (1 if key == "before_span" else 0):
        raise InvalidConfigError(f"span number out of range: {k!r}", f"{path}.{key}")
    return k


_LINK_KEYS = {"launch_power_dbm", "fiber", "spans", "amps", "point_losses",
              "noise_injections", "wdm_neighbors"}


def link_from_config(cfg, path="link"):
    """Build a :class:`LinkSpec` from a JSON-compatible dict."""
    if not isinstance(cfg, dict):
        raise InvalidConfigError("expected an object", path)
    unknown = set(cfg) - _LINK_KEYS
    if unknown:
        raise InvalidConfigError(f"unknown keys {sorted(unknown)}", path)
    fiber = dict(SSMF)
    for k, v in (cfg.get("fiber") or {}).items():
        if k not in SSMF:
            raise InvalidConfigError("unknown fibre parameter", f"{path}.fiber.{k}")
        fiber[k] = _number(cfg["fiber"], k, f"{path}.fiber")

    raw_spans = cfg.get("spans")
    if isinstance(raw_spans, dict):
        n = raw_spans.get("count")
        if isinstance(n, bool) or not isinstance(n, int) or n < 1:
            raise InvalidConfigError("count must be a positive integer", f"{path}.spans.count")
        raw_spans = [{k: v for k, v in raw_spans.items() if k != "count"}] * n
    if not raw_spans:
        raise InvalidConfigError("link needs at least one span", f"{path}.spans")
    spans = []
    for i, s in enumerate(raw_spans):
        p = f"{path}.spans[{i}]"
        params = dict(fiber)
        for k in s:
            if k != "length_km" and k not in SSMF:
                raise InvalidConfigError("unknown span parameter", f"{p}.{k}")
            if k in SSMF:
                params[k] = _number(s, k, p)
        length = _number(s, "length_km", p, required=True)
        try:
            spans.append(FiberSpan(length, **params))
        except InvalidConfigError as exc:
            raise InvalidConfigError(str(exc), p) from None
    n_spans = len(spans)

    before = {k: [] for k in range(1, n_spans + 2)}
    after = {k: [] for k in range(1, n_spans + 1)}
    for i, a in enumerate(cfg.get("amps") or []):
        p = f"{path}.amps[{i}]"
        k = _span_number(a, "before_span", n_spans, p, 1)
        gain = a.get("gain_db", "auto")
        if gain != "auto":
            gain = _number(a, "gain_db", p)
        try:
            before[k].append(AmplifierNode(gain, _number(a, "set_snr_db", p), _number(a, "noise_figure_db", p)))
        except InvalidConfigError as exc:
            raise InvalidConfigError(str(exc), p) from None
    for i, a in enumerate(cfg.get("noise_injections") or []):
        p = f"{path}.noise_injections[{i}]"
        k = _span_number(a, "before_span", n_spans, p, 1)
        snr = _number(a, "set_snr_db", p, required=True)
        if not snr > 0:
            raise InvalidConfigError("set_snr_db must be > 0 dB", f"{p}.set_snr_db")
        before[k].append(NoiseInjection(snr))
    for i, pl in enumerate(cfg.get("point_losses") or []):
        p = f"{path}.point_losses[{i}]"
        k = _span_number(pl, "after_span", n_spans, p, 1)
        try:
            after[k].append(PointLoss(_number(pl, "loss_db", p, required=True)))
        except InvalidConfigError as exc:
            raise InvalidConfigError(str(exc), p) from None

    elements = []
    for k in range(1, n_spans + 1):
        elements.extend(before[k])
        elements.append(spans[k - 1])
        elements.extend(after[k])
    elements.extend(before[n_spans + 1])

    neighbors = []
    for i, nb in enumerate(cfg.get("wdm_neighbors") or []):
        p = f"{path}.wdm_neighbors[{i}]"
        seed = nb.get("seed", i)
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise InvalidConfigError("seed must be an integer", f"{p}.seed")
        neighbors.append(WdmNeighbor(_number(nb, "offset_hz", p, required=True),
                                     _number(nb, "power_dbm", p, required=True), seed))
    launch = _number(cfg, "launch_power_dbm", path, required=True)
    return LinkSpec(tuple(elements), launch, tuple(neighbors))


def link_to_config(spec):
    """Inverse of :func:`link_from_config` (canonical, fully expanded form)."""
    spans, amps, losses, injections = [], [], [], []
    for el in spec.elements:
        k = len(spans) + 1
        if isinstance(el, FiberSpan):
            spans.append({
                "length_km": el.length_km,
                "alpha_db_per_km": el.alpha_db_per_km,
                "dispersion_ps_nm_km": el.dispersion_ps_nm_km,
                "gamma_per_w_km": el.gamma_per_w_km,
                "reference_wavelength_nm": el.reference_wavelength_nm,
            })
        elif isinstance(el, AmplifierNode):
            a = {"before_span": k, "gain_db": el.gain_db}
            if el.set_snr_db is not None:
                a["set_snr_db"] = el.set_snr_db
            if el.noise_figure_db is not None:
                a["noise_figure_db"] = el.noise_figure_db
            amps.append(a)
        elif isinstance(el, NoiseInjection):
            injections.append({"before_span": k, "set_snr_db": el.set_snr_db})
        elif isinstance(el, PointLoss):
            losses.append({"after_span": k - 1, "loss_db": el.loss_db})
    return {
        "launch_power_dbm": spec.launch_power_dbm,
        "spans": spans,
        "amps": amps,
        "point_losses": losses,
        "noise_injections": injections,
        "wdm_neighbors": [
            {"offset_hz": n.offset_hz, "power_dbm": n.power_dbm, "seed": n.seed}
            for n in spec.wdm_neighbors
        ],
    }
