"""Correlation-template power profiles.

For a position ``z`` the template is the first-order Kerr distortion that a
field ``b`` (given on the z = 0 plane) would generate at ``z``, brought back
to z = 0::

    template(z) = -j · D(-B(z)) · N_eRP · D(B(z)) · b
    N_eRP(x)    = (|x|² - 2⟨|x|²⟩) · x          (|x|² summed over polarizations)

Correlating it with the residual ``delta_e`` gives the power profile. The
signal-only path (``kind="PPE"``) uses the regenerated reference ``u_ref``;
the noise-inclusive path (``kind="NPPE"``) uses the whole received field
``e_tot_0``, so its correlation also picks up the nonlinear signature of the
noise that was present at ``z``.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from sklearn.base import BaseEstimator

from ._validation import InvalidArgumentError, check_blocks, check_same_shape, check_waveform
from .link import cumulative_beta2
from .ssfm import PS2, angular_frequency, dispersion_step

PPE = "PPE"
NPPE = "NPPE"
CONVENTIONS = ("real", "magnitude")


def n_erp(w):
    """Enhanced regular-perturbation nonlinear operator ``(P_tot - 2⟨P_tot⟩) · w``."""
    check_waveform(w)
    p = np.sum(np.abs(w.samples) ** 2, axis=0)
    return w.with_samples((p - 2.0 * p.mean()) * w.samples)


def _n_erp_array(x):
    p = np.sum(x.real**2 + x.imag**2, axis=0)
    return (p - 2.0 * p.mean()) * x


def build_template(base, z_km, plan):
    """Distortion template of ``base`` generated at ``z_km``, on the z = 0 plane."""
    check_waveform(base, "base")
    b = cumulative_beta2(plan, z_km)
    local = dispersion_step(base, b)
    return dispersion_step(n_erp(local), -b) * -1j


def correlate(delta_e, template):
    """``⟨conj(delta_e) · template⟩``: time mean, summed over polarizations."""
    check_same_shape(delta_e, template)
    if delta_e.n_samples == 0:
        raise InvalidArgumentError("empty waveforms")
    return complex(np.sum(np.conj(delta_e.samples) * template.samples) / delta_e.n_samples)


@dataclass(frozen=True)
class CorrelationProfile:
    """Block-averaged correlation over a grid of positions.

    ``values`` are real (per ``convention``); ``complex_values`` keep the raw
    block-mean correlation; ``block_values`` hold the per-block real values
    used for error bars.
    """

    z_grid_km: np.ndarray
    values: np.ndarray
    kind: str
    blocks_averaged: int
    imag_leakage: float
    complex_values: np.ndarray = field(repr=False, default=None)
    block_values: np.ndarray = field(repr=False, default=None)
    convention: str = "real"
    flags: tuple = ()

    def __post_init__(self):
        z = np.asarray(self.z_grid_km, dtype=float)
        if z.ndim != 1 or (z.size > 1 and np.any(np.diff(z) <= 0)):
            raise InvalidArgumentError("z grid must be strictly increasing")
        if self.blocks_averaged < 1:
            raise InvalidArgumentError("blocks_averaged must be >= 1")
        object.__setattr__(self, "z_grid_km", z)
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    @property
    def stderr(self):
        """Standard error of ``values`` from block-to-block spread (NaN for one block)."""
        if self.block_values is None or self.blocks_averaged < 2:
            return np.full_like(self.values, np.nan)
        return np.std(self.block_values, axis=0, ddof=1) / np.sqrt(self.blocks_averaged)

    def scaled(self, c):
        """Copy with every correlation multiplied by a positive constant."""
        bv = None if self.block_values is None else self.block_values * c
        cv = None if self.complex_values is None else self.complex_values * c
        return CorrelationProfile(self.z_grid_km, self.values * c, self.kind, self.blocks_averaged,
                                  self.imag_leakage, cv, bv, self.convention, self.flags)

    def to_csv(self):
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["z_km", "value_real", "value_imag", "kind", "blocks"])
        cv = self.complex_values if self.complex_values is not None else self.values.astype(complex)
        for z, v, c in zip(self.z_grid_km, self.values, cv):
            wr.writerow([f"{z:.6g}", f"{v:.12e}", f"{c.imag:.12e}", self.kind, self.blocks_averaged])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise InvalidArgumentError("empty profile CSV")
        z = np.array([float(r["z_km"]) for r in rows])
        re = np.array([float(r["value_real"]) for r in rows])
        im = np.array([float(r["value_imag"]) for r in rows])
        return cls(z, re, rows[0]["kind"], int(rows[0]["blocks"]), _leakage(re + 1j * im), re + 1j * im)


def _leakage(cv):
    """Largest imaginary excursion relative to the largest real value.

    The imaginary part is taken about its median over z: the residual's
    correlation with the part of the template that is linear in the residual
    is purely imaginary and nearly independent of z, and it carries no
    information about phase alignment.
    """
    re = np.abs(cv.real)
    im = cv.imag - np.median(cv.imag)
    return float(np.max(np.abs(im)) / np.max(re)) if np.max(re) > 0 else float("inf")


def reduce_blocks(kind, z, per_block, convention, flags):
    per_block = np.asarray(per_block)
    mean = per_block.mean(axis=0)
    if convention == "real":
        values, bv = mean.real, per_block.real
    else:
        values, bv = np.abs(mean), np.abs(per_block)
    return CorrelationProfile(z, values, kind, per_block.shape[0], _leakage(mean), mean, bv,
                              convention, flags)


def block_correlations(rx, plan, z_grid, kinds, guard_fraction=0.0):
    """Complex correlations for one block, shape (len(kinds), len(z_grid))."""
    bases = {PPE: rx.u_ref, NPPE: rx.e_tot_0}
    out = np.empty((len(kinds), len(z_grid)), dtype=complex)
    n = rx.delta_e.n_samples
    if guard_fraction > 0:
        g = int(round(guard_fraction * n))
        window = slice(g, n - g)
        for j, z in enumerate(z_grid):
            for i, k in enumerate(kinds):
                t = build_template(bases[k], z, plan)
                d = rx.delta_e.samples[:, window]
                out[i, j] = np.sum(np.conj(d) * t.samples[:, window]) / d.shape[1]
        return out
    # D(B) is unitary, so <Δ*, D(-B) N D(B) b> = <(D(B) Δ)*, N D(B) b>;
    # and since e_tot_0 = u_ref + Δ, D(B) e_tot_0 = D(B) u_ref + D(B) Δ.
    omega2 = angular_frequency(n, rx.delta_e.sample_rate) ** 2
    d_spec = sfft.fft(rx.delta_e.samples, axis=-1)
    u_spec = sfft.fft(rx.u_ref.samples, axis=-1)
    bz = cumulative_beta2(plan, np.asarray(z_grid))
    for j, b in enumerate(np.atleast_1d(bz)):
        ph = np.exp(1j * (0.5 * b * PS2) * omega2)
        dz = sfft.ifft(d_spec * ph, axis=-1)
        uz = sfft.ifft(u_spec * ph, axis=-1)
        for i, k in enumerate(kinds):
            xz = uz if k == PPE else uz + dz
            out[i, j] = -1j * np.sum(np.conj(dz) * _n_erp_array(xz)) / n
    return out


def _check_grid(plan, z_grid):
    z = np.asarray(z_grid, dtype=float)
    if z.ndim != 1 or z.size == 0:
        raise InvalidArgumentError("z grid must be a non-empty 1-D sequence")
    if z.min() < 0 or z.max() > plan.total_length_km + 1e-9:
        raise InvalidArgumentError(f"z grid must lie within [0, {plan.total_length_km}] km")
    return z


def _flags(blocks):
    return tuple(sorted({f for rx in blocks for f in rx.flags}))


def profile(rx_blocks, kind, plan, z_grid, convention="real", guard_fraction=0.0):
    """Correlation profile of one kind (``"PPE"`` or ``"NPPE"``) averaged over blocks."""
    return profiles(rx_blocks, plan, z_grid, convention, guard_fraction, kinds=(kind,))[kind]


def profiles(rx_blocks, plan, z_grid, convention="real", guard_fraction=0.0, kinds=(PPE, NPPE)):
    """PPE and NPPE profiles sharing one pass over the blocks.

    Returns a dict ``{kind: CorrelationProfile}``. Block results are reduced
    in list order, so the output is deterministic.
    """
    blocks = check_blocks(rx_blocks)
    for k in kinds:
        if k not in (PPE, NPPE):
            raise InvalidArgumentError(f"unknown profile kind {k!r}")
    if convention not in CONVENTIONS:
        raise InvalidArgumentError(f"convention must be one of {CONVENTIONS}")
    z = _check_grid(plan, z_grid)
    per = np.array([block_correlations(rx, plan, z, kinds, guard_fraction) for rx in blocks])
    flags = _flags(blocks)
    return {k: reduce_blocks(k, z, per[:, i, :], convention, flags) for i, k in enumerate(kinds)}


class ProfileEstimator(BaseEstimator):
    """Fit PPE and NPPE correlation profiles from receiver blocks.

    Attributes set by ``fit``: ``ppe_``, ``nppe_`` and ``z_grid_``.
    """

    def __init__(self, plan=None, z_step_km=5.0, z_grid=None, convention="real", guard_fraction=0.0):
        self.plan = plan
        self.z_step_km = z_step_km
        self.z_grid = z_grid
        self.convention = convention
        self.guard_fraction = guard_fraction

    def fit(self, X, y=None):
        if self.plan is None:
            raise InvalidArgumentError("ProfileEstimator needs a propagation plan")
        grid = self.plan.z_grid(self.z_step_km) if self.z_grid is None else self.z_grid
        out = profiles(X, self.plan, grid, self.convention, self.guard_fraction)
        self.ppe_, self.nppe_ = out[PPE], out[NPPE]
        self.z_grid_ = self.ppe_.z_grid_km
        return self

    def transform(self, X):
        """Return the ``(n_z, 2)`` array of [PPE, NPPE] values for new blocks."""
        out = profiles(X, self.plan, self.z_grid_, self.convention, self.guard_fraction)
        return np.column_stack([out[PPE].values, out[NPPE].values])
