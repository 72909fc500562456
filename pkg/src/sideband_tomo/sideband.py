"""Mixer-phase quadrature selection and the OPO cavity readout."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .gaussian import GaussianTwoModeState, ModalBasis, TmstParams

TWO_PI = 2.0 * math.pi


def canonical_phase(phi):
    """Wrap an angle (scalar or array) into [0, 2 pi)."""
    out = np.mod(phi, TWO_PI)
    # np.mod can return exactly 2 pi for tiny negative inputs
    out = np.where(out >= TWO_PI, 0.0, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class QuadratureSpec:
    """LO phase ``theta`` and mixer phase ``psi``, both in radians."""

    theta: float
    psi: float

    def __post_init__(self):
        if not (math.isfinite(self.theta) and math.isfinite(self.psi)):
            raise ValueError("phases must be finite")
        object.__setattr__(self, "theta", canonical_phase(self.theta))
        object.__setattr__(self, "psi", canonical_phase(self.psi))


def selection_vector(spec: QuadratureSpec) -> np.ndarray:
    """Weights u with X_theta(psi) = u . (q_s, p_s, q_a, p_a)."""
    return selection_vectors(spec.theta, spec.psi)


def selection_vectors(theta, psi) -> np.ndarray:
    """Vectorised :func:`selection_vector`; returns shape ``theta.shape + (4,)``."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    cp, sp = math.cos(psi), math.sin(psi)
    return np.stack([cp * c, cp * s, sp * c, sp * s], axis=-1)


def _require_sym_antisym(state):
    if state.basis is not ModalBasis.SYM_ANTISYM:
        raise ValueError("state must be expressed in the symmetric/antisymmetric basis")


def quadrature_moments(state: GaussianTwoModeState, spec: QuadratureSpec) -> tuple[float, float]:
    """Mean and variance of the homodyne outcome for ``spec``."""
    _require_sym_antisym(state)
    u = selection_vector(spec)
    v = np.array([math.cos(spec.theta), math.sin(spec.theta)])
    cp, sp = math.cos(spec.psi), math.sin(spec.psi)
    cm = state.cm
    off = cm[:2, 2:]
    # only the symmetric part of the off block is visible; an antisymmetric
    # delta cancels exactly here rather than to rounding
    var = (cp * cp * (v @ cm[:2, :2] @ v) + sp * sp * (v @ cm[2:, 2:] @ v)
           + 2.0 * cp * sp * (v @ (0.5 * (off + off.T)) @ v))
    return float(u @ state.first_moments), float(var)


def apply_detection_loss(state: GaussianTwoModeState, efficiency: float) -> GaussianTwoModeState:
    """Beam-splitter loss: mixes in vacuum with transmissivity ``efficiency``."""
    if not 0.0 < efficiency <= 1.0:
        raise ValueError(f"efficiency must lie in (0, 1], got {efficiency}")
    if efficiency == 1.0:
        return state
    cm = efficiency * state.cm + (1.0 - efficiency) * np.eye(4)
    return GaussianTwoModeState(math.sqrt(efficiency) * state.first_moments, cm, state.basis)


@dataclass(frozen=True)
class CavityModel:
    """OPO cavity line, all frequencies in Hz.

    ``hf_offset`` is the PDH modulation frequency; it only enters the
    diagnostic error-signal shape.
    """

    linewidth_fwhm: float = 55e6
    fsr: float = 3300e6
    sideband_offset: float = 3e6
    hf_offset: float = 110e6
    detuning: float = 0.0

    def __post_init__(self):
        if not self.linewidth_fwhm > 0:
            raise ValueError("linewidth_fwhm must be positive")
        if not 0 < self.sideband_offset < self.fsr / 2:
            raise ValueError("sideband_offset must lie in (0, fsr/2)")


@dataclass(frozen=True)
class PdhReadout:
    """Relative transmissions of the upper and lower sidebands."""

    tau_plus: float
    tau_minus: float

    def __post_init__(self):
        for v in (self.tau_plus, self.tau_minus):
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"relative transmission {v} outside [0, 1]")
        if abs(self.tau_plus + self.tau_minus - 1.0) > 1e-12:
            raise ValueError("tau_plus + tau_minus must equal 1")

    @classmethod
    def from_tau_plus(cls, tau_plus: float) -> "PdhReadout":
        return cls(tau_plus, 1.0 - tau_plus)


def lorentzian(detuning, linewidth_fwhm):
    x = 2.0 * np.asarray(detuning, dtype=float) / linewidth_fwhm
    return 1.0 / (1.0 + x * x)


def cavity_transmission(cavity: CavityModel) -> tuple[float, float, PdhReadout]:
    """Transmissions T+, T- of the two sidebands and their normalised ratios."""
    t_plus = float(lorentzian(cavity.detuning + cavity.sideband_offset, cavity.linewidth_fwhm))
    t_minus = float(lorentzian(cavity.detuning - cavity.sideband_offset, cavity.linewidth_fwhm))
    tau_plus = t_plus / (t_plus + t_minus)
    return t_plus, t_minus, PdhReadout.from_tau_plus(tau_plus)


def unbalance_from_pdh(readout: PdhReadout, n_total: float) -> float:
    """Sideband energy difference N+ - N- given the total N+ + N-."""
    if n_total < 0:
        raise ValueError("n_total must be non-negative")
    return (readout.tau_plus - readout.tau_minus) * n_total


def thermal_fraction_for_readout(n_sq: float, n_th: float, tau_plus: float) -> float:
    """Thermal fraction r_th for which N+ / (N+ + N-) equals ``tau_plus``.

    This is the state whose unbalance the PDH relation reproduces exactly.
    It equals ``tau_plus`` only without squeezed photons, which split
    evenly between the sidebands.
    """
    n_sq_each = n_sq * (1.0 + n_th)
    total = 2.0 * n_sq_each + n_th
    if n_th == 0.0:
        if total > 0 and abs(tau_plus - 0.5) > 1e-12:
            raise ValueError("an unbalanced readout needs thermal photons")
        return 0.5
    r_th = (tau_plus * total - n_sq_each) / n_th
    if not -1e-12 <= r_th <= 1.0 + 1e-12:
        raise ValueError(f"tau_plus={tau_plus:.6g} is unreachable with n_sq={n_sq}, n_th={n_th}")
    return min(max(r_th, 0.0), 1.0)


def coupled_params(params: TmstParams, readout: "PdhReadout") -> TmstParams:
    """``params`` with the thermal fraction slaved to the cavity readout."""
    r_th = thermal_fraction_for_readout(params.n_sq, params.n_th, readout.tau_plus)
    return TmstParams(params.alpha, params.n_sq, params.n_th, r_th)


def _fp_reflection(detuning, cavity: CavityModel):
    # lossless symmetric Fabry-Perot with finesse fsr / linewidth
    finesse = cavity.fsr / cavity.linewidth_fwhm
    # finesse = pi sqrt(R) / (1 - R)  ->  solve for R
    k = math.pi / finesse
    sqrt_r = (-k + math.sqrt(k * k + 4.0)) / 2.0
    refl = sqrt_r * sqrt_r
    r = math.sqrt(refl)
    phase = np.exp(1j * TWO_PI * np.asarray(detuning, dtype=float) / cavity.fsr)
    return r * (phase - 1.0) / (1.0 - refl * phase)


def _pdh_raw(detuning, cavity):
    m = cavity.hf_offset
    f0 = _fp_reflection(detuning, cavity)
    fp = _fp_reflection(detuning + m, cavity)
    fm = _fp_reflection(detuning - m, cavity)
    return np.imag(f0 * np.conj(fp) - np.conj(f0) * fm)


def pdh_error_signal(cavity: CavityModel, detuning_grid) -> np.ndarray:
    """Ideal PDH dispersion curve on ``detuning_grid``.

    Returns an ``(n, 2)`` array of (detuning, error) rows, normalised to a
    central peak of 1 and oriented with positive slope at the lock point.
    """
    if not cavity.hf_offset > cavity.linewidth_fwhm:
        raise ValueError("PDH modulation must exceed the cavity linewidth")
    grid = np.asarray(detuning_grid, dtype=float)

    def antisym(d):
        return 0.5 * (_pdh_raw(d, cavity) - _pdh_raw(-d, cavity))

    ref = np.linspace(0.0, cavity.hf_offset / 2, 4001)
    ref_err = antisym(ref)
    peak = np.max(np.abs(ref_err))
    sign = 1.0 if ref_err[1] >= 0 else -1.0
    return np.column_stack([grid, sign * antisym(grid) / peak])
