"""Synthetic phase-scanned homodyne traces.

Two routes produce the same statistics: direct sampling of the demodulated
quadrature (:func:`synthesize_trace`, :func:`synthesize_dual`) and a raw
photocurrent at the sideband frequency followed by digital mixing and a
boxcar low-pass (:func:`synthesize_raw_photocurrent`, :func:`demodulate`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .gaussian import DEFAULT_TOL, GaussianTwoModeState, ModalBasis, check_physicality
from .sideband import apply_detection_loss, canonical_phase, selection_vectors


@dataclass(frozen=True)
class TraceConfig:
    """Acquisition settings for one homodyne trace.

    ``theta_ramp`` of ``None`` means a linear LO sweep over [0, 2 pi);
    otherwise it is the explicit list of LO phases and fixes ``n_samples``.
    """

    n_samples: int = 100_000
    theta_ramp: Optional[tuple] = None
    visibility: float = 0.95
    electronic_noise_var: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.theta_ramp is not None:
            ramp = tuple(float(t) for t in self.theta_ramp)
            object.__setattr__(self, "theta_ramp", ramp)
            object.__setattr__(self, "n_samples", len(ramp))
        if int(self.n_samples) < 1:
            raise ValueError("n_samples must be >= 1")
        if not 0.0 < self.visibility <= 1.0:
            raise ValueError("visibility must lie in (0, 1]")
        if not self.electronic_noise_var >= 0.0:
            raise ValueError("electronic_noise_var must be >= 0")
        if not 0 <= int(self.rng_seed) < 2**64:
            raise ValueError("rng_seed must be an unsigned 64-bit integer")

    def thetas(self) -> np.ndarray:
        if self.theta_ramp is None:
            return 2.0 * math.pi * np.arange(self.n_samples) / self.n_samples
        return canonical_phase(np.array(self.theta_ramp, dtype=float))


@dataclass(frozen=True)
class HomodyneTrace:
    """One mixer-phase record of (LO phase, quadrature sample) pairs."""

    psi: float
    theta: np.ndarray
    x: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float)
        x = np.array(self.x, dtype=float)
        if theta.shape != x.shape or theta.ndim != 1:
            raise ValueError("theta and x must be 1-d arrays of equal length")
        if theta.size and (theta.min() < 0 or theta.max() >= 2 * math.pi):
            raise ValueError("theta values must lie in [0, 2 pi)")
        theta.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "psi", canonical_phase(self.psi))
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def n_samples(self) -> int:
        return self.x.size

    def take(self, index) -> "HomodyneTrace":
        """Sub-sample (or resample, with repeats) the record by index."""
        return HomodyneTrace(self.psi, self.theta[index], self.x[index], self.meta)


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for ``(seed, stream...)``."""
    return np.random.default_rng([int(seed), *map(int, stream)])


def _detected_state(state, visibility):
    if state.basis is not ModalBasis.SYM_ANTISYM:
        raise ValueError("traces are synthesised from the symmetric/antisymmetric state")
    ok, margin = check_physicality(state.cm, DEFAULT_TOL)
    if not ok:
        raise ValueError(f"state is not physical (margin {margin:.3e})")
    return apply_detection_loss(state, visibility)


def _meta(config, psi, scenario):
    return {
        "psi": canonical_phase(psi),
        "n_samples": config.n_samples,
        "seed": int(config.rng_seed),
        "visibility": config.visibility,
        "electronic_noise_var": config.electronic_noise_var,
        "scenario": scenario,
    }


def synthesize_trace(state: GaussianTwoModeState, psi: float, config: TraceConfig,
                     scenario: str = "", stream: int = 0) -> HomodyneTrace:
    """Sample a single homodyne trace at mixer phase ``psi``."""
    det = _detected_state(state, config.visibility)
    theta = config.thetas()
    u = selection_vectors(theta, psi)
    mean = u @ det.first_moments
    var = np.einsum("ni,ij,nj->n", u, det.cm, u) + config.electronic_noise_var
    rng = make_rng(config.rng_seed, stream)
    x = mean + np.sqrt(var) * rng.standard_normal(theta.size)
    return HomodyneTrace(psi, theta, x, _meta(config, psi, scenario))


def _cm_sqrt(cm):
    w, v = np.linalg.eigh(cm)
    return v * np.sqrt(np.clip(w, 0.0, None))


def synthesize_dual(state: GaussianTwoModeState, psi1: float, config: TraceConfig,
                    scenario: str = "", stream: int = 0) -> tuple[HomodyneTrace, HomodyneTrace]:
    """Simultaneous traces at ``psi1`` and ``psi1 + pi/2`` sharing one LO sweep.

    Each sample pair comes from the same optical draw, so the two channels
    carry their full cross-covariance; electronic noise is independent.
    """
    det = _detected_state(state, config.visibility)
    theta = config.thetas()
    psi2 = psi1 + 0.5 * math.pi
    rng = make_rng(config.rng_seed, stream)
    draws = det.first_moments + rng.standard_normal((theta.size, 4)) @ _cm_sqrt(det.cm).T
    out = []
    for psi in (psi1, psi2):
        x = np.einsum("ni,ni->n", selection_vectors(theta, psi), draws)
        if config.electronic_noise_var > 0:
            x = x + math.sqrt(config.electronic_noise_var) * rng.standard_normal(theta.size)
        out.append(HomodyneTrace(psi, theta, x, _meta(config, psi, scenario)))
    return out[0], out[1]


@dataclass(frozen=True)
class RawConfig:
    """Electronics of the raw-photocurrent route, frequencies in Hz.

    The low-pass is a boxcar over ``1 / lowpass_cutoff``; that length must be
    a whole number of samples and of sideband periods so that the mixer's
    2*omega product averages out exactly.
    """

    sample_rate: float = 24e6
    duration: float = 20e-3
    omega: float = 3e6
    lowpass_cutoff: float = 3e5
    highpass_cutoff: float = 5e5
    white_noise_var_per_sample: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        if not self.sample_rate > 4 * self.omega:
            raise ValueError("sample_rate must exceed 4 * omega")
        if not 0 < self.lowpass_cutoff < self.omega:
            raise ValueError("lowpass_cutoff must lie in (0, omega)")
        if not self.white_noise_var_per_sample >= 0:
            raise ValueError("white_noise_var_per_sample must be >= 0")
        window_samples(self.sample_rate, self.lowpass_cutoff)
        if self.n_windows < 1:
            raise ValueError("duration shorter than one low-pass window")

    @property
    def samples_per_window(self) -> int:
        return window_samples(self.sample_rate, self.lowpass_cutoff)

    @property
    def n_windows(self) -> int:
        return int(round(self.duration * self.lowpass_cutoff))

    @property
    def n_points(self) -> int:
        return self.n_windows * self.samples_per_window


def window_samples(sample_rate: float, lowpass_cutoff: float) -> int:
    m = sample_rate / lowpass_cutoff
    if abs(m - round(m)) > 1e-9 * m:
        raise ValueError("sample_rate / lowpass_cutoff must be an integer")
    return int(round(m))


def lowpass_taps(sample_rate: float, lowpass_cutoff: float) -> np.ndarray:
    """Boxcar FIR taps; first spectral null sits at ``lowpass_cutoff``."""
    m = window_samples(sample_rate, lowpass_cutoff)
    return np.full(m, 1.0 / m)


def linear_ramp(duration: float) -> Callable[[np.ndarray], np.ndarray]:
    """LO phase sweeping [0, 2 pi) once over ``duration`` seconds."""
    def theta_of_t(t):
        return canonical_phase(2.0 * math.pi * np.asarray(t, dtype=float) / duration)
    return theta_of_t


def _window_centres(raw_len, m, sample_rate):
    n_windows = raw_len // m
    return (np.arange(n_windows) * m + 0.5 * (m - 1)) / sample_rate


def synthesize_raw_photocurrent(state: GaussianTwoModeState, theta_of_t: Callable,
                                raw: RawConfig) -> np.ndarray:
    """Photocurrent sampled at ``raw.sample_rate`` carrying both sideband combinations.

    Within each low-pass window the symmetric and antisymmetric quadratures
    are held fixed: I(t) = 2 X_s cos(omega t) - 2 X_a sin(omega t) + noise.
    """
    if state.basis is not ModalBasis.SYM_ANTISYM:
        raise ValueError("raw synthesis needs the symmetric/antisymmetric state")
    ok, margin = check_physicality(state.cm, DEFAULT_TOL)
    if not ok:
        raise ValueError(f"state is not physical (margin {margin:.3e})")
    m = raw.samples_per_window
    n = raw.n_points
    theta = theta_of_t(_window_centres(n, m, raw.sample_rate))
    rng = make_rng(raw.rng_seed)
    draws = state.first_moments + rng.standard_normal((theta.size, 4)) @ _cm_sqrt(state.cm).T
    x_s = np.einsum("ni,ni->n", selection_vectors(theta, 0.0), draws)
    x_a = np.einsum("ni,ni->n", selection_vectors(theta, 0.5 * math.pi), draws)
    t = np.arange(n) / raw.sample_rate
    wt = 2.0 * math.pi * raw.omega * t
    current = 2.0 * np.repeat(x_s, m) * np.cos(wt) - 2.0 * np.repeat(x_a, m) * np.sin(wt)
    if raw.white_noise_var_per_sample > 0:
        current += math.sqrt(raw.white_noise_var_per_sample) * rng.standard_normal(n)
    return current


def demodulate(series, sample_rate: float, omega: float, psi: float, lowpass_cutoff: float,
               theta_of_t: Callable, remove_dc: bool = True, meta: Optional[dict] = None
               ) -> HomodyneTrace:
    """Mix ``series`` with cos(omega t + psi), low-pass and decimate per window.

    The output per window is X_s cos(psi) + X_a sin(psi) for a photocurrent
    built as in :func:`synthesize_raw_photocurrent`: the mixer halves the
    in-band amplitude, which cancels the factor 2 of the current model.
    """
    if not 0 < lowpass_cutoff < omega:
        raise ValueError("lowpass_cutoff must lie in (0, omega)")
    series = np.asarray(series, dtype=float)
    if remove_dc:
        # stands in for the high-pass stage ahead of the mixer
        series = series - series.mean()
    taps = lowpass_taps(sample_rate, lowpass_cutoff)
    m = taps.size
    n_windows = series.size // m
    t = np.arange(n_windows * m) / sample_rate
    mixed = series[: n_windows * m] * np.cos(2.0 * math.pi * omega * t + psi)
    x = mixed.reshape(n_windows, m) @ taps[::-1]
    theta = theta_of_t(_window_centres(series.size, m, sample_rate))
    return HomodyneTrace(psi, theta, x, dict(meta or {}, psi=canonical_phase(psi),
                                             n_samples=int(n_windows)))


def raw_trace(state: GaussianTwoModeState, psi: float, raw: RawConfig,
              theta_of_t: Optional[Callable] = None) -> HomodyneTrace:
    """Convenience: raw photocurrent followed by demodulation at ``psi``."""
    theta_of_t = theta_of_t or linear_ramp(raw.duration)
    current = synthesize_raw_photocurrent(state, theta_of_t, raw)
    return demodulate(current, raw.sample_rate, raw.omega, psi, raw.lowpass_cutoff,
                      theta_of_t, meta={"seed": int(raw.rng_seed)})
