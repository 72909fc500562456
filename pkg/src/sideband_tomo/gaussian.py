"""Two-mode Gaussian state algebra.

Quadratures follow x = a + a^dagger, so the vacuum covariance matrix is the
identity (shot-noise units). Vectors are ordered (q1, p1, q2, p2).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

DEFAULT_TOL = 1e-8

J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])
PAULI_Z = np.diag([1.0, -1.0])
OMEGA = np.kron(np.eye(2), J2)


class ModalBasis(enum.Enum):
    """Which pair of modes a state vector refers to."""

    SIDEBAND_PM = "sideband_pm"  # (q+, p+, q-, p-)
    SYM_ANTISYM = "sym_antisym"  # (q_s, p_s, q_a, p_a)

    @property
    def other(self) -> "ModalBasis":
        if self is ModalBasis.SIDEBAND_PM:
            return ModalBasis.SYM_ANTISYM
        return ModalBasis.SIDEBAND_PM


class NonPhysicalError(ValueError):
    """Raised when a covariance matrix violates the uncertainty principle."""


@dataclass(frozen=True)
class TmstParams:
    """Physical knobs of a symmetric-displaced two-mode squeezed thermal state.

    Parameters
    ----------
    alpha : complex
        Symmetric displacement amplitude.
    n_sq : float
        Squeezed photons per mode, sinh(r)**2.
    n_th : float
        Total thermal photons N1 + N2.
    r_th : float
        Fraction of the thermal photons sitting in the upper sideband.
    """

    alpha: complex = 0j
    n_sq: float = 0.0
    n_th: float = 0.0
    r_th: float = 0.5

    def __post_init__(self):
        if not (self.n_sq >= 0):
            raise ValueError(f"n_sq must be >= 0, got {self.n_sq}")
        if not (self.n_th >= 0):
            raise ValueError(f"n_th must be >= 0, got {self.n_th}")
        if not (0.0 <= self.r_th <= 1.0):
            raise ValueError(f"r_th must lie in [0, 1], got {self.r_th}")
        object.__setattr__(self, "alpha", complex(self.alpha))

    @property
    def squeezing_r(self) -> float:
        return math.asinh(math.sqrt(self.n_sq))


@dataclass(frozen=True)
class GaussianTwoModeState:
    first_moments: np.ndarray
    cm: np.ndarray
    basis: ModalBasis = field(default=ModalBasis.SIDEBAND_PM)

    def __post_init__(self):
        r = np.array(self.first_moments, dtype=float).reshape(4)
        cm = np.array(self.cm, dtype=float)
        if cm.shape != (4, 4):
            raise ValueError(f"cm must be 4x4, got shape {cm.shape}")
        _check_symmetric(cm)
        r.setflags(write=False)
        cm.setflags(write=False)
        object.__setattr__(self, "first_moments", r)
        object.__setattr__(self, "cm", cm)
        object.__setattr__(self, "basis", ModalBasis(self.basis))

    def block(self, i: int, j: int) -> np.ndarray:
        """Return the 2x2 block (i, j) of the covariance matrix, i, j in {0, 1}."""
        return self.cm[2 * i:2 * i + 2, 2 * j:2 * j + 2]


def _check_symmetric(cm, rtol=1e-12):
    cm = np.asarray(cm, dtype=float)
    scale = max(1.0, float(np.max(np.abs(cm))))
    if np.max(np.abs(cm - cm.T)) > rtol * scale:
        raise ValueError("covariance matrix is not symmetric")


def vacuum_state(basis=ModalBasis.SIDEBAND_PM) -> GaussianTwoModeState:
    return GaussianTwoModeState(np.zeros(4), np.eye(4), basis)


def tmst_blocks(params: TmstParams) -> tuple[float, float, float]:
    """Return the (A, B, C) entries of the sideband covariance matrix."""
    n_sq, n_th, r_th = params.n_sq, params.n_th, params.r_th
    common = 1.0 + 2.0 * n_sq * (1.0 + n_th)
    a = common + 2.0 * r_th * n_th
    b = common + 2.0 * (1.0 - r_th) * n_th
    c = 2.0 * (1.0 + n_th) * math.sqrt(n_sq * (1.0 + n_sq))
    return a, b, c


def tmst_state(params: TmstParams) -> GaussianTwoModeState:
    """Ground-truth state in the upper/lower sideband basis.

    The covariance matrix is [[A I, C Z], [C Z, B I]] with Z = diag(1, -1);
    the symmetric displacement puts sqrt(2) alpha on both sidebands.
    """
    a, b, c = tmst_blocks(params)
    cm = np.block([[a * np.eye(2), c * PAULI_Z], [c * PAULI_Z, b * np.eye(2)]])
    d = math.sqrt(2.0) * np.array([params.alpha.real, params.alpha.imag])
    return GaussianTwoModeState(np.concatenate([d, d]), cm, ModalBasis.SIDEBAND_PM)


def mode_mixing_matrix() -> np.ndarray:
    """Orthogonal symplectic map from sideband to symmetric/antisymmetric quadratures.

    ``S @ (q+, p+, q-, p-) = (q_s, p_s, q_a, p_a)``.
    """
    eye = np.eye(2)
    return np.block([[eye, eye], [-J2, J2]]) / math.sqrt(2.0)


def change_basis(state: GaussianTwoModeState) -> GaussianTwoModeState:
    """Express ``state`` in the other modal basis."""
    s = mode_mixing_matrix()
    if state.basis is ModalBasis.SIDEBAND_PM:
        cm = s @ state.cm @ s.T
        r = s @ state.first_moments
    else:
        cm = s.T @ state.cm @ s
        r = s.T @ state.first_moments
    cm = 0.5 * (cm + cm.T)
    return GaussianTwoModeState(r, cm, state.basis.other)


def physicality_margin(cm) -> float:
    """Smallest eigenvalue of the Hermitian matrix ``cm + i*Omega``."""
    cm = np.asarray(cm, dtype=float)
    _check_symmetric(cm)
    n = cm.shape[0] // 2
    omega = np.kron(np.eye(n), J2)
    return float(np.linalg.eigvalsh(cm + 1j * omega)[0])


def check_physicality(cm, tol: float = DEFAULT_TOL) -> tuple[bool, float]:
    """Return ``(passes, margin)`` for the condition cm + i*Omega >= 0."""
    margin = physicality_margin(cm)
    return margin >= -tol, margin


def _as_2x2(cm2):
    cm2 = np.asarray(cm2, dtype=float)
    if cm2.shape != (2, 2):
        raise ValueError(f"expected a 2x2 block, got shape {cm2.shape}")
    _check_symmetric(cm2)
    det = cm2[0, 0] * cm2[1, 1] - cm2[0, 1] * cm2[1, 0]
    if not det > 0 or cm2[0, 0] <= 0:
        raise ValueError("single-mode block is not positive definite")
    return cm2, det


def purity(cm2) -> float:
    """Purity 1/sqrt(det) of a single-mode Gaussian block (1 for pure states)."""
    _, det = _as_2x2(cm2)
    return 1.0 / math.sqrt(det)


def block_eigenvalues(cm2) -> tuple[float, float]:
    """Closed-form eigenvalues (smaller first) of a symmetric 2x2 block."""
    cm2, _ = _as_2x2(cm2)
    half_tr = 0.5 * (cm2[0, 0] + cm2[1, 1])
    half_diff = 0.5 * (cm2[0, 0] - cm2[1, 1])
    rad = math.hypot(half_diff, cm2[0, 1])
    return half_tr - rad, half_tr + rad


def noise_reduction_db(cm2) -> float:
    """Noise reduction below shot noise, in dB, of the most squeezed quadrature."""
    lam_min, _ = block_eigenvalues(cm2)
    return -10.0 * math.log10(lam_min)


def symplectic_eigenvalues(cm) -> np.ndarray:
    """Symplectic spectrum ``(nu_1, nu_2)`` in ascending order.

    Uses the Hermitian form sqrt(cm) (i Omega) sqrt(cm), whose eigenvalues are
    +/- nu_k, so a symmetric eigensolver does all the work.
    """
    cm = np.asarray(cm, dtype=float)
    _check_symmetric(cm)
    w, v = np.linalg.eigh(cm)
    if w[0] <= 0:
        raise NonPhysicalError("covariance matrix is not positive definite")
    root = (v * np.sqrt(w)) @ v.T
    n = cm.shape[0] // 2
    omega = np.kron(np.eye(n), J2)
    ev = np.linalg.eigvalsh(root @ (1j * omega) @ root)
    return np.sort(np.abs(ev))[::2]


def ppt_min_symplectic_eigenvalue(cm, tol: float = DEFAULT_TOL) -> float:
    """Minimum symplectic eigenvalue of the partial transpose of a two-mode CM.

    Values below 1 certify entanglement between the two modes. The closed
    form (delta - sqrt(delta**2 - 4 det cm)) / 2 only screens for unphysical
    input: near a degenerate spectrum it loses half the digits, so the value
    itself comes from the eigensolver on the transposed matrix.
    """
    cm = np.asarray(cm, dtype=float)
    _check_symmetric(cm)
    a, b, c = cm[:2, :2], cm[2:, 2:], cm[:2, 2:]
    delta = np.linalg.det(a) + np.linalg.det(b) - 2.0 * np.linalg.det(c)
    disc = delta * delta - 4.0 * np.linalg.det(cm)
    if disc < -tol * max(1.0, delta * delta):
        raise NonPhysicalError(f"negative discriminant {disc:.3e} for PPT eigenvalue")
    flip = np.diag([1.0, 1.0, 1.0, -1.0])
    return float(symplectic_eigenvalues(flip @ cm @ flip)[0])


def total_fluctuation_photons(cm) -> float:
    """Mean photon number carried by the fluctuations, trace(cm)/4 - 1."""
    cm = np.asarray(cm, dtype=float)
    _check_symmetric(cm)
    return 0.25 * float(np.trace(cm)) - 1.0


def sideband_energies(params: TmstParams) -> tuple[float, float]:
    shared = params.n_sq * (1.0 + params.n_th)
    return (shared + params.r_th * params.n_th,
            shared + (1.0 - params.r_th) * params.n_th)


def tmst_params_from_blocks(a: float, c: float, alpha: complex = 0j) -> TmstParams:
    """Balanced TMST parameters reproducing sideband entries ``A = B = a``, ``C = c``.

    The symplectic eigenvalue sqrt(a^2 - c^2) fixes the thermal photons and
    a / nu = cosh(2r) fixes the squeezing.
    """
    if not a > abs(c) or c < 0:
        raise ValueError("need a > c >= 0")
    nu = math.sqrt(a * a - c * c)
    if nu < 1.0:
        raise NonPhysicalError(f"symplectic eigenvalue {nu} < 1")
    n_sq = 0.5 * (a / nu - 1.0)
    return TmstParams(alpha=alpha, n_sq=n_sq, n_th=nu - 1.0, r_th=0.5)
