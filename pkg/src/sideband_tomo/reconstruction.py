"""Covariance-matrix reconstruction from four phase-scanned homodyne traces.

The symmetric (psi = 0) and antisymmetric (psi = pi/2) traces give the
single-mode blocks, the psi = +/- pi/4 traces give the epsilon entries of the
off-diagonal block, and the PDH readout fixes the delta entries.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .gaussian import (
    GaussianTwoModeState,
    ModalBasis,
    change_basis,
    mode_mixing_matrix,
    noise_reduction_db,
    physicality_margin,
    ppt_min_symplectic_eigenvalue,
    purity,
    symplectic_eigenvalues,
    total_fluctuation_photons,
)
from .sideband import PdhReadout, QuadratureSpec, quadrature_moments, unbalance_from_pdh
from .traces import HomodyneTrace, make_rng

HARMONIC = "harmonic"
BINNED = "binned"
ESTIMATORS = (HARMONIC, BINNED)

BIN_HALF_WIDTH = math.pi / 100  # bins are pi/50 wide
MIN_BIN_SAMPLES = 10
COVERAGE_TOL = 0.05
DEFAULT_BOOTSTRAP = 500


class CoverageError(ValueError):
    """The LO phases of a trace do not sample [0, 2 pi) evenly enough."""


@dataclass(frozen=True)
class MomentEstimates:
    """First and second central moments of one mode, with standard errors."""

    mean_q: float
    mean_p: float
    var_q: float
    var_p: float
    cov_qp: float
    se_mean_q: float = float("nan")
    se_mean_p: float = float("nan")
    se_var_q: float = float("nan")
    se_var_p: float = float("nan")
    se_cov_qp: float = float("nan")

    @property
    def negative_variance(self) -> bool:
        return self.var_q <= 0 or self.var_p <= 0

    @property
    def means(self) -> tuple[float, float]:
        return self.mean_q, self.mean_p

    @property
    def cm(self) -> np.ndarray:
        return np.array([[self.var_q, self.cov_qp], [self.cov_qp, self.var_p]])


def _check_coverage(theta):
    if theta.size < 8:
        raise CoverageError(f"only {theta.size} samples")
    z = np.exp(1j * theta)
    for k in (1, 2, 4):
        if abs(np.mean(z**k)) > COVERAGE_TOL:
            raise CoverageError(f"LO phase coverage is uneven (harmonic {k})")


def _se(samples):
    return float(np.std(samples, ddof=1) / math.sqrt(samples.size))


class _Prepared:
    """Trace samples with LO-phase harmonics and estimator features precomputed.

    ``w`` holds integer resampling counts for the bootstrap: drawing samples
    with replacement is the same as weighting each original sample by how
    often it was drawn, which avoids copying the arrays per resample.
    """

    def __init__(self, psi, theta, x):
        self.psi, self.theta, self.x = psi, theta, x
        self.c, self.s = np.cos(theta), np.sin(theta)
        c2, s2 = np.cos(2.0 * theta), np.sin(2.0 * theta)
        x2 = x * x
        self.x2 = x2
        self.yq = 2.0 * x * self.c
        self.yp = 2.0 * x * self.s
        self.fq = x2 * (1.0 + 2.0 * c2)
        self.fp = x2 * (1.0 - 2.0 * c2)
        self.fc = 2.0 * x2 * s2
        self.w = None
        self._masks = {}

    @classmethod
    def of(cls, trace):
        if isinstance(trace, cls):
            return trace
        _check_coverage(trace.theta)
        return cls(trace.psi, trace.theta, trace.x)

    def reweighted(self, counts):
        out = object.__new__(_Prepared)
        out.__dict__.update(self.__dict__)
        out.w = counts
        return out

    @property
    def weighted(self) -> bool:
        return self.w is not None

    def mean(self, f, mask=None):
        if mask is None:
            return float(f.mean()) if self.w is None else float(f @ self.w) / self.w.sum()
        if self.w is None:
            return float(f[mask].mean())
        wm = self.w[mask]
        return float(f[mask] @ wm) / wm.sum()

    def se(self, f, mask=None):
        if self.w is not None:
            return float("nan")
        return _se(f if mask is None else f[mask])

    def mask(self, centre):
        if centre not in self._masks:
            self._masks[centre] = _bin_mask(self.theta, centre)
        return self._masks[centre]


def _bin_mask(theta, centre):
    d = np.mod(theta - centre + 0.5 * math.pi, math.pi) - 0.5 * math.pi
    mask = np.abs(d) <= BIN_HALF_WIDTH
    if np.count_nonzero(mask) < MIN_BIN_SAMPLES:
        raise CoverageError(f"fewer than {MIN_BIN_SAMPLES} samples in the bin at {centre:.4f}")
    return mask


def estimate_first_moments(trace: HomodyneTrace) -> tuple[float, float, float, float]:
    """Return ``(mean_q, mean_p, se_q, se_p)`` from the first LO harmonic.

    E[x | theta] = <q> cos(theta) + <p> sin(theta), so twice the projection
    onto cos and sin over a uniform sweep is unbiased.
    """
    tr = _Prepared.of(trace)
    return tr.mean(tr.yq), tr.mean(tr.yp), tr.se(tr.yq), tr.se(tr.yp)


def estimate_second_moments(trace: HomodyneTrace, first_moments=None,
                            method: str = HARMONIC) -> MomentEstimates:
    """Central second moments of the mode probed by ``trace``.

    ``method="harmonic"`` projects x^2 onto the LO harmonics over the whole
    sweep, using E[x^2 | theta] = (Vq + Vp)/2 + (Vq - Vp)/2 cos 2theta +
    Cqp sin 2theta for the raw moments V and C. ``method="binned"`` takes the
    mean squared residual (after removing the fitted mean curve) in phase bins
    at 0, pi/4, pi/2 and 3pi/4 and their pi-shifted partners. A negative
    variance is reported with a warning, never clamped.
    """
    tr = _Prepared.of(trace)
    fm = estimate_first_moments(tr) if first_moments is None else first_moments
    mq, mp = float(fm[0]), float(fm[1])
    se_mq, se_mp = (fm[2], fm[3]) if len(fm) >= 4 else estimate_first_moments(tr)[2:]
    if method == HARMONIC:
        var_q = tr.mean(tr.fq) - mq * mq
        var_p = tr.mean(tr.fp) - mp * mp
        cov = tr.mean(tr.fc) - mq * mp
        if tr.weighted:
            se = [float("nan")] * 3
        else:
            # delta method on the per-sample features
            se = [tr.se(tr.fq - 2 * mq * tr.yq), tr.se(tr.fp - 2 * mp * tr.yp),
                  tr.se(tr.fc - mp * tr.yq - mq * tr.yp)]
    elif method == BINNED:
        resid = tr.x - (mq * tr.c + mp * tr.s)
        r2 = resid * resid
        stats = []
        for centre in (0.0, 0.25 * math.pi, 0.5 * math.pi, 0.75 * math.pi):
            mask = tr.mask(centre)
            stats.append((tr.mean(r2, mask), tr.se(r2, mask)))
        var_q, se_q = stats[0]
        var_p, se_p = stats[2]
        cov = 0.5 * (stats[1][0] - stats[3][0])
        se = [se_q, se_p, 0.5 * math.hypot(stats[1][1], stats[3][1])]
    else:
        raise ValueError(f"unknown estimator {method!r}; choose from {ESTIMATORS}")
    out = MomentEstimates(mq, mp, float(var_q), float(var_p), float(cov),
                          float(se_mq), float(se_mp), *map(float, se))
    if out.negative_variance:
        warnings.warn(f"negative variance estimate at psi={tr.psi:.4f}", RuntimeWarning)
    return out


def _raw_qq_pp(tr, method):
    """Raw <q^2>, <p^2> of a trace plus standard errors."""
    if method == HARMONIC:
        return tr.mean(tr.fq), tr.mean(tr.fp), tr.se(tr.fq), tr.se(tr.fp)
    if method == BINNED:
        mq, mp = tr.mask(0.0), tr.mask(0.5 * math.pi)
        return tr.mean(tr.x2, mq), tr.mean(tr.x2, mp), tr.se(tr.x2, mq), tr.se(tr.x2, mp)
    raise ValueError(f"unknown estimator {method!r}; choose from {ESTIMATORS}")


def estimate_epsilon(trace_plus: HomodyneTrace, trace_minus: HomodyneTrace, means_s, means_a,
                     method: str = HARMONIC) -> tuple[float, float, float, float]:
    """Return ``(eps_q, eps_p, se_q, se_p)`` from the psi = +/- pi/4 traces.

    eps_l = (<l_+^2> - <l_-^2>)/2 - <l_s><l_a> for l = q, p.
    """
    qp, pp, se_qp, se_pp = _raw_qq_pp(_Prepared.of(trace_plus), method)
    qm, pm, se_qm, se_pm = _raw_qq_pp(_Prepared.of(trace_minus), method)
    eps_q = 0.5 * (qp - qm) - means_s[0] * means_a[0]
    eps_p = 0.5 * (pp - pm) - means_s[1] * means_a[1]
    return (float(eps_q), float(eps_p),
            0.5 * math.hypot(se_qp, se_qm), 0.5 * math.hypot(se_pp, se_pm))


def assemble_cm(moments_s: MomentEstimates, moments_a: MomentEstimates, eps, delta_n: float
                ) -> tuple[np.ndarray, np.ndarray]:
    """Build the symmetric/antisymmetric covariance matrix and first moments."""
    eps_q, eps_p = eps[0], eps[1]
    off = np.array([[eps_q, delta_n], [-delta_n, eps_p]])
    cm = np.block([[moments_s.cm, off], [off.T, moments_a.cm]])
    r = np.array([moments_s.mean_q, moments_s.mean_p, moments_a.mean_q, moments_a.mean_p])
    return cm, r


def n_total_from_cm(cm_prime) -> float:
    return total_fluctuation_photons(cm_prime)


def transform_to_sidebands(cm_prime, r_prime) -> tuple[np.ndarray, np.ndarray]:
    state = change_basis(GaussianTwoModeState(r_prime, cm_prime, ModalBasis.SYM_ANTISYM))
    return np.array(state.cm), np.array(state.first_moments)


@dataclass(frozen=True)
class TraceSet:
    """The four mixer-phase traces needed for a full reconstruction."""

    trace_s: HomodyneTrace
    trace_a: HomodyneTrace
    trace_plus: HomodyneTrace
    trace_minus: HomodyneTrace

    PSIS = {"trace_s": 0.0, "trace_a": 0.5 * math.pi,
            "trace_plus": 0.25 * math.pi, "trace_minus": 1.75 * math.pi}

    def __post_init__(self):
        for name, psi in self.PSIS.items():
            tr = getattr(self, name)
            gap = abs((tr.psi - psi + math.pi) % (2 * math.pi) - math.pi)
            if gap > 1e-9:
                raise ValueError(f"{name} has psi={tr.psi}, expected {psi}")
        ids = {t.meta.get("scenario") for t in self.traces}
        if len(ids) > 1:
            raise ValueError(f"traces come from different scenarios: {sorted(map(str, ids))}")

    @property
    def traces(self) -> tuple[HomodyneTrace, ...]:
        return self.trace_s, self.trace_a, self.trace_plus, self.trace_minus

    @classmethod
    def from_traces(cls, traces) -> "TraceSet":
        """Sort traces by mixer phase; exactly one per required phase."""
        found = {}
        for tr in traces:
            for name, psi in cls.PSIS.items():
                if abs((tr.psi - psi + math.pi) % (2 * math.pi) - math.pi) < 1e-9:
                    if name in found:
                        raise ValueError(f"duplicate trace for {name}")
                    found[name] = tr
        missing = sorted(set(cls.PSIS) - set(found))
        if missing:
            raise ValueError(f"incomplete trace set, missing {missing}")
        return cls(**found)


METRIC_NAMES = ("mu_s", "mu_a", "db_s", "db_a", "lambda_ppt", "physicality_margin",
                "n_total", "delta_n", "nu_min", "nu_max")


def _safe(fn, *args):
    try:
        return float(fn(*args))
    except ValueError:
        return float("nan")


def state_metrics(cm_prime, cm_omega, delta_n: float) -> dict:
    """Scalar figures of merit for a reconstructed state."""
    try:
        nu = symplectic_eigenvalues(cm_prime)
    except ValueError:
        nu = (float("nan"), float("nan"))
    return {
        "mu_s": _safe(purity, cm_prime[:2, :2]),
        "mu_a": _safe(purity, cm_prime[2:, 2:]),
        "db_s": _safe(noise_reduction_db, cm_prime[:2, :2]),
        "db_a": _safe(noise_reduction_db, cm_prime[2:, 2:]),
        "lambda_ppt": _safe(ppt_min_symplectic_eigenvalue, cm_omega),
        "physicality_margin": physicality_margin(cm_prime),
        "n_total": total_fluctuation_photons(cm_prime),
        "delta_n": float(delta_n),
        "nu_min": float(nu[0]),
        "nu_max": float(nu[1]),
    }


@dataclass
class ReconstructedState:
    """Reconstruction in both modal bases, with metrics and standard errors.

    ``errors`` maps ``"r_prime"``, ``"cm_prime"``, ``"r_omega"``, ``"cm_omega"``
    and every metric name to its standard error (arrays for the matrices).
    """

    r_prime: np.ndarray
    cm_prime: np.ndarray
    delta_n: float
    r_omega: np.ndarray
    cm_omega: np.ndarray
    metrics: dict
    errors: dict = field(default_factory=dict)
    moments: dict = field(default_factory=dict)
    method: str = HARMONIC

    @property
    def physical(self) -> bool:
        return self.metrics["physicality_margin"] >= 0

    @property
    def entangled(self) -> bool:
        return self.metrics["lambda_ppt"] < 1.0

    def flat(self) -> np.ndarray:
        return np.concatenate([self.r_prime, self.cm_prime.ravel(), self.r_omega,
                               self.cm_omega.ravel(),
                               [self.metrics[k] for k in METRIC_NAMES]])


def _prepare(traceset):
    return tuple(_Prepared.of(t) for t in traceset.traces)


def _point_estimate(prepared, pdh: PdhReadout, method: str) -> ReconstructedState:
    tr_s, tr_a, tr_plus, tr_minus = prepared
    mom_s = estimate_second_moments(tr_s, estimate_first_moments(tr_s), method)
    mom_a = estimate_second_moments(tr_a, estimate_first_moments(tr_a), method)
    eps = estimate_epsilon(tr_plus, tr_minus, mom_s.means, mom_a.means, method)
    # the trace, hence the fluctuation energy, does not depend on delta
    n_total = n_total_from_cm(assemble_cm(mom_s, mom_a, eps, 0.0)[0])
    delta_n = unbalance_from_pdh(pdh, max(n_total, 0.0))
    cm_prime, r_prime = assemble_cm(mom_s, mom_a, eps, delta_n)
    cm_omega, r_omega = transform_to_sidebands(cm_prime, r_prime)
    metrics = state_metrics(cm_prime, cm_omega, delta_n)
    return ReconstructedState(r_prime, cm_prime, delta_n, r_omega, cm_omega, metrics, {},
                              {"s": mom_s, "a": mom_a, "eps": eps}, method)


def analytic_errors(est: ReconstructedState, pdh: PdhReadout) -> dict:
    """Linearised standard errors of R' and sigma' from the per-trace estimators.

    Cheap stand-in for :func:`bootstrap_errors`. Entries are treated as
    independent, both within sigma' and when propagating to the sideband
    basis; scalar metrics other than n_total and delta_n are left as NaN.
    """
    mom_s, mom_a, eps = est.moments["s"], est.moments["a"], est.moments["eps"]
    se_n = 0.25 * math.sqrt(sum(m.se_var_q ** 2 + m.se_var_p ** 2 for m in (mom_s, mom_a)))
    se_delta = abs(pdh.tau_plus - pdh.tau_minus) * se_n

    def block(m):
        return np.array([[m.se_var_q, m.se_cov_qp], [m.se_cov_qp, m.se_var_p]])

    off = np.array([[eps[2], se_delta], [se_delta, eps[3]]])
    cm_se = np.block([[block(mom_s), off], [off.T, block(mom_a)]])
    r_var = np.array([mom_s.se_mean_q, mom_s.se_mean_p, mom_a.se_mean_q, mom_a.se_mean_p]) ** 2
    # sigma_omega is linear in the ten independent entries of sigma'
    s_mat = mode_mixing_matrix()
    cm_omega_var = np.zeros((4, 4))
    for i in range(4):
        for j in range(i, 4):
            unit = np.zeros((4, 4))
            unit[i, j] = unit[j, i] = 1.0
            cm_omega_var += (s_mat.T @ unit @ s_mat) ** 2 * cm_se[i, j] ** 2
    errs = {
        "r_prime": np.array([mom_s.se_mean_q, mom_s.se_mean_p, mom_a.se_mean_q, mom_a.se_mean_p]),
        "cm_prime": cm_se,
        "r_omega": np.sqrt((s_mat.T ** 2) @ r_var),
        "cm_omega": np.sqrt(cm_omega_var),
        "n_total": se_n,
        "delta_n": se_delta,
    }
    errs.update({k: float("nan") for k in METRIC_NAMES if k not in errs})
    return errs


def _unflatten(vec):
    errs = {
        "r_prime": vec[0:4],
        "cm_prime": vec[4:20].reshape(4, 4),
        "r_omega": vec[20:24],
        "cm_omega": vec[24:40].reshape(4, 4),
    }
    errs.update({k: float(v) for k, v in zip(METRIC_NAMES, vec[40:])})
    return errs


def bootstrap_errors(traceset: TraceSet, pdh: PdhReadout, n_resamples: int = DEFAULT_BOOTSTRAP,
                     seed: int = 0, method: str = HARMONIC) -> dict:
    """Nonparametric bootstrap standard errors of every reconstructed quantity.

    Samples are redrawn with replacement as (theta, x) pairs, the whole
    reconstruction is rerun per resample, and resample ``k`` always uses the
    generator seeded by ``(seed, k)``. The two traces of a dual-channel
    acquisition (same LO sweep) are resampled with shared indices so their
    sample-by-sample correlation survives.
    """
    if n_resamples < 100:
        raise ValueError("need at least 100 bootstrap resamples")
    prepared = _prepare(traceset)
    paired = [np.array_equal(prepared[i].theta, prepared[i + 1].theta) for i in (0, 2)]
    runs = np.empty((n_resamples, 40 + len(METRIC_NAMES)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for k in range(n_resamples):
            rng = make_rng(seed, k)
            sample = []
            for i, shared in zip((0, 2), paired):
                for j in (i, i + 1):
                    if j == i or not shared:
                        n = prepared[j].x.size
                        counts = np.bincount(rng.integers(0, n, size=n), minlength=n)
                    sample.append(prepared[j].reweighted(counts))
            runs[k] = _point_estimate(sample, pdh, method).flat()
    return _unflatten(np.nanstd(runs, axis=0, ddof=1))


def reconstruct(traceset: TraceSet, pdh: PdhReadout, method: str = HARMONIC,
                n_bootstrap: int = 0, seed: int = 0) -> ReconstructedState:
    """Full pipeline: moments, epsilon, delta from the PDH channel, basis change, metrics.

    Errors come from the bootstrap when ``n_bootstrap > 0`` and from
    :func:`analytic_errors` otherwise. Unphysical reconstructions are
    returned as-is with their (negative) margin.
    """
    est = _point_estimate(_prepare(traceset), pdh, method)
    if n_bootstrap:
        est.errors = bootstrap_errors(traceset, pdh, n_bootstrap, seed, method)
    else:
        est.errors = analytic_errors(est, pdh)
    return est


def reconstruct_exact(state_prime: GaussianTwoModeState, pdh: Optional[PdhReadout] = None
                      ) -> ReconstructedState:
    """Reconstruction fed with exact moments instead of sampled traces.

    Uses the ideal values each estimator converges to; with ``pdh`` omitted the
    delta entry is read straight from ``state_prime``.
    """
    if state_prime.basis is not ModalBasis.SYM_ANTISYM:
        raise ValueError("expected a symmetric/antisymmetric state")

    def moments(theta, psi):
        return quadrature_moments(state_prime, QuadratureSpec(theta, psi))

    def raw(theta, psi):
        m, v = moments(theta, psi)
        return v + m * m

    quarter = 0.25 * math.pi
    mom = {}
    for key, psi in (("s", 0.0), ("a", 2 * quarter)):
        mq, vq = moments(0.0, psi)
        mp, vp = moments(2 * quarter, psi)
        cov = 0.5 * (moments(quarter, psi)[1] - moments(3 * quarter, psi)[1])
        mom[key] = MomentEstimates(mq, mp, vq, vp, cov)
    mom_s, mom_a = mom["s"], mom["a"]
    eps_q = 0.5 * (raw(0.0, quarter) - raw(0.0, -quarter)) - mom_s.mean_q * mom_a.mean_q
    eps_p = 0.5 * (raw(2 * quarter, quarter) - raw(2 * quarter, -quarter)) \
        - mom_s.mean_p * mom_a.mean_p
    cm0, _ = assemble_cm(mom_s, mom_a, (eps_q, eps_p), 0.0)
    if pdh is None:
        delta_n = state_prime.cm[0, 3]
    else:
        delta_n = unbalance_from_pdh(pdh, max(n_total_from_cm(cm0), 0.0))
    cm_prime, r_prime = assemble_cm(mom_s, mom_a, (eps_q, eps_p), delta_n)
    cm_omega, r_omega = transform_to_sidebands(cm_prime, r_prime)
    return ReconstructedState(r_prime, cm_prime, delta_n, r_omega, cm_omega,
                              state_metrics(cm_prime, cm_omega, delta_n))
