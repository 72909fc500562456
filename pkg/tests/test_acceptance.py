"""Acceptance gate: eight end-to-end criteria at their stated tolerances.

Each test records a one-line verdict that is printed in the pytest terminal
summary, so ``pytest tests/test_acceptance.py`` shows PASS/FAIL per criterion.
"""

import math
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.optimize import brentq

from sideband_tomo import pipeline
from sideband_tomo.gaussian import (
    OMEGA, GaussianTwoModeState, ModalBasis, TmstParams, change_basis, mode_mixing_matrix,
    ppt_min_symplectic_eigenvalue, sideband_energies, tmst_blocks, tmst_state,
    total_fluctuation_photons,
)
from sideband_tomo.reconstruction import estimate_second_moments, reconstruct
from sideband_tomo.sideband import QuadratureSpec, quadrature_moments
from sideband_tomo.traces import RawConfig

from conftest import ACCEPTANCE

J = np.array([[0.0, 1.0], [-1.0, 0.0]])
SZ = np.diag([1.0, -1.0])

# reconstructed sigma' per criterion, for the physicality sweep of criterion 8
RECONSTRUCTIONS = {}


def record(num, checks, elapsed=None):
    """Store the verdict for ``num`` and fail the test if any check failed."""
    failed = [name for name, ok, _ in checks if not ok]
    detail = "; ".join(f"{name}={shown}" for name, _, shown in checks)
    if elapsed is not None:
        detail += f"; runtime={elapsed:.1f}s"
    ACCEPTANCE[num] = (not failed, detail)
    assert not failed, f"criterion {num} failed: {failed} ({detail})"


def symmetric_tmst_from_targets(mu, lam):
    """Root-find (n_sq, n_th) of a balanced TMST with mode purity ``mu`` and PPT eigenvalue ``lam``.

    In the symmetric basis the blocks are diag(A + C, A - C), so mu = 1/sqrt(A^2 - C^2)
    and lam = A - C; each equation is solved numerically on the raw TMST formulas.
    """
    def blocks(n_sq, n_th):
        a = 1 + 2 * n_sq * (1 + n_th) + n_th
        c = 2 * (1 + n_th) * math.sqrt(n_sq * (1 + n_sq))
        return a, c

    def n_sq_for(n_th):
        # A - C falls monotonically from 1 + n_th towards 0 as n_sq grows
        return brentq(lambda n_sq: (lambda a, c: a - c)(*blocks(n_sq, n_th)) - lam, 0.0, 50.0)

    def purity_gap(n_th):
        a, c = blocks(n_sq_for(n_th), n_th)
        return 1 / math.sqrt(a * a - c * c) - mu

    n_th = brentq(purity_gap, max(0.0, lam - 1) + 1e-9, 10.0)
    return n_sq_for(n_th), n_th


def summary_for(name, **overrides):
    sc = pipeline.presets()[name]
    if overrides:
        sc = replace(sc, pipeline=replace(sc.pipeline, **overrides))
    start = time.perf_counter()
    summary = pipeline.cmd_pipeline(sc)
    return sc, summary, time.perf_counter() - start


def test_criterion_1_squeezed():
    n_sq, n_th = symmetric_tmst_from_targets(0.68, 0.50)
    sc, summ, elapsed = summary_for("squeezed")
    RECONSTRUCTIONS[1] = summ
    m = summ["metrics"]
    total = 4 * sc.trace.n_samples
    checks = [
        ("calibration", abs(n_sq - sc.tmst.n_sq) < 1e-3 and abs(n_th - sc.tmst.n_th) < 1e-3
         and sc.tmst.r_th == 0.5, f"({n_sq:.4f},{n_th:.4f})"),
        ("samples", total == 400_000 and summ["n_repetitions"] == 30,
         f"{total}x{summ['n_repetitions']}"),
        ("lambda", abs(m["lambda_ppt"]["mean"] - 0.50) <= 0.02, f"{m['lambda_ppt']['mean']:.4f}"),
        ("mu_s", abs(m["mu_s"]["mean"] - 0.68) <= 0.05, f"{m['mu_s']['mean']:.4f}"),
        ("mu_a", abs(m["mu_a"]["mean"] - 0.68) <= 0.05, f"{m['mu_a']['mean']:.4f}"),
        ("dB_s", abs(m["db_s"]["mean"] - 3.0) <= 0.3, f"{m['db_s']['mean']:.3f}"),
        ("dB_a", abs(m["db_a"]["mean"] - 3.0) <= 0.3, f"{m['db_a']['mean']:.3f}"),
        ("runtime<60s", elapsed < 60, f"{elapsed:.1f}"),
    ]
    record(1, checks)


def test_criterion_2_coherent():
    sc = pipeline.presets()["coherent"]
    assert sc.tmst == TmstParams(alpha=1.0)
    reps = [pipeline.run_once(sc, k) for k in range(10)]
    boot = reconstruct(pipeline.simulate_traces(sc), sc.pdh, n_bootstrap=500, seed=7)
    RECONSTRUCTIONS[2] = [(r.metrics["physicality_margin"], float(np.max(r.errors["cm_prime"])))
                          for r in reps + [boot]]
    mu_s = np.mean([r.metrics["mu_s"] for r in reps])
    mu_a = np.mean([r.metrics["mu_a"] for r in reps])
    target_r = np.array([math.sqrt(2), 0.0, math.sqrt(2), 0.0])
    worst_off, worst_r = 0.0, 0.0
    for r in reps + [boot]:
        off = np.abs(r.cm_prime[:2, 2:])
        se = r.errors["cm_prime"][:2, 2:]
        # delta is fixed by the balanced readout (value and error both 0)
        z_off = np.where(se > 0, off / np.where(se > 0, se, 1), 0.0)
        worst_off = max(worst_off, float(z_off.max()))
        worst_r = max(worst_r, float(np.max(np.abs(r.r_omega - target_r) / r.errors["r_omega"])))
    checks = [
        ("mu_s", 0.97 <= mu_s <= 1.01, f"{mu_s:.4f}"),
        ("mu_a", 0.97 <= mu_a <= 1.01, f"{mu_a:.4f}"),
        ("off-block max|z|<=4", worst_off <= 4, f"{worst_off:.2f}"),
        ("R_omega max|z|<=4", worst_r <= 4, f"{worst_r:.2f}"),
    ]
    record(2, checks)


def test_criterion_3_squeezed_coherent():
    # invert A - C = 0.55 and A + C = 4.174 by root finding on the block formulas
    mu = 1 / math.sqrt(0.55 * 4.174)
    n_sq, n_th = symmetric_tmst_from_targets(mu, 0.55)
    sc, summ, elapsed = summary_for("squeezed-coherent")
    RECONSTRUCTIONS[3] = summ
    a, _, c = tmst_blocks(sc.tmst)
    m = summ["metrics"]
    db = 0.5 * (m["db_s"]["mean"] + m["db_a"]["mean"])
    checks = [
        ("calibration", abs(a - c - 0.55) < 1e-9 and abs(a + c - 4.174) < 1e-9
         and abs(sc.tmst.n_sq - n_sq) < 1e-6 and abs(sc.tmst.n_th - n_th) < 1e-6
         and sc.tmst.alpha == 1.0, f"({n_sq:.4f},{n_th:.4f})"),
        ("lambda", abs(m["lambda_ppt"]["mean"] - 0.55) <= 0.03, f"{m['lambda_ppt']['mean']:.4f}"),
        ("dB", abs(db - 2.60) <= 0.3, f"{db:.3f}"),
    ]
    record(3, checks)


def test_criterion_4_delta_blindness():
    presets = pipeline.presets()
    unb, bal = presets["thermal-unbalanced"], presets["thermal-balanced"]
    st_u, st_b = pipeline.ground_truth(unb)[1], pipeline.ground_truth(bal)[1]
    n_u, n_b = (total_fluctuation_photons(s.cm) for s in (st_u, st_b))
    # the unbalanced state is the balanced one with delta = N+ - N- inserted
    delta = np.subtract(*sideband_energies(unb.tmst))
    cm = np.array(st_b.cm)
    cm[0, 3] = cm[3, 0] = delta
    cm[1, 2] = cm[2, 1] = -delta
    st_delta = GaussianTwoModeState(st_b.first_moments, cm, ModalBasis.SYM_ANTISYM)
    only_delta = np.abs(st_delta.cm - st_u.cm).max() < 1e-12 and delta == 1.0

    # analytic: identical per-theta law at psi = +/- pi/4, compared bit for bit
    analytic_equal = all(
        quadrature_moments(st_delta, QuadratureSpec(t, psi))
        == quadrature_moments(st_b, QuadratureSpec(t, psi))
        for psi in (0.25 * math.pi, -0.25 * math.pi)
        for t in np.linspace(0, 2 * math.pi, 257, endpoint=False))

    # Monte Carlo: moment estimates of the +/- pi/4 traces agree
    ts_u = pipeline.simulate_traces(unb, seed=101)
    ts_b = pipeline.simulate_traces(bal, seed=202)
    worst = 0.0
    for tu, tb in ((ts_u.trace_plus, ts_b.trace_plus), (ts_u.trace_minus, ts_b.trace_minus)):
        mu_, mb_ = estimate_second_moments(tu), estimate_second_moments(tb)
        for f in ("mean_q", "mean_p", "var_q", "var_p", "cov_qp"):
            se = math.hypot(getattr(mu_, "se_" + f), getattr(mb_, "se_" + f))
            worst = max(worst, abs(getattr(mu_, f) - getattr(mb_, f)) / se)

    # full pipeline with the PDH readout recovers the unbalance
    rec = reconstruct(ts_u, unb.pdh, n_bootstrap=500, seed=3)
    RECONSTRUCTIONS[4] = [(rec.metrics["physicality_margin"], float(np.max(rec.errors["cm_prime"])))]
    a_minus_b = rec.cm_omega[0, 0] - rec.cm_omega[2, 2]
    e = rec.errors
    se_amb = math.hypot(e["cm_omega"][0, 0], e["cm_omega"][2, 2])
    checks = [
        ("equal N_Omega, differ only in delta", abs(n_u - n_b) < 1e-12 and only_delta,
         f"{n_u:.3f}/{n_b:.3f}"),
        ("analytic law identical", analytic_equal, "exact"),
        ("MC max|z|<4", worst < 4, f"{worst:.2f}"),
        ("A-B=2 within 4 SE", abs(a_minus_b - 2.0) <= 4 * se_amb, f"{a_minus_b:.4f}+-{se_amb:.4f}"),
    ]
    record(4, checks)


def test_criterion_5_exact_algebra():
    start = time.perf_counter()
    tol = 1e-10
    s = mode_mixing_matrix()
    errs = {
        "StS": np.abs(s.T @ s - np.eye(4)).max(),
        "StOmegaS": np.abs(s.T @ OMEGA @ s - OMEGA).max(),
    }
    rng = np.random.default_rng(2024)
    rt, block_id, ntot = 0.0, 0.0, 0.0
    for _ in range(200):
        p = TmstParams(complex(*rng.normal(size=2)), rng.uniform(0, 5), rng.uniform(0, 5),
                       rng.uniform())
        st = tmst_state(p)
        back = change_basis(change_basis(st))
        rt = max(rt, np.abs(back.cm - st.cm).max() / max(1, np.abs(st.cm).max()))
        a, b, c = tmst_blocks(p)
        n_plus, n_minus = sideband_energies(p)
        prime = change_basis(st)
        expected = np.block([[0.5 * (a + b) * np.eye(2) + c * SZ, (n_plus - n_minus) * J],
                             [-(n_plus - n_minus) * J, 0.5 * (a + b) * np.eye(2) + c * SZ]])
        block_id = max(block_id, np.abs(prime.cm - expected).max() / max(1, a))
        ntot = max(ntot, abs(total_fluctuation_photons(st.cm) - (n_plus + n_minus)),
                   abs(total_fluctuation_photons(prime.cm) - (n_plus + n_minus)))
    errs.update(roundtrip=rt, block_identity=block_id, n_total=ntot)
    lam = ppt_min_symplectic_eigenvalue(tmst_state(TmstParams(n_sq=1.0)).cm)
    errs["lambda_closed_form"] = abs(lam - math.exp(-2 * math.asinh(1.0)))
    elapsed = time.perf_counter() - start
    checks = [(k, v <= tol, f"{v:.1e}") for k, v in errs.items()]
    checks.append(("runtime<1s", elapsed < 1.0, f"{elapsed:.2f}"))
    record(5, checks)


def test_criterion_6_convergence():
    start = time.perf_counter()
    base = pipeline.presets()["squeezed"]
    truth = pipeline.ground_truth(base)[1].cm
    sizes = [1_000, 10_000, 100_000]
    rms = []
    for n in sizes:
        sc = replace(base, trace=replace(base.trace, n_samples=n))
        errs = [pipeline.run_once(sc, k).cm_prime - truth for k in range(30)]
        rms.append(math.sqrt(np.mean(np.square(errs))))
    slope = np.polyfit(np.log(sizes), np.log(rms), 1)[0]
    elapsed = time.perf_counter() - start
    checks = [
        ("slope", abs(slope + 0.5) <= 0.1, f"{slope:.3f}"),
        ("rms", True, "/".join(f"{r:.4f}" for r in rms)),
        ("runtime<120s", elapsed < 120, f"{elapsed:.1f}"),
    ]
    record(6, checks)


@pytest.mark.parametrize("name", ["vacuum", "squeezed"])
def test_criterion_7_demodulation(name):
    base = pipeline.presets()[name]
    n = 100_000
    raw = RawConfig(duration=n / 3e5, rng_seed=0)
    direct = replace(base, trace=replace(base.trace, n_samples=n))
    via_raw = replace(base, raw=raw)
    rec_d = reconstruct(pipeline.simulate_traces(direct, seed=31), base.pdh)
    rec_r = reconstruct(pipeline.simulate_traces(via_raw, seed=32), base.pdh)
    assert pipeline.simulate_traces(via_raw, seed=32).trace_s.n_samples == n
    iu = np.triu_indices(4)
    se_cm = np.hypot(rec_d.errors["cm_prime"], rec_r.errors["cm_prime"])[iu]
    diff_cm = np.abs(rec_d.cm_prime - rec_r.cm_prime)[iu]
    se_r = np.hypot(rec_d.errors["r_prime"], rec_r.errors["r_prime"])
    diff_r = np.abs(rec_d.r_prime - rec_r.r_prime)
    # delta entries are set by the balanced readout on both routes: identical, zero error
    z = np.concatenate([np.where(se_cm > 0, diff_cm / np.where(se_cm > 0, se_cm, 1), 0),
                        diff_r / se_r])
    verdict = (bool(np.all(z <= 3)), f"{name} max|z|={z.max():.2f} over {z.size} moments")
    prior = ACCEPTANCE.get(7)
    if prior is None:
        ACCEPTANCE[7] = verdict
    else:
        ACCEPTANCE[7] = (prior[0] and verdict[0], prior[1] + "; " + verdict[1])
    assert verdict[0], verdict[1]


def test_criterion_8_physicality():
    missing = [k for k in (1, 2, 3, 4) if k not in RECONSTRUCTIONS]
    if missing:
        pytest.skip(f"criteria {missing} did not run in this session")
    worst = math.inf
    count = 0
    for key in (1, 3):
        summ = RECONSTRUCTIONS[key]
        for margin, se in zip(summ["physicality_margins"], summ["max_cm_prime_errors"]):
            worst = min(worst, margin / se)
            count += 1
    for key in (2, 4):
        for margin, se in RECONSTRUCTIONS[key]:
            worst = min(worst, margin / se)
            count += 1
    record(8, [("min margin/SE >= -5", worst >= -5, f"{worst:.2f}"), ("states", True, str(count))])
