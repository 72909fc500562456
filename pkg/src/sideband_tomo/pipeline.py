"""Scenario presets and the simulate / reconstruct / analyze / pipeline drivers."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import io
from .gaussian import (
    GaussianTwoModeState,
    ModalBasis,
    TmstParams,
    change_basis,
    noise_reduction_db,
    physicality_margin,
    ppt_min_symplectic_eigenvalue,
    purity,
    sideband_energies,
    symplectic_eigenvalues,
    tmst_params_from_blocks,
    tmst_state,
    total_fluctuation_photons,
)
from .io import PipelineConfig, Scenario
from .reconstruction import (
    DEFAULT_BOOTSTRAP,
    METRIC_NAMES,
    ReconstructedState,
    TraceSet,
    reconstruct,
    reconstruct_exact,
)
from .sideband import apply_detection_loss
from .traces import (
    TraceConfig,
    demodulate,
    linear_ramp,
    make_rng,
    synthesize_dual,
    synthesize_raw_photocurrent,
)

TRACE_FILES = {"trace_s": "trace_s.txt", "trace_a": "trace_a.txt",
               "trace_plus": "trace_plus.txt", "trace_minus": "trace_minus.txt"}
PDH_FILE = "pdh.json"
TRUTH_FILE = "ground_truth.json"
SCENARIO_FILE = "scenario.toml"
REPORT_JSON = "report.json"
REPORT_TEXT = "report.txt"

# Detected-state calibrations: balanced TMSTs pinned by a target mode purity
# and PPT eigenvalue. Visibility is already folded in, so presets simulate
# with visibility 1.
SQUEEZED_PARAMS = TmstParams(n_sq=0.320, n_th=0.471, r_th=0.5)
SQUEEZED_COHERENT_BLOCKS = (0.5 * (4.174 + 0.55), 0.5 * (4.174 - 0.55))


def _preset(name, tmst, reps=1, tau_plus=None):
    return Scenario(name, tmst, trace=TraceConfig(n_samples=100_000, visibility=1.0, rng_seed=1),
                    pipeline=PipelineConfig(n_repetitions=reps, master_seed=1),
                    tau_plus=tau_plus)


def presets() -> dict:
    """Bundled scenarios keyed by name."""
    a, c = SQUEEZED_COHERENT_BLOCKS
    return {
        "vacuum": _preset("vacuum", TmstParams()),
        "coherent": _preset("coherent", TmstParams(alpha=1.0)),
        "squeezed": _preset("squeezed", SQUEEZED_PARAMS, reps=30),
        "squeezed-coherent": _preset("squeezed-coherent",
                                     tmst_params_from_blocks(a, c, alpha=1.0), reps=30),
        # all thermal photons in the upper sideband; the readout sees only it
        "thermal-unbalanced": _preset("thermal-unbalanced",
                                      TmstParams(n_th=1.0, r_th=1.0), tau_plus=1.0),
        "thermal-balanced": _preset("thermal-balanced", TmstParams(n_th=1.0, r_th=0.5)),
    }


def load_scenario(name_or_path: str) -> Scenario:
    """A preset name or a path to a scenario document."""
    table = presets()
    if name_or_path in table:
        return table[name_or_path]
    return io.read_scenario(name_or_path)


def ground_truth(sc: Scenario) -> tuple[GaussianTwoModeState, GaussianTwoModeState]:
    """Source state (sideband basis) and detected state (symmetric/antisymmetric basis)."""
    source = tmst_state(sc.tmst)
    return source, apply_detection_loss(change_basis(source), sc.trace.visibility)


def simulate_traces(sc: Scenario, seed: Optional[int] = None) -> TraceSet:
    """Four traces from two dual-channel acquisitions (psi = 0 and psi = -pi/4)."""
    if seed is not None:
        sc = sc.with_seed(seed)
    _, state = ground_truth(sc)
    if sc.raw is None:
        s, a = synthesize_dual(state, 0.0, sc.trace, sc.name, stream=0)
        minus, plus = synthesize_dual(state, -0.25 * math.pi, sc.trace, sc.name, stream=1)
        return TraceSet(s, a, plus, minus)
    out = []
    theta_of_t = linear_ramp(sc.raw.duration)
    for stream, psi1 in enumerate((0.0, -0.25 * math.pi)):
        raw = replace(sc.raw, rng_seed=int(make_rng(sc.raw.rng_seed, stream).integers(2**63)))
        current = synthesize_raw_photocurrent(state, theta_of_t, raw)
        for psi in (psi1, psi1 + 0.5 * math.pi):
            meta = {"seed": raw.rng_seed, "scenario": sc.name}
            out.append(demodulate(current, raw.sample_rate, raw.omega, psi,
                                  raw.lowpass_cutoff, theta_of_t, meta=meta))
    s, a, minus, plus = out
    return TraceSet(s, a, plus, minus)


def cmd_simulate(sc: Scenario, out_dir, seed: Optional[int] = None) -> Path:
    """Write the four traces, the PDH record, ground truth and the scenario echo."""
    if seed is not None:
        sc = sc.with_seed(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ts = simulate_traces(sc)
    for name, fname in TRACE_FILES.items():
        io.write_trace(out / fname, getattr(ts, name))
    io.write_pdh(out / PDH_FILE, sc.pdh, sc.cavity)
    source, detected = ground_truth(sc)
    n_plus, n_minus = sideband_energies(sc.tmst)
    # readable as a plain state record (the source state); extras ride along
    io.write_state(out / TRUTH_FILE, source, detected=io.state_to_dict(detected),
                   sideband_energies=[n_plus, n_minus], scenario=sc.name)
    if sc.trace.theta_ramp is None:
        io.write_scenario(out / SCENARIO_FILE, sc)
    return out


def load_traceset(trace_dir) -> TraceSet:
    d = Path(trace_dir)
    missing = [f for f in TRACE_FILES.values() if not (d / f).exists()]
    if missing:
        raise FileNotFoundError(f"{d}: incomplete trace set, missing {missing}")
    return TraceSet(**{name: io.read_trace(d / f) for name, f in TRACE_FILES.items()})


def truth_metrics(detected: GaussianTwoModeState) -> dict:
    exact = reconstruct_exact(detected)
    return {"metrics": exact.metrics, "cm_prime": exact.cm_prime.tolist(),
            "r_prime": exact.r_prime.tolist(), "cm_omega": exact.cm_omega.tolist(),
            "r_omega": exact.r_omega.tolist()}


def report_dict(rec: ReconstructedState, scenario: Optional[dict] = None,
                truth: Optional[GaussianTwoModeState] = None) -> dict:
    errs = rec.errors
    d = {
        "format": "reconstruction-report/1",
        "estimator": rec.method,
        "r_prime": rec.r_prime.tolist(),
        "cm_prime": rec.cm_prime.tolist(),
        "r_omega": rec.r_omega.tolist(),
        "cm_omega": rec.cm_omega.tolist(),
        "metrics": dict(rec.metrics),
        "errors": {k: (np.asarray(v).tolist() if np.ndim(v) else float(v))
                   for k, v in errs.items()},
        "physical": bool(rec.physical),
        "entangled": bool(rec.entangled),
    }
    if scenario is not None:
        d["scenario"] = scenario
    if truth is not None:
        d["ground_truth"] = truth_metrics(truth)
    return d


def _pm(v, e, width=9):
    if e is None or not np.isfinite(e):
        return f"{v:{width}.4f}"
    return f"{v:{width}.4f} ± {e:.4f}"


def format_report(rep: dict) -> str:
    """Aligned text table: first moments and CMs in both bases, then metrics."""
    lines = [f"Reconstruction ({rep['estimator']} estimator)"]
    if "scenario" in rep:
        lines[0] += f" of scenario {rep['scenario'].get('name', '?')!r}"
    errs = rep["errors"]
    for label, rkey, ckey in (("symmetric/antisymmetric basis", "r_prime", "cm_prime"),
                              ("sideband basis", "r_omega", "cm_omega")):
        lines.append("")
        lines.append(f"[{label}]")
        r, cm = np.array(rep[rkey]), np.array(rep[ckey])
        re = np.array(errs.get(rkey, np.full(4, np.nan)), dtype=float)
        ce = np.array(errs.get(ckey, np.full((4, 4), np.nan)), dtype=float)
        lines.append("R = (" + ", ".join(_pm(v, e, 0).strip() for v, e in zip(r, re)) + ")")
        lines.append("sigma =")
        for i in range(4):
            lines.append("  " + "  ".join(f"{_pm(cm[i, j], ce[i, j]):>19}" for j in range(4)))
    lines.append("")
    lines.append("[metrics]")
    for k in METRIC_NAMES:
        v = rep["metrics"][k]
        e = errs.get(k)
        lines.append(f"  {k:<20}{_pm(v, e if isinstance(e, float) else None)}")
    lines.append(f"  {'physical':<20}{'yes' if rep['physical'] else 'NO'}")
    lines.append(f"  {'entangled':<20}{'yes (lambda < 1)' if rep['entangled'] else 'no'}")
    if "ground_truth" in rep:
        lines.append("")
        lines.append("[ground truth]")
        for k in METRIC_NAMES:
            lines.append(f"  {k:<20}{rep['ground_truth']['metrics'][k]:9.4f}")
    return "\n".join(lines) + "\n"


def cmd_reconstruct(trace_dir, method: str = "harmonic", n_bootstrap: int = DEFAULT_BOOTSTRAP,
                    seed: int = 0, out_dir=None) -> dict:
    """Reconstruct a simulated (or recorded) directory and write ``report.json``/``report.txt``."""
    d = Path(trace_dir)
    ts = load_traceset(d)
    if not (d / PDH_FILE).exists():
        raise FileNotFoundError(f"{d}: missing PDH record {PDH_FILE}")
    pdh = io.read_pdh(d / PDH_FILE)
    rec = reconstruct(ts, pdh, method=method, n_bootstrap=n_bootstrap, seed=seed)
    scenario = None
    if (d / SCENARIO_FILE).exists():
        scenario = io.scenario_to_flat(io.read_scenario(d / SCENARIO_FILE))
    truth = None
    if (d / TRUTH_FILE).exists():
        truth = io.state_from_dict(io._load_json(d / TRUTH_FILE)["detected"], str(d / TRUTH_FILE))
    rep = report_dict(rec, scenario, truth)
    out = Path(out_dir) if out_dir is not None else d
    out.mkdir(parents=True, exist_ok=True)
    (out / REPORT_JSON).write_text(io.dumps_json(rep))
    (out / REPORT_TEXT).write_text(format_report(rep))
    return rep


def _safe(fn, *args):
    try:
        return float(fn(*args))
    except ValueError:
        return float("nan")


def analyze_state(state: GaussianTwoModeState) -> dict:
    """All scalar metrics of a two-mode state, evaluated in both modal bases."""
    other = change_basis(state)
    pm, sa = (state, other) if state.basis is ModalBasis.SIDEBAND_PM else (other, state)
    try:
        nu = [float(v) for v in symplectic_eigenvalues(state.cm)]
    except ValueError:
        nu = [float("nan")] * 2
    out = {
        "physicality_margin": physicality_margin(state.cm),
        "symplectic_eigenvalues": nu,
        "lambda_ppt": _safe(ppt_min_symplectic_eigenvalue, pm.cm),
        "n_total": total_fluctuation_photons(state.cm),
    }
    for tag, st, names in (("pm", pm, ("plus", "minus")), ("sa", sa, ("s", "a"))):
        for i, name in enumerate(names):
            blk = st.block(i, i)
            out[f"mu_{name}"] = _safe(purity, blk)
            out[f"db_{name}"] = _safe(noise_reduction_db, blk)
    out["physical"] = out["physicality_margin"] >= -1e-8
    out["entangled"] = bool(out["lambda_ppt"] < 1.0)
    return out


def format_metrics(metrics: dict) -> str:
    rows = []
    for k, v in metrics.items():
        if isinstance(v, list):
            v = ", ".join(f"{x:.6f}" for x in v)
        elif isinstance(v, float):
            v = f"{v:.6f}"
        rows.append(f"{k:<24}{v}")
    return "\n".join(rows) + "\n"


def cmd_analyze(state_file) -> dict:
    return analyze_state(io.read_state(state_file))


def rep_seed(master_seed: int, rep: int) -> int:
    """Per-repetition seed derived from ``(master_seed, rep)``."""
    state = np.random.SeedSequence([int(master_seed), int(rep)]).generate_state(1, np.uint64)
    # 63 bits keep the echoed scenario within TOML's signed integer range
    return int(state[0]) >> 1


def run_once(sc: Scenario, rep: int = 0) -> ReconstructedState:
    seed = rep_seed(sc.pipeline.master_seed, rep)
    ts = simulate_traces(sc, seed)
    return reconstruct(ts, sc.pdh, method=sc.pipeline.estimator,
                       n_bootstrap=sc.pipeline.bootstrap_resamples, seed=seed)


def cmd_pipeline(sc: Scenario, n_reps: Optional[int] = None, seed: Optional[int] = None,
                 out_dir=None, workers: int = 1) -> dict:
    """Monte Carlo harness: repeated simulate + reconstruct, aggregated against ground truth.

    Repetition ``k`` is fully determined by ``(master_seed, k)``, so results do
    not depend on ``workers``. With ``out_dir`` every repetition also writes
    its own ``rep_XXXX`` directory.
    """
    if seed is not None:
        sc = replace(sc, pipeline=replace(sc.pipeline, master_seed=seed))
    if n_reps is not None:
        sc = replace(sc, pipeline=replace(sc.pipeline, n_repetitions=n_reps))
    n = sc.pipeline.n_repetitions

    def job(k):
        if out_dir is None:
            return run_once(sc, k)
        run_dir = Path(out_dir) / f"rep_{k:04d}"
        cmd_simulate(sc, run_dir, seed=rep_seed(sc.pipeline.master_seed, k))
        rep = cmd_reconstruct(run_dir, sc.pipeline.estimator,
                              sc.pipeline.bootstrap_resamples,
                              seed=rep_seed(sc.pipeline.master_seed, k))
        return _from_report(rep)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            runs = list(pool.map(job, range(n)))
    else:
        runs = [job(k) for k in range(n)]
    return aggregate(sc, runs)


def _from_report(rep: dict) -> ReconstructedState:
    errors = {k: (np.array(v) if isinstance(v, list) else v) for k, v in rep["errors"].items()}
    return ReconstructedState(np.array(rep["r_prime"]), np.array(rep["cm_prime"]),
                              rep["metrics"]["delta_n"], np.array(rep["r_omega"]),
                              np.array(rep["cm_omega"]), rep["metrics"], errors,
                              method=rep["estimator"])


def aggregate(sc: Scenario, runs: list) -> dict:
    """Mean, spread and ground-truth comparison of every metric over ``runs``."""
    _, detected = ground_truth(sc)
    truth = reconstruct_exact(detected)
    n = len(runs)
    summary = {}
    for k in METRIC_NAMES:
        vals = np.array([r.metrics[k] for r in runs], dtype=float)
        mean = float(np.nanmean(vals))
        std = float(np.nanstd(vals, ddof=1)) if n > 1 else float("nan")
        summary[k] = {"mean": mean, "std": std,
                      "sem": std / math.sqrt(n) if n > 1 else float("nan"),
                      "truth": truth.metrics[k], "values": vals.tolist()}
    cms = np.array([r.cm_prime for r in runs])
    max_err = [float(np.nanmax(r.errors["cm_prime"])) for r in runs]
    return {
        "format": "pipeline-summary/1",
        "scenario": io.scenario_to_flat(sc) if sc.trace.theta_ramp is None else {"name": sc.name},
        "n_repetitions": n,
        "metrics": summary,
        "cm_prime_mean": cms.mean(axis=0).tolist(),
        "cm_prime_std": (cms.std(axis=0, ddof=1) if n > 1 else np.full((4, 4), np.nan)).tolist(),
        "cm_prime_truth": truth.cm_prime.tolist(),
        "r_prime_mean": np.mean([r.r_prime for r in runs], axis=0).tolist(),
        "r_prime_truth": truth.r_prime.tolist(),
        "physicality_margins": [r.metrics["physicality_margin"] for r in runs],
        "max_cm_prime_errors": max_err,
    }


def format_summary(summary: dict) -> str:
    lines = [f"Pipeline summary: {summary['scenario'].get('name')!r}, "
             f"{summary['n_repetitions']} repetitions", ""]
    lines.append(f"  {'metric':<20}{'mean':>10}{'spread':>10}{'truth':>10}")
    for k, s in summary["metrics"].items():
        lines.append(f"  {k:<20}{s['mean']:10.4f}{s['std']:10.4f}{s['truth']:10.4f}")
    return "\n".join(lines) + "\n"
