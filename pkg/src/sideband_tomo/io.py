"""File formats: trace records, state/PDH/report JSON and scenario documents."""

from __future__ import annotations

import json
import math
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .gaussian import GaussianTwoModeState, ModalBasis, TmstParams
from .sideband import CavityModel, PdhReadout, cavity_transmission, coupled_params
from .traces import HomodyneTrace, RawConfig, TraceConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

TRACE_FORMAT = "homodyne-trace/1"
STATE_FORMAT = "gaussian-state/1"
PDH_FORMAT = "pdh-readout/1"


class FormatError(ValueError):
    """Malformed input file; the message names the file and line."""


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def _parse_scalar(text: str):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


# -- traces -----------------------------------------------------------------

def format_trace(trace: HomodyneTrace) -> str:
    meta = dict(trace.meta)
    meta["psi"] = trace.psi
    meta["n_samples"] = trace.n_samples
    lines = [f"# format: {TRACE_FORMAT}"]
    lines += [f"# {k}: {_fmt(meta[k])}" for k in sorted(meta)]
    lines.append("# columns: theta,x")
    lines += ["%.17g,%.17g" % (t, x) for t, x in zip(trace.theta.tolist(), trace.x.tolist())]
    return "\n".join(lines) + "\n"


def write_trace(path, trace: HomodyneTrace) -> None:
    Path(path).write_text(format_trace(trace))


def parse_trace(text: str, source: str = "<trace>") -> HomodyneTrace:
    meta, theta, xs = {}, [], []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition(":")
            if not sep:
                raise FormatError(f"{source}:{lineno}: header line without 'key: value'")
            meta[key.strip()] = _parse_scalar(value.strip())
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise FormatError(f"{source}:{lineno}: expected 'theta,x', got {line!r}")
        try:
            theta.append(float(parts[0]))
            xs.append(float(parts[1]))
        except ValueError:
            raise FormatError(f"{source}:{lineno}: non-numeric sample {line!r}") from None
    if meta.pop("format", None) != TRACE_FORMAT:
        raise FormatError(f"{source}: missing or unknown '# format:' header")
    meta.pop("columns", None)
    if "psi" not in meta:
        raise FormatError(f"{source}: missing 'psi' header")
    n = meta.get("n_samples")
    if n != len(xs):
        raise FormatError(f"{source}: header says n_samples={n} but found {len(xs)} rows")
    psi = float(meta["psi"])
    try:
        return HomodyneTrace(psi, np.array(theta), np.array(xs), meta)
    except ValueError as exc:
        raise FormatError(f"{source}: {exc}") from None


def read_trace(path) -> HomodyneTrace:
    path = Path(path)
    return parse_trace(path.read_text(), str(path))


# -- JSON records -----------------------------------------------------------

def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _load_json(path):
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}:{exc.lineno}: {exc.msg}") from None


def state_to_dict(state: GaussianTwoModeState) -> dict:
    return {
        "format": STATE_FORMAT,
        "basis": state.basis.value,
        "first_moments": state.first_moments.tolist(),
        "cm": state.cm.tolist(),
    }


def state_from_dict(d: dict, source: str = "<state>") -> GaussianTwoModeState:
    if d.get("format") != STATE_FORMAT:
        raise FormatError(f"{source}: expected format {STATE_FORMAT!r}")
    try:
        return GaussianTwoModeState(np.array(d["first_moments"], dtype=float),
                                    np.array(d["cm"], dtype=float), ModalBasis(d["basis"]))
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"{source}: invalid state record ({exc})") from None


def write_state(path, state: GaussianTwoModeState, **extra) -> None:
    Path(path).write_text(dumps_json(dict(state_to_dict(state), **extra)))


def read_state(path) -> GaussianTwoModeState:
    return state_from_dict(_load_json(path), str(path))


def pdh_to_dict(readout: PdhReadout, cavity: Optional[CavityModel] = None) -> dict:
    d = {"format": PDH_FORMAT, "tau_plus": readout.tau_plus, "tau_minus": readout.tau_minus}
    if cavity is not None:
        t_plus, t_minus, _ = cavity_transmission(cavity)
        d.update(t_plus=t_plus, t_minus=t_minus, cavity=asdict(cavity))
    return d


def write_pdh(path, readout: PdhReadout, cavity: Optional[CavityModel] = None) -> None:
    Path(path).write_text(dumps_json(pdh_to_dict(readout, cavity)))


def read_pdh(path) -> PdhReadout:
    d = _load_json(path)
    if d.get("format") != PDH_FORMAT:
        raise FormatError(f"{path}: expected format {PDH_FORMAT!r}")
    try:
        return PdhReadout(float(d["tau_plus"]), float(d["tau_minus"]))
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"{path}: invalid PDH record ({exc})") from None


# -- scenarios --------------------------------------------------------------

@dataclass(frozen=True)
class PipelineConfig:
    n_repetitions: int = 1
    bootstrap_resamples: int = 0
    master_seed: int = 0
    estimator: str = "harmonic"

    def __post_init__(self):
        if self.n_repetitions < 1:
            raise ValueError("n_repetitions must be >= 1")
        if self.bootstrap_resamples and self.bootstrap_resamples < 100:
            raise ValueError("bootstrap_resamples must be 0 or >= 100")
        if self.estimator not in ("harmonic", "binned"):
            raise ValueError(f"unknown estimator {self.estimator!r}")


@dataclass(frozen=True)
class Scenario:
    """Everything needed to simulate and reconstruct one experiment.

    With ``coupled`` set, the thermal fraction follows the cavity readout
    (see :func:`~sideband_tomo.sideband.coupled_params`). ``tau_plus``
    overrides the cavity-derived readout.
    """

    name: str
    tmst: TmstParams = field(default_factory=TmstParams)
    cavity: CavityModel = field(default_factory=CavityModel)
    trace: TraceConfig = field(default_factory=TraceConfig)
    raw: Optional[RawConfig] = None
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    coupled: bool = False
    tau_plus: Optional[float] = None

    def __post_init__(self):
        if not self.name:
            raise ValueError("scenario name must be nonempty")
        if self.coupled:
            object.__setattr__(self, "tmst", coupled_params(self.tmst, self.pdh))

    @property
    def pdh(self) -> PdhReadout:
        if self.tau_plus is not None:
            return PdhReadout.from_tau_plus(self.tau_plus)
        return cavity_transmission(self.cavity)[2]

    def with_seed(self, seed: int) -> "Scenario":
        raw = None if self.raw is None else replace(self.raw, rng_seed=seed)
        return replace(self, trace=replace(self.trace, rng_seed=seed), raw=raw,
                       pipeline=replace(self.pipeline, master_seed=seed))


_TYPES = {"float": (float, int), "int": (int,), "str": (str,), "bool": (bool,)}

SCHEMA = {
    "name": "str",
    "coupled": "bool",
    "tmst.alpha_re": "float",
    "tmst.alpha_im": "float",
    "tmst.n_sq": "float",
    "tmst.n_th": "float",
    "tmst.r_th": "float",
    "cavity.linewidth_fwhm": "float",
    "cavity.fsr": "float",
    "cavity.sideband_offset": "float",
    "cavity.hf_offset": "float",
    "cavity.detuning": "float",
    "pdh.tau_plus": "float",
    "trace.n_samples": "int",
    "trace.visibility": "float",
    "trace.electronic_noise_var": "float",
    "trace.rng_seed": "int",
    "raw.sample_rate": "float",
    "raw.duration": "float",
    "raw.omega": "float",
    "raw.lowpass_cutoff": "float",
    "raw.highpass_cutoff": "float",
    "raw.white_noise_var_per_sample": "float",
    "raw.rng_seed": "int",
    "pipeline.n_repetitions": "int",
    "pipeline.bootstrap_resamples": "int",
    "pipeline.master_seed": "int",
    "pipeline.estimator": "str",
}


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def scenario_from_flat(flat: dict, source: str = "<scenario>") -> Scenario:
    """Validate a flat ``{dotted.key: value}`` mapping and build a Scenario."""
    for key, value in flat.items():
        if key not in SCHEMA:
            raise FormatError(f"{source}: unknown key {key!r}")
        kind = SCHEMA[key]
        ok = isinstance(value, _TYPES[kind]) and not (kind != "bool" and isinstance(value, bool))
        if not ok:
            raise FormatError(f"{source}: key {key!r} must be {kind}, got {value!r}")
    if "name" not in flat:
        raise FormatError(f"{source}: missing required key 'name'")

    def section(prefix):
        return {k.split(".", 1)[1]: v for k, v in flat.items() if k.startswith(prefix + ".")}

    try:
        tm = section("tmst")
        alpha = complex(tm.pop("alpha_re", 0.0), tm.pop("alpha_im", 0.0))
        tmst = TmstParams(alpha=alpha, **{k: float(v) for k, v in tm.items()})
        cavity = CavityModel(**{k: float(v) for k, v in section("cavity").items()})
        trace = TraceConfig(**section("trace"))
        raw_keys = section("raw")
        raw = RawConfig(**raw_keys) if raw_keys else None
        pipeline = PipelineConfig(**section("pipeline"))
        return Scenario(flat["name"], tmst, cavity, trace, raw, pipeline,
                        bool(flat.get("coupled", False)), section("pdh").get("tau_plus"))
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{source}: {exc}") from None


def parse_scenario(text: str, source: str = "<scenario>") -> Scenario:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise FormatError(f"{source}: {exc}") from None
    return scenario_from_flat(_flatten(doc), source)


def read_scenario(path) -> Scenario:
    path = Path(path)
    return parse_scenario(path.read_text(), str(path))


def scenario_to_flat(sc: Scenario) -> dict:
    flat = {"name": sc.name, "coupled": sc.coupled}
    flat["tmst.alpha_re"] = sc.tmst.alpha.real
    flat["tmst.alpha_im"] = sc.tmst.alpha.imag
    for k in ("n_sq", "n_th", "r_th"):
        flat[f"tmst.{k}"] = getattr(sc.tmst, k)
    for k, v in asdict(sc.cavity).items():
        flat[f"cavity.{k}"] = v
    if sc.tau_plus is not None:
        flat["pdh.tau_plus"] = sc.tau_plus
    if sc.trace.theta_ramp is not None:
        raise ValueError("explicit theta ramps cannot be stored in a scenario document")
    for k in ("n_samples", "visibility", "electronic_noise_var", "rng_seed"):
        flat[f"trace.{k}"] = getattr(sc.trace, k)
    if sc.raw is not None:
        for k, v in asdict(sc.raw).items():
            flat[f"raw.{k}"] = v
    for k, v in asdict(sc.pipeline).items():
        flat[f"pipeline.{k}"] = v
    return flat


def _toml_value(v) -> str:
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ValueError("non-finite values are not allowed in scenarios")
        return repr(v)
    return _fmt(v)


def format_scenario(sc: Scenario) -> str:
    """Flat dotted-key document (valid TOML), one ``key = value`` per line."""
    flat = scenario_to_flat(sc)
    return "".join(f"{k} = {_toml_value(v)}\n" for k, v in flat.items())


def write_scenario(path, sc: Scenario) -> None:
    Path(path).write_text(format_scenario(sc))
