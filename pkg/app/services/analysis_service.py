# app/services/analysis_service.py
"""
Orchestration shared by the command line and the HTTP routers: config
ingestion (JSON text or dict -> AnalysisConfig) and the five analyses.
"""
from __future__ import annotations

import difflib
import json
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from app.core.config import settings
from app.core.errors import AsymmetricResistanceError, ConfigError, InputError
from app.core.logging import app_logger as logger
from app.core.units import boundary_to_si, to_boundary
from app.schemas.config_schema import AnalysisConfig, OutputControls, SimOverrides
from app.schemas.net_schema import VictimNetGeometry
from app.schemas.rc_schema import TwoPiModel
from app.schemas.report_schema import Corpus
from app.schemas.rlc_schema import CoupledRlcPair
from app.schemas.sim_schema import InputWave, SimConfig
from app.services import ladder_sim, net_model, rc2pi, rlc_decouple, sweep_report
from app.services.ladder_sim import Waveform

# ---------- boundary field tables: key -> physical kind ----------

RC_FIELDS = {
    "ls_len": "length",
    "lc_len": "length",
    "le_len": "length",
    "r_pul": "resistance",
    "c_pul": "capacitance",
    "cc_pul": "capacitance",
    "rd": "resistance",
    "cload": "capacitance",
    "tr": "time",
    "vdd": "dimensionless",
}
RC_REQUIRED = ("ls_len", "lc_len", "le_len", "r_pul", "c_pul", "cc_pul", "rd", "cload", "tr")

# explicit 2-π circuit (lumped values, not per µm)
TWO_PI_FIELDS = {
    "rd": "resistance",
    "rs": "resistance",
    "re": "resistance",
    "c1": "capacitance",
    "c2": "capacitance",
    "cl": "capacitance",
    "cx": "capacitance",
    "tr": "time",
    "vdd": "dimensionless",
}
TWO_PI_REQUIRED = ("rd", "rs", "re", "c1", "c2", "cl", "cx", "tr")

RLC_FIELDS = {
    "r": "resistance",
    "dr": "dimensionless",
    "l": "inductance",
    "dl": "dimensionless",
    "lm": "inductance",
    "cg": "capacitance",
    "dc": "dimensionless",
    "cc": "capacitance",
    "h": "length",
    "rs_drv": "resistance",
    "cl_load": "capacitance",
    "vdd": "dimensionless",
}
RLC_REQUIRED = ("r", "l", "lm", "cg", "cc", "h", "rs_drv", "cl_load")

NORMALIZED_FIELDS = {
    "kl": "dimensionless",
    "kc": "dimensionless",
    "ct": "dimensionless",
    "rt": "dimensionless",
    "rr": "dimensionless",
    "zeta": "dimensionless",
    "l": "inductance",
    "cg": "capacitance",
    "h": "length",
    "dc": "dimensionless",
    "dl": "dimensionless",
    "dr": "dimensionless",
    "vdd": "dimensionless",
}
NORMALIZED_REQUIRED = ("kl", "kc", "ct", "rt")

SIM_FIELDS = {"dt": "time", "t_stop": "time", "segment_um": "length"}
CONTROL_KEYS = ("mode", "method", "ccprime_variant", "sim", "output")

# common misspellings and synonyms -> canonical key
KEY_HINTS = {
    "couplingcap": "cc_pul",
    "coupling_cap": "cc_pul",
    "coupling_capacitance": "cc_pul",
    "groundcap": "c_pul",
    "resistance": "r_pul",
    "rdrv": "rd",
    "driver": "rd",
    "load": "cload",
    "cl": "cload",
    "trise": "tr",
    "rise_time": "tr",
    "transition": "tr",
    "length": "lc_len",
    "mutual": "lm",
    "lmutual": "lm",
    "rs": "rs_drv",
    "len": "h",
}


# =========================
# Config ingestion
# =========================

def _suggest(key: str, allowed: Sequence[str]) -> str:
    hint = KEY_HINTS.get(key.lower())
    if hint is None or hint not in allowed:
        close = difflib.get_close_matches(key, list(allowed), n=1, cutoff=0.6)
        hint = close[0] if close else None
    return f"unknown key '{key}'" + (f"; did you mean '{hint}'?" if hint else "")


def _convert(raw: Mapping[str, Any], fields: Mapping[str, str]) -> Dict[str, float]:
    """Boundary values (numbers or unit strings) -> SI, lengths stay in µm."""
    out: Dict[str, float] = {}
    for key, value in raw.items():
        kind = fields[key]
        out[key] = boundary_to_si(to_boundary(key, value, kind), kind)
    return out


def _require(values: Mapping[str, Any], required: Sequence[str]) -> None:
    for key in required:
        if key not in values:
            raise ConfigError(key, "required key is missing")


def _infer_mode(data: Mapping[str, Any]) -> str:
    mode = data.get("mode")
    if mode is None:
        return "rc" if any(k in data for k in ("lc_len", "r_pul", "cc_pul", "cx", "c1")) else "rlc"
    if mode not in ("rc", "rlc"):
        raise ConfigError("mode", f"must be 'rc' or 'rlc', got {mode!r}")
    return mode


def _sim_overrides(raw: Any) -> SimOverrides:
    if raw is None:
        return SimOverrides()
    if not isinstance(raw, dict):
        raise ConfigError("sim", "must be an object")
    for key in raw:
        if key not in SIM_FIELDS:
            raise ConfigError(f"sim.{key}", _suggest(key, list(SIM_FIELDS)))
    return SimOverrides(**_convert(raw, SIM_FIELDS))


def _output_controls(raw: Any) -> OutputControls:
    if raw is None:
        return OutputControls()
    if not isinstance(raw, dict):
        raise ConfigError("output", "must be an object")
    try:
        return OutputControls(**raw)
    except ValidationError as e:
        err = e.errors()[0]
        raise ConfigError(f"output.{err['loc'][0]}", err["msg"]) from e


def _rc_geometry(values: Dict[str, Any]) -> VictimNetGeometry:
    _require(values, RC_REQUIRED)
    geom = VictimNetGeometry(**_convert(values, RC_FIELDS))
    problems = net_model.validate(geom)
    if problems:
        key = problems[0].split(" ", 1)[0]
        raise ConfigError(key, "; ".join(problems))
    return geom


def _two_pi(values: Dict[str, Any]) -> TwoPiModel:
    _require(values, TWO_PI_REQUIRED)
    return TwoPiModel(**_convert(values, TWO_PI_FIELDS))


def _rlc_pair(values: Dict[str, Any]) -> CoupledRlcPair:
    dr = values.get("dr", 0.0)
    if to_boundary("dr", dr, "dimensionless") != 0:
        raise AsymmetricResistanceError(float(to_boundary("dr", dr, "dimensionless")))

    if "kl" in values:
        _require(values, NORMALIZED_REQUIRED)
        si = _convert(values, NORMALIZED_FIELDS)
        si.pop("dr", None)
        if ("rr" in si) == ("zeta" in si):
            raise ConfigError("zeta", "give exactly one of 'zeta' and 'rr'")
        pair = rlc_decouple.pair_from_normalized(**si)
    else:
        _require(values, RLC_REQUIRED)
        pair = CoupledRlcPair(**_convert(values, RLC_FIELDS))

    problems = rlc_decouple.validate_pair(pair)
    if problems:
        key = problems[0].lstrip("|").split(" ", 1)[0].rstrip("|")
        raise ConfigError(key, "; ".join(problems))
    return pair


def parse_config_dict(data: Mapping[str, Any]) -> AnalysisConfig:
    """
    Strict ingestion: unknown keys are rejected with a suggestion, values are
    converted from boundary units (µm, Ω, fF, pH, ps) and defaults filled.
    """
    if not isinstance(data, Mapping):
        raise ConfigError("<config>", "top level must be a JSON object")

    mode = _infer_mode(data)
    explicit_two_pi = mode == "rc" and "cx" in data
    if explicit_two_pi:
        fields: Sequence[str] = list(TWO_PI_FIELDS)
    elif mode == "rc":
        fields = list(RC_FIELDS)
    elif "kl" in data:
        fields = list(NORMALIZED_FIELDS)
    else:
        fields = list(RLC_FIELDS)

    allowed = list(fields) + list(CONTROL_KEYS)
    for key in data:
        if key not in allowed:
            raise ConfigError(key, _suggest(key, allowed))

    values = {k: v for k, v in data.items() if k in fields}
    try:
        return AnalysisConfig(
            mode=mode,
            geometry=_rc_geometry(values) if mode == "rc" and not explicit_two_pi else None,
            two_pi=_two_pi(values) if explicit_two_pi else None,
            pair=_rlc_pair(values) if mode == "rlc" else None,
            method=data.get("method", "ladder"),
            ccprime_variant=data.get("ccprime_variant", settings.ccprime_variant),
            sim=_sim_overrides(data.get("sim")),
            output=_output_controls(data.get("output")),
        )
    except ValidationError as e:
        err = e.errors()[0]
        loc = ".".join(str(p) for p in err["loc"]) or "<config>"
        raise ConfigError(loc, err["msg"]) from e


def parse_config(text: str) -> AnalysisConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError("<config>", f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    return parse_config_dict(data)


def with_overrides(
    cfg: AnalysisConfig,
    *,
    dt_ps: Optional[float] = None,
    tstop_ps: Optional[float] = None,
    segment_um: Optional[float] = None,
    samples: Optional[int] = None,
    out: Optional[str] = None,
    method: Optional[str] = None,
    ccprime_variant: Optional[str] = None,
) -> AnalysisConfig:
    """Command-line flags win over the config file; the result is re-validated."""
    sim = cfg.sim.model_dump()
    if dt_ps is not None:
        sim["dt"] = boundary_to_si(dt_ps, "time")
    if tstop_ps is not None:
        sim["t_stop"] = boundary_to_si(tstop_ps, "time")
    if segment_um is not None:
        sim["segment_um"] = segment_um

    output = cfg.output.model_dump()
    if samples is not None:
        output["samples"] = samples
    if out is not None:
        output["out"] = out

    data = cfg.model_dump()
    data.update(sim=sim, output=output)
    if method is not None:
        data["method"] = method
    if ccprime_variant is not None:
        data["ccprime_variant"] = ccprime_variant
    try:
        return AnalysisConfig(**data)
    except ValidationError as e:
        err = e.errors()[0]
        raise ConfigError(".".join(str(p) for p in err["loc"]), err["msg"]) from e


# =========================
# Analyses
# =========================

def _sim_config(cfg: AnalysisConfig, default: SimConfig) -> SimConfig:
    dt = cfg.sim.dt or default.dt
    t_stop = cfg.sim.t_stop or default.t_stop
    try:
        return SimConfig(dt=dt, t_stop=t_stop, input=default.input)
    except ValidationError as e:
        raise ConfigError("sim", e.errors()[0]["msg"]) from e


def rc_waveforms(m: rc2pi.TwoPiModel, samples: int) -> Dict[str, Waveform]:
    """Dominant-pole and exact 2-π noise waveforms on [0, tr + 6 tv]."""
    _, tv = rc2pi.dominant_pole_metrics(m)
    t_end = m.tr + 6.0 * tv
    dt = t_end / (samples - 1)
    return {
        "dominant": Waveform.sample(lambda t: rc2pi.dominant_waveform(m, t), 0.0, dt, samples),
        "exact": Waveform.sample(lambda t: rc2pi.exact_waveform_for(m, t), 0.0, dt, samples),
    }


def analyze_rc(cfg: AnalysisConfig) -> Dict[str, Any]:
    if cfg.mode != "rc":
        raise InputError("analyze-rc needs an rc config")
    lumped = None
    if cfg.two_pi is not None:
        m = cfg.two_pi
    else:
        lumped = net_model.derive_lumped(cfg.geometry)
        m = rc2pi.reduce(lumped, cfg.geometry.rd, cfg.geometry.cload, cfg.geometry.tr, cfg.geometry.vdd)
    metrics = rc2pi.analyze(m)
    coeffs = rc2pi.transfer_coeffs(m)

    logger.info(f"📐 rc analysis: vmax={metrics.vmax:.4g}, width={metrics.width:.4g} s")

    if cfg.output.out:
        ladder_sim.write_waveforms_csv(cfg.output.out, rc_waveforms(m, cfg.output.samples))

    return {
        "metrics": metrics.model_dump(),
        "two_pi": m.model_dump(),
        "lumped": lumped.model_dump() if lumped is not None else None,
        "order_reduced": coeffs.order_reduced,
        "config": cfg.resolved(),
    }


def analyze_rlc(cfg: AnalysisConfig) -> Dict[str, Any]:
    if cfg.mode != "rlc":
        raise InputError("analyze-rlc needs an rlc config")
    pair = cfg.pair
    variant = cfg.ccprime_variant
    sim = _sim_config(cfg, rlc_decouple.rlc_sim_config(pair, variant))

    estimate = rlc_decouple.peak_noise_rlc(
        pair,
        cfg.method,
        variant=variant,
        cfg=sim,
        segment_len=cfg.sim.segment_um,
    )
    logger.info(f"📐 rlc analysis ({cfg.method}): v_peak={estimate.v_peak:.4g}")

    return {
        "estimate": estimate.model_dump(),
        "normalized": rlc_decouple.normalized_vars(pair).model_dump(),
        "effective": rlc_decouple.effective_params(pair, variant).model_dump(),
        "config": cfg.resolved(),
    }


def simulate(cfg: AnalysisConfig) -> Dict[str, Waveform]:
    """
    Reference waveforms: victim output (rc) or both far ends (rlc). An
    explicit 2-π config simulates the 6-element circuit itself.
    """
    seg = cfg.sim.segment_um
    if cfg.mode == "rc":
        if cfg.two_pi is not None:
            m = cfg.two_pi
            net = ladder_sim.build_two_pi(m)
        else:
            m = rc2pi.model_from_geometry(cfg.geometry)
            net = ladder_sim.build_victim_ladder(cfg.geometry, seg)
        _, tv = rc2pi.dominant_pole_metrics(m)
        default = SimConfig.for_scales(tv=tv, tr=m.tr, input=InputWave(kind="ramp", tr=m.tr, vdd=m.vdd))
        return ladder_sim.transient(net, _sim_config(cfg, default))

    pair = cfg.pair
    default = rlc_decouple.rlc_sim_config(pair, cfg.ccprime_variant)
    return rlc_decouple.coupled_oracle(pair, _sim_config(cfg, default), segment_len=seg)


def validate_corpus(
    kind: str,
    *,
    seed: int = 7,
    count: int = 100,
    symmetric: bool = False,
    segment_len: Optional[float] = None,
    workers: Optional[int] = None,
) -> Tuple[Dict[str, Any], List]:
    """Summary report plus the per-metric ErrorStats it was built from."""
    corpus = Corpus(kind=kind, seed=seed, count=count, symmetric=symmetric)
    seg = segment_len or settings.segment_um
    config = {
        "corpus": corpus.model_dump(mode="json"),
        "ranges": {k: list(v) for k, v in corpus.resolved_ranges().items()},
        "segment_um": seg,
        "oracle_floor": settings.oracle_floor,
    }

    if kind == "rc":
        peak, width = sweep_report.run_rc_corpus(corpus, segment_len=seg, workers=workers)
        report = {
            "peak": sweep_report.summary(peak),
            "width": sweep_report.summary(width),
            "config": config,
        }
        return report, [peak, width]

    stats = sweep_report.run_rlc_corpus(corpus, segment_len=seg, workers=workers)
    return {"peak": sweep_report.summary(stats), "config": config}, [stats]


DEFAULT_GRIDS: Dict[str, List[float]] = {
    "zeta": [0.25, 0.5, 1.0, 1.5, 2.0],
    "ct": [0.01, 0.025, 0.05, 0.075, 0.1],
    "rt": [0.1, 0.25, 0.5, 1.0],
    "kl": [float(x) for x in np.round(np.linspace(0.05, 0.9, 18), 6)],
    "kc": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8],
    "tr": [20e-12, 50e-12, 100e-12, 200e-12, 500e-12],
    "position": [0.0, 0.25, 0.5, 0.75, 1.0],
}
