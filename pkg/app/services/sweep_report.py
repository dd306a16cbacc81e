# app/services/sweep_report.py
"""
Model-vs-oracle runs over random corpora and one-parameter sweeps, plus the
CSV writers for their results.

Relative errors are always |model - oracle| / oracle; oracle peaks at or
below floor * vdd are excluded (and counted) rather than divided by.
"""
from __future__ import annotations

import csv
from multiprocessing import Pool
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np

from app.core.config import settings
from app.core.errors import InputError, ReportWriteError, XtalkError
from app.core.logging import app_logger as logger
from app.schemas.net_schema import VictimNetGeometry
from app.schemas.report_schema import CaseResult, Corpus, ErrorStats, SweepRow, SweepTable
from app.schemas.rlc_schema import CoupledRlcPair
from app.schemas.sim_schema import InputWave, SimConfig
from app.services import ladder_sim, net_model, rc2pi, rlc_decouple

RLC_PARAMS = ("zeta", "ct", "rt", "kl", "kc")
RC_PARAMS = ("tr", "position")
SWEEP_PARAMS = RLC_PARAMS + RC_PARAMS

STATS_HEADER = ["case_id", "model", "oracle", "rel_err"]
SWEEP_HEADER = ["param", "value", "model_peak", "oracle_peak", "rel_err"]

# desk-scale reference net for RC sweeps (SI units, lengths in µm)
DEFAULT_RC_GEOMETRY = {
    "ls_len": 100.0,
    "lc_len": 200.0,
    "le_len": 100.0,
    "r_pul": 0.1,
    "c_pul": 0.2e-15,
    "cc_pul": 0.25e-15,
    "rd": 100.0,
    "cload": 5e-15,
    "tr": 100e-12,
    "vdd": 1.0,
}

# physical scale for normalized RLC points
DEFAULT_RLC_SCALE = {"l": 0.5e-12, "cg": 0.1e-15, "h": 1000.0}

ORACLE_MAX_STEPS = 20000


# =========================
# Helpers
# =========================

def rel_err(model: float, oracle: float) -> float:
    return abs(model - oracle) / abs(oracle)


def _map(fn: Callable, tasks: Sequence, workers: int) -> List:
    if workers > 1 and len(tasks) > 1:
        with Pool(processes=workers) as pool:
            return pool.map(fn, tasks)
    return [fn(t) for t in tasks]


def fold_stats(metric: str, results: Iterable[CaseResult]) -> ErrorStats:
    """Deterministic reduction: cases sorted by id before aggregating."""
    ordered = sorted(results, key=lambda r: r.case_id)
    counted = [r for r in ordered if r.counted]
    excluded = [r for r in ordered if r.status == "below-floor"]
    failed = [r for r in ordered if r.status and r.status.startswith("failed")]

    mean_err = max_err = None
    worst = None
    if counted:
        errs = [r.rel_err for r in counted]
        mean_err = float(sum(errs) / len(errs))
        worst_case = max(counted, key=lambda r: r.rel_err)
        max_err = worst_case.rel_err
        worst = worst_case.case_id

    return ErrorStats(
        metric=metric,
        cases=ordered,
        mean_abs_err=mean_err,
        max_abs_err=max_err,
        n_cases=len(counted),
        n_excluded=len(excluded),
        n_failed=len(failed),
        worst_case_id=worst,
    )


def _compare(case_id: int, model: Optional[float], oracle: Optional[float], floor: float) -> CaseResult:
    if oracle is None or model is None:
        return CaseResult(case_id=case_id, model=model, oracle=oracle, status="below-floor")
    if abs(oracle) <= floor:
        return CaseResult(case_id=case_id, model=model, oracle=oracle, status="below-floor")
    return CaseResult(case_id=case_id, model=model, oracle=oracle, rel_err=rel_err(model, oracle))


# =========================
# Corpus draws
# =========================

def draw_rc_cases(corpus: Corpus) -> List[VictimNetGeometry]:
    if corpus.kind != "rc":
        raise InputError("corpus kind must be 'rc'")
    rng = np.random.default_rng(corpus.seed)
    ranges = corpus.resolved_ranges()
    cases = []
    for _ in range(corpus.count):
        draw = {key: float(rng.uniform(lo, hi)) for key, (lo, hi) in ranges.items()}
        cases.append(VictimNetGeometry(**draw))
    return cases


def draw_rlc_cases(corpus: Corpus) -> List[CoupledRlcPair]:
    """
    zeta is drawn above the smallest value reachable with rr >= 0 at the
    drawn rt, ct, so every draw maps to a physical line.
    """
    if corpus.kind != "rlc":
        raise InputError("corpus kind must be 'rlc'")
    rng = np.random.default_rng(corpus.seed)
    ranges = corpus.resolved_ranges()
    cases = []
    for _ in range(corpus.count):
        draw = {key: float(rng.uniform(lo, hi)) for key, (lo, hi) in ranges.items()}

        z_lo, z_hi = ranges["zeta"]
        z_floor = rlc_decouple.zeta_of(0.0, draw["rt"], draw["ct"])
        if z_floor >= z_lo:
            # remap the uniform draw onto the reachable part of the interval
            frac = (draw["zeta"] - z_lo) / (z_hi - z_lo) if z_hi > z_lo else 0.0
            lo = min(z_floor * 1.05, z_hi)
            draw["zeta"] = lo + frac * max(z_hi - lo, 0.0)

        cases.append(
            rlc_decouple.pair_from_normalized(
                kl=draw["kl"],
                kc=draw["kc"],
                ct=draw["ct"],
                rt=draw["rt"],
                zeta=draw["zeta"],
                l=draw["l"],
                cg=draw["cg"],
                h=draw["h"],
                dc=draw["dc"],
                dl=draw["dl"],
            )
        )
    return cases


# =========================
# Per-case evaluation
# =========================

def rc_oracle(geom: VictimNetGeometry, segment_len: float) -> ladder_sim.Waveform:
    """Distributed victim ladder with the aggressor ramp injected along the coupled window."""
    m = rc2pi.model_from_geometry(geom)
    _, tv = rc2pi.dominant_pole_metrics(m)
    cfg = SimConfig.for_scales(
        tv=tv, tr=geom.tr, input=InputWave(kind="ramp", tr=geom.tr, vdd=geom.vdd), max_steps=ORACLE_MAX_STEPS
    )
    return ladder_sim.transient(ladder_sim.build_victim_ladder(geom, segment_len), cfg)["out"]


def _rc_case(task: Tuple[int, VictimNetGeometry, float, float]) -> Tuple[CaseResult, CaseResult]:
    case_id, geom, segment_len, floor = task
    try:
        m = rc2pi.model_from_geometry(geom)
        vmax, _ = rc2pi.peak_noise(m)
        width = rc2pi.noise_width(m)
        om = ladder_sim.waveform_metrics(rc_oracle(geom, segment_len))
    except XtalkError as exc:
        logger.warning(f"⚠ rc case {case_id} failed: {exc}")
        failed = CaseResult(case_id=case_id, status=f"failed: {exc}")
        return failed, failed

    threshold = floor * geom.vdd
    peak = _compare(case_id, vmax, om.peak, threshold)
    if peak.status is not None:
        width_res = CaseResult(case_id=case_id, model=width, oracle=om.width, status="below-floor")
    else:
        width_res = _compare(case_id, width, om.width, 0.0)
    return peak, width_res


def rlc_oracle_peak(pair: CoupledRlcPair, segment_len: float, cfg: Optional[SimConfig] = None) -> float:
    """Largest victim magnitude of the coupled ladder, as a fraction of vdd."""
    victim = rlc_decouple.coupled_oracle(pair, cfg, segment_len=segment_len)["line2"]
    return float(np.max(np.abs(victim.samples))) / pair.vdd


def _rlc_case(task: Tuple[int, CoupledRlcPair, float, float]) -> CaseResult:
    case_id, pair, segment_len, floor = task
    try:
        cfg = rlc_decouple.rlc_sim_config(pair)
        oracle = rlc_oracle_peak(pair, segment_len, cfg)
        if oracle <= floor:
            return CaseResult(case_id=case_id, oracle=oracle, status="below-floor")
        model = rlc_decouple.peak_noise_rlc(pair, "ladder", cfg=cfg, segment_len=segment_len).v_peak
    except XtalkError as exc:
        logger.warning(f"⚠ rlc case {case_id} failed: {exc}")
        return CaseResult(case_id=case_id, status=f"failed: {exc}")
    return _compare(case_id, model, oracle, floor)


# =========================
# Corpus runs
# =========================

def run_rc_corpus(
    corpus: Corpus,
    *,
    segment_len: Optional[float] = None,
    workers: Optional[int] = None,
    floor: Optional[float] = None,
) -> Tuple[ErrorStats, ErrorStats]:
    """2-π closed forms vs the distributed ladder: (peak stats, width stats)."""
    seg = segment_len or settings.segment_um
    floor = settings.oracle_floor if floor is None else floor
    cases = draw_rc_cases(corpus)
    logger.info(f"🔁 rc corpus: {len(cases)} cases, seed={corpus.seed}")

    tasks = [(i, g, seg, floor) for i, g in enumerate(cases)]
    results = _map(_rc_case, tasks, workers or settings.workers)

    peak = fold_stats("peak", [r[0] for r in results])
    width = fold_stats("width", [r[1] for r in results])
    logger.info(f"✅ rc corpus done: mean peak err={peak.mean_abs_err}, excluded={peak.n_excluded}")
    return peak, width


def run_rlc_corpus(
    corpus: Corpus,
    *,
    segment_len: Optional[float] = None,
    workers: Optional[int] = None,
    floor: Optional[float] = None,
) -> ErrorStats:
    """Time-of-flight peak model (ladder path) vs the coupled ladder victim peak."""
    seg = segment_len or settings.segment_um
    floor = settings.oracle_floor if floor is None else floor
    cases = draw_rlc_cases(corpus)
    logger.info(f"🔁 rlc corpus: {len(cases)} cases, seed={corpus.seed}, symmetric={corpus.symmetric}")

    tasks = [(i, p, seg, floor) for i, p in enumerate(cases)]
    stats = fold_stats("peak", _map(_rlc_case, tasks, workers or settings.workers))
    logger.info(f"✅ rlc corpus done: mean peak err={stats.mean_abs_err}, excluded={stats.n_excluded}")
    return stats


# =========================
# Sweeps
# =========================

# Swept at fixed rr; every other RLC parameter is swept at fixed zeta.
HOLD_RR = frozenset({"rt"})


def _rlc_point(param: str, value: float, fixed: Dict[str, float]) -> CoupledRlcPair:
    point = {**rlc_decouple.INDUCTIVE_POINT, **DEFAULT_RLC_SCALE, **fixed}
    hold_rr = "rr" in fixed or param in HOLD_RR
    if "rr" not in point:
        point["rr"] = rlc_decouple.rr_for_zeta(point["zeta"], point["rt"], point["ct"])

    point[param] = value
    if param == "zeta" or not hold_rr:
        point.pop("rr")
    else:
        point.pop("zeta", None)

    pair = rlc_decouple.pair_from_normalized(**point)
    problems = rlc_decouple.validate_pair(pair)
    if point.get("ct", 0.0) < 0:
        problems.append("ct must be >= 0")
    if problems:
        raise InputError("; ".join(problems))
    return pair


def _rc_point(param: str, value: float, fixed: Dict[str, float]) -> VictimNetGeometry:
    base = {**DEFAULT_RC_GEOMETRY, **fixed}
    if param == "tr":
        base["tr"] = value
    else:
        # coupling position: fraction of the uncoupled length placed before the window
        if not 0.0 <= value <= 1.0:
            raise InputError("position must be in [0, 1]")
        free = base["ls_len"] + base["le_len"]
        base["ls_len"] = value * free
        base["le_len"] = free - base["ls_len"]
    return VictimNetGeometry(**base)


def _sweep_row(task: Tuple[str, float, Dict[str, float], float, bool]) -> SweepRow:
    param, value, fixed, seg, with_oracle = task
    try:
        if param in RLC_PARAMS:
            pair = _rlc_point(param, value, fixed)
            cfg = rlc_decouple.rlc_sim_config(pair)
            model = rlc_decouple.peak_noise_rlc(pair, "ladder", cfg=cfg, segment_len=seg).v_peak
            oracle = rlc_oracle_peak(pair, seg, cfg) if with_oracle else None
        else:
            geom = _rc_point(param, value, fixed)
            problems = net_model.validate(geom)
            if problems:
                raise InputError("; ".join(problems))
            model, _ = rc2pi.peak_noise(rc2pi.model_from_geometry(geom))
            oracle = ladder_sim.waveform_metrics(rc_oracle(geom, seg)).peak if with_oracle else None
    except XtalkError as exc:
        return SweepRow(param=param, value=value, rejected=str(exc))
    except ValueError as exc:
        # pydantic validation of the swept point
        return SweepRow(param=param, value=value, rejected=str(exc).splitlines()[0])

    err = rel_err(model, oracle) if oracle else None
    return SweepRow(param=param, value=value, model_peak=model, oracle_peak=oracle, rel_err=err)


def sweep(
    param: str,
    grid: Sequence[float],
    fixed: Optional[Dict[str, float]] = None,
    *,
    segment_len: Optional[float] = None,
    with_oracle: bool = True,
    workers: Optional[int] = None,
) -> SweepTable:
    """
    Model (and optionally oracle) peak over a grid of one parameter.

    RLC parameters sweep a normalized operating point (INDUCTIVE_POINT defaults).
    rt moves at fixed rr; ct, kl and kc move at fixed zeta (rr re-solved per
    point) unless `fixed` pins rr.
    "tr" and "position" sweep an RC net.
    Points violating the input invariants are kept as rejected rows.
    """
    if param not in SWEEP_PARAMS:
        raise InputError(f"unknown sweep parameter '{param}' (expected one of {', '.join(SWEEP_PARAMS)})")
    seg = segment_len or settings.segment_um
    tasks = [(param, float(v), dict(fixed or {}), seg, with_oracle) for v in grid]
    rows = _map(_sweep_row, tasks, workers or settings.workers)
    logger.info(f"📈 sweep {param}: {len(rows)} points, {sum(r.rejected is not None for r in rows)} rejected")
    return SweepTable(param=param, rows=rows)


# =========================
# Emission
# =========================

def _fmt(value: Optional[float]) -> str:
    if value is None:
        return ""
    return "%.9g" % value


def write_csv(fh: TextIO, data: Union[ErrorStats, SweepTable]) -> None:
    """
    Stats -> `case_id,model,oracle,rel_err`; sweep -> `param,value,model_peak,oracle_peak,rel_err`.
    Excluded or rejected entries keep their row with empty numeric cells.
    """
    if isinstance(data, ErrorStats):
        header = STATS_HEADER
        rows = [[str(c.case_id), _fmt(c.model), _fmt(c.oracle), _fmt(c.rel_err)] for c in data.cases]
    elif isinstance(data, SweepTable):
        header = SWEEP_HEADER
        rows = [
            [r.param, _fmt(r.value), _fmt(r.model_peak), _fmt(r.oracle_peak), _fmt(r.rel_err)]
            for r in data.rows
        ]
    else:
        raise InputError(f"cannot emit {type(data).__name__} as CSV")

    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)


def emit_csv(data: Union[ErrorStats, SweepTable], path: str) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            write_csv(fh, data)
    except OSError as exc:
        raise ReportWriteError(str(path), exc) from exc


def summary(stats: ErrorStats, config: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    out: Dict[str, Any] = {
        "mean_abs_err": stats.mean_abs_err,
        "max_abs_err": stats.max_abs_err,
        "n_cases": stats.n_cases,
        "n_excluded": stats.n_excluded,
        "worst_case_id": stats.worst_case_id,
    }
    if config is not None:
        out["config"] = config
    return out

