# app/services/rlc_decouple.py
"""
Coupled RLC pair -> two independent single-mode lines, and the
time-of-flight peak noise estimate built on them.

Line 1 is the aggressor (step input), line 2 the victim (driver held at 0).
With V̄o1 / V̄o2 the far-end step responses of the common / differential mode
lines, the victim far end is (V̄o1 - V̄o2)/2 for a symmetric pair and
w1 V̄o1 + w2 V̄o2 (w1 = -w2) once the modes rotate under asymmetry.
"""
from __future__ import annotations

import math
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.linalg import eigh
from scipy.signal import bilinear, lfilter
from scipy.special import i1e

from app.core.config import settings
from app.core.errors import (
    AsymmetricResistanceError,
    InputError,
    TwaNotApplicableError,
)
from app.core.logging import app_logger as logger
from app.schemas.rlc_schema import (
    CoupledRlcPair,
    DecoupledLine,
    EffectiveParams,
    NormalizedVars,
    RlcNoiseEstimate,
)
from app.schemas.sim_schema import InputWave, SimConfig
from app.services import ladder_sim
from app.services.ladder_sim import Waveform

Method = Literal["ladder", "twa"]
Variant = Literal["modal", "consistent", "printed"]

# Strongly inductive reference point for sweeps and tests
INDUCTIVE_POINT = {"kl": 0.769, "kc": 0.217, "ct": 0.05, "rt": 0.25, "zeta": 1.0}


# =========================
# Validation
# =========================

def validate_pair(pair: CoupledRlcPair) -> List[str]:
    problems: List[str] = []
    for name in ("r", "dr", "l", "dl", "lm", "cg", "dc", "cc", "h", "rs_drv", "cl_load", "vdd"):
        if not math.isfinite(getattr(pair, name)):
            problems.append(f"{name} must be finite")
    if problems:
        return problems

    if pair.l <= 0:
        problems.append("l must be > 0")
    if pair.cg <= 0:
        problems.append("cg must be > 0")
    if pair.h <= 0:
        problems.append("h must be > 0")
    if pair.r < 0:
        problems.append("r must be >= 0")
    if pair.cc < 0:
        problems.append("cc must be >= 0")
    if pair.l > 0 and abs(pair.lm) >= pair.l:
        problems.append("|lm| must be < l")
    if abs(pair.dl) >= 1:
        problems.append("|dl| must be < 1")
    if abs(pair.dc) >= 1:
        problems.append("|dc| must be < 1")
    if abs(pair.lm) < pair.l and abs(pair.dl) < 1 and pair.lm ** 2 >= pair.l ** 2 * (1.0 - pair.dl ** 2):
        problems.append("lm^2 must be < l^2 (1 - dl^2) for a passive inductance matrix")
    if pair.rs_drv <= 0:
        problems.append("rs_drv must be > 0")
    if pair.cl_load < 0:
        problems.append("cl_load must be >= 0")
    return problems


def _require_valid(pair: CoupledRlcPair) -> None:
    if pair.dr != 0:
        raise AsymmetricResistanceError(pair.dr)
    problems = validate_pair(pair)
    if problems:
        raise InputError("; ".join(problems))


# =========================
# Effective parameters + modes
# =========================

def pair_matrices(pair: CoupledRlcPair) -> Tuple[np.ndarray, np.ndarray]:
    """Per-unit-length (L, C) of the pair, aggressor first, matching the coupled ladder."""
    l_mat = np.array([
        [pair.l * (1.0 + pair.dl), pair.lm],
        [pair.lm, pair.l * (1.0 - pair.dl)],
    ])
    c_mat = np.array([
        [pair.cg * (1.0 + pair.dc) + pair.cc, -pair.cc],
        [-pair.cc, pair.cg * (1.0 - pair.dc) + pair.cc],
    ])
    return l_mat, c_mat


def _modal_lines(pair: CoupledRlcPair) -> List[Dict[str, float]]:
    """
    Lossless modes of the pair in the C^(1/2)-scaled frame.

    With K = C^(1/2) L C^(1/2) = Q diag(kappa) Q^T, mode k is a single line with
    c_k = q_k^T C q_k and l_k = kappa_k / c_k (so its delay is h sqrt(kappa_k)).
    Its far-end step response enters line i with weight
    (C^(-1/2) q_k)_i (C^(1/2) q_k)_aggressor; the weights of the two modes sum
    to 0 on the victim and to 1 on the aggressor. Loss, driver and load are
    projected onto the diagonal of C in that frame.

    Returns [common, differential] where the common mode moves both lines in
    the same direction.
    """
    l_mat, c_mat = pair_matrices(pair)
    c_eig, c_vec = eigh(c_mat)
    c_root = (c_vec * np.sqrt(c_eig)) @ c_vec.T
    c_root_inv = np.linalg.inv(c_root)
    k_mat = c_root @ l_mat @ c_root

    if pair.dc == 0 and pair.dl == 0:
        q = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)
        kappa = np.einsum("ik,ij,jk->k", q, k_mat, q)
    else:
        kappa, q = eigh(k_mat)

    modes = []
    for k in range(2):
        qk = q[:, k]
        shape = c_root_inv @ qk
        drive = float(c_root[0] @ qk)
        c_k = float(qk @ c_mat @ qk)
        modes.append({
            "c": c_k,
            "l": float(kappa[k]) / c_k,
            "w_victim": float(shape[1]) * drive,
            "w_aggressor": float(shape[0]) * drive,
            "same_sign": float(shape[0] * shape[1]),
        })

    if modes[1]["same_sign"] > modes[0]["same_sign"]:
        modes.reverse()
    for m in modes:
        if m["l"] <= 0:
            raise InputError(f"mode inductance not passive: l={m['l']:.4g}")
    return modes


def effective_params(pair: CoupledRlcPair, variant: Optional[Variant] = None) -> EffectiveParams:
    """
    Symmetric-equivalent per-unit-length parameters of an asymmetric pair.

    "consistent" / "printed" use the closed forms

        c'g = cg + cc - sqrt(cc^2 + cg^2 dc^2)
        c'c = sqrt(cc^2 + cg^2 dc^2)                 ("consistent")
            = cc sqrt(1 + (cc/cg)/2 * dc^2)          ("printed")
        l'  = l
        l'm = (lm cc - l cg dc dl) / sqrt(cc^2 + cg^2 dc^2)

    "modal" reads them off the exact lossless modes: c'g and c'g + 2c'c are
    the mode capacitances, l' +/- l'm the mode inductances.

    Raises:
      AsymmetricResistanceError when dr != 0.
    """
    _require_valid(pair)
    variant = variant or settings.ccprime_variant

    if variant == "modal":
        common, differential = _modal_lines(pair)
        return EffectiveParams(
            cg_eff=common["c"],
            cc_eff=(differential["c"] - common["c"]) / 2.0,
            l_eff=(common["l"] + differential["l"]) / 2.0,
            lm_eff=(common["l"] - differential["l"]) / 2.0,
        )

    if pair.dc == 0:
        return EffectiveParams(cg_eff=pair.cg, cc_eff=pair.cc, l_eff=pair.l, lm_eff=pair.lm)

    root = math.sqrt(pair.cc ** 2 + (pair.cg * pair.dc) ** 2)
    cg_eff = pair.cg + pair.cc - root

    if variant == "printed":
        cc_eff = pair.cc * math.sqrt(1.0 + (pair.cc / pair.cg) / 2.0 * pair.dc ** 2)
    else:
        cc_eff = root

    lm_eff = (pair.lm * pair.cc - pair.l * pair.cg * pair.dc * pair.dl) / root if root > 0 else pair.lm

    if abs(lm_eff) >= pair.l:
        raise InputError(f"effective mutual inductance not passive: |l'm|={abs(lm_eff):.4g} >= l'={pair.l:.4g}")

    return EffectiveParams(cg_eff=cg_eff, cc_eff=cc_eff, l_eff=pair.l, lm_eff=lm_eff)


def decouple(pair: CoupledRlcPair, variant: Optional[Variant] = None) -> Tuple[DecoupledLine, DecoupledLine]:
    """
    Common and differential mode lines. The closed-form variants keep the
    symmetric ±1/2 reconstruction; "modal" carries the rotated mode weights.
    """
    variant = variant or settings.ccprime_variant
    eff = effective_params(pair, variant)
    shared = dict(r=pair.r, h=pair.h, rs_drv=pair.rs_drv, cl_load=pair.cl_load, vdd=pair.vdd)

    weights = [{}, {}]
    if variant == "modal":
        weights = [
            {"victim_weight": m["w_victim"], "aggressor_weight": m["w_aggressor"]}
            for m in _modal_lines(pair)
        ]

    common = DecoupledLine(mode="common", l_mode=eff.l_eff + eff.lm_eff, c_mode=eff.cg_eff, **shared, **weights[0])
    differential = DecoupledLine(
        mode="differential",
        l_mode=eff.l_eff - eff.lm_eff,
        c_mode=eff.cg_eff + 2.0 * eff.cc_eff,
        **shared,
        **weights[1],
    )
    return common, differential


def victim_from_modes(
    v_even: np.ndarray,
    v_odd: np.ndarray,
    weights: Tuple[float, float] = (0.5, -0.5),
) -> np.ndarray:
    return weights[0] * np.asarray(v_even) + weights[1] * np.asarray(v_odd)


def aggressor_from_modes(
    v_even: np.ndarray,
    v_odd: np.ndarray,
    weights: Tuple[float, float] = (0.5, 0.5),
) -> np.ndarray:
    return weights[0] * np.asarray(v_even) + weights[1] * np.asarray(v_odd)


# =========================
# Normalized characterization
# =========================

def zeta_of(rr: float, rt: float, ct: float) -> float:
    return (rt + rt * ct + rr * ct + 0.5 * rr) / (2.0 * math.sqrt(1.0 + ct))


def rr_for_zeta(zeta: float, rt: float, ct: float) -> float:
    """Inverse of `zeta_of` in rr at fixed rt, ct."""
    return (2.0 * zeta * math.sqrt(1.0 + ct) - rt * (1.0 + ct)) / (ct + 0.5)


def normalized_vars(pair: CoupledRlcPair) -> NormalizedVars:
    z0 = math.sqrt(pair.l / pair.cg)
    tf = pair.h * math.sqrt(pair.l * pair.cg)
    rr = pair.h * pair.r / z0
    rt = pair.rs_drv / z0
    ct = pair.cl_load / (pair.h * pair.cg)
    return NormalizedVars(
        z0=z0,
        tf=tf,
        rr=rr,
        rt=rt,
        ct=ct,
        kc=pair.cc / pair.cg,
        kl=pair.lm / pair.l,
        zeta=zeta_of(rr, rt, ct),
    )


def pair_from_normalized(
    *,
    kl: float,
    kc: float,
    ct: float,
    rt: float,
    rr: Optional[float] = None,
    zeta: Optional[float] = None,
    l: float = 0.5e-12,
    cg: float = 0.1e-15,
    h: float = 1000.0,
    dc: float = 0.0,
    dl: float = 0.0,
    vdd: float = 1.0,
) -> CoupledRlcPair:
    """
    Physical pair for a normalized operating point. Exactly one of `rr` and
    `zeta` is given; a zeta target is met by solving for rr.

    Defaults: l in H/µm, cg in F/µm, h in µm.
    """
    if (rr is None) == (zeta is None):
        raise InputError("give exactly one of rr and zeta")
    if rr is None:
        rr = rr_for_zeta(zeta, rt, ct)
        if rr < 0:
            raise InputError(f"zeta={zeta} is below the minimum reachable at rt={rt}, ct={ct}")

    z0 = math.sqrt(l / cg)
    return CoupledRlcPair(
        r=rr * z0 / h,
        l=l,
        dl=dl,
        lm=kl * l,
        cg=cg,
        dc=dc,
        cc=kc * cg,
        h=h,
        rs_drv=rt * z0,
        cl_load=ct * h * cg,
        vdd=vdd,
    )


def times_of_flight(pair: CoupledRlcPair, variant: Optional[Variant] = None) -> Tuple[float, float]:
    """tf1 = h sqrt((l'+l'm) c'g), tf2 = h sqrt((l'-l'm)(c'g + 2c'c))."""
    common, differential = decouple(pair, variant)
    return common.tf, differential.tf


def mode_zeta(line: DecoupledLine) -> float:
    """Damping parameter of one mode line, normalized by its own impedance."""
    z0m = line.z0
    return zeta_of(
        rr=line.h * line.r / z0m,
        rt=line.rs_drv / z0m,
        ct=line.cl_load / (line.h * line.c_mode),
    )


# =========================
# Transients
# =========================

def rlc_sim_config(pair: CoupledRlcPair, variant: Optional[Variant] = None, t_stop: Optional[float] = None) -> SimConfig:
    """dt = min(tf1, tf2)/200; t_stop covers 6 tf_max and the slowest mode's RC charging."""
    common, differential = decouple(pair, variant)
    tf_min = min(common.tf, differential.tf)
    tf_max = max(common.tf, differential.tf)

    tau = 0.0
    for line in (common, differential):
        c_total = line.c_mode * line.h
        tau = max(tau, line.rs_drv * (c_total + line.cl_load) + line.r * line.h * (c_total / 2.0 + line.cl_load))

    return SimConfig(
        dt=tf_min / 200.0,
        t_stop=t_stop or 6.0 * max(tf_max, tau),
        input=InputWave(kind="step", vdd=pair.vdd),
    )


def _lossy_step(rho: float, tau: float, t: np.ndarray) -> np.ndarray:
    """
    Unit-step response of a semi-infinite RLC line at delay `tau`:

        e^{-rho tau} + rho tau ∫_tau^t e^{-rho u} I1(rho w)/w du,  w = sqrt(u^2 - tau^2)

    zero before the wave arrives.
    """
    out = np.zeros_like(t)
    after = t >= tau
    if not after.any():
        return out

    u = np.concatenate(([tau], t[after]))
    w = np.sqrt(np.maximum(u * u - tau * tau, 0.0))
    safe_w = np.where(w > 0, w, 1.0)
    integrand = np.where(
        w > 0,
        i1e(rho * w) * np.exp(rho * (w - u)) / safe_w,
        0.5 * rho * np.exp(-rho * u),
    )
    tail = cumulative_trapezoid(integrand, u, initial=0.0)[1:]
    out[after] = math.exp(-rho * tau) + rho * tau * tail
    return out


def twa_waveform(line: DecoupledLine, cfg: SimConfig, zeta_limit: Optional[float] = None) -> Waveform:
    """
    Traveling-wave approximation of the far-end step response.

    Arrival k reaches the open end at (2k+1) tf after bouncing k times off the
    driver; it contributes 2 T Γs^k times the lossy-line step response, with
    T = z0/(z0 + rs) and Γs = (rs - z0)/(rs + z0). The summed open-end voltage
    is then low-pass filtered by the load time constant z0 cl.

    Raises:
      TwaNotApplicableError when the mode is overdamped.
    """
    limit = settings.twa_zeta_limit if zeta_limit is None else zeta_limit
    zeta = mode_zeta(line)
    if zeta > limit:
        raise TwaNotApplicableError(line.mode, zeta, limit)

    z0m = line.z0
    tf = line.tf
    rho = line.r / (2.0 * line.l_mode)
    trans = z0m / (z0m + line.rs_drv)
    gamma = (line.rs_drv - z0m) / (line.rs_drv + z0m)

    n = max(1, math.ceil(cfg.t_stop / cfg.dt - 1e-9)) + 1
    t = cfg.dt * np.arange(n)

    v = np.zeros(n)
    k = 0
    while (2 * k + 1) * tf <= t[-1]:
        weight = 2.0 * trans * gamma ** k
        if abs(weight) < 1e-12:
            break
        v += weight * _lossy_step(rho, (2 * k + 1) * tf, t)
        k += 1

    tau_load = z0m * line.cl_load
    if tau_load > 0:
        b, a = bilinear([1.0], [tau_load, 1.0], fs=1.0 / cfg.dt)
        v = lfilter(b, a, v)

    return Waveform(t0=0.0, dt=cfg.dt, samples=line.vdd * v)


def decoupled_transient(
    line: DecoupledLine,
    method: Method = "ladder",
    cfg: Optional[SimConfig] = None,
    *,
    segment_len: Optional[float] = None,
    segments: Optional[int] = None,
) -> Waveform:
    """Far-end step response of one mode line ("ladder" is the reference, "twa" the fast path)."""
    if cfg is None:
        cfg = SimConfig.for_scales(tf=line.tf, input=InputWave(kind="step", vdd=line.vdd))
    elif cfg.input.kind != "step":
        raise InputError("decoupled transients use a step input")

    if method == "twa":
        return twa_waveform(line, cfg)
    if method != "ladder":
        raise InputError(f"unknown method '{method}'")

    net = ladder_sim.build_single(
        line.as_line(),
        segment_len or settings.segment_um,
        segments=segments,
    )
    return ladder_sim.transient(net, cfg)["out"]


def mode_waveforms(
    pair: CoupledRlcPair,
    method: Method = "ladder",
    cfg: Optional[SimConfig] = None,
    *,
    variant: Optional[Variant] = None,
    segment_len: Optional[float] = None,
    segments: Optional[int] = None,
) -> Tuple[Waveform, Waveform]:
    common, differential = decouple(pair, variant)
    cfg = cfg or rlc_sim_config(pair, variant)
    return (
        decoupled_transient(common, method, cfg, segment_len=segment_len, segments=segments),
        decoupled_transient(differential, method, cfg, segment_len=segment_len, segments=segments),
    )


def coupled_oracle(
    pair: CoupledRlcPair,
    cfg: Optional[SimConfig] = None,
    *,
    segment_len: Optional[float] = None,
    segments: Optional[int] = None,
) -> Dict[str, Waveform]:
    """Direct simulation of the coupled ladder: {"line1": aggressor, "line2": victim}."""
    problems = validate_pair(pair)
    if problems:
        raise InputError("; ".join(problems))
    if cfg is None:
        cfg = rlc_sim_config(pair.model_copy(update={"dr": 0.0}))
    net = ladder_sim.build_coupled(pair, segment_len or settings.segment_um, segments=segments)
    return ladder_sim.transient(net, cfg)


# =========================
# Peak noise model
# =========================

def peak_noise_rlc(
    pair: CoupledRlcPair,
    method: Method = "ladder",
    *,
    variant: Optional[Variant] = None,
    cfg: Optional[SimConfig] = None,
    segment_len: Optional[float] = None,
) -> RlcNoiseEstimate:
    """
    Victim noise sampled at the two characteristic times:

      v_neg at tf_max   : the faster mode has arrived, the slower one not yet.
                          -V̄o2/2 when tf1 > tf2, +V̄o1/2 otherwise.
      v_pos at 3 tf_max : (V̄o1 - V̄o2)/2, first reflection of the slower mode.
      v_peak            : the larger of the two magnitudes.

    The 1/2 factors are the symmetric mode weights; an asymmetric pair uses
    the weights its mode lines carry. Values are fractions of vdd.

    Raises:
      InputError when an explicit `cfg` stops before 3 tf_max.
    """
    common, differential = decouple(pair, variant)
    tf1, tf2 = common.tf, differential.tf
    tf_max = max(tf1, tf2)

    if cfg is None:
        cfg = rlc_sim_config(pair, variant)
        if cfg.t_stop < 3.0 * tf_max:
            cfg = cfg.model_copy(update={"t_stop": 3.5 * tf_max})
    elif cfg.t_stop < 3.0 * tf_max:
        raise InputError(
            f"t_stop={cfg.t_stop:.4g} s ends before 3 tf_max={3.0 * tf_max:.4g} s; "
            "the positive estimate would be read off the end of the waveform"
        )

    v1, v2 = mode_waveforms(pair, method, cfg, variant=variant, segment_len=segment_len)
    vdd = pair.vdd
    w1, w2 = common.victim_weight, differential.victim_weight

    o1_fast = tf1 < tf2
    o2_fast = tf2 < tf1
    v_neg = (w1 * float(v1.at(tf_max)) * o1_fast + w2 * float(v2.at(tf_max)) * o2_fast) / vdd
    v_pos = (w1 * float(v1.at(3.0 * tf_max)) + w2 * float(v2.at(3.0 * tf_max))) / vdd
    v_peak = max(abs(v_neg), abs(v_pos))


    logger.debug(f"RLC peak: tf1={tf1:.4g}, tf2={tf2:.4g}, v_neg={v_neg:.4g}, v_pos={v_pos:.4g}")

    return RlcNoiseEstimate(
        tf1=tf1,
        tf2=tf2,
        tf_max=tf_max,
        v_neg=v_neg,
        v_pos=v_pos,
        v_peak=v_peak,
        method=method,
    )
