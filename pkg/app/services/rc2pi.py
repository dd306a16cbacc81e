# app/services/rc2pi.py
"""
2-π reduced crosstalk model for an RC victim net.

Circuit (all voltages normalized to vdd):

    driver --Rd-- n1 --Rs-- n2 --Re-- n3 (receiver)
                  |         |  \\       |
                  C1        C2  Cx     CL
                  |         |    \\     |
                 gnd       gnd  v_agg  gnd

The aggressor is an ideal saturated ramp injected through Cx at the coupling
node. The exact transfer function V_out/V_agg is third order; its
pole/residue form gives the analytic noise waveform and the dominant-pole
approximation gives closed forms for the peak and the width of the pulse.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Literal, Tuple, Union

import numpy as np

from app.core.errors import InputError, NumericalError, ThresholdAbovePeakError
from app.core.logging import app_logger as logger
from app.schemas.net_schema import LumpedVictimParams, VictimNetGeometry
from app.schemas.rc_schema import NoiseMetrics, RampInput, TwoPiModel
from app.services import net_model

HALF_PEAK = "half-peak"
Threshold = Union[float, Literal["half-peak"]]

# relative pole separation below which a pair is treated as repeated
POLE_MERGE_TOL = 1e-6


# =========================
# Numerical primitives
# =========================

def one_minus_exp(x: float) -> float:
    """1 - e^{-x} without cancellation for small x."""
    return -math.expm1(-x)


def _log_expm1(x: float) -> float:
    """ln(e^x - 1) for x > 0, safe for both tiny and huge x."""
    if x < 1.0:
        return math.log(math.expm1(x))
    return x + math.log1p(-math.exp(-x))


# =========================
# Types
# =========================

@dataclass(frozen=True)
class TransferCoeffs:
    """
    H(s) = (a2 s^2 + a1 s) / (b3 s^3 + b2 s^2 + b1 s + b0)

    Normalized so the leading non-zero denominator coefficient is 1. For a full
    third-order circuit b3 = 1; when an element collapses the order
    (`order` < 3) the higher coefficients are exactly zero.
    """
    a2: float
    a1: float
    b2: float
    b1: float
    b0: float
    b3: float = 1.0
    order: int = 3

    @property
    def order_reduced(self) -> bool:
        return self.order < 3

    def numerator(self) -> np.ndarray:
        return np.array([self.a2, self.a1, 0.0])

    def denominator(self) -> np.ndarray:
        return np.array([self.b3, self.b2, self.b1, self.b0])

    def evaluate(self, s: Union[complex, np.ndarray]) -> Union[complex, np.ndarray]:
        return np.polyval(self.numerator(), s) / np.polyval(self.denominator(), s)


@dataclass(frozen=True)
class PoleResidueForm:
    """
    H(s) = direct + sum_i k_i / (s - s_i)

    `direct` is zero for the full third-order circuit; it is non-zero only for
    order-reduced circuits whose numerator and denominator have equal degree.
    """
    poles: np.ndarray
    residues: np.ndarray
    direct: float = 0.0
    perturbed: bool = False
    flags: Tuple[str, ...] = field(default_factory=tuple)

    def evaluate(self, s: Union[complex, np.ndarray]) -> Union[complex, np.ndarray]:
        s = np.asarray(s, dtype=complex)
        total = np.full(s.shape, self.direct, dtype=complex)
        for p, k in zip(self.poles, self.residues):
            total = total + k / (s - p)
        return total


# =========================
# Circuit reduction
# =========================

def reduce(params: LumpedVictimParams, rd: float, cload: float, tr: float, vdd: float = 1.0) -> TwoPiModel:
    """
    Build the 2-π circuit from the lumped upstream/downstream values.

    C1 = Cs/2, C2 = (Cs + Ce)/2, CL = Ce/2 + C_load.
    """
    return TwoPiModel(
        rd=rd,
        rs=params.rs_up,
        re=params.re_down,
        c1=params.cs_up / 2.0,
        c2=(params.cs_up + params.ce_down) / 2.0,
        cl=params.ce_down / 2.0 + cload,
        cx=params.cx,
        tr=tr,
        vdd=vdd,
    )


def model_from_geometry(geom: VictimNetGeometry) -> TwoPiModel:
    return reduce(net_model.derive_lumped(geom), geom.rd, geom.cload, geom.tr, geom.vdd)


# =========================
# Transfer function
# =========================

def transfer_coeffs(m: TwoPiModel) -> TransferCoeffs:
    """
    Exact H(s) = V_out/V_agg of the 2-π circuit from its nodal equations.

    With P = Rd+Rs, Q = Rd Rs C1, A = Re CL, B = Rd C1, Cs = C2+Cx:

        N(s) = Cx Q s^2 + Cx P s
        D(s) = Cs A Q s^3 + (A B + Q (Cs+CL) + P Cs A) s^2
               + (A + B + P (Cs+CL)) s + 1

    so a1/b0 = (Rd+Rs) Cx and b1/b0 = (Rd+Rs)(Cx+C2+CL) + Re CL + Rd C1.
    """
    p_ = m.rd + m.rs
    q_ = m.rd * m.rs * m.c1
    a_ = m.re * m.cl
    b_ = m.rd * m.c1
    cs = m.c2 + m.cx

    n2 = m.cx * q_
    n1 = m.cx * p_

    d3 = cs * a_ * q_
    d2 = a_ * b_ + q_ * (cs + m.cl) + p_ * cs * a_
    d1 = a_ + b_ + p_ * (cs + m.cl)
    d0 = 1.0

    den = [d3, d2, d1, d0]
    lead_idx = next(i for i, d in enumerate(den) if d != 0.0)
    lead = den[lead_idx]
    order = 3 - lead_idx

    if order < 3:
        logger.debug(f"order-reduced 2-π circuit (order {order}): {m}")

    normalized = [d / lead for d in den]
    return TransferCoeffs(
        a2=n2 / lead,
        a1=n1 / lead,
        b3=normalized[0],
        b2=normalized[1],
        b1=normalized[2],
        b0=normalized[3],
        order=order,
    )


# =========================
# Poles
# =========================

def _pow2_scale(b2: float, b1: float, b0: float) -> float:
    """Power-of-two root scale, so rescaling the coefficients is exact."""
    bound = max(abs(b2), math.sqrt(abs(b1)), abs(b0) ** (1.0 / 3.0))
    if bound == 0.0:
        return 1.0
    return 2.0 ** round(math.log2(bound))


def _cubic(x, c2, c1, c0):
    return ((x + c2) * x + c1) * x + c0


def _cubic_prime(x, c2, c1):
    return (3.0 * x + 2.0 * c2) * x + c1


def _polish(x, c2, c1, c0):
    """One guarded Newton step: kept only if it lowers the residual."""
    fp = _cubic_prime(x, c2, c1)
    if fp == 0:
        return x
    candidate = x - _cubic(x, c2, c1, c0) / fp
    if abs(_cubic(candidate, c2, c1, c0)) <= abs(_cubic(x, c2, c1, c0)):
        return candidate
    return x


def _quadratic_roots(e1: float, e0: float) -> Tuple[complex, complex]:
    disc = e1 * e1 - 4.0 * e0
    if disc >= 0.0:
        t = -(e1 + math.copysign(math.sqrt(disc), e1)) / 2.0
        if t == 0.0:
            return complex(0.0), complex(0.0)
        return complex(t), complex(e0 / t)
    re = -e1 / 2.0
    im = math.sqrt(-disc) / 2.0
    return complex(re, im), complex(re, -im)


def solve_cubic_stable(b2: float, b1: float, b0: float) -> np.ndarray:
    """
    Roots of s^3 + b2 s^2 + b1 s + b0 with real coefficients.

    Coefficients are first rescaled by a power of two close to the root
    magnitude; the depressed cubic is then solved with the trigonometric form
    (three real roots) or Cardano plus deflation (one real root and a
    conjugate pair). Every root gets one Newton polish step. Conjugate pairs are
    returned exactly conjugate; ordering is by ascending |Re|, then Im.
    """
    sigma = _pow2_scale(b2, b1, b0)
    c2 = b2 / sigma
    c1 = b1 / (sigma * sigma)
    c0 = b0 / (sigma * sigma * sigma)

    p = c1 - c2 * c2 / 3.0
    q = c0 - c2 * c1 / 3.0 + 2.0 * c2 ** 3 / 27.0
    shift = c2 / 3.0

    roots: List[complex]
    disc = p ** 3 / 27.0 + q * q / 4.0

    if p != 0.0 and disc <= 0.0:
        # three real roots
        arg = (3.0 * q / (2.0 * p)) * math.sqrt(-3.0 / p)
        arg = min(1.0, max(-1.0, arg))
        phi = math.acos(arg) / 3.0
        amp = 2.0 * math.sqrt(-p / 3.0)
        xs = [amp * math.cos(phi - 2.0 * math.pi * k / 3.0) - shift for k in range(3)]
        roots = [complex(_polish(x, c2, c1, c0)) for x in xs]
    else:
        if p == 0.0:
            x0 = -np.cbrt(q)
        else:
            r = -q / 2.0
            sq = math.sqrt(disc)
            x0 = float(np.cbrt(r + sq) + np.cbrt(r - sq))
        x0 = _polish(float(x0 - shift), c2, c1, c0)

        # deflate: (x - x0)(x^2 + e1 x + e0)
        e1 = c2 + x0
        e0_fwd = c1 + x0 * e1
        if x0 != 0.0:
            e0_bwd = -c0 / x0
            # pick the one that better honours the remaining coefficient identity
            err_fwd = abs(-x0 * e0_fwd - c0)
            err_bwd = abs(e0_bwd - x0 * e1 - c1)
            e0 = e0_bwd if err_bwd < err_fwd else e0_fwd
        else:
            e0 = e0_fwd

        z1, z2 = _quadratic_roots(e1, e0)
        if z1.imag != 0.0:
            z1 = _polish(z1, c2, c1, c0)
            z2 = z1.conjugate()
        else:
            z1 = complex(_polish(z1.real, c2, c1, c0))
            z2 = complex(_polish(z2.real, c2, c1, c0))
        roots = [complex(x0), z1, z2]

    scaled = np.array([z * sigma for z in roots], dtype=complex)
    order = sorted(range(3), key=lambda i: (abs(scaled[i].real), scaled[i].imag))
    return scaled[order]


def poles(c: TransferCoeffs) -> np.ndarray:
    if c.order == 3:
        return solve_cubic_stable(c.b2, c.b1, c.b0)
    if c.order == 2:
        z1, z2 = _quadratic_roots(c.b1, c.b0)
        return np.array(sorted([z1, z2], key=lambda z: (abs(z.real), z.imag)), dtype=complex)
    if c.order == 1:
        return np.array([complex(-c.b0)])
    return np.array([], dtype=complex)


# =========================
# Residues
# =========================

def _separate_repeated(ps: np.ndarray) -> Tuple[np.ndarray, bool]:
    ps = ps.copy()
    if len(ps) < 2:
        return ps, False
    scale = float(np.max(np.abs(ps)))
    delta = POLE_MERGE_TOL * scale
    perturbed = False
    for i, j in combinations(range(len(ps)), 2):
        if abs(ps[i] - ps[j]) < delta:
            mid = (ps[i] + ps[j]) / 2.0
            centre = complex(mid.real) if abs(mid.imag) <= delta else mid
            ps[i] = centre - delta
            ps[j] = centre + delta
            perturbed = True
    return ps, perturbed


def residues(c: TransferCoeffs, ps: np.ndarray) -> PoleResidueForm:
    """
    k_i = R(s_i) / prod_{j != i}(s_i - s_j), where R is the numerator after
    removing any direct term. For the third-order case R = a2 s^2 + a1 s and
    sum(k_i) = a2.
    """
    ps = np.asarray(ps, dtype=complex)
    ps, perturbed = _separate_repeated(ps)
    flags: Tuple[str, ...] = ("pole-perturbation applied",) if perturbed else ()
    if perturbed:
        logger.warning("⚠ near-repeated poles: pole-perturbation applied")

    n = len(ps)
    den = c.denominator()[3 - n:]
    num = np.trim_zeros(c.numerator(), "f")
    if num.size == 0:
        return PoleResidueForm(poles=ps, residues=np.zeros(n, dtype=complex), perturbed=perturbed, flags=flags)

    direct = 0.0
    if len(num) - 1 >= n:
        # equal degree: peel off the feedthrough
        quotient, num = np.polydiv(num, den)
        direct = float(quotient[-1])

    ks = np.empty(n, dtype=complex)
    for i in range(n):
        others = np.delete(ps, i)
        ks[i] = np.polyval(num, ps[i]) / np.prod(ps[i] - others)

    return PoleResidueForm(poles=ps, residues=ks, direct=direct, perturbed=perturbed, flags=flags)


def pole_residue_form(m: TwoPiModel) -> PoleResidueForm:
    c = transfer_coeffs(m)
    return residues(c, poles(c))


# =========================
# Waveforms
# =========================

def ramp_value(ramp: RampInput, t):
    t = np.asarray(t, dtype=float)
    return ramp.vdd * np.clip(t / ramp.tr, 0.0, 1.0)


def waveform_exact(pr: PoleResidueForm, ramp: RampInput, t):
    """
    Noise at the receiver for a saturated-ramp aggressor, summed over poles.

    Per pole (k, s):
        0 <= t <= tr : k/(s^2 tr) (e^{st} - 1 - st)
        t >= tr      : k/(s^2 tr) (e^{st} - e^{s(t-tr)}) - k/s
    """
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t_arr < 0):
        raise InputError("waveform time must be >= 0")
    if np.any(pr.poles.real >= 0):
        raise NumericalError(f"unstable pole in {pr.poles}")

    tr = ramp.tr
    rising = t_arr <= tr
    total = np.zeros(t_arr.shape, dtype=complex)
    scale = np.zeros(t_arr.shape)

    for s, k in zip(pr.poles, pr.residues):
        if k == 0:
            continue
        coef = k / (s * s * tr)
        early = coef * (np.exp(s * t_arr) - 1.0 - s * t_arr)
        late = coef * (np.exp(s * t_arr) - np.exp(s * (t_arr - tr))) - k / s
        term = np.where(rising, early, late)
        total += term
        scale += np.abs(term)

    if np.any(np.abs(total.imag) > 1e-12 * np.maximum(1.0, scale)):
        raise NumericalError("non-real noise waveform: conjugate pole contributions do not cancel")

    v = ramp.vdd * total.real + pr.direct * ramp_value(ramp, t_arr)
    return v if np.ndim(t) else float(v[0])


def exact_waveform_for(m: TwoPiModel, t):
    return waveform_exact(pole_residue_form(m), RampInput(tr=m.tr, vdd=m.vdd), t)


# =========================
# Dominant-pole closed forms
# =========================

def dominant_pole_metrics(m: TwoPiModel) -> Tuple[float, float]:
    """
    tx = (Rd+Rs) Cx                                   (upstream R times coupling C)
    tv = (Rd+Rs)(Cx+C2+CL) + Re CL + Rd C1            (Elmore-like victim constant)
    """
    tx = (m.rd + m.rs) * m.cx
    tv = (m.rd + m.rs) * (m.cx + m.c2 + m.cl) + m.re * m.cl + m.rd * m.c1
    return tx, tv


def dominant_waveform(m: TwoPiModel, t):
    """Single-pole noise waveform: rises until tr, decays with tv afterwards."""
    tx, tv = dominant_pole_metrics(m)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if tv == 0.0:
        v = np.zeros(t_arr.shape)
    else:
        gain = m.vdd * tx / m.tr
        early = gain * -np.expm1(-t_arr / tv)
        late = gain * (np.exp(-(t_arr - m.tr) / tv) - np.exp(-t_arr / tv))
        v = np.where(t_arr <= m.tr, early, late)
    return v if np.ndim(t) else float(v[0])


def peak_noise(m: TwoPiModel) -> Tuple[float, float]:
    """vmax = (tx/tr)(1 - e^{-tr/tv}) reached at t = tr."""
    tx, tv = dominant_pole_metrics(m)
    if tv == 0.0:
        return 0.0, m.tr
    return m.vdd * (tx / m.tr) * one_minus_exp(m.tr / tv), m.tr


def peak_noise_first_order(m: TwoPiModel) -> float:
    """tx / (tv + tr/2): first-order expansion of `peak_noise` in tr/tv."""
    tx, tv = dominant_pole_metrics(m)
    denom = tv + m.tr / 2.0
    return m.vdd * tx / denom if denom > 0 else 0.0


def crossing_times(m: TwoPiModel, vt: float) -> Tuple[float, float]:
    """
    Rising and falling crossings of `vt` by the dominant-pole waveform.

        t1 = tv ln(tx / (tx - tr vt'))
        t2 = tv ln(tx (e^{tr/tv} - 1) / (tr vt'))
    with vt' = vt/vdd.
    """
    tx, tv = dominant_pole_metrics(m)
    vmax, _ = peak_noise(m)
    if vt <= 0:
        raise InputError("threshold must be > 0")
    if vt >= vmax:
        raise ThresholdAbovePeakError(vt, vmax)

    v = vt / m.vdd
    x = m.tr / tv
    t1 = -tv * math.log1p(-m.tr * v / tx)
    t2 = tv * (math.log(tx / (m.tr * v)) + _log_expm1(x))
    return t1, t2


def noise_width(m: TwoPiModel, vt: Threshold = HALF_PEAK) -> float:
    """
    Time the dominant-pole pulse stays at or above `vt`.

    With the half-peak marker this is tr + tv ln[(1 - e^{-2tr/tv}) / (1 - e^{-tr/tv})].
    An uncoupled net (tx = 0) has no pulse: its half-peak width is 0 and any
    positive threshold raises ThresholdAbovePeakError, as in `crossing_times`.
    """
    if isinstance(vt, str):
        if vt != HALF_PEAK:
            raise InputError(f"unknown threshold marker '{vt}'")
        tx, tv = dominant_pole_metrics(m)
        if tx == 0.0 or tv == 0.0:
            return 0.0
        x = m.tr / tv
        return m.tr + tv * math.log(one_minus_exp(2.0 * x) / one_minus_exp(x))

    t1, t2 = crossing_times(m, float(vt))
    return t2 - t1


def half_peak_width_identity(m: TwoPiModel) -> float:
    """Same quantity as the half-peak width, via (1-e^{-2x})/(1-e^{-x}) = 1+e^{-x}."""
    tx, tv = dominant_pole_metrics(m)
    if tx == 0.0 or tv == 0.0:
        return 0.0
    return m.tr + tv * math.log1p(math.exp(-m.tr / tv))


def analyze(m: TwoPiModel, *, with_exact: bool = True) -> NoiseMetrics:
    tx, tv = dominant_pole_metrics(m)
    vmax, t_peak = peak_noise(m)

    vmax_exact = None
    if with_exact and m.cx > 0:
        t_end = m.tr + 8.0 * max(tv, m.tr)
        grid = np.linspace(0.0, t_end, 4001)
        vmax_exact = float(np.max(exact_waveform_for(m, grid)))

    return NoiseMetrics(
        tx=tx,
        tv=tv,
        vmax=vmax,
        t_peak=t_peak,
        width=noise_width(m, HALF_PEAK),
        vmax_first_order=peak_noise_first_order(m),
        vmax_exact=vmax_exact,
    )
