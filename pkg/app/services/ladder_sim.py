# app/services/ladder_sim.py
"""
Lumped π-segment ladder simulator used as the reference for every model.

Netlists are small element lists (capacitors, R/L branches, mutual
inductances, Norton drivers, ideal-source coupling injections) assembled into
a modified nodal analysis system

    C x' + G x = b u(t) + e u'(t),      x = [node voltages, branch currents]

and integrated with the trapezoidal rule on a fixed step. The system matrix
C/dt + G/2 is factored once per run (scipy.sparse.linalg.splu).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Literal, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from app.core.errors import InputError, IntegrationDivergedError, ReportWriteError, SingularSystemError
from app.core.logging import sim_logger as logger
from app.schemas.net_schema import VictimNetGeometry
from app.schemas.rc_schema import TwoPiModel
from app.schemas.rlc_schema import CoupledRlcPair
from app.schemas.sim_schema import InputWave, LineParams, SimConfig

GROUND = -1
HALF_PEAK = "half-peak"
Polarity = Literal["positive", "negative", "abs"]


# =========================
# Waveform
# =========================

@dataclass(frozen=True)
class Waveform:
    """Uniformly sampled trace: samples[k] is the voltage at t0 + k*dt."""
    t0: float
    dt: float
    samples: np.ndarray

    def __post_init__(self):
        if not self.dt > 0:
            raise InputError("waveform dt must be > 0")
        if not np.all(np.isfinite(self.samples)):
            raise InputError("waveform samples must be finite")

    def __len__(self) -> int:
        return len(self.samples)

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.samples))

    @property
    def t_end(self) -> float:
        return self.t0 + self.dt * (len(self.samples) - 1)

    def at(self, t):
        """Linear interpolation; clamps to the end values outside the record."""
        return np.interp(t, self.times(), self.samples)

    def final_value(self) -> float:
        return float(self.samples[-1])

    @classmethod
    def sample(cls, fn, t0: float, dt: float, n: int) -> "Waveform":
        t = t0 + dt * np.arange(n)
        return cls(t0=t0, dt=dt, samples=np.asarray(fn(t), dtype=float))


def write_waveforms(fh: TextIO, waves: Dict[str, Waveform]) -> None:
    """
    One column per trace on a shared time axis.

    Header is `t_s,v_out` for a single trace and `t_s,v_line1,v_line2` for two
    lines; values use 9 significant digits.
    """
    names = list(waves)
    ref = waves[names[0]]
    headers = ["t_s"] + [("v_out" if len(names) == 1 else f"v_{n}") for n in names]
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(headers)
    for k, t in enumerate(ref.times()):
        writer.writerow([f"{t:.9g}"] + [f"{waves[n].samples[k]:.9g}" for n in names])


def write_waveforms_csv(path: str, waves: Dict[str, Waveform]) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            write_waveforms(fh, waves)
    except OSError as exc:
        raise ReportWriteError(str(path), exc) from exc


# =========================
# Metrics
# =========================

@dataclass(frozen=True)
class WaveformMetrics:
    peak: float
    t_peak: float
    threshold: float
    # (time, "rising" | "falling")
    crossings: List[Tuple[float, str]] = field(default_factory=list)
    # None when the threshold is crossed fewer than twice
    width: Optional[float] = None


def _oriented(samples: np.ndarray, polarity: Polarity) -> np.ndarray:
    if polarity == "positive":
        return samples
    if polarity == "negative":
        return -samples
    if polarity == "abs":
        return np.abs(samples)
    raise InputError(f"unknown polarity '{polarity}'")


def waveform_metrics(
    w: Waveform,
    threshold: Union[float, str, None] = HALF_PEAK,
    polarity: Polarity = "positive",
) -> WaveformMetrics:
    """
    Peak (grid max refined by a 3-point parabola), threshold crossings (linear
    interpolation) and width = last crossing - first crossing.

    With polarity "negative" the trace is mirrored before the search and the
    returned peak is negative again.
    """
    if len(w) == 0:
        raise InputError("empty waveform")

    y = _oriented(np.asarray(w.samples, dtype=float), polarity)
    i = int(np.argmax(y))
    peak = float(y[i])
    t_peak = w.t0 + i * w.dt

    if 0 < i < len(y) - 1:
        y0, y1, y2 = y[i - 1], y[i], y[i + 1]
        curvature = y0 - 2.0 * y1 + y2
        if curvature < 0:
            offset = 0.5 * (y0 - y2) / curvature
            peak = float(y1 - 0.25 * (y0 - y2) * offset)
            t_peak += offset * w.dt

    if threshold is None:
        vt = peak / 2.0
    elif isinstance(threshold, str):
        if threshold != HALF_PEAK:
            raise InputError(f"unknown threshold marker '{threshold}'")
        vt = peak / 2.0
    else:
        vt = float(threshold)

    crossings: List[Tuple[float, str]] = []
    if peak > 0 or not isinstance(threshold, str):
        d = y - vt
        rising = np.nonzero((d[:-1] < 0) & (d[1:] >= 0))[0]
        falling = np.nonzero((d[:-1] >= 0) & (d[1:] < 0))[0]
        for k in rising:
            crossings.append((w.t0 + w.dt * (k - d[k] / (d[k + 1] - d[k])), "rising"))
        for k in falling:
            crossings.append((w.t0 + w.dt * (k + d[k] / (d[k] - d[k + 1])), "falling"))
        crossings.sort()

    width = crossings[-1][0] - crossings[0][0] if len(crossings) >= 2 else None
    sign = -1.0 if polarity == "negative" else 1.0

    return WaveformMetrics(
        peak=sign * peak,
        t_peak=t_peak,
        threshold=sign * vt,
        crossings=crossings,
        width=width,
    )


# =========================
# Netlist
# =========================

@dataclass
class LadderNetlist:
    """
    Element lists of a ladder circuit. Node index -1 is ground.

    branches are series R-L elements (a, b, r, l) whose currents are MNA
    unknowns; drivers are (node, r, driven) Norton sources fed by the input
    wave when `driven`; injections are (node, cx) capacitors whose far plate
    is the ideal input source.
    """
    node_names: List[str] = field(default_factory=list)
    capacitors: List[Tuple[int, int, float]] = field(default_factory=list)
    branches: List[Tuple[int, int, float, float]] = field(default_factory=list)
    mutuals: List[Tuple[int, int, float]] = field(default_factory=list)
    drivers: List[Tuple[int, float, bool]] = field(default_factory=list)
    injections: List[Tuple[int, float]] = field(default_factory=list)
    outputs: Dict[str, int] = field(default_factory=dict)
    segments: int = 0
    segment_len: float = 0.0

    # ---------- building blocks ----------

    def node(self, name: str) -> int:
        self.node_names.append(name)
        return len(self.node_names) - 1

    def capacitor(self, a: int, b: int, c: float) -> None:
        if c != 0.0:
            self.capacitors.append((a, b, c))

    def branch(self, a: int, b: int, r: float, l: float) -> int:
        self.branches.append((a, b, r, l))
        return len(self.branches) - 1

    def mutual(self, k1: int, k2: int, m: float) -> None:
        if m != 0.0:
            self.mutuals.append((k1, k2, m))

    def driver(self, node: int, r: float, driven: bool = True) -> None:
        if not r > 0:
            raise InputError("driver resistance must be > 0")
        self.drivers.append((node, r, driven))

    def inject(self, node: int, cx: float) -> None:
        if cx != 0.0:
            self.injections.append((node, cx))

    # ---------- summaries ----------

    @property
    def n_nodes(self) -> int:
        return len(self.node_names)

    def totals(self) -> Dict[str, float]:
        ground = sum(c for a, b, c in self.capacitors if b == GROUND)
        coupling = sum(c for a, b, c in self.capacitors if b != GROUND)
        return {
            "r": sum(br[2] for br in self.branches),
            "l": sum(br[3] for br in self.branches),
            "c_ground": ground,
            "c_coupling": coupling,
            "lm": sum(m for _, _, m in self.mutuals),
            "c_inject": sum(c for _, c in self.injections),
        }


def segment_count(length: float, segment_len: float) -> int:
    if not segment_len > 0:
        raise InputError("segment length must be > 0")
    if not length > 0:
        raise InputError("zero segments requested: line length must be > 0")
    return max(1, math.ceil(length / segment_len - 1e-9))


def _chain(
    net: LadderNetlist,
    prefix: str,
    start: int,
    sections: Sequence[Tuple[int, float, float, float, float, float]],
) -> Tuple[List[int], List[int]]:
    """
    Append π segments after node `start`.

    Each section is (n, seg_len, r_pul, l_pul, c_pul, cx_pul): n equal segments
    with half of each segment's shunt capacitance at both of its end nodes.
    """
    nodes = [start]
    branches: List[int] = []
    for n, seg, r_pul, l_pul, c_pul, cx_pul in sections:
        for _ in range(n):
            a = nodes[-1]
            b = net.node(f"{prefix}{len(nodes)}")
            branches.append(net.branch(a, b, r_pul * seg, l_pul * seg))
            half_c = c_pul * seg / 2.0
            net.capacitor(a, GROUND, half_c)
            net.capacitor(b, GROUND, half_c)
            half_x = cx_pul * seg / 2.0
            net.inject(a, half_x)
            net.inject(b, half_x)
            nodes.append(b)
    return nodes, branches


def build_single(
    line: LineParams,
    segment_len: Optional[float] = None,
    *,
    segments: Optional[int] = None,
    driven: bool = True,
) -> LadderNetlist:
    """Uniform line split into equal π segments, driver behind rs_drv, load at the far end."""
    n = segments if segments is not None else segment_count(line.length, segment_len or 0.0)
    if n < 1:
        raise InputError("zero segments requested")
    seg = line.length / n

    net = LadderNetlist(segments=n, segment_len=seg)
    n0 = net.node("n0")
    net.driver(n0, line.rs_drv, driven)
    nodes, _ = _chain(net, "n", n0, [(n, seg, line.r_pul, line.l_pul, line.c_pul, 0.0)])
    net.capacitor(nodes[-1], GROUND, line.cl_load)
    net.outputs["out"] = nodes[-1]
    return net


def build_coupled(
    pair: CoupledRlcPair,
    segment_len: Optional[float] = None,
    *,
    segments: Optional[int] = None,
) -> LadderNetlist:
    """
    Two aligned ladders. Line 1 (aggressor, driven) takes r(1+dr), l(1+dl),
    cg(1+dc); line 2 (victim, driver grounded) takes the (1-Δ) values. Node
    k of both lines is tied by cc*seg (halved at the line ends) and segment k
    of both lines by lm*seg.
    """
    n = segments if segments is not None else segment_count(pair.h, segment_len or 0.0)
    if n < 1:
        raise InputError("zero segments requested")
    seg = pair.h / n

    l1, l2 = pair.l * (1 + pair.dl), pair.l * (1 - pair.dl)
    if abs(pair.lm) >= math.sqrt(l1 * l2) and pair.lm != 0:
        raise InputError(f"non-passive mutual inductance: |lm|={abs(pair.lm):.4g} >= sqrt(l1*l2)")

    net = LadderNetlist(segments=n, segment_len=seg)
    a0 = net.node("a0")
    v0 = net.node("v0")
    net.driver(a0, pair.rs_drv, driven=True)
    net.driver(v0, pair.rs_drv, driven=False)

    agg, agg_br = _chain(net, "a", a0, [(n, seg, pair.r * (1 + pair.dr), l1, pair.cg * (1 + pair.dc), 0.0)])
    vic, vic_br = _chain(net, "v", v0, [(n, seg, pair.r * (1 - pair.dr), l2, pair.cg * (1 - pair.dc), 0.0)])

    for k in range(n):
        half_cc = pair.cc * seg / 2.0
        net.capacitor(agg[k], vic[k], half_cc)
        net.capacitor(agg[k + 1], vic[k + 1], half_cc)
        net.mutual(agg_br[k], vic_br[k], pair.lm * seg)

    net.capacitor(agg[-1], GROUND, pair.cl_load)
    net.capacitor(vic[-1], GROUND, pair.cl_load)
    net.outputs["line1"] = agg[-1]
    net.outputs["line2"] = vic[-1]
    return net


def build_two_pi(m: TwoPiModel) -> LadderNetlist:
    """The 6-element reduced circuit itself, aggressor ramp injected through Cx."""
    net = LadderNetlist(segments=2, segment_len=0.0)
    n1 = net.node("n1")
    n2 = net.node("n2")
    n3 = net.node("n3")
    net.driver(n1, m.rd, driven=False)
    net.capacitor(n1, GROUND, m.c1)
    net.branch(n1, n2, m.rs, 0.0)
    net.capacitor(n2, GROUND, m.c2)
    net.inject(n2, m.cx)
    net.branch(n2, n3, m.re, 0.0)
    net.capacitor(n3, GROUND, m.cl)
    net.outputs["out"] = n3
    return net


def build_victim_ladder(geom: VictimNetGeometry, segment_len: float) -> LadderNetlist:
    """
    Distributed RC victim: driver rd, then the upstream, coupled and
    downstream sections. The aggressor is an ideal ramp source coupled
    through cc_pul along the coupled section only.
    """
    if geom.lc_len <= 0:
        raise InputError("lc_len must be > 0")

    sections = []
    total = 0
    for length, cx in ((geom.ls_len, 0.0), (geom.lc_len, geom.cc_pul), (geom.le_len, 0.0)):
        if length <= 0:
            continue
        n = segment_count(length, segment_len)
        total += n
        sections.append((n, length / n, geom.r_pul, 0.0, geom.c_pul, cx))

    net = LadderNetlist(segments=total, segment_len=segment_len)
    n0 = net.node("n0")
    net.driver(n0, geom.rd, driven=False)
    nodes, _ = _chain(net, "n", n0, sections)
    net.capacitor(nodes[-1], GROUND, geom.cload)
    net.outputs["out"] = nodes[-1]
    return net


# =========================
# Elmore reference
# =========================

def elmore_delay(line: LineParams, segment_len: Optional[float] = None, *, segments: Optional[int] = None) -> float:
    """
    Sum over resistances of R times the capacitance downstream of it, on the
    same π discretization the ladder uses.
    """
    n = segments if segments is not None else segment_count(line.length, segment_len or 0.0)
    seg = line.length / n
    node_c = np.full(n + 1, line.c_pul * seg)
    node_c[0] /= 2.0
    node_c[-1] = line.c_pul * seg / 2.0 + line.cl_load

    downstream = np.cumsum(node_c[::-1])[::-1]
    return float(line.rs_drv * downstream[0] + line.r_pul * seg * downstream[1:].sum())


# =========================
# MNA assembly + integration
# =========================

def _source(wave: InputWave, t: np.ndarray) -> np.ndarray:
    if wave.kind == "step":
        return np.full(t.shape, wave.vdd)
    if wave.kind == "ramp":
        return wave.vdd * np.clip(t / wave.tr, 0.0, 1.0)
    return np.zeros(t.shape)


class MnaSystem:
    """Assembled C, G, b, e of a netlist; unknowns are node voltages then branch currents."""

    def __init__(self, net: LadderNetlist):
        self.net = net
        nn = net.n_nodes
        nb = len(net.branches)
        self.size = nn + nb

        c_rows: List[int] = []
        c_cols: List[int] = []
        c_vals: List[float] = []
        g_rows: List[int] = []
        g_cols: List[int] = []
        g_vals: List[float] = []

        def stamp(rows, cols, vals, a, b, v):
            # two-terminal stamp; b == GROUND drops the off-diagonal part
            rows.append(a); cols.append(a); vals.append(v)
            if b != GROUND:
                rows.extend([b, a, b]); cols.extend([b, b, a]); vals.extend([v, -v, -v])

        for a, b, c in net.capacitors:
            stamp(c_rows, c_cols, c_vals, a, b, c)

        self.e = np.zeros(self.size)
        for a, cx in net.injections:
            stamp(c_rows, c_cols, c_vals, a, GROUND, cx)
            self.e[a] += cx

        self.b = np.zeros(self.size)
        for node, r, driven in net.drivers:
            stamp(g_rows, g_cols, g_vals, node, GROUND, 1.0 / r)
            if driven:
                self.b[node] += 1.0 / r

        for k, (a, b, r, l) in enumerate(net.branches):
            row = nn + k
            # KCL: current leaves a, enters b
            g_rows.extend([a, row]); g_cols.extend([row, a]); g_vals.extend([1.0, -1.0])
            if b != GROUND:
                g_rows.extend([b, row]); g_cols.extend([row, b]); g_vals.extend([-1.0, 1.0])
            g_rows.append(row); g_cols.append(row); g_vals.append(r)
            c_rows.append(row); c_cols.append(row); c_vals.append(l)

        for k1, k2, m in net.mutuals:
            c_rows.extend([nn + k1, nn + k2]); c_cols.extend([nn + k2, nn + k1]); c_vals.extend([m, m])

        shape = (self.size, self.size)
        self.C = sp.coo_matrix((c_vals, (c_rows, c_cols)), shape=shape).tocsr()
        self.G = sp.coo_matrix((g_vals, (g_rows, g_cols)), shape=shape).tocsr()

        self._check_floating()

    def _check_floating(self) -> None:
        nn = self.net.n_nodes
        c_diag = self.C.diagonal()
        g_abs = abs(self.G)
        g_row = np.asarray(g_abs.sum(axis=1)).ravel()
        for i in range(nn):
            if c_diag[i] == 0.0 and g_row[i] == 0.0:
                raise SingularSystemError(self.net.node_names[i])

    def energy(self, x: np.ndarray) -> float:
        """Stored energy 1/2 x^T C x (capacitor charge plus inductor flux)."""
        return 0.5 * float(x @ (self.C @ x))

    def _factor(self, dt: float):
        A = (self.C / dt + self.G / 2.0).tocsc()
        try:
            lu = spla.splu(A)
        except RuntimeError as exc:
            diag = np.abs(A.diagonal())
            idx = int(np.argmin(diag[: self.net.n_nodes])) if self.net.n_nodes else 0
            logger.error(f"❌ factorization failed: {exc}")
            raise SingularSystemError(self.net.node_names[idx]) from exc
        return lu

    def states(self, cfg: SimConfig, x0: Optional[np.ndarray] = None) -> Iterator[Tuple[float, np.ndarray]]:
        """
        Yield (t, x) for every grid point, starting with the initial state.

        Update rule:
            (C/dt + G/2) x1 = (C/dt - G/2) x0 + b (u0 + u1)/2 + e (u1 - u0)/dt
        A step input is taken as already switched at t = 0 for the drivers and
        as a jump from 0 for the capacitive injections.
        """
        dt = cfg.dt
        n_steps = max(1, math.ceil(cfg.t_stop / dt - 1e-9))
        t = dt * np.arange(n_steps + 1)
        u = _source(cfg.input, t)

        lu = self._factor(dt)
        M = (self.C / dt - self.G / 2.0).tocsr()
        logger.debug(f"MNA size={self.size}, steps={n_steps}, dt={dt:.3g}")

        x = np.zeros(self.size) if x0 is None else np.asarray(x0, dtype=float).copy()
        yield 0.0, x

        u_prev_e = 0.0 if cfg.input.kind == "step" else u[0]
        for n in range(n_steps):
            rhs = M @ x + self.b * (0.5 * (u[n] + u[n + 1])) + self.e * ((u[n + 1] - u_prev_e) / dt)
            x = lu.solve(rhs)
            if not np.isfinite(x).all():
                logger.error(f"❌ NaN/inf in state at step {n + 1}")
                raise IntegrationDivergedError(n + 1, float(t[n + 1]))
            u_prev_e = u[n + 1]
            yield float(t[n + 1]), x


def transient(
    net: LadderNetlist,
    cfg: SimConfig,
    *,
    taps: Optional[Dict[str, int]] = None,
) -> Dict[str, Waveform]:
    """
    Integrate the netlist from the all-zero state and return one waveform per
    output node (or per explicit tap).
    """
    system = MnaSystem(net)
    taps = taps or net.outputs
    names = list(taps)
    idx = np.array([taps[n] for n in names], dtype=int)

    n_steps = max(1, math.ceil(cfg.t_stop / cfg.dt - 1e-9))
    record = np.empty((len(names), n_steps + 1))
    for k, (_, x) in enumerate(system.states(cfg)):
        record[:, k] = x[idx]

    logger.debug(f"transient done: {len(names)} node(s), {n_steps} steps")
    return {name: Waveform(t0=0.0, dt=cfg.dt, samples=record[i]) for i, name in enumerate(names)}
