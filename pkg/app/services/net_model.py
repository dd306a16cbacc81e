# app/services/net_model.py
"""
Victim net description -> lumped upstream/downstream parameters.

The coupling node (node 2 of the reduced circuit) sits at the middle of the
coupled portion, ls_len + lc_len/2 from the driver. Everything upstream of it
becomes (R_s, C_s), everything downstream (R_e, C_e), and the whole coupling
capacitance is lumped into C_x.
"""
from __future__ import annotations

import math
from typing import List

from app.core.errors import InputError, NoCouplingError
from app.schemas.net_schema import LumpedVictimParams, VictimNetGeometry


def validate(geom: VictimNetGeometry) -> List[str]:
    """
    Return one message per violated invariant; empty list when the geometry is usable.
    """
    problems: List[str] = []

    for name in ("ls_len", "lc_len", "le_len", "r_pul", "c_pul", "cc_pul", "rd", "cload", "tr", "vdd"):
        if not math.isfinite(getattr(geom, name)):
            problems.append(f"{name} must be finite")
    if problems:
        return problems

    if geom.ls_len < 0:
        problems.append("ls_len must be >= 0")
    if geom.lc_len <= 0:
        problems.append("lc_len must be > 0")
    if geom.le_len < 0:
        problems.append("le_len must be >= 0")
    if geom.r_pul < 0:
        problems.append("r_pul must be >= 0")
    if geom.c_pul < 0:
        problems.append("c_pul must be >= 0")
    if geom.cc_pul < 0:
        problems.append("cc_pul must be >= 0")
    if geom.rd <= 0:
        problems.append("rd must be > 0")
    if geom.cload < 0:
        problems.append("cload must be >= 0")
    if geom.tr <= 0:
        problems.append("tr must be > 0")

    return problems


def coupling_node_position(geom: VictimNetGeometry) -> float:
    return geom.ls_len + geom.lc_len / 2.0


def derive_lumped(geom: VictimNetGeometry) -> LumpedVictimParams:
    """
    Lump the victim wire around the coupling node.

    Downstream values are taken as total minus upstream, so the
    upstream + downstream sums reproduce the totals of the whole wire.
    """
    if geom.lc_len == 0:
        raise NoCouplingError()

    problems = validate(geom)
    if problems:
        raise InputError("; ".join(problems))

    x2 = coupling_node_position(geom)
    total = geom.total_len

    r_total = geom.r_pul * total
    c_total = geom.c_pul * total

    rs_up = geom.r_pul * x2
    cs_up = geom.c_pul * x2

    return LumpedVictimParams(
        rs_up=rs_up,
        cs_up=cs_up,
        re_down=r_total - rs_up,
        ce_down=c_total - cs_up,
        cx=geom.cc_pul * geom.lc_len,
    )
