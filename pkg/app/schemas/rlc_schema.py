from typing import Literal

from pydantic import BaseModel, ConfigDict, model_validator

from app.schemas.sim_schema import LineParams


class CoupledRlcPair(BaseModel):
    """
    Two coupled RLC lines. Line 1 (aggressor) carries the (1 + Δ) values,
    line 2 (victim) the (1 - Δ) values.

    Units: Ω/µm, H/µm, F/µm, µm, Ω, F.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    r: float
    dr: float = 0.0
    l: float
    dl: float = 0.0
    lm: float
    cg: float
    dc: float = 0.0
    cc: float
    h: float
    rs_drv: float
    cl_load: float
    vdd: float = 1.0

    @property
    def is_symmetric(self) -> bool:
        return self.dr == 0 and self.dl == 0 and self.dc == 0


class EffectiveParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    cg_eff: float
    cc_eff: float
    l_eff: float
    lm_eff: float


class DecoupledLine(BaseModel):
    """
    Single-mode line: 'common' uses (l'+l'm, c'g), 'differential' uses (l'-l'm, c'g+2c'c).

    `victim_weight` / `aggressor_weight` scale this mode's unit step response
    into the victim / aggressor far ends: ±1/2 and 1/2 for a symmetric pair.
    """
    model_config = ConfigDict(frozen=True)

    mode: Literal["common", "differential"]
    l_mode: float
    c_mode: float
    r: float
    h: float
    rs_drv: float
    cl_load: float
    vdd: float = 1.0
    victim_weight: float
    aggressor_weight: float = 0.5

    @model_validator(mode="before")
    @classmethod
    def _symmetric_weights(cls, data):
        if isinstance(data, dict) and "victim_weight" not in data:
            data = {**data, "victim_weight": 0.5 if data.get("mode") == "common" else -0.5}
        return data

    @property
    def z0(self) -> float:
        return (self.l_mode / self.c_mode) ** 0.5

    @property
    def tf(self) -> float:
        return self.h * (self.l_mode * self.c_mode) ** 0.5

    def as_line(self) -> LineParams:
        return LineParams(
            r_pul=self.r,
            l_pul=self.l_mode,
            c_pul=self.c_mode,
            length=self.h,
            rs_drv=self.rs_drv,
            cl_load=self.cl_load,
        )


class NormalizedVars(BaseModel):
    model_config = ConfigDict(frozen=True)

    z0: float
    tf: float
    rr: float
    rt: float
    ct: float
    kc: float
    kl: float
    zeta: float


class RlcNoiseEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    tf1: float
    tf2: float
    tf_max: float
    # estimate at tf_max; negative when tf1 > tf2
    v_neg: float
    # estimate at 3 * tf_max
    v_pos: float
    v_peak: float
    method: Literal["ladder", "twa"] = "ladder"
