from pydantic import BaseModel, ConfigDict


class VictimNetGeometry(BaseModel):
    """
    Layout of a victim net with one aggressor coupled over `lc_len`.

    Lengths in µm, per-unit-length values per µm, capacitances in F, time in s.
    Fields are left unconstrained so that `net_model.validate` can report
    every violated invariant at once.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    ls_len: float
    lc_len: float
    le_len: float
    r_pul: float
    c_pul: float
    cc_pul: float
    rd: float
    cload: float
    tr: float
    vdd: float = 1.0

    @property
    def total_len(self) -> float:
        return self.ls_len + self.lc_len + self.le_len


class LumpedVictimParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    rs_up: float
    cs_up: float
    re_down: float
    ce_down: float
    cx: float
