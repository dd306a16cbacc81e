from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class InputWave(BaseModel):
    """
    Source waveform: `step` (vdd for t >= 0), `ramp` (0 -> vdd over tr) or
    `ground` (held at 0).
    """
    model_config = ConfigDict(frozen=True)

    kind: Literal["step", "ramp", "ground"] = "step"
    tr: Optional[float] = Field(default=None, gt=0)
    vdd: float = 1.0

    @model_validator(mode="after")
    def _ramp_needs_tr(self):
        if self.kind == "ramp" and self.tr is None:
            raise ValueError("ramp input requires tr")
        return self


class SimConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    dt: float = Field(gt=0)
    t_stop: float = Field(gt=0)
    input: InputWave = InputWave()

    @model_validator(mode="after")
    def _at_least_one_step(self):
        if self.t_stop < self.dt:
            raise ValueError("t_stop must be >= dt")
        return self

    @classmethod
    def for_scales(
        cls,
        *,
        tf: Optional[float] = None,
        tv: Optional[float] = None,
        tr: Optional[float] = None,
        input: Optional[InputWave] = None,
        max_steps: Optional[int] = None,
    ) -> "SimConfig":
        """
        Default step/stop rule tied to the physics in play:
          dt     = min(tf/200, tr/100, tv/100) over the given scales
          t_stop = 6 * max(tf, tv), plus tr when a ramp is involved
        `max_steps` coarsens dt when a tiny scale sits next to a long one.
        """
        steps = []
        if tf:
            steps.append(tf / 200.0)
        if tr:
            steps.append(tr / 100.0)
        if tv:
            steps.append(tv / 100.0)
        if not steps:
            raise ValueError("at least one time scale is required")

        dt = min(steps)
        t_stop = 6.0 * max(tf or 0.0, tv or 0.0) + (tr or 0.0)
        t_stop = max(t_stop, 10 * dt)
        if max_steps and t_stop / dt > max_steps:
            dt = t_stop / max_steps
        return cls(dt=dt, t_stop=t_stop, input=input or InputWave())


class LineParams(BaseModel):
    """One uniform line: per-µm r (Ω), l (H), c (F) over `length` µm, driver and load."""
    model_config = ConfigDict(frozen=True)

    r_pul: float = Field(ge=0)
    l_pul: float = Field(default=0.0, ge=0)
    c_pul: float = Field(ge=0)
    length: float = Field(gt=0)
    rs_drv: float = Field(gt=0)
    cl_load: float = Field(default=0.0, ge=0)
