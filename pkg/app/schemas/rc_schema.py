from typing import Optional

from pydantic import BaseModel, ConfigDict, Field


class TwoPiModel(BaseModel):
    """Reduced victim circuit: Rd - C1 - Rs - (C2, Cx) - Re - CL, aggressor ramp into Cx."""
    model_config = ConfigDict(frozen=True)

    rd: float = Field(gt=0)
    rs: float = Field(ge=0)
    re: float = Field(ge=0)
    c1: float = Field(ge=0)
    c2: float = Field(ge=0)
    cl: float = Field(ge=0)
    cx: float = Field(ge=0)
    tr: float = Field(gt=0)
    vdd: float = 1.0


class RampInput(BaseModel):
    """Saturated ramp: 0 -> vdd over `tr`, then held."""
    model_config = ConfigDict(frozen=True)

    tr: float = Field(gt=0)
    vdd: float = 1.0


class NoiseMetrics(BaseModel):
    model_config = ConfigDict(frozen=True)

    tx: float
    tv: float
    vmax: float
    t_peak: float
    width: float
    # first-order comparison value tx/(tv + tr/2); informational only
    vmax_first_order: Optional[float] = None
    # peak of the exact third-order waveform, when it was evaluated
    vmax_exact: Optional[float] = None
