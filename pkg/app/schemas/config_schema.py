from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.config import settings
from app.schemas.net_schema import VictimNetGeometry
from app.schemas.rc_schema import TwoPiModel
from app.schemas.rlc_schema import CoupledRlcPair


class SimOverrides(BaseModel):
    """Simulator knobs; dt / t_stop in seconds, left empty to use the physics-based defaults."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    dt: Optional[float] = Field(default=None, gt=0)
    t_stop: Optional[float] = Field(default=None, gt=0)
    segment_um: float = Field(default_factory=lambda: settings.segment_um, gt=0)


class OutputControls(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    samples: int = Field(default=501, ge=2)
    out: Optional[str] = None


class AnalysisConfig(BaseModel):
    """
    Fully resolved analysis input (SI units, lengths in µm). Mode "rc" carries
    either a net `geometry` or an explicit `two_pi` circuit; mode "rlc" a `pair`.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    mode: Literal["rc", "rlc"]
    geometry: Optional[VictimNetGeometry] = None
    two_pi: Optional[TwoPiModel] = None
    pair: Optional[CoupledRlcPair] = None
    method: Literal["ladder", "twa"] = "ladder"
    ccprime_variant: Literal["modal", "consistent", "printed"] = Field(default_factory=lambda: settings.ccprime_variant)
    sim: SimOverrides = Field(default_factory=SimOverrides)
    output: OutputControls = Field(default_factory=OutputControls)

    @model_validator(mode="after")
    def _one_model(self):
        if self.mode == "rc" and ((self.geometry is None) == (self.two_pi is None) or self.pair is not None):
            raise ValueError("rc mode takes either geometry or 2-π parameters")
        if self.mode == "rlc" and (self.pair is None or self.geometry is not None or self.two_pi is not None):
            raise ValueError("rlc mode takes coupled-pair parameters only")
        return self

    def resolved(self) -> dict:
        return self.model_dump(mode="json")
