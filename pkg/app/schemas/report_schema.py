from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

# Corpus ranges (SI units except lengths in µm)
RC_RANGES: Dict[str, Tuple[float, float]] = {
    "r_pul": (0.02, 0.4),
    "c_pul": (0.05e-15, 0.4e-15),
    "cc_pul": (0.02e-15, 0.5e-15),
    "rd": (20.0, 500.0),
    "cload": (1e-15, 50e-15),
    "tr": (10e-12, 500e-12),
    "ls_len": (50.0, 2000.0),
    "lc_len": (50.0, 2000.0),
    "le_len": (50.0, 2000.0),
}

RLC_RANGES: Dict[str, Tuple[float, float]] = {
    "kl": (0.1, 0.8),
    "kc": (0.1, 0.8),
    "ct": (0.01, 0.1),
    "rt": (0.1, 1.0),
    "zeta": (0.3, 1.5),
    "dc": (-0.3, 0.3),
    "dl": (-0.3, 0.3),
    "l": (0.3e-12, 0.8e-12),
    "cg": (0.05e-15, 0.15e-15),
    "h": (500.0, 2000.0),
}


class Corpus(BaseModel):
    """
    Reproducible set of random cases. `ranges` overrides the defaults of the
    kind key by key; for RLC, `symmetric=True` pins dc and dl to zero.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["rc", "rlc"]
    seed: int = 7
    count: int = Field(default=100, ge=1)
    symmetric: bool = False
    ranges: Dict[str, Tuple[float, float]] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _known_ranges(self):
        defaults = RC_RANGES if self.kind == "rc" else RLC_RANGES
        for key, (lo, hi) in self.ranges.items():
            if key not in defaults:
                raise ValueError(f"unknown range '{key}' for kind {self.kind}")
            if lo > hi:
                raise ValueError(f"range '{key}': min > max")
        return self

    def resolved_ranges(self) -> Dict[str, Tuple[float, float]]:
        defaults = RC_RANGES if self.kind == "rc" else RLC_RANGES
        merged = {**defaults, **self.ranges}
        if self.kind == "rlc" and self.symmetric:
            merged["dc"] = (0.0, 0.0)
            merged["dl"] = (0.0, 0.0)
        return merged


class CaseResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    case_id: int
    model: Optional[float] = None
    oracle: Optional[float] = None
    rel_err: Optional[float] = None
    # "below-floor", "failed: ..." or None for a counted case
    status: Optional[str] = None

    @property
    def counted(self) -> bool:
        return self.status is None and self.rel_err is not None


class ErrorStats(BaseModel):
    model_config = ConfigDict(frozen=True)

    metric: Literal["peak", "width"] = "peak"
    cases: List[CaseResult] = Field(default_factory=list)
    mean_abs_err: Optional[float] = None
    max_abs_err: Optional[float] = None
    n_cases: int = 0
    n_excluded: int = 0
    n_failed: int = 0
    worst_case_id: Optional[int] = None


class SweepRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    param: str
    value: float
    model_peak: Optional[float] = None
    oracle_peak: Optional[float] = None
    rel_err: Optional[float] = None
    rejected: Optional[str] = None


class SweepTable(BaseModel):
    model_config = ConfigDict(frozen=True)

    param: str
    rows: List[SweepRow] = Field(default_factory=list)

    def accepted(self) -> List[SweepRow]:
        return [r for r in self.rows if r.rejected is None]


class CorpusRequest(BaseModel):
    """Body of POST /validate."""
    model_config = ConfigDict(extra="forbid")

    kind: Literal["rc", "rlc"] = "rc"
    seed: int = 7
    count: int = Field(default=20, ge=1, le=1000)
    symmetric: bool = False
