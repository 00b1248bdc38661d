from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.config import settings


class FuzzConfig(BaseModel):
    """Sampling policy for the inequality battery"""

    model_config = ConfigDict(extra="forbid")

    samples: int = Field(settings.FUZZ_SAMPLES, ge=1, description="random samples per pointwise inequality")
    lattice_samples: int = Field(settings.FUZZ_LATTICE_SAMPLES, ge=1, description="random lattice fields per check")
    magnitude_min: float = Field(settings.FUZZ_MAGNITUDE_MIN, gt=0)
    magnitude_max: float = Field(settings.FUZZ_MAGNITUDE_MAX, gt=0)
    seed: int = Field(0, ge=0)
    p_grid: List[float] = Field(default_factory=lambda: list(settings.FUZZ_P_GRID))
    checks: Optional[List[str]] = Field(None, description="subset of the battery, all checks when unset")

    @field_validator("p_grid")
    @classmethod
    def _admissible(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("the p-grid needs at least one exponent")
        for p in value:
            if not 2.0 <= p < 3.0:
                raise ValueError(f"p={p} must lie in [2, 3)")
        return sorted(value)

    @model_validator(mode="after")
    def _ordered_range(self) -> "FuzzConfig":
        if self.magnitude_min >= self.magnitude_max:
            raise ValueError("magnitude_min must be below magnitude_max")
        return self

class CheckResult(BaseModel):
    name: str
    samples: int = Field(..., ge=0)
    worst_margin: float = Field(..., description="smallest relative slack (rhs - lhs) / scale over all samples")
    witness: Dict[str, Any] = Field(default_factory=dict, description="inputs attaining the worst margin")
    passed: bool
    detail: Dict[str, Any] = Field(default_factory=dict)

class Scorecard(BaseModel):
    checks: List[CheckResult]
    config_hash: str
    seed: int
    passed: bool

    @property
    def failures(self) -> List[str]:
        return [check.name for check in self.checks if not check.passed]
