import math
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.config import settings
from app.models.spectral import SpectralReport


class ScheduleKind(str, Enum):
    LOG = "log"          # p_k = 2 + 1/log(1/delta_k), product identically 1
    SQRTLOG = "sqrtlog"  # p_k = 2 + 1/sqrt(log(1/delta_k)), product unbounded

class BubbleSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    center: List[float] = Field(default_factory=lambda: [0.0, 0.0, 0.0, 0.0])
    scale: float = Field(..., gt=0)
    orientation: List[float] = Field(
        default_factory=lambda: [0.0, 0.0, 0.0], description="su(2) element whose exponential orients the bubble"
    )

    @field_validator("center")
    @classmethod
    def _four_coordinates(cls, value: List[float]) -> List[float]:
        if len(value) != 4:
            raise ValueError("a bubble center has four coordinates")
        return value

    @field_validator("orientation")
    @classmethod
    def _su2_element(cls, value: List[float]) -> List[float]:
        if len(value) != 3:
            raise ValueError("an su(2) orientation has three coefficients")
        return value

class BubblingFamilySpec(BaseModel):
    """Flat background with bubbles of scale delta_k = 2^-k eta^2 at fixed centers"""

    model_config = ConfigDict(extra="forbid")

    eta: float = Field(0.5, gt=0, lt=1)
    centers: List[List[float]] = Field(default_factory=lambda: [[0.0, 0.0, 0.0, 0.0]])
    orientations: Optional[List[List[float]]] = None
    schedule: ScheduleKind = ScheduleKind.LOG
    k_values: List[int] = Field(default_factory=lambda: list(range(1, 9)))
    eps0: float = Field(16.0 * math.pi ** 2, gt=0)
    bound_B: float = Field(settings.NECK_BOUND_B, gt=0)

    @model_validator(mode="after")
    def _check(self) -> "BubblingFamilySpec":
        if any(k < 1 for k in self.k_values):
            raise ValueError("k indices start at 1")
        if self.orientations is not None and len(self.orientations) != len(self.centers):
            raise ValueError("one orientation per center")
        for i, a in enumerate(self.centers):
            if len(a) != 4:
                raise ValueError("centers have four coordinates")
            for b in self.centers[i + 1:]:
                if math.dist(a, b) < 4.0 * self.eta:
                    raise ValueError("bubble centers must be at least 4 eta apart")
        return self

    def delta(self, k: int) -> float:
        return 2.0 ** (-k) * self.eta ** 2

    def p(self, k: int) -> float:
        log_inverse = math.log(1.0 / self.delta(k))
        if self.schedule == ScheduleKind.LOG:
            return 2.0 + 1.0 / log_inverse
        return 2.0 + 1.0 / math.sqrt(log_inverse)

    def bubbles(self, k: int) -> List[BubbleSpec]:
        orientations = self.orientations or [[0.0, 0.0, 0.0]] * len(self.centers)
        return [
            BubbleSpec(center=center, scale=self.delta(k), orientation=orientation)
            for center, orientation in zip(self.centers, orientations)
        ]

class EnergyIdentityRow(BaseModel):
    k: int
    delta: float
    total: float
    background: float
    bubbles: List[float]
    defect: float
    method: str = "radial"  # "radial" profiles or "lattice" fields

class ScheduleRow(BaseModel):
    k: int
    p: float
    delta: float
    detected: float
    product: float = Field(..., description="(p_k - 2) log(1/detected scale)")
    product_prescribed: float
    holder_margin: float
    holder_ok: bool

class PScheduleReport(BaseModel):
    bound: float
    admissible: bool
    rows: List[ScheduleRow]

class IndexRow(BaseModel):
    k: int
    p: float
    delta: float
    resolved: bool
    sites_per_axis: int
    window_radius: float
    neck_sites: int = Field(0, ge=0, description="support sites with delta/eta <= |x| <= eta")
    dofs: int = 0
    index: Optional[int] = None
    nullity: Optional[int] = None
    extended_index: Optional[int] = None
    nullity_fixed: Optional[int] = None
    tol_zero: Optional[float] = None
    lambda_min: Optional[float] = None
    lower_holds: Optional[bool] = None
    upper_holds: Optional[bool] = None
    upper_holds_fixed: Optional[bool] = None
    error: Optional[str] = None

class IndexExperimentReport(BaseModel):
    eta: float
    background: SpectralReport
    bubble: SpectralReport
    bubble_window: float = Field(..., gt=0, description="radius of the rescaled bubble window")
    fixed_tol_zero: Optional[float] = None
    relax_steps: int = 0
    rows: List[IndexRow]
