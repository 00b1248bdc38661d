from dataclasses import dataclass, field
from typing import List, Optional

from pydantic import BaseModel, Field

from app.models.fields import GaugeField, LatticeForm


class FlowRecord(BaseModel):
    step: int = Field(..., ge=0)
    energy: float
    residual_norm: float = Field(..., ge=0)
    step_size: float = Field(..., ge=0)

class GaugeKernelDefect(BaseModel):
    defect: float = Field(..., ge=0, description="|Q(A, d_A phi)|")
    allowance: float = Field(..., ge=0)
    residual_norm: float = Field(..., ge=0)
    direction_norm_sq: float = Field(..., ge=0)
    within_allowance: bool

@dataclass(frozen=True, eq=False)
class ELResidual:
    """Euler-Lagrange residual d_A*(rho F) with its non-divergence rewrite"""

    field: LatticeForm
    norm: float
    nondivergence: LatticeForm
    split_defect: float
    acceptance_threshold: float

    @property
    def critical(self) -> bool:
        return self.norm < self.acceptance_threshold

@dataclass(frozen=True, eq=False)
class FlowResult:
    field: GaugeField
    log: List[FlowRecord] = field(default_factory=list)
    converged: bool = False
    target: Optional[float] = None

    @property
    def iterations(self) -> int:
        return max(len(self.log) - 1, 0)
