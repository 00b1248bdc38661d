from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy import sparse

from app.models.lattice import Domain


class FormKind(str, Enum):
    Q = "Q"
    Q_FRAK = "Q_frak"
    Q_CAL = "Q_cal"
    NECK = "neck"

class SolverInfo(BaseModel):
    method: str  # "dense" or "shift-invert"
    dofs: int = Field(..., ge=0)
    requested: int = Field(..., ge=1)
    shift: Optional[float] = None
    max_residual: float = Field(0.0, ge=0)

class ToleranceSweepEntry(BaseModel):
    tol_zero: float = Field(..., ge=0)
    index: int = Field(..., ge=0)
    nullity: int = Field(..., ge=0)

class SpectralReport(BaseModel):
    eigenvalues: List[float]
    index: int = Field(..., ge=0)
    nullity: int = Field(..., ge=0)
    extended_index: int = Field(..., ge=0)
    tol_zero: float = Field(..., ge=0)
    tol_sweep: Dict[str, ToleranceSweepEntry] = Field(default_factory=dict)
    truncated: bool = False
    solver: Optional[SolverInfo] = None

    @model_validator(mode="after")
    def _check_counts(self) -> "SpectralReport":
        if self.extended_index != self.index + self.nullity:
            raise ValueError("extended_index must equal index + nullity")
        return self

    @property
    def lambda_min(self) -> float:
        return self.eigenvalues[0]

class ExtendedIndexReport(BaseModel):
    index: int = Field(..., ge=0)
    nullity: int = Field(..., ge=0)
    gauge_fixed_kernel: int = Field(..., ge=0, description="dim ker Q restricted to ker d_A*")
    extended_index: int = Field(..., ge=0)
    tol_zero: float
    tol_kernel: float
    singular_values: List[float] = Field(default_factory=list)

class SylvesterReport(BaseModel):
    index: int = Field(..., ge=0)
    nullity: int = Field(..., ge=0)
    weights: List[str]
    eigenvalues: List[List[float]]

class LowerBoundReport(BaseModel):
    lambda_min: float
    mu0_fit: float = Field(..., ge=0, description="sup rho |F| / omega")
    floor: float = Field(..., description="-bracket_bound * sqrt(2) * mu0_fit")
    passed: bool
    eta: float
    delta: float

@dataclass(frozen=True, eq=False)
class StabilityProblem:
    """Generalized eigenproblem stiffness a = lambda mass a on the selected dofs.

    ``dofs`` indexes the flattened (4, N, N, N, N, dim) layout of a 1-form; it is
    None for problems built directly from matrices.
    """

    stiffness: sparse.csr_matrix
    mass: sparse.csr_matrix
    form: Optional[FormKind] = None
    domain: Optional[Domain] = None
    dofs: Optional[np.ndarray] = None
    dim: Optional[int] = None
    label: str = ""

    @property
    def size(self) -> int:
        return self.stiffness.shape[0]

    def embed(self, vector: np.ndarray) -> np.ndarray:
        """Scatter a dof vector back into the full 1-form layout"""
        n = self.domain.sites_per_axis
        full = np.zeros(4 * n ** 4 * self.dim)
        full[self.dofs] = vector
        return full.reshape((4,) + self.domain.shape + (self.dim,))
