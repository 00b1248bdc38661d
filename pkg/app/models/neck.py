from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, Field


class NeckConstants(BaseModel):
    """The constant stack of the neck barrier argument at (p, eps, C)"""

    p: float = Field(..., ge=2, lt=3)
    eps: float = Field(..., ge=0, lt=1)
    bochner_c: float = Field(..., ge=0)
    mu: float
    gamma: float
    kappa_gamma: float
    delta_minus: float
    delta_plus: float
    sigma_minus: float
    sigma_plus: float
    eps_p: float
    root_minus: float = Field(..., description="smaller root from the polynomial solver")
    root_plus: float

class ConstantRow(BaseModel):
    p: float
    eps: float
    r: float
    R: float
    name: str
    value: float

class SupersolutionReport(BaseModel):
    p: float
    eps: float
    sigma: float
    lower: float = Field(..., description="worst case over admissible A, times rho^{sigma+2}")
    upper: float
    nonnegative: bool
    fd_defect: float = Field(..., ge=0, description="max relative gap of the finite-difference operator")
    field_samples: int = 0
    field_within_bounds: bool = True

class PointwiseBoundReport(BaseModel):
    fitted_constant: float = Field(..., ge=0)
    energy: float = Field(..., ge=0, description="||F|| on B_2R minus B_r/2")
    sites: int = Field(..., ge=0)
    r: float
    R: float
    p: float
    neck_factor: float = 1.0

class DyadicProfile(BaseModel):
    radii: List[float]
    energies: List[float]
    sup: float = Field(..., ge=0)

class NeckProfile(BaseModel):
    r: float
    R: float
    p: float
    radii: List[float]
    omega_p: List[float]
    omega_2: List[float]
    dyadic: DyadicProfile

class NeckPositivityReport(BaseModel):
    lhs: float
    rhs: float = Field(..., ge=0)
    ratio: float
    dyadic_sup: float = Field(..., ge=0)
    gate_satisfied: bool
    neck_length: float = Field(..., description="(p-2) ln(R/r)")

class NeckSpectrumReport(BaseModel):
    c0: float = Field(..., description="lowest generalized eigenvalue against omega_{R,r}")
    dofs: int
    r: float
    R: float
    p: float

class GaffneyHardyReport(BaseModel):
    lhs: float = Field(..., ge=0, description="int |a|^2 omega_{R,r}")
    rhs: float = Field(..., ge=0, description="||da||^2 + ||d*a||^2")
    fitted_constant: float = Field(..., ge=0)

@dataclass(frozen=True, eq=False)
class RadialSamples:
    """Scalar samples with their distance to the center and their cell measures"""

    radius: np.ndarray
    value: np.ndarray
    measure: np.ndarray
    spacing: Optional[float] = None

    def within(self, lo: float, hi: float, closed_upper: bool = True) -> np.ndarray:
        upper = self.radius <= hi if closed_upper else self.radius < hi
        return (self.radius >= lo) & upper
