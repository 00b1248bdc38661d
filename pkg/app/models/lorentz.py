from dataclasses import dataclass
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field

from app.core.exceptions import ParameterRangeError


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """Scalar samples with positive cell measures (h^4 for lattice sites, shell volumes for radial data)"""

    values: np.ndarray
    measures: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float).reshape(-1)
        measures = np.broadcast_to(np.asarray(self.measures, dtype=float), values.shape).copy()
        if not np.all(np.isfinite(values)):
            raise ParameterRangeError("sampled values must be finite")
        if np.any(measures <= 0.0):
            raise ParameterRangeError("cell measures must be positive")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "measures", measures)

    @property
    def total_measure(self) -> float:
        return float(self.measures.sum())


@dataclass(frozen=True, eq=False)
class Rearrangement:
    """Decreasing step function: f*(t) = values[i] on (cumulative[i-1], cumulative[i]]"""

    values: np.ndarray
    cumulative: np.ndarray

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.cumulative, prepend=0.0)


class DualityReport(BaseModel):
    pairing: float = Field(..., ge=0, description="|int f g|")
    bound: float = Field(..., ge=0, description="||f||_{2,1} ||g||_{2,inf}")
    constant: float = Field(..., ge=0)


class QuantizationReport(BaseModel):
    r: float
    R: float
    dyadic_sup: float = Field(..., ge=0)
    l2: float = Field(..., ge=0)
    weak_l2: float = Field(..., ge=0)
    l21: float = Field(..., ge=0)
    ratio_l2: float = Field(..., ge=0)
    ratio_weak_l2: float = Field(..., ge=0)
    ratio_l21: float = Field(..., ge=0)
    gate_satisfied: bool
    gate: float
    sweep_label: Optional[str] = None
