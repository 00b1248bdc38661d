import hashlib
import json
import math
from enum import Enum
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.config import settings
from app.models.inequalities import FuzzConfig
from app.models.instanton import BubblingFamilySpec, ScheduleKind
from app.models.lattice import Domain, DomainKind
from app.models.spectral import FormKind


class InitialField(str, Enum):
    FLAT = "flat"
    BPST = "bpst"

class LatticeConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: DomainKind = DomainKind.BALL
    h: float = Field(0.25, gt=0)
    L: Optional[float] = Field(None, gt=0)
    R: Optional[float] = Field(1.0, gt=0)
    r: Optional[float] = Field(None, gt=0)

    def domain(self) -> Domain:
        if self.kind == DomainKind.TORUS:
            return Domain.torus(self.L, self.h)
        if self.kind == DomainKind.BALL:
            return Domain.ball(self.R, self.h)
        return Domain.annulus(self.r, self.R, self.h)

    @model_validator(mode="after")
    def _buildable(self) -> "LatticeConfig":
        # surfaces shape errors at load time rather than mid-run
        self.domain()
        return self

class PhysicsConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    p: float = Field(2.0, ge=2, lt=3)
    p_grid: List[float] = Field(default_factory=lambda: [2.0])
    eps_grid: List[float] = Field(default_factory=lambda: [0.0])
    initial: InitialField = InitialField.BPST
    scale: float = Field(1.0, gt=0, description="instanton size lambda")
    amplitude: float = Field(0.0, ge=0, description="size of the random perturbation added to the initial field")
    neck_r: float = Field(0.01, gt=0)
    neck_R: float = Field(1.0, gt=0)
    eta: float = Field(0.5, gt=0, lt=1)
    eps0: float = Field(16.0 * math.pi ** 2, gt=0)
    bound_B: float = Field(settings.NECK_BOUND_B, gt=0)
    bochner_c: float = Field(settings.BOCHNER_C, ge=0)
    schedule: ScheduleKind = ScheduleKind.LOG
    k_values: List[int] = Field(default_factory=lambda: list(range(1, 9)))

    @field_validator("p_grid")
    @classmethod
    def _exponents(cls, value: List[float]) -> List[float]:
        if not value or any(not 2.0 <= p < 3.0 for p in value):
            raise ValueError("p_grid must be a nonempty list of exponents in [2, 3)")
        return value

    @field_validator("eps_grid")
    @classmethod
    def _epsilons(cls, value: List[float]) -> List[float]:
        if not value or any(not 0.0 <= eps < 1.0 for eps in value):
            raise ValueError("eps_grid must be a nonempty list of values in [0, 1)")
        return value

    @model_validator(mode="after")
    def _neck(self) -> "PhysicsConfig":
        if not 4.0 * self.neck_r < self.neck_R:
            raise ValueError(f"neck radii need 0 < 4 neck_r < neck_R, got {self.neck_r}, {self.neck_R}")
        return self

class SolverConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    form: FormKind = FormKind.Q_CAL
    normalized: bool = False
    k_eig: int = Field(8, ge=1)
    tol_zero: Optional[float] = Field(None, gt=0)
    tol_kernel: float = Field(settings.TOL_KERNEL, gt=0)
    steps: int = Field(200, ge=0, description="gradient-flow iterations")
    relax_steps: int = Field(0, ge=0, description="flow steps applied to glued fields before the spectrum")
    weights: List[float] = Field(
        default_factory=lambda: [1.0, 0.5, 2.0],
        description="constant masses for Sylvester, checked alongside omega_{eta,k} and a seeded random weight",
    )
    window_factor: float = Field(settings.WINDOW_FACTOR, gt=0, description="index window radius in units of eta")
    points_per_scale: float = Field(settings.POINTS_PER_SCALE, ge=4)
    lattice_budget: int = Field(settings.LATTICE_BUDGET, ge=4)
    shells: int = Field(512, ge=8)

    @field_validator("weights")
    @classmethod
    def _positive(cls, value: List[float]) -> List[float]:
        if any(w <= 0 for w in value):
            raise ValueError("Sylvester weights must be positive")
        return value

class ExperimentConfig(BaseModel):
    """Everything a run reads; unknown keys are rejected"""

    model_config = ConfigDict(extra="forbid")

    schema_version: Literal["1"] = settings.CONFIG_SCHEMA_VERSION
    lattice: LatticeConfig = Field(default_factory=LatticeConfig)
    physics: PhysicsConfig = Field(default_factory=PhysicsConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    fuzz: FuzzConfig = Field(default_factory=FuzzConfig)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    out_dir: str = "out"

    def family(self) -> BubblingFamilySpec:
        return BubblingFamilySpec(
            eta=self.physics.eta,
            schedule=self.physics.schedule,
            k_values=self.physics.k_values,
            eps0=self.physics.eps0,
            bound_B=self.physics.bound_B,
        )

class RunContext(BaseModel):
    command: str
    config_hash: str
    seed: int
    workers: int = Field(1, ge=1)

    def stamp(self) -> dict:
        return {"command": self.command, "config_hash": self.config_hash, "seed": self.seed}

def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical JSON dump; the output directory does not enter"""
    payload = config.model_dump(mode="json", exclude={"out_dir"})
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
