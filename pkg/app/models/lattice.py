from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Optional, Tuple
import math

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator


class DomainKind(str, Enum):
    TORUS = "torus"
    BALL = "ball"
    ANNULUS = "annulus"

class Domain(BaseModel):
    """A flat 4-dimensional lattice domain.

    The torus is periodic with sites at i*h. Balls and annuli live in a box of
    even side centered at the origin, with a zero ghost layer outside the box.
    The box is at least one and a half spacings wider than R on each side.
    """

    model_config = ConfigDict(frozen=True)

    kind: DomainKind
    h: float = Field(..., gt=0)
    L: Optional[float] = Field(None, gt=0, description="torus side length")
    R: Optional[float] = Field(None, gt=0, description="outer radius")
    r: Optional[float] = Field(None, gt=0, description="inner radius of an annulus")

    @model_validator(mode="after")
    def _check_shape(self) -> "Domain":
        if self.kind == DomainKind.TORUS:
            if self.L is None:
                raise ValueError("torus domains need L")
            n = self.L / self.h
            if abs(n - round(n)) > 1e-9 * max(n, 1.0):
                raise ValueError(f"L={self.L} is not a multiple of h={self.h}")
            if round(n) < 4:
                raise ValueError("a torus needs at least 4 sites per axis")
        else:
            if self.R is None:
                raise ValueError(f"{self.kind.value} domains need R")
            if self.kind == DomainKind.ANNULUS:
                if self.r is None or not self.r < self.R:
                    raise ValueError("annulus domains need 0 < r < R")
        return self

    @classmethod
    def torus(cls, L: float, h: float) -> "Domain":
        return cls(kind=DomainKind.TORUS, L=L, h=h)

    @classmethod
    def ball(cls, R: float, h: float) -> "Domain":
        return cls(kind=DomainKind.BALL, R=R, h=h)

    @classmethod
    def annulus(cls, r: float, R: float, h: float) -> "Domain":
        return cls(kind=DomainKind.ANNULUS, r=r, R=R, h=h)

    @property
    def periodic(self) -> bool:
        return self.kind == DomainKind.TORUS

    @property
    def sites_per_axis(self) -> int:
        if self.periodic:
            return int(round(self.L / self.h))
        m = math.ceil(self.R / self.h - 1e-9)
        return 2 * m + 4

    @property
    def shape(self) -> Tuple[int, int, int, int]:
        n = self.sites_per_axis
        return (n, n, n, n)

    @property
    def n_sites(self) -> int:
        return self.sites_per_axis ** 4

    @property
    def cell_volume(self) -> float:
        return self.h ** 4

    @property
    def geometry(self) -> "LatticeGeometry":
        return _geometry(self)

    def descriptor(self) -> dict:
        return self.model_dump(mode="json")


@dataclass(frozen=True, eq=False)
class LatticeGeometry:
    """Site coordinates and masks of a domain (read-only arrays)"""

    coords: np.ndarray   # (4, N, N, N, N)
    radius: np.ndarray   # (N, N, N, N), distance to the origin
    region: np.ndarray   # sites entering integrals
    support: np.ndarray  # region sites whose axis neighbours are all in the region


def erode(mask: np.ndarray, periodic: bool) -> np.ndarray:
    out = mask.copy()
    for axis in range(4):
        for step in (1, -1):
            if periodic:
                out &= np.roll(mask, step, axis=axis)
            else:
                shifted = np.zeros_like(mask)
                if step == 1:
                    shifted[(slice(None),) * axis + (slice(1, None),)] = mask[(slice(None),) * axis + (slice(None, -1),)]
                else:
                    shifted[(slice(None),) * axis + (slice(None, -1),)] = mask[(slice(None),) * axis + (slice(1, None),)]
                out &= shifted
    return out


@lru_cache(maxsize=32)
def _geometry(domain: Domain) -> LatticeGeometry:
    n = domain.sites_per_axis
    if domain.periodic:
        axis = np.arange(n) * domain.h
    else:
        axis = (np.arange(n) - (n - 1) / 2.0) * domain.h
    coords = np.stack(np.meshgrid(axis, axis, axis, axis, indexing="ij"))
    radius = np.sqrt(np.sum(coords ** 2, axis=0))

    if domain.kind == DomainKind.TORUS:
        region = np.ones(domain.shape, dtype=bool)
    elif domain.kind == DomainKind.BALL:
        region = radius <= domain.R * (1 + 1e-12)
    else:
        region = (radius >= domain.r * (1 - 1e-12)) & (radius <= domain.R * (1 + 1e-12))
    support = erode(region, domain.periodic)

    for arr in (coords, radius, region, support):
        arr.setflags(write=False)
    return LatticeGeometry(coords=coords, radius=radius, region=region, support=support)
