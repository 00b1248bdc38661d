"""Containers for exterior forms, pointwise and on a lattice.

Values are stored component-major: ``values[I]`` is the coefficient of the
I-th increasing multi-index (lexicographic order), followed by any batch or
lattice axes, followed by the Lie-algebra axis for g-valued forms (or a
trailing ``(n, n)`` matrix block for matrix-valued forms).
"""

from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from math import comb

import numpy as np

from app.core.exceptions import DegreeError, DomainMismatchError
from app.models.lattice import Domain


class ValueKind(str, Enum):
    LIE = "lie"
    REAL = "real"
    MATRIX = "matrix"


@dataclass(frozen=True, eq=False)
class FormValue:
    degree: int
    values: np.ndarray
    kind: ValueKind = ValueKind.LIE

    def __post_init__(self):
        if not 0 <= self.degree <= 4:
            raise DegreeError(f"degree {self.degree} outside 0..4")
        if self.values.shape[0] != comb(4, self.degree):
            raise DegreeError(
                f"a {self.degree}-form has {comb(4, self.degree)} components, got {self.values.shape[0]}"
            )

    @property
    def batch_shape(self):
        trailing = {ValueKind.LIE: 1, ValueKind.REAL: 0, ValueKind.MATRIX: 2}[self.kind]
        return self.values.shape[1:self.values.ndim - trailing]

    def with_values(self, values: np.ndarray):
        return replace(self, values=values)

    def __add__(self, other):
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        return self.with_values(self.values - other.values)

    def __mul__(self, scalar: float):
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)


@dataclass(frozen=True, eq=False)
class LatticeForm(FormValue):
    domain: Domain = None

    def __post_init__(self):
        super().__post_init__()
        if self.domain is None:
            raise DomainMismatchError("lattice forms need a domain")
        if tuple(self.batch_shape) != self.domain.shape:
            raise DomainMismatchError(
                f"values carry lattice shape {tuple(self.batch_shape)}, domain has {self.domain.shape}"
            )

    def __add__(self, other):
        require_same_domain(self, other)
        return super().__add__(other)

    def __sub__(self, other):
        require_same_domain(self, other)
        return super().__sub__(other)

    @classmethod
    def zeros(cls, domain: Domain, degree: int, dim: int = 3, kind: ValueKind = ValueKind.LIE):
        shape = (comb(4, degree),) + domain.shape
        if kind == ValueKind.LIE:
            shape += (dim,)
        return LatticeForm(degree=degree, values=np.zeros(shape), kind=kind, domain=domain)


@dataclass(frozen=True, eq=False)
class GaugeField(LatticeForm):
    """The connection A, a g-valued 1-form (units 1/length)"""

    def __post_init__(self):
        super().__post_init__()
        if self.degree != 1:
            raise DegreeError("a gauge field is a 1-form")

    @classmethod
    def from_values(cls, domain: Domain, values: np.ndarray) -> "GaugeField":
        return cls(degree=1, values=np.asarray(values, dtype=float), kind=ValueKind.LIE, domain=domain)

    @classmethod
    def flat(cls, domain: Domain, dim: int = 3) -> "GaugeField":
        return cls.from_values(domain, np.zeros((4,) + domain.shape + (dim,)))

    @property
    def dim(self) -> int:
        return self.values.shape[-1]


@dataclass(frozen=True, eq=False)
class Perturbation(LatticeForm):
    """A test direction a, zero outside the domain support when used in a variation"""

    def __post_init__(self):
        super().__post_init__()
        if self.degree != 1:
            raise DegreeError("a perturbation is a 1-form")

    @classmethod
    def from_values(cls, domain: Domain, values: np.ndarray) -> "Perturbation":
        return cls(degree=1, values=np.asarray(values, dtype=float), kind=ValueKind.LIE, domain=domain)

    def restricted(self) -> "Perturbation":
        mask = self.domain.geometry.support[None, ..., None]
        return self.with_values(np.where(mask, self.values, 0.0))


@dataclass(frozen=True, eq=False)
class CurvatureField(LatticeForm):
    def __post_init__(self):
        super().__post_init__()
        if self.degree != 2:
            raise DegreeError("curvature is a 2-form")

    @cached_property
    def norm_sq(self) -> np.ndarray:
        return np.sum(self.values ** 2, axis=(0, -1))

    @cached_property
    def norm(self) -> np.ndarray:
        return np.sqrt(self.norm_sq)


@dataclass(frozen=True, eq=False)
class GaugeTransform:
    """Group element per site, shape (N, N, N, N, n, n)"""

    domain: Domain
    values: np.ndarray


@dataclass(frozen=True, eq=False)
class WeightField:
    """Positive weight per site (units 1/length^2)"""

    domain: Domain
    values: np.ndarray

    @classmethod
    def constant(cls, domain: Domain, value: float = 1.0) -> "WeightField":
        return cls(domain=domain, values=np.full(domain.shape, float(value)))


def require_same_domain(*forms) -> Domain:
    domains = [f.domain for f in forms]
    first = domains[0]
    for other in domains[1:]:
        if other != first:
            raise DomainMismatchError(f"domain mismatch: {first!r} vs {other!r}")
    return first
