"""Random lattice fields shared by the test modules"""

import numpy as np

from app.models.fields import GaugeField, LatticeForm, Perturbation, ValueKind
from app.models.lattice import Domain


def random_lie_form(rng: np.random.Generator, domain: Domain, degree: int, scale: float = 1.0,
                    dim: int = 3) -> LatticeForm:
    zeros = LatticeForm.zeros(domain, degree, dim)
    return zeros.with_values(scale * rng.standard_normal(zeros.values.shape))


def random_gauge_field(rng: np.random.Generator, domain: Domain, scale: float = 0.3) -> GaugeField:
    return GaugeField.from_values(domain, scale * rng.standard_normal((4,) + domain.shape + (3,)))


def random_perturbation(rng: np.random.Generator, domain: Domain, scale: float = 1.0) -> Perturbation:
    a = Perturbation.from_values(domain, scale * rng.standard_normal((4,) + domain.shape + (3,)))
    return a.restricted()


def random_real_form(rng: np.random.Generator, domain: Domain, degree: int) -> LatticeForm:
    zeros = LatticeForm.zeros(domain, degree, kind=ValueKind.REAL)
    return zeros.with_values(rng.standard_normal(zeros.values.shape))
