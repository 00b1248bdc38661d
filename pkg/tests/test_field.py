import math

import numpy as np
import pytest

from app.core.exceptions import DegreeError, DomainMismatchError, NonUnitaryError
from app.models.fields import GaugeField, GaugeTransform, LatticeForm, ValueKind
from app.models.lattice import Domain, erode
from app.services.algebra import su
from app.services.field import (
    bianchi_residual,
    box_inner,
    constant_gauge,
    covariant_d,
    covariant_d_star,
    curvature,
    d,
    d_star,
    gauge_transform,
    integrate,
    operator_matrix,
    scalar_hessian,
)
from app.services.instanton import bpst
from tests.factories import random_gauge_field, random_lie_form, random_real_form

_TOL = 1e-10


@pytest.fixture(scope="module")
def small_ball():
    return Domain.ball(0.5, 0.25)


class TestDomains:
    def test_torus_sites(self, torus):
        assert torus.sites_per_axis == 4
        assert torus.geometry.support.all()

    def test_ball_has_no_site_at_origin(self, ball):
        assert ball.geometry.radius.min() > 0.0

    def test_ball_support_inside_region(self, ball):
        geometry = ball.geometry
        assert not np.any(geometry.support & ~geometry.region)
        assert geometry.support.sum() < geometry.region.sum()

    def test_torus_volume(self, torus):
        assert integrate(np.ones(torus.shape), torus) == pytest.approx(256.0)

    def test_ball_volume(self, ball):
        assert integrate(np.ones(ball.shape), ball) == pytest.approx(math.pi ** 2 / 2.0, rel=0.1)

    def test_erode_periodic_keeps_full_mask(self):
        mask = np.ones((3, 3, 3, 3), dtype=bool)
        assert erode(mask, periodic=True).all()
        assert not erode(mask, periodic=False)[0].any()


class TestDifferentials:
    @pytest.mark.parametrize("degree", [0, 1, 2])
    def test_d_squared_vanishes(self, degree, rng, small_ball):
        omega = random_lie_form(rng, small_ball, degree)
        assert np.abs(d(d(omega)).values).max() < _TOL

    @pytest.mark.parametrize("degree", [1, 2, 3, 4])
    def test_d_star_is_adjoint_on_ball(self, degree, rng, small_ball):
        omega = random_lie_form(rng, small_ball, degree - 1)
        tau = random_lie_form(rng, small_ball, degree)
        assert box_inner(d(omega), tau) == pytest.approx(box_inner(omega, d_star(tau)), rel=1e-10)

    @pytest.mark.parametrize("degree", [1, 2])
    def test_covariant_adjoint(self, degree, rng, small_ball):
        A = random_gauge_field(rng, small_ball)
        omega = random_lie_form(rng, small_ball, degree - 1)
        tau = random_lie_form(rng, small_ball, degree)
        lhs = box_inner(covariant_d(A, omega), tau)
        assert lhs == pytest.approx(box_inner(omega, covariant_d_star(A, tau)), rel=1e-10)

    def test_real_forms_differentiate(self, rng, torus):
        f = random_real_form(rng, torus, 0)
        df = d(f)
        assert df.kind == ValueKind.REAL
        assert np.abs(d(df).values).max() < _TOL

    def test_d_star_of_zero_form(self, rng, torus):
        with pytest.raises(DegreeError):
            covariant_d_star(GaugeField.flat(torus), random_lie_form(rng, torus, 0))

    def test_operator_matrix_matches_covariant_d(self, rng, small_ball):
        A = random_gauge_field(rng, small_ball)
        a = random_lie_form(rng, small_ball, 1)
        C = operator_matrix(A, 1)
        assert np.allclose(C @ a.values.reshape(-1), covariant_d(A, a).values.reshape(-1), atol=_TOL)

    def test_operator_transpose_is_codifferential(self, rng, small_ball):
        A = random_gauge_field(rng, small_ball)
        beta = random_lie_form(rng, small_ball, 1)
        G = operator_matrix(A, 0)
        assert np.allclose(G.T @ beta.values.reshape(-1), covariant_d_star(A, beta).values.reshape(-1), atol=_TOL)

    def test_domain_mismatch(self, rng, torus, small_ball):
        with pytest.raises(DomainMismatchError):
            random_lie_form(rng, torus, 1) + random_lie_form(rng, small_ball, 1)

    def test_scalar_hessian_of_quadratic(self, small_ball):
        x = small_ball.geometry.coords
        f = x[0] * x[1] + 0.5 * x[2] ** 2
        hessian = scalar_hessian(f, small_ball)
        interior = erode(erode(np.ones(small_ball.shape, dtype=bool), False), False)
        assert np.allclose(hessian[0, 1][interior], 1.0, atol=_TOL)
        assert np.allclose(hessian[2, 2][interior], 1.0, atol=_TOL)
        assert np.allclose(hessian[0, 3][interior], 0.0, atol=_TOL)


class TestCurvature:
    def test_flat_field(self, torus):
        F = curvature(GaugeField.flat(torus))
        assert np.abs(F.values).max() == 0.0

    def test_abelian_bianchi(self, rng, torus):
        values = np.zeros((4,) + torus.shape + (3,))
        values[..., 0] = rng.standard_normal((4,) + torus.shape)
        assert bianchi_residual(GaugeField.from_values(torus, values)) < _TOL

    def test_constant_gauge_covariance(self, rng, torus, su2):
        A = random_gauge_field(rng, torus)
        g = su2.exp(rng.standard_normal(3))
        transformed = gauge_transform(A, constant_gauge(torus, g))
        assert np.allclose(curvature(transformed).norm_sq, curvature(A).norm_sq, atol=_TOL)

    def test_constant_gauge_rotates_curvature(self, rng, torus, su2):
        A = random_gauge_field(rng, torus)
        g = su2.exp(rng.standard_normal(3))
        transformed = curvature(gauge_transform(A, constant_gauge(torus, g)))
        F = su2.to_matrix(curvature(A).values)
        expected = su2.from_matrix(np.conj(g.T) @ F @ g)
        assert np.allclose(transformed.values, expected, atol=_TOL)

    def test_non_unitary_gauge(self, torus):
        with pytest.raises(NonUnitaryError):
            gauge_transform(GaugeField.flat(torus), constant_gauge(torus, 2.0 * np.eye(2, dtype=complex)))

    def test_lattice_form_requires_domain_shape(self, torus, small_ball):
        with pytest.raises(DomainMismatchError):
            LatticeForm(degree=1, values=np.zeros((4,) + torus.shape + (3,)), domain=small_ball)


def _sine_slope_error(n: int) -> float:
    """RMS error of d(sum_mu sin x_mu) against cos x_mu on the 2 pi torus with n sites per axis"""
    domain = Domain.torus(2.0 * math.pi, 2.0 * math.pi / n)
    x = domain.geometry.coords
    f = LatticeForm.zeros(domain, 0, kind=ValueKind.REAL).with_values(np.sum(np.sin(x), axis=0)[None])
    return float(np.sqrt(np.mean((d(f).values - np.cos(x)) ** 2)))


def _su2_exp(su2, theta: np.ndarray) -> np.ndarray:
    # X^2 = -|theta|^2 / 4 for X = to_matrix(theta)
    norm = np.linalg.norm(theta, axis=-1)[..., None, None]
    safe = np.where(norm > 0.0, norm, 1.0)
    scale = np.where(norm > 0.0, 2.0 * np.sin(0.5 * norm) / safe, 1.0)
    return np.cos(0.5 * norm) * np.eye(2) + scale * su2.to_matrix(theta)


def _instanton_defect(kind: str, h: float, su2) -> float:
    domain = Domain.ball(1.0, h)
    A = bpst(domain, 1.0)
    inside = domain.geometry.radius < 0.7
    if kind == "bianchi":
        density = np.sum(covariant_d(A, curvature(A)).values ** 2, axis=(0, -1))
    else:
        x = domain.geometry.coords
        theta = 0.5 * np.stack([1.0 + x[0], x[1], x[2]], axis=-1)
        g = GaugeTransform(domain=domain, values=_su2_exp(su2, theta))
        density = (curvature(gauge_transform(A, g)).norm_sq - curvature(A).norm_sq) ** 2
    return float(np.sqrt(domain.cell_volume * density[inside].sum()))


class TestRefinement:
    def test_exterior_derivative_is_first_order(self):
        slope = math.log2(_sine_slope_error(8) / _sine_slope_error(16))
        assert 0.9 <= slope <= 1.1

    @pytest.mark.parametrize("kind", ["bianchi", "gauge"])
    def test_instanton_defects_shrink_with_h(self, kind, su2):
        coarse, fine = _instanton_defect(kind, 0.25, su2), _instanton_defect(kind, 0.125, su2)
        assert fine > 0.0
        assert coarse >= 1.6 * fine
