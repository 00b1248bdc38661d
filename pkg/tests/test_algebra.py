import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.core.exceptions import DegreeError, DimensionMismatchError
from app.models.fields import FormValue, ValueKind
from app.services.algebra import (
    algebra_for,
    bracket,
    curvature_endo,
    form_norm_sq,
    hodge_star,
    inner,
    interior,
    su,
    vector_one_form,
    wedge,
)

_TOL = 1e-12

_coefficient = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False, allow_infinity=False)


@st.composite
def lie_elements(draw, dim=3):
    return np.array(draw(st.lists(_coefficient, min_size=dim, max_size=dim)))


@st.composite
def forms(draw, degree, dim=3):
    size = math.comb(4, degree) * dim
    values = np.array(draw(st.lists(_coefficient, min_size=size, max_size=size)))
    return FormValue(degree=degree, values=values.reshape(math.comb(4, degree), dim))


class TestLieAlgebra:
    def test_su2_basis_closes(self, su2):
        e = np.eye(3)
        assert np.allclose(bracket(e[0], e[1]), e[2], atol=_TOL)
        assert np.allclose(bracket(e[1], e[2]), e[0], atol=_TOL)
        assert np.allclose(bracket(e[2], e[0]), e[1], atol=_TOL)

    def test_bracket_bound_su2(self, su2):
        assert su2.bracket_bound == pytest.approx(math.sqrt(2.0), rel=1e-12)

    def test_inner_is_minus_twice_trace(self, su2, rng):
        X, Y = rng.standard_normal((2, 3))
        trace = -2.0 * np.trace(su2.to_matrix(X) @ su2.to_matrix(Y)).real
        assert inner(X, Y) == pytest.approx(trace, abs=_TOL)

    def test_matrix_round_trip_su3(self, rng):
        algebra = su(3)
        X = rng.standard_normal(8)
        assert np.allclose(algebra.from_matrix(algebra.to_matrix(X)), X, atol=_TOL)

    def test_bracket_matches_commutator_su3(self, rng):
        algebra = su(3)
        X, Y = rng.standard_normal((2, 8))
        MX, MY = algebra.to_matrix(X), algebra.to_matrix(Y)
        expected = algebra.from_matrix(MX @ MY - MY @ MX)
        assert np.allclose(bracket(X, Y, algebra), expected, atol=1e-11)

    def test_exp_is_unitary(self, su2, rng):
        g = su2.exp(rng.standard_normal((5, 3)))
        identity = np.broadcast_to(np.eye(2), g.shape)
        assert np.allclose(np.conj(np.swapaxes(g, -1, -2)) @ g, identity, atol=_TOL)

    def test_algebra_for_rejects_odd_dimension(self):
        with pytest.raises(DimensionMismatchError):
            algebra_for(5)

    def test_bracket_rejects_mismatched_dimensions(self):
        with pytest.raises(DimensionMismatchError):
            bracket(np.zeros(3), np.zeros(8))

    @given(lie_elements(), lie_elements())
    @settings(max_examples=200)
    def test_bracket_antisymmetric(self, X, Y):
        assert np.allclose(bracket(X, Y), -bracket(Y, X), atol=1e-10)

    @given(lie_elements(), lie_elements())
    @settings(max_examples=200)
    def test_bracket_bound_holds(self, X, Y):
        bound = su(2).bracket_bound * np.linalg.norm(X) * np.linalg.norm(Y)
        assert np.linalg.norm(bracket(X, Y)) <= bound * (1.0 + 1e-12) + 1e-12

    @given(lie_elements(), lie_elements(), lie_elements())
    @settings(max_examples=100)
    def test_jacobi(self, X, Y, Z):
        total = bracket(X, bracket(Y, Z)) + bracket(Y, bracket(Z, X)) + bracket(Z, bracket(X, Y))
        assert np.allclose(total, 0.0, atol=1e-8)


class TestExteriorAlgebra:
    def test_matrix_wedge_of_coframe_pair(self, su2):
        values = np.zeros((4, 3))
        values[0, 0] = 1.0
        values[1, 1] = 1.0
        a = FormValue(degree=1, values=values)
        product = wedge(a, a, "matrix")
        assert product.kind == ValueKind.MATRIX
        # component 0 is dx^0 ^ dx^1
        assert np.allclose(su2.from_matrix(product.values[0]), [0.0, 0.0, 1.0], atol=_TOL)

    def test_bracket_wedge_doubles_commutator(self):
        values = np.zeros((4, 3))
        values[0, 0] = 1.0
        values[1, 1] = 1.0
        a = FormValue(degree=1, values=values)
        assert np.allclose(wedge(a, a, "bracket").values[0], [0.0, 0.0, 2.0], atol=_TOL)

    def test_wedge_overflow(self, rng):
        omega = FormValue(degree=3, values=rng.standard_normal((4, 3)))
        tau = FormValue(degree=2, values=rng.standard_normal((6, 3)))
        with pytest.raises(DegreeError):
            wedge(omega, tau)

    def test_interior_of_zero_form(self):
        with pytest.raises(DegreeError):
            interior(np.ones(4), FormValue(degree=0, values=np.ones((1, 3))))

    def test_scale_pairing_needs_mixed_kinds(self, rng):
        omega = FormValue(degree=1, values=rng.standard_normal((4, 3)))
        with pytest.raises(DimensionMismatchError):
            wedge(omega, omega, "scale")

    @pytest.mark.parametrize("degree", [0, 1, 2, 3, 4])
    def test_double_star_sign(self, degree, rng):
        omega = FormValue(degree=degree, values=rng.standard_normal((math.comb(4, degree), 3)))
        sign = (-1) ** (degree * (4 - degree))
        assert np.allclose(hodge_star(hodge_star(omega)).values, sign * omega.values, atol=_TOL)

    @given(forms(2))
    @settings(max_examples=100)
    def test_star_is_isometry(self, omega):
        assert form_norm_sq(hodge_star(omega)) == pytest.approx(float(form_norm_sq(omega)), rel=1e-12, abs=1e-12)

    @pytest.mark.parametrize("degree", [1, 2, 3])
    def test_interior_identity(self, degree, rng):
        X = rng.standard_normal(4)
        omega = FormValue(degree=degree, values=rng.standard_normal((math.comb(4, degree), 3)))
        lhs = form_norm_sq(interior(X, omega)) + form_norm_sq(wedge(vector_one_form(X), omega, "scale"))
        assert lhs == pytest.approx(float(np.dot(X, X) * form_norm_sq(omega)), rel=1e-12)


class TestCurvatureEndo:
    @given(forms(2))
    @settings(max_examples=200)
    def test_bounds_and_trace(self, F):
        endo = curvature_endo(F)
        norm_sq = float(form_norm_sq(F))
        ceiling = norm_sq / (1.0 + norm_sq)
        eigenvalues = np.linalg.eigvalsh(endo)
        assert np.allclose(endo, endo.T, atol=_TOL)
        assert eigenvalues[0] >= -1e-12
        assert eigenvalues[-1] <= ceiling + 1e-12
        assert np.trace(endo) == pytest.approx(2.0 * ceiling, rel=1e-10, abs=1e-14)

    def test_requires_two_form(self, rng):
        with pytest.raises(DegreeError):
            curvature_endo(FormValue(degree=1, values=rng.standard_normal((4, 3))))
