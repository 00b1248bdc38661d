import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.core.exceptions import ParameterRangeError
from app.models.fields import FormValue, GaugeField, LatticeForm
from app.models.instanton import BubblingFamilySpec
from app.models.lattice import Domain, erode
from app.models.neck import RadialSamples
from app.services.instanton import singular_gauge_family
from app.services.neck import (
    annulus_mask,
    constant_sweep,
    delta_pm,
    delta_roots,
    dyadic_profile,
    eps_p,
    gamma_p,
    mu,
    neck_constants,
    neck_envelope_check,
    neck_positivity_check,
    neck_positivity_spectrum,
    omega_bubble_flat,
    pointwise_bound_check,
    sigma_pm,
    supersolution_check,
    weight_omega,
    weight_omega2,
    weight_omega_eta_k,
    weight_table,
)

_TOL = 1e-12

_exponent = st.floats(min_value=2.0, max_value=2.99, allow_nan=False)
_fraction = st.floats(min_value=0.0, max_value=0.99, allow_nan=False)


@st.composite
def admissible_pairs(draw):
    """(p, eps) with a real pair of barrier exponents, kept away from the double root"""
    p = draw(_exponent)
    ceiling = (3.0 - p) ** 2 / (1.0 + 2.0 * (p - 2.0))
    return p, draw(_fraction) * min(ceiling, 0.99)


def _samples(scale: float = 1.0) -> RadialSamples:
    radius = np.geomspace(0.005, 1.0, 800)
    measure = 2.0 * math.pi ** 2 * radius ** 3 * np.gradient(radius)
    return RadialSamples(radius=radius, value=scale / radius ** 2, measure=measure)


class TestConstantStack:
    def test_values_at_p2(self):
        constants = neck_constants(2.0)
        assert constants.mu == pytest.approx(1.5)
        assert constants.gamma == pytest.approx(0.5)
        assert (constants.delta_minus, constants.delta_plus) == pytest.approx((0.0, 2.0), abs=_TOL)
        assert (constants.sigma_minus, constants.sigma_plus) == pytest.approx((-2.0, 4.0), abs=_TOL)
        assert constants.eps_p == pytest.approx(0.0, abs=_TOL)

    def test_mu_floor(self):
        assert mu(2.99) == pytest.approx(1.0)

    def test_gamma_rejects_large_p(self):
        with pytest.raises(ParameterRangeError):
            gamma_p(2.9, C=1.0)

    def test_gamma_without_bochner_loss(self):
        assert gamma_p(2.5, C=0.0) == pytest.approx(2.0 - mu(2.5) * 0.75 / 1.5)

    def test_eps_must_stay_below_one(self):
        with pytest.raises(ParameterRangeError):
            delta_pm(1.0, 2.0)

    @given(_exponent)
    @settings(max_examples=100)
    def test_delta_plus_closed_form(self, p):
        assert delta_pm(0.0, p)[1] == pytest.approx(2.0 * (3.0 - p) / (1.0 + 2.0 * (p - 2.0)), rel=_TOL)

    @given(admissible_pairs())
    @settings(max_examples=200)
    def test_vieta(self, pair):
        p, eps = pair
        lo, hi = delta_pm(eps, p)
        a = 1.0 + 2.0 * (p - 2.0)
        assert lo + hi == pytest.approx(2.0 * (3.0 - p) / a, rel=1e-10)
        assert lo * hi == pytest.approx(eps / a, rel=1e-9, abs=1e-14)

    @given(admissible_pairs())
    @settings(max_examples=100)
    def test_polynomial_solver_agrees(self, pair):
        p, eps = pair
        assert delta_roots(eps, p) == pytest.approx(delta_pm(eps, p), rel=1e-8, abs=1e-10)

    def test_sigma_from_delta(self):
        gamma = gamma_p(2.2)
        lo, hi = delta_pm(0.1, 2.2)
        assert sigma_pm(0.1, 2.2) == pytest.approx(((1 + 1 / gamma) * lo - 2, (1 + 1 / gamma) * hi - 2))

    def test_eps_p_grows_with_p(self):
        assert eps_p(2.2) > eps_p(2.0)

    def test_sweep_sorted_and_skips_inadmissible(self):
        rows = constant_sweep([2.5, 2.0, 2.95], [0.0, 0.1], workers=2)
        keys = [(row.p, row.eps, row.name) for row in rows]
        assert keys == sorted(keys)
        assert {row.p for row in rows} == {2.0, 2.5}
        assert len(rows) == 2 * 2 * 8


class TestWeights:
    def test_p2_weight_formula(self):
        x = np.geomspace(0.01, 1.0, 50)
        expected = ((x / 1.0) ** 2 + (0.01 / x) ** 2) / x ** 2
        assert np.allclose(weight_omega2(1.0, 0.01, x), expected, rtol=1e-12)

    def test_weight_table_respects_inverse_square_bound(self):
        rows = weight_table(2.0, 0.01, 1.0, n=32)
        assert all(row["omega_2"] <= row["bound"] * (1 + _TOL) for row in rows)
        assert len(rows) == 32

    def test_weight_outside_annulus(self):
        with pytest.raises(ParameterRangeError):
            weight_omega(2.0, 1.0, 0.1, [0.05])

    def test_three_region_weight_is_continuous(self):
        eta, delta = 0.5, 0.01
        for edge in (eta, delta / eta):
            inner, outer = weight_omega_eta_k(eta, delta, [edge * (1 - 1e-9), edge * (1 + 1e-9)])
            assert inner == pytest.approx(outer, rel=1e-6)

    def test_three_region_weight_needs_small_delta(self):
        with pytest.raises(ParameterRangeError):
            weight_omega_eta_k(0.5, 0.25, [0.1])

    @pytest.mark.parametrize("pi", [0.5, 3.0])
    def test_bubble_chart_limit(self, pi):
        eta, delta = 0.5, 1e-6
        rescaled = delta ** 2 * weight_omega_eta_k(eta, delta, [delta * pi])[0]
        assert rescaled == pytest.approx(omega_bubble_flat(eta, [pi])[0], rel=1e-6)


class TestSupersolution:
    @pytest.mark.parametrize("sigma", [0.0, 0.5, 1.0, 2.0])
    def test_nonnegative_at_p2(self, sigma):
        report = supersolution_check(2.0, 0.0, sigma)
        assert report.lower == pytest.approx(sigma * (2.0 - sigma))
        assert report.nonnegative
        assert report.fd_defect < 1e-2

    def test_lower_below_upper(self):
        report = supersolution_check(2.5, 0.05, 1.0)
        assert report.lower <= report.upper

    def test_lattice_endomorphisms_fall_inside_corners(self, rng):
        forms = FormValue(degree=2, values=rng.standard_normal((6, 200, 3)))
        directions = rng.standard_normal((200, 4))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        report = supersolution_check(2.5, 0.0, 1.0, F=forms, directions=directions)
        assert report.field_samples == 200
        assert report.field_within_bounds


class TestRadialDiagnostics:
    def test_dyadic_shells(self):
        profile = dyadic_profile(_samples(), 0.01, 1.0)
        assert profile.radii == pytest.approx([0.01 * 2 ** j for j in range(6)])
        assert profile.sup == max(profile.energies)

    def test_fitted_constant_is_scale_free(self):
        base = pointwise_bound_check(_samples(), 2.0, 0.02, 0.5)
        scaled = pointwise_bound_check(_samples(7.0), 2.0, 0.02, 0.5)
        assert scaled.fitted_constant == pytest.approx(base.fitted_constant, rel=1e-12)
        assert scaled.energy == pytest.approx(7.0 * base.energy, rel=1e-12)

    def test_envelope_divides_by_neck_factor(self):
        base = pointwise_bound_check(_samples(), 2.0, 0.02, 0.5)
        envelope = neck_envelope_check(_samples(), 2.0, 0.02, 0.5)
        assert envelope.neck_factor == pytest.approx(2.0)
        assert envelope.fitted_constant == pytest.approx(base.fitted_constant / 2.0)


class TestNeckPositivity:
    def test_long_neck_rejected(self, ball):
        a = LatticeForm.zeros(ball, 1)
        with pytest.raises(ParameterRangeError):
            neck_positivity_check(GaugeField.flat(ball), 2.9, a, 0.01, 1.0)

    def test_flat_field_ratio(self, rng, ball):
        r, R = 0.3, 1.0
        mask = annulus_mask(ball, r, R) & ball.geometry.support
        values = rng.standard_normal((4,) + ball.shape + (3,)) * mask[None, ..., None]
        a = LatticeForm(degree=1, values=values, domain=ball)
        report = neck_positivity_check(GaugeField.flat(ball), 2.0, a, r, R)
        assert report.dyadic_sup == 0.0
        assert report.gate_satisfied
        assert report.lhs >= 0.0
        assert report.ratio == pytest.approx(report.lhs / report.rhs)

    @pytest.mark.parametrize("p", [2.0, 2.5])
    @pytest.mark.parametrize("k", [5, 6, 7])
    def test_glued_bubble_neck_stays_above_spectral_floor(self, k, p, rng):
        domain = Domain.ball(0.75, 0.125)
        r, R = 0.2, 0.5
        A = singular_gauge_family(domain, BubblingFamilySpec(eta=0.5, k_values=[k]), k)
        floor = neck_positivity_spectrum(A, p, r, R).c0
        assert floor > 0.0

        mask = erode(annulus_mask(domain, r, R), False) & domain.geometry.support
        for _ in range(50):
            values = rng.standard_normal((4,) + domain.shape + (3,)) * mask[None, ..., None]
            report = neck_positivity_check(A, p, LatticeForm(degree=1, values=values, domain=domain), r, R)
            assert report.gate_satisfied
            assert report.ratio >= floor * (1.0 - 1e-6)
