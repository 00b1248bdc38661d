import numpy as np
import pytest
from scipy import sparse

from app.core.config import settings
from app.core.exceptions import ConfigurationError, ParameterRangeError, SylvesterMismatchError
from app.models.fields import GaugeField, WeightField
from app.models.lattice import Domain
from app.models.spectral import FormKind
from app.services.field import operator_matrix
from app.services.functional import GradientFlowService
from app.services.instanton import bpst
from app.services.neck import weight_omega_eta_k
from app.services.spectral import (
    assemble,
    eigenpairs,
    extended_index_stacked,
    from_matrices,
    report_from_eigenvalues,
    reweight,
    solve,
    spectrum_lower_bound_check,
    sylvester_invariance,
)
from tests.factories import random_gauge_field

_FLAT_NULLITY = 12  # constant 1-forms: 4 directions x dim su(2)


@pytest.fixture(scope="module")
def flat_problem(torus):
    return assemble(GaugeField.flat(torus), 2.0, WeightField.constant(torus), FormKind.Q_CAL)


@pytest.fixture(scope="module")
def instanton_problem():
    domain = Domain.ball(0.9, 0.25)
    return assemble(bpst(domain, 1.0), 2.0, WeightField.constant(domain), FormKind.Q_CAL)


@pytest.fixture(scope="module")
def random_problem(torus):
    A = random_gauge_field(np.random.default_rng(7), torus, 0.2)
    return assemble(A, 2.5, WeightField.constant(torus), FormKind.Q_CAL)


def _random_pair(rng: np.random.Generator, n: int = 30, negatives: int = 3, zeros: int = 2):
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    spectrum = np.concatenate([-rng.uniform(0.5, 2.0, negatives), np.zeros(zeros),
                               rng.uniform(0.5, 2.0, n - negatives - zeros)])
    stiffness = Q @ np.diag(spectrum) @ Q.T
    return stiffness, spectrum


class TestFlatTorus:
    def test_dense_path(self, flat_problem):
        _, _, info = eigenpairs(flat_problem, 4)
        assert info.method == "dense"
        assert info.dofs == 3072

    def test_nullity_and_gap(self, flat_problem):
        report = solve(flat_problem, _FLAT_NULLITY + 1)
        assert report.index == 0
        assert report.nullity == _FLAT_NULLITY
        assert report.eigenvalues[-1] == pytest.approx(2.0, rel=1e-10)
        assert report.tol_sweep["x10"].nullity == _FLAT_NULLITY
        assert report.truncated is False

    def test_truncated_when_all_computed_are_zero(self, flat_problem):
        report = solve(flat_problem, 6, tol_zero=1e-8)
        assert report.nullity == 6
        assert report.truncated

    def test_constant_modes_are_gauge_fixed(self, torus, flat_problem):
        report = extended_index_stacked(flat_problem, GaugeField.flat(torus), _FLAT_NULLITY + 1)
        assert report.gauge_fixed_kernel == _FLAT_NULLITY
        assert report.extended_index == _FLAT_NULLITY

    def test_sylvester_across_constant_weights(self, torus, flat_problem):
        weights = [WeightField.constant(torus, value) for value in (1.0, 0.5, 2.0)]
        report = sylvester_invariance(flat_problem, weights, _FLAT_NULLITY + 1, labels=["1", "0.5", "2"])
        assert (report.index, report.nullity) == (0, _FLAT_NULLITY)
        assert report.eigenvalues[1][-1] == pytest.approx(4.0, rel=1e-10)
        assert report.eigenvalues[2][-1] == pytest.approx(1.0, rel=1e-10)

    def test_reweight_rejects_nonpositive(self, torus, flat_problem):
        with pytest.raises(ParameterRangeError):
            reweight(flat_problem, WeightField.constant(torus, 0.0))


class TestInstantonWeights:
    def test_sylvester_across_varying_weights(self, rng, instanton_problem):
        domain = instanton_problem.domain
        radius = domain.geometry.radius
        weights = [
            WeightField.constant(domain),
            WeightField(domain=domain, values=weight_omega_eta_k(0.5, 0.1, radius)),
            WeightField(domain=domain, values=rng.uniform(0.5, 2.0, domain.shape)),
        ]
        report = sylvester_invariance(instanton_problem, weights, 40, labels=["1", "omega_eta_k", "random"])
        assert report.weights == ["1", "omega_eta_k", "random"]
        assert len(report.eigenvalues) == 3
        assert all(len(values) == 40 for values in report.eigenvalues)

    def test_lowest_eigenvalue_scales_with_constant_weight(self, instanton_problem):
        domain = instanton_problem.domain
        plain = solve(instanton_problem, 4)
        heavy = solve(reweight(instanton_problem, WeightField.constant(domain, 4.0)), 4)
        assert heavy.eigenvalues == pytest.approx([value / 4.0 for value in plain.eigenvalues], rel=1e-8, abs=1e-12)


class TestGlobalInvariants:
    def test_frak_and_plain_index_agree_after_flow(self, torus):
        result = GradientFlowService().run(GaugeField.flat(torus), 2.5, 5)
        assert result.converged
        weight = WeightField.constant(torus)
        plain = solve(assemble(result.field, 2.5, weight, FormKind.Q), _FLAT_NULLITY + 1)
        frak = solve(assemble(result.field, 2.5, weight, FormKind.Q_FRAK), _FLAT_NULLITY + 1)
        assert plain.index == frak.index == 0

    def test_nullity_holds_the_gauge_orbit(self, torus):
        A = GaugeField.flat(torus)
        problem = assemble(A, 2.0, WeightField.constant(torus), FormKind.Q)
        report = solve(problem, problem.size)
        gauge_rank = np.linalg.matrix_rank(operator_matrix(A, 0).toarray())
        # constants are the kernel of d on 0-forms
        assert gauge_rank == problem.size // 4 - 3
        assert report.index == 0
        assert report.nullity >= gauge_rank
        assert report.nullity == gauge_rank + _FLAT_NULLITY

    def test_eigenvalues_ignore_dof_order(self, rng, random_problem):
        perm = rng.permutation(random_problem.size)
        K, M = random_problem.stiffness, random_problem.mass
        shuffled = from_matrices(K[perm][:, perm], M[perm][:, perm], "shuffled")
        original = solve(random_problem, 8)
        assert solve(shuffled, 8).eigenvalues == pytest.approx(original.eigenvalues, rel=1e-8, abs=1e-10)

    def test_shift_invert_matches_dense(self, monkeypatch, random_problem):
        dense, _, dense_info = eigenpairs(random_problem, 6)
        assert dense_info.method == "dense"
        monkeypatch.setattr(settings, "DENSE_DOF_THRESHOLD", 100)
        lanczos, _, info = eigenpairs(random_problem, 6)
        assert info.method == "shift-invert"
        assert info.shift < 0.0
        assert np.allclose(lanczos, dense, rtol=1e-6, atol=1e-8)


class TestExplicitMatrices:
    def test_sylvester_random_pairs(self, rng):
        stiffness, spectrum = _random_pair(rng)
        base = from_matrices(stiffness, np.eye(30), "identity")
        masses = [np.ones(30)] + [rng.uniform(0.1, 10.0, 30) for _ in range(3)]
        report = sylvester_invariance(base, masses, 30, labels=["m0", "m1", "m2", "m3"])
        assert report.index == 3
        assert report.nullity == 2

    def test_sylvester_mismatch_carries_diff(self, rng):
        stiffness, _ = _random_pair(rng, negatives=2, zeros=0)
        base = from_matrices(stiffness, np.eye(30))
        spread = np.ones(30)
        spread[0] = 1e-9  # one huge eigenvalue drags the relative zero tolerance up
        masses = [np.ones(30), spread]
        with pytest.raises(SylvesterMismatchError) as excinfo:
            sylvester_invariance(base, masses, 30)
        assert len(excinfo.value.diff) == 2

    def test_rejects_asymmetric_stiffness(self):
        with pytest.raises(ConfigurationError):
            from_matrices(np.array([[1.0, 2.0], [0.0, 1.0]]), np.eye(2))

    def test_rejects_indefinite_mass(self):
        with pytest.raises(ParameterRangeError):
            from_matrices(np.eye(2), np.array([[1.0, 2.0], [2.0, 1.0]]))

    def test_sparse_input(self):
        problem = from_matrices(sparse.diags([3.0, -1.0, 2.0]), sparse.identity(3))
        report = solve(problem, 3)
        assert report.eigenvalues == pytest.approx([-1.0, 2.0, 3.0])
        assert report.index == 1


class TestReportCounts:
    def test_counts_with_explicit_tolerance(self):
        report = report_from_eigenvalues([0.5, -1.0, 1e-9, -1e-9, 3.0], tol_zero=1e-6)
        assert report.eigenvalues == sorted(report.eigenvalues)
        assert (report.index, report.nullity, report.extended_index) == (1, 2, 3)

    def test_default_tolerance_scales_with_spectrum(self):
        report = report_from_eigenvalues([1e-8, 10.0, 100.0])
        assert report.tol_zero == pytest.approx(1e-5)
        assert report.nullity == 1

    def test_tolerance_sweep_flags_instability(self):
        report = report_from_eigenvalues([5e-7, 1.0], tol_zero=1e-6)
        assert report.nullity == 1
        assert report.tol_sweep["div10"].nullity == 0


class TestLowerBound:
    def test_flat_field_floor_is_zero(self, torus):
        report = spectrum_lower_bound_check(GaugeField.flat(torus), 2.0, eta=0.5, delta=0.01,
                                            center=np.full(4, 1.5), k=_FLAT_NULLITY + 1)
        assert report.mu0_fit == 0.0
        assert report.passed

    def test_random_field_stays_above_floor(self, rng, torus):
        A = random_gauge_field(rng, torus, 0.2)
        report = spectrum_lower_bound_check(A, 2.5, eta=0.5, delta=0.01, center=np.full(4, 1.5), k=4)
        assert report.lambda_min >= report.floor - 1e-8
        assert report.passed
