import pytest
from pydantic import ValidationError

from app.core.exceptions import ConfigurationError
from app.models.inequalities import FuzzConfig
from app.services.inequalities import CHECKS, antipodal_margin, pairing_alphas, run_battery

_POINTWISE = [
    "monotone_pairing",
    "power_subadditivity",
    "v_h_kernels",
    "endo_bounds",
    "wedge_interior_identity",
    "kato",
    "f_h_comparison",
]


@pytest.fixture(scope="module")
def small_config():
    return FuzzConfig(samples=2000, lattice_samples=4, seed=7)


class TestPointwiseChecks:
    @pytest.mark.parametrize("name", _POINTWISE)
    def test_check_passes(self, name, small_config):
        result = CHECKS[name](small_config)
        assert result.name == name
        assert result.samples > 0
        assert result.passed, result.witness

    def test_antipodal_pairing_turns_at_one_half(self):
        assert 0.0 < antipodal_margin(0.5, 1e3) < 1e-5
        assert antipodal_margin(0.6, 1e3) < 0.0

    def test_pairing_alphas(self):
        assert pairing_alphas([2.0, 2.4]) == pytest.approx([0.0, 0.1, 0.2])


class TestLatticeChecks:
    def test_hardy_gaffney_reports_constants(self, small_config):
        result = CHECKS["hardy_gaffney"](small_config)
        assert result.samples == small_config.lattice_samples
        assert result.detail["gaffney_torus_defect"] < 1e-12
        assert result.detail["gaffney_dirichlet_constant"] > 0.0

    def test_bochner_coefficients(self, small_config):
        result = CHECKS["bochner"](small_config)
        assert result.detail["coefficient_error"] <= 1e-12
        assert len(result.detail["chain_rule"]) == 2


class TestBattery:
    def test_runs_selected_checks_in_order(self, small_config):
        card = run_battery(small_config, config_hash="abc", names=["kato", "endo_bounds"], workers=2)
        assert [check.name for check in card.checks] == ["endo_bounds", "kato"]
        assert card.config_hash == "abc"
        assert card.seed == 7
        assert card.passed
        assert card.failures == []

    def test_seed_determines_results(self, small_config):
        names = ["monotone_pairing", "power_subadditivity"]
        first = run_battery(small_config, names=names)
        second = run_battery(small_config, names=names, workers=3)
        assert first.model_dump() == second.model_dump()
        other = run_battery(small_config.model_copy(update={"seed": 8}), names=names)
        assert other.checks[0].worst_margin != first.checks[0].worst_margin

    def test_unknown_check(self, small_config):
        with pytest.raises(ConfigurationError):
            run_battery(small_config, names=["kato", "nope"])

    def test_checks_taken_from_config(self):
        card = run_battery(FuzzConfig(samples=200, checks=["kato"]))
        assert [check.name for check in card.checks] == ["kato"]


class TestFuzzConfig:
    @pytest.mark.parametrize("grid", [[], [1.9], [3.0]])
    def test_rejects_p_grid(self, grid):
        with pytest.raises(ValidationError):
            FuzzConfig(p_grid=grid)

    def test_rejects_empty_magnitude_range(self):
        with pytest.raises(ValidationError):
            FuzzConfig(magnitude_min=2.0, magnitude_max=1.0)

    def test_grid_is_sorted(self):
        assert FuzzConfig(p_grid=[2.5, 2.0]).p_grid == [2.0, 2.5]
