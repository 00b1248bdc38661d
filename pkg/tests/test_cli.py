import argparse
import csv
import json

import numpy as np
import pytest

from app.api.endpoints.spectrum import VARYING_WEIGHT_LABELS, varying_weights
from app.api.router import dispatch
from app.models.experiment import ExperimentConfig, config_hash
from app.models.lattice import Domain
from app.services.neck import weight_omega_eta_k
from main import main, parse_grid, parse_k_range


def _neck_args(out, *extra):
    return ["neck", "--out", str(out), "--p-grid", "2,2.5", "--eps", "0", *extra]


def _rows(path):
    with path.open(encoding="utf-8", newline="") as handle:
        return list(csv.DictReader(handle))


class TestArgumentParsing:
    def test_grid_includes_stop(self):
        assert parse_grid("2:2.1:0.05") == [2.0, 2.05, 2.1]

    def test_grid_list(self):
        assert parse_grid("2,2.5") == [2.0, 2.5]

    @pytest.mark.parametrize("text", ["2:2.1:0", "2.1:2:0.05"])
    def test_bad_grid(self, text):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_grid(text)

    def test_k_range(self):
        assert parse_k_range("1..4") == [1, 2, 3, 4]
        assert parse_k_range("2,5") == [2, 5]


class TestConfigErrors:
    @pytest.mark.parametrize("text", [
        '{"schema_version": "1", "unknown": 1}',
        '{"schema_version": "2"}',
        '{"physics": {"p": 3.0}}',
        '{"lattice": ',
        '[1, 2]',
    ])
    def test_bad_config_exits_2(self, text, tmp_path):
        path = tmp_path / "config.json"
        path.write_text(text, encoding="utf-8")
        assert main(["neck", "--config", str(path), "--out", str(tmp_path / "out")]) == 2

    def test_missing_config_file(self, tmp_path):
        assert main(["neck", "--config", str(tmp_path / "absent.json")]) == 2

    def test_unknown_command(self, tmp_path):
        assert dispatch("teleport", ExperimentConfig(out_dir=str(tmp_path))) == 2


class TestNeckCommand:
    def test_writes_constant_table(self, tmp_path):
        assert main(_neck_args(tmp_path)) == 0
        rows = _rows(tmp_path / "neck_constants.csv")
        delta_plus = [row for row in rows if row["p"] == "2.0" and row["name"] == "delta_plus"]
        assert len(delta_plus) == 1
        assert float(delta_plus[0]["value"]) == pytest.approx(2.0)
        assert {row["seed"] for row in rows} == {"0"}

    def test_stamp_matches_config(self, tmp_path):
        assert main(_neck_args(tmp_path, "--seed", "11")) == 0
        report = json.loads((tmp_path / "neck.json").read_text(encoding="utf-8"))
        expected = ExperimentConfig.model_validate({
            "physics": {"p_grid": [2.0, 2.5], "eps_grid": [0.0]},
            "seed": 11,
        })
        assert report["seed"] == 11
        assert report["config_hash"] == config_hash(expected)
        assert report["command"] == "neck"

    def test_rerun_is_byte_identical(self, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        assert main(_neck_args(first)) == 0
        assert main(_neck_args(second)) == 0
        names = sorted(path.name for path in first.iterdir())
        assert names == sorted(path.name for path in second.iterdir())
        for name in names:
            assert (first / name).read_bytes() == (second / name).read_bytes()


class TestConfigHash:
    def test_output_directory_does_not_enter(self):
        assert config_hash(ExperimentConfig(out_dir="a")) == config_hash(ExperimentConfig(out_dir="b"))

    def test_seed_enters(self):
        assert config_hash(ExperimentConfig(seed=1)) != config_hash(ExperimentConfig(seed=2))


class TestSylvesterWeights:
    def test_varying_weights_follow_the_family(self, rng):
        config = ExperimentConfig()
        domain = Domain.ball(1.0, 0.25)
        weights = varying_weights(config, domain, rng)
        assert len(weights) == len(VARYING_WEIGHT_LABELS)
        family = config.family()
        expected = weight_omega_eta_k(family.eta, family.delta(1), domain.geometry.radius)
        assert np.allclose(weights[0].values, expected)
        assert weights[1].values.min() >= 0.5 and weights[1].values.max() <= 2.0
        assert all(weight.domain == domain for weight in weights)
