"""Command-line interface: subcommands, prior literals, exit codes."""

import csv
import json

import pytest

from amplasso.cli import main, parse_prior


class TestParsePrior:
    def test_parses_literal(self):
        prior = parse_prior('{"atoms": [-1, 0, 1], "weights": [0.064, 0.872, 0.064]}')
        assert prior.atoms == (-1.0, 0.0, 1.0)
        assert prior.weights == (0.064, 0.872, 0.064)

    def test_rejects_non_object(self):
        with pytest.raises(ValueError):
            parse_prior("[1, 2, 3]")


class TestSolve:
    def test_runs_and_writes_trajectory(self, tmp_path, capsys):
        out = tmp_path / "run"
        code = main(["solve", "--n", "200", "--delta", "0.64", "--sigma2", "0.2",
                     "--alpha", "2.0", "--seeds", "3", "--max-iter", "400",
                     "--tol", "1e-8", "--out", str(out)])
        assert code == 0
        text = capsys.readouterr().out
        assert "kkt_gap=" in text and "effective_lambda=" in text
        with (tmp_path / "run.csv").open() as handle:
            rows = list(csv.DictReader(handle))
        assert rows[0]["t"] == "0"
        assert set(rows[0]) == {"t", "tau_hat", "theta", "b", "mse", "kkt_gap"}

    def test_lambda_flag_maps_through_calibration(self, capsys):
        code = main(["solve", "--n", "200", "--lambda", "1.0", "--seeds", "1",
                     "--max-iter", "400"])
        assert code == 0
        assert "alpha=1.94" in capsys.readouterr().out

    def test_bad_prior_is_spec_error(self, capsys):
        code = main(["solve", "--n", "100", "--prior", "not json"])
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_invalid_weights_is_spec_error(self):
        code = main(["solve", "--n", "100", "--prior",
                     '{"atoms": [0, 1], "weights": [0.9, 0.3]}'])
        assert code == 2


class TestSe:
    def test_reports_fixed_point(self, capsys):
        code = main(["se", "--delta", "0.64", "--sigma2", "0.2", "--alpha", "2.0"])
        assert code == 0
        out = capsys.readouterr().out
        assert "tau_star=0.604786274" in out


class TestCalibrate:
    def test_alpha_to_lambda(self, capsys):
        code = main(["calibrate", "--delta", "0.64", "--sigma2", "0.2",
                     "--alpha", "2.0"])
        assert code == 0
        assert "lambda=1.04638" in capsys.readouterr().out

    def test_lambda_to_alpha(self, capsys):
        code = main(["calibrate", "--delta", "0.64", "--sigma2", "0.2",
                     "--lambda", "1.0"])
        assert code == 0
        assert "alpha=1.94584" in capsys.readouterr().out

    def test_needs_one_flag(self):
        assert main(["calibrate", "--delta", "0.64", "--sigma2", "0.2"]) == 2


class TestPhase:
    def test_point_query(self, capsys):
        code = main(["phase", "--delta", "0.2"])
        assert code == 0
        out = capsys.readouterr().out
        assert "rho_c=0.2433" in out and "boundary_alpha=1.408" in out

    def test_sweep_writes_files(self, tmp_path):
        code = main(["phase", "--sweep", "7", "--out", str(tmp_path / "pt")])
        assert code == 0
        assert (tmp_path / "pt_boundary.csv").exists()


class TestExperiment:
    def test_from_flags(self, tmp_path):
        out = tmp_path / "exp"
        code = main(["experiment", "--kind", "MSE_VS_LAMBDA", "--n", "120",
                     "--delta", "0.64", "--sigma2", "0.2", "--lambdas", "1.0",
                     "--seeds", "0", "--max-iter", "200", "--tol", "1e-6",
                     "--out", str(out)])
        assert code == 0
        assert (tmp_path / "exp.csv").exists()
        assert (tmp_path / "exp.manifest.json").exists()

    def test_from_json_spec(self, tmp_path):
        spec = {
            "kind": "PHASE_CURVE", "grid_points": 5,
            "params": {"delta": 0.64, "sigma2": 0.2,
                       "prior": {"atoms": [-1, 0, 1],
                                 "weights": [0.064, 0.872, 0.064]}},
        }
        spec_file = tmp_path / "spec.json"
        spec_file.write_text(json.dumps(spec))
        code = main(["experiment", "--spec", str(spec_file),
                     "--out", str(tmp_path / "pc")])
        assert code == 0
        assert (tmp_path / "pc_boundary.csv").exists()

    def test_missing_kind_is_spec_error(self):
        assert main(["experiment", "--n", "100"]) == 2
