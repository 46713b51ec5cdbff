import json
import math
import sys

import numpy as np
import pytest

from fimest.cli import (
    EXIT_DESIGN,
    EXIT_DUPLICATES,
    EXIT_INPUT,
    EXIT_MODEL,
    EXIT_OK,
    EXIT_WEIGHTS,
    main,
)


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def write_csv(path, rows):
    path.write_text("\n".join(",".join(str(v) for v in row) for row in rows) + "\n")


class TestDivergence:
    def test_two_singletons(self, tmp_path, capsys):
        p = tmp_path / "p.csv"
        q = tmp_path / "q.csv"
        write_csv(p, [[0.0]])
        write_csv(q, [[1.0]])
        code, out, _ = run_cli(capsys, "divergence", str(p), str(q))
        assert code == EXIT_OK
        report = json.loads(out)
        assert report == {"d_hat": 0.0, "c": 1, "n_p": 1, "n_q": 1, "alpha": 0.5}

    def test_clamp_floors_at_zero(self, tmp_path, capsys):
        p = tmp_path / "p.csv"
        q = tmp_path / "q.csv"
        write_csv(p, [[0.0], [2.0]])
        write_csv(q, [[1.0], [3.0]])
        code, out, _ = run_cli(capsys, "divergence", str(p), str(q))
        assert code == EXIT_OK and json.loads(out)["d_hat"] == -0.5
        code, out, _ = run_cli(capsys, "divergence", str(p), str(q), "--clamp")
        assert code == EXIT_OK and json.loads(out)["d_hat"] == 0.0

    def test_column_mismatch_exit_2(self, tmp_path, capsys):
        p = tmp_path / "p.csv"
        q = tmp_path / "q.csv"
        write_csv(p, [[0.0, 1.0]])
        write_csv(q, [[1.0]])
        code, _, err = run_cli(capsys, "divergence", str(p), str(q))
        assert code == EXIT_INPUT
        assert "column count" in err

    def test_bad_value_reports_line_number(self, tmp_path, capsys):
        p = tmp_path / "p.csv"
        q = tmp_path / "q.csv"
        p.write_text("0.0\nbogus\n")
        write_csv(q, [[1.0]])
        code, _, err = run_cli(capsys, "divergence", str(p), str(q))
        assert code == EXIT_INPUT
        assert f"{p}:2" in err

    def test_duplicates_exit_3(self, tmp_path, capsys):
        p = tmp_path / "p.csv"
        q = tmp_path / "q.csv"
        write_csv(p, [[1.0], [2.0]])
        write_csv(q, [[1.0]])
        code, _, err = run_cli(capsys, "divergence", str(p), str(q))
        assert code == EXIT_DUPLICATES

    def test_header_flag(self, tmp_path, capsys):
        p = tmp_path / "p.csv"
        q = tmp_path / "q.csv"
        p.write_text("x\n0.0\n")
        q.write_text("x\n1.0\n")
        code, out, _ = run_cli(capsys, "divergence", str(p), str(q), "--header")
        assert code == EXIT_OK and json.loads(out)["c"] == 1

    def test_missing_file(self, tmp_path, capsys):
        q = tmp_path / "q.csv"
        write_csv(q, [[1.0]])
        code, _, err = run_cli(capsys, "divergence", str(tmp_path / "absent.csv"), str(q))
        assert code == EXIT_INPUT


class TestFim:
    def test_gaussian_ls_report(self, capsys):
        code, out, _ = run_cli(
            capsys,
            "fim", "--model", "gaussian", "--dim", "2", "--theta", "0,0",
            "--n", "300", "--m", "9", "--sigma-u", "0.3", "--seed", "5",
        )
        assert code == EXIT_OK
        report = json.loads(out)
        assert report["design"] == {"mode": "gaussian", "scale": 0.3, "m": 9}
        f_mat = np.asarray(report["estimates"]["ls"]["f_mat"])
        assert f_mat.shape == (2, 2)
        assert np.array_equal(f_mat, f_mat.T)

    def test_deterministic_under_fixed_seed(self, capsys):
        argv = [
            "fim", "--model", "gaussian", "--dim", "2", "--theta", "0,0",
            "--n", "200", "--m", "8", "--radius", "0.4", "--seed", "7",
        ]
        code_a, out_a, _ = run_cli(capsys, *argv)
        code_b, out_b, _ = run_cli(capsys, *argv)
        assert code_a == code_b == EXIT_OK
        assert out_a == out_b

    def test_psd_method_reports_targets_and_psd_matrix(self, capsys):
        code, out, _ = run_cli(
            capsys,
            "fim", "--model", "gaussian", "--dim", "2", "--theta", "0,0",
            "--n", "400", "--m", "9", "--sigma-u", "0.3", "--method", "psd", "--seed", "11",
        )
        assert code == EXIT_OK
        report = json.loads(out)["estimates"]["psd"]
        assert report["min_eigenvalue"] >= -1e-8
        assert len(report["diag_targets"]) == 2

    def test_psd_estimate_near_identity_for_unit_information(self, capsys):
        code, out, _ = run_cli(
            capsys,
            "fim", "--model", "gaussian", "--dim", "4", "--theta", "0,0,0,0",
            "--n", "1000", "--sigma-u", "0.2236", "--method", "psd",
        )
        assert code == EXIT_OK
        report = json.loads(out)["estimates"]["psd"]
        f_mat = np.asarray(report["f_mat"])
        assert report["min_eigenvalue"] >= -1e-8
        assert np.abs(f_mat - np.eye(4)).max() <= 0.5

    def test_theta_length_mismatch(self, capsys):
        code, _, err = run_cli(
            capsys, "fim", "--model", "gaussian", "--dim", "3", "--theta", "0,0", "--n", "100"
        )
        assert code == EXIT_INPUT

    def test_external_model_failure_exit_4(self, capsys):
        code, _, err = run_cli(
            capsys,
            "fim", "--model", "external", "--cmd", "/no/such/model", "--dim", "1",
            "--theta", "0", "--n", "50", "--m", "3",
        )
        assert code == EXIT_MODEL

    def test_external_reference_model_runs(self, capsys):
        cmd = f"{sys.executable} -m fimest.ref_model --dim 1"
        code, out, _ = run_cli(
            capsys,
            "fim", "--model", "external", "--cmd", cmd, "--dim", "1",
            "--theta", "0", "--n", "200", "--m", "4", "--radius", "0.5", "--seed", "3",
        )
        assert code == EXIT_OK
        report = json.loads(out)
        assert np.asarray(report["estimates"]["ls"]["f_mat"]).shape == (1, 1)

    def test_degenerate_design_exit_5(self, capsys, monkeypatch):
        from fimest import cli as cli_mod
        from fimest.errors import RankDeficient

        def boom(*args, **kwargs):
            raise RankDeficient("forced")

        monkeypatch.setattr(cli_mod.fim_mod, "sample_perturbations", boom)
        code, _, err = run_cli(
            capsys, "fim", "--model", "gaussian", "--dim", "2", "--theta", "0,0", "--n", "100"
        )
        assert code == EXIT_DESIGN


class TestCrlb:
    def test_identity_fim(self, tmp_path, capsys):
        fim_file = tmp_path / "fim.json"
        fim_file.write_text(json.dumps(np.eye(3).tolist()))
        code, out, _ = run_cli(capsys, "crlb", str(fim_file), "--epsilon", "1e-12")
        assert code == EXIT_OK
        report = json.loads(out)
        assert np.allclose(report["crlb"], np.eye(3), atol=1e-9)
        assert np.allclose(report["stddev"], np.ones(3), atol=1e-9)
        assert "volume" not in report

    def test_weights_all_e_give_volume_d(self, tmp_path, capsys):
        fim_file = tmp_path / "fim.json"
        weights_file = tmp_path / "w.json"
        fim_file.write_text(json.dumps(np.eye(4).tolist()))
        weights_file.write_text(json.dumps([math.e] * 4))
        code, out, _ = run_cli(
            capsys, "crlb", str(fim_file), "--weights", str(weights_file), "--epsilon", "1e-12"
        )
        assert code == EXIT_OK
        assert json.loads(out)["volume"] == pytest.approx(4.0, abs=1e-9)

    def test_asymmetric_matrix_exit_2(self, tmp_path, capsys):
        fim_file = tmp_path / "fim.json"
        fim_file.write_text(json.dumps([[1.0, 0.5], [0.0, 1.0]]))
        code, _, err = run_cli(capsys, "crlb", str(fim_file))
        assert code == EXIT_INPUT
        assert "symmetric" in err

    def test_zero_weight_exit_6(self, tmp_path, capsys):
        fim_file = tmp_path / "fim.json"
        weights_file = tmp_path / "w.json"
        fim_file.write_text(json.dumps(np.eye(2).tolist()))
        weights_file.write_text(json.dumps([1.0, 0.0]))
        code, _, err = run_cli(capsys, "crlb", str(fim_file), "--weights", str(weights_file))
        assert code == EXIT_WEIGHTS

    def test_invalid_json_exit_2(self, tmp_path, capsys):
        fim_file = tmp_path / "fim.json"
        fim_file.write_text("{nope")
        code, _, err = run_cli(capsys, "crlb", str(fim_file))
        assert code == EXIT_INPUT


class TestExperiment:
    def config_payload(self, tmp_path):
        return {
            "dims": [2],
            "n_samples": [60, 90],
            "sigma_u2": 0.05,
            "m_factor": 2,
            "monte_carlo_runs": 2,
            "master_seed": 5,
            "output": str(tmp_path / "records.csv"),
        }

    def test_runs_and_reports(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps(self.config_payload(tmp_path)))
        code, out, _ = run_cli(capsys, "experiment", "gaussian-gap-vs-n", str(config))
        assert code == EXIT_OK
        lines = (tmp_path / "records.csv").read_text().splitlines()
        assert len(lines) == 1 + 2 * 2
        assert "mean_mse_dhalf" in out

    def test_row_count_matches_config_arithmetic(self, tmp_path, capsys):
        payload = self.config_payload(tmp_path)
        payload.update({"dims": [2, 3, 4], "n_samples": 60, "monte_carlo_runs": 3})
        config = tmp_path / "config.json"
        config.write_text(json.dumps(payload))
        code, *_ = run_cli(capsys, "experiment", "gaussian-mse-vs-dim", str(config))
        assert code == EXIT_OK
        lines = (tmp_path / "records.csv").read_text().splitlines()
        assert len(lines) == 1 + 3 * 3

    def test_same_config_same_bytes(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps(self.config_payload(tmp_path)))
        run_cli(capsys, "experiment", "gaussian-gap-vs-n", str(config))
        first = (tmp_path / "records.csv").read_bytes()
        run_cli(capsys, "experiment", "gaussian-gap-vs-n", str(config))
        assert (tmp_path / "records.csv").read_bytes() == first

    def test_unknown_name_lists_valid_names(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps(self.config_payload(tmp_path)))
        code, _, err = run_cli(capsys, "experiment", "nope", str(config))
        assert code == EXIT_INPUT
        assert "gaussian-mse-vs-dim" in err and "gaussian-gap-vs-n" in err

    def test_missing_key_exit_2(self, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"dims": [2]}))
        code, _, err = run_cli(capsys, "experiment", "gaussian-mse-vs-dim", str(config))
        assert code == EXIT_INPUT
        assert "n_samples" in err
