import json

import pytest

from eqf.cli import main
from eqf.scenario import bundled_scenario_path


def test_list_systems(capsys):
    assert main(["list-systems"]) == 0
    out = capsys.readouterr().out.strip().split("\n")
    assert len(out) >= 7
    assert any(line.startswith("so3_curved") for line in out)


def test_classify_dual_system(capsys):
    assert main(["classify", "--system", "so3_dual"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["decomposition"]["dims"] == [0, 3, 3]
    assert data["invariance"]["dual"] is True
    assert data["invariance"]["group_affine"] is True


def test_classify_non_invariant_reports_reason(capsys):
    assert main(["classify", "--system", "so3_curved", "--alpha", "0.2"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["decomposition"] is None
    assert "not_invariant" in data
    assert data["invariance"]["group_affine"] is False


def test_extend_single_axis(capsys):
    assert main(["extend", "--system", "so3_single_axis"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert data["extended_dim"] == 3
    assert data["perp_dim"] == 2


def test_extend_non_group_affine_exits_3(capsys):
    assert main(["extend", "--system", "so3_curved"]) == 3
    assert "precondition" in capsys.readouterr().err


def test_unknown_system_exits_1(capsys):
    assert main(["classify", "--system", "so3_bogus"]) == 1


def test_bad_flag_exits_1():
    with pytest.raises(SystemExit) as exc:
        main(["classify", "--bogus"])
    assert exc.value.code == 1


def test_missing_subcommand_exits_1():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 1


def test_sim_missing_file_exits_1(capsys):
    assert main(["sim", "--scenario", "/no/such/file.toml"]) == 1
    assert "not found" in capsys.readouterr().err


def test_sim_writes_outputs(tmp_path, capsys):
    scenario = str(bundled_scenario_path("so3_gyro_clean"))
    assert main(["sim", "--scenario", scenario, "--out", str(tmp_path)]) == 0
    records = (tmp_path / "records.csv").read_text()
    assert records.startswith("t,eps_1,eps_2,eps_3,err_norm,sigma_trace")
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["scenario"] == "so3_gyro_clean"
    assert report["final_err"] < 1e-3
    assert not report["failed"]


def test_sim_accepts_bundled_name(tmp_path):
    assert main(["sim", "--scenario", "so3_gyro_clean", "--out", str(tmp_path)]) == 0


def test_sim_monte_carlo(tmp_path):
    scenario = str(bundled_scenario_path("so3_gyro_noisy"))
    assert main(["sim", "--scenario", scenario, "--out", str(tmp_path), "--runs", "2"]) == 0
    assert (tmp_path / "records_000.csv").exists()
    assert (tmp_path / "records_001.csv").exists()
    report = json.loads((tmp_path / "report.json").read_text())
    assert len(report["runs"]) == 2
    assert report["runs"][0]["seed"] == 42
    assert report["runs"][1]["seed"] == 43


def test_sim_byte_identical_records(tmp_path):
    scenario = str(bundled_scenario_path("so3_gyro_noisy"))
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(["sim", "--scenario", scenario, "--out", str(out1)]) == 0
    assert main(["sim", "--scenario", scenario, "--out", str(out2)]) == 0
    assert (out1 / "records.csv").read_bytes() == (out2 / "records.csv").read_bytes()
