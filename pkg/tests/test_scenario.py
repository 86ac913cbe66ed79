import math

import numpy as np
import pytest

from eqf.errors import ScenarioError
from eqf.groups import exp, so3
from eqf.scenario import (
    InputSignal,
    bundled_scenario_path,
    generate_truth,
    load_scenario,
    run,
    scenario_from_dict,
    write_records_csv,
)

BUNDLED = ["so3_gyro_clean", "so3_gyro_noisy", "so3_curved", "se3_body"]


def base_config(**overrides):
    cfg = {
        "group": "so3",
        "duration": 1.0,
        "dt": 0.01,
        "seed": 7,
        "init_error": [0.0, 0.0, 0.0],
        "input_noise_std": [0.0, 0.0, 0.0],
        "meas_noise_std": [0.0, 0.0, 0.0],
        "system": {"id": "so3_left"},
        "input_signal": {"kind": "constant", "value": [0.0, 0.0, 0.0]},
        "measurement": {"id": "directions", "directions": [[0.0, 0.0, 1.0]]},
        "filter": {
            "p_diag": [1e-12, 1e-12, 1e-12],
            "q_diag": [0.01, 0.01, 0.01],
            "sigma0_diag": [1.0, 1.0, 1.0],
            "linearisation_mode": "analytic",
            "riccati_form": "kalman_bucy",
        },
    }
    cfg.update(overrides)
    return cfg


# ---------------------------------------------------------------------------
# loading and validation


@pytest.mark.parametrize("name", BUNDLED)
def test_bundled_scenarios_load(name):
    sc = load_scenario(bundled_scenario_path(name))
    assert sc.name == name
    assert sc.steps == 1000
    assert sc.seed == 42


def test_unknown_top_level_key_rejected():
    with pytest.raises(ScenarioError, match="unknown key"):
        scenario_from_dict(base_config(typo_key=1), "t")


def test_missing_key_rejected():
    cfg = base_config()
    del cfg["seed"]
    with pytest.raises(ScenarioError, match="missing key"):
        scenario_from_dict(cfg, "t")


def test_unknown_filter_key_rejected():
    cfg = base_config()
    cfg["filter"]["extra"] = 1.0
    with pytest.raises(ScenarioError, match="unknown key"):
        scenario_from_dict(cfg, "t")


def test_unknown_system_param_rejected():
    cfg = base_config()
    cfg["system"]["alpha"] = 0.5
    with pytest.raises(ScenarioError, match="unknown key"):
        scenario_from_dict(cfg, "t")


def test_group_system_mismatch_rejected():
    with pytest.raises(ScenarioError, match="does not match"):
        scenario_from_dict(base_config(group="se3"), "t")


def test_bad_dt_rejected():
    with pytest.raises(ScenarioError, match="dt"):
        scenario_from_dict(base_config(dt=0.0), "t")
    with pytest.raises(ScenarioError, match="duration"):
        scenario_from_dict(base_config(duration=0.001), "t")


def test_negative_noise_rejected():
    with pytest.raises(ScenarioError):
        scenario_from_dict(base_config(input_noise_std=[-0.1, 0.0, 0.0]), "t")


def test_wrong_init_error_length_rejected():
    with pytest.raises(ScenarioError, match="init_error"):
        scenario_from_dict(base_config(init_error=[0.0, 0.0]), "t")


def test_nonpositive_diag_rejected():
    cfg = base_config()
    cfg["filter"]["q_diag"] = [0.0, 0.01, 0.01]
    with pytest.raises(ScenarioError, match="q_diag"):
        scenario_from_dict(cfg, "t")


def test_signal_kinds():
    sig = InputSignal(kind="constant", value=np.array([1.0, 2.0]))
    np.testing.assert_array_equal(sig.eval(3.0), [1.0, 2.0])
    sig = InputSignal(
        kind="sinusoid",
        amplitude=np.array([2.0]),
        frequency=np.array([0.25]),
        phase=np.array([0.0]),
    )
    assert abs(sig.eval(1.0)[0] - 2.0) < 1e-12
    with pytest.raises(ScenarioError):
        scenario_from_dict(
            base_config(input_signal={"kind": "square", "value": [0.0, 0.0, 0.0]}), "t"
        )


# ---------------------------------------------------------------------------
# truth generation


def test_zero_input_zero_noise_constant_trajectory():
    sc = scenario_from_dict(base_config(), "t")
    traj = generate_truth(sc, np.random.default_rng(sc.seed))
    for state in traj.states:
        np.testing.assert_array_equal(state.matrix, np.eye(3))
    assert np.all(traj.inputs == 0.0)


def test_constant_rate_geodesic_oracle():
    cfg = base_config(
        duration=math.pi,
        dt=1e-4,
        input_signal={"kind": "constant", "value": [0.0, 0.0, 1.0]},
    )
    sc = scenario_from_dict(cfg, "t")
    traj = generate_truth(sc, np.random.default_rng(0))
    target = exp(so3(), [0.0, 0.0, math.pi]).matrix
    final = traj.states[-1].matrix
    rel = final @ target.T
    angle = math.acos(min(1.0, max(-1.0, 0.5 * (np.trace(rel) - 1.0))))
    assert angle < 1e-3


def test_truth_deterministic_given_seed():
    sc = load_scenario(bundled_scenario_path("so3_gyro_noisy"))
    t1 = generate_truth(sc, np.random.default_rng(sc.seed))
    t2 = generate_truth(sc, np.random.default_rng(sc.seed))
    assert np.array_equal(t1.inputs, t2.inputs)
    assert np.array_equal(t1.outputs, t2.outputs)
    for a, b in zip(t1.states, t2.states):
        assert np.array_equal(a.matrix, b.matrix)


# ---------------------------------------------------------------------------
# runs


def test_run_starts_converged_with_zero_init_error():
    sc = scenario_from_dict(base_config(), "t")
    report = run(sc)
    assert not report.failed
    assert report.rmse_tail < 1e-6


def test_run_report_tail_definition():
    sc = load_scenario(bundled_scenario_path("so3_gyro_clean"))
    report = run(sc)
    errs = np.array([r.err_norm for r in report.records])
    tail = errs[len(errs) // 2 :]
    assert abs(report.rmse_tail - math.sqrt(np.mean(tail**2))) < 1e-15
    assert report.final_err == errs[-1]
    assert report.steps == len(report.records)


def test_records_csv_round_trip(tmp_path):
    sc = load_scenario(bundled_scenario_path("so3_gyro_noisy"))
    report = run(sc)
    path = tmp_path / "records.csv"
    write_records_csv(report, path)
    lines = path.read_text().strip().split("\n")
    assert lines[0] == "t,eps_1,eps_2,eps_3,err_norm,sigma_trace"
    assert len(lines) == 1 + report.steps
    data = np.array([[float(x) for x in line.split(",")] for line in lines[1:]])
    errs = data[:, 4]
    rmse = math.sqrt(np.mean(errs[len(errs) // 2 :] ** 2))
    assert abs(rmse - report.rmse_tail) < 1e-9


def test_runs_reproducible(tmp_path):
    sc = load_scenario(bundled_scenario_path("so3_gyro_noisy"))
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_records_csv(run(sc), p1)
    write_records_csv(run(sc), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_with_seed_changes_noise():
    sc = load_scenario(bundled_scenario_path("so3_gyro_noisy"))
    r1 = run(sc)
    r2 = run(sc.with_seed(43))
    e1 = np.array([r.err_norm for r in r1.records])
    e2 = np.array([r.err_norm for r in r2.records])
    assert not np.array_equal(e1, e2)
