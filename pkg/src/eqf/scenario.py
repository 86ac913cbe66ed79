"""Scenario configuration, synthetic truth generation and filter runs.

Scenario files are TOML with a fixed key set; unknown or missing keys are
hard errors so that a typo cannot silently fall back to defaults.  Ground
truth integrates the same exponential stepper the filter uses, which keeps
discretization bias out of the filter-error metrics.  Runs are fully
determined by the scenario seed.
"""

from __future__ import annotations

import json
import sys as _sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import NumericBlowupError, ScenarioError
from .filter import (
    FilterParams,
    FilterState,
    MeasurementModel,
    filter_step,
    record_error,
)
from .groups import GroupElement, compose, exp, identity
from .kinematics import KinematicSystem, lift
from .systems import get_entry, get_measurement, get_system

if _sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class InputSignal:
    """Per-component input signal: constant or sinusoid (frequency in Hz)."""

    kind: str
    value: np.ndarray | None = None
    amplitude: np.ndarray | None = None
    frequency: np.ndarray | None = None
    phase: np.ndarray | None = None

    def eval(self, t: float) -> np.ndarray:
        if self.kind == "constant":
            return self.value.copy()
        return self.amplitude * np.sin(2.0 * np.pi * self.frequency * t + self.phase)

    @property
    def dim(self) -> int:
        return len(self.value if self.kind == "constant" else self.amplitude)


@dataclass(frozen=True)
class FilterConfig:
    p_diag: np.ndarray
    q_diag: np.ndarray
    sigma0_diag: np.ndarray
    linearisation_mode: str
    riccati_form: str


@dataclass(frozen=True)
class Scenario:
    """Validated simulation configuration."""

    name: str
    group: str
    system_id: str
    system_params: dict
    duration: float
    dt: float
    seed: int
    init_error: np.ndarray
    input_signal: InputSignal
    input_noise_std: np.ndarray
    measurement_id: str
    measurement_params: dict
    meas_noise_std: np.ndarray
    filter_config: FilterConfig

    @property
    def steps(self) -> int:
        return int(round(self.duration / self.dt))

    def build_system(self) -> KinematicSystem:
        return get_system(self.system_id, **self.system_params)

    def build_measurement(self, system: KinematicSystem) -> MeasurementModel:
        return get_measurement(self.measurement_id, system.spec, self.measurement_params)

    def build_filter_params(self) -> FilterParams:
        fc = self.filter_config
        return FilterParams(
            P=np.diag(fc.p_diag),
            Q=np.diag(fc.q_diag),
            sigma0=np.diag(fc.sigma0_diag),
            linearisation_mode=fc.linearisation_mode,
            riccati_form=fc.riccati_form,
        )

    def with_seed(self, seed: int) -> "Scenario":
        from dataclasses import replace

        return replace(self, seed=int(seed))


@dataclass(frozen=True)
class Trajectory:
    """Ground truth states plus the noisy signals the filter receives."""

    times: np.ndarray
    states: tuple[GroupElement, ...]
    inputs: np.ndarray
    outputs: np.ndarray


@dataclass(frozen=True)
class RunReport:
    """Summary of one filter run."""

    rmse_tail: float
    final_err: float
    steps: int
    records: tuple
    wall_time: float
    failed: bool = False
    fail_reason: str | None = None

    def summary(self) -> dict:
        return {
            "rmse_tail": self.rmse_tail,
            "final_err": self.final_err,
            "steps": self.steps,
            "wall_time": self.wall_time,
            "failed": self.failed,
            "fail_reason": self.fail_reason,
        }


# ---------------------------------------------------------------------------
# loading and validation


def _check_keys(table: dict, required: set, optional: set, where: str):
    keys = set(table)
    unknown = keys - required - optional
    if unknown:
        raise ScenarioError(f"unknown key(s) in {where}: {sorted(unknown)}")
    missing = required - keys
    if missing:
        raise ScenarioError(f"missing key(s) in {where}: {sorted(missing)}")


def _vector(value, name: str) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float).reshape(-1)
    except (TypeError, ValueError):
        raise ScenarioError(f"{name} must be a list of numbers") from None
    return arr


_TOP_KEYS = {
    "group",
    "duration",
    "dt",
    "seed",
    "init_error",
    "input_noise_std",
    "meas_noise_std",
    "system",
    "input_signal",
    "measurement",
    "filter",
}
_FILTER_KEYS = {"p_diag", "q_diag", "sigma0_diag", "linearisation_mode", "riccati_form"}


def _parse_signal(table: dict) -> InputSignal:
    if "kind" not in table:
        raise ScenarioError("input_signal needs a 'kind'")
    kind = table["kind"]
    if kind == "constant":
        _check_keys(table, {"kind", "value"}, set(), "input_signal")
        return InputSignal(kind="constant", value=_vector(table["value"], "value"))
    if kind == "sinusoid":
        _check_keys(
            table, {"kind", "amplitude", "frequency", "phase"}, set(), "input_signal"
        )
        amp = _vector(table["amplitude"], "amplitude")
        freq = _vector(table["frequency"], "frequency")
        phase = _vector(table["phase"], "phase")
        if not (len(amp) == len(freq) == len(phase)):
            raise ScenarioError("amplitude, frequency and phase lengths differ")
        return InputSignal(kind="sinusoid", amplitude=amp, frequency=freq, phase=phase)
    raise ScenarioError(f"unknown input_signal kind {kind!r}")


def scenario_from_dict(data: dict, name: str) -> Scenario:
    """Validate a parsed scenario table and resolve it against the registries."""
    _check_keys(data, _TOP_KEYS, set(), "scenario")

    system_table = dict(data["system"])
    if "id" not in system_table:
        raise ScenarioError("system needs an 'id'")
    system_id = system_table.pop("id")
    entry = get_entry(system_id)
    _check_keys(system_table, set(), set(entry.params), "system")
    system = get_system(system_id, **system_table)

    meas_table = dict(data["measurement"])
    if "id" not in meas_table:
        raise ScenarioError("measurement needs an 'id'")
    measurement_id = meas_table.pop("id")
    model = get_measurement(measurement_id, system.spec, meas_table)

    group = str(data["group"]).lower()
    if group != system.spec.name:
        raise ScenarioError(
            f"scenario group {group!r} does not match system group {system.spec.name!r}"
        )

    dt = float(data["dt"])
    duration = float(data["duration"])
    if dt <= 0:
        raise ScenarioError("dt must be positive")
    if duration < dt:
        raise ScenarioError("duration must be at least dt")

    init_error = _vector(data["init_error"], "init_error")
    if len(init_error) != system.spec.algebra_dim:
        raise ScenarioError(
            f"init_error has length {len(init_error)}, expected {system.spec.algebra_dim}"
        )

    signal = _parse_signal(dict(data["input_signal"]))
    if signal.dim != system.input_dim:
        raise ScenarioError(
            f"input_signal has {signal.dim} components, system expects {system.input_dim}"
        )

    input_noise_std = _vector(data["input_noise_std"], "input_noise_std")
    if len(input_noise_std) != system.input_dim or np.any(input_noise_std < 0):
        raise ScenarioError("input_noise_std must be non-negative with one entry per input")
    meas_noise_std = _vector(data["meas_noise_std"], "meas_noise_std")
    if len(meas_noise_std) != model.m or np.any(meas_noise_std < 0):
        raise ScenarioError("meas_noise_std must be non-negative with one entry per output")

    filt = dict(data["filter"])
    _check_keys(filt, _FILTER_KEYS, set(), "filter")
    n = system.spec.algebra_dim
    p_diag = _vector(filt["p_diag"], "p_diag")
    q_diag = _vector(filt["q_diag"], "q_diag")
    sigma0_diag = _vector(filt["sigma0_diag"], "sigma0_diag")
    if len(p_diag) != n or len(sigma0_diag) != n:
        raise ScenarioError(f"p_diag and sigma0_diag must have length {n}")
    if len(q_diag) != model.m:
        raise ScenarioError(f"q_diag must have length {model.m}")
    for vec, label in ((p_diag, "p_diag"), (q_diag, "q_diag"), (sigma0_diag, "sigma0_diag")):
        if np.any(vec <= 0):
            raise ScenarioError(f"{label} entries must be positive")

    scenario = Scenario(
        name=name,
        group=group,
        system_id=system_id,
        system_params=system_table,
        duration=duration,
        dt=dt,
        seed=int(data["seed"]),
        init_error=init_error,
        input_signal=signal,
        input_noise_std=input_noise_std,
        measurement_id=measurement_id,
        measurement_params=meas_table,
        meas_noise_std=meas_noise_std,
        filter_config=FilterConfig(
            p_diag=p_diag,
            q_diag=q_diag,
            sigma0_diag=sigma0_diag,
            linearisation_mode=str(filt["linearisation_mode"]),
            riccati_form=str(filt["riccati_form"]),
        ),
    )
    scenario.build_filter_params()  # validates modes and positivity
    return scenario


def load_scenario(path) -> Scenario:
    path = Path(path)
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    return scenario_from_dict(data, name=path.stem)


def bundled_scenario_path(name: str) -> Path:
    """Path of a scenario shipped with the package (name without extension)."""
    from importlib.resources import files

    path = files("eqf").joinpath("scenarios", f"{name}.toml")
    return Path(str(path))


# ---------------------------------------------------------------------------
# simulation


def generate_truth(scenario: Scenario, rng: np.random.Generator) -> Trajectory:
    """Integrate the clean trajectory and sample noisy inputs and outputs.

    The filter receives the noisy signals; the truth itself integrates the
    clean input.
    """
    system = scenario.build_system()
    model = scenario.build_measurement(system)
    spec = system.spec
    steps = scenario.steps
    dt = scenario.dt
    input_noise = rng.standard_normal((steps, system.input_dim)) * scenario.input_noise_std
    output_noise = rng.standard_normal((steps, model.m)) * scenario.meas_noise_std
    states = [identity(spec)]
    inputs = np.empty((steps, system.input_dim))
    outputs = np.empty((steps, model.m))
    for k in range(steps):
        x = states[-1]
        v_clean = scenario.input_signal.eval(k * dt)
        inputs[k] = v_clean + input_noise[k]
        outputs[k] = model.h(x) + output_noise[k]
        states.append(compose(x, exp(spec, dt * lift(system, x, v_clean))))
    times = np.arange(steps + 1) * dt
    return Trajectory(times=times, states=tuple(states), inputs=inputs, outputs=outputs)


def run(scenario: Scenario) -> RunReport:
    """Simulate the scenario end to end and collect error records."""
    start = time.perf_counter()
    system = scenario.build_system()
    model = scenario.build_measurement(system)
    params = scenario.build_filter_params()
    spec = system.spec
    rng = np.random.default_rng(scenario.seed)
    traj = generate_truth(scenario, rng)
    xhat0 = compose(exp(spec, -scenario.init_error), traj.states[0])
    state = FilterState(xhat=xhat0, sigma=params.sigma0)
    records = []
    failed = False
    reason = None
    for k in range(scenario.steps):
        try:
            state = filter_step(
                state, system, model, traj.inputs[k], traj.outputs[k], scenario.dt, params
            )
        except NumericBlowupError as err:
            failed = True
            reason = f"step {k}: {err}"
            break
        records.append(record_error(traj.states[k + 1], state))
    err_norms = np.array([r.err_norm for r in records]) if records else np.array([np.nan])
    tail = err_norms[len(err_norms) // 2 :]
    return RunReport(
        rmse_tail=float(np.sqrt(np.mean(tail**2))),
        final_err=float(err_norms[-1]),
        steps=len(records),
        records=tuple(records),
        wall_time=time.perf_counter() - start,
        failed=failed,
        fail_reason=reason,
    )


# ---------------------------------------------------------------------------
# output files


def write_records_csv(report: RunReport, path):
    """Fixed-schema CSV: t, eps_1..eps_n, err_norm, sigma_trace; %.12g values."""
    if not report.records:
        raise ScenarioError("no records to write")
    n = len(report.records[0].eps)
    header = "t," + ",".join(f"eps_{i + 1}" for i in range(n)) + ",err_norm,sigma_trace"
    lines = [header]
    for rec in report.records:
        fields = [format(rec.t, ".12g")]
        fields.extend(format(x, ".12g") for x in rec.eps)
        fields.append(format(rec.err_norm, ".12g"))
        fields.append(format(rec.sigma_trace, ".12g"))
        lines.append(",".join(fields))
    Path(path).write_text("\n".join(lines) + "\n")


def write_report_json(report: RunReport, scenario: Scenario, path):
    payload = {"scenario": scenario.name, "seed": scenario.seed, **report.summary()}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")
