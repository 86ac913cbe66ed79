"""Registry of built-in kinematic systems and measurement models.

Each system entry carries the lift, an analytic lift derivative, the input
action where one exists in closed form, and the classification flags the
system is constructed to satisfy (used as oracles by the test suite and the
CLI).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ScenarioError, UnknownSystemError
from .filter import MeasurementModel
from .groups import GroupElement, GroupSpec, adjoint_matrix, inverse, rn, se3, so3
from .kinematics import KinematicSystem, LiftMap


@dataclass(frozen=True)
class SystemEntry:
    """Registry record: builder plus declared classification flags."""

    label: str
    doc: str
    group: str
    params: tuple[str, ...]
    build: Callable[..., KinematicSystem]
    expected: dict


def _zero_dx(dim: int):
    def dx(x, v, delta):
        return np.zeros(dim)

    return dx


def _build_so3_left() -> KinematicSystem:
    spec = so3()
    lm = LiftMap(eval=lambda x: np.eye(3), analytic_dx=_zero_dx(3))
    return KinematicSystem(
        spec, 3, lm, input_action=lambda a: a.matrix.T, label="so3_left"
    )


def _build_so3_right() -> KinematicSystem:
    spec = so3()

    def dx(x, v, delta):
        return -x.matrix.T @ np.cross(delta, v)

    lm = LiftMap(eval=lambda x: x.matrix.T, analytic_dx=dx)
    return KinematicSystem(
        spec, 3, lm, input_action=lambda a: np.eye(3), label="so3_right"
    )


def _build_so3_dual() -> KinematicSystem:
    spec = so3()

    def action(a):
        out = np.eye(6)
        out[:3, :3] = a.matrix.T
        return out

    def dx(x, v, delta):
        return -x.matrix.T @ np.cross(delta, v[3:])

    lm = LiftMap(
        eval=lambda x: np.hstack([np.eye(3), x.matrix.T]), analytic_dx=dx
    )
    return KinematicSystem(spec, 6, lm, input_action=action, label="so3_dual")


def _build_so3_single_axis() -> KinematicSystem:
    spec = so3()
    col = np.array([[1.0], [0.0], [0.0]])
    lm = LiftMap(eval=lambda x: col, analytic_dx=_zero_dx(3))
    return KinematicSystem(spec, 1, lm, input_action=None, label="so3_single_axis")


def _build_rn_integrator(n: int = 3) -> KinematicSystem:
    spec = rn(int(n))
    lm = LiftMap(eval=lambda x: np.eye(spec.algebra_dim), analytic_dx=_zero_dx(spec.algebra_dim))
    return KinematicSystem(
        spec,
        spec.algebra_dim,
        lm,
        input_action=lambda a: np.eye(spec.algebra_dim),
        label="rn_integrator",
    )


def _build_se3_body() -> KinematicSystem:
    spec = se3()
    lm = LiftMap(eval=lambda x: np.eye(6), analytic_dx=_zero_dx(6))
    return KinematicSystem(
        spec,
        6,
        lm,
        input_action=lambda a: adjoint_matrix(inverse(a)),
        label="se3_body",
    )


def _build_so3_curved(alpha: float = 0.1) -> KinematicSystem:
    spec = so3()
    alpha = float(alpha)

    def dx(x, v, delta):
        return alpha * np.cross(delta, x.matrix @ v)

    lm = LiftMap(eval=lambda x: np.eye(3) + alpha * x.matrix, analytic_dx=dx)
    return KinematicSystem(spec, 3, lm, input_action=None, label="so3_curved")


def _flags(left=False, right=False, bi=False, dual=False, group_affine=False, equivariant=False):
    return {
        "left": left,
        "right": right,
        "bi": bi,
        "dual": dual,
        "group_affine": group_affine,
        "equivariant": equivariant,
    }


_REGISTRY: dict[str, SystemEntry] = {}


def _register(entry: SystemEntry):
    _REGISTRY[entry.label] = entry


_register(
    SystemEntry(
        "so3_left",
        "body-frame angular velocity on SO(3); constant lift",
        "so3",
        (),
        _build_so3_left,
        _flags(left=True, group_affine=True, equivariant=True),
    )
)
_register(
    SystemEntry(
        "so3_right",
        "reference-frame angular velocity on SO(3); lift transforms by the adjoint",
        "so3",
        (),
        _build_so3_right,
        _flags(right=True, group_affine=True, equivariant=True),
    )
)
_register(
    SystemEntry(
        "so3_dual",
        "both body- and reference-frame angular velocity inputs on SO(3)",
        "so3",
        (),
        _build_so3_dual,
        _flags(dual=True, group_affine=True, equivariant=True),
    )
)
_register(
    SystemEntry(
        "so3_single_axis",
        "single body-frame rate about axis 1 on SO(3)",
        "so3",
        (),
        _build_so3_single_axis,
        _flags(left=True, group_affine=True),
    )
)
_register(
    SystemEntry(
        "rn_integrator",
        "velocity integrator on R^n (abelian)",
        "r3",
        ("n",),
        _build_rn_integrator,
        _flags(left=True, right=True, bi=True, dual=True, group_affine=True, equivariant=True),
    )
)
_register(
    SystemEntry(
        "se3_body",
        "body-frame twist (angular, linear) on SE(3); constant lift",
        "se3",
        (),
        _build_se3_body,
        _flags(left=True, group_affine=True, equivariant=True),
    )
)
_register(
    SystemEntry(
        "so3_curved",
        "state-warped lift I + alpha*X on SO(3); neither invariant nor group affine",
        "so3",
        ("alpha",),
        _build_so3_curved,
        _flags(),
    )
)


def registry() -> list[SystemEntry]:
    """All built-in systems, in registration order."""
    return list(_REGISTRY.values())


def get_entry(label: str) -> SystemEntry:
    try:
        return _REGISTRY[label]
    except KeyError:
        known = ", ".join(sorted(_REGISTRY))
        raise UnknownSystemError(f"unknown system {label!r} (known: {known})") from None


def get_system(label: str, **params) -> KinematicSystem:
    """Instantiate a registry system, validating parameter names."""
    entry = get_entry(label)
    unknown = set(params) - set(entry.params)
    if unknown:
        raise UnknownSystemError(
            f"system {label!r} takes no parameter(s) {sorted(unknown)}"
        )
    return entry.build(**params)


# ---------------------------------------------------------------------------
# measurement models


def direction_measurement(directions) -> MeasurementModel:
    """Body-frame observations of fixed reference directions on SO(3)."""
    dirs = [np.asarray(d, dtype=float).reshape(3) for d in directions]
    if not dirs:
        raise ScenarioError("direction measurement needs at least one direction")

    def h(x: GroupElement) -> np.ndarray:
        return np.concatenate([x.matrix.T @ d for d in dirs])

    def dh(x: GroupElement, delta) -> np.ndarray:
        return np.concatenate([x.matrix.T @ np.cross(d, delta) for d in dirs])

    return MeasurementModel(h=h, m=3 * len(dirs), analytic_dh=dh)


def landmark_measurement(points) -> MeasurementModel:
    """Body-frame positions of fixed reference landmarks on SE(3)."""
    pts = [np.asarray(q, dtype=float).reshape(3) for q in points]
    if not pts:
        raise ScenarioError("landmark measurement needs at least one point")

    def h(x: GroupElement) -> np.ndarray:
        r = x.matrix[:3, :3]
        t = x.matrix[:3, 3]
        return np.concatenate([r.T @ (q - t) for q in pts])

    def dh(x: GroupElement, delta) -> np.ndarray:
        r = x.matrix[:3, :3]
        omega = np.asarray(delta, dtype=float)[:3]
        u = np.asarray(delta, dtype=float)[3:]
        return np.concatenate([r.T @ (np.cross(q, omega) - u) for q in pts])

    return MeasurementModel(h=h, m=3 * len(pts), analytic_dh=dh)


def position_measurement(n: int) -> MeasurementModel:
    """Direct observation of the translation vector on R^n."""
    n = int(n)

    def h(x: GroupElement) -> np.ndarray:
        return x.matrix[:n, n].copy()

    def dh(x: GroupElement, delta) -> np.ndarray:
        return np.asarray(delta, dtype=float).copy()

    return MeasurementModel(h=h, m=n, analytic_dh=dh)


def get_measurement(model_id: str, spec: GroupSpec, params: dict) -> MeasurementModel:
    """Build a measurement model for a scenario by id."""
    if model_id == "directions":
        if spec.name != "so3":
            raise ScenarioError("directions measurement requires the so3 group")
        if set(params) != {"directions"}:
            raise ScenarioError("directions measurement takes exactly 'directions'")
        return direction_measurement(params["directions"])
    if model_id == "landmarks":
        if spec.name != "se3":
            raise ScenarioError("landmarks measurement requires the se3 group")
        if set(params) != {"points"}:
            raise ScenarioError("landmarks measurement takes exactly 'points'")
        return landmark_measurement(params["points"])
    if model_id == "position":
        if spec.family != "rn":
            raise ScenarioError("position measurement requires an r^n group")
        if params:
            raise ScenarioError("position measurement takes no parameters")
        return position_measurement(spec.algebra_dim)
    raise ScenarioError(f"unknown measurement model {model_id!r}")
