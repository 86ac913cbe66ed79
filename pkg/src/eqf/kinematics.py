"""Kinematic systems on Lie groups represented through their lifts.

A system is stored as a state-dependent matrix ``L(X)`` of shape (n, p): the
body-frame velocity of the vector field for input ``v`` is ``wedge(L(X) @ v)``,
which makes linearity in the input structural.  The module also provides the
right-translation action on vector fields, the induced action on inputs, a
sampled equivariance check, and finite formal combinations of translated
fields (the input-extension representation).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import MissingActionError, SpecMismatchError
from .groups import (
    GroupElement,
    GroupSpec,
    adjoint_matrix,
    compose,
    identity,
    inverse,
    random_element,
    wedge,
)

Field = Callable[[GroupElement], np.ndarray]


@dataclass(frozen=True)
class LiftMap:
    """State-dependent lift matrix of a kinematic system.

    ``eval(X)`` returns the (n, p) matrix ``L(X)``; the lift of input ``v``
    at ``X`` is ``L(X) @ v`` in algebra coordinates.  ``analytic_dx``, when
    present, maps ``(X, v, delta)`` to the directional derivative of the
    lift of ``v`` at ``X`` along the tangent direction ``wedge(delta) @ X``,
    again in algebra coordinates.
    """

    eval: Callable[[GroupElement], np.ndarray]
    analytic_dx: Callable[[GroupElement, np.ndarray, np.ndarray], np.ndarray] | None = None


@dataclass(frozen=True)
class KinematicSystem:
    """A kinematic system: group, input dimension, lift, optional input action.

    ``input_action``, when declared, maps a group element ``A`` to the
    (p, p) matrix of the induced action on inputs, with the right-action
    law ``psi(A) @ psi(B) == psi(B A)``.
    """

    spec: GroupSpec
    input_dim: int
    lift_map: LiftMap
    input_action: Callable[[GroupElement], np.ndarray] | None = None
    label: str = ""


@dataclass(frozen=True)
class CheckReport:
    """Outcome of a sampled identity check."""

    passed: bool
    max_residual: float
    witness: tuple | None


def _check_state(sys: KinematicSystem, x: GroupElement):
    if x.spec != sys.spec:
        raise SpecMismatchError(
            f"state on {x.spec.name} but system {sys.label or '?'} lives on {sys.spec.name}"
        )


def _check_input(sys: KinematicSystem, v) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape != (sys.input_dim,):
        raise SpecMismatchError(
            f"input has length {v.shape[0]}, system expects {sys.input_dim}"
        )
    return v


def lift(sys: KinematicSystem, x: GroupElement, v) -> np.ndarray:
    """Body-frame velocity L(X) @ v in algebra coordinates."""
    _check_state(sys, x)
    v = _check_input(sys, v)
    return sys.lift_map.eval(x) @ v


def system_field(sys: KinematicSystem, x: GroupElement, v) -> np.ndarray:
    """Vector field value at X as an embedding-space matrix: X wedge(L(X) v)."""
    return x.matrix @ wedge(sys.spec, lift(sys, x, v))


def dstar_translate(a: GroupElement, field: Field) -> Field:
    """Right-translation action on an arbitrary vector field.

    Returns the field ``X -> field(X A^-1) A``.
    """
    a_inv = inverse(a)

    def translated(x: GroupElement) -> np.ndarray:
        return field(compose(x, a_inv)) @ a.matrix

    return translated


def apply_dstar_R(a: GroupElement, sys: KinematicSystem, v) -> Field:
    """Right-translation action applied to the system field of input v.

    The lift of the returned field at ``X`` is
    ``Ad(A^-1) @ L(X A^-1) @ v``.
    """
    v = _check_input(sys, v)
    return dstar_translate(a, lambda x: system_field(sys, x, v))


@dataclass(frozen=True)
class FormalInput:
    """Finite formal combination sum_i c_i * (translate by A_i of input v_i).

    Terms are kept as given; no merging or canonicalization happens here.
    The empty combination is the zero element.
    """

    terms: tuple[tuple[float, GroupElement, np.ndarray], ...]
    base_system: KinematicSystem

    def __post_init__(self):
        clean = []
        for c, a, v in self.terms:
            if a.spec != self.base_system.spec:
                raise SpecMismatchError("formal term on a different group")
            v = _check_input(self.base_system, v).copy()
            v.flags.writeable = False
            clean.append((float(c), a, v))
        object.__setattr__(self, "terms", tuple(clean))


def formal_lift(w: FormalInput, x: GroupElement) -> np.ndarray:
    """Lift of the extended-system field represented by ``w`` at state ``x``."""
    sys = w.base_system
    _check_state(sys, x)
    out = np.zeros(sys.spec.algebra_dim)
    for c, a, v in w.terms:
        a_inv = inverse(a)
        out += c * adjoint_matrix(a_inv) @ (sys.lift_map.eval(compose(x, a_inv)) @ v)
    return out


def formal_action(b: GroupElement, w: FormalInput) -> FormalInput:
    """Exact induced action on a formal input: each term (c, A, v) -> (c, A B, v)."""
    return FormalInput(
        tuple((c, compose(a, b), v) for c, a, v in w.terms), w.base_system
    )


def check_equivariance(
    sys: KinematicSystem,
    sample_count: int = 50,
    tol: float = 1e-8,
    seed: int = 42,
    scale: float = 1.0,
) -> CheckReport:
    """Sampled test of the lift-equivariance identity for the declared action.

    Evaluates ``Ad(A) L(X A) psi(A) v - L(X) v`` over random pairs (A, X)
    and all basis inputs v; passes when the worst residual stays below tol.
    """
    if sys.input_action is None:
        raise MissingActionError(
            f"system {sys.label or '?'} declares no input action"
        )
    rng = np.random.default_rng(seed)
    worst = 0.0
    witness = None
    basis = np.eye(sys.input_dim)
    for _ in range(sample_count):
        a = random_element(sys.spec, rng, scale)
        x = random_element(sys.spec, rng, scale)
        xa = compose(x, a)
        m = adjoint_matrix(a) @ sys.lift_map.eval(xa) @ sys.input_action(a)
        m = m - sys.lift_map.eval(x)
        norms = np.linalg.norm(m, axis=0)
        j = int(np.argmax(norms))
        if norms[j] > worst:
            worst = float(norms[j])
            witness = (a, x, basis[j].copy())
    return CheckReport(passed=worst < tol, max_residual=worst, witness=witness)


def check_injectivity(
    sys: KinematicSystem, states: int = 5, seed: int = 42, scale: float = 1.0
) -> bool:
    """True when the stacked lift matrices over random states have full column rank.

    Encodes the standing assumption that no nonzero input produces the zero
    vector field.
    """
    rng = np.random.default_rng(seed)
    stack = np.vstack(
        [sys.lift_map.eval(random_element(sys.spec, rng, scale)) for _ in range(states)]
    )
    return int(np.linalg.matrix_rank(stack)) == sys.input_dim
