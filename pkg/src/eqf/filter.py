"""Equivariant filter: error coordinates, linearisations, Riccati, stepping.

The observer state lives on the group; the gain matrix evolves through a
continuous-time Riccati equation discretized with one RK4 step per filter
step.  State propagation uses a first-order Lie-Trotter split with exact
exponentials of the correction and dynamics terms, so the group constraint
is preserved per factor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import (
    InvalidElementError,
    MissingDerivativeError,
    NumericBlowupError,
    SpecMismatchError,
)
from .groups import (
    GroupElement,
    adjoint_matrix,
    compose,
    exp,
    identity,
    inverse,
    log,
    project_to_group,
)
from .kinematics import KinematicSystem, lift

RICCATI_FORMS = ("kalman_bucy", "as_printed")
LINEARISATION_MODES = ("analytic", "finite_difference")


@dataclass(frozen=True)
class MeasurementModel:
    """Vector-valued measurement of the group state: y = h(X) in R^m.

    ``analytic_dh``, when present, maps ``(X, delta)`` to the derivative of
    ``h`` at ``X`` along the tangent direction ``wedge(delta) @ X``.
    """

    h: Callable[[GroupElement], np.ndarray]
    m: int
    analytic_dh: Callable[[GroupElement, np.ndarray], np.ndarray] | None = None


def _check_spd(name: str, mat: np.ndarray, dim: int | None = None):
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError(f"{name} must be square")
    if dim is not None and mat.shape[0] != dim:
        raise ValueError(f"{name} must be {dim}x{dim}")
    if np.abs(mat - mat.T).max() > 1e-9:
        raise ValueError(f"{name} must be symmetric")
    if np.linalg.eigvalsh(mat).min() <= 0:
        raise ValueError(f"{name} must be positive definite")
    return mat


@dataclass(frozen=True)
class FilterParams:
    """Noise matrices and numerical options for the filter."""

    P: np.ndarray
    Q: np.ndarray
    sigma0: np.ndarray
    linearisation_mode: str = "analytic"
    fd_step: float = 1e-5
    sigma_floor: float = 1e-12
    riccati_form: str = "kalman_bucy"
    k_proj: int = 100
    ga_shortcut: bool = False

    def __post_init__(self):
        object.__setattr__(self, "P", _check_spd("P", self.P))
        object.__setattr__(self, "Q", _check_spd("Q", self.Q))
        object.__setattr__(self, "sigma0", _check_spd("sigma0", self.sigma0))
        if self.linearisation_mode not in LINEARISATION_MODES:
            raise ValueError(f"unknown linearisation mode {self.linearisation_mode!r}")
        if self.riccati_form not in RICCATI_FORMS:
            raise ValueError(f"unknown riccati form {self.riccati_form!r}")
        if self.fd_step <= 0:
            raise ValueError("fd_step must be positive")


@dataclass(frozen=True)
class FilterState:
    """Observer state on the group plus its Riccati matrix."""

    xhat: GroupElement
    sigma: np.ndarray
    t: float = 0.0
    step: int = 0

    def __post_init__(self):
        s = np.array(self.sigma, dtype=float)
        s.flags.writeable = False
        object.__setattr__(self, "sigma", s)


@dataclass(frozen=True)
class ErrorRecord:
    """Error coordinates of truth vs estimate at one time instant."""

    t: float
    eps: np.ndarray
    err_norm: float
    sigma_trace: float


def error(x: GroupElement, xhat: GroupElement) -> GroupElement:
    """Canonical state error X Xhat^-1."""
    if x.spec != xhat.spec:
        raise SpecMismatchError("truth and estimate on different groups")
    return compose(x, inverse(xhat))


def record_error(x: GroupElement, state: FilterState) -> ErrorRecord:
    eps = log(error(x, state.xhat))
    return ErrorRecord(
        t=state.t,
        eps=eps,
        err_norm=float(np.linalg.norm(eps)),
        sigma_trace=float(np.trace(state.sigma)),
    )


def a_matrix(
    sys: KinematicSystem, xhat: GroupElement, v, params: FilterParams
) -> np.ndarray:
    """State matrix of the linearised error dynamics at the current estimate.

    Column i is ``Ad(Xhat)`` applied to the directional derivative of the
    lift of ``v`` at ``Xhat`` along ``wedge(e_i) @ Xhat``.  This realizes the
    error-dynamics linearisation for any kinematic system without requiring
    an explicit input action.
    """
    spec = sys.spec
    n = spec.algebra_dim
    ad_xhat = adjoint_matrix(xhat)
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.shape != (sys.input_dim,):
        raise SpecMismatchError(
            f"input has length {v.shape[0]}, system expects {sys.input_dim}"
        )
    cols = []
    if params.linearisation_mode == "analytic":
        if sys.lift_map.analytic_dx is None:
            raise MissingDerivativeError(
                f"system {sys.label or '?'} has no analytic lift derivative"
            )
        for e in np.eye(n):
            cols.append(ad_xhat @ sys.lift_map.analytic_dx(xhat, v, e))
    else:
        s = params.fd_step
        for e in np.eye(n):
            xp = compose(exp(spec, s * e), xhat)
            xm = compose(exp(spec, -s * e), xhat)
            dlam = (lift(sys, xp, v) - lift(sys, xm, v)) / (2.0 * s)
            cols.append(ad_xhat @ dlam)
    return np.column_stack(cols)


def ga_a_matrix(sys: KinematicSystem, v, params: FilterParams) -> np.ndarray:
    """State matrix evaluated at the identity: the group-affine shortcut.

    For a group-affine system this coincides with ``a_matrix`` at every
    estimate; any mismatch signals a violated precondition.
    """
    return a_matrix(sys, identity(sys.spec), v, params)


def c_matrix(
    model: MeasurementModel, xhat: GroupElement, params: FilterParams
) -> np.ndarray:
    """Output matrix: column i is the derivative of h along exp(s e_i) Xhat."""
    spec = xhat.spec
    n = spec.algebra_dim
    cols = []
    if params.linearisation_mode == "analytic":
        if model.analytic_dh is None:
            raise MissingDerivativeError("measurement model has no analytic derivative")
        for e in np.eye(n):
            cols.append(np.asarray(model.analytic_dh(xhat, e), dtype=float).reshape(-1))
    else:
        s = params.fd_step
        for e in np.eye(n):
            yp = np.asarray(model.h(compose(exp(spec, s * e), xhat)), dtype=float)
            ym = np.asarray(model.h(compose(exp(spec, -s * e), xhat)), dtype=float)
            cols.append((yp - ym).reshape(-1) / (2.0 * s))
    return np.column_stack(cols)


def correction(sigma: np.ndarray, c: np.ndarray, q: np.ndarray, innovation) -> np.ndarray:
    """Algebra-coordinate correction Sigma C^T Q^-1 (y - h(Xhat))."""
    innovation = np.asarray(innovation, dtype=float).reshape(-1)
    return sigma @ c.T @ np.linalg.solve(q, innovation)


def _apply_floor(sigma: np.ndarray, floor: float) -> np.ndarray:
    # Gershgorin lower bound: cheap sufficient condition for eigs >= floor
    diag = np.diag(sigma)
    radii = np.abs(sigma).sum(axis=1) - np.abs(diag)
    if np.min(diag - radii) >= floor:
        return sigma
    try:
        np.linalg.cholesky(sigma - floor * np.eye(sigma.shape[0]))
        return sigma
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(sigma)
        vals = np.maximum(vals, floor)
        out = (vecs * vals) @ vecs.T
        return 0.5 * (out + out.T)


def riccati_step(
    sigma: np.ndarray,
    a: np.ndarray,
    c: np.ndarray,
    p: np.ndarray,
    q: np.ndarray,
    dt: float,
    form: str = "kalman_bucy",
    sigma_floor: float = 1e-12,
) -> np.ndarray:
    """One RK4 step of the Riccati flow, then symmetrize and floor.

    The default form is the standard Kalman-Bucy equation
    ``dSigma = A Sigma + Sigma A^T + P - Sigma C^T Q^-1 C Sigma``; the
    "as_printed" variant ``dSigma = Sigma A + A^T Sigma + P - Sigma C^T Q C Sigma``
    is kept behind the flag for comparison.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if form not in RICCATI_FORMS:
        raise ValueError(f"unknown riccati form {form!r}")
    if form == "kalman_bucy":
        s = c.T @ np.linalg.solve(q, c)

        def rhs(sig):
            return a @ sig + sig @ a.T + p - sig @ s @ sig

    else:
        s = c.T @ q @ c

        def rhs(sig):
            return sig @ a + a.T @ sig + p - sig @ s @ sig

    k1 = rhs(sigma)
    k2 = rhs(sigma + 0.5 * dt * k1)
    k3 = rhs(sigma + 0.5 * dt * k2)
    k4 = rhs(sigma + dt * k3)
    out = sigma + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    out = 0.5 * (out + out.T)
    if not np.all(np.isfinite(out)):
        raise NumericBlowupError("Riccati step produced non-finite values")
    return _apply_floor(out, sigma_floor)


def filter_step(
    state: FilterState,
    sys: KinematicSystem,
    model: MeasurementModel,
    v,
    y,
    dt: float,
    params: FilterParams,
) -> FilterState:
    """Advance the filter by one step of length dt.

    Updates the estimate with exact exponentials of the correction term and
    the system dynamics (Lie-Trotter split, correction on the left per the
    right-translated placement of the correction), then propagates the
    Riccati matrix.  The estimate is re-projected onto the group every
    ``params.k_proj`` steps.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    spec = sys.spec
    xhat = state.xhat
    if params.ga_shortcut:
        a = ga_a_matrix(sys, v, params)
    else:
        a = a_matrix(sys, xhat, v, params)
    c = c_matrix(model, xhat, params)
    innovation = np.asarray(y, dtype=float).reshape(-1) - np.asarray(
        model.h(xhat), dtype=float
    ).reshape(-1)
    delta = correction(state.sigma, c, params.Q, innovation)
    lam = lift(sys, xhat, v)
    if not (
        np.isfinite(np.linalg.norm(delta)) and np.isfinite(np.linalg.norm(lam))
    ):
        raise NumericBlowupError("non-finite correction or lift")
    try:
        xhat_new = compose(exp(spec, dt * delta), compose(xhat, exp(spec, dt * lam)))
    except (ValueError, FloatingPointError, InvalidElementError) as err:
        raise NumericBlowupError(f"state update failed: {err}") from err
    sigma_new = riccati_step(
        state.sigma,
        a,
        c,
        params.P,
        params.Q,
        dt,
        form=params.riccati_form,
        sigma_floor=params.sigma_floor,
    )
    step = state.step + 1
    if params.k_proj > 0 and step % params.k_proj == 0:
        xhat_new = project_to_group(spec, xhat_new.matrix)
    return FilterState(xhat=xhat_new, sigma=sigma_new, t=state.t + dt, step=step)
