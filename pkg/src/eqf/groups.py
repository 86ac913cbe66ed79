"""Matrix Lie group arithmetic for SO(2), SO(3), SE(3) and R^n.

Coordinate conventions, fixed once for the whole package:

* so(2): single generator ``[[0, -1], [1, 0]]``.
* so(3): the standard skew basis (rotation generators about axes 1, 2, 3),
  so ``wedge(u) @ w == np.cross(u, w)``.  ``wedge((1, 0, 0))`` carries +1 in
  the (3, 2) entry and -1 in the (2, 3) entry (1-indexed).
* se(3): coordinates ordered (angular, linear).  Elements are 4x4
  homogeneous matrices with the rotation block top-left.
* R^n: represented as (n+1)x(n+1) homogeneous matrices ``[[I, x], [0, 1]]``
  so every shipped group flows through the same matrix code path.

Values (`GroupSpec`, `GroupElement`, `AlgebraVector`) are immutable and all
operations are pure functions, safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import InitVar, dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.linalg

from .errors import (
    CutLocusError,
    InvalidElementError,
    NotInAlgebraError,
    ProjectionFailedError,
    SpecMismatchError,
)

# Group-membership tolerance. Double-precision drift over 1e4-1e6 composed
# operations stays well inside this; override per call where needed.
MEMBERSHIP_TOL = 1e-9

# Guard for the SO(2)/SO(3) logarithm: angles at or beyond pi minus this are
# rejected rather than resolved with an arbitrary branch choice.
CUT_LOCUS_GUARD = 1e-6


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class GroupSpec:
    """Descriptor of a matrix Lie group: embedding size and algebra basis.

    ``algebra_basis`` is an (n, d, d) stack of linearly independent matrices
    spanning the algebra; ``family`` selects closed-form code paths
    ("so", "se", "rn", or "generic").
    """

    name: str
    matrix_dim: int
    algebra_dim: int
    algebra_basis: np.ndarray
    family: str = "generic"
    # flattened basis (d*d, n) and its pseudo-inverse, derived once
    _basis_flat: np.ndarray = field(init=False, repr=False)
    _basis_pinv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        basis = _frozen(self.algebra_basis)
        if basis.shape != (self.algebra_dim, self.matrix_dim, self.matrix_dim):
            raise ValueError("algebra_basis shape inconsistent with dims")
        flat = basis.reshape(self.algebra_dim, -1).T
        if np.linalg.matrix_rank(flat) != self.algebra_dim:
            raise ValueError("algebra_basis matrices are linearly dependent")
        object.__setattr__(self, "algebra_basis", basis)
        object.__setattr__(self, "_basis_flat", _frozen(flat))
        object.__setattr__(self, "_basis_pinv", _frozen(np.linalg.pinv(flat)))

    def __eq__(self, other):
        return (
            isinstance(other, GroupSpec)
            and self.name == other.name
            and self.matrix_dim == other.matrix_dim
            and self.algebra_dim == other.algebra_dim
        )

    def __hash__(self):
        return hash((self.name, self.matrix_dim, self.algebra_dim))

    def membership_residual(self, matrix: np.ndarray) -> float:
        """Worst violation of the group's defining constraints."""
        m = np.asarray(matrix, dtype=float)
        if m.shape != (self.matrix_dim, self.matrix_dim):
            return math.inf
        if not np.all(np.isfinite(m)):
            return math.inf
        if self.family == "so":
            ortho = np.abs(m.T @ m - np.eye(self.matrix_dim)).max()
            return max(ortho, abs(np.linalg.det(m) - 1.0))
        if self.family == "se":
            r = m[:3, :3]
            ortho = np.abs(r.T @ r - np.eye(3)).max()
            det = abs(np.linalg.det(r) - 1.0)
            bottom = np.abs(m[3] - np.array([0.0, 0.0, 0.0, 1.0])).max()
            return max(ortho, det, bottom)
        if self.family == "rn":
            n = self.matrix_dim - 1
            block = np.abs(m[:n, :n] - np.eye(n)).max()
            bottom = np.abs(m[n, :n]).max()
            return max(block, bottom, abs(m[n, n] - 1.0))
        return 0.0


@dataclass(frozen=True)
class GroupElement:
    """A point on the group: a validated matrix tagged with its spec."""

    spec: GroupSpec
    matrix: np.ndarray
    tol: InitVar[float | None] = None

    def __post_init__(self, tol):
        m = _frozen(self.matrix)
        object.__setattr__(self, "matrix", m)
        limit = MEMBERSHIP_TOL if tol is None else tol
        residual = self.spec.membership_residual(m)
        if residual > limit:
            raise InvalidElementError(
                f"matrix violates {self.spec.name} constraints: "
                f"residual {residual:.3e} > {limit:.3e}"
            )


@dataclass(frozen=True)
class AlgebraVector:
    """Algebra element stored as coordinates relative to the spec's basis."""

    spec: GroupSpec
    coords: np.ndarray

    def __post_init__(self):
        c = _frozen(np.asarray(self.coords, dtype=float).reshape(-1))
        if c.shape != (self.spec.algebra_dim,):
            raise SpecMismatchError(
                f"expected {self.spec.algebra_dim} coordinates, got {c.shape}"
            )
        object.__setattr__(self, "coords", c)

    def matrix(self) -> np.ndarray:
        return wedge(self.spec, self.coords)


# ---------------------------------------------------------------------------
# shipped group specs


def _skew3(u) -> np.ndarray:
    x, y, z = u
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


@lru_cache(maxsize=None)
def so2() -> GroupSpec:
    """Planar rotations, 2x2 orthogonal with det +1."""
    basis = np.array([[[0.0, -1.0], [1.0, 0.0]]])
    return GroupSpec("so2", 2, 1, basis, family="so")


@lru_cache(maxsize=None)
def so3() -> GroupSpec:
    """Spatial rotations, 3x3 orthogonal with det +1."""
    basis = np.stack([_skew3(e) for e in np.eye(3)])
    return GroupSpec("so3", 3, 3, basis, family="so")


@lru_cache(maxsize=None)
def se3() -> GroupSpec:
    """Rigid-body transforms as 4x4 homogeneous matrices."""
    basis = np.zeros((6, 4, 4))
    for i, e in enumerate(np.eye(3)):
        basis[i, :3, :3] = _skew3(e)
        basis[3 + i, :3, 3] = e
    return GroupSpec("se3", 4, 6, basis, family="se")


@lru_cache(maxsize=None)
def rn(n: int) -> GroupSpec:
    """R^n under addition, as (n+1)x(n+1) homogeneous matrices."""
    if n < 1:
        raise ValueError("n must be positive")
    basis = np.zeros((n, n + 1, n + 1))
    for i in range(n):
        basis[i, i, n] = 1.0
    return GroupSpec(f"r{n}", n + 1, n, basis, family="rn")


_SPEC_FACTORIES: dict[str, Callable[[], GroupSpec]] = {
    "so2": so2,
    "so3": so3,
    "se3": se3,
}


def spec_by_name(name: str) -> GroupSpec:
    """Look up a shipped spec by its lowercase name (e.g. "so3", "r3")."""
    key = name.lower()
    if key in _SPEC_FACTORIES:
        return _SPEC_FACTORIES[key]()
    if key.startswith("r") and key[1:].isdigit():
        return rn(int(key[1:]))
    raise SpecMismatchError(f"unknown group {name!r}")


# ---------------------------------------------------------------------------
# core operations


def identity(spec: GroupSpec) -> GroupElement:
    return GroupElement(spec, np.eye(spec.matrix_dim))


def _require_same_spec(a: GroupElement, b: GroupElement):
    if a.spec != b.spec:
        raise SpecMismatchError(
            f"operands on different groups: {a.spec.name} vs {b.spec.name}"
        )


def compose(a: GroupElement, b: GroupElement) -> GroupElement:
    """Group product a * b."""
    _require_same_spec(a, b)
    return GroupElement(a.spec, a.matrix @ b.matrix)


def inverse(a: GroupElement) -> GroupElement:
    """Group inverse, using the closed form where the family provides one."""
    m = a.matrix
    if a.spec.family == "so":
        inv = m.T
    elif a.spec.family == "se":
        rt = m[:3, :3].T
        inv = np.eye(4)
        inv[:3, :3] = rt
        inv[:3, 3] = -rt @ m[:3, 3]
    elif a.spec.family == "rn":
        n = a.spec.matrix_dim - 1
        inv = np.eye(n + 1)
        inv[:n, n] = -m[:n, n]
    else:
        inv = np.linalg.inv(m)
    return GroupElement(a.spec, inv)


def wedge(spec: GroupSpec, coords) -> np.ndarray:
    """Map R^n coordinates to the algebra matrix sum(coords_i * basis_i)."""
    c = np.asarray(coords, dtype=float).reshape(-1)
    if c.shape != (spec.algebra_dim,):
        raise SpecMismatchError(
            f"expected {spec.algebra_dim} coordinates, got {c.shape[0]}"
        )
    return np.einsum("i,ijk->jk", c, spec.algebra_basis)


def vee(spec: GroupSpec, matrix: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Inverse of wedge. Rejects matrices outside the algebra span."""
    m = np.asarray(matrix, dtype=float)
    if m.shape != (spec.matrix_dim, spec.matrix_dim):
        raise SpecMismatchError(f"expected {spec.matrix_dim}x{spec.matrix_dim} matrix")
    flat = m.reshape(-1)
    coords = spec._basis_pinv @ flat
    residual = np.linalg.norm(spec._basis_flat @ coords - flat)
    if residual > tol * (1.0 + np.linalg.norm(flat)):
        raise NotInAlgebraError(
            f"matrix is not in the {spec.name} algebra: residual {residual:.3e}"
        )
    return coords


# -- exponential / logarithm -------------------------------------------------


def _so3_abc(theta: float) -> tuple[float, float, float]:
    # a = sin(t)/t, b = (1 - cos(t))/t^2, c = (t - sin(t))/t^3, series near 0
    if theta < 1e-5:
        t2 = theta * theta
        a = 1.0 - t2 / 6.0 * (1.0 - t2 / 20.0)
        b = 0.5 * (1.0 - t2 / 12.0 * (1.0 - t2 / 30.0))
        c = (1.0 - t2 / 20.0 * (1.0 - t2 / 42.0)) / 6.0
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / (theta * theta)
        c = (theta - math.sin(theta)) / (theta * theta * theta)
    return a, b, c


def _exp_so3(w: np.ndarray) -> np.ndarray:
    theta = float(np.linalg.norm(w))
    a, b, _ = _so3_abc(theta)
    k = _skew3(w)
    return np.eye(3) + a * k + b * (k @ k)


def _vee3(m: np.ndarray) -> np.ndarray:
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def _log_so3(r: np.ndarray) -> np.ndarray:
    cos_theta = min(1.0, max(-1.0, 0.5 * (np.trace(r) - 1.0)))
    theta = math.acos(cos_theta)
    if theta >= math.pi - CUT_LOCUS_GUARD:
        raise CutLocusError(f"rotation angle {theta:.9f} at/beyond the cut locus")
    if theta < 1e-7:
        return 0.5 * _vee3(r - r.T)
    if theta > 3.0:
        # Stable branch near pi: the axis comes from the symmetric part,
        # where 1 - cos(theta) ~ 2 keeps the division well conditioned.
        sin_axis = 0.5 * _vee3(r - r.T)
        theta = math.pi - math.asin(min(1.0, float(np.linalg.norm(sin_axis))))
        if theta >= math.pi - CUT_LOCUS_GUARD:
            raise CutLocusError(f"rotation angle {theta:.9f} at/beyond the cut locus")
        nnt = (0.5 * (r + r.T) - cos_theta * np.eye(3)) / (1.0 - cos_theta)
        k = int(np.argmax(np.diag(nnt)))
        axis = nnt[:, k] / math.sqrt(nnt[k, k])
        if float(axis @ sin_axis) < 0.0:
            axis = -axis
        return theta * axis
    return theta / (2.0 * math.sin(theta)) * _vee3(r - r.T)


def _se3_v(w: np.ndarray) -> np.ndarray:
    theta = float(np.linalg.norm(w))
    _, b, c = _so3_abc(theta)
    k = _skew3(w)
    return np.eye(3) + b * k + c * (k @ k)


def _se3_v_inv(w: np.ndarray) -> np.ndarray:
    theta = float(np.linalg.norm(w))
    k = _skew3(w)
    if theta < 1e-5:
        t2 = theta * theta
        d = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    else:
        d = (1.0 - theta * math.sin(theta) / (2.0 * (1.0 - math.cos(theta)))) / (
            theta * theta
        )
    return np.eye(3) - 0.5 * k + d * (k @ k)


def exp(spec: GroupSpec, coords) -> GroupElement:
    """Exponential map from algebra coordinates to the group.

    Closed forms for the shipped families; scaling-and-squaring on the
    matrix exponential otherwise.
    """
    c = np.asarray(coords, dtype=float).reshape(-1)
    if c.shape != (spec.algebra_dim,):
        raise SpecMismatchError(
            f"expected {spec.algebra_dim} coordinates, got {c.shape[0]}"
        )
    if spec.family == "so" and spec.matrix_dim == 2:
        th = c[0]
        m = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
    elif spec.family == "so" and spec.matrix_dim == 3:
        m = _exp_so3(c)
    elif spec.family == "se":
        m = np.eye(4)
        m[:3, :3] = _exp_so3(c[:3])
        m[:3, 3] = _se3_v(c[:3]) @ c[3:]
    elif spec.family == "rn":
        n = spec.matrix_dim - 1
        m = np.eye(n + 1)
        m[:n, n] = c
    else:
        m = scipy.linalg.expm(wedge(spec, c))
    return GroupElement(spec, m)


def log(a: GroupElement) -> np.ndarray:
    """Logarithm to algebra coordinates; valid inside the injectivity radius."""
    spec = a.spec
    m = a.matrix
    if spec.family == "so" and spec.matrix_dim == 2:
        th = math.atan2(m[1, 0], m[0, 0])
        if abs(th) >= math.pi - CUT_LOCUS_GUARD:
            raise CutLocusError(f"rotation angle {th:.9f} at/beyond the cut locus")
        return np.array([th])
    if spec.family == "so" and spec.matrix_dim == 3:
        return _log_so3(m)
    if spec.family == "se":
        w = _log_so3(m[:3, :3])
        return np.concatenate([w, _se3_v_inv(w) @ m[:3, 3]])
    if spec.family == "rn":
        n = spec.matrix_dim - 1
        return m[:n, n].copy()
    return vee(spec, np.real(scipy.linalg.logm(m)))


def adjoint_matrix(x: GroupElement) -> np.ndarray:
    """Matrix of Ad_x in basis coordinates: wedge(Ad @ u) = x wedge(u) x^-1."""
    spec = x.spec
    x_inv = inverse(x).matrix
    cols = [
        vee(spec, x.matrix @ spec.algebra_basis[i] @ x_inv)
        for i in range(spec.algebra_dim)
    ]
    return np.column_stack(cols)


def random_element(spec: GroupSpec, rng: np.random.Generator, scale: float = 1.0) -> GroupElement:
    """exp(scale * z) with z standard normal; deterministic given the rng state."""
    if scale < 0:
        raise ValueError("scale must be non-negative")
    return exp(spec, scale * rng.standard_normal(spec.algebra_dim))


def project_to_group(spec: GroupSpec, matrix: np.ndarray) -> GroupElement:
    """Re-orthonormalize a near-group matrix onto the group."""
    m = np.asarray(matrix, dtype=float)
    if m.shape != (spec.matrix_dim, spec.matrix_dim):
        raise SpecMismatchError(f"expected {spec.matrix_dim}x{spec.matrix_dim} matrix")
    if spec.family == "so":
        return GroupElement(spec, _project_rotation(m))
    if spec.family == "se":
        out = np.eye(4)
        out[:3, :3] = _project_rotation(m[:3, :3])
        out[:3, 3] = m[:3, 3]
        return GroupElement(spec, out)
    if spec.family == "rn":
        n = spec.matrix_dim - 1
        out = np.eye(n + 1)
        out[:n, n] = m[:n, n]
        return GroupElement(spec, out)
    raise ProjectionFailedError(f"no projection available for {spec.name}")


def _project_rotation(m: np.ndarray) -> np.ndarray:
    u, s, vt = np.linalg.svd(m)
    if s[-1] < 1e-12 * max(s[0], 1.0):
        raise ProjectionFailedError("rotation block is rank deficient")
    d = np.ones(m.shape[0])
    d[-1] = np.sign(np.linalg.det(u @ vt))
    return (u * d) @ vt
