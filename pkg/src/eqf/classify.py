"""Sampled classification of kinematic systems.

Universally quantified conditions (invariance, the group-affine identity,
membership of velocity subspaces) are tested on seeded random group samples;
rank and nullspace decisions use an SVD with singular-value cutoff
``tol * sigma_max``.  A condition matrix whose largest singular value is
itself below ``tol`` counts as identically satisfied, which is what makes
constant lifts classify cleanly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotGroupAffineError, NotInvariantError, RankInstabilityError
from .groups import (
    GroupSpec,
    adjoint_matrix,
    compose,
    identity,
    inverse,
    random_element,
    vee,
    wedge,
)
from .kinematics import CheckReport, KinematicSystem, LiftMap, system_field

DEFAULT_SAMPLES = 50
DEFAULT_TOL = 1e-8
DEFAULT_SEED = 42
DEFAULT_SCALE = 1.0


@dataclass(frozen=True)
class InvarianceReport:
    """Outcome of the sampled invariance classification."""

    left: bool
    right: bool
    bi: bool
    dual: bool
    group_affine: bool
    max_residuals: dict
    samples_used: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "left": self.left,
            "right": self.right,
            "bi": self.bi,
            "dual": self.dual,
            "group_affine": self.group_affine,
            "max_residuals": {k: float(v) for k, v in self.max_residuals.items()},
            "samples_used": self.samples_used,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class TypeDecomposition:
    """Direct-sum split of the input space into the three velocity types."""

    v0_basis: np.ndarray
    v1_perp_basis: np.ndarray
    v2_perp_basis: np.ndarray
    residual: float

    @property
    def dims(self) -> tuple[int, int, int]:
        return (
            self.v0_basis.shape[1],
            self.v1_perp_basis.shape[1],
            self.v2_perp_basis.shape[1],
        )


@dataclass(frozen=True)
class ExtensionReduction:
    """Finite reduction of the input extension of a group-affine system."""

    original_dim: int
    typeI_span_basis: np.ndarray
    perp_dim: int
    extended_system: KinematicSystem


# ---------------------------------------------------------------------------
# linear-algebra helpers


def _rank(m: np.ndarray, tol: float) -> int:
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s[0] <= tol:
        return 0
    return int(np.sum(s > tol * s[0]))


def nullspace_basis(m: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal nullspace basis with cutoff tol * sigma_max.

    A matrix whose largest singular value is below tol is treated as zero
    (full nullspace).
    """
    p = m.shape[1]
    if m.size == 0:
        return np.eye(p)
    _, s, vt = np.linalg.svd(m)
    if s.size == 0 or s[0] <= tol:
        return np.eye(p)
    rank = int(np.sum(s > tol * s[0]))
    return vt[rank:].T.copy()


def orth_basis(m: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis of the column span with cutoff tol * sigma_max."""
    if m.size == 0:
        return np.zeros((m.shape[0], 0))
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    if s.size == 0 or s[0] <= tol:
        return np.zeros((m.shape[0], 0))
    rank = int(np.sum(s > tol * s[0]))
    return u[:, :rank].copy()


def span_intersection(b1: np.ndarray, b2: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis of span(b1) intersected with span(b2)."""
    if b1.shape[1] == 0 or b2.shape[1] == 0:
        return np.zeros((b1.shape[0], 0))
    z = nullspace_basis(np.hstack([b1, -b2]), tol)
    if z.shape[1] == 0:
        return np.zeros((b1.shape[0], 0))
    return orth_basis(b1 @ z[: b1.shape[1]], tol)


def _complement_within(span: np.ndarray, sub: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of sub inside span."""
    if span.shape[1] == 0:
        return span
    if sub.shape[1] == 0:
        return orth_basis(span, tol)
    proj = np.eye(span.shape[0]) - sub @ sub.T
    return orth_basis(proj @ span, tol)


# ---------------------------------------------------------------------------
# velocity subspaces


def _sample_states(sys, samples, rng, scale):
    return [random_element(sys.spec, rng, scale) for _ in range(samples)]


def typeI_subspace(
    sys: KinematicSystem,
    samples: int = DEFAULT_SAMPLES,
    tol: float = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
    scale: float = DEFAULT_SCALE,
) -> np.ndarray:
    """Maximal sampled subspace of inputs whose lift is constant in the state.

    Returns an orthonormal (p, k) basis of the intersection of the
    nullspaces of L(X_k) - L(I) over the sampled states.
    """
    rng = np.random.default_rng(seed)
    l_id = sys.lift_map.eval(identity(sys.spec))
    blocks = [
        sys.lift_map.eval(x) - l_id for x in _sample_states(sys, samples, rng, scale)
    ]
    return nullspace_basis(np.vstack(blocks), tol)


def typeII_subspace(
    sys: KinematicSystem,
    samples: int = DEFAULT_SAMPLES,
    tol: float = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
    scale: float = DEFAULT_SCALE,
) -> np.ndarray:
    """Maximal sampled subspace of inputs whose lift transforms by Ad(X^-1)."""
    rng = np.random.default_rng(seed)
    l_id = sys.lift_map.eval(identity(sys.spec))
    blocks = []
    for x in _sample_states(sys, samples, rng, scale):
        blocks.append(sys.lift_map.eval(x) - adjoint_matrix(inverse(x)) @ l_id)
    return nullspace_basis(np.vstack(blocks), tol)


def decompose(
    sys: KinematicSystem,
    samples: int = DEFAULT_SAMPLES,
    tol: float = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
    scale: float = DEFAULT_SCALE,
) -> TypeDecomposition:
    """Split the input space into Type 0, Type I and Type II components.

    The complements are chosen orthogonal to the common component in the
    standard inner product on R^p.  Raises NotInvariantError (with the worst
    uncovered input direction as witness) when the two subspaces fail to
    span the input space.
    """
    p = sys.input_dim
    b1 = typeI_subspace(sys, samples, tol, seed, scale)
    b2 = typeII_subspace(sys, samples, tol, seed, scale)
    combined = orth_basis(np.hstack([b1, b2]), tol)
    if combined.shape[1] < p:
        proj = np.eye(p) - combined @ combined.T
        residuals = np.linalg.norm(proj, axis=0)
        j = int(np.argmax(residuals))
        raise NotInvariantError(
            f"system {sys.label or '?'} is not invariant: input direction e_{j + 1} "
            f"is outside the sampled Type I + Type II span "
            f"(residual {residuals[j]:.3e})",
            witness=np.eye(p)[j],
        )
    v0 = span_intersection(b1, b2, tol)
    v1_perp = _complement_within(b1, v0, tol)
    v2_perp = _complement_within(b2, v0, tol)
    if v0.shape[1] + v1_perp.shape[1] + v2_perp.shape[1] != p:
        raise NotInvariantError(
            f"direct-sum failure for {sys.label or '?'}: "
            f"dims {v0.shape[1]}+{v1_perp.shape[1]}+{v2_perp.shape[1]} != {p}"
        )
    # worst defining residual of the computed bases on fresh samples
    rng = np.random.default_rng(seed + 1)
    l_id = sys.lift_map.eval(identity(sys.spec))
    worst = 0.0
    type1_dirs = np.hstack([v0, v1_perp])
    type2_dirs = np.hstack([v0, v2_perp])
    for x in _sample_states(sys, min(samples, 20), rng, scale):
        l_x = sys.lift_map.eval(x)
        if type1_dirs.size:
            worst = max(worst, np.abs((l_x - l_id) @ type1_dirs).max())
        if type2_dirs.size:
            diff = l_x - adjoint_matrix(inverse(x)) @ l_id
            worst = max(worst, np.abs(diff @ type2_dirs).max())
    return TypeDecomposition(v0, v1_perp, v2_perp, residual=float(worst))


def center_of_algebra(spec: GroupSpec, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis of the algebra's center in basis coordinates.

    Computed as the joint nullspace of the commutator operators with every
    basis element.
    """
    n = spec.algebra_dim
    blocks = []
    for i in range(n):
        bi = spec.algebra_basis[i]
        cols = []
        for j in range(n):
            bj = spec.algebra_basis[j]
            cols.append(vee(spec, bi @ bj - bj @ bi))
        blocks.append(np.column_stack(cols))
    return nullspace_basis(np.vstack(blocks), tol)


# ---------------------------------------------------------------------------
# group-affine tests and classification


def is_group_affine(
    sys: KinematicSystem,
    samples: int = DEFAULT_SAMPLES,
    tol: float = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
    scale: float = DEFAULT_SCALE,
) -> CheckReport:
    """Sampled test of the group-affine identity in the embedding space.

    Evaluates F_v(AB) - F_v(A)B - A F_v(B) + A F_v(I)B over random pairs
    (A, B) and all basis inputs.
    """
    rng = np.random.default_rng(seed)
    ident = identity(sys.spec)
    basis = np.eye(sys.input_dim)
    worst = 0.0
    witness = None
    for _ in range(samples):
        a = random_element(sys.spec, rng, scale)
        b = random_element(sys.spec, rng, scale)
        ab = compose(a, b)
        for j in range(sys.input_dim):
            v = basis[j]
            res = (
                system_field(sys, ab, v)
                - system_field(sys, a, v) @ b.matrix
                - a.matrix @ system_field(sys, b, v)
                + a.matrix @ system_field(sys, ident, v) @ b.matrix
            )
            r = float(np.abs(res).max())
            if r > worst:
                worst = r
                witness = (a, b, basis[j].copy())
    return CheckReport(passed=worst < tol, max_residual=worst, witness=witness)


def classify_invariance(
    sys: KinematicSystem,
    samples: int = DEFAULT_SAMPLES,
    tol: float = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
    scale: float = DEFAULT_SCALE,
) -> InvarianceReport:
    """Sampled left/right/bi/dual invariance flags plus the group-affine test."""
    rng = np.random.default_rng(seed)
    l_id = sys.lift_map.eval(identity(sys.spec))
    left_res = 0.0
    right_res = 0.0
    for x in _sample_states(sys, samples, rng, scale):
        l_x = sys.lift_map.eval(x)
        left_res = max(left_res, float(np.abs(l_x - l_id).max()))
        diff = l_x - adjoint_matrix(inverse(x)) @ l_id
        right_res = max(right_res, float(np.abs(diff).max()))
    b1 = typeI_subspace(sys, samples, tol, seed, scale)
    b2 = typeII_subspace(sys, samples, tol, seed, scale)
    combined = orth_basis(np.hstack([b1, b2]), tol)
    dual = (
        b1.shape[1] > 0 and b2.shape[1] > 0 and combined.shape[1] == sys.input_dim
    )
    ga = is_group_affine(sys, samples, tol, seed, scale)
    left = left_res < tol
    right = right_res < tol
    return InvarianceReport(
        left=left,
        right=right,
        bi=left and right,
        dual=dual,
        group_affine=ga.passed,
        max_residuals={
            "left": left_res,
            "right": right_res,
            "group_affine": ga.max_residual,
        },
        samples_used=samples,
        seed=seed,
    )


def reduce_group_affine_extension(
    sys: KinematicSystem,
    samples: int = 40,
    tol: float = DEFAULT_TOL,
    seed: int = DEFAULT_SEED,
    scale: float = DEFAULT_SCALE,
) -> ExtensionReduction:
    """Finite input extension of a group-affine system.

    Sampling translations B yields the constant-lift columns
    ``Ad(B) L(B) - L(I)``; their span (in algebra coordinates) is the space
    of new constant velocities the extension can add.  The part of that span
    already reachable through the system's own constant-lift inputs is
    dropped, and the remainder W is appended to the lift as constant
    columns: ``L_ext(X) = [L(X) | W]``.
    """
    ga = is_group_affine(sys, samples, tol, seed, scale)
    if not ga.passed:
        raise NotGroupAffineError(
            f"system {sys.label or '?'} is not group affine "
            f"(residual {ga.max_residual:.3e})",
            witness=ga.witness,
        )
    spec = sys.spec
    p = sys.input_dim
    rng = np.random.default_rng(seed)
    l_id = sys.lift_map.eval(identity(spec))
    cols = []
    for _ in range(samples):
        b = random_element(spec, rng, scale)
        cols.append(adjoint_matrix(b) @ sys.lift_map.eval(b) - l_id)
    full = np.hstack(cols)
    half = np.hstack(cols[: max(1, samples // 2)])
    r_full = _rank(full, tol)
    r_half = _rank(half, tol)
    if r_full != r_half:
        raise RankInstabilityError(
            f"type-I span rank changed from {r_half} to {r_full} between "
            f"{samples // 2} and {samples} samples; increase sampling"
        )
    span = orth_basis(full, tol)
    original_type1 = typeI_subspace(sys, samples, tol, seed, scale)
    image = orth_basis(l_id @ original_type1, tol)
    inter = span_intersection(span, image, tol)
    w = _complement_within(span, inter, tol)
    perp_dim = w.shape[1]

    base_lift = sys.lift_map
    w_frozen = w.copy()
    w_frozen.flags.writeable = False

    def ext_eval(x, _base=base_lift.eval, _w=w_frozen):
        return np.hstack([_base(x), _w])

    if base_lift.analytic_dx is not None:

        def ext_dx(x, v, delta, _dx=base_lift.analytic_dx, _p=p):
            return _dx(x, np.asarray(v, dtype=float)[:_p], delta)

    else:
        ext_dx = None
    extended = KinematicSystem(
        spec,
        p + perp_dim,
        LiftMap(eval=ext_eval, analytic_dx=ext_dx),
        input_action=None,
        label=(sys.label + "_ext") if sys.label else "extended",
    )
    ga_ext = is_group_affine(extended, samples, tol, seed + 1, scale)
    if not ga_ext.passed:
        raise NotGroupAffineError(
            f"extension of {sys.label or '?'} failed the group-affine check "
            f"(residual {ga_ext.max_residual:.3e}); sampling may be insufficient",
            witness=ga_ext.witness,
        )
    # appended columns must be constant-lift directions
    if perp_dim > 0:
        check_rng = np.random.default_rng(seed + 2)
        for _ in range(5):
            x = random_element(spec, check_rng, scale)
            if np.abs(extended.lift_map.eval(x)[:, p:] - w_frozen).max() > tol:
                raise NotGroupAffineError("appended extension columns are not constant")
    return ExtensionReduction(
        original_dim=p,
        typeI_span_basis=span,
        perp_dim=perp_dim,
        extended_system=extended,
    )
