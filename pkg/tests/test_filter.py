import numpy as np
import pytest

from eqf.errors import MissingDerivativeError, SpecMismatchError
from eqf.filter import (
    FilterParams,
    FilterState,
    MeasurementModel,
    a_matrix,
    c_matrix,
    correction,
    error,
    filter_step,
    ga_a_matrix,
    record_error,
    riccati_step,
)
from eqf.groups import (
    compose,
    exp,
    identity,
    inverse,
    random_element,
    so3,
    wedge,
)
from eqf.kinematics import lift
from eqf.systems import (
    direction_measurement,
    get_system,
    landmark_measurement,
    position_measurement,
)


def skew(v):
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def params_for(n, m, mode="analytic", **kw):
    return FilterParams(
        P=np.eye(n), Q=np.eye(m), sigma0=np.eye(n), linearisation_mode=mode, **kw
    )


# ---------------------------------------------------------------------------
# error


def test_error_of_equal_states_is_identity():
    rng = np.random.default_rng(0)
    x = random_element(so3(), rng)
    np.testing.assert_allclose(error(x, x).matrix, np.eye(3), atol=1e-12)


def test_error_with_identity_estimate():
    rng = np.random.default_rng(1)
    x = random_element(so3(), rng)
    np.testing.assert_allclose(error(x, identity(so3())).matrix, x.matrix, atol=1e-15)


def test_error_matches_matrix_oracle():
    rng = np.random.default_rng(2)
    x = random_element(so3(), rng)
    xhat = random_element(so3(), rng)
    np.testing.assert_allclose(
        error(x, xhat).matrix, x.matrix @ np.linalg.inv(xhat.matrix), atol=1e-12
    )


def test_error_spec_mismatch():
    from eqf.groups import se3

    with pytest.raises(SpecMismatchError):
        error(identity(so3()), identity(se3()))


def test_error_zero_iff_equal():
    rng = np.random.default_rng(3)
    x = random_element(so3(), rng)
    state = FilterState(xhat=x, sigma=np.eye(3))
    rec = record_error(x, state)
    assert rec.err_norm < 1e-12
    other = compose(x, exp(so3(), [0.01, 0.0, 0.0]))
    rec2 = record_error(other, state)
    assert rec2.err_norm > 1e-3
    assert abs(rec2.err_norm - np.linalg.norm(rec2.eps)) < 1e-15


# ---------------------------------------------------------------------------
# state linearisation


def test_a_matrix_zero_for_constant_lift():
    sys = get_system("so3_left")
    rng = np.random.default_rng(4)
    xhat = random_element(so3(), rng)
    a = a_matrix(sys, xhat, [0.3, -0.1, 0.2], params_for(3, 3))
    assert np.abs(a).max() < 1e-12


def test_a_matrix_reference_frame_is_skew():
    sys = get_system("so3_right")
    v = np.array([0.4, -0.2, 0.7])
    p = params_for(3, 3)
    np.testing.assert_allclose(ga_a_matrix(sys, v, p), skew(v), atol=1e-10)
    rng = np.random.default_rng(5)
    for _ in range(5):
        xhat = random_element(so3(), rng)
        np.testing.assert_allclose(a_matrix(sys, xhat, v, p), skew(v), atol=1e-10)


def test_a_matrix_fd_oracle_at_identity():
    # central-difference oracle for the reference-frame system at E = I
    sys = get_system("so3_right")
    v = np.array([1.0, 2.0, -0.5])
    s = 1e-6
    cols = []
    for e in np.eye(3):
        lp = lift(sys, exp(so3(), s * e), v)
        lm = lift(sys, exp(so3(), -s * e), v)
        cols.append((lp - lm) / (2 * s))
    np.testing.assert_allclose(
        ga_a_matrix(sys, v, params_for(3, 3)), np.column_stack(cols), atol=1e-8
    )


@pytest.mark.parametrize("label", ["so3_right", "so3_dual", "so3_curved"])
def test_a_matrix_analytic_matches_finite_difference(label):
    sys = get_system(label)
    rng = np.random.default_rng(6)
    pa = params_for(3, 3, mode="analytic")
    pf = params_for(3, 3, mode="finite_difference")
    for _ in range(10):
        xhat = random_element(so3(), rng)
        v = rng.standard_normal(sys.input_dim)
        np.testing.assert_allclose(
            a_matrix(sys, xhat, v, pa), a_matrix(sys, xhat, v, pf), atol=1e-6
        )


def test_ga_a_matrix_state_independent_for_group_affine():
    sys = get_system("so3_dual")
    rng = np.random.default_rng(7)
    p = params_for(3, 3)
    v = rng.standard_normal(6)
    ga = ga_a_matrix(sys, v, p)
    for _ in range(20):
        xhat = random_element(so3(), rng)
        assert np.abs(a_matrix(sys, xhat, v, p) - ga).max() < 1e-8


def test_a_matrix_missing_analytic_derivative():
    sys = get_system("so3_left")
    from eqf.kinematics import KinematicSystem, LiftMap

    bare = KinematicSystem(sys.spec, 3, LiftMap(eval=sys.lift_map.eval), label="bare")
    with pytest.raises(MissingDerivativeError):
        a_matrix(bare, identity(so3()), np.zeros(3), params_for(3, 3))


# ---------------------------------------------------------------------------
# output linearisation


def test_c_matrix_constant_measurement():
    model = MeasurementModel(h=lambda x: np.array([1.0]), m=1)
    c = c_matrix(model, identity(so3()), params_for(3, 1, mode="finite_difference"))
    assert np.abs(c).max() < 1e-9


def test_c_matrix_direction_closed_form():
    d = np.array([0.0, 0.0, 1.0])
    model = direction_measurement([d])
    rng = np.random.default_rng(8)
    for _ in range(5):
        xhat = random_element(so3(), rng)
        c = c_matrix(model, xhat, params_for(3, 3))
        np.testing.assert_allclose(c, xhat.matrix.T @ skew(d), atol=1e-10)
        eps = 0.1 * rng.standard_normal(3)
        np.testing.assert_allclose(
            c @ eps, xhat.matrix.T @ np.cross(d, eps), atol=1e-10
        )


@pytest.mark.parametrize(
    "model,spec_name",
    [
        (direction_measurement([[0, 0, 1], [1, 0, 0]]), "so3"),
        (landmark_measurement([[1, 0, 0], [0, 2, 0], [0, 0, 3]]), "se3"),
        (position_measurement(3), "r3"),
    ],
    ids=["directions", "landmarks", "position"],
)
def test_c_matrix_analytic_matches_finite_difference(model, spec_name):
    from eqf.groups import spec_by_name

    spec = spec_by_name(spec_name)
    rng = np.random.default_rng(9)
    n = spec.algebra_dim
    pa = params_for(n, model.m, mode="analytic")
    pf = params_for(n, model.m, mode="finite_difference")
    for _ in range(10):
        xhat = random_element(spec, rng)
        np.testing.assert_allclose(
            c_matrix(model, xhat, pa), c_matrix(model, xhat, pf), atol=1e-6
        )


def test_analytic_dh_linear_in_direction():
    model = landmark_measurement([[1.0, 2.0, 0.5]])
    rng = np.random.default_rng(10)
    from eqf.groups import se3

    xhat = random_element(se3(), rng)
    d1, d2 = rng.standard_normal((2, 6))
    lhs = model.analytic_dh(xhat, 1.3 * d1 - 0.4 * d2)
    rhs = 1.3 * model.analytic_dh(xhat, d1) - 0.4 * model.analytic_dh(xhat, d2)
    assert np.abs(lhs - rhs).max() < 1e-10


# ---------------------------------------------------------------------------
# correction and the Riccati step


def test_correction_zero_innovation():
    assert np.all(correction(np.eye(3), np.eye(3), np.eye(3), np.zeros(3)) == 0.0)


def test_correction_identity_matrices():
    innovation = np.array([0.1, -0.2, 0.3])
    np.testing.assert_allclose(
        correction(np.eye(3), np.eye(3), np.eye(3), innovation), innovation
    )


def test_correction_matches_matrix_chain_oracle():
    rng = np.random.default_rng(11)
    a = rng.standard_normal((3, 3))
    sigma = a @ a.T + np.eye(3)
    b = rng.standard_normal((2, 2))
    q = b @ b.T + np.eye(2)
    c = rng.standard_normal((2, 3))
    innovation = rng.standard_normal(2)
    np.testing.assert_allclose(
        correction(sigma, c, q, innovation),
        sigma @ c.T @ np.linalg.inv(q) @ innovation,
        atol=1e-10,
    )


def test_riccati_pure_growth():
    out = riccati_step(
        np.eye(3), np.zeros((3, 3)), np.zeros((1, 3)), np.eye(3), np.eye(1), 0.1
    )
    np.testing.assert_allclose(out, np.eye(3) * 1.1, atol=1e-12)


def test_riccati_scalar_closed_form_single_step():
    # sigma' = -sigma^2 from 1 has the closed form 1/(1+t)
    out = riccati_step(
        np.eye(1), np.zeros((1, 1)), np.eye(1), np.zeros((1, 1)) + 1e-300, np.eye(1), 0.1
    )
    assert abs(out[0, 0] - 1.0 / 1.1) < 1e-6


def test_riccati_scalar_closed_form_trajectory():
    sigma = np.eye(1)
    a = np.zeros((1, 1))
    c = np.eye(1)
    p = np.zeros((1, 1))
    q = np.eye(1)
    dt = 0.01
    for k in range(1000):
        sigma = riccati_step(sigma, a, c, p, q, dt)
        t = (k + 1) * dt
        assert abs(sigma[0, 0] - 1.0 / (1.0 + t)) < 1e-6


def test_riccati_symmetry_preserved_over_many_random_steps():
    rng = np.random.default_rng(12)
    sigma = np.eye(4)
    p = 0.01 * np.eye(4)
    q = np.eye(2)
    for _ in range(10**4):
        a = 0.1 * rng.standard_normal((4, 4))
        c = rng.standard_normal((2, 4))
        sigma = riccati_step(sigma, a, c, p, q, 0.01)
        assert np.abs(sigma - sigma.T).max() < 1e-12
    assert np.linalg.eigvalsh(sigma).min() >= 1e-12


def test_riccati_forms_differ_in_gain_term():
    # scalar case: kalman_bucy uses Q^-1, the printed variant uses Q
    sigma = np.eye(1)
    a = np.zeros((1, 1))
    c = np.eye(1)
    p = np.zeros((1, 1)) + 1e-300
    q = 2.0 * np.eye(1)
    kb = riccati_step(sigma, a, c, p, q, 0.01, form="kalman_bucy")
    printed = riccati_step(sigma, a, c, p, q, 0.01, form="as_printed")
    # d(sigma)/dt = -sigma^2/2 vs -2 sigma^2 at sigma = 1
    assert abs((kb[0, 0] - 1.0) / 0.01 + 0.5) < 1e-2
    assert abs((printed[0, 0] - 1.0) / 0.01 + 2.0) < 1e-1


def test_filter_params_validation():
    with pytest.raises(ValueError):
        FilterParams(P=np.zeros((3, 3)), Q=np.eye(3), sigma0=np.eye(3))
    with pytest.raises(ValueError):
        FilterParams(P=np.eye(3), Q=np.zeros((3, 3)), sigma0=np.eye(3))
    with pytest.raises(ValueError):
        FilterParams(P=np.eye(3), Q=np.eye(3), sigma0=np.eye(3), riccati_form="bogus")
    with pytest.raises(ValueError):
        FilterParams(
            P=np.eye(3), Q=np.eye(3), sigma0=np.eye(3), linearisation_mode="exact"
        )


# ---------------------------------------------------------------------------
# filter stepping


def test_filter_step_fixed_point():
    sys = get_system("so3_left")
    model = MeasurementModel(h=lambda x: np.array([2.0]), m=1)
    params = FilterParams(
        P=1e-30 * np.eye(3),
        Q=np.eye(1),
        sigma0=np.eye(3),
        linearisation_mode="finite_difference",
    )
    rng = np.random.default_rng(13)
    xhat = random_element(so3(), rng)
    state = FilterState(xhat=xhat, sigma=np.eye(3))
    out = filter_step(state, sys, model, np.zeros(3), np.array([2.0]), 0.1, params)
    np.testing.assert_array_equal(out.xhat.matrix, xhat.matrix)
    np.testing.assert_allclose(out.sigma, state.sigma, atol=1e-12)


def run_attitude_filter(label, steps=1000, dt=0.01, seed=42, ga_shortcut=False):
    """Noise-free reference simulation: truth and filter share the integrator."""
    sys = get_system(label)
    model = direction_measurement([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    params = FilterParams(
        P=1e-2 * np.eye(3),
        Q=1e-2 * np.eye(6),
        sigma0=np.eye(3),
        ga_shortcut=ga_shortcut,
    )
    rng = np.random.default_rng(seed)
    x = identity(so3())
    state = FilterState(
        xhat=compose(exp(so3(), [-1.2, 0.5, 0.3]), x), sigma=params.sigma0
    )
    errs = []
    for k in range(steps):
        t = k * dt
        v = np.array(
            [0.3 * np.sin(0.5 * t), 0.2 * np.cos(0.8 * t), 0.4 * np.sin(0.3 * t + 1)]
        )
        y = model.h(x)
        state = filter_step(state, sys, model, v, y, dt, params)
        x = compose(x, exp(so3(), dt * lift(sys, x, v)))
        errs.append(record_error(x, state).err_norm)
    return np.array(errs), state


def test_filter_converges_on_noise_free_attitude_problem():
    errs, _ = run_attitude_filter("so3_left")
    assert errs[-1] < 1e-3
    tail = errs[10:]
    assert np.all(np.diff(tail) < 0.0), "error must strictly decrease after step 10"


def test_filter_ga_shortcut_trajectory_identical():
    sys = get_system("so3_dual")
    model = direction_measurement([[0.0, 0.0, 1.0], [1.0, 0.0, 0.0]])
    rng = np.random.default_rng(14)
    x0 = random_element(so3(), rng)
    states = []
    for shortcut in (False, True):
        params = FilterParams(
            P=1e-2 * np.eye(3),
            Q=1e-2 * np.eye(6),
            sigma0=np.eye(3),
            ga_shortcut=shortcut,
        )
        x = x0
        state = FilterState(xhat=identity(so3()), sigma=params.sigma0)
        for k in range(200):
            v = np.concatenate(
                [
                    [0.2 * np.sin(0.3 * k * 0.01), 0.1, -0.2],
                    [0.3, 0.2 * np.cos(0.5 * k * 0.01), 0.1],
                ]
            )
            y = model.h(x)
            state = filter_step(state, sys, model, v, y, 0.01, params)
            x = compose(x, exp(so3(), 0.01 * lift(sys, x, v)))
        states.append(state)
    assert np.abs(states[0].xhat.matrix - states[1].xhat.matrix).max() < 1e-8
    assert np.abs(states[0].sigma - states[1].sigma).max() < 1e-8


@pytest.mark.parametrize("label", ["so3_right", "so3_dual", "se3_body"])
def test_error_trajectory_invariant_under_right_translation(label):
    # with no correction, the integrated error is unchanged when both truth
    # and estimate are right-translated and the input is transported
    sys = get_system(label)
    rng = np.random.default_rng(15)
    s = random_element(sys.spec, rng)
    psi_s = sys.input_action(s)
    x = random_element(sys.spec, rng)
    xhat = random_element(sys.spec, rng, scale=0.5)
    x2 = compose(x, s)
    xhat2 = compose(xhat, s)
    dt = 0.01
    for k in range(100):
        v = 0.5 * np.sin(0.4 * k * dt + np.arange(sys.input_dim))
        vs = psi_s @ v
        x = compose(x, exp(sys.spec, dt * lift(sys, x, v)))
        xhat = compose(xhat, exp(sys.spec, dt * lift(sys, xhat, v)))
        x2 = compose(x2, exp(sys.spec, dt * lift(sys, x2, vs)))
        xhat2 = compose(xhat2, exp(sys.spec, dt * lift(sys, xhat2, vs)))
        e1 = error(x, xhat).matrix
        e2 = error(x2, xhat2).matrix
        assert np.abs(e1 - e2).max() < 1e-6


def test_filter_step_projects_periodically():
    sys = get_system("so3_left")
    model = direction_measurement([[0.0, 0.0, 1.0]])
    params = FilterParams(
        P=1e-2 * np.eye(3), Q=1e-2 * np.eye(3), sigma0=np.eye(3), k_proj=5
    )
    state = FilterState(xhat=identity(so3()), sigma=params.sigma0)
    for _ in range(20):
        state = filter_step(
            state, sys, model, [0.1, 0.0, 0.0], [0.0, 0.0, 1.0], 0.01, params
        )
    assert state.step == 20
    assert so3().membership_residual(state.xhat.matrix) < 1e-12
