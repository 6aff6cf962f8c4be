import inspect

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from visual_tracking import controller as ct
from visual_tracking import manipulator as mp
from visual_tracking import observer as ob
from visual_tracking import parameterization as pz
from visual_tracking.errors import ConfigError
from visual_tracking.geometry import pinv_full_row

from oracles import qddot_r_fd_error, smooth_path

A_Z = np.array([2.0, 2.0, 5.0])
A_P = np.array([270.0, 270.0])


def _gains(alpha=10.0, gamma=10.0, **kw):
    return ct.Gains.scaled_identity(0.001, alpha, gamma, 300.0, 600.0, 0.2, **kw)


def test_reference_acceleration_matches_finite_difference():
    assert qddot_r_fd_error() < 1e-4


def test_modified_jacobian_rate_matches_finite_difference():
    h = 1e-5
    for t in np.linspace(0.0, 5.0, 11):
        q, qd, x_o, xd_o, x_d, xd_d, _, a_z, ad_z, a_p, ad_p = smooth_path(t)
        closed = ct.modified_jacobian_rate(q, qd, x_o, x_d, xd_o, xd_d, a_z, a_p, ad_z, ad_p)

        def Jstar(s):
            q, _, x_o, _, x_d, _, _, a_z, _, a_p, _ = smooth_path(s)
            return pz.image_jacobian(q, 0.5 * (x_o + x_d), a_z, a_p)

        np.testing.assert_allclose(closed, (Jstar(t + h) - Jstar(t - h)) / (2 * h), rtol=1e-6, atol=1e-5)


def test_reference_velocity_identities(rng):
    for t in rng.uniform(0, 10, 20):
        q, qd, x_o, _, x_d, xd_d, _, a_z, _, a_p, _ = smooth_path(t)
        qdot_r, Jstar = ct.reference_velocity(q, x_o, x_d, xd_d, a_z, a_p, 10.0)
        xdot_r = xd_d - 10.0 * (x_o - x_d)
        z_hat = pz.depth(q, a_z)
        np.testing.assert_allclose(Jstar @ qdot_r, z_hat * xdot_r, rtol=1e-10)
        s = ct.sliding_vector(qd, qdot_r)
        np.testing.assert_allclose(Jstar @ s, Jstar @ qd - z_hat * xdot_r, rtol=1e-9, atol=1e-9)
        P = np.eye(3) - pinv_full_row(Jstar) @ Jstar
        assert np.abs(Jstar @ P).max() < 1e-10 * np.abs(Jstar).max()


def test_equilibrium_has_zero_rates(cam, model):
    """Perfect estimates, x = x_o = x_d and qdot = qdot_r leave nothing to correct."""
    from visual_tracking import camera as cm

    q = np.array([1.1, 0.8, -1.0])
    x = cm.project(cam, mp.feature_positions(model, q)[0])
    xd_d = np.array([3.0, -2.0])
    qdot_r, _ = ct.reference_velocity(q, x, x, xd_d, A_Z, A_P, 10.0)
    est = ct.ControllerState(model.a_d, A_Z, A_P)
    out = ct.evaluate(model, q, qdot_r, x, x, x, xd_d, np.zeros(2), est, _gains())
    z = cm.depth(cam, mp.feature_positions(model, q)[0])
    xdot = cm.interaction_matrix(cam, x) @ mp.feature_jacobian(model, q) @ qdot_r / z
    np.testing.assert_allclose(xdot - xd_d, 0.0, atol=1e-9)
    np.testing.assert_allclose(out.xdot_o - xdot, 0.0, atol=1e-9)
    np.testing.assert_allclose(out.s, 0.0, atol=1e-12)
    for rate in (out.a_d_dot, out.a_z_dot, out.a_z_perp_dot):
        np.testing.assert_allclose(rate, 0.0, atol=1e-9)


def test_gains_validation():
    assert _gains().satisfies_theorem
    with pytest.raises(ConfigError):
        _gains(alpha=2.5, gamma=10.0)
    with pytest.raises(ConfigError):
        _gains(alpha=10.0 / 3.0, gamma=10.0)
    assert not _gains(alpha=2.5, gamma=10.0, allow_theorem_violation=True).satisfies_theorem
    with pytest.raises(ConfigError):
        ct.Gains.scaled_identity(-1.0, 10.0, 10.0, 300.0, 600.0, 0.2)
    with pytest.raises(ConfigError):
        ct.Gains(np.array([[1.0, 2.0], [0.0, 1.0]]), 10.0, 10.0, np.eye(8), np.eye(2), np.eye(3))


def test_runtime_signatures_take_no_image_velocity():
    forbidden = {"xdot", "x_dot", "xdot_true", "xdot_meas"}
    funcs = [ob.observer_rhs] + [f for name, f in inspect.getmembers(ct, inspect.isfunction)
                                 if f.__module__ == ct.__name__]
    for f in funcs:
        assert not forbidden & set(inspect.signature(f).parameters), f.__name__


box = st.tuples(st.floats(-10, 0), st.floats(0.1, 10))


@settings(max_examples=200)
@given(arrays(float, 3, elements=st.floats(-20, 20)), arrays(float, 3, elements=st.floats(-50, 50)),
       arrays(float, 2, elements=st.floats(-20, 20)), arrays(float, 2, elements=st.floats(-50, 50)),
       st.floats(1e-4, 1.0))
def test_projection_stays_in_region_and_is_idempotent(a_z, r_z, a_p, r_p, dt):
    region = ct.ProjectionRegion(np.full(3, -5.0), np.full(3, 5.0), np.full(2, -3.0), np.full(2, 3.0))
    start = ct.ControllerState(np.zeros(8), np.clip(a_z, -5, 5), np.clip(a_p, -3, 3))
    once = ct.project(start, (np.zeros(8), r_z, r_p), region, dt)
    assert region.contains(once.a_z_hat, once.a_z_perp_hat)
    twice = ct.project(once, (np.zeros(8), np.zeros(3), np.zeros(2)), region, dt)
    np.testing.assert_array_equal(twice.a_z_hat, once.a_z_hat)
    np.testing.assert_array_equal(twice.a_z_perp_hat, once.a_z_perp_hat)
    r1 = ct.project_rates(once.a_z_hat, r_z, region.a_z_lower, region.a_z_upper)
    np.testing.assert_array_equal(ct.project_rates(once.a_z_hat, r1, region.a_z_lower, region.a_z_upper), r1)


def test_projection_is_plain_euler_inside():
    region = ct.ProjectionRegion(np.full(3, -5.0), np.full(3, 5.0), np.full(2, -3.0), np.full(2, 3.0))
    start = ct.ControllerState(np.zeros(8), np.zeros(3), np.zeros(2))
    out = ct.project(start, (np.ones(8), np.ones(3), -np.ones(2)), region, 0.1)
    np.testing.assert_allclose(out.a_z_hat, 0.1)
    np.testing.assert_allclose(out.a_z_perp_hat, -0.1)
    np.testing.assert_allclose(out.a_d_hat, 0.1)


def test_projection_zeroes_outward_rates_only():
    r = ct.project_rates(np.array([1.0, 1.0, 0.0]), np.array([2.0, -2.0, 3.0]), np.zeros(3), np.ones(3))
    np.testing.assert_array_equal(r, [0.0, -2.0, 3.0])


def test_region_rejects_inverted_bounds():
    with pytest.raises(ConfigError):
        ct.ProjectionRegion(np.ones(3), np.zeros(3), np.zeros(2), np.ones(2))
