import numpy as np
import pytest

from visual_tracking import analysis as an
from visual_tracking import camera as cm
from visual_tracking import manipulator as mp
from visual_tracking import parameterization as pz


@pytest.fixture
def truth(cam, model):
    return pz.KinematicParameterization.for_system(cam, model)


def test_true_vectors(truth):
    np.testing.assert_allclose(truth.a_z, [2.0, 2.0, 5.0])
    np.testing.assert_allclose(truth.a_z_perp, [270.0, 270.0])


def test_initial_estimate_mapping():
    est = pz.KinematicParameterization.from_scalars(3.0, 3.0, 3.0, 0.1, 700.0)
    np.testing.assert_allclose(est.a_z, [3.0, 3.0, 3.0])
    np.testing.assert_allclose(est.a_z_perp, [210.0, 210.0])


def test_matches_camera_and_arm(cam, model, truth, rng):
    for _ in range(100):
        q, qd = an.random_joint_state(rng)
        r = mp.feature_positions(model, q)[0]
        if cm.depth(cam, r) < 0.1:
            continue
        x = cm.project(cam, r)
        Jf = mp.feature_jacobian(model, q)
        assert pz.depth(q, truth.a_z) == pytest.approx(cm.depth(cam, r), rel=1e-13)
        np.testing.assert_allclose(pz.perp_jacobian(q, truth.a_z_perp), cam.D_bar @ Jf, atol=1e-11)
        np.testing.assert_allclose(pz.image_jacobian(q, x, truth.a_z, truth.a_z_perp),
                                   cm.interaction_matrix(cam, x) @ Jf, atol=1e-9)
        assert pz.depth_rate(q, qd, truth.a_z) == pytest.approx(cam.d3 @ Jf @ qd, abs=1e-12)


def test_basis_derivatives_match_finite_differences(rng):
    h = 1e-6
    for _ in range(30):
        q, _ = an.random_joint_state(rng)
        phi, dphi, ddphi = pz.depth_basis(q)
        B, dB = pz.perp_basis(q)
        for i, e in enumerate(np.eye(3)):
            p_plus, dp_plus, _ = pz.depth_basis(q + h * e)
            p_minus, dp_minus, _ = pz.depth_basis(q - h * e)
            np.testing.assert_allclose(dphi[:, i], (p_plus - p_minus) / (2 * h), atol=1e-8)
            np.testing.assert_allclose(ddphi[:, :, i], (dp_plus - dp_minus) / (2 * h), atol=1e-8)
            B_plus, _ = pz.perp_basis(q + h * e)
            B_minus, _ = pz.perp_basis(q - h * e)
            np.testing.assert_allclose(dB[..., i], (B_plus - B_minus) / (2 * h), atol=1e-8)


def test_memoized_basis_tracks_its_argument(rng):
    q1, q2 = rng.normal(size=3), rng.normal(size=3)
    first = pz.depth_basis(q1)[0].copy()
    pz.depth_basis(q2)
    np.testing.assert_array_equal(pz.depth_basis(q1)[0], first)
    with pytest.raises(ValueError):
        pz.depth_basis(q1)[0][0] = 1.0


def test_regressor_identities(truth, rng):
    for _ in range(100):
        q, qd = an.random_joint_state(rng)
        psi = rng.normal(size=2)
        np.testing.assert_allclose(pz.Y_z(q, psi) @ truth.a_z, pz.depth_matrix(q, truth.a_z) @ psi, atol=1e-12)
        np.testing.assert_allclose(pz.Ybar_z(q, qd, psi) @ truth.a_z,
                                   pz.depth_rate_matrix(q, qd, truth.a_z) @ psi, atol=1e-12)
        np.testing.assert_allclose(pz.Y_z_perp(q, qd) @ truth.a_z_perp,
                                   pz.perp_jacobian(q, truth.a_z_perp) @ qd, atol=1e-10)


def test_tracking_regressor_identity(truth, rng):
    for _ in range(50):
        q, qd = an.random_joint_state(rng)
        x_o, x_d, xdot_r = rng.normal(0, 50, (3, 2))
        lhs = pz.Y_z_star_star(q, qd, x_o, x_d, xdot_r) @ truth.a_z
        rhs = (0.5 * pz.depth_rate(q, qd, truth.a_z) * (x_o + x_d)
               + pz.depth(q, truth.a_z) * xdot_r)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-12, atol=1e-10)


def test_identity_suite_passes(cam, model):
    assert all(r.passed for r in an.identity_suite(cam, model, samples=200))


def test_unsupported_systems_rejected(cam, model):
    with pytest.raises(ValueError):
        pz.KinematicParameterization.for_system(cam, model.with_features([(0, 0, 0), (0.1, 0, 0)]))
    tilted = cm.CameraModel.from_intrinsics(0.15, 900.0, np.eye(3), [0.0, 0.0, 5.0])
    with pytest.raises(ValueError):
        pz.KinematicParameterization.for_system(tilted, model)


def test_checked_depth_raises():
    from visual_tracking.errors import SingularZhat

    with pytest.raises(SingularZhat):
        pz.checked_depth(np.zeros(3), np.array([-1.0, -1.0, -1.0]))
