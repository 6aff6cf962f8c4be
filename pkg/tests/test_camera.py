import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from visual_tracking import camera as cm
from visual_tracking.errors import NonPositiveDepth


def test_aligned_camera_blocks(cam):
    assert cam.focal_length * cam.beta == pytest.approx(135.0)
    np.testing.assert_array_equal(cam.d3, [1.0, 0.0, 0.0])
    assert cam.d0 == 5.0
    np.testing.assert_array_equal(cam.p_bar, [0.0, 0.0])
    np.testing.assert_allclose(cam.D_bar, [[0.0, 135.0, 0.0], [0.0, 0.0, 135.0]])


def test_projection_matches_homogeneous_matrix(cam, rng):
    c = cm.CameraModel.from_intrinsics(0.01, 1000.0, np.eye(3), [0.1, -0.2, 3.0], (320.0, 240.0))
    P = c.projection_matrix
    for _ in range(20):
        r = rng.uniform(-1, 1, 3)
        h = P @ np.append(r, 1.0)
        np.testing.assert_allclose(cm.project(c, r), h[:2] / h[2], rtol=1e-13)
        assert cm.depth(c, r) == pytest.approx(h[2])


def test_image_velocity_matches_finite_difference(cam, rng):
    for _ in range(20):
        r, rdot = rng.uniform(-2, 2, 3), rng.normal(size=3)
        x = cm.project(cam, r)
        h = 1e-6
        fd = (cm.project(cam, r + h * rdot) - cm.project(cam, r - h * rdot)) / (2 * h)
        np.testing.assert_allclose(cm.interaction_matrix(cam, x) @ rdot / cm.depth(cam, r), fd, rtol=1e-6, atol=1e-6)


@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3),
       st.floats(-10, 10))
def test_interaction_matrix_is_affine_in_x(u1, v1, u2, v2, lam):
    cam = cm.CameraModel.aligned()
    a, b = np.array([u1, v1]), np.array([u2, v2])
    lhs = cm.interaction_matrix(cam, lam * a + (1 - lam) * b)
    rhs = lam * cm.interaction_matrix(cam, a) + (1 - lam) * cm.interaction_matrix(cam, b)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9 * (1 + abs(lam)) * 1e3)


def test_non_positive_depth_raises(cam):
    with pytest.raises(NonPositiveDepth):
        cm.project(cam, np.array([-5.0, 0.0, 0.0]))
    with pytest.raises(NonPositiveDepth):
        cm.project(cam, np.array([-6.0, 1.0, 0.0]))


def test_stacked_maps_shapes(cam):
    r = np.array([[0.5, 0.1, 0.2], [1.0, -0.3, 0.0]])
    x = np.array([cm.project(cam, ri) for ri in r])
    Z, N, X = cm.stacked_maps(cam, x, r)
    assert Z.shape == (4, 4) and N.shape == (4, 6) and X.shape == (4, 2)
    np.testing.assert_allclose(N[:2, :3], cm.interaction_matrix(cam, x[0]))
    assert Z[2, 2] == pytest.approx(6.0)
    with pytest.raises(ValueError):
        cm.stacked_maps(cam, x, r[:1])
