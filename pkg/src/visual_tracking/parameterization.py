"""Linear parameterizations of the image kinematics for the aligned-camera arm.

With the camera optical axis along base X_0 and the single feature at the
end-effector reference point, depth and the depth-rate-independent part of
the image Jacobian reduce to trigonometric shape functions of q:

    z(q)          = l2 c1 c2 + l3 c1 c23 + d_C           a_z      = (l2, l3, d_C)
    J_perp(q) qd  = fb l2 d/dt[s1 c2, s2]
                  + fb l3 d/dt[s1 c23, s23]              a_z_perp = (fb l2, fb l3)

where ``fb`` is focal length times pixel scale. Every matrix that the
controller estimates (Z, Zdot, J_z, J_perp, J) is assembled from these
bases with whatever parameter vector is passed in, so the same code yields
ground truth (true a) and estimates (a_hat).
"""
from dataclasses import dataclass

import numpy as np

from .errors import SingularZhat

P1 = 3  # depth parameters
P2 = 2  # depth-rate-independent kinematic parameters

_E1 = np.array([1.0, 0.0, 0.0])
_E2 = np.array([0.0, 1.0, 0.0])
_E23 = np.array([0.0, 1.0, 1.0])
_E11 = np.outer(_E1, _E1)
# per pitch-angle selector e: (e e^T, E1 e^T + e E1^T)
_OUTER = {id(e): (np.outer(e, e), np.outer(_E1, e) + np.outer(e, _E1)) for e in (_E2, _E23)}


def _cc(q, e):
    """cos q1 * cos(theta), theta = e . q: value, gradient, Hessian."""
    th = e @ q
    c1, s1, ct, st = np.cos(q[0]), np.sin(q[0]), np.cos(th), np.sin(th)
    ee, mixed = _OUTER[id(e)]
    grad = -s1 * ct * _E1 - c1 * st * e
    hess = (-c1 * ct) * (_E11 + ee) + (s1 * st) * mixed
    return c1 * ct, grad, hess


def _sc(q, e):
    """sin q1 * cos(theta)."""
    th = e @ q
    c1, s1, ct, st = np.cos(q[0]), np.sin(q[0]), np.cos(th), np.sin(th)
    ee, mixed = _OUTER[id(e)]
    grad = c1 * ct * _E1 - s1 * st * e
    hess = (-s1 * ct) * (_E11 + ee) - (c1 * st) * mixed
    return s1 * ct, grad, hess


def _s(q, e):
    """sin(theta)."""
    th = e @ q
    return np.sin(th), np.cos(th) * e, -np.sin(th) * _OUTER[id(e)][0]


def _memo_last(fn):
    """Cache the most recent result keyed on the bytes of q (bases are hot and pure)."""
    last = [None, None]

    def wrapper(q):
        q = np.asarray(q, dtype=float)
        key = q.tobytes()
        if last[0] != key:
            out = fn(q)
            for arr in out:
                arr.flags.writeable = False
            last[1] = out
            last[0] = key
        return last[1]

    wrapper.__doc__ = fn.__doc__
    wrapper.__name__ = fn.__name__
    return wrapper


@_memo_last
def depth_basis(q):
    """Shape functions phi(q) with ``z(q) = phi(q) . a_z``; plus grad and Hessian.

    Returns ``(phi (3,), dphi (3, n), ddphi (3, n, n))``.
    """
    f1, g1, h1 = _cc(q, _E2)
    f2, g2, h2 = _cc(q, _E23)
    n = len(q)
    phi = np.array([f1, f2, 1.0])
    dphi = np.array([g1, g2, np.zeros(n)])
    ddphi = np.array([h1, h2, np.zeros((n, n))])
    return phi, dphi, ddphi


@_memo_last
def perp_basis(q):
    """Basis B_k(q) with ``J_perp(q) = sum_k a_perp[k] B_k(q)``; plus dB_k/dq.

    Returns ``(B (2, 2, n), dB (2, 2, n, n))`` indexed [k, row, col(, i)].
    """
    _, gu2, hu2 = _sc(q, _E2)
    _, gu3, hu3 = _sc(q, _E23)
    _, gv2, hv2 = _s(q, _E2)
    _, gv3, hv3 = _s(q, _E23)
    B = np.array([[gu2, gv2], [gu3, gv3]])
    dB = np.array([[hu2, hv2], [hu3, hv3]])
    return B, dB


@dataclass(frozen=True)
class KinematicParameterization:
    """True kinematic parameters of the aligned-camera, single-feature system."""

    a_z: np.ndarray
    a_z_perp: np.ndarray
    m: int = 1

    @classmethod
    def from_scalars(cls, l2, l3, offset, focal_length, beta):
        fb = focal_length * beta
        return cls(np.array([l2, l3, offset], dtype=float),
                   np.array([fb * l2, fb * l3], dtype=float))

    @classmethod
    def for_system(cls, cam, model):
        """Derive the true vectors, checking that the system has the assumed structure."""
        from .camera import ALIGNED_ROTATION

        if model.m != 1 or np.any(np.asarray(model.feature_offsets) != 0.0):
            raise ValueError("regressors are derived for one feature at the end-effector reference point")
        if not np.allclose(cam.rotation, ALIGNED_ROTATION) or np.any(cam.translation[:2] != 0.0) \
                or cam.principal_point != (0.0, 0.0):
            raise ValueError("regressors are derived for the axis-aligned camera with zero principal point")
        _, l2, l3 = model.link_lengths
        return cls.from_scalars(l2, l3, cam.d0, cam.focal_length, cam.beta)


# -- the estimated / true matrices for a given parameter vector ------------------

def depth(q, a_z):
    return float(depth_basis(q)[0] @ a_z)


def depth_matrix(q, a_z):
    """Z(q) evaluated with parameters a_z (2m x 2m)."""
    return depth(q, a_z) * np.eye(2)


def depth_rate(q, qdot, a_z):
    return float(depth_basis(q)[1] @ qdot @ a_z)


def depth_rate_matrix(q, qdot, a_z):
    """Zdot(q) evaluated with parameters a_z."""
    return depth_rate(q, qdot, a_z) * np.eye(2)


def depth_jacobian(q, a_z):
    """J_z(q), 1 x n."""
    return (a_z @ depth_basis(q)[1]).reshape(1, -1)


def perp_jacobian(q, a_z_perp):
    """J_perp(q), 2 x n."""
    B, _ = perp_basis(q)
    return np.tensordot(a_z_perp, B, axes=1)


def image_jacobian(q, x, a_z, a_z_perp):
    """J(q, x) = J_perp(q) - X J_z(q), 2 x n."""
    return perp_jacobian(q, a_z_perp) - np.reshape(x, (2, 1)) @ depth_jacobian(q, a_z)


def decompose_jacobian(q, a_z, a_z_perp):
    """Return ``(J_perp, J_z)`` for the given parameter vectors."""
    return perp_jacobian(q, a_z_perp), depth_jacobian(q, a_z)


def checked_depth(q, a_z):
    """Estimated depth, raising SingularZhat unless strictly positive."""
    z = depth(q, a_z)
    if not z > 0.0:
        raise SingularZhat(f"estimated depth {z:.6g} is not positive")
    return z


# -- regressors ---------------------------------------------------------------

def Y_z(q, psi):
    """Depth regressor: ``Y_z(q, psi) @ a_z == Z(q) psi``."""
    return np.outer(psi, depth_basis(q)[0])


def Ybar_z(q, qdot, phi):
    """Depth-rate regressor: ``Ybar_z(q, qdot, phi) @ a_z == Zdot(q) phi``."""
    return np.outer(phi, depth_basis(q)[1] @ qdot)


def Y_z_perp(q, qdot):
    """Regressor with ``Y_z_perp(q, qdot) @ a_z_perp == J_perp(q) qdot``."""
    B, _ = perp_basis(q)
    return (B @ qdot).T


def Y_z_star(q, qdot, x, x_o, x_d, a_z_hat, a_z_perp_hat):
    """Combined depth regressor of the observer error dynamics."""
    z_hat = checked_depth(q, a_z_hat)
    zdot_hat = depth_rate(q, qdot, a_z_hat)
    J_hat = image_jacobian(q, x, a_z_hat, a_z_perp_hat)
    e = np.asarray(x_o) - x_d
    return (Y_z(q, J_hat @ qdot / z_hat)
            + Ybar_z(q, qdot, x + 0.5 * e)
            - 0.5 * Y_z(q, zdot_hat * e / z_hat))


def Y_z_star_star(q, qdot, x_o, x_d, xdot_r):
    """Depth regressor of the image tracking error dynamics."""
    return 0.5 * Ybar_z(q, qdot, np.asarray(x_o) + x_d) + Y_z(q, xdot_r)
