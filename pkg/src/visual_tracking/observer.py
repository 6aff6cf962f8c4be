"""Image-space observer driven by joint measurements and kinematic estimates.

The observer only reads the measured image position x, joint position and
velocity, and the current estimates; there is deliberately no argument
through which an image velocity could enter.
"""
import numpy as np

from . import parameterization as pz


def observer_rhs(x_o, x, x_d, q, qdot, a_z_hat, a_z_perp_hat, alpha):
    """Time derivative of the observed image position x_o."""
    z_hat = pz.checked_depth(q, a_z_hat)
    zdot_hat = pz.depth_rate(q, qdot, a_z_hat)
    J_hat = pz.image_jacobian(q, x, a_z_hat, a_z_perp_hat)
    x_o = np.asarray(x_o, dtype=float)
    return (J_hat @ qdot - 0.5 * zdot_hat * (x_o - x_d)) / z_hat - alpha * (x_o - x)


def observer_error_residual(x_o, x, x_d, q, qdot, xdot_o, xdot, a_z_hat, a_z_perp_hat,
                            a_z, a_z_perp, alpha):
    """Defect of the observer error dynamics written in regressor form.

    Evaluates ``Z dDx_o + 1/2 Zdot (x_o - x_d)`` minus
    ``-alpha Z Dx_o + Y_perp Da_perp - Y_star Da_z``; it vanishes identically
    when ``xdot_o`` comes from :func:`observer_rhs`. Needs ground truth, so
    it is for analysis and tests only.
    """
    z = pz.depth(q, a_z)
    zdot = pz.depth_rate(q, qdot, a_z)
    e_o = np.asarray(x_o) - x
    lhs = z * (np.asarray(xdot_o) - xdot) + 0.5 * zdot * (np.asarray(x_o) - x_d)
    rhs = (-alpha * z * e_o
           + pz.Y_z_perp(q, qdot) @ (np.asarray(a_z_perp_hat) - a_z_perp)
           - pz.Y_z_star(q, qdot, x, x_o, x_d, a_z_hat, a_z_perp_hat) @ (np.asarray(a_z_hat) - a_z))
    return lhs - rhs


def observer_error_raw(x_o, x, x_d, q, qdot, a_z_hat, a_z_perp_hat, a_z, a_z_perp, alpha):
    """Observer error rate written directly from true and estimated kinematics.

    ``Z^-1 J qdot`` is used for the true image velocity, so this is the
    unrearranged form the regressor residual is compared against.
    """
    z = pz.depth(q, a_z)
    J = pz.image_jacobian(q, x, a_z, a_z_perp)
    z_hat = pz.depth(q, a_z_hat)
    zdot_hat = pz.depth_rate(q, qdot, a_z_hat)
    J_hat = pz.image_jacobian(q, x, a_z_hat, a_z_perp_hat)
    return (J_hat @ qdot / z_hat - J @ qdot / z
            - 0.5 * zdot_hat * (np.asarray(x_o) - x_d) / z_hat - alpha * (np.asarray(x_o) - x))
