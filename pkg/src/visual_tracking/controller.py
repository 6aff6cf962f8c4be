"""Adaptive image-space tracking law with observer-based reference signals.

Nothing in this module accepts an image velocity. The reference velocity
is built from the observed position x_o through the modified estimated
Jacobian ``J* = J_hat(q, (x_o + x_d) / 2)``, and its time derivative from
the observer and adaptation rates.
"""
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import parameterization as pz
from .errors import ConfigError
from .geometry import pinv_full_row
from .manipulator import dynamic_regressor
from .observer import observer_rhs


def _is_spd(A):
    A = np.atleast_2d(A)
    return np.allclose(A, A.T) and np.linalg.eigvalsh(A)[0] > 0.0


@dataclass(frozen=True)
class Gains:
    K: np.ndarray
    alpha: float
    gamma: float
    Gamma_d: np.ndarray
    Gamma_z_perp: np.ndarray
    Gamma_z: np.ndarray
    allow_theorem_violation: bool = False

    def __post_init__(self):
        for name in ("K", "Gamma_d", "Gamma_z_perp", "Gamma_z"):
            if not _is_spd(getattr(self, name)):
                raise ConfigError(f"gain {name} must be symmetric positive definite")
        if not (self.alpha > 0.0 and self.gamma > 0.0):
            raise ConfigError("alpha and gamma must be positive")
        if not self.satisfies_theorem and not self.allow_theorem_violation:
            raise ConfigError(
                f"alpha={self.alpha} must exceed gamma/3={self.gamma / 3.0} for convergence; "
                "set allow_theorem_violation (CLI: --allow-theorem-violation) to run anyway")

    @property
    def satisfies_theorem(self):
        return self.alpha > self.gamma / 3.0

    @classmethod
    def scaled_identity(cls, k, alpha, gamma, gamma_d, gamma_z_perp, gamma_z, m=1,
                        p1=pz.P1, p2=pz.P2, p3=8, allow_theorem_violation=False):
        """Gains where each matrix is a scalar multiple of the identity."""
        return cls(k * np.eye(2 * m), float(alpha), float(gamma), gamma_d * np.eye(p3),
                   gamma_z_perp * np.eye(p2), gamma_z * np.eye(p1), allow_theorem_violation)


@dataclass(frozen=True)
class ProjectionRegion:
    """Box bounds on the kinematic estimates."""

    a_z_lower: np.ndarray
    a_z_upper: np.ndarray
    a_z_perp_lower: np.ndarray
    a_z_perp_upper: np.ndarray

    def __post_init__(self):
        for lo, hi in ((self.a_z_lower, self.a_z_upper), (self.a_z_perp_lower, self.a_z_perp_upper)):
            if np.any(np.asarray(lo) >= np.asarray(hi)):
                raise ConfigError("projection lower bounds must be below upper bounds")

    @classmethod
    def unbounded(cls):
        inf = np.inf
        return cls(np.full(pz.P1, -inf), np.full(pz.P1, inf), np.full(pz.P2, -inf), np.full(pz.P2, inf))

    def contains(self, a_z, a_z_perp, strict=False):
        if strict:
            return bool(np.all(a_z > self.a_z_lower) and np.all(a_z < self.a_z_upper)
                        and np.all(a_z_perp > self.a_z_perp_lower)
                        and np.all(a_z_perp < self.a_z_perp_upper))
        return bool(np.all(a_z >= self.a_z_lower) and np.all(a_z <= self.a_z_upper)
                    and np.all(a_z_perp >= self.a_z_perp_lower)
                    and np.all(a_z_perp <= self.a_z_perp_upper))


@dataclass(frozen=True)
class ControllerState:
    a_d_hat: np.ndarray
    a_z_hat: np.ndarray
    a_z_perp_hat: np.ndarray


def project_rates(value, rate, lower, upper):
    """Zero every rate component that pushes outward at an active bound."""
    rate = np.array(rate, dtype=float)
    rate[(value >= upper) & (rate > 0.0)] = 0.0
    rate[(value <= lower) & (rate < 0.0)] = 0.0
    return rate


def project(state, rates, region, dt):
    """Advance the kinematic estimates by ``dt`` under box projection.

    ``rates`` is ``(a_d_dot, a_z_dot, a_z_perp_dot)``. Inside the region this
    is a plain Euler update; the result never leaves the region.
    """
    a_d_dot, a_z_dot, a_z_perp_dot = rates
    a_z_dot = project_rates(state.a_z_hat, a_z_dot, region.a_z_lower, region.a_z_upper)
    a_z_perp_dot = project_rates(state.a_z_perp_hat, a_z_perp_dot,
                                 region.a_z_perp_lower, region.a_z_perp_upper)
    return ControllerState(
        state.a_d_hat + dt * np.asarray(a_d_dot),
        np.clip(state.a_z_hat + dt * a_z_dot, region.a_z_lower, region.a_z_upper),
        np.clip(state.a_z_perp_hat + dt * a_z_perp_dot, region.a_z_perp_lower, region.a_z_perp_upper),
    )


def reference_velocity(q, x_o, x_d, xdot_d, a_z_hat, a_z_perp_hat, gamma):
    """Joint reference velocity and the modified estimated Jacobian J*.

    Raises RankDeficient if J* loses full row rank.
    """
    x_mid = 0.5 * (np.asarray(x_o) + x_d)
    Jstar = pz.image_jacobian(q, x_mid, a_z_hat, a_z_perp_hat)
    xdot_r = np.asarray(xdot_d) - gamma * (np.asarray(x_o) - x_d)
    z_hat = pz.checked_depth(q, a_z_hat)
    return pinv_full_row(Jstar) @ (z_hat * xdot_r), Jstar


def modified_jacobian_rate(q, qdot, x_o, x_d, xdot_o, xdot_d, a_z_hat, a_z_perp_hat,
                           a_z_hat_dot, a_z_perp_hat_dot):
    """Total time derivative of J* given all ingredient rates."""
    phi, dphi, ddphi = pz.depth_basis(q)
    B, dB = pz.perp_basis(q)
    J_z = a_z_hat @ dphi
    J_z_dot = a_z_hat_dot @ dphi + a_z_hat @ (ddphi @ qdot)
    J_perp_dot = np.tensordot(a_z_perp_hat_dot, B, axes=1) + np.tensordot(a_z_perp_hat, dB @ qdot, axes=1)
    x_mid = 0.5 * (np.asarray(x_o) + x_d)
    x_mid_dot = 0.5 * (np.asarray(xdot_o) + xdot_d)
    return J_perp_dot - np.outer(x_mid_dot, J_z) - np.outer(x_mid, J_z_dot)


def reference_acceleration(q, qdot, x_o, x_d, xdot_o, xdot_d, xddot_d, a_z_hat, a_z_perp_hat,
                           a_z_hat_dot, a_z_perp_hat_dot, gamma):
    """Closed-form time derivative of the joint reference velocity.

    ``xdot_o`` must come from the observer, and the estimate rates from the
    adaptation laws; the measured image velocity is never needed.
    """
    x_mid = 0.5 * (np.asarray(x_o) + x_d)
    Jstar = pz.image_jacobian(q, x_mid, a_z_hat, a_z_perp_hat)
    Jp = pinv_full_row(Jstar)
    Jstar_dot = modified_jacobian_rate(q, qdot, x_o, x_d, xdot_o, xdot_d, a_z_hat, a_z_perp_hat,
                                       a_z_hat_dot, a_z_perp_hat_dot)
    phi, dphi, _ = pz.depth_basis(q)
    z_hat = pz.checked_depth(q, a_z_hat)
    z_hat_dot = phi @ a_z_hat_dot + (dphi @ qdot) @ a_z_hat
    e = np.asarray(x_o) - x_d
    xdot_r = np.asarray(xdot_d) - gamma * e
    xddot_r = np.asarray(xddot_d) - gamma * (np.asarray(xdot_o) - xdot_d)
    qdot_r = Jp @ (z_hat * xdot_r)
    n = len(q)
    return (Jp @ (z_hat * xddot_r + z_hat_dot * xdot_r - Jstar_dot @ qdot_r)
            + (np.eye(n) - Jp @ Jstar) @ Jstar_dot.T @ Jp.T @ qdot_r)


def sliding_vector(qdot, qdot_r):
    return np.asarray(qdot) - qdot_r


def control_torque(Jstar, K, s, Y_d, a_d_hat):
    """Joint torque: ``-J*^T K J* s + Y_d a_d_hat``."""
    return -Jstar.T @ (K @ (Jstar @ s)) + Y_d @ a_d_hat


def kinematic_adaptation_rates(dx, dx_o, Y_perp, Y_star, Y_star_star, gains):
    """Unprojected ``(a_z_perp_dot, a_z_dot)``; no image velocity enters."""
    a_z_perp_dot = gains.Gamma_z_perp @ (Y_perp.T @ (dx - dx_o))
    a_z_dot = -gains.Gamma_z @ (Y_star_star.T @ dx - Y_star.T @ dx_o)
    return a_z_perp_dot, a_z_dot


def adaptation_rhs(s, dx, dx_o, Y_d, Y_perp, Y_star, Y_star_star, gains):
    """Unprojected rates ``(a_d_dot, a_z_perp_dot, a_z_dot)``.

    ``dx = x - x_d`` and ``dx_o = x_o - x``.
    """
    a_d_dot = -gains.Gamma_d @ (Y_d.T @ s)
    return (a_d_dot,) + kinematic_adaptation_rates(dx, dx_o, Y_perp, Y_star, Y_star_star, gains)


class ControlOutput(NamedTuple):
    xdot_o: np.ndarray
    xdot_r: np.ndarray
    qdot_r: np.ndarray
    qddot_r: np.ndarray
    s: np.ndarray
    tau: np.ndarray
    Jstar: np.ndarray
    a_d_dot: np.ndarray
    a_z_dot: np.ndarray
    a_z_perp_dot: np.ndarray


def evaluate(model, q, qdot, x, x_o, x_d, xdot_d, xddot_d, est, gains, region=None):
    """Run observer, reference signals, torque law and adaptation at one instant.

    ``model`` only supplies the regressor structure; its parameter values are
    never read. ``est`` is a :class:`ControllerState`.
    """
    q = np.asarray(q, dtype=float)
    qdot = np.asarray(qdot, dtype=float)
    x_o = np.asarray(x_o, dtype=float)
    a_z, a_p = est.a_z_hat, est.a_z_perp_hat

    xdot_o = observer_rhs(x_o, x, x_d, q, qdot, a_z, a_p, gains.alpha)
    qdot_r, Jstar = reference_velocity(q, x_o, x_d, xdot_d, a_z, a_p, gains.gamma)
    xdot_r = np.asarray(xdot_d) - gains.gamma * (x_o - x_d)
    s = sliding_vector(qdot, qdot_r)

    dx = x - x_d
    dx_o = x_o - x
    Y_perp = pz.Y_z_perp(q, qdot)
    Y_star = pz.Y_z_star(q, qdot, x, x_o, x_d, a_z, a_p)
    Y_ss = pz.Y_z_star_star(q, qdot, x_o, x_d, xdot_r)
    a_z_perp_dot, a_z_dot = kinematic_adaptation_rates(dx, dx_o, Y_perp, Y_star, Y_ss, gains)
    if region is not None:
        a_z_dot = project_rates(a_z, a_z_dot, region.a_z_lower, region.a_z_upper)
        a_z_perp_dot = project_rates(a_p, a_z_perp_dot, region.a_z_perp_lower, region.a_z_perp_upper)

    qddot_r = reference_acceleration(q, qdot, x_o, x_d, xdot_o, xdot_d, xddot_d, a_z, a_p,
                                     a_z_dot, a_z_perp_dot, gains.gamma)
    Y_d = dynamic_regressor(model, q, qdot, qdot_r, qddot_r)
    tau = control_torque(Jstar, gains.K, s, Y_d, est.a_d_hat)
    a_d_dot = -gains.Gamma_d @ (Y_d.T @ s)
    return ControlOutput(xdot_o, xdot_r, qdot_r, qddot_r, s, tau, Jstar, a_d_dot, a_z_dot, a_z_perp_dot)
