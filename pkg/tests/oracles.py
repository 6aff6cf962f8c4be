"""Independent oracles shared by the unit and acceptance tests."""
import numpy as np

from visual_tracking import controller as ct
from visual_tracking import manipulator as mp
from visual_tracking.sim import rk4_step


def smooth_path(t):
    """Analytic q, x_o, x_d and estimate paths with their exact rates."""
    w = np.array([0.7, 1.1, 0.9])
    q = np.array([0.9, 0.6, -0.9]) + 0.2 * np.sin(w * t)
    qd = 0.2 * w * np.cos(w * t)
    x_o = np.array([40.0, 60.0]) + 15.0 * np.array([np.cos(1.3 * t), np.sin(0.8 * t)])
    xd_o = 15.0 * np.array([-1.3 * np.sin(1.3 * t), 0.8 * np.cos(0.8 * t)])
    x_d = np.array([45.0, 65.0]) + 20.0 * np.array([np.cos(t), np.sin(t)])
    xd_d = 20.0 * np.array([-np.sin(t), np.cos(t)])
    xdd_d = -20.0 * np.array([np.cos(t), np.sin(t)])
    a_z = np.array([3.0, 2.5, 4.0]) + 0.3 * np.array([np.sin(t), np.cos(2 * t), np.sin(0.5 * t)])
    ad_z = 0.3 * np.array([np.cos(t), -2 * np.sin(2 * t), 0.5 * np.cos(0.5 * t)])
    a_p = np.array([220.0, 240.0]) + 10.0 * np.array([np.sin(0.3 * t), np.cos(0.4 * t)])
    ad_p = 10.0 * np.array([0.3 * np.cos(0.3 * t), -0.4 * np.sin(0.4 * t)])
    return q, qd, x_o, xd_o, x_d, xd_d, xdd_d, a_z, ad_z, a_p, ad_p


def qddot_r_fd_error(times=np.linspace(0.0, 6.0, 25), h=1e-5, gamma=10.0):
    """Worst relative error of the closed-form qddot_r against central differences of qdot_r."""
    def qdot_r(t):
        q, _, x_o, _, x_d, xd_d, _, a_z, _, a_p, _ = smooth_path(t)
        return ct.reference_velocity(q, x_o, x_d, xd_d, a_z, a_p, gamma)[0]

    worst = 0.0
    for t in times:
        q, qd, x_o, xd_o, x_d, xd_d, xdd_d, a_z, ad_z, a_p, ad_p = smooth_path(t)
        closed = ct.reference_acceleration(q, qd, x_o, x_d, xd_o, xd_d, xdd_d, a_z, a_p, ad_z, ad_p, gamma)
        fd = (qdot_r(t + h) - qdot_r(t - h)) / (2 * h)
        worst = max(worst, np.linalg.norm(closed - fd) / np.linalg.norm(fd))
    return worst


def free_motion(model, tau_fn):
    def f(t, y):
        q, qd = y[:3], y[3:6]
        M, C, g = mp.dynamics(model, q, qd)
        return np.concatenate([qd, np.linalg.solve(M, tau_fn(t, q, qd) - C @ qd - g)])
    return f


def free_energy_drift(duration=1.0, dt=0.005):
    """Max kinetic-energy drift of the arm with tau = 0 and g = 0."""
    model = mp.ManipulatorModel(gravity=0.0)
    f = free_motion(model, lambda t, q, qd: np.zeros(3))
    y = np.array([0.3, 0.5, -0.7, 0.4, -0.3, 0.6])
    energy = lambda y: 0.5 * y[3:] @ mp.mass_matrix(model, y[:3]) @ y[3:]
    e0, drift = energy(y), 0.0
    for k in range(int(round(duration / dt))):
        y = rk4_step(f, k * dt, y, dt)
        drift = max(drift, abs(energy(y) - e0))
    return drift
