"""Ground-truth 3-DOF articulated arm (yaw base joint, two pitch joints).

Joint 1 turns about the vertical base axis Z_0; joints 2 and 3 pitch in the
vertical plane containing the arm. Link 1 is vertical with length l1; links
2 and 3 have lengths l2 and l3. Every link is a uniform solid cylinder.

The dynamics are linear in eight grouped parameters ``a_d``:

====  =====================================  =======================
 idx  grouped parameter                       role
====  =====================================  =======================
 0    I1 (link 1 axial inertia)              M11
 1    J2 + m3 l2^2                            M11 (cos^2 q2), M22
 2    J3                                      M11 (cos^2 q23), M22..M33
 3    l2 m3 lc3                               elbow coupling
 4    Ia2 (link 2 axial inertia)             M11 (sin^2 q2)
 5    Ia3 (link 3 axial inertia)             M11 (sin^2 q23)
 6    g (m2 lc2 + m3 l2)                      gravity, shoulder
 7    g m3 lc3                                gravity, elbow
====  =====================================  =======================

with ``J_i = I_perp,i + m_i lc_i^2`` the second moment of link i about its
proximal joint. C is built from Christoffel symbols of M, so Mdot - 2C is
skew-symmetric by construction.
"""
from dataclasses import dataclass

import numpy as np

from .geometry import skew

N_JOINTS = 3
N_DYN_PARAMS = 8
DYNAMIC_PARAMETER_NAMES = (
    "I1", "J2+m3*l2^2", "J3", "l2*m3*lc3", "Ia2", "Ia3", "g*(m2*lc2+m3*l2)", "g*m3*lc3",
)


def _rot_z(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rot_y(a):
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


@dataclass(frozen=True)
class ManipulatorModel:
    link_lengths: tuple = (2.0, 2.0, 2.0)
    link_masses: tuple = (2.0, 2.0, 2.0)
    link_radius: float = 0.1
    gravity: float = 9.81
    # feature offsets c_i from the end-effector reference point, end-effector frame
    feature_offsets: tuple = ((0.0, 0.0, 0.0),)

    n = N_JOINTS

    @property
    def m(self):
        return len(self.feature_offsets)

    @property
    def reach(self):
        return float(sum(self.link_lengths))

    @property
    def a_d(self):
        """True grouped dynamic parameters (see module docstring for layout)."""
        l1, l2, l3 = self.link_lengths
        m1, m2, m3 = self.link_masses
        r = self.link_radius
        axial = [0.5 * mi * r * r for mi in (m1, m2, m3)]
        perp = [mi * (3.0 * r * r + li * li) / 12.0
                for mi, li in zip((m1, m2, m3), (l1, l2, l3))]
        lc2, lc3 = 0.5 * l2, 0.5 * l3
        J2 = perp[1] + m2 * lc2 ** 2
        J3 = perp[2] + m3 * lc3 ** 2
        g = self.gravity
        return np.array([axial[0], J2 + m3 * l2 ** 2, J3, l2 * m3 * lc3,
                         axial[1], axial[2], g * (m2 * lc2 + m3 * l2), g * m3 * lc3])

    def with_features(self, offsets):
        return ManipulatorModel(self.link_lengths, self.link_masses, self.link_radius,
                                self.gravity, tuple(tuple(map(float, c)) for c in offsets))


# -- kinematics ---------------------------------------------------------------

def end_effector_pose(model, q):
    """Position of the end-effector reference point and its orientation."""
    l1, l2, l3 = model.link_lengths
    q1, q2, q3 = q
    rho = l2 * np.cos(q2) + l3 * np.cos(q2 + q3)
    h = l1 + l2 * np.sin(q2) + l3 * np.sin(q2 + q3)
    p = np.array([rho * np.cos(q1), rho * np.sin(q1), h])
    R = _rot_z(q1) @ _rot_y(-(q2 + q3))
    return p, R


def feature_positions(model, q):
    """Base-frame feature positions r_i(q) as an (m, 3) array."""
    p, R = end_effector_pose(model, q)
    c = np.asarray(model.feature_offsets, dtype=float)
    return p + c @ R.T


def manipulator_jacobian(model, q):
    """6 x 3 Jacobian mapping qdot to (v0, w0) of the reference point."""
    _, l2, l3 = model.link_lengths
    q1, q2, q3 = q
    c1, s1 = np.cos(q1), np.sin(q1)
    c23, s23 = np.cos(q2 + q3), np.sin(q2 + q3)
    rho = l2 * np.cos(q2) + l3 * c23
    sig = l2 * np.sin(q2) + l3 * s23
    Jr = np.zeros((6, 3))
    Jr[:3, 0] = [-rho * s1, rho * c1, 0.0]
    Jr[:3, 1] = [-sig * c1, -sig * s1, rho]
    Jr[:3, 2] = [-l3 * s23 * c1, -l3 * s23 * s1, l3 * c23]
    Jr[3:, 0] = [0.0, 0.0, 1.0]
    Jr[3:, 1] = [s1, -c1, 0.0]
    Jr[3:, 2] = [s1, -c1, 0.0]
    return Jr


def feature_stack_matrix(offsets_base):
    """J_f with rows ``[I3, -S(c_i)]`` for base-frame offsets c_i."""
    return np.vstack([np.hstack([np.eye(3), -skew(c)]) for c in offsets_base])


def feature_stack_jacobian(model, q):
    """J_f (3m x 6) at configuration q, offsets rotated into the base frame."""
    _, R = end_effector_pose(model, q)
    c = np.asarray(model.feature_offsets, dtype=float) @ R.T
    return feature_stack_matrix(c)


def feature_jacobian(model, q):
    """J_f J_r: maps qdot to the stacked feature velocities rdot (3m x 3)."""
    return feature_stack_jacobian(model, q) @ manipulator_jacobian(model, q)


# -- dynamics -------------------------------------------------------------------

def _inertia_basis(q):
    """Basis matrices M_k(q) and their partials dM_k/dq_i.

    Returns ``Mk`` of shape (8, 3, 3) and ``dMk`` of shape (8, 3, 3, 3) indexed
    [param, i, row, col]. Gravity parameters have zero inertia basis.
    """
    _, q2, q3 = q
    c2, s2 = np.cos(q2), np.sin(q2)
    c3, s3 = np.cos(q3), np.sin(q3)
    c23, s23 = np.cos(q2 + q3), np.sin(q2 + q3)
    Mk = np.zeros((N_DYN_PARAMS, 3, 3))
    dMk = np.zeros((N_DYN_PARAMS, 3, 3, 3))

    Mk[0, 0, 0] = 1.0

    Mk[1, 0, 0] = c2 * c2
    Mk[1, 1, 1] = 1.0
    dMk[1, 1, 0, 0] = -2.0 * c2 * s2

    Mk[2, 0, 0] = c23 * c23
    Mk[2, 1:, 1:] = 1.0
    dMk[2, 1, 0, 0] = dMk[2, 2, 0, 0] = -2.0 * c23 * s23

    Mk[3, 0, 0] = 2.0 * c2 * c23
    Mk[3, 1, 1] = 2.0 * c3
    Mk[3, 1, 2] = Mk[3, 2, 1] = c3
    dMk[3, 1, 0, 0] = -2.0 * (s2 * c23 + c2 * s23)
    dMk[3, 2, 0, 0] = -2.0 * c2 * s23
    dMk[3, 2, 1, 1] = -2.0 * s3
    dMk[3, 2, 1, 2] = dMk[3, 2, 2, 1] = -s3

    Mk[4, 0, 0] = s2 * s2
    dMk[4, 1, 0, 0] = 2.0 * s2 * c2

    Mk[5, 0, 0] = s23 * s23
    dMk[5, 1, 0, 0] = dMk[5, 2, 0, 0] = 2.0 * s23 * c23
    return Mk, dMk


def _gravity_basis(q):
    _, q2, q3 = q
    c2, c23 = np.cos(q2), np.cos(q2 + q3)
    G = np.zeros((N_DYN_PARAMS, 3))
    G[6, 1] = c2
    G[7, 1] = c23
    G[7, 2] = c23
    return G


def _christoffel_basis(dMk, qdot):
    """C_k(q, qdot) per parameter: C[r, c] = sum_i Gamma_{i c r} qdot_i."""
    # Gamma[p, i, r, c] = 1/2 (dM[p, i, r, c] + dM[p, c, r, i] - dM[p, r, i, c])
    gam = 0.5 * (dMk + dMk.transpose(0, 3, 2, 1) - dMk.transpose(0, 2, 1, 3))
    return np.einsum("pirc,i->prc", gam, qdot)


def mass_matrix(model, q, a=None):
    a = model.a_d if a is None else a
    Mk, _ = _inertia_basis(q)
    return np.tensordot(a, Mk, axes=1)


def dynamics(model, q, qdot, a=None):
    """Return ``(M, C, g)`` at (q, qdot) for parameters ``a`` (default: true)."""
    a = model.a_d if a is None else np.asarray(a, dtype=float)
    Mk, dMk = _inertia_basis(q)
    Ck = _christoffel_basis(dMk, np.asarray(qdot, dtype=float))
    return (np.tensordot(a, Mk, axes=1), np.tensordot(a, Ck, axes=1),
            a @ _gravity_basis(q))


def mass_matrix_derivative(model, q, qdot, a=None):
    """Exact time derivative of M along qdot."""
    a = model.a_d if a is None else a
    _, dMk = _inertia_basis(q)
    return np.einsum("p,pirc,i->rc", a, dMk, qdot)


def dynamic_regressor(model, q, qdot, xi, xi_dot):
    """Y_d with ``Y_d @ a == M(q) xi_dot + C(q, qdot) xi + g(q)`` for any a."""
    Mk, dMk = _inertia_basis(q)
    Ck = _christoffel_basis(dMk, np.asarray(qdot, dtype=float))
    return (Mk @ np.asarray(xi_dot, dtype=float)).T + (Ck @ np.asarray(xi, dtype=float)).T \
        + _gravity_basis(q).T


def potential_energy(model, q, a=None):
    """Potential energy up to a constant, consistent with ``g = dP/dq``."""
    a = model.a_d if a is None else a
    _, q2, q3 = q
    return a[6] * np.sin(q2) + a[7] * np.sin(q2 + q3)


def link_inertial_properties(model):
    """Per-link (mass, COM distance from proximal joint, I_perp, I_axial).

    Used by tests that rebuild M from rigid-body sums instead of the
    grouped basis.
    """
    out = []
    for mi, li in zip(model.link_masses, model.link_lengths):
        r = model.link_radius
        out.append((mi, 0.5 * li, mi * (3.0 * r * r + li * li) / 12.0, 0.5 * mi * r * r))
    return out
