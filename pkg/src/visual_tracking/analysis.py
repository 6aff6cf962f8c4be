"""Diagnostics that consume ground truth: Lyapunov monitors and rank audits.

These never feed back into the controller.
"""
from dataclasses import dataclass, field

import numpy as np

from . import camera as cm
from . import manipulator as mp
from .geometry import numeric_rank, RANK_TOL


def lyapunov_v1(s, M, Da_d, Gamma_d):
    """``1/2 s^T M s + 1/2 Da_d^T Gamma_d^-1 Da_d``."""
    return 0.5 * s @ M @ s + 0.5 * Da_d @ np.linalg.solve(Gamma_d, Da_d)


def lyapunov_v2_core(Dx_o, Dx, Z, Da_z_perp, Da_z, gains):
    """Depth-weighted error energy plus kinematic estimation errors (no integral term)."""
    return (0.5 * Dx_o @ Z @ Dx_o + 0.5 * Dx @ Z @ Dx
            + 0.5 * Da_z_perp @ np.linalg.solve(gains.Gamma_z_perp, Da_z_perp)
            + 0.5 * Da_z @ np.linalg.solve(gains.Gamma_z, Da_z))


def lyapunov_v2(Dx_o, Dx, Z, Da_z_perp, Da_z, gains, integral_term, l_M):
    """Full depth-dependent function with the ``(l_M - integral) / gamma`` term."""
    return lyapunov_v2_core(Dx_o, Dx, Z, Da_z_perp, Da_z, gains) + (l_M - integral_term) / gains.gamma


def h_matrix(alpha, gamma, z):
    """Per-feature 2x2 block of the quadratic-form bound on dV2/dt."""
    return z * np.array([[alpha, 0.5 * gamma], [0.5 * gamma, 0.75 * gamma]])


def h_matrix_min_eig(alpha, gamma, z):
    """Smallest eigenvalue over the per-feature blocks, for depths ``z > 0``.

    Uses the closed form for symmetric 2x2 matrices, so the singular
    boundary ``alpha = gamma / 3`` evaluates to zero up to roundoff.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(z <= 0.0):
        raise ValueError("depths must be positive")
    a, b, d = alpha, 0.5 * gamma, 0.75 * gamma
    tr = a + d
    det = a * d - b * b
    # smaller root of l^2 - tr l + det, written to avoid cancellation
    disc = np.hypot(a - d, 2.0 * b)
    lam = det / (0.5 * (tr + disc)) if tr + disc > 0 else 0.5 * (tr - disc)
    return float(np.min(lam * z))


def theorem_condition(alpha, gamma):
    """Report for the convergence condition alpha > gamma / 3."""
    ok = alpha > gamma / 3.0
    return {"alpha": alpha, "gamma": gamma, "satisfied": ok,
            "status": "condition satisfied" if ok else "condition violated",
            "h_min_eig_unit_depth": h_matrix_min_eig(alpha, gamma, [1.0])}


@dataclass
class AuditReport:
    name: str
    passed: bool
    details: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: " + ", ".join(
            f"{k}={v}" for k, v in self.details.items())


def collinear(points, tol=1e-9):
    p = np.asarray(points, dtype=float)
    if len(p) < 3:
        return False
    return numeric_rank(p[1:] - p[0], tol) < 2


def range_intersection_condition(N_list, c_diffs, tol=1e-9):
    """True when no nonzero vector of span(c_diffs) lies in range(N_i^T) for each i.

    ``N_list[i]`` is the 2x3 interaction matrix of feature i and
    ``c_diffs[i]`` the list of offset differences attached to it. Checked via
    the smallest principal angle between the two subspaces.
    """
    import scipy.linalg

    for N, diffs in zip(N_list, c_diffs):
        span = np.asarray(diffs, dtype=float).T
        if numeric_rank(span) == 0:
            continue
        angles = scipy.linalg.subspace_angles(N.T, scipy.linalg.orth(span))
        if np.min(angles) < tol:
            return False
    return True


def rank_audit(cam, offsets, samples=1000, pixel_range=500.0, seed=0, tol=RANK_TOL):
    """Check that N(u) J_f has rank 2m over random image points u.

    ``offsets`` are the base-frame feature offsets c_i (m = len(offsets)).
    For m = 2 and m = 3 the rank of J_f itself (5 and 6) is checked too.
    """
    offsets = np.asarray(offsets, dtype=float)
    m = len(offsets)
    Jf = mp.feature_stack_matrix(offsets)
    rng = np.random.default_rng(seed)
    expected_jf = {1: 3, 2: 5, 3: 6}[m]
    jf_rank = numeric_rank(Jf, tol)
    violations = []
    ranks = []
    for _ in range(samples):
        u = rng.uniform(-pixel_range, pixel_range, size=(m, 2))
        N = cm.stacked_maps(cam, u, np.zeros((m, 3)))[1]
        rk = numeric_rank(N @ Jf, tol)
        ranks.append(rk)
        if rk != 2 * m:
            violations.append({"u": u.tolist(), "rank": rk})
    passed = not violations and jf_rank == expected_jf and not (m == 3 and collinear(offsets))
    return AuditReport(f"rank N(u)J_f, m={m}", passed,
                       {"expected": 2 * m, "min_rank": int(min(ranks)) if ranks else None,
                        "rank_J_f": jf_rank, "expected_rank_J_f": expected_jf,
                        "samples": samples, "violations": len(violations)},
                       violations[:10])


def synthetic_jacobian(n=6, seed=0):
    """A well-conditioned random n-column manipulator Jacobian (6 x n)."""
    rng = np.random.default_rng(seed)
    while True:
        J = rng.normal(size=(6, n))
        sv = np.linalg.svd(J, compute_uv=False)
        if sv[-1] > 0.2:
            return J


def arm_singular(model, q, tol=1e-6):
    """The translational Jacobian loses rank (stretched or folded arm, or wrist on the base axis)."""
    Jv = mp.manipulator_jacobian(model, q)[:3]
    sv = np.linalg.svd(Jv, compute_uv=False)
    return sv[-1] < tol * max(sv[0], 1.0)


def jacobian_rank_workspace_audit(model, cam, qs, tol=RANK_TOL):
    """Sweep configurations; record cells where the image Jacobian loses rank.

    Cells at arm singularities are reported separately and are not counted
    as failures.
    """
    m = model.m
    arm_sing, deficient, checked = [], [], 0
    for q in np.atleast_2d(qs):
        if arm_singular(model, q):
            arm_sing.append(q.tolist())
            continue
        r = mp.feature_positions(model, q)
        if np.any(r @ cam.d3 + cam.d0 <= 0):
            continue
        x = np.array([cm.project(cam, ri) for ri in r])
        N = cm.stacked_maps(cam, x, r)[1]
        J = N @ mp.feature_jacobian(model, q)
        checked += 1
        if numeric_rank(J, tol) != 2 * m:
            deficient.append(q.tolist())
    return AuditReport("rank J(q,x) over workspace", not deficient,
                       {"checked": checked, "arm_singular_cells": len(arm_sing),
                        "rank_deficient_cells": len(deficient)},
                       deficient[:10])


def synthetic_arm_rank_audit(cam, offsets, samples=200, pixel_range=500.0, seed=0, tol=RANK_TOL):
    """Rank of N(u) J_f J_r for a nonsingular 6-DOF Jacobian J_r."""
    offsets = np.asarray(offsets, dtype=float)
    m = len(offsets)
    rng = np.random.default_rng(seed)
    Jf = mp.feature_stack_matrix(offsets)
    bad = []
    for k in range(samples):
        Jr = synthetic_jacobian(6, seed + k)
        u = rng.uniform(-pixel_range, pixel_range, size=(m, 2))
        N = cm.stacked_maps(cam, u, np.zeros((m, 3)))[1]
        if numeric_rank(N @ Jf @ Jr, tol) != 2 * m:
            bad.append(u.tolist())
    return AuditReport(f"rank N(u)J_f J_r with n=6, m={m}", not bad,
                       {"samples": samples, "violations": len(bad)}, bad[:10])


def workspace_depth_audit(model, cam, samples=10000, seed=0, min_depth=0.1):
    """Minimum true depth over uniformly sampled joint configurations."""
    rng = np.random.default_rng(seed)
    qs = rng.uniform(-np.pi, np.pi, size=(samples, model.n))
    z = np.array([mp.feature_positions(model, q) @ cam.d3 + cam.d0 for q in qs]).min()
    return AuditReport("workspace depth positivity", bool(z > min_depth),
                       {"samples": samples, "min_depth": float(z), "threshold": min_depth})


def h_matrix_audit(alpha, gamma, depths=(0.1, 1.0, 10.0)):
    lam = h_matrix_min_eig(alpha, gamma, depths)
    boundary = abs(alpha - gamma / 3.0) <= 1e-12 * max(1.0, gamma)
    status = "boundary singularity" if boundary else ("positive definite" if lam > 0 else "indefinite")
    return AuditReport("H matrix positive definite", bool(lam > 0 and alpha > gamma / 3.0),
                       {"alpha": alpha, "gamma": gamma, "min_eig": lam, "status": status})


# -- independent rigid-body route to M, C, g ---------------------------------------

def _link_frames(model, q):
    """Per-link (COM position, world rotation, angular-velocity Jacobian)."""
    l1, l2, _ = model.link_lengths
    q1, q2, q3 = q
    c1, s1 = np.cos(q1), np.sin(q1)
    props = mp.link_inertial_properties(model)
    pitch = np.array([s1, -c1, 0.0])
    zhat = np.array([0.0, 0.0, 1.0])
    e2 = np.array([c1 * np.cos(q2), s1 * np.cos(q2), np.sin(q2)])
    e23 = np.array([c1 * np.cos(q2 + q3), s1 * np.cos(q2 + q3), np.sin(q2 + q3)])
    shoulder = np.array([0.0, 0.0, l1])
    elbow = shoulder + l2 * e2
    R1 = mp._rot_z(q1) @ mp._rot_y(-np.pi / 2)  # link 1 axis (local x) along Z_0
    R2 = mp._rot_z(q1) @ mp._rot_y(-q2)
    R3 = mp._rot_z(q1) @ mp._rot_y(-(q2 + q3))
    Jw1 = np.column_stack([zhat, np.zeros(3), np.zeros(3)])
    Jw2 = np.column_stack([zhat, pitch, np.zeros(3)])
    Jw3 = np.column_stack([zhat, pitch, pitch])
    coms = [0.5 * shoulder, shoulder + props[1][1] * e2, elbow + props[2][1] * e23]
    return coms, (R1, R2, R3), (Jw1, Jw2, Jw3), props


def _com_jacobian_exact(model, q, link):
    if link == 0:
        return np.zeros((3, 3))
    _, l2, _ = model.link_lengths
    props = mp.link_inertial_properties(model)
    if link == 1:
        sub = mp.ManipulatorModel((model.link_lengths[0], props[1][1], 0.0))
    else:
        sub = mp.ManipulatorModel((model.link_lengths[0], l2, props[2][1]))
    return mp.manipulator_jacobian(sub, q)[:3]


def rigid_body_mass_matrix(model, q):
    """Sum of ``m Jv^T Jv + Jw^T R I R^T Jw`` over the three cylinders."""
    _, Rs, Jws, props = _link_frames(model, q)
    M = np.zeros((3, 3))
    for k in range(3):
        m, _, i_perp, i_axial = props[k]
        Jv = _com_jacobian_exact(model, q, k)
        I_world = Rs[k] @ np.diag([i_axial, i_perp, i_perp]) @ Rs[k].T
        M += m * Jv.T @ Jv + Jws[k].T @ I_world @ Jws[k]
    return M


def rigid_body_potential(model, q):
    coms, _, _, props = _link_frames(model, q)
    return model.gravity * sum(p[0] * c[2] for p, c in zip(props, coms))


def rigid_body_dynamics(model, q, qdot, h=1e-5):
    """``(M, C, g)`` from link-by-link rigid-body sums.

    C comes from Christoffel symbols of central-difference partials of M and
    g from a central-difference gradient of the potential, so accuracy is
    limited to about ``h**2``.
    """
    M = rigid_body_mass_matrix(model, q)
    dM = np.zeros((3, 3, 3))
    g = np.zeros(3)
    for i in range(3):
        dq = np.zeros(3)
        dq[i] = h
        dM[i] = (rigid_body_mass_matrix(model, q + dq) - rigid_body_mass_matrix(model, q - dq)) / (2 * h)
        g[i] = (rigid_body_potential(model, q + dq) - rigid_body_potential(model, q - dq)) / (2 * h)
    C = np.zeros((3, 3))
    for k in range(3):
        for j in range(3):
            C[k, j] = sum(0.5 * (dM[i, k, j] + dM[j, k, i] - dM[k, i, j]) * qdot[i] for i in range(3))
    return M, C, g


# -- identity suites ---------------------------------------------------------------

def rel_err(a, b, floor=1e-8):
    """``|a - b| / max(|a|, |b|, floor)`` in the 2-norm (Frobenius for matrices)."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(a), np.linalg.norm(b), floor))


def random_joint_state(rng, n=3):
    q = rng.uniform(-np.pi, np.pi, n)
    return q, rng.normal(0.0, 1.0, n)


def identity_suite(cam, model, samples=1000, seed=0, tol=1e-10):
    """Check every linear-parameterization identity at random states.

    Returns a list of AuditReports, one per identity, each comparing the
    parameterized route with ground truth from the camera and arm models.
    """
    from . import parameterization as pz

    truth = pz.KinematicParameterization.for_system(cam, model)
    rng = np.random.default_rng(seed)
    worst = {k: 0.0 for k in ("Z psi = Y_z a_z", "Zdot phi = Ybar_z a_z", "Phi J_z qdot = Zdot phi",
                              "J_perp qdot = Y_perp a_perp", "J qdot = Y_perp a_perp - Ybar_z(x) a_z",
                              "J = J_perp - X J_z", "Y_d a = M xi' + C xi + g (any a)")}
    for _ in range(samples):
        q, qd = random_joint_state(rng)
        r = mp.feature_positions(model, q)
        if r[0] @ cam.d3 + cam.d0 <= 0.1:
            continue
        x = cm.project(cam, r[0])
        Z, N, _ = cm.stacked_maps(cam, [x], r)
        Jf = mp.feature_jacobian(model, q)
        J = N @ Jf
        Zdot = (cam.d3 @ (Jf @ qd)) * np.eye(2)
        psi, phi = rng.normal(0, 100, 2), rng.normal(0, 100, 2)
        J_perp_true = cam.D_bar @ Jf
        J_z_true = (cam.d3 @ Jf).reshape(1, -1)
        w = worst
        w["Z psi = Y_z a_z"] = max(w["Z psi = Y_z a_z"], rel_err(Z @ psi, pz.Y_z(q, psi) @ truth.a_z))
        w["Zdot phi = Ybar_z a_z"] = max(w["Zdot phi = Ybar_z a_z"],
                                          rel_err(Zdot @ phi, pz.Ybar_z(q, qd, phi) @ truth.a_z))
        w["Phi J_z qdot = Zdot phi"] = max(w["Phi J_z qdot = Zdot phi"],
                                            rel_err(phi.reshape(2, 1) @ J_z_true @ qd, Zdot @ phi))
        w["J_perp qdot = Y_perp a_perp"] = max(w["J_perp qdot = Y_perp a_perp"],
                                                rel_err(J_perp_true @ qd, pz.Y_z_perp(q, qd) @ truth.a_z_perp))
        w["J qdot = Y_perp a_perp - Ybar_z(x) a_z"] = max(
            w["J qdot = Y_perp a_perp - Ybar_z(x) a_z"],
            rel_err(J @ qd, pz.Y_z_perp(q, qd) @ truth.a_z_perp - pz.Ybar_z(q, qd, x) @ truth.a_z))
        w["J = J_perp - X J_z"] = max(w["J = J_perp - X J_z"],
                                       rel_err(J, J_perp_true - x.reshape(2, 1) @ J_z_true))
        xi, xid = rng.normal(size=3), rng.normal(size=3)
        a = rng.normal(size=8)
        M, C, g = mp.dynamics(model, q, qd, a)
        w["Y_d a = M xi' + C xi + g (any a)"] = max(
            w["Y_d a = M xi' + C xi + g (any a)"],
            rel_err(mp.dynamic_regressor(model, q, qd, xi, xid) @ a, M @ xid + C @ xi + g))
    return [AuditReport(name, bool(err < tol), {"max_rel_err": err, "tol": tol, "samples": samples})
            for name, err in worst.items()]


def rigid_body_audit(model, samples=50, seed=0, tol=1e-6):
    """Grouped-parameter dynamics against the link-by-link rigid-body route."""
    rng = np.random.default_rng(seed)
    worst_M = worst_all = 0.0
    for _ in range(samples):
        q, qd = random_joint_state(rng)
        xi, xid = rng.normal(size=3), rng.normal(size=3)
        M, C, g = rigid_body_dynamics(model, q, qd)
        worst_M = max(worst_M, rel_err(M, mp.mass_matrix(model, q)))
        worst_all = max(worst_all, rel_err(mp.dynamic_regressor(model, q, qd, xi, xid) @ model.a_d,
                                           M @ xid + C @ xi + g))
    return AuditReport("dynamics vs rigid-body rebuild", bool(worst_M < 1e-12 and worst_all < tol),
                       {"max_rel_err_M": worst_M, "max_rel_err_regressor": worst_all, "tol": tol})


def fd_mass_matrix_rate(model, q, qdot, h=1e-3):
    """Mdot along qdot by a five-point central difference in the unit direction."""
    speed = np.linalg.norm(qdot)
    if speed == 0.0:
        return np.zeros((3, 3))
    d = np.asarray(qdot) / speed

    def f(e):
        return mp.mass_matrix(model, q + e * d)

    return speed * (-f(2 * h) + 8 * f(h) - 8 * f(-h) + f(-2 * h)) / (12 * h)


def skew_symmetry_audit(model, samples=1000, seed=0, tol=1e-9):
    """``|v^T (Mdot - 2C) v|`` with Mdot from finite differences."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        q, qd = random_joint_state(rng)
        v = rng.normal(size=3)
        _, C, _ = mp.dynamics(model, q, qd)
        worst = max(worst, abs(v @ (fd_mass_matrix_rate(model, q, qd) - 2 * C) @ v))
    return AuditReport("Mdot - 2C skew-symmetric", bool(worst < tol), {"max_abs": worst, "tol": tol})


def projection_region_audit(region, qs, x_mids, samples=200, seed=0):
    """Empirical check that every estimate in the box keeps z_hat > 0 and J* full rank.

    Depth is linear in a_z, so its minimum over the box is attained at a
    corner and is checked exactly on the supplied configurations. Rank is
    checked at all corners plus random interior points.
    """
    from itertools import product

    from . import parameterization as pz

    qs = np.atleast_2d(qs)
    corners_z = np.array(list(product(*zip(region.a_z_lower, region.a_z_upper))))
    corners_p = np.array(list(product(*zip(region.a_z_perp_lower, region.a_z_perp_upper))))
    phis = np.array([pz.depth_basis(q)[0] for q in qs])
    min_depth = float((phis @ corners_z.T).min())
    rng = np.random.default_rng(seed)
    candidates = [(az, ap) for az in corners_z for ap in corners_p]
    for _ in range(samples):
        candidates.append((rng.uniform(region.a_z_lower, region.a_z_upper),
                           rng.uniform(region.a_z_perp_lower, region.a_z_perp_upper)))
    idx = np.linspace(0, len(qs) - 1, min(len(qs), 60)).astype(int)
    min_sv = np.inf
    for az, ap in candidates:
        for k in idx:
            J = pz.image_jacobian(qs[k], x_mids[k], az, ap)
            min_sv = min(min_sv, np.linalg.svd(J, compute_uv=False)[-1])
    return AuditReport("projection region keeps z_hat > 0 and J* full rank",
                       bool(min_depth > 0 and min_sv > 1e-6),
                       {"min_depth_hat": min_depth, "min_singular_value": float(min_sv),
                        "configurations": len(qs)})
