"""Closed-loop simulation: plant, observer and adaptation stepped as one ODE."""
import time
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import camera as cm
from . import manipulator as mp
from . import parameterization as pz
from .analysis import h_matrix_min_eig, lyapunov_v1, lyapunov_v2_core
from .config import ExperimentConfig
from .controller import ControllerState, Gains, ProjectionRegion, evaluate as evaluate_controller
from .errors import ConfigError, SimulationFault, VisualTrackingError


@dataclass(frozen=True)
class DesiredTrajectory:
    center: np.ndarray
    radius: float
    omega: float


def desired(traj, t):
    """Circular image trajectory and its first two time derivatives."""
    w = traj.omega
    c, s = np.cos(w * t), np.sin(w * t)
    x_d = traj.center + traj.radius * np.array([c, s])
    xdot_d = traj.radius * w * np.array([-s, c])
    xddot_d = -w * w * (x_d - traj.center)
    return x_d, xdot_d, xddot_d


def rk4_step(f, t, y, dt, k1=None):
    """One classical Runge-Kutta step of ``ydot = f(t, y)``.

    ``k1`` may be passed when ``f(t, y)`` is already known.
    """
    if k1 is None:
        k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


# layout of the stacked ODE vector; the last entry is an analysis-only
# quadrature of s^T J*^T Z^-1 J* s that the controller never reads
_SIZES = (("q", 3), ("qdot", 3), ("x_o", 2), ("a_d_hat", 8), ("a_z_hat", pz.P1),
          ("a_z_perp_hat", pz.P2), ("integral", 1))
SLICES = {}
_pos = 0
for _name, _size in _SIZES:
    SLICES[_name] = slice(_pos, _pos + _size)
    _pos += _size
STATE_SIZE = _pos


@dataclass
class SimState:
    q: np.ndarray
    qdot: np.ndarray
    x_o: np.ndarray
    a_d_hat: np.ndarray
    a_z_hat: np.ndarray
    a_z_perp_hat: np.ndarray
    t: float = 0.0
    integral: float = 0.0

    def to_vector(self):
        y = np.empty(STATE_SIZE)
        for name, _ in _SIZES:
            y[SLICES[name]] = getattr(self, name)
        return y

    @classmethod
    def from_vector(cls, y, t=0.0):
        parts = {name: np.array(y[SLICES[name]]) for name, _ in _SIZES}
        parts["integral"] = float(parts["integral"][0])
        return cls(t=float(t), **parts)


class Signals(NamedTuple):
    x: np.ndarray
    x_d: np.ndarray
    xdot_true: np.ndarray
    z: float
    z_hat: float
    control: object
    qddot: np.ndarray


class ClosedLoop:
    """The assembled system: ground truth plus the calibration-free controller."""

    def __init__(self, cam, model, gains, region, trajectory, slack=1e-6,
                 pixel_noise_std=0.0, sampled_data=False, seed=0):
        self.cam = cam
        self.model = model
        self.truth = pz.KinematicParameterization.for_system(cam, model)
        self.a_d = model.a_d
        self.gains = gains
        self.region = region
        self.trajectory = trajectory
        self.slack = slack
        self.pixel_noise_std = pixel_noise_std
        self.sampled_data = sampled_data
        self._rng = np.random.default_rng(seed)
        self._noise = np.zeros(2)
        self._tau_hold = None
        # additive corruption of the ground-truth image-velocity shadow value
        self.xdot_corruption = None

    def measure(self, q):
        return cm.project(self.cam, mp.feature_positions(self.model, q)[0])

    def evaluate(self, t, y):
        q = y[SLICES["q"]]
        qdot = y[SLICES["qdot"]]
        x_o = y[SLICES["x_o"]]
        est = ControllerState(y[SLICES["a_d_hat"]], y[SLICES["a_z_hat"]], y[SLICES["a_z_perp_hat"]])
        r = mp.feature_positions(self.model, q)
        x_true = cm.project(self.cam, r[0])
        x = x_true + self._noise
        Z, N, _ = cm.stacked_maps(self.cam, [x_true], r)
        z = Z[0, 0]
        xdot_true = N @ mp.feature_jacobian(self.model, q) @ qdot / z
        if self.xdot_corruption is not None:
            xdot_true = xdot_true + self.xdot_corruption(t)
        x_d, xdot_d, xddot_d = desired(self.trajectory, t)

        ctl = evaluate_controller(self.model, q, qdot, x, x_o, x_d, xdot_d, xddot_d,
                                  est, self.gains, self.region)
        tau = ctl.tau if self._tau_hold is None else self._tau_hold
        M, C, g = mp.dynamics(self.model, q, qdot)
        qddot = np.linalg.solve(M, tau - C @ qdot - g)

        Js = ctl.Jstar @ ctl.s
        dy = np.empty(STATE_SIZE)
        dy[SLICES["q"]] = qdot
        dy[SLICES["qdot"]] = qddot
        dy[SLICES["x_o"]] = ctl.xdot_o
        dy[SLICES["a_d_hat"]] = ctl.a_d_dot
        dy[SLICES["a_z_hat"]] = ctl.a_z_dot
        dy[SLICES["a_z_perp_hat"]] = ctl.a_z_perp_dot
        dy[SLICES["integral"]] = Js @ Js / z
        z_hat = pz.depth(q, est.a_z_hat)
        return dy, Signals(x, x_d, xdot_true, z, z_hat, ctl, qddot)

    def rhs(self, t, y):
        return self.evaluate(t, y)[0]

    def step(self, t, y, dt, k1=None):
        """RK4 step followed by clamping the kinematic estimates into the region.

        ``k1`` (the derivative at ``(t, y)``) is ignored when a per-step
        noise sample or torque hold would change it.
        """
        if self.pixel_noise_std > 0.0:
            self._noise = self._rng.normal(0.0, self.pixel_noise_std, 2)
            k1 = None
        if self.sampled_data:
            k1 = None
            self._tau_hold = None
            self._tau_hold = self.evaluate(t, y)[1].control.tau
        y_next = rk4_step(self.rhs, t, y, dt, k1)
        self._tau_hold = None
        y_next[SLICES["a_z_hat"]] = np.clip(y_next[SLICES["a_z_hat"]],
                                            self.region.a_z_lower, self.region.a_z_upper)
        y_next[SLICES["a_z_perp_hat"]] = np.clip(y_next[SLICES["a_z_perp_hat"]],
                                                 self.region.a_z_perp_lower, self.region.a_z_perp_upper)
        return y_next


def step_rk4(loop, state, dt):
    """Advance a :class:`SimState` by one step."""
    y = loop.step(state.t, state.to_vector(), dt)
    return SimState.from_vector(y, state.t + dt)


# -- configuration -> system -----------------------------------------------------

def _vec(cfg, key, size=None):
    v = np.asarray(cfg.get(key), dtype=float)
    if size is not None and v.shape != (size,):
        raise ConfigError(f"{key}: expected {size} numbers, got shape {v.shape}")
    return v


def build(cfg, allow_theorem_violation=False):
    """Validate ``cfg`` and assemble ``(loop, initial SimState)``.

    This is the single validator shared by every CLI verb.
    """
    dt = cfg.get("sim.dt")
    if not dt > 0.0:
        raise ConfigError("sim.dt must be positive")
    if cfg.get("sim.duration") < 0.0:
        raise ConfigError("sim.duration must be non-negative")
    if cfg.get("sim.log_every") < 1:
        raise ConfigError("sim.log_every must be at least 1")

    pp = _vec(cfg, "camera.principal_point", 2)
    if cfg.get("camera.focal_length") <= 0 or cfg.get("camera.beta") <= 0:
        raise ConfigError("camera focal length and scale must be positive")
    cam = cm.CameraModel.aligned(cfg.get("camera.focal_length"), cfg.get("camera.beta"),
                                 cfg.get("camera.offset"), tuple(pp))
    offsets = np.asarray(cfg.get("arm.feature_offsets"), dtype=float)
    if offsets.ndim != 2 or offsets.shape[1] != 3:
        raise ConfigError("arm.feature_offsets must be a list of 3-vectors")
    lengths = _vec(cfg, "arm.link_lengths", 3)
    masses = _vec(cfg, "arm.link_masses", 3)
    if np.any(lengths <= 0) or np.any(masses <= 0) or cfg.get("arm.link_radius") <= 0:
        raise ConfigError("link lengths, masses and radius must be positive")
    model = mp.ManipulatorModel(tuple(lengths), tuple(masses), cfg.get("arm.link_radius"),
                                cfg.get("arm.gravity"), tuple(map(tuple, offsets)))
    try:
        pz.KinematicParameterization.for_system(cam, model)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    gains = Gains.scaled_identity(cfg.get("gains.K"), cfg.get("gains.alpha"), cfg.get("gains.gamma"),
                                  cfg.get("gains.Gamma_d"), cfg.get("gains.Gamma_z_perp"),
                                  cfg.get("gains.Gamma_z"),
                                  allow_theorem_violation=allow_theorem_violation)
    region = ProjectionRegion(_vec(cfg, "projection.a_z_lower", pz.P1),
                              _vec(cfg, "projection.a_z_upper", pz.P1),
                              _vec(cfg, "projection.a_z_perp_lower", pz.P2),
                              _vec(cfg, "projection.a_z_perp_upper", pz.P2))
    traj = DesiredTrajectory(_vec(cfg, "trajectory.center", 2), cfg.get("trajectory.radius"),
                             cfg.get("trajectory.omega"))
    loop = ClosedLoop(cam, model, gains, region, traj, slack=cfg.get("monitor.slack"),
                      pixel_noise_std=cfg.get("extensions.pixel_noise_std"),
                      sampled_data=cfg.get("extensions.sampled_data"), seed=cfg.get("sim.seed"))

    q0 = _vec(cfg, "initial.q", 3)
    qd0 = _vec(cfg, "initial.qdot", 3)
    try:
        x0 = loop.measure(q0)
    except VisualTrackingError as exc:
        raise ConfigError(f"initial configuration: {exc}") from exc
    x_o0 = x0 if cfg.get("initial.x_o") is None else _vec(cfg, "initial.x_o", 2)
    est = pz.KinematicParameterization.from_scalars(
        cfg.get("initial.l2_hat"), cfg.get("initial.l3_hat"), cfg.get("initial.offset_hat"),
        cfg.get("initial.focal_length_hat"), cfg.get("initial.beta_hat"))
    if not region.contains(est.a_z, est.a_z_perp):
        raise ConfigError("initial kinematic estimates lie outside the projection region")
    if not region.contains(loop.truth.a_z, loop.truth.a_z_perp, strict=True):
        raise ConfigError("true kinematic parameters must lie strictly inside the projection region")
    if pz.depth(q0, est.a_z) <= 0.0:
        raise ConfigError("initial estimated depth is not positive")
    state = SimState(q0, qd0, x_o0, _vec(cfg, "initial.a_d_hat", 8), est.a_z, est.a_z_perp)
    return loop, state


# -- logging -------------------------------------------------------------------

def _names(prefix, n):
    return [f"{prefix}{i + 1}" for i in range(n)]


COLUMNS = (["t"] + _names("q", 3) + _names("qdot", 3) + ["x_u", "x_v", "xo_u", "xo_v",
           "xd_u", "xd_v", "dx_u", "dx_v", "dxo_u", "dxo_v"] + _names("tau", 3) + _names("s", 3)
           + _names("a_d_hat", 8) + _names("a_z_hat", pz.P1) + _names("a_z_perp_hat", pz.P2)
           + ["z", "z_hat", "V1", "V2_core", "integral_term", "V2", "H_min_eig"])


@dataclass
class RunLog:
    columns: list
    data: np.ndarray
    summary: dict = field(default_factory=dict)
    fault: SimulationFault = None

    def column(self, name):
        return self.data[:, self.columns.index(name)]

    def __len__(self):
        return len(self.data)

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.data:
                fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def _row(loop, t, y, sig):
    st = SimState.from_vector(y, t)
    ctl = sig.control
    truth = loop.truth
    dx = sig.x - sig.x_d
    dx_o = st.x_o - sig.x
    M = mp.mass_matrix(loop.model, st.q)
    V1 = lyapunov_v1(ctl.s, M, st.a_d_hat - loop.a_d, loop.gains.Gamma_d)
    V2c = lyapunov_v2_core(dx_o, dx, sig.z * np.eye(2), st.a_z_perp_hat - truth.a_z_perp,
                           st.a_z_hat - truth.a_z, loop.gains)
    hmin = h_matrix_min_eig(loop.gains.alpha, loop.gains.gamma, [sig.z])
    return np.concatenate([[t], st.q, st.qdot, sig.x, st.x_o, sig.x_d, dx, dx_o, ctl.tau, ctl.s,
                           st.a_d_hat, st.a_z_hat, st.a_z_perp_hat,
                           [sig.z, sig.z_hat, V1, V2c, st.integral, np.nan, hmin]])


def count_increases(values, slack):
    """Number of steps where ``values`` rises by more than ``slack``."""
    return int(np.sum(np.diff(values) > slack))


def run(cfg, allow_theorem_violation=False, loop=None, state=None):
    """Integrate the configured experiment and return its :class:`RunLog`.

    Faults during integration do not raise: the log is truncated at the last
    valid step and ``log.fault`` carries the diagnostic.
    """
    if loop is None or state is None:
        loop, state = build(cfg, allow_theorem_violation)
    dt = cfg.get("sim.dt")
    n_steps = int(round(cfg.get("sim.duration") / dt))
    log_every = cfg.get("sim.log_every")
    y = state.to_vector()
    t = state.t
    rows = []
    fault = None
    wall = time.perf_counter()
    try:
        dy, sig = loop.evaluate(t, y)
        rows.append(_row(loop, t, y, sig))
        for k in range(1, n_steps + 1):
            y_new = loop.step(t, y, dt, dy)
            t_new = state.t + k * dt
            if not np.all(np.isfinite(y_new)):
                raise SimulationFault("non-finite state", t_new, SimState.from_vector(y, t))
            y, t = y_new, t_new
            dy, sig = loop.evaluate(t, y)
            if k % log_every == 0 or k == n_steps:
                row = _row(loop, t, y, sig)
                if not np.all(np.isfinite(np.delete(row, COLUMNS.index("V2")))):
                    raise SimulationFault("non-finite logged quantity", t, SimState.from_vector(y, t))
                rows.append(row)
    except SimulationFault as exc:
        fault = exc
    except VisualTrackingError as exc:
        fault = SimulationFault(f"{type(exc).__name__}: {exc}", t, SimState.from_vector(y, t), exc)
    wall = time.perf_counter() - wall

    data = np.array(rows) if rows else np.empty((0, len(COLUMNS)))
    log = RunLog(list(COLUMNS), data, fault=fault)
    if len(data):
        _finalize(log, loop, cfg, wall)
    return log


def _finalize(log, loop, cfg, wall):
    integral = log.column("integral_term")
    l_M = integral[-1]
    v2 = log.column("V2_core") + (l_M - integral) / loop.gains.gamma
    log.data[:, log.columns.index("V2")] = v2

    t = log.column("t")
    dx = np.abs(log.data[:, [log.columns.index("dx_u"), log.columns.index("dx_v")]]).max(axis=1)
    dxo = np.abs(log.data[:, [log.columns.index("dxo_u"), log.columns.index("dxo_v")]]).max(axis=1)
    z, z_hat = log.column("z"), log.column("z_hat")
    depth_err = np.abs(z_hat - z) / z
    settle = cfg.get("sim.settle_time")
    after = t >= settle
    dt_log = cfg.get("sim.dt") * cfg.get("sim.log_every")
    slack = loop.slack * dt_log
    log.summary = {
        "completed": log.fault is None,
        "fault": None if log.fault is None else str(log.fault),
        "steps": int(len(t) - 1),
        "final_time": float(t[-1]),
        "wall_time_s": wall,
        "max_abs_dx": float(dx.max()),
        "max_abs_dxo": float(dxo.max()),
        "settle_time": settle,
        "max_abs_dx_after_settle": float(dx[after].max()) if after.any() else float("nan"),
        "max_abs_dxo_after_settle": float(dxo[after].max()) if after.any() else float("nan"),
        "terminal_abs_dx": float(dx[-1]),
        "terminal_abs_dxo": float(dxo[-1]),
        "depth_rel_error_initial": float(depth_err[0]),
        "depth_rel_error_terminal": float(depth_err[-1]),
        "l_M": float(l_M),
        "lyapunov_slack": slack,
        "V1_violations": count_increases(log.column("V1"), slack),
        "V2_violations": count_increases(v2, slack),
        "V1_max_increase": float(np.diff(log.column("V1")).max()) if len(t) > 1 else 0.0,
        "V2_max_increase": float(np.diff(v2).max()) if len(t) > 1 else 0.0,
        "min_depth": float(z.min()),
        "theorem_condition": bool(loop.gains.satisfies_theorem),
    }
