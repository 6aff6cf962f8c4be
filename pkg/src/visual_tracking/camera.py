"""Fixed pinhole camera used as the (hidden) ground truth of the image loop.

Image coordinates follow ``x_i = (D_bar r_i + p_bar) / z_i`` with depth
``z_i = d3 . r_i + d0``; differentiating gives the usual
``xdot_i = N_i(x_i) rdot_i / z_i`` with ``N_i = D_bar - x_i d3^T``.
"""
from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveDepth
from .geometry import block_diag

# camera X_C, Y_C, Z_C along base Y_0, Z_0, X_0
ALIGNED_ROTATION = np.array([[0.0, 1.0, 0.0],
                             [0.0, 0.0, 1.0],
                             [1.0, 0.0, 0.0]])


@dataclass(frozen=True)
class CameraModel:
    D_bar: np.ndarray
    d3: np.ndarray
    d0: float
    p_bar: np.ndarray
    focal_length: float = float("nan")
    beta: float = float("nan")
    principal_point: tuple = (0.0, 0.0)
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @classmethod
    def from_intrinsics(cls, focal_length, beta, rotation, translation, principal_point=(0.0, 0.0)):
        """Compile intrinsics and extrinsics into the projection blocks.

        ``rotation`` and ``translation`` map base-frame points into the camera
        frame (``p_c = R r + t``); ``beta`` is pixels per meter on the sensor.
        """
        R = np.asarray(rotation, dtype=float)
        t = np.asarray(translation, dtype=float)
        u0, v0 = principal_point
        fb = focal_length * beta
        intr = np.array([[fb, 0.0, u0],
                         [0.0, fb, v0],
                         [0.0, 0.0, 1.0]])
        D = intr @ R
        p = intr @ t
        return cls(D_bar=D[:2].copy(), d3=D[2].copy(), d0=float(p[2]), p_bar=p[:2].copy(),
                   focal_length=float(focal_length), beta=float(beta),
                   principal_point=(float(u0), float(v0)), rotation=R, translation=t)

    @classmethod
    def aligned(cls, focal_length=0.15, beta=900.0, offset=5.0, principal_point=(0.0, 0.0)):
        """Camera looking along base X_0 from ``offset`` meters behind the base origin."""
        return cls.from_intrinsics(focal_length, beta, ALIGNED_ROTATION,
                                   np.array([0.0, 0.0, offset]), principal_point)

    @property
    def projection_matrix(self):
        """The full 3x4 perspective projection matrix."""
        top = np.column_stack([self.D_bar, self.p_bar])
        return np.vstack([top, np.append(self.d3, self.d0)])


def depth(cam, r):
    return float(cam.d3 @ r + cam.d0)


def project(cam, r):
    z = depth(cam, r)
    if not z > 0.0:
        raise NonPositiveDepth(f"feature at {np.asarray(r).tolist()} has depth {z:.6g}")
    return (cam.D_bar @ r + cam.p_bar) / z


def interaction_matrix(cam, x_i):
    """Depth-independent interaction matrix ``D_bar - x_i d3^T`` (2x3)."""
    return cam.D_bar - np.outer(x_i, cam.d3)


def stacked_maps(cam, x, r):
    """Stacked ``(Z, N, X)`` for m features.

    ``x`` is a list of image points (or a flat 2m vector) and ``r`` the list
    of matching 3-D positions. Z is 2m x 2m, N is 2m x 3m, X is 2m x m.
    """
    pts = np.asarray(x, dtype=float).reshape(-1, 2)
    pos = np.asarray(r, dtype=float).reshape(-1, 3)
    if len(pts) != len(pos):
        raise ValueError(f"{len(pts)} image points but {len(pos)} feature positions")
    Z = block_diag([depth(cam, ri) * np.eye(2) for ri in pos])
    N = block_diag([interaction_matrix(cam, xi) for xi in pts])
    X = block_diag([xi.reshape(2, 1) for xi in pts])
    return Z, N, X
