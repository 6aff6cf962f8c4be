"""Small dense-matrix helpers shared by every other module."""
import numpy as np
import scipy.linalg

from .errors import RankDeficient

RANK_TOL = 1e-8


def skew(b):
    """Return S(b) such that ``skew(b) @ w == np.cross(b, w)``."""
    b1, b2, b3 = b
    return np.array([[0.0, -b3, b2],
                     [b3, 0.0, -b1],
                     [-b2, b1, 0.0]])


def pinv_full_row(A, tol=RANK_TOL):
    """Right pseudoinverse ``A.T @ inv(A @ A.T)`` of a full-row-rank matrix.

    The Gram matrix is at most 6x6, so it is solved directly with Cholesky.
    Raises RankDeficient when its smallest eigenvalue is not above ``tol``.
    """
    A = np.asarray(A, dtype=float)
    gram = A @ A.T
    smallest = np.linalg.eigvalsh(gram)[0]
    if not smallest > tol:
        raise RankDeficient(f"smallest eigenvalue of A A^T is {smallest:.3e} (tol {tol:.1e})")
    factor = scipy.linalg.cho_factor(gram, check_finite=False)
    return scipy.linalg.cho_solve(factor, A, check_finite=False).T


def numeric_rank(A, tol=RANK_TOL):
    """Number of singular values above ``tol`` times the largest one."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return 0
    sv = np.linalg.svd(A, compute_uv=False)
    if sv[0] == 0.0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


def block_diag(blocks):
    """Block-diagonal assembly; off-block entries are exactly zero."""
    return scipy.linalg.block_diag(*[np.atleast_2d(np.asarray(b, dtype=float)) for b in blocks])
