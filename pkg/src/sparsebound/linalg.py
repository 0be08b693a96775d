"""
Small dense linear algebra used by every other module.

Matrices and vectors are plain float64 numpy arrays.  Every public function
checks shapes and finiteness of its inputs first and raises DimensionError
(argument problems) or SingularMatrixError (rank problems).

Important functions:
gram: A^T A, symmetrized
sym_solve: Cholesky solve with a relative pivot test
pseudo_inverse / projector: (A^T A)^{-1} A^T and A A^+
spark_exceeds: every S-column subset of H independent
"""
from itertools import combinations
import logging

import numpy as np
from scipy import linalg

from sparsebound.errors import DimensionError, SingularMatrixError

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-12
RANK_TOL = 1e-10


def as_matrix(A, name='matrix'):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise DimensionError(f"{name} has non-finite entries")
    return A


def as_vector(v, name='vector'):
    v = np.asarray(v, dtype=float)
    if v.ndim != 1:
        raise DimensionError(f"{name} must be 1-D, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DimensionError(f"{name} has non-finite entries")
    return v


def gram(A):
    """Return A^T A for an M x S matrix with M >= S >= 1"""
    A = as_matrix(A, 'A')
    rows, cols = A.shape
    if cols < 1 or rows < cols:
        raise DimensionError(f"gram needs M >= S >= 1, got {rows}x{cols}")
    G = A.T @ A
    return 0.5 * (G + G.T)


def cholesky_factor(G):
    """Lower Cholesky factor of an SPD matrix, with the relative pivot test"""
    G = as_matrix(G, 'G')
    size = G.shape[0]
    if G.shape != (size, size) or size == 0:
        raise DimensionError(f"G must be square, got shape {G.shape}")
    tol = PIVOT_TOL * np.trace(G) / size
    try:
        L = linalg.cholesky(G, lower=True)
    except np.linalg.LinAlgError as e:
        raise SingularMatrixError(f"matrix is not positive definite: {e}")
    pivots = np.diag(L) ** 2
    if tol <= 0 or np.min(pivots) <= tol:
        raise SingularMatrixError(
            f"pivot {np.min(pivots):.3e} below tolerance {tol:.3e}")
    return L


def sym_solve(G, b):
    """Solve G u = b for symmetric positive definite G

    b may be a vector or a matrix of right-hand sides.
    """
    L = cholesky_factor(G)
    b = np.asarray(b, dtype=float)
    if b.shape[0] != L.shape[0]:
        raise DimensionError(f"right-hand side has {b.shape[0]} rows, G is {L.shape[0]}x{L.shape[0]}")
    if not np.all(np.isfinite(b)):
        raise DimensionError("right-hand side has non-finite entries")
    return linalg.cho_solve((L, True), b)


def pseudo_inverse(A):
    """(A^T A)^{-1} A^T for a full column rank A"""
    A = as_matrix(A, 'A')
    return sym_solve(gram(A), A.T)


def projector(A):
    """Orthogonal projector onto range(A), P = A A^+"""
    A = as_matrix(A, 'A')
    P = A @ pseudo_inverse(A)
    return 0.5 * (P + P.T)


def column_rank(A, tol=RANK_TOL, scale=None):
    """Rank from a column-pivoted QR

    Diagonal entries of R above tol * scale count, scale defaulting to the
    largest column norm of A.
    """
    A = as_matrix(A, 'A')
    if A.size == 0:
        return 0
    if scale is None:
        scale = np.max(np.linalg.norm(A, axis=0))
    if scale == 0:
        return 0
    R = linalg.qr(A, mode='r', pivoting=True)[0]
    return int(np.sum(np.abs(np.diag(R)) > tol * scale))


def spark_exceeds(H, S):
    """True iff every subset of S columns of H is linearly independent"""
    H = as_matrix(H, 'H')
    rows, cols = H.shape
    if not 1 <= S < cols:
        raise DimensionError(f"need 1 <= S < N, got S={S}, N={cols}")
    if S > rows:
        return False
    scale = np.max(np.linalg.norm(H, axis=0))
    checked = 0
    for subset in combinations(range(cols), S):
        checked += 1
        if column_rank(H[:, subset], scale=scale) < S:
            logger.debug("columns %s are dependent", [k + 1 for k in subset])
            return False
    logger.debug("spark check passed on %d subsets", checked)
    return True
