"""
Finite-test-point Barankin bound from the sparse linear model kernel.

For test points x_1 = x0, ..., x_P and g_i = gamma(x_i), the squared norm of
the projection of gamma onto span{R(., x_i)} is g^T R^{-1} g, so

    g^T R^{-1} g - gamma(x0)^2

lower-bounds the variance of every estimator with mean gamma.  The kernel
R_ij = exp((H(x_i - x0))^T H(x_j - x0) / sigma2) overflows quickly, so the
computation works with the equilibrated matrix
R_bar_ij = exp(-||H(x_i - x_j)||^2 / (2 sigma2)) and values
g_bar_i = g_i exp(-||H(x_i - x0)||^2 / (2 sigma2)), which give the same
quadratic form.

The reported condition number is that of R_bar + lambda I with
lambda = 1e-12 trace(R_bar) / P plus the point set's jitter.  Above
cond_limit an IllConditionedError is raised; pass cond_limit=None to accept
the truncated solve instead.  That solve takes points in order of distance
from x0 and factors them one at a time, dropping a point whose Cholesky
pivot falls below the pivot tolerance.  Dropping points shrinks the span
and can only lower the bound.
"""
from dataclasses import dataclass
from itertools import product
import logging

import numpy as np
from scipy.linalg import eigvalsh, solve_triangular
from scipy.spatial.distance import cdist
from sortedcontainers import SortedDict

from sparsebound.errors import DimensionError, IllConditionedError
from sparsebound.mean_functions import evaluate
from sparsebound.model import SparseVector, embed, restrict

logger = logging.getLogger(__name__)

PIVOT_TOL = 1e-12
COND_LIMIT = 1e12
JITTER_SCALE = 1e-12


@dataclass(frozen=True)
class TestPointSet(object):
    """Distinct test points; points[0] is the point x0 the bound is taken at"""
    points: tuple
    jitter: float = 0.0

    def __post_init__(self):
        points = tuple(p if isinstance(p, SparseVector) else SparseVector(p) for p in self.points)
        object.__setattr__(self, 'points', points)
        if not points:
            raise DimensionError("a test point set needs at least x0")
        if len(set(points)) != len(points):
            raise DimensionError("test points must be distinct")
        if len({p.n_dim for p in points}) != 1:
            raise DimensionError("test points have different lengths")
        if self.jitter < 0:
            raise DimensionError(f"jitter must be >= 0, got {self.jitter}")

    def __len__(self):
        return len(self.points)


@dataclass(frozen=True)
class OracleResult(object):
    value: float
    n_points: int
    usable_size: int
    condition: float
    jitter: float
    order: tuple


def oracle_result(model, gamma, x0, pts, pivot_tol=PIVOT_TOL, cond_limit=COND_LIMIT):
    """The finite-point bound together with its numerical diagnostics"""
    x0 = model.check_parameter(x0)
    if pts.points[0] != x0:
        raise DimensionError("the first test point must be x0")
    for p in pts.points:
        if p.n_dim != model.N or p.nnz > model.S:
            raise DimensionError(f"test point {p!r} is not in X_S")

    X = np.array([p.entries for p in pts.points])
    D = (X - x0.entries) @ model.H.T
    distance2 = np.sum(D * D, axis=1)
    order = np.argsort(distance2, kind='stable')
    R = np.exp(-cdist(D, D, 'sqeuclidean') / (2.0 * model.sigma2))
    g = np.array([evaluate(gamma, p) for p in pts.points])
    g_bar = g * np.exp(-distance2 / (2.0 * model.sigma2))

    size = len(pts)
    L = np.zeros((size, size))
    w = np.zeros(size)
    accepted = []
    for i in order:
        m = len(accepted)
        if m:
            l = solve_triangular(L[:m, :m], R[accepted, i], lower=True)
        else:
            l = np.zeros(0)
        pivot = 1.0 + pts.jitter - l @ l
        if pivot <= pivot_tol:
            logger.debug("dropping test point %d, pivot %.3e", i, pivot)
            continue
        root = np.sqrt(pivot)
        L[m, :m] = l
        L[m, m] = root
        w[m] = (g_bar[i] - l @ w[:m]) / root
        accepted.append(int(i))

    usable = len(accepted)
    condition = gram_condition(R, pts.jitter)
    if cond_limit is not None and condition > cond_limit:
        raise IllConditionedError(condition, usable)
    value = float(w[:usable] @ w[:usable] - evaluate(gamma, x0) ** 2)
    logger.debug("oracle on %d points (%d usable, condition %.3e): %.12g", size, usable, condition, value)
    return OracleResult(value=value, n_points=size, usable_size=usable, condition=float(condition),
                        jitter=pts.jitter, order=tuple(accepted))


def gram_condition(R, jitter=0.0):
    """2-norm condition number of R + lambda I, lambda = 1e-12 trace(R) / P + jitter"""
    lam = JITTER_SCALE * np.trace(R) / R.shape[0] + jitter
    eigenvalues = eigvalsh(R + lam * np.eye(R.shape[0]))
    if eigenvalues[0] <= 0:
        return float('inf')
    return float(eigenvalues[-1] / eigenvalues[0])


def finite_point_bound(model, gamma, x0, pts, pivot_tol=PIVOT_TOL, cond_limit=COND_LIMIT):
    return oracle_result(model, gamma, x0, pts, pivot_tol, cond_limit).value


def grid_points(K, x0, half_width=6.0, per_axis=41, center=None, jitter=0.0):
    """x0 followed by a Cartesian grid on X_S^K

    Each axis runs over center +- half_width in per_axis steps; center
    defaults to x0 restricted to K.  Grid points equal to x0 are skipped.
    """
    x0 = x0 if isinstance(x0, SparseVector) else SparseVector(x0)
    if per_axis < 1:
        raise DimensionError(f"per_axis must be >= 1, got {per_axis}")
    if per_axis == 1:
        return TestPointSet(points=(x0,), jitter=jitter)
    center = restrict(x0.entries, K) if center is None else np.asarray(center, dtype=float)
    axes = [c + np.linspace(-half_width, half_width, per_axis) for c in center]
    points = [x0]
    seen = {x0}
    for s in product(*axes):
        point = embed(np.array(s), K, x0.n_dim)
        if point not in seen:
            seen.add(point)
            points.append(point)
    return TestPointSet(points=tuple(points), jitter=jitter)


def hcr_bound(delta, sigma2):
    """Two-point value delta^2 / (exp(delta^2 / sigma2) - 1) for an unbiased mean"""
    if delta == 0:
        return float(sigma2)
    return float(delta * delta / np.expm1(delta * delta / sigma2))


def refinement_study(model, gamma, x0, K, per_axis_list, half_width=6.0, center=None,
                     cond_limit=COND_LIMIT):
    """OracleResult per grid resolution, keyed by per_axis

    Resolutions run from coarse to fine.  An ill-conditioned grid stops the
    study; the error carries the finished rows in `partial`.
    """
    table = SortedDict()
    for per_axis in sorted(per_axis_list):
        pts = grid_points(K, x0, half_width, per_axis, center)
        try:
            table[per_axis] = oracle_result(model, gamma, x0, pts, cond_limit=cond_limit)
        except IllConditionedError as e:
            raise IllConditionedError(e.condition, e.usable_size, partial=table)
        logger.info("per_axis %d: %d points, bound %.10g", per_axis, len(pts), table[per_axis].value)
    return table
