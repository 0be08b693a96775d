"""
Problem instances for the sparse linear model y = Hx + n and its pieces.

Indices are 1-based everywhere a caller can see them (SupportSet, component
numbers, xi_and_j); numpy arrays stay 0-based internally.

Important classes:
SparseLinearModel: H, sigma2 and sparsity S, validated by the spark condition
LinearGaussianModel: the non-sparse model z = As + n
SparseVector: immutable parameter vector with its support
SupportSet: ordered index set K of size |K|
IsometryData: s0, beta and the residual energy for a (K, x0) pair

Important functions:
isometry_data, kernel_slm, kernel_lgm, kernel_gram, whiten
"""
from dataclasses import dataclass
from itertools import combinations
from math import comb
import logging

import numpy as np
from scipy import linalg as sla

from sparsebound import linalg
from sparsebound.errors import (BudgetExceededError, DimensionError,
                                SingularMatrixError)

logger = logging.getLogger(__name__)

SPARK_BUDGET = 10**6


def gaussian_matrix(M, N, seed):
    """Seeded i.i.d. Gaussian M x N matrix with unit-norm columns"""
    H = np.random.default_rng(seed).standard_normal((M, N))
    return H / np.linalg.norm(H, axis=0)


class SparseVector(object):
    """A parameter vector together with its support

    Accepts anything array-like; `support` is the 1-based tuple of the
    positions of nonzero entries.
    """

    def __init__(self, values):
        entries = linalg.as_vector(values, 'sparse vector').copy()
        entries.setflags(write=False)
        self._entries = entries

    @classmethod
    def from_support(cls, n_dim, indices, values):
        entries = np.zeros(n_dim)
        for k, value in zip(indices, values):
            if not 1 <= k <= n_dim:
                raise DimensionError(f"index {k} outside 1..{n_dim}")
            entries[k - 1] = value
        return cls(entries)

    @property
    def entries(self):
        return self._entries

    @property
    def n_dim(self):
        return self._entries.shape[0]

    @property
    def support(self):
        return tuple(int(k) + 1 for k in np.flatnonzero(self._entries))

    @property
    def nnz(self):
        return int(np.count_nonzero(self._entries))

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._entries
        return self._entries.astype(dtype)

    def __neg__(self):
        return SparseVector(-self._entries)

    def __eq__(self, other):
        if not isinstance(other, SparseVector):
            return NotImplemented
        return np.array_equal(self._entries, other._entries)

    def __hash__(self):
        return hash((self._entries + 0.0).tobytes())

    def __repr__(self):
        return f"SparseVector({self._entries.tolist()})"


@dataclass(frozen=True)
class SupportSet(object):
    """Strictly increasing 1-based column indices K = {k_1, ..., k_|K|}"""
    indices: tuple

    def __post_init__(self):
        indices = tuple(int(k) for k in self.indices)
        object.__setattr__(self, 'indices', indices)
        if any(k < 1 for k in indices):
            raise DimensionError(f"support indices are 1-based, got {indices}")
        if any(a >= b for a, b in zip(indices, indices[1:])):
            raise DimensionError(f"support indices must be strictly increasing, got {indices}")

    @classmethod
    def all(cls, n_dim, size):
        """Every size-S support of {1..N}, in lexicographic order"""
        for subset in combinations(range(1, n_dim + 1), size):
            yield cls(subset)

    def __len__(self):
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __contains__(self, k):
        return k in self.indices

    def position(self, k):
        """0-based position of component k inside K"""
        return self.indices.index(k)

    @property
    def zero_based(self):
        return np.array(self.indices, dtype=int) - 1

    def check_bounds(self, n_dim):
        if self.indices and self.indices[-1] > n_dim:
            raise DimensionError(f"support {self.indices} exceeds N={n_dim}")

    def __str__(self):
        return '{' + ','.join(str(k) for k in self.indices) + '}'


class SparseLinearModel(object):
    """y = Hx + n with x in X_S and n ~ N(0, sigma2 I)

    Construction checks sigma2 > 0, 1 <= S < N and spark(H) > S.  The spark
    check enumerates C(N, S) column subsets, so it is skipped for identity
    matrices and refused above `spark_budget`.
    """

    def __init__(self, H, sigma2, S, check_spark=True, spark_budget=SPARK_BUDGET):
        H = linalg.as_matrix(H, 'H')
        rows, cols = H.shape
        if not sigma2 > 0:
            raise DimensionError(f"sigma2 must be positive, got {sigma2}")
        if not 1 <= S < cols:
            raise DimensionError(f"need 1 <= S < N, got S={S}, N={cols}")
        self._H = H.copy()
        self._H.setflags(write=False)
        self._sigma2 = float(sigma2)
        self._S = int(S)
        self._is_identity = rows == cols and np.array_equal(H, np.eye(cols))
        if check_spark and not self._is_identity:
            required = comb(cols, S)
            if required > spark_budget:
                raise BudgetExceededError(required, spark_budget,
                    "Pass check_spark=False to skip the spark condition")
            if not linalg.spark_exceeds(H, S):
                raise SingularMatrixError(f"spark(H) <= S={S}: some {S} columns are dependent")

    @classmethod
    def ssnm(cls, N, S, sigma2):
        """The sparse signal in noise model, H = I"""
        return cls(np.eye(N), sigma2, S)

    @classmethod
    def gaussian(cls, M, N, S, sigma2, seed):
        """Seeded i.i.d. Gaussian H with unit-norm columns"""
        return cls(gaussian_matrix(M, N, seed), sigma2, S)

    @property
    def H(self):
        return self._H

    @property
    def sigma2(self):
        return self._sigma2

    @property
    def sigma(self):
        return np.sqrt(self._sigma2)

    @property
    def S(self):
        return self._S

    @property
    def M(self):
        return self._H.shape[0]

    @property
    def N(self):
        return self._H.shape[1]

    @property
    def is_ssnm(self):
        return self._is_identity

    def check_parameter(self, x0):
        """Coerce x0 to a SparseVector in X_S or raise DimensionError"""
        x0 = x0 if isinstance(x0, SparseVector) else SparseVector(x0)
        if x0.n_dim != self.N:
            raise DimensionError(f"parameter has length {x0.n_dim}, model has N={self.N}")
        if x0.nnz > self.S:
            raise DimensionError(f"parameter has {x0.nnz} nonzeros, sparsity is S={self.S}")
        return x0

    def __repr__(self):
        kind = 'SSNM' if self.is_ssnm else 'SLM'
        return f"{kind}(M={self.M}, N={self.N}, S={self.S}, sigma2={self.sigma2})"


class LinearGaussianModel(object):
    """z = As + n with s unconstrained in R^S and A of full column rank"""

    def __init__(self, A, sigma2):
        A = linalg.as_matrix(A, 'A')
        if not sigma2 > 0:
            raise DimensionError(f"sigma2 must be positive, got {sigma2}")
        if linalg.column_rank(A) < A.shape[1]:
            raise SingularMatrixError("A must have full column rank")
        self._A = A.copy()
        self._A.setflags(write=False)
        self._sigma2 = float(sigma2)

    @property
    def H(self):
        return self._A

    A = H

    @property
    def sigma2(self):
        return self._sigma2

    @property
    def sigma(self):
        return np.sqrt(self._sigma2)

    @property
    def M(self):
        return self._A.shape[0]

    @property
    def N(self):
        return self._A.shape[1]

    def check_parameter(self, s0):
        s0 = linalg.as_vector(s0, 'LGM parameter')
        if s0.shape[0] != self.N:
            raise DimensionError(f"parameter has length {s0.shape[0]}, model has S={self.N}")
        return s0

    def crb_covariance(self):
        """sigma2 (A^T A)^{-1}, the covariance of the least-squares estimator"""
        G = linalg.gram(self._A)
        return self._sigma2 * linalg.sym_solve(G, np.eye(G.shape[0]))


@dataclass(frozen=True)
class IsometryData(object):
    s0: np.ndarray
    beta: float
    residual_energy: float
    support: SupportSet
    n_dim: int


def xi_and_j(x0, S):
    """Value and 1-based index of the S-largest-magnitude entry of x0

    Ties go to the smaller index.  With fewer than S nonzeros the value is 0
    and the index is the smallest one outside the support.
    """
    x = np.asarray(x0, dtype=float)
    if np.count_nonzero(x) < S:
        outside = np.flatnonzero(x == 0)
        return 0.0, int(outside[0]) + 1
    magnitude = np.sort(np.abs(x))[::-1][S - 1]
    j = int(np.flatnonzero(np.abs(x) == magnitude)[0])
    return float(x[j]), j + 1


def submatrix(H, K):
    """H_K: column i is column k_i of H"""
    H = linalg.as_matrix(H, 'H')
    K.check_bounds(H.shape[1])
    return H[:, K.zero_based]


def embed(s, K, N):
    """x(s): the vector in X_S^K with x^K = s"""
    s = linalg.as_vector(s, 's')
    if s.shape[0] != len(K):
        raise DimensionError(f"s has length {s.shape[0]}, support has {len(K)} entries")
    K.check_bounds(N)
    x = np.zeros(N)
    x[K.zero_based] = s
    return SparseVector(x)


def restrict(x, K):
    """x^K: the entries of x at the positions in K"""
    x = np.asarray(x, dtype=float)
    K.check_bounds(x.shape[0])
    return x[K.zero_based].copy()


def isometry_data(model, K, x0):
    """s0 = H_K^+ H x0 and beta = exp(-||(I - P_K) H x0||^2 / (2 sigma2))"""
    x0 = model.check_parameter(x0)
    if len(K) != model.S:
        raise DimensionError(f"support {K} has {len(K)} entries, S={model.S}")
    H_K = submatrix(model.H, K)
    Hx0 = model.H @ x0.entries
    s0 = linalg.pseudo_inverse(H_K) @ Hx0
    residual = Hx0 - H_K @ s0
    energy = float(residual @ residual)
    beta = float(np.exp(-energy / (2.0 * model.sigma2)))
    return IsometryData(s0=s0, beta=beta, residual_energy=energy, support=K, n_dim=model.N)


def kernel_slm(x, x2, x0, model):
    """R_x0(x, x2) = exp((H(x - x0))^T H(x2 - x0) / sigma2)"""
    x0 = np.asarray(x0, dtype=float)
    d1 = model.H @ (np.asarray(x, dtype=float) - x0)
    d2 = model.H @ (np.asarray(x2, dtype=float) - x0)
    return float(np.exp(d1 @ d2 / model.sigma2))


def kernel_lgm(s, s2, s0, A, sigma2):
    """R^LGM_s0(s, s2) = exp((s - s0)^T A^T A (s2 - s0) / sigma2)"""
    A = linalg.as_matrix(A, 'A')
    s0 = np.asarray(s0, dtype=float)
    d1 = A @ (np.asarray(s, dtype=float) - s0)
    d2 = A @ (np.asarray(s2, dtype=float) - s0)
    return float(np.exp(d1 @ d2 / sigma2))


def kernel_gram(points, x0, model):
    """Kernel matrix R_ij = kernel_slm(points[i], points[j], x0)"""
    P = np.array([np.asarray(p, dtype=float) for p in points])
    D = (P - np.asarray(x0, dtype=float)) @ model.H.T
    R = np.exp(D @ D.T / model.sigma2)
    return 0.5 * (R + R.T)


def kernel_by_expectation(x, x2, x0, model, n_trials=10**6, seed=0):
    """Monte Carlo value of E_x0{ f(y;x) f(y;x2) / f(y;x0)^2 }

    Returns (estimate, standard error).  Only meant for checking the closed
    form of kernel_slm.
    """
    rng = np.random.default_rng(seed)
    mean0 = model.H @ np.asarray(x0, dtype=float)
    d1 = model.H @ np.asarray(x, dtype=float) - mean0
    d2 = model.H @ np.asarray(x2, dtype=float) - mean0
    n = rng.standard_normal((n_trials, model.M)) * np.sqrt(model.sigma2)
    # log f(y;x) - log f(y;x0) with y - H x0 = n
    log_ratio1 = (n @ d1 - 0.5 * d1 @ d1) / model.sigma2
    log_ratio2 = (n @ d2 - 0.5 * d2 @ d2) / model.sigma2
    samples = np.exp(log_ratio1 + log_ratio2)
    return float(samples.mean()), float(samples.std(ddof=1) / np.sqrt(n_trials))


def whiten(y, H, Sigma):
    """Map y = Hx + n with n ~ N(0, Sigma) to white noise form

    Returns (W y, W H) with W = L^{-1}, Sigma = L L^T.
    """
    y = linalg.as_vector(y, 'y')
    H = linalg.as_matrix(H, 'H')
    Sigma = linalg.as_matrix(Sigma, 'Sigma')
    if Sigma.shape != (y.shape[0], y.shape[0]) or H.shape[0] != y.shape[0]:
        raise DimensionError(f"Sigma {Sigma.shape}, H {H.shape} and y {y.shape} do not fit")
    L = linalg.cholesky_factor(Sigma)
    return (sla.solve_triangular(L, y, lower=True),
            sla.solve_triangular(L, H, lower=True))


def snr_db_to_xi(snr_db, sigma2):
    """xi with xi^2 / sigma2 = 10^(snr_db / 10)"""
    return float(np.sqrt(sigma2) * 10.0 ** (snr_db / 20.0))


def xi_to_snr_db(xi, sigma2):
    return float(10.0 * np.log10(xi * xi / sigma2))
