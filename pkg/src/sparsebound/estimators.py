"""
Reference estimators whose variances the bounds are compared against.

Every estimator is an immutable callable taking a batch of observations of
shape (..., M) and returning estimates of shape (..., N).

Important classes:
IdentityEstimator: x_hat = y
MLSSNMEstimator: keep the S largest-magnitude entries (ML for H = I)
MLSLMEstimator: exhaustive least-squares support search (ML for general H)
HardThresholdEstimator: keep entries with |y_k| >= T
LMVUEstimator: the S = 1 locally minimum variance unbiased estimator at x0
LeastSquaresEstimator: A^+ z for the linear Gaussian model
"""
from abc import ABC, abstractmethod
from math import comb
import logging

import numpy as np

from sparsebound import linalg
from sparsebound.errors import (BudgetExceededError, DimensionError,
                                UnsupportedConfigurationError)
from sparsebound.mean_functions import HardThresholdMean, MLMean, UnbiasedMean
from sparsebound.model import SupportSet, submatrix, xi_and_j

logger = logging.getLogger(__name__)


def ml_ssnm(y, S):
    """P_S(y): keep the S largest-magnitude entries, ties to the smaller index"""
    y = np.asarray(y, dtype=float)
    if not 1 <= S < y.shape[-1]:
        raise DimensionError(f"need 1 <= S < N, got S={S}, N={y.shape[-1]}")
    keep = np.argsort(-np.abs(y), axis=-1, kind='stable')[..., :S]
    out = np.zeros_like(y)
    np.put_along_axis(out, keep, np.take_along_axis(y, keep, axis=-1), axis=-1)
    return out


def ml_slm(y, model, budget=10**6):
    """Support with the smallest least-squares residual, embedded in R^N

    Supports are visited in lexicographic order and only a strictly smaller
    residual replaces the current best.
    """
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != model.M:
        raise DimensionError(f"observation has length {y.shape[-1]}, model has M={model.M}")
    required = comb(model.N, model.S)
    if required > budget:
        raise BudgetExceededError(required, budget)
    batch = y.reshape(-1, model.M)
    best = np.full(batch.shape[0], np.inf)
    out = np.zeros((batch.shape[0], model.N))
    for K in SupportSet.all(model.N, model.S):
        H_K = submatrix(model.H, K)
        s = batch @ linalg.pseudo_inverse(H_K).T
        residual = np.sum((batch - s @ H_K.T) ** 2, axis=1)
        better = residual < best
        if np.any(better):
            best[better] = residual[better]
            out[better] = 0.0
            out[np.ix_(better, K.zero_based)] = s[better]
    return out.reshape(y.shape[:-1] + (model.N,))


def ht(y, T):
    """Hard thresholding; |y_k| = T is kept"""
    if T < 0:
        raise DimensionError(f"threshold must be >= 0, got {T}")
    y = np.asarray(y, dtype=float)
    return np.where(np.abs(y) >= T, y, 0.0)


def lmvu_s1(y, x0, sigma2):
    """The S = 1 LMVU estimator at x0

    Component j(x0) is y_j; every other component is alpha(y) y_k with
    alpha = exp(-(2 y_j xi + xi^2) / (2 sigma2)).
    """
    x0 = np.asarray(x0, dtype=float)
    if np.count_nonzero(x0) != 1:
        raise UnsupportedConfigurationError(
            f"the LMVU estimator needs exactly one nonzero in x0, got {np.count_nonzero(x0)}")
    xi, j = xi_and_j(x0, 1)
    y = np.asarray(y, dtype=float)
    yj = y[..., j - 1]
    alpha = np.exp(-(2.0 * yj * xi + xi * xi) / (2.0 * sigma2))
    out = np.expand_dims(alpha, -1) * y
    out[..., j - 1] = yj
    return out


def ls_lgm(z, A):
    """Least squares A^+ z"""
    return np.asarray(z, dtype=float) @ linalg.pseudo_inverse(A).T


class Estimator(ABC):
    """A deterministic map y -> x_hat(y)

    Important methods:
    __call__: evaluate on a batch of observations
    mean_function: the prescribed mean gamma_k this estimator induces
    """
    name = ''

    @abstractmethod
    def __call__(self, y):
        pass

    def output_dim(self, model):
        return model.N

    def mean_function(self, k, model, cfg=None):
        raise UnsupportedConfigurationError(f"no mean function available for {self.name}")

    def __repr__(self):
        return f"{type(self).__name__}({self.name})"


class IdentityEstimator(Estimator):
    name = 'identity'

    def __call__(self, y):
        return np.array(y, dtype=float)

    def output_dim(self, model):
        return model.M

    def mean_function(self, k, model, cfg=None):
        return UnbiasedMean(k)


class MLSSNMEstimator(Estimator):

    def __init__(self, S):
        self._S = int(S)
        self.name = f"ml_ssnm_S{self._S}"

    @property
    def S(self):
        return self._S

    def __call__(self, y):
        return ml_ssnm(y, self._S)

    def mean_function(self, k, model, cfg=None):
        if not model.is_ssnm:
            raise UnsupportedConfigurationError("the ML mean is only available for H = I")
        return MLMean(k, self._S, model.sigma, cfg)


class MLSLMEstimator(Estimator):

    def __init__(self, model, budget=10**6):
        required = comb(model.N, model.S)
        if required > budget:
            raise BudgetExceededError(required, budget)
        self._model = model
        self._budget = budget
        self.name = f"ml_slm_S{model.S}"

    def __call__(self, y):
        return ml_slm(y, self._model, self._budget)


class HardThresholdEstimator(Estimator):

    def __init__(self, T):
        if T < 0:
            raise DimensionError(f"threshold must be >= 0, got {T}")
        self._T = float(T)
        self.name = f"ht_T{self._T:g}"

    @property
    def T(self):
        return self._T

    def __call__(self, y):
        return ht(y, self._T)

    def mean_function(self, k, model, cfg=None):
        if not model.is_ssnm:
            raise UnsupportedConfigurationError("the thresholding mean is only available for H = I")
        return HardThresholdMean(k, self._T, model.sigma)


class LMVUEstimator(Estimator):
    name = 'lmvu_s1'

    def __init__(self, x0, sigma2):
        x0 = np.array(x0, dtype=float)
        if np.count_nonzero(x0) != 1:
            raise UnsupportedConfigurationError(
                f"the LMVU estimator needs exactly one nonzero in x0, got {np.count_nonzero(x0)}")
        self._x0 = x0
        self._sigma2 = float(sigma2)

    def __call__(self, y):
        return lmvu_s1(y, self._x0, self._sigma2)

    def mean_function(self, k, model, cfg=None):
        return UnbiasedMean(k)


class LeastSquaresEstimator(Estimator):
    name = 'ls_lgm'

    def __init__(self, A):
        self._pinv = linalg.pseudo_inverse(A)

    def __call__(self, z):
        return np.asarray(z, dtype=float) @ self._pinv.T

    def output_dim(self, model):
        return self._pinv.shape[0]

    def mean_function(self, k, model, cfg=None):
        return UnbiasedMean(k)


def mean_functions_for(estimator, model, cfg=None):
    """gamma_1..gamma_N induced by an estimator"""
    return [estimator.mean_function(k, model, cfg) for k in range(1, model.N + 1)]
