"""
Prescribed mean functions gamma_k(x) = c_k(x) + x_k and their derivatives.

Four kinds are implemented: UnbiasedMean (x_k), AffineMean (a^T x + b),
HardThresholdMean (mean of the k-th hard-thresholding output, closed form)
and MLMean (mean of the k-th component of the best-S selection, by
quadrature for S = 1 and by common-random-numbers Monte Carlo for S > 1).

Component indices k are 1-based.
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
import logging
import warnings

import numpy as np
from scipy import integrate
from scipy.stats import norm

from sparsebound.errors import (AccuracyWarning, DimensionError,
                                UnsupportedConfigurationError)
from sparsebound.model import embed

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadratureConfig(object):
    """Numerical settings for quadrature means and finite-difference gradients

    half_width: integration window, in units of sigma, around x_k
    nodes: Simpson nodes per window segment (odd)
    step: relative finite-difference step, h = step * max(1, |s|)
    mc_*: settings for the Monte Carlo path of MLMean with S > 1
    """
    half_width: float = 10.0
    nodes: int = 2001
    step: float = 1e-4
    richardson_rtol: float = 1e-5
    mc_trials: int = 200000
    mc_seed: int = 0
    mc_step: float = 0.05

    def __post_init__(self):
        if self.nodes < 51 or self.nodes % 2 == 0:
            raise DimensionError(f"node count must be odd and >= 51, got {self.nodes}")
        if self.half_width < 6:
            raise DimensionError(f"half width must be >= 6 sigma, got {self.half_width}")
        if not self.step > 0:
            raise DimensionError(f"finite-difference step must be positive, got {self.step}")

    def step_at(self, s):
        return self.step * max(1.0, abs(s))


DEFAULT_CONFIG = QuadratureConfig()


@dataclass(frozen=True)
class GradientResult(object):
    """r(s0) together with the outcome of its accuracy check"""
    values: np.ndarray
    converged: bool = True
    richardson_error: float = 0.0


def ht_mean(mu, T, sigma):
    """E[y 1{|y| >= T}] for y ~ N(mu, sigma^2)"""
    mu = np.asarray(mu, dtype=float)
    a = (-T - mu) / sigma
    b = (T - mu) / sigma
    return mu * (norm.sf(b) + norm.cdf(a)) + sigma * (norm.pdf(b) - norm.pdf(a))


def _ml_integrand(y, xk, others, sigma):
    magnitude = np.abs(y)[:, None]
    inside = norm.cdf((magnitude - others) / sigma) - norm.cdf((-magnitude - others) / sigma)
    return y * norm.pdf((y - xk) / sigma) / sigma * np.prod(inside, axis=1)


def ml_mean(x, k, S, sigma, cfg=None):
    """Mean of component k of P_1(y), y ~ N(x, sigma^2 I), by quadrature

    Integrates y phi_sigma(y - x_k) prod_{l != k} P(|y_l| < |y|) over
    x_k +- half_width*sigma, split at y = 0 where |y| has its kink.
    """
    if S != 1:
        raise UnsupportedConfigurationError(
            f"quadrature ML mean needs S = 1, got S={S}; "
            "use montecarlo.estimate_mean_function instead")
    cfg = cfg or DEFAULT_CONFIG
    x = np.asarray(x, dtype=float)
    if not 1 <= k <= x.shape[0]:
        raise DimensionError(f"component {k} outside 1..{x.shape[0]}")
    xk = x[k - 1]
    others = np.delete(x, k - 1)
    lo = xk - cfg.half_width * sigma
    hi = xk + cfg.half_width * sigma
    segments = [(lo, 0.0), (0.0, hi)] if lo < 0.0 < hi else [(lo, hi)]
    total = 0.0
    for a, b in segments:
        y = np.linspace(a, b, cfg.nodes)
        total += integrate.simpson(_ml_integrand(y, xk, others, sigma), x=y)
    return float(total)


class MeanFunction(ABC):
    """gamma_k(x), the prescribed mean of the k-th estimator component"""
    kind = ''
    is_affine = False

    def __init__(self, k):
        if int(k) < 1:
            raise DimensionError(f"component index is 1-based, got {k}")
        self._k = int(k)

    @property
    def k(self):
        return self._k

    def _component(self, x):
        x = np.asarray(x, dtype=float)
        if self._k > x.shape[0]:
            raise DimensionError(f"component {self._k} outside 1..{x.shape[0]}")
        return x

    @abstractmethod
    def evaluate(self, x):
        pass

    def restricted(self, K, s, n_dim):
        """gamma(x(s)) for s in the coordinates of X_S^K"""
        return self.evaluate(embed(s, K, n_dim))

    def gradient(self, K, s0, n_dim, cfg=None):
        """r(s0) = d gamma(x(s)) / ds by central differences

        The difference quotient is taken at h and h/2; the returned value is
        their Richardson extrapolation and the check compares the two.
        """
        cfg = cfg or DEFAULT_CONFIG
        s0 = np.asarray(s0, dtype=float)
        values = np.zeros(s0.shape[0])
        worst = 0.0
        converged = True
        for p in range(s0.shape[0]):
            h = cfg.step_at(s0[p])
            unit = np.zeros(s0.shape[0])
            unit[p] = 1.0
            d_h = self._central_difference(K, s0, unit, h, n_dim)
            d_half = self._central_difference(K, s0, unit, 0.5 * h, n_dim)
            error = abs(d_h - d_half)
            if error > cfg.richardson_rtol * max(abs(d_h), abs(d_half)) + 1e-12:
                converged = False
            worst = max(worst, error)
            values[p] = (4.0 * d_half - d_h) / 3.0
        if not converged:
            message = f"{self!r}: finite-difference gradient on {K} changed by {worst:.3e} when halving h"
            logger.warning(message)
            warnings.warn(message, AccuracyWarning)
        return GradientResult(values=values, converged=converged, richardson_error=worst)

    def _central_difference(self, K, s0, unit, h, n_dim):
        upper = self.restricted(K, s0 + h * unit, n_dim)
        lower = self.restricted(K, s0 - h * unit, n_dim)
        return (upper - lower) / (2.0 * h)

    def with_component(self, k):
        raise UnsupportedConfigurationError(f"{self.kind} means cannot be moved to another component")

    def __call__(self, x):
        return self.evaluate(x)

    def __repr__(self):
        return f"{type(self).__name__}(k={self._k})"


class UnbiasedMean(MeanFunction):
    kind = 'unbiased'
    is_affine = True

    def evaluate(self, x):
        return float(self._component(x)[self._k - 1])

    def gradient(self, K, s0, n_dim, cfg=None):
        values = np.zeros(len(K))
        if self._k in K:
            values[K.position(self._k)] = 1.0
        return GradientResult(values=values)

    def with_component(self, k):
        return UnbiasedMean(k)


class AffineMean(MeanFunction):
    """gamma_k(x) = a^T x + b"""
    kind = 'affine'
    is_affine = True

    def __init__(self, k, a, b=0.0):
        super().__init__(k)
        self._a = np.array(a, dtype=float)
        self._b = float(b)
        if self._a.ndim != 1 or self._k > self._a.shape[0]:
            raise DimensionError(f"coefficients of shape {self._a.shape} do not cover component {self._k}")

    @property
    def a(self):
        return self._a

    @property
    def b(self):
        return self._b

    def evaluate(self, x):
        x = self._component(x)
        if x.shape[0] != self._a.shape[0]:
            raise DimensionError(f"x has length {x.shape[0]}, coefficients {self._a.shape[0]}")
        return float(self._a @ x + self._b)

    def gradient(self, K, s0, n_dim, cfg=None):
        return GradientResult(values=self._a[K.zero_based].copy())


class HardThresholdMean(MeanFunction):
    """Mean of y_k 1{|y_k| >= T}; depends on x only through x_k"""
    kind = 'ht'

    def __init__(self, k, T, sigma):
        super().__init__(k)
        if T < 0 or not sigma > 0:
            raise DimensionError(f"need T >= 0 and sigma > 0, got T={T}, sigma={sigma}")
        self._T = float(T)
        self._sigma = float(sigma)

    @property
    def T(self):
        return self._T

    def evaluate(self, x):
        return float(ht_mean(self._component(x)[self._k - 1], self._T, self._sigma))

    def with_component(self, k):
        return HardThresholdMean(k, self._T, self._sigma)

    def __repr__(self):
        return f"HardThresholdMean(k={self._k}, T={self._T})"


class MLMean(MeanFunction):
    """Mean of component k of the SSNM maximum-likelihood estimator P_S(y)

    S = 1 uses the quadrature in ml_mean.  S > 1 estimates the mean by Monte
    Carlo with common random numbers (cfg.mc_trials, cfg.mc_seed), so values
    and gradients carry sampling error.
    """
    kind = 'ml'

    def __init__(self, k, S, sigma, cfg=None):
        super().__init__(k)
        if S < 1 or not sigma > 0:
            raise DimensionError(f"need S >= 1 and sigma > 0, got S={S}, sigma={sigma}")
        self._S = int(S)
        self._sigma = float(sigma)
        self._cfg = cfg or DEFAULT_CONFIG

    @property
    def S(self):
        return self._S

    @property
    def stochastic(self):
        return self._S > 1

    def evaluate(self, x):
        x = self._component(x)
        if self._S == 1:
            return ml_mean(x, self._k, 1, self._sigma, self._cfg)
        return float(self._monte_carlo_means([x])[0][self._k - 1])

    def _monte_carlo_means(self, points):
        from sparsebound import estimators, montecarlo
        from sparsebound.model import SparseLinearModel

        n_dim = np.asarray(points[0]).shape[0]
        model = SparseLinearModel.ssnm(n_dim, self._S, self._sigma ** 2)
        results = montecarlo.estimate_mean_function(
            model, estimators.MLSSNMEstimator(self._S), points,
            n_trials=self._cfg.mc_trials, seed=self._cfg.mc_seed)
        return [result.mean for result in results]

    def gradient(self, K, s0, n_dim, cfg=None):
        if self._S == 1:
            return super().gradient(K, s0, n_dim, cfg)
        cfg = cfg or self._cfg
        s0 = np.asarray(s0, dtype=float)
        h = cfg.mc_step * self._sigma
        points = []
        for p in range(s0.shape[0]):
            unit = np.zeros(s0.shape[0])
            unit[p] = h
            points.append(embed(s0 + unit, K, n_dim))
            points.append(embed(s0 - unit, K, n_dim))
        means = self._monte_carlo_means(points)
        values = np.array([(means[2 * p][self._k - 1] - means[2 * p + 1][self._k - 1]) / (2.0 * h)
                           for p in range(s0.shape[0])])
        logger.debug("Monte Carlo gradient of %r on %s: %s", self, K, values)
        return GradientResult(values=values, converged=False)

    def with_component(self, k):
        return MLMean(k, self._S, self._sigma, self._cfg)

    def __repr__(self):
        return f"MLMean(k={self._k}, S={self._S})"


def evaluate(gamma, x):
    return gamma.evaluate(x)


def tilde_gamma(gamma, K, iso, s):
    """beta * gamma(x(s)), the isometric image of gamma on X_S^K"""
    return iso.beta * gamma.restricted(K, s, iso.n_dim)


def gradient_r(gamma, K, s0, n_dim, cfg=None):
    """r(s0) = d gamma(x(s)) / ds at s0"""
    if len(np.asarray(s0)) != len(K):
        raise DimensionError(f"s0 has length {len(np.asarray(s0))}, support has {len(K)} entries")
    return gamma.gradient(K, s0, n_dim, cfg)
