"""
Lower bounds on the variance of estimators with a prescribed mean.

Important functions:
crb_lgm: sigma2 r^T (A^T A)^{-1} r for the linear Gaussian model
bound_L_K: the bound on one index set K, in both of its forms
bound_L_star: the largest L^K over all size-S supports
theorem_bound: sum of the per-component L* values
ssnm_unbiased_bound, ssnm_s1_estimator_bound: closed forms for H = I
"""
from dataclasses import dataclass
from math import comb
from multiprocessing.pool import ThreadPool
import logging
import warnings

import numpy as np

from sparsebound import linalg
from sparsebound.errors import (AccuracyWarning, BudgetExceededError,
                                DimensionError, UnsupportedConfigurationError)
from sparsebound.mean_functions import evaluate, gradient_r, tilde_gamma
from sparsebound.model import (SupportSet, isometry_data, submatrix,
                               xi_and_j)

logger = logging.getLogger(__name__)

ENUMERATION_BUDGET = 10**6
FORM_RTOL = 1e-10
TIE_RTOL = 1e-12


@dataclass(frozen=True)
class BoundResult(object):
    """L^K together with the ingredients it was computed from

    value = beta2 * (crb_term + gamma_at_xs0**2) - gamma_at_x0**2; tilde_value
    is the same bound computed through the isometric image of gamma.
    """
    value: float
    K: SupportSet
    s0: np.ndarray
    beta2: float
    crb_term: float
    gamma_at_xs0: float
    gamma_at_x0: float
    tilde_value: float
    gradient_converged: bool = True

    @property
    def ingredients(self):
        return {'K': self.K, 's0': self.s0, 'beta2': self.beta2, 'crb_term': self.crb_term,
                'gamma_at_xs0': self.gamma_at_xs0, 'gamma_at_x0': self.gamma_at_x0}


def crb_lgm(A, r, sigma2):
    """sigma2 r^T (A^T A)^{-1} r"""
    A = linalg.as_matrix(A, 'A')
    r = linalg.as_vector(r, 'r')
    if r.shape[0] != A.shape[1]:
        raise DimensionError(f"r has length {r.shape[0]}, A has {A.shape[1]} columns")
    if not sigma2 > 0:
        raise DimensionError(f"sigma2 must be positive, got {sigma2}")
    if not np.any(r):
        return 0.0
    return max(float(sigma2 * (r @ linalg.sym_solve(linalg.gram(A), r))), 0.0)


def crb_restricted(model, K, gamma, s0, cfg=None):
    """The CRB of the linear Gaussian model z = H_K s + n for the mean gamma(x(s))"""
    if len(K) != model.S:
        raise DimensionError(f"support {K} has {len(K)} entries, S={model.S}")
    r = gradient_r(gamma, K, s0, model.N, cfg)
    return crb_lgm(submatrix(model.H, K), r.values, model.sigma2)


def bound_L_K(model, gamma, K, x0, cfg=None):
    x0 = model.check_parameter(x0)
    iso = isometry_data(model, K, x0)
    H_K = submatrix(model.H, K)
    r = gradient_r(gamma, K, iso.s0, model.N, cfg)
    crb = crb_lgm(H_K, r.values, model.sigma2)
    at_xs0 = gamma.restricted(K, iso.s0, model.N)
    at_x0 = evaluate(gamma, x0)
    beta2 = iso.beta ** 2
    value = beta2 * (crb + at_xs0 ** 2) - at_x0 ** 2

    tilde_value = (crb_lgm(H_K, iso.beta * r.values, model.sigma2)
                   + tilde_gamma(gamma, K, iso, iso.s0) ** 2 - at_x0 ** 2)
    scale = max(beta2 * (crb + at_xs0 ** 2), at_x0 ** 2, np.finfo(float).tiny)
    if abs(value - tilde_value) > FORM_RTOL * scale:
        message = f"L^K forms disagree on {K}: {value!r} vs {tilde_value!r}"
        logger.warning(message)
        warnings.warn(message, AccuracyWarning)
    logger.debug("L^K on %s for %r: %.12g (beta2 %.3g, crb %.6g)", K, gamma, value, beta2, crb)
    return BoundResult(value=float(value), K=K, s0=iso.s0, beta2=beta2, crb_term=crb,
                       gamma_at_xs0=at_xs0, gamma_at_x0=at_x0, tilde_value=float(tilde_value),
                       gradient_converged=r.converged)


def greedy_support(x0, k, S):
    """k together with the S-1 largest-magnitude other entries of x0"""
    x = np.abs(np.asarray(x0, dtype=float))
    others = [int(i) + 1 for i in np.argsort(-x, kind='stable') if int(i) + 1 != k]
    return SupportSet(tuple(sorted([k] + others[:S - 1])))


def _argmax(results):
    best = results[0]
    for result in results[1:]:
        if result.value > best.value + TIE_RTOL * max(1.0, abs(best.value)):
            best = result
    return best


def bound_L_star(model, gamma, x0, cfg=None, mode='exhaustive', budget=ENUMERATION_BUDGET, threads=1):
    """max over |K| = S of L^K; ties go to the lexicographically smallest K

    mode='greedy' evaluates only greedy_support(x0, k, S).
    """
    x0 = model.check_parameter(x0)
    if mode == 'greedy':
        return bound_L_K(model, gamma, greedy_support(x0, gamma.k, model.S), x0, cfg)
    if mode != 'exhaustive':
        raise UnsupportedConfigurationError(f"unknown search mode {mode!r}")
    required = comb(model.N, model.S)
    if required > budget:
        raise BudgetExceededError(required, budget, "Use mode='greedy' for a fast heuristic support")
    supports = list(SupportSet.all(model.N, model.S))
    logger.debug("enumerating %d supports for %r", len(supports), gamma)

    def work(K):
        return bound_L_K(model, gamma, K, x0, cfg)

    if threads > 1 and len(supports) > 1:
        with ThreadPool(min(threads, len(supports))) as pool:
            results = pool.map(work, supports)
    else:
        results = [work(K) for K in supports]
    return _argmax(results)


def _check_gammas(model, gammas):
    if len(gammas) != model.N:
        raise DimensionError(f"need one mean function per component, got {len(gammas)} for N={model.N}")
    for k, gamma in enumerate(gammas, start=1):
        if gamma.k != k:
            raise DimensionError(f"mean function {k} belongs to component {gamma.k}")


def component_bounds(model, gammas, x0, cfg=None, mode='exhaustive', budget=ENUMERATION_BUDGET, threads=1):
    _check_gammas(model, gammas)
    return [bound_L_star(model, gamma, x0, cfg, mode, budget, threads) for gamma in gammas]


def theorem_bound(model, gammas, x0, cfg=None, mode='exhaustive', budget=ENUMERATION_BUDGET, threads=1):
    """Lower bound on the total variance: sum over k of L*_k"""
    return float(sum(result.value for result in
                     component_bounds(model, gammas, x0, cfg, mode, budget, threads)))


def theorem_mse_bound(model, gammas, x0, cfg=None, mode='exhaustive', budget=ENUMERATION_BUDGET, threads=1):
    """MSE lower bound: squared bias at x0 plus the variance bound"""
    x0 = model.check_parameter(x0)
    _check_gammas(model, gammas)
    bias2 = sum((evaluate(gamma, x0) - x0.entries[gamma.k - 1]) ** 2 for gamma in gammas)
    return float(bias2 + theorem_bound(model, gammas, x0, cfg, mode, budget, threads))


def ssnm_unbiased_bound(N, S, xi, sigma2):
    """[S + (N - S) exp(-xi^2 / sigma2)] sigma2"""
    if not 1 <= S < N:
        raise DimensionError(f"need 1 <= S < N, got S={S}, N={N}")
    if not sigma2 > 0:
        raise DimensionError(f"sigma2 must be positive, got {sigma2}")
    return float((S + (N - S) * np.exp(-xi * xi / sigma2)) * sigma2)


def ssnm_component_bound(k, x0, S, sigma2):
    """Per-component unbiased bound for H = I: sigma2 on supp(x0), sigma2 e^{-xi^2/sigma2} off it"""
    x0 = np.asarray(x0, dtype=float)
    if not 1 <= k <= x0.shape[0]:
        raise DimensionError(f"component {k} outside 1..{x0.shape[0]}")
    if x0[k - 1] != 0:
        return float(sigma2)
    xi, _ = xi_and_j(x0, S)
    return float(sigma2 * np.exp(-xi * xi / sigma2))


def ssnm_s1_estimator_bound(model, gamma_j, gamma_i, x0, cfg=None, check_all=True):
    """L^{K_j}(gamma_j) + (N-1) L^{K_i}(gamma_i) for H = I and S = 1

    K_j = {j(x0)} and K_i = {i} with i the smallest index other than j.  The
    exponential factor for K_i is the beta^2 inside L^{K_i}, applied once.
    With check_all, every other off-support index is evaluated too and an
    AccuracyWarning is raised when one of them differs.
    """
    if model.S != 1 or not model.is_ssnm:
        raise UnsupportedConfigurationError(f"needs H = I and S = 1, got {model!r}")
    x0 = model.check_parameter(x0)
    _, j = xi_and_j(x0, 1)
    i = 1 if j != 1 else 2
    if gamma_j.k != j or gamma_i.k != i:
        raise DimensionError(
            f"mean functions for components {gamma_j.k}, {gamma_i.k} given, need {j} and {i}")
    on_support = bound_L_K(model, gamma_j, SupportSet((j,)), x0, cfg).value
    off_support = bound_L_K(model, gamma_i, SupportSet((i,)), x0, cfg).value
    if check_all:
        for other in range(1, model.N + 1):
            if other in (i, j):
                continue
            value = bound_L_K(model, gamma_i.with_component(other), SupportSet((other,)), x0, cfg).value
            if abs(value - off_support) > FORM_RTOL * max(abs(on_support), abs(off_support), model.sigma2):
                message = f"off-support bounds differ: component {other} gives {value!r}, {i} gives {off_support!r}"
                logger.warning(message)
                warnings.warn(message, AccuracyWarning)
    return float(on_support + (model.N - 1) * off_support)
