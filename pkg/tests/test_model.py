import numpy as np
import pytest
from scipy import integrate
from scipy.stats import norm

from sparsebound import model
from sparsebound.errors import BudgetExceededError, DimensionError, SingularMatrixError
from sparsebound.model import (LinearGaussianModel, SparseLinearModel, SparseVector,
                               SupportSet)


INSTANCES = 1000


def test_sparse_vector_support_is_one_based():
    """
    Support lists the positions of nonzeros starting from 1
    """
    x = SparseVector([0.0, 3.0, 0.0, -1.0])
    assert x.support == (2, 4)
    assert x.nnz == 2
    assert x.n_dim == 4


def test_sparse_vector_is_read_only():
    """
    Entries cannot be modified in place
    """
    x = SparseVector([1.0, 0.0])
    with pytest.raises(ValueError):
        x.entries[0] = 5.0


def test_sparse_vector_from_support():
    """
    Building from indices and values, and rejecting indices outside 1..N
    """
    x = SparseVector.from_support(4, [1, 3], [2.0, -1.0])
    assert np.array_equal(x.entries, [2.0, 0.0, -1.0, 0.0])
    with pytest.raises(DimensionError):
        SparseVector.from_support(4, [5], [1.0])


def test_sparse_vector_signed_zero_equality():
    """
    -0.0 and 0.0 entries give equal vectors with equal hashes
    """
    a = SparseVector([0.0, 1.0])
    b = SparseVector([-0.0, 1.0])
    assert a == b
    assert len({a, b}) == 1


def test_support_set_validation():
    """
    Indices must be 1-based and strictly increasing
    """
    with pytest.raises(DimensionError):
        SupportSet((0, 1))
    with pytest.raises(DimensionError):
        SupportSet((2, 1))
    with pytest.raises(DimensionError):
        SupportSet((1, 1))


def test_support_set_enumeration():
    """
    All size-2 subsets of 1..4 in lexicographic order
    """
    supports = list(SupportSet.all(4, 2))
    assert len(supports) == 6
    assert supports[0] == SupportSet((1, 2))
    assert supports[-1] == SupportSet((3, 4))
    assert str(SupportSet((1, 3))) == '{1,3}'
    assert SupportSet((2, 5)).position(5) == 1


def test_model_validation():
    """
    sigma2 > 0 and 1 <= S < N are checked on construction
    """
    with pytest.raises(DimensionError):
        SparseLinearModel(np.eye(3), 0.0, 1)
    with pytest.raises(DimensionError):
        SparseLinearModel(np.eye(3), 1.0, 3)


def test_model_spark_condition():
    """
    Dependent column pairs are refused for S = 2
    """
    H = np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]])
    with pytest.raises(SingularMatrixError):
        SparseLinearModel(H, 1.0, 2)
    assert SparseLinearModel(H, 1.0, 2, check_spark=False).N == 3


def test_model_spark_budget():
    """
    A spark check larger than the budget is refused
    """
    H = model.gaussian_matrix(10, 20, seed=3)
    with pytest.raises(BudgetExceededError):
        SparseLinearModel(H, 1.0, 5, spark_budget=100)


def test_model_copies_h():
    """
    The model keeps its own read-only copy of H
    """
    H = np.eye(3)
    m = SparseLinearModel(H, 1.0, 1)
    H[0, 0] = 7.0
    assert m.H[0, 0] == 1.0
    assert not m.H.flags.writeable


def test_gaussian_model_columns(rng):
    """
    Seeded Gaussian matrices have unit-norm columns and are reproducible
    """
    a = SparseLinearModel.gaussian(4, 6, 2, 1.0, seed=5)
    b = SparseLinearModel.gaussian(4, 6, 2, 1.0, seed=5)
    assert np.allclose(np.linalg.norm(a.H, axis=0), 1.0)
    assert np.array_equal(a.H, b.H)
    assert not a.is_ssnm


def test_check_parameter(ssnm3):
    """
    Parameters must have length N and at most S nonzeros
    """
    assert ssnm3.check_parameter([0.0, 1.0, 0.0]).support == (2,)
    with pytest.raises(DimensionError):
        ssnm3.check_parameter([1.0, 1.0, 0.0])
    with pytest.raises(DimensionError):
        ssnm3.check_parameter([1.0, 0.0])


def test_lgm_needs_full_rank():
    """
    The linear Gaussian model refuses rank-deficient A
    """
    with pytest.raises(SingularMatrixError):
        LinearGaussianModel(np.array([[1.0, 2.0], [2.0, 4.0]]), 1.0)
    lgm = LinearGaussianModel(np.array([[1.0, 0.0], [0.0, 2.0]]), 1.0)
    assert np.allclose(lgm.crb_covariance(), np.diag([1.0, 0.25]))


def test_xi_and_j():
    """
    Value and index of the S-largest magnitude entry, ties to the smaller index
    """
    assert model.xi_and_j([0.0, 3.0, -1.0, 0.0], 2) == (-1.0, 3)
    assert model.xi_and_j([2.0, -2.0, 0.0], 1) == (2.0, 1)
    assert model.xi_and_j([0.0, 5.0, 0.0], 2) == (0.0, 1)


def test_xi_and_j_tie_at_the_s_th_magnitude():
    """
    When the S-th largest magnitude is shared, j is the smallest index holding it
    """
    assert model.xi_and_j([1.0, 2.0, 2.0], 2) == (2.0, 2)
    assert model.xi_and_j([1.0, -2.0, 2.0, 3.0], 3) == (-2.0, 2)
    assert model.xi_and_j([3.0, 3.0, 3.0], 3) == (3.0, 1)


def test_embed_and_restrict(rng):
    """
    restrict undoes embed on X_S^K
    """
    K = SupportSet((2, 4))
    s = rng.standard_normal(2)
    x = model.embed(s, K, 5)
    assert x.support == (2, 4)
    assert np.array_equal(model.restrict(x, K), s)
    with pytest.raises(DimensionError):
        model.embed(s, SupportSet((2, 6)), 5)


def test_isometry_data_ssnm(ssnm3, x0_ssnm3):
    """
    For H = I, s0 is x0 on K and beta measures the dropped entries
    """
    on = model.isometry_data(ssnm3, SupportSet((1,)), x0_ssnm3)
    assert np.allclose(on.s0, [2.0])
    assert on.beta == pytest.approx(1.0)
    off = model.isometry_data(ssnm3, SupportSet((2,)), x0_ssnm3)
    assert np.allclose(off.s0, [0.0])
    assert off.residual_energy == pytest.approx(4.0)
    assert off.beta == pytest.approx(np.exp(-2.0))


def test_beta_decreases_away_from_range(general_model):
    """
    beta shrinks as x0 moves away from range(H_K)
    """
    K = SupportSet((2,))
    betas = [model.isometry_data(general_model, K, [t, 0, 0, 0, 0]).beta for t in (0.0, 0.5, 1.0, 2.0)]
    assert betas[0] == 1.0
    assert all(a > b for a, b in zip(betas, betas[1:]))


def test_kernel_symmetric_and_psd(general_model, rng):
    """
    The kernel Gram matrix is symmetric with no negative eigenvalues
    """
    x0 = np.array([0.5, 0, 0, 0, 0])
    points = [np.eye(5)[k] * rng.uniform(-1, 1) for k in range(5)] + [x0]
    R = model.kernel_gram(points, x0, general_model)
    assert np.array_equal(R, R.T)
    eigenvalues = np.linalg.eigvalsh(R)
    assert eigenvalues.min() > -1e-10 * eigenvalues.max()
    assert R[0, 1] == pytest.approx(model.kernel_slm(points[0], points[1], x0, general_model))


def test_kernel_closed_form_by_quadrature(ssnm3):
    """
    exp((x - x0)^T (x2 - x0) / sigma2) equals the defining expectation, here a 1-D integral
    """
    x, x2, x0 = np.array([2.0, 0, 0]), np.array([3.0, 0, 0]), np.zeros(3)
    # log f(y;x) + log f(y;x2) - 2 log f(y;x0) with y_1 = n
    value, _ = integrate.quad(lambda n: np.exp(5.0 * n - 6.5) * norm.pdf(n), -np.inf, np.inf,
                              epsabs=0, epsrel=1e-12)
    assert model.kernel_slm(x, x2, x0, ssnm3) == pytest.approx(np.exp(6.0), rel=1e-12)
    assert value == pytest.approx(np.exp(6.0), rel=1e-8)


def test_kernel_by_expectation(ssnm3):
    """
    Monte Carlo expectation agrees with the closed form for small displacements
    """
    x, x2, x0 = np.array([0.3, 0, 0]), np.array([0.2, 0.1, 0]), np.zeros(3)
    estimate, se = model.kernel_by_expectation(x, x2, x0, ssnm3, n_trials=200000, seed=4)
    assert abs(estimate - model.kernel_slm(x, x2, x0, ssnm3)) < 4 * se


def test_kernel_lgm_values():
    """
    The reduced kernel is 1 at s = s0 and e for A = I, s = s2 = (1), s0 = (0)
    """
    A = np.array([[1.0, 0.5], [0.0, 2.0], [1.0, -1.0]])
    s0 = np.array([0.3, -1.2])
    assert model.kernel_lgm(s0, s0, s0, A, 0.7) == 1.0
    assert model.kernel_lgm(s0, [2.0, 1.0], s0, A, 0.7) == 1.0
    assert model.kernel_lgm([1.0], [1.0], [0.0], np.eye(1), 1.0) == pytest.approx(np.e, rel=1e-15)


def test_kernel_lgm_matches_kernel_slm_on_embedded_points(general_model, rng):
    """
    With A = H_K the reduced kernel is the full kernel at the embedded vectors
    """
    K = SupportSet((2,))
    A = model.submatrix(general_model.H, K)
    for _ in range(20):
        s, s2, s0 = rng.standard_normal(1), rng.standard_normal(1), rng.standard_normal(1)
        full = model.kernel_slm(model.embed(s, K, 5).entries, model.embed(s2, K, 5).entries,
                                model.embed(s0, K, 5).entries, general_model)
        assert model.kernel_lgm(s, s2, s0, A, general_model.sigma2) == pytest.approx(full, rel=1e-12)


@pytest.mark.slow
def test_kernel_symmetric_and_psd_many_instances(general_model, rng):
    """
    Symmetry and positive semidefiniteness over 1000 random point sets
    """
    for _ in range(INSTANCES):
        x0 = np.zeros(5)
        x0[rng.integers(5)] = rng.uniform(-2, 2)
        points = [np.eye(5)[rng.integers(5)] * rng.uniform(-1, 1) for _ in range(6)] + [x0]
        R = model.kernel_gram(points, x0, general_model)
        assert np.array_equal(R, R.T)
        eigenvalues = np.linalg.eigvalsh(R)
        assert eigenvalues.min() > -1e-10 * eigenvalues.max()


@pytest.mark.slow
def test_beta_in_unit_interval_and_monotone_many_instances(general_model, rng):
    """
    beta lies in (0, 1] and shrinks along rays leaving range(H_K), over 1000 instances
    """
    for _ in range(INSTANCES):
        K = SupportSet((int(rng.integers(1, 6)),))
        direction = np.zeros(5)
        direction[rng.integers(5)] = 1.0
        ts = np.sort(rng.uniform(0, 2, size=3))
        betas = [model.isometry_data(general_model, K, t * direction).beta for t in ts]
        assert all(0.0 < b <= 1.0 for b in betas)
        assert betas[0] >= betas[1] >= betas[2]


def test_whiten():
    """
    Correlated noise becomes white after applying L^{-1}
    """
    y, H = model.whiten([2.0, 1.0], np.eye(2), np.diag([4.0, 1.0]))
    assert np.allclose(y, [1.0, 1.0])
    assert np.allclose(H, np.diag([0.5, 1.0]))


def test_snr_conversion():
    """
    20 dB at sigma2 = 1 is xi = 10, and back
    """
    assert model.snr_db_to_xi(20.0, 1.0) == pytest.approx(10.0)
    assert model.xi_to_snr_db(10.0, 1.0) == pytest.approx(20.0)
    assert model.snr_db_to_xi(0.0, 4.0) == pytest.approx(2.0)
