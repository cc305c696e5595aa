import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import exp_cov
from tpeprecoding.asymptotics import AsymptoticMatrices, asymptotic_matrices
from tpeprecoding.config import class_power, uniform_power
from tpeprecoding.errors import NumericalError
from tpeprecoding.optimizer import (
    empirical_optimal_weights,
    inverse_sqrt_psd,
    optimal_weights,
    rayleigh_objective,
)


def random_problem(seed, J=3):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(J)
    X = rng.standard_normal((J, J))
    Y = rng.standard_normal((J, J))
    return np.outer(a, a), X @ X.T + 0.1 * np.eye(J), Y @ Y.T + 0.1 * np.eye(J)


def test_scalar_case_is_ratio():
    mats = AsymptoticMatrices(np.array([[2.0]]), np.array([[1.0]]), np.array([[3.0]]), 0.0)
    res = optimal_weights(mats, P=1.0, sigma2=1.0, trP=1.0)
    assert res.lambda_max == pytest.approx(2.0 / (1.0 + 3.0))
    assert res.weights.w[0] == pytest.approx(np.sqrt(1.0 / 3.0))
    assert res.weights.provenance == "asymptotic_optimal"


def test_uniform_allocation_gives_equal_sinr():
    mats = asymptotic_matrices(exp_cov(128), 32, 3, 0.1)
    alloc = uniform_power(10.0, 32)
    res = optimal_weights(mats, 10.0, 1.0, alloc.trace, alloc)
    assert np.allclose(res.gamma_k, res.lambda_max, rtol=1e-12)


def test_class_allocation_scales_sinr():
    mats = asymptotic_matrices(exp_cov(64), 16, 3, 0.1)
    alloc = class_power((1, 2, 3, 4), 16)
    res = optimal_weights(mats, 1.0, 1.0, alloc.trace, alloc)
    p = alloc.as_array()
    assert np.allclose(res.gamma_k, 16 * p * res.lambda_max / alloc.trace)


@pytest.mark.parametrize("seed", range(5))
def test_no_feasible_vector_does_better(seed):
    A, B, C = random_problem(seed)
    P, sigma2 = 3.0, 0.5
    res = optimal_weights(AsymptoticMatrices(A, B, C, 0.0), P, sigma2, trP=P)
    rng = np.random.default_rng(100 + seed)
    best = rayleigh_objective(res.weights.as_array(), A, B, C, P, sigma2)
    assert best == pytest.approx(res.lambda_max, rel=1e-10)
    trials = rng.standard_normal((1000, 3))
    vals = [rayleigh_objective(w, A, B, C, P, sigma2) for w in trials]
    assert max(vals) <= best * (1 + 1e-12)


@pytest.mark.parametrize("seed", range(3))
def test_weights_meet_power_constraint(seed):
    A, B, C = random_problem(seed, J=4)
    P, trP = 5.0, 2.5
    res = optimal_weights(AsymptoticMatrices(A, B, C, 0.0), P, 1.0, trP)
    w = res.weights.as_array()
    assert trP * (w @ C @ w) == pytest.approx(P, rel=1e-12)
    assert w[np.flatnonzero(w)[0]] > 0


@given(seed=st.integers(0, 10_000), c=st.floats(1e-3, 1e3))
def test_objective_is_scale_invariant(seed, c):
    A, B, C = random_problem(seed)
    w = np.random.default_rng(seed).standard_normal(3)
    a = rayleigh_objective(w, A, B, C, 2.0, 1.0)
    assert rayleigh_objective(c * w, A, B, C, 2.0, 1.0) == pytest.approx(a, rel=1e-12)


@given(seed=st.integers(0, 10_000))
def test_inverse_square_root_whitens(seed):
    _, B, _ = random_problem(seed, J=5)
    R, _ = inverse_sqrt_psd(B)
    assert np.allclose(R @ B @ R, np.eye(5), atol=1e-8)


def test_inverse_square_root_clamps_singular():
    S = np.diag([1.0, 0.0])
    R, S_c = inverse_sqrt_psd(S)
    assert S_c[1, 1] == pytest.approx(1e-12)
    assert np.all(np.isfinite(R))


def test_indefinite_constraint_raises():
    mats = AsymptoticMatrices(np.eye(2), np.diag([1.0, -1.0]), np.zeros((2, 2)), 0.0)
    with pytest.raises(NumericalError, match="indefinite"):
        optimal_weights(mats, 1.0, 1.0, 1.0)


def test_empirical_pooling_matches_asymptotic_path():
    A, B, C = random_problem(7)
    alloc = uniform_power(2.0, 4)
    K, p, trP = 4, alloc.as_array(), alloc.trace
    Ak = np.stack([A * K * pk for pk in p])
    Bk = np.stack([B * trP] * K)
    emp = empirical_optimal_weights(Ak, Bk, C * trP, 2.0, 1.0, alloc)
    ref = optimal_weights(AsymptoticMatrices(A, B, C, 0.0), 2.0, 1.0, trP, alloc)
    assert np.allclose(emp.weights.as_array(), ref.weights.as_array(), rtol=1e-10)
    assert emp.weights.provenance == "empirical_optimal"
