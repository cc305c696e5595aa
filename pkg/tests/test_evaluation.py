import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import complex_gaussian
from tpeprecoding.config import CovarianceSpec, PowerAllocation, SystemConfig, class_power
from tpeprecoding.errors import ConfigError, NumericalError
from tpeprecoding.evaluation import (
    asymptotic_vs_empirical,
    constraint_matrix,
    empirical_sinr_direct,
    monte_carlo_rate,
    monte_carlo_sweep,
    normalized_tpe_sinr,
    quadratic_forms,
    sinr_from_quadratics,
)
from tpeprecoding.precoders import TpeWeights, normalize_power, tpe_matrix


def instance(seed, M=12, K=4):
    rng = np.random.default_rng(seed)
    H = complex_gaussian(rng, (M, K))
    Hhat = 0.9 * H + 0.3 * complex_gaussian(rng, (M, K))
    p = rng.uniform(0.5, 1.5, K) / K
    return H, Hhat, PowerAllocation(tuple(p))


def small_cfg(**kw):
    d = dict(M=32, K=8, P=10.0, sigma2=1.0, tau=0.1, J=3,
             covariance=CovarianceSpec("exponential", 0.1))
    d.update(kw)
    return SystemConfig(**d)


def test_single_user_without_interference():
    H = np.array([[1.0 + 0j], [1.0]])
    G = np.array([[1.0 + 0j], [0.0]])
    assert empirical_sinr_direct(H, G, 0.5).per_user_sinr[0] == pytest.approx(2.0)


def test_orthogonal_precoder_two_users():
    H = np.eye(2, dtype=complex)
    G = np.diag([2.0, 3.0]).astype(complex)
    r = empirical_sinr_direct(H, G, 1.0).per_user_sinr
    assert np.allclose(r, [4.0, 9.0])


def test_zero_precoder_gives_zero():
    H = np.ones((3, 2), complex)
    assert np.all(empirical_sinr_direct(H, np.zeros((3, 2)), 1.0).per_user_sinr == 0)


@given(c=st.floats(1.01, 100.0))
def test_sinr_grows_with_precoder_scale(c):
    H, Hhat, _ = instance(0)
    G = Hhat.copy()
    a = empirical_sinr_direct(H, G, 1.0).per_user_sinr
    b = empirical_sinr_direct(H, c * G, 1.0).per_user_sinr
    assert np.all(b > a)


@given(seed=st.integers(0, 10_000),
       w=st.lists(st.floats(-2, 2), min_size=3, max_size=3).filter(
           lambda v: max(map(abs, v)) > 1e-3))
def test_quadratic_route_matches_direct_route(seed, w):
    H, Hhat, alloc = instance(seed)
    weights = TpeWeights(tuple(w))
    qf = quadratic_forms(H, Hhat, alloc, 3)
    G = tpe_matrix(Hhat, weights, alloc).G
    direct = empirical_sinr_direct(H, G, 0.7).per_user_sinr
    via_q = sinr_from_quadratics(weights, qf, 0.7)
    assert np.allclose(via_q, direct, rtol=1e-10, atol=1e-14)
    used = np.vdot(G, G).real
    assert np.real(np.asarray(w) @ qf.C @ np.asarray(w)) == pytest.approx(used, rel=1e-10)


def test_normalized_route_matches_normalized_matrix():
    H, Hhat, alloc = instance(3)
    w = TpeWeights((1.0, -0.3, 0.04))
    qf = quadratic_forms(H, Hhat, alloc, 3)
    G = normalize_power(tpe_matrix(Hhat, w, alloc), 5.0).G
    direct = empirical_sinr_direct(H, G, 1.0).per_user_sinr
    assert np.allclose(normalized_tpe_sinr(w, qf, 5.0, 1.0), direct, rtol=1e-10)


def test_zero_weights_rejected_after_normalization():
    H, Hhat, alloc = instance(4)
    qf = quadratic_forms(H, Hhat, alloc, 2)
    with pytest.raises(NumericalError):
        normalized_tpe_sinr(np.zeros(2), qf, 1.0, 1.0)


def test_signal_matrix_is_rank_one_and_psd():
    H, Hhat, alloc = instance(5)
    qf = quadratic_forms(H, Hhat, alloc, 4)
    for k in range(4):
        s = np.linalg.eigvalsh(qf.A[k])
        assert s[-2] <= 1e-10 * s[-1]
        assert np.all(np.linalg.eigvalsh(qf.B[k]) > -1e-10)


def test_single_user_form_matches_stack():
    H, Hhat, alloc = instance(6)
    full = quadratic_forms(H, Hhat, alloc, 3)
    one = quadratic_forms(H, Hhat, alloc, 3, k=2)
    assert np.allclose(one.A, full.A[2]) and np.allclose(one.B, full.B[2])


@given(seed=st.integers(0, 10_000), J=st.integers(1, 5))
def test_constraint_matrix_is_hankel(seed, J):
    _, Hhat, alloc = instance(seed)
    h = constraint_matrix(Hhat, alloc, J, method="hankel")
    d = constraint_matrix(Hhat, alloc, J, method="direct")
    assert np.allclose(h, d, rtol=1e-10, atol=1e-12)


def test_constraint_method_validated():
    _, Hhat, alloc = instance(0)
    with pytest.raises(ConfigError):
        constraint_matrix(Hhat, alloc, 2, method="fast")


def test_sweep_is_deterministic_and_worker_independent():
    cfg = small_cfg()
    a = monte_carlo_sweep(cfg, ("rzf", "tpe", "tpeopt", "mrt"), (0.0, 10.0), trials=6, seed=4)
    b = monte_carlo_sweep(cfg, ("rzf", "tpe", "tpeopt", "mrt"), (0.0, 10.0), trials=6, seed=4,
                          workers=3)
    assert np.array_equal(a.sinr, b.sinr)
    c = monte_carlo_sweep(cfg, ("tpe",), (0.0,), trials=6, seed=5)
    assert not np.array_equal(a.sinr[1, 0], c.sinr[0, 0])


def test_sweep_schemes_share_channels():
    cfg = small_cfg()
    a = monte_carlo_sweep(cfg, ("tpe",), (10.0,), trials=4, seed=2)
    b = monte_carlo_sweep(cfg, ("rzf", "tpe"), (10.0,), trials=4, seed=2)
    assert np.array_equal(a.sinr[0], b.sinr[1])


def test_optimized_weights_never_lose_on_average():
    res = monte_carlo_sweep(small_cfg(), ("tpe", "tpeopt"), (0.0, 20.0), trials=30, seed=1)
    for i in range(2):
        diff, se = res.paired_difference("tpeopt", "tpe", i)
        assert diff > -2 * se


def test_unknown_scheme_rejected():
    with pytest.raises(ConfigError):
        monte_carlo_sweep(small_cfg(), ("zf",), (0.0,), trials=2)


def test_pinned_weights_used():
    w = TpeWeights((1.0,), "manual")
    pinned = monte_carlo_sweep(small_cfg(), ("tpe", "mrt"), (10.0,), trials=3, tpe_weights=w)
    assert np.allclose(pinned.sinr[0], pinned.sinr[1])
    with pytest.raises(ConfigError):
        monte_carlo_sweep(small_cfg(J=1), ("tpe",), (10.0,), trials=2,
                          tpe_weights=TpeWeights((1.0, 0.1)))


def test_equal_class_weights_give_equal_class_rates():
    cfg = small_cfg(power=class_power((1, 1), 8))
    rows = asymptotic_vs_empirical(cfg, trials=5, seed=0)
    assert rows[0]["de_rate_bits"] == pytest.approx(rows[1]["de_rate_bits"], rel=1e-12)


def test_rate_report_fields():
    st_ = monte_carlo_rate(small_cfg(), "tpe", trials=5, seed=0)
    assert st_.trials == 5 and st_.mean_rate_bits > 0 and st_.stderr > 0


@pytest.mark.slow
def test_reference_point_rates():
    cfg = SystemConfig(M=128, K=32, P=10 ** 1.2, tau=0.1, J=3,
                       covariance=CovarianceSpec("exponential", 0.1))
    res = monte_carlo_sweep(cfg, ("rzf", "tpe"), (12.0,), trials=100, seed=0, workers=4)
    assert res.stats("tpe", 0).mean_rate_bits == pytest.approx(4.86, rel=0.05)
    assert res.stats("rzf", 0).mean_rate_bits == pytest.approx(5.38, rel=0.05)
