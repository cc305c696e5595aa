import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import exp_cov
from tpeprecoding.channel import (
    build_covariance,
    corrupt_csi,
    draw_sample,
    dump_sample,
    exponential_correlation,
    load_sample,
    sample_channel,
)
from tpeprecoding.config import CovarianceSpec
from tpeprecoding.errors import ConfigError


def test_exponential_zero_is_identity():
    cov = build_covariance(CovarianceSpec("exponential", 0.0), 4)
    assert np.array_equal(cov.phi, np.eye(4))


def test_exponential_three_by_three():
    cov = exp_cov(3)
    expected = np.array([[1, 0.1, 0.01], [0.1, 1, 0.1], [0.01, 0.1, 1]])
    assert np.allclose(cov.phi, expected, atol=1e-15)


def test_identity_sqrt():
    assert np.array_equal(build_covariance(CovarianceSpec("identity"), 2).sqrt, np.eye(2))


def test_complex_correlation_is_hermitian():
    phi = exponential_correlation(0.3 + 0.4j, 5)
    assert np.allclose(phi, phi.conj().T)
    assert phi[0, 2] == pytest.approx((0.3 + 0.4j) ** 2)


@given(a=st.floats(-0.95, 0.95), M=st.integers(1, 40))
def test_sqrt_reproduces_covariance(a, M):
    cov = build_covariance(CovarianceSpec("exponential", a), M)
    err = np.linalg.norm(cov.sqrt @ cov.sqrt.conj().T - cov.phi) / np.linalg.norm(cov.phi)
    assert err < 1e-10
    assert np.allclose(np.diag(cov.phi), 1.0)


def test_explicit_rank_deficient_accepted():
    v = np.array([[1.0], [2.0], [0.0]])
    cov = build_covariance(CovarianceSpec("explicit", matrix=v @ v.T), 3)
    assert np.allclose(cov.sqrt @ cov.sqrt, v @ v.T)


@pytest.mark.parametrize("matrix", [
    np.array([[1.0, 2.0], [0.0, 1.0]]),        # not Hermitian
    np.array([[1.0, 0.0], [0.0, -1.0]]),       # not PSD
])
def test_explicit_invalid_rejected(matrix):
    with pytest.raises(ConfigError):
        build_covariance(CovarianceSpec("explicit", matrix=matrix), 2)


def test_sample_covariance_identity():
    rng = np.random.default_rng(0)
    H = sample_channel(build_covariance(CovarianceSpec("identity"), 4), 100_000, rng)
    S = H @ H.conj().T / H.shape[1]
    assert np.linalg.norm(S - np.eye(4)) / 2 < 0.02
    # real and imaginary parts carry half the variance each
    assert np.var(H.real) == pytest.approx(0.5, rel=0.02)


def test_mean_norm_equals_trace():
    cov = exp_cov(8, 0.5)
    H = sample_channel(cov, 100_000, np.random.default_rng(1))
    assert np.mean(np.sum(np.abs(H) ** 2, axis=0)) == pytest.approx(cov.trace, rel=0.02)


def test_sampling_is_deterministic():
    cov = exp_cov(16)
    a = sample_channel(cov, 4, np.random.default_rng(7))
    b = sample_channel(cov, 4, np.random.default_rng(7))
    assert np.array_equal(a, b)


def test_perfect_csi_is_identity_map():
    cov = exp_cov(8)
    H = sample_channel(cov, 3, np.random.default_rng(2))
    assert np.array_equal(corrupt_csi(H, cov, 0.0, np.random.default_rng(3)), H)


def test_statistical_csi_is_uncorrelated():
    cov = exp_cov(4)
    rng = np.random.default_rng(4)
    H = sample_channel(cov, 100_000, rng)
    Hhat = corrupt_csi(H, cov, 1.0, rng)
    cross = Hhat @ H.conj().T / H.shape[1]
    assert np.abs(cross).max() < 0.02


@pytest.mark.parametrize("tau", [0.0, 0.4, 0.7, 1.0])
def test_estimate_has_channel_covariance(tau):
    cov = exp_cov(4, 0.6)
    rng = np.random.default_rng(5)
    H = sample_channel(cov, 100_000, rng)
    Hhat = corrupt_csi(H, cov, tau, rng)
    S = Hhat @ Hhat.conj().T / H.shape[1]
    assert np.linalg.norm(S - cov.phi) / np.linalg.norm(cov.phi) < 0.02


def test_corrupt_rejects_bad_tau():
    cov = exp_cov(2)
    with pytest.raises(ConfigError):
        corrupt_csi(np.zeros((2, 1), complex), cov, 1.5, np.random.default_rng(0))


def test_draw_sample_reuses_channel_across_tau():
    cov = exp_cov(8)
    a = draw_sample(cov, 4, 0.1, seed=3, trial=5)
    b = draw_sample(cov, 4, 0.7, seed=3, trial=5)
    assert np.array_equal(a.H, b.H)
    assert not np.array_equal(a.Hhat, b.Hhat)
    c = draw_sample(cov, 4, 0.1, seed=3, trial=6)
    assert not np.array_equal(a.H, c.H)


def test_dump_round_trip(tmp_path):
    cov = exp_cov(5)
    s = draw_sample(cov, 3, 0.25, seed=9)
    path = tmp_path / "ch.txt"
    dump_sample(path, s, seed=9)
    assert path.read_text().splitlines()[0] == "5 3 0.25 9"
    back, seed = load_sample(path)
    assert seed == 9 and back.tau == 0.25
    assert np.array_equal(back.H, s.H) and np.array_equal(back.Hhat, s.Hhat)
