"""Correlated Rayleigh block-fading channels and imperfect channel estimates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import CovarianceSpec
from .errors import ConfigError

__all__ = [
    "CovarianceOperator",
    "ChannelSample",
    "build_covariance",
    "exponential_correlation",
    "sample_channel",
    "corrupt_csi",
    "trial_streams",
    "draw_sample",
    "dump_sample",
    "load_sample",
]

_PSD_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CovarianceOperator:
    """Hermitian PSD covariance with its eigendecomposition and square root.

    Attributes
    ----------
    phi : ndarray, shape (M, M)
    sqrt : ndarray, shape (M, M)
        Principal (Hermitian) square root.
    eigvals, eigvecs : ndarray
        ``phi = eigvecs @ diag(eigvals) @ eigvecs^H`` with eigenvalues clamped at 0.
    is_identity : bool
        Lets the sampler skip the matrix product.
    """

    phi: np.ndarray
    sqrt: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray
    is_identity: bool = False

    @property
    def M(self) -> int:
        return self.phi.shape[0]

    @property
    def spectral_norm(self) -> float:
        return float(self.eigvals.max())

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.phi)))


def exponential_correlation(a: complex, M: int) -> np.ndarray:
    """``[phi]_ij = a^(j-i)`` for ``i <= j`` and its conjugate below the diagonal."""
    idx = np.arange(M)
    lag = idx[None, :] - idx[:, None]
    upper = np.power(complex(a), np.abs(lag)) if M > 0 else np.zeros((0, 0))
    phi = np.where(lag >= 0, upper, np.conj(upper))
    if np.isrealobj(a) or complex(a).imag == 0:
        phi = phi.real
    return phi


def _from_matrix(phi: np.ndarray, is_identity: bool = False) -> CovarianceOperator:
    phi = np.asarray(phi)
    if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
        raise ConfigError(f"covariance must be square, got shape {phi.shape}")
    scale = max(1.0, float(np.abs(phi).max(initial=0.0)))
    if not np.allclose(phi, phi.conj().T, atol=1e-10 * scale, rtol=0):
        raise ConfigError("covariance matrix is not Hermitian")
    phi = 0.5 * (phi + phi.conj().T)
    vals, vecs = np.linalg.eigh(phi)
    if vals.size and vals.min() < -_PSD_TOL * max(1.0, abs(vals).max()):
        raise ConfigError(f"covariance matrix is not PSD (min eigenvalue {vals.min():.3g})")
    vals = np.clip(vals, 0.0, None)
    sqrt = (vecs * np.sqrt(vals)) @ vecs.conj().T
    return CovarianceOperator(phi=phi, sqrt=sqrt, eigvals=vals, eigvecs=vecs,
                              is_identity=is_identity)


def build_covariance(spec: CovarianceSpec, M: int) -> CovarianceOperator:
    """Materialise a :class:`CovarianceSpec` for ``M`` antennas."""
    if spec.kind == "identity":
        eye = np.eye(M)
        return CovarianceOperator(phi=eye, sqrt=eye.copy(), eigvals=np.ones(M),
                                  eigvecs=eye.copy(), is_identity=True)
    if spec.kind == "exponential":
        if not abs(spec.a) < 1:
            raise ConfigError(f"exponential correlation needs |a| < 1, got a={spec.a!r}")
        if spec.a == 0:
            return build_covariance(CovarianceSpec(kind="identity"), M)
        return _from_matrix(exponential_correlation(spec.a, M))
    if spec.kind == "explicit":
        if spec.matrix is None or np.shape(spec.matrix) != (M, M):
            raise ConfigError(f"explicit covariance must be {M}x{M}")
        return _from_matrix(spec.matrix)
    raise ConfigError(f"unknown covariance kind {spec.kind!r}")


def _std_complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    # unit variance split evenly between real and imaginary parts
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) * np.sqrt(0.5)


def sample_channel(cov: CovarianceOperator, K: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``H = phi^(1/2) Z`` with i.i.d. CN(0, 1) entries in ``Z`` (M x K)."""
    z = _std_complex_normal(rng, (cov.M, K))
    return z if cov.is_identity else cov.sqrt @ z


def corrupt_csi(H: np.ndarray, cov: CovarianceOperator, tau: float,
                rng: np.random.Generator) -> np.ndarray:
    """Imperfect estimate ``sqrt(1 - tau^2) H + tau phi^(1/2) V``.

    The error draw always consumes ``rng`` (also at ``tau = 0``) so that
    sweeps over ``tau`` see identical streams.
    """
    if not (0.0 <= tau <= 1.0):
        raise ConfigError(f"invalid CSI parameter tau={tau!r}: must lie in [0, 1]")
    v = _std_complex_normal(rng, H.shape)
    if tau == 0:
        return H.copy()
    n = v if cov.is_identity else cov.sqrt @ v
    return np.sqrt(1.0 - tau * tau) * H + tau * n


@dataclass(frozen=True, eq=False)
class ChannelSample:
    """True channels ``H`` and estimates ``Hhat`` for one coherence period."""

    H: np.ndarray
    Hhat: np.ndarray
    tau: float


def trial_streams(seed: int, trial: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent (channel, estimation-error) generators for one trial."""
    ch, err = np.random.SeedSequence([int(seed), int(trial)]).spawn(2)
    return np.random.default_rng(ch), np.random.default_rng(err)


def draw_sample(cov: CovarianceOperator, K: int, tau: float, seed: int,
                trial: int = 0) -> ChannelSample:
    """Channel and estimate fully determined by ``(seed, trial)``."""
    rng_h, rng_e = trial_streams(seed, trial)
    H = sample_channel(cov, K, rng_h)
    return ChannelSample(H=H, Hhat=corrupt_csi(H, cov, tau, rng_e), tau=tau)


# -- debugging dumps ---------------------------------------------------------

def _write_block(fh, name: str, A: np.ndarray) -> None:
    fh.write(f"{name}\n")
    rows, cols = A.shape
    pairs = np.empty((rows, 2 * cols))
    pairs[:, 0::2] = A.real
    pairs[:, 1::2] = A.imag
    np.savetxt(fh, pairs, fmt="%.17g")


def dump_sample(path, sample: ChannelSample, seed: int) -> None:
    """Write ``H`` and ``Hhat`` as text.

    Layout: a header line ``M K tau seed``, then for each matrix a name line
    followed by ``M`` rows of ``K`` (re, im) pairs.
    """
    M, K = sample.H.shape
    with open(path, "w") as fh:
        fh.write(f"{M} {K} {sample.tau!r} {int(seed)}\n")
        _write_block(fh, "H", sample.H)
        _write_block(fh, "Hhat", sample.Hhat)


def load_sample(path) -> tuple[ChannelSample, int]:
    """Inverse of :func:`dump_sample`; returns ``(sample, seed)``."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    M, K, tau, seed = lines[0].split()
    M, K = int(M), int(K)
    mats = {}
    pos = 1
    for _ in range(2):
        name = lines[pos]
        data = np.loadtxt(lines[pos + 1:pos + 1 + M], ndmin=2)
        mats[name] = data[:, 0::2] + 1j * data[:, 1::2]
        pos += 1 + M
    return ChannelSample(H=mats["H"], Hhat=mats["Hhat"], tau=float(tau)), int(seed)
