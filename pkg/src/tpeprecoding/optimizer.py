"""Closed-form SINR-optimal TPE coefficients.

Maximizing ``w^T A w / (w^T B w + sigma2/P w^T C w)`` subject to
``tr(P) w^T C w = P`` is a generalized Rayleigh quotient.  With
``S = B + sigma2/P C`` the optimum is ``w ~ S^{-1/2} a`` where ``a`` is the
top eigenvector of ``S^{-1/2} A S^{-1/2}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .asymptotics import AsymptoticMatrices
from .config import PowerAllocation
from .errors import NumericalError
from .precoders import TpeWeights

__all__ = [
    "OptimizationResult",
    "optimal_weights",
    "empirical_optimal_weights",
    "rayleigh_objective",
    "inverse_sqrt_psd",
    "CLAMP_RATIO",
    "INDEFINITE_TOL",
]

#: Eigenvalues of S below ``CLAMP_RATIO * lambda_max(S)`` are raised to that floor.
CLAMP_RATIO = 1e-12
#: Relative negative eigenvalue of S beyond which the tables are deemed broken.
INDEFINITE_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class OptimizationResult:
    """Optimal weights with the quantities of the closed-form solution.

    ``gamma_k`` is the large-system SINR per user, ``K p_k lambda_max / tr(P)``.
    """

    weights: TpeWeights
    lambda_max: float
    alpha: float
    gamma_k: np.ndarray

    @property
    def rates_bits(self) -> np.ndarray:
        return np.log2(1.0 + self.gamma_k)


def _sym(A: np.ndarray) -> np.ndarray:
    A = np.real_if_close(np.asarray(A), tol=1e6)
    A = np.real(A)
    return 0.5 * (A + A.T)


def inverse_sqrt_psd(S: np.ndarray, clamp_ratio: float = CLAMP_RATIO,
                     indefinite_tol: float = INDEFINITE_TOL):
    """``S^{-1/2}`` via the symmetric eigendecomposition with eigenvalue clamping.

    Returns ``(S_inv_sqrt, S_clamped)``.
    """
    s, V = np.linalg.eigh(S)
    top = s[-1]
    if not top > 0:
        raise NumericalError("constraint matrix S has no positive eigenvalue")
    if s[0] < -indefinite_tol * top:
        raise NumericalError(
            f"constraint matrix S is indefinite (min/max eigenvalue {s[0] / top:.3g})")
    s = np.maximum(s, clamp_ratio * top)
    return (V / np.sqrt(s)) @ V.T, (V * s) @ V.T


def rayleigh_objective(w, A, B, C, P: float, sigma2: float) -> float:
    """``w^T A w / (w^T B w + sigma2/P w^T C w)``."""
    w = np.asarray(w, dtype=float)
    den = w @ B @ w + sigma2 / P * (w @ C @ w)
    return float(w @ A @ w / den)


def _solve(A, B, C, P, sigma2, trP, provenance, p=None, K=None) -> OptimizationResult:
    A, B, C = _sym(A), _sym(B), _sym(C)
    S = B + (sigma2 / P) * C
    S_is, _ = inverse_sqrt_psd(S)
    W = S_is @ A @ S_is
    L, E = np.linalg.eigh(0.5 * (W + W.T))
    lam = max(float(L[-1]), 0.0)
    v = S_is @ E[:, -1]
    alpha = float(v @ C @ v)
    if not alpha > 0:
        raise NumericalError(f"power scaling alpha={alpha!r} is not positive")
    w = math.sqrt(P / (alpha * trP)) * v
    # eigenvectors carry an arbitrary sign; pin it for reproducibility
    pivot = np.flatnonzero(np.abs(w) > 0)
    if pivot.size and w[pivot[0]] < 0:
        w = -w
    if p is None:
        gamma = np.array([lam])
    else:
        gamma = K * np.asarray(p, dtype=float) * lam / trP
    return OptimizationResult(TpeWeights(tuple(w), provenance), lam, alpha, gamma)


def optimal_weights(mats: AsymptoticMatrices, P: float, sigma2: float, trP: float,
                    alloc: PowerAllocation | None = None) -> OptimizationResult:
    """Optimal coefficients from the deterministic-equivalent matrices.

    Parameters
    ----------
    mats : AsymptoticMatrices
    P, sigma2 : float
        Power budget and noise variance.
    trP : float
        Trace of the power-allocation matrix.
    alloc : PowerAllocation, optional
        Used only to report per-user ``gamma_k``; otherwise ``gamma_k`` holds
        the uniform-allocation value ``lambda_max``.

    Raises
    ------
    NumericalError
        If ``B + sigma2/P C`` is indefinite beyond rounding.
    """
    p = None if alloc is None else alloc.as_array()
    K = None if alloc is None else alloc.K
    return _solve(mats.A, mats.B, mats.C, P, sigma2, trP, "asymptotic_optimal", p, K)


def empirical_optimal_weights(Ak: np.ndarray, Bk: np.ndarray, C: np.ndarray, P: float,
                              sigma2: float, alloc: PowerAllocation) -> OptimizationResult:
    """Optimal coefficients from per-realization quadratic forms.

    ``Ak`` and ``Bk`` are either single J x J matrices (treated as user-averaged
    already) or K x J x J stacks.  Users are pooled by averaging
    ``A_k / (K p_k)`` and ``B_k / tr(P)``; ``C`` is divided by ``tr(P)``.
    This maps the problem onto the same normalization as the asymptotic one,
    so weights satisfy ``w^T C w = P`` exactly.  Real parts are used so that
    the weights stay real.
    """
    p = alloc.as_array()
    K, trP = alloc.K, alloc.trace
    Ak = np.asarray(Ak)
    Bk = np.asarray(Bk)
    if Ak.ndim == 3:
        A = np.mean(Ak / (K * p)[:, None, None], axis=0)
    else:
        A = Ak / (K * p.mean())
    B = (Bk.mean(axis=0) if Bk.ndim == 3 else Bk) / trP
    return _solve(A, B, np.asarray(C) / trP, P, sigma2, trP, "empirical_optimal", p, K)
