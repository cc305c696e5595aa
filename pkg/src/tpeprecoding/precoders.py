"""Regularized zero-forcing and truncated-polynomial-expansion precoders.

Notation: ``Hhat`` is the M x K estimated channel, ``p`` the per-user power
weights and ``X = Hhat Hhat^H / K``.  A TPE precoder of order ``J`` is

    G = sum_l w_l X^l (Hhat / sqrt(K)) diag(sqrt(p))

and is applied matrix-free by repeated multiplication with ``Hhat`` and
``Hhat^H``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .config import PowerAllocation
from .errors import ConfigError, NumericalError

__all__ = [
    "PROVENANCES",
    "TpeWeights",
    "PrecodingMatrix",
    "normalize_power",
    "rzf_matrix",
    "rzf2_apply",
    "tpe_apply",
    "tpe_matrix",
    "mrt_matrix",
    "truncation_coefficients",
    "polynomial_inverse_weights",
]

PROVENANCES = ("asymptotic_optimal", "empirical_optimal", "truncation_derived", "manual")


@dataclass(frozen=True)
class TpeWeights:
    """Polynomial coefficients ``w_0 ... w_{J-1}`` and where they came from."""

    w: tuple[float, ...]
    provenance: str = "manual"

    def __post_init__(self):
        w = tuple(float(x) for x in self.w)
        if not w:
            raise ConfigError("TPE weights need at least one coefficient")
        if not all(math.isfinite(x) for x in w):
            raise NumericalError(f"non-finite TPE weights {w}")
        if self.provenance not in PROVENANCES:
            raise ConfigError(f"unknown weight provenance {self.provenance!r}")
        object.__setattr__(self, "w", w)

    @property
    def J(self) -> int:
        return len(self.w)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.w, dtype=float)

    def scaled(self, c: float) -> "TpeWeights":
        return TpeWeights(tuple(c * x for x in self.w), self.provenance)

    def to_json(self) -> str:
        return json.dumps({"w": list(self.w), "provenance": self.provenance})

    @classmethod
    def from_json(cls, text: str) -> "TpeWeights":
        d = json.loads(text)
        return cls(tuple(d["w"]), d.get("provenance", "manual"))


@dataclass(frozen=True, eq=False)
class PrecodingMatrix:
    G: np.ndarray
    scheme: str
    power_used: float


def _power(G: np.ndarray) -> float:
    return float(np.vdot(G, G).real)


def _sqrt_p(alloc: PowerAllocation | np.ndarray) -> np.ndarray:
    p = alloc.as_array() if isinstance(alloc, PowerAllocation) else np.asarray(alloc, float)
    return np.sqrt(p)


def normalize_power(G, P: float, scheme: str | None = None) -> PrecodingMatrix:
    """Scale ``G`` so that ``tr(G G^H) = P``.

    Accepts a raw array or a :class:`PrecodingMatrix`.
    """
    if isinstance(G, PrecodingMatrix):
        scheme = scheme or G.scheme
        G = G.G
    used = _power(G)
    if not used > 0:
        raise NumericalError("cannot normalize an all-zero precoder")
    G = G * math.sqrt(P / used)
    return PrecodingMatrix(G=G, scheme=scheme or "unknown", power_used=_power(G))


def _rzf_gram(Hhat: np.ndarray, xi: float) -> np.ndarray:
    if not xi > 0:
        raise ConfigError(f"RZF regularization must be positive, got xi={xi!r}")
    K = Hhat.shape[1]
    A = Hhat.conj().T @ Hhat / K
    A[np.diag_indices(K)] += xi
    return A


def _cho(A: np.ndarray):
    # the Gram matrix plus xi*I is positive definite; warn if nearly singular
    w = np.linalg.eigvalsh(A)
    if w[0] <= 0 or w[-1] / w[0] > 1e12:
        warnings.warn(f"RZF system is ill-conditioned (cond ~ {w[-1] / max(w[0], 1e-300):.3g})",
                      RuntimeWarning, stacklevel=3)
    return cho_factor(A, lower=True)


def rzf_matrix(Hhat: np.ndarray, xi: float, alloc: PowerAllocation, P: float) -> PrecodingMatrix:
    """RZF precoder ``beta/sqrt(K) Hhat (Hhat^H Hhat/K + xi I)^-1 diag(sqrt(p))``.

    ``beta`` is fixed by the sum-power constraint.  The K x K system is solved
    with a Cholesky factorization.
    """
    K = Hhat.shape[1]
    fac = _cho(_rzf_gram(Hhat, xi))
    inner = cho_solve(fac, np.diag(_sqrt_p(alloc)).astype(Hhat.dtype))
    G = Hhat @ inner / math.sqrt(K)
    return normalize_power(G, P, "rzf")


def rzf2_apply(Hhat: np.ndarray, xi: float, alloc: PowerAllocation, s: np.ndarray,
               beta: float) -> np.ndarray:
    """Per-symbol RZF: solve ``(Hhat^H Hhat/K + xi I) y = diag(sqrt(p)) s`` then map by ``Hhat``.

    Gives the same transmit vector as ``rzf_matrix(...).G @ s`` when ``beta``
    is the normalization constant of that matrix.
    """
    K = Hhat.shape[1]
    fac = _cho(_rzf_gram(Hhat, xi))
    y = cho_solve(fac, _sqrt_p(alloc) * np.asarray(s))
    return beta * (Hhat @ y) / math.sqrt(K)


def tpe_apply(Hhat: np.ndarray, weights: TpeWeights, alloc: PowerAllocation,
              s: np.ndarray) -> np.ndarray:
    """Transmit vector ``G_TPE s`` using only matrix-vector products."""
    K = Hhat.shape[1]
    root_k = math.sqrt(K)
    x = Hhat @ (_sqrt_p(alloc) * np.asarray(s)) / root_k
    out = weights.w[0] * x
    for wl in weights.w[1:]:
        x = Hhat @ (Hhat.conj().T @ x) / K
        out = out + wl * x
    return out


def tpe_matrix(Hhat: np.ndarray, weights: TpeWeights, alloc: PowerAllocation) -> PrecodingMatrix:
    """Explicit (unnormalized) TPE matrix built by iterated right-multiplication."""
    K = Hhat.shape[1]
    X = Hhat * (_sqrt_p(alloc) / math.sqrt(K))
    G = weights.w[0] * X
    HH = Hhat.conj().T
    for wl in weights.w[1:]:
        X = Hhat @ (HH @ X) / K
        G = G + wl * X
    return PrecodingMatrix(G=G, scheme="tpe", power_used=_power(G))


def mrt_matrix(Hhat: np.ndarray, alloc: PowerAllocation, P: float) -> PrecodingMatrix:
    """Matched filter, i.e. TPE with the single coefficient ``w_0 = 1``."""
    G = tpe_matrix(Hhat, TpeWeights((1.0,)), alloc).G
    return normalize_power(G, P, "mrt")


def truncation_coefficients(xi: float, kappa: float, beta: float, J: int) -> TpeWeights:
    """Coefficients of the order-``J`` truncated Neumann series of ``beta (X + xi I)^-1``.

    ``w_l = beta kappa sum_{n=l}^{J-1} C(n, l) (1 - kappa xi)^(n-l) (-kappa)^l``.
    The series converges for ``0 < kappa < 2 / lambda_max(X + xi I)``.
    """
    if int(J) != J or J < 1:
        raise ConfigError(f"J must be an integer >= 1, got {J!r}")
    r = 1.0 - kappa * xi
    w = []
    for ell in range(J):
        acc = math.fsum(math.comb(n, ell) * r ** (n - ell) for n in range(ell, J))
        w.append(beta * kappa * acc * (-kappa) ** ell)
    return TpeWeights(tuple(w), "truncation_derived")


def polynomial_inverse_weights(Hhat: np.ndarray, xi: float, beta: float = 1.0) -> TpeWeights:
    """Order-``K`` weights that reproduce ``beta (X + xi I)^-1`` on the range of ``Hhat``.

    By Cayley-Hamilton the inverse is a polynomial in ``X`` of degree at most
    ``rank - 1``; the coefficients interpolate ``beta / (lambda + xi)`` at the
    nonzero eigenvalues.  Only well conditioned for small ``K``.
    """
    K = Hhat.shape[1]
    lam = np.linalg.eigvalsh(Hhat.conj().T @ Hhat / K)
    V = np.vander(lam, K, increasing=True)
    w = np.linalg.solve(V, beta / (lam + xi))
    return TpeWeights(tuple(w.real), "manual")

