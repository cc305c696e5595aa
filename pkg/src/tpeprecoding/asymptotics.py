"""Large-system deterministic equivalents for RZF and TPE precoding.

Everything is driven by the scalar fixed point

    delta(t) = (1/K) tr(Phi T(t)),   T(t) = (I + t Phi / (1 + t delta(t)))^-1

and by its derivatives at ``t = 0``.  Since ``T(t)`` and all of its
derivatives are functions of ``Phi`` alone, they share ``Phi``'s eigenvectors.
The cascades below therefore run on eigenvalue vectors (O(M) per step); a
dense-matrix path is kept for cross-checking.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import CovarianceOperator
from .errors import ConfigError, ConvergenceError

__all__ = [
    "FixedPointResult",
    "DerivativeTables",
    "AsymptoticMatrices",
    "solve_delta",
    "derivative_cascade",
    "beta_table",
    "c_table",
    "xbar_table",
    "bbar_table",
    "derivative_tables",
    "assemble_matrices",
    "asymptotic_matrices",
    "beta_functional",
    "c_functional",
    "xbar_functional",
    "bbar_functional",
    "rzf_asymptotic_sinr",
    "rzf_optimal_regularization",
    "tables_to_json",
    "MAX_ORDER",
]


#: Default cap on the derivative order.
MAX_ORDER = 8


# -- fixed point -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FixedPointResult:
    """Solution of the ``delta(t)`` fixed point.

    ``T_diag`` holds ``T(t)`` in the eigenbasis of ``Phi``; ``T`` is the dense
    matrix.  ``history`` records ``|delta_{n+1} - delta_n|`` per iteration.
    """

    t: float
    delta: float
    T_diag: np.ndarray
    eigvecs: np.ndarray = field(repr=False)
    iterations: int
    residual: float
    history: tuple[float, ...] = field(default=(), repr=False)

    @property
    def T(self) -> np.ndarray:
        U = self.eigvecs
        return (U * self.T_diag) @ U.conj().T


def _delta_map(lam: np.ndarray, K: int, t: float, d: float) -> float:
    return math.fsum(lam / (1.0 + t * lam / (1.0 + t * d))) / K


def solve_delta(cov: CovarianceOperator, K: int, t: float, tol: float = 1e-12,
                max_iter: int = 10_000) -> FixedPointResult:
    """Solve ``delta(t) = (1/K) sum_i lam_i / (1 + t lam_i / (1 + t delta))``.

    Plain fixed-point iteration from ``tr(Phi)/K``; a 0.5 damping factor is
    switched on if successive steps change sign.

    Raises
    ------
    ConvergenceError
        If ``|delta_{n+1} - delta_n| >= tol`` after ``max_iter`` steps.
    """
    if not t >= 0:
        raise ConfigError(f"t must be nonnegative, got {t!r}")
    lam = cov.eigvals
    d = float(lam.sum()) / K
    history = []
    damping = 1.0
    prev_step = 0.0
    it = 0
    res = 0.0
    if t > 0:
        for it in range(1, max_iter + 1):
            new = _delta_map(lam, K, t, d)
            step = new - d
            if prev_step * step < 0:
                damping = 0.5
            d_next = d + damping * step
            res = abs(d_next - d)
            history.append(res)
            d = d_next
            prev_step = step
            if res < tol:
                break
        else:
            raise ConvergenceError(
                f"delta fixed point at t={t:g} did not converge in {max_iter} iterations "
                f"(residual {res:.3g})", residual=res, trace=history[-20:])
    T_diag = 1.0 / (1.0 + t * lam / (1.0 + t * d))
    return FixedPointResult(t=t, delta=d, T_diag=T_diag, eigvecs=cov.eigvecs,
                            iterations=it, residual=res, history=tuple(history))


# -- derivative cascade at t = 0 ---------------------------------------------

@dataclass(frozen=True, eq=False)
class DerivativeTables:
    """Derivatives at the origin, orders ``0..J``.

    ``T_q`` and ``Tau_q`` are stored as eigenvalue vectors (rows) in the basis
    of ``Phi``; use :meth:`T_matrix` / :meth:`Tau_matrix` for dense matrices.
    ``Tau`` denotes ``-f(t) T(t)`` with ``f(t) = -1/(1 + t delta(t))``.
    The ``xbar`` / ``bbar`` tables depend on ``tau`` and are filled by
    :func:`derivative_tables` when ``tau`` is given.
    """

    J: int
    delta_q: np.ndarray
    f_q: np.ndarray
    T_q: np.ndarray
    Tau_q: np.ndarray
    eigvecs: np.ndarray = field(repr=False)
    beta_lm: np.ndarray | None = None
    c_lm: np.ndarray | None = None
    xbar_lm: np.ndarray | None = None
    bbar_lm: np.ndarray | None = None
    tau: float | None = None

    def T_matrix(self, q: int) -> np.ndarray:
        return _expand(self.eigvecs, self.T_q[q])

    def Tau_matrix(self, q: int) -> np.ndarray:
        return _expand(self.eigvecs, self.Tau_q[q])


def _expand(U: np.ndarray, stored: np.ndarray) -> np.ndarray:
    if stored.ndim == 2:  # tables built with dense=True
        return stored
    return (U * stored) @ U.conj().T


def _check_order(J: int) -> None:
    if int(J) != J or J < 0:
        raise ConfigError(f"derivative order must be a nonnegative integer, got {J!r}")
    if J > MAX_ORDER:
        raise ConfigError(f"derivative order {J} exceeds the supported maximum {MAX_ORDER}")


def derivative_cascade(cov: CovarianceOperator, K: int, J: int,
                       dense: bool = False) -> DerivativeTables:
    """``delta^(q)``, ``f^(q)``, ``T^(q)`` and ``Tau^(q)`` at ``t = 0`` for ``q <= J``.

    Recursions (``C`` is the binomial coefficient)::

        T^(i)     =  sum_{n=1}^{i} C(i,n) n f^(n-1) T^(i-n) Phi
        delta^(i) =  (1/K) tr(Phi T^(i))
        f^(i)     = -sum_{n=1}^{i} C(i,n) n delta^(n-1) f^(i-n)
        Tau^(l)   = -sum_{n=0}^{l} C(l,n) T^(n) f^(l-n)

    With ``dense=True`` the matrices are formed explicitly and the returned
    ``T_q`` / ``Tau_q`` are M x M arrays instead of eigenvalue vectors.
    """
    _check_order(J)
    lam = cov.eigvals
    if dense:
        Phi = cov.phi
        T = [np.eye(cov.M, dtype=Phi.dtype)]

        def times_phi(A):
            return A @ Phi

        def tr_phi(A):
            return float(np.real(np.trace(Phi @ A))) / K
    else:
        T = [np.ones_like(lam)]

        def times_phi(A):
            return A * lam

        def tr_phi(A):
            return math.fsum(lam * A) / K
    d = [math.fsum(lam) / K]
    f = [-1.0]
    for i in range(1, J + 1):
        Ti = sum(math.comb(i, n) * n * f[n - 1] * times_phi(T[i - n]) for n in range(1, i + 1))
        T.append(Ti)
        d.append(tr_phi(Ti))
        f.append(-math.fsum(math.comb(i, n) * n * d[n - 1] * f[i - n] for n in range(1, i + 1)))
    Tau = [-sum(math.comb(ell, n) * f[ell - n] * T[n] for n in range(ell + 1))
           for ell in range(J + 1)]
    return DerivativeTables(J=J, delta_q=np.array(d), f_q=np.array(f), T_q=np.array(T),
                            Tau_q=np.array(Tau), eigvecs=cov.eigvecs)


def _trace_tables(cov: CovarianceOperator, K: int, Tau_q: np.ndarray):
    """``g[i,j] = tr(Phi Tau_i Phi Tau_j)/K`` and ``e[i,j] = tr(Phi Tau_i Tau_j)/K``."""
    lam = cov.eigvals
    if Tau_q.ndim == 3:
        Phi = cov.phi
        n = len(Tau_q)
        g = np.empty((n, n))
        e = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                g[i, j] = np.real(np.trace(Phi @ Tau_q[i] @ Phi @ Tau_q[j])) / K
                e[i, j] = np.real(np.trace(Phi @ Tau_q[i] @ Tau_q[j])) / K
        return g, e
    g = (Tau_q * lam**2) @ Tau_q.T / K
    e = (Tau_q * lam) @ Tau_q.T / K
    return g, e


def _leibniz_with_beta(base: np.ndarray, beta: np.ndarray | None) -> np.ndarray:
    """Solve ``x^(l,m) = base^(l,m) + sum_{k,n>=1} k n C(l,k) C(m,n) beta^(k-1,n-1) base^(l-k,m-n)``.

    When ``beta`` is ``None`` the table being built is ``beta`` itself.
    """
    n = base.shape[0]
    out = np.zeros_like(base)
    b = out if beta is None else beta
    for ell in range(n):
        for m in range(n):
            acc = [base[ell, m]]
            for k in range(1, ell + 1):
                for q in range(1, m + 1):
                    acc.append(k * q * math.comb(ell, k) * math.comb(m, q)
                               * b[k - 1, q - 1] * base[ell - k, m - q])
            out[ell, m] = math.fsum(acc)
    return out


def beta_table(cov: CovarianceOperator, K: int, Tau_q: np.ndarray, J: int | None = None) -> np.ndarray:
    """Mixed derivatives ``beta^(l,m)`` of the two-point functional at the origin."""
    if J is not None:
        Tau_q = Tau_q[:J + 1]
    g, _ = _trace_tables(cov, K, Tau_q)
    return _symmetrize(_leibniz_with_beta(g, None))


def c_table(cov: CovarianceOperator, K: int, Tau_q: np.ndarray, beta: np.ndarray) -> np.ndarray:
    """Mixed derivatives ``c^(l,m)`` of the constraint functional at the origin."""
    _, e = _trace_tables(cov, K, Tau_q)
    n = e.shape[0]
    return _symmetrize(_leibniz_with_beta(e, beta[:n, :n]))


def _symmetrize(A: np.ndarray) -> np.ndarray:
    # exact symmetry; the recursions agree up to rounding
    return 0.5 * (A + A.T)


def _delta_f(delta_q: np.ndarray, f_q: np.ndarray) -> np.ndarray:
    n = len(delta_q)
    return np.array([math.fsum(math.comb(ell, k) * delta_q[k] * f_q[ell - k]
                               for k in range(ell + 1)) for ell in range(n)])


def xbar_table(delta_q: np.ndarray, f_q: np.ndarray, tau: float) -> np.ndarray:
    """``Xbar^(l,m) = (1 - tau^2) (delta f)^(l) (delta f)^(m)``."""
    df = _delta_f(delta_q, f_q)
    return (1.0 - tau * tau) * np.outer(df, df)


def bbar_table(beta: np.ndarray, f_q: np.ndarray, tau: float) -> np.ndarray:
    """``bbar^(l,m) = tau^2 beta^(l,m) + (1-tau^2) sum C(l,k) C(m,n) f^(k) f^(n) beta^(l-k,m-n)``."""
    n = beta.shape[0]
    out = np.empty_like(beta)
    for ell in range(n):
        for m in range(n):
            s = math.fsum(math.comb(ell, k) * math.comb(m, q) * f_q[k] * f_q[q]
                          * beta[ell - k, m - q]
                          for k in range(ell + 1) for q in range(m + 1))
            out[ell, m] = tau * tau * beta[ell, m] + (1.0 - tau * tau) * s
    return _symmetrize(out)


def derivative_tables(cov: CovarianceOperator, K: int, J: int, tau: float | None = None,
                      dense: bool = False) -> DerivativeTables:
    """All derivative tables through order ``J``."""
    base = derivative_cascade(cov, K, J, dense=dense)
    beta = beta_table(cov, K, base.Tau_q)
    c = c_table(cov, K, base.Tau_q, beta)
    xbar = bbar = None
    if tau is not None:
        xbar = xbar_table(base.delta_q, base.f_q, tau)
        bbar = bbar_table(beta, base.f_q, tau)
    return DerivativeTables(J=J, delta_q=base.delta_q, f_q=base.f_q, T_q=base.T_q,
                            Tau_q=base.Tau_q, eigvecs=base.eigvecs, beta_lm=beta, c_lm=c,
                            xbar_lm=xbar, bbar_lm=bbar, tau=tau)


# -- J x J matrices of the quadratic forms ------------------------------------

@dataclass(frozen=True, eq=False)
class AsymptoticMatrices:
    """Deterministic equivalents of the normalized quadratic-form matrices.

    ``A ~ A_k / (K p_k)``, ``B ~ B_k / tr(P)``, ``C ~ C / tr(P)``.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    tau: float

    @property
    def J(self) -> int:
        return self.A.shape[0]


def _sign_factorial(J: int) -> np.ndarray:
    idx = range(J)
    return np.array([[(-1) ** (ell + m) / (math.factorial(ell) * math.factorial(m))
                      for m in idx] for ell in idx])


def assemble_matrices(tables: DerivativeTables, tau: float | None = None,
                      J: int | None = None) -> AsymptoticMatrices:
    """Scale the derivative tables into the J x J matrices (``J`` defaults to ``tables.J + 1``)."""
    if tau is None:
        tau = tables.tau
    if tau is None:
        raise ConfigError("tau is required to assemble the asymptotic matrices")
    if J is None:
        J = tables.J + 1
    if J < 1 or J > tables.J + 1:
        raise ConfigError(f"tables of order {tables.J} cannot produce {J}x{J} matrices")
    if tables.xbar_lm is not None and tables.tau == tau:
        xbar, bbar = tables.xbar_lm, tables.bbar_lm
    else:
        xbar = xbar_table(tables.delta_q, tables.f_q, tau)
        bbar = bbar_table(tables.beta_lm, tables.f_q, tau)
    s = _sign_factorial(J)
    return AsymptoticMatrices(A=xbar[:J, :J] * s, B=bbar[:J, :J] * s,
                              C=tables.c_lm[:J, :J] * s, tau=tau)


def asymptotic_matrices(cov: CovarianceOperator, K: int, J: int, tau: float) -> AsymptoticMatrices:
    """Convenience wrapper: order ``J - 1`` tables assembled into J x J matrices."""
    return assemble_matrices(derivative_tables(cov, K, J - 1), tau, J)


# -- bivariate functionals (for checks and plotting) --------------------------

def _two_point(cov, K, t, u):
    rt = solve_delta(cov, K, t)
    ru = solve_delta(cov, K, u)
    lam = cov.eigvals
    tr_pp = math.fsum(lam**2 * rt.T_diag * ru.T_diag) / K
    tr_p = math.fsum(lam * rt.T_diag * ru.T_diag) / K
    return rt.delta, ru.delta, tr_pp, tr_p


def beta_functional(cov: CovarianceOperator, K: int, t: float, u: float) -> float:
    dt, du, tr_pp, _ = _two_point(cov, K, t, u)
    return tr_pp / ((1 + t * dt) * (1 + u * du) - t * u * tr_pp)


def c_functional(cov: CovarianceOperator, K: int, t: float, u: float) -> float:
    dt, du, tr_pp, tr_p = _two_point(cov, K, t, u)
    beta = tr_pp / ((1 + t * dt) * (1 + u * du) - t * u * tr_pp)
    return tr_p / ((1 + t * dt) * (1 + u * du)) * (1 + t * u * beta)


def xbar_functional(cov: CovarianceOperator, K: int, t: float, u: float, tau: float) -> float:
    dt = solve_delta(cov, K, t).delta
    du = solve_delta(cov, K, u).delta
    return (1 - tau * tau) * dt * du / ((1 + t * dt) * (1 + u * du))


def bbar_functional(cov: CovarianceOperator, K: int, t: float, u: float, tau: float) -> float:
    dt = solve_delta(cov, K, t).delta
    du = solve_delta(cov, K, u).delta
    return (tau * tau + (1 - tau * tau) / ((1 + t * dt) * (1 + u * du))) \
        * beta_functional(cov, K, t, u)


# -- RZF ---------------------------------------------------------------------

def _rzf_traces(cov: CovarianceOperator, K: int, xi: float):
    fp = solve_delta(cov, K, 1.0 / xi)
    lam, T = cov.eigvals, fp.T_diag
    return fp.delta, {
        "gamma": math.fsum(lam**2 * T**2) / K,       # tr(Phi T Phi T)/K
        "phi_t2": math.fsum(lam * T**2) / K,         # tr(Phi T^2)/K
        "phi_t3": math.fsum(lam * T**3) / K,         # tr(Phi T^3)/K
        "phi2_t3": math.fsum(lam**2 * T**3) / K,     # tr(Phi^2 T^3)/K
        "t_phi2": math.fsum(lam**2 * T) / K,         # tr(T Phi^2)/K
    }


def rzf_asymptotic_sinr(cov: CovarianceOperator, M: int, K: int, xi: float, tau: float,
                        rho: float, p_k: float | None = None, trP: float | None = None) -> float:
    """Large-system SINR of user ``k`` under RZF with regularization ``xi``.

    ``p_k`` and ``trP`` only enter through ``p_k / (trP / K)``; omitting them
    means uniform allocation.  ``M`` is implied by ``cov`` and only checked.
    """
    if not xi > 0:
        raise ConfigError(f"xi must be positive, got {xi!r}")
    if M != cov.M:
        raise ConfigError(f"M={M} does not match covariance dimension {cov.M}")
    ratio = 1.0 if p_k is None else p_k / (trP / K)
    d, tr = _rzf_traces(cov, K, xi)
    g = tr["gamma"]
    num = (1 - tau**2) * ratio * d**2 * ((d + xi) ** 2 - g)
    den = g * (xi**2 - tau**2 * (xi**2 - (xi + d) ** 2)) + tr["phi_t2"] * (xi + d) ** 2 / rho
    return num / den


def _nu(tr: dict, xi: float) -> float:
    g, t2, t3 = tr["gamma"], tr["phi_t2"], tr["phi_t3"]
    return xi * t3 / (g * t2) * (g / t2 - tr["phi2_t3"] / t3)


def rzf_optimal_regularization(cov: CovarianceOperator, M: int, K: int, tau: float, rho: float,
                               tol: float = 1e-12, max_iter: int = 2000,
                               damping: float = 0.5) -> float:
    """Regularization maximizing the uniform-power RZF large-system SINR.

    Damped iteration ``xi <- (1-damping) xi + damping F(xi)`` from ``1/rho``,
    where ``F`` is the optimality fixed-point map.  The ``(xi + delta)^2``
    term uses the current iterate.
    """
    if not rho > 0:
        raise ConfigError(f"rho must be positive, got {rho!r}")
    if M != cov.M:
        raise ConfigError(f"M={M} does not match covariance dimension {cov.M}")
    xi = 1.0 / rho
    trace = [xi]
    for _ in range(max_iter):
        d, tr = _rzf_traces(cov, K, xi)
        nu = _nu(tr, xi)
        num = 1 + nu + tau**2 * rho * tr["gamma"] / tr["t_phi2"]
        den = (1 - tau**2) * (1 + nu) + tau**2 * nu * (xi + d) ** 2 / xi**2
        new = num / (rho * den)
        if not (new > 0 and math.isfinite(new)):
            raise ConvergenceError(f"optimal regularization left the positive axis ({new!r})",
                                   trace=trace)
        if abs(new - xi) <= tol * max(1.0, xi):
            return new
        xi = (1 - damping) * xi + damping * new
        trace.append(xi)
    raise ConvergenceError(f"optimal regularization did not converge in {max_iter} iterations",
                           residual=abs(new - xi), trace=trace[-20:])


# -- export ------------------------------------------------------------------

def tables_to_json(tables: DerivativeTables) -> str:
    """Flat JSON snapshot keyed ``"delta_q/2"``, ``"beta/1,2"`` and so on."""
    out: dict[str, float] = {}
    for name, seq in (("delta_q", tables.delta_q), ("f_q", tables.f_q)):
        for q, v in enumerate(seq):
            out[f"{name}/{q}"] = float(v)
    for name, tab in (("beta", tables.beta_lm), ("c", tables.c_lm),
                      ("xbar", tables.xbar_lm), ("bbar", tables.bbar_lm)):
        if tab is None:
            continue
        for (ell, m), v in np.ndenumerate(tab):
            out[f"{name}/{ell},{m}"] = float(v)
    if tables.tau is not None:
        out["tau"] = float(tables.tau)
    return json.dumps(out, indent=1)
