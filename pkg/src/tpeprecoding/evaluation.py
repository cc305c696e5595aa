"""Empirical SINR evaluation and seeded Monte Carlo sweeps.

Two routes compute the SINR of a TPE precoder: directly from ``G`` and from
the J x J quadratic forms ``A_k``, ``B_k`` and ``C``.  The Monte Carlo loop
uses the quadratic forms for the TPE family, since one set of forms per
channel draw serves every SNR point and every weight vector.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .asymptotics import (
    assemble_matrices,
    derivative_tables,
    rzf_asymptotic_sinr,
    rzf_optimal_regularization,
)
from .channel import build_covariance, draw_sample
from .config import PowerAllocation, SystemConfig, snr_db_to_power, validate_config
from .errors import ConfigError, NumericalError
from .optimizer import empirical_optimal_weights, optimal_weights
from .precoders import TpeWeights, rzf_matrix

__all__ = [
    "SCHEMES",
    "LOG2E",
    "SinrReport",
    "QuadraticForms",
    "empirical_sinr_direct",
    "quadratic_forms",
    "constraint_matrix",
    "sinr_from_quadratics",
    "normalized_tpe_sinr",
    "SweepResult",
    "PointStats",
    "monte_carlo_sweep",
    "monte_carlo_rate",
    "deterministic_rates",
    "asymptotic_vs_empirical",
]

log = logging.getLogger(__name__)

SCHEMES = ("rzf", "tpe", "tpeopt", "mrt")
#: bits per nat
LOG2E = 1.0 / math.log(2.0)


@dataclass(frozen=True, eq=False)
class SinrReport:
    per_user_sinr: np.ndarray
    scheme: str = ""
    seed: int | None = None
    snr_db: float | None = None

    @property
    def per_user_rate_bits(self) -> np.ndarray:
        return np.log2(1.0 + self.per_user_sinr)

    @property
    def mean_rate_bits(self) -> float:
        return float(np.mean(self.per_user_rate_bits))


@dataclass(frozen=True, eq=False)
class QuadraticForms:
    """Per-realization SINR quadratic forms.

    ``A`` and ``B`` are J x J for a single user ``k`` or K x J x J stacks when
    ``k`` is ``None``.  ``C`` is shared by all users.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    k: int | None = None


def empirical_sinr_direct(H: np.ndarray, G: np.ndarray, sigma2: float, scheme: str = "",
                          seed: int | None = None, snr_db: float | None = None) -> SinrReport:
    """``|h_k^H g_k|^2 / (sum_{n != k} |h_k^H g_n|^2 + sigma2)`` for every user."""
    F = np.abs(H.conj().T @ G) ** 2
    signal = np.diag(F).copy()
    np.fill_diagonal(F, 0.0)
    return SinrReport(signal / (F.sum(axis=1) + sigma2), scheme, seed, snr_db)


def _powers_times(Hhat: np.ndarray, V: np.ndarray, J: int) -> list[np.ndarray]:
    """``[V, X V, ..., X^{J-1} V]`` with ``X = Hhat Hhat^H / K``."""
    K = Hhat.shape[1]
    HH = Hhat.conj().T
    out = [V]
    for _ in range(1, J):
        out.append(Hhat @ (HH @ out[-1]) / K)
    return out


def constraint_matrix(Hhat: np.ndarray, alloc: PowerAllocation, J: int,
                      method: str = "hankel") -> np.ndarray:
    """``C[l,m] = tr(X^l Hhat P Hhat^H X^m) / K``.

    ``method="hankel"`` evaluates the ``2J - 1`` distinct values
    ``tr(Hhat^H X^s Hhat P) / K`` once; ``method="direct"`` pairs
    ``X^l Hhat`` with ``X^m Hhat`` for every entry.
    """
    K = Hhat.shape[1]
    p = alloc.as_array()
    Z = _powers_times(Hhat, Hhat, J)

    def pair(i, j):
        return np.einsum("mn,mn,n->", Z[i].conj(), Z[j], p) / K

    C = np.empty((J, J), dtype=complex)
    if method == "hankel":
        for s in range(2 * J - 1):
            i = min(s, J - 1)
            val = pair(i, s - i)
            for ell in range(max(0, s - J + 1), min(s, J - 1) + 1):
                C[ell, s - ell] = val
    elif method == "direct":
        for ell in range(J):
            for m in range(J):
                C[ell, m] = pair(m, ell)
    else:
        raise ConfigError(f"unknown method {method!r}")
    return C


def quadratic_forms(H: np.ndarray, Hhat: np.ndarray, alloc: PowerAllocation, J: int,
                    k: int | None = None) -> QuadraticForms:
    """Quadratic forms with ``SINR_k = w^H A_k w / (w^H B_k w + sigma2)``.

    With ``W_l = Hhat^H X^l H`` (K x K), entry ``[n, k]`` is
    ``hhat_n^H X^l h_k`` and

        A_k[l,m] = p_k/K conj(W_l[k,k]) W_m[k,k]
        B_k[l,m] = 1/K sum_{n != k} p_n conj(W_l[n,k]) W_m[n,k]

    so that ``A_k`` is rank one.  ``k=None`` returns stacks for all users.
    """
    K = Hhat.shape[1]
    if k is not None and not 0 <= k < K:
        raise ConfigError(f"user index {k} out of range for K={K}")
    p = alloc.as_array()
    HH = Hhat.conj().T
    W = np.stack([HH @ V for V in _powers_times(Hhat, H, J)])  # (J, K, K)
    # Wp[l, n, k] = sqrt(p_n/K) W_l[n, k]
    Wp = W * np.sqrt(p / K)[None, :, None]
    diag = np.einsum("lkk->kl", Wp)  # (K, J)
    A = np.einsum("kl,km->klm", diag.conj(), diag)
    B = np.einsum("lnk,mnk->klm", Wp.conj(), Wp) - A
    C = constraint_matrix(Hhat, alloc, J)
    if k is not None:
        return QuadraticForms(A[k], B[k], C, k)
    return QuadraticForms(A, B, C, None)


def _quad(Q: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("...lm,l,m->...", Q, w.conj(), w))


def sinr_from_quadratics(w: TpeWeights | np.ndarray, qf: QuadraticForms, sigma2: float):
    """SINR for the unnormalized TPE precoder with weights ``w``."""
    w = w.as_array() if isinstance(w, TpeWeights) else np.asarray(w)
    J = qf.C.shape[0]
    w = np.pad(w, (0, J - len(w)))
    return _quad(qf.A, w) / (_quad(qf.B, w) + sigma2)


def normalized_tpe_sinr(w: TpeWeights | np.ndarray, qf: QuadraticForms, P: float,
                        sigma2: float):
    """SINR after rescaling the TPE precoder to ``tr(G G^H) = P``."""
    w = w.as_array() if isinstance(w, TpeWeights) else np.asarray(w, dtype=float)
    J = qf.C.shape[0]
    w = np.pad(w, (0, J - len(w)))
    used = float(_quad(qf.C, w))
    if not used > 0:
        raise NumericalError("TPE precoder has zero power")
    s = P / used
    return s * _quad(qf.A, w) / (s * _quad(qf.B, w) + sigma2)


# -- Monte Carlo -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PointStats:
    mean_rate_bits: float
    stderr: float
    trials: int
    class_means: tuple[float, ...] = ()
    class_stderr: tuple[float, ...] = ()


@dataclass(frozen=True, eq=False)
class SweepResult:
    """Raw per-trial, per-user SINRs of a sweep.

    ``sinr[s, i, t, k]`` is scheme ``schemes[s]`` at ``snr_db[i]``, trial
    ``t`` and user ``k``.  ``de_sinr[s, i, k]`` holds the large-system
    prediction (NaN where none exists).
    """

    cfg: SystemConfig
    schemes: tuple[str, ...]
    snr_db: tuple[float, ...]
    seed: int
    sinr: np.ndarray
    de_sinr: np.ndarray
    weights: dict = field(default_factory=dict)
    xi: tuple[float, ...] = ()

    @property
    def trials(self) -> int:
        return self.sinr.shape[2]

    def rates_bits(self, scheme: str, snr_index: int) -> np.ndarray:
        """Trials x K matrix of rates."""
        return np.log2(1.0 + self.sinr[self.schemes.index(scheme), snr_index])

    def stats(self, scheme: str, snr_index: int) -> PointStats:
        r = self.rates_bits(scheme, snr_index)
        per_trial = r.mean(axis=1)
        n = len(per_trial)
        se = float(per_trial.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
        cm, cs = (), ()
        classes = self.cfg.allocation().classes
        if classes is not None:
            labels = np.asarray(classes)
            means, ses = [], []
            for c in range(labels.max() + 1):
                pc = r[:, labels == c].mean(axis=1)
                means.append(float(pc.mean()))
                ses.append(float(pc.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan"))
            cm, cs = tuple(means), tuple(ses)
        return PointStats(float(per_trial.mean()), se, n, cm, cs)

    def de_rate_bits(self, scheme: str, snr_index: int, cls: int | None = None) -> float:
        g = self.de_sinr[self.schemes.index(scheme), snr_index]
        rates = np.log2(1.0 + g)
        if cls is not None:
            rates = rates[np.asarray(self.cfg.allocation().classes) == cls]
        return float(rates.mean())

    def paired_difference(self, a: str, b: str, snr_index: int) -> tuple[float, float]:
        """Mean and standard error of the per-user rate difference ``a - b`` in bits."""
        d = (self.rates_bits(a, snr_index) - self.rates_bits(b, snr_index)).mean(axis=1)
        n = len(d)
        se = float(d.std(ddof=1) / math.sqrt(n)) if n > 1 else float("nan")
        return float(d.mean()), se


@dataclass(frozen=True, eq=False)
class _Context:
    cfg: SystemConfig
    alloc: PowerAllocation
    cov: object
    schemes: tuple[str, ...]
    powers: tuple[float, ...]
    J: int
    tpe_w: tuple
    xi: tuple
    seed: int


def _run_trial(ctx: _Context, trial: int) -> np.ndarray:
    cfg, alloc = ctx.cfg, ctx.alloc
    sample = draw_sample(ctx.cov, cfg.K, cfg.tau, ctx.seed, trial)
    H, Hhat = sample.H, sample.Hhat
    out = np.empty((len(ctx.schemes), len(ctx.powers), cfg.K))
    needs_qf = any(s != "rzf" for s in ctx.schemes)
    qf = quadratic_forms(H, Hhat, alloc, ctx.J) if needs_qf else None
    try:
        for i, P in enumerate(ctx.powers):
            for s, scheme in enumerate(ctx.schemes):
                if scheme == "rzf":
                    G = rzf_matrix(Hhat, ctx.xi[i], alloc, P).G
                    out[s, i] = empirical_sinr_direct(H, G, cfg.sigma2).per_user_sinr
                    continue
                if scheme == "tpe":
                    w = ctx.tpe_w[i]
                elif scheme == "mrt":
                    w = np.array([1.0])
                else:  # tpeopt
                    w = empirical_optimal_weights(qf.A, qf.B, qf.C, P, cfg.sigma2,
                                                  alloc).weights.as_array()
                if trial == 0 and log.isEnabledFor(logging.DEBUG):
                    pre = float(_quad(qf.C, np.pad(w, (0, ctx.J - len(w)))))
                    log.debug("%s P=%g: power before normalization %.6g, after %.6g",
                              scheme, P, pre, P)
                out[s, i] = normalized_tpe_sinr(w, qf, P, cfg.sigma2)
    except NumericalError as exc:
        err = NumericalError(f"trial {trial}: {exc}")
        err.trial = trial
        raise err from exc
    return out


def deterministic_rates(cfg: SystemConfig, schemes: Sequence[str], snr_db: Sequence[float],
                        tables=None):
    """Large-system SINRs and TPE weights per SNR.

    Returns ``(de_sinr, tpe_weights, xi)`` where ``de_sinr`` has shape
    ``(len(schemes), len(snr_db), K)``; ``tpeopt`` has no large-system value
    and gets NaN.
    """
    cfg, alloc = validate_config(cfg)
    cov = build_covariance(cfg.covariance, cfg.M)
    if tables is None:
        tables = derivative_tables(cov, cfg.K, cfg.J - 1)
    mats = assemble_matrices(tables, cfg.tau, cfg.J)
    mats1 = assemble_matrices(tables, cfg.tau, 1)
    de = np.full((len(schemes), len(snr_db), cfg.K), np.nan)
    weights, xis = [], []
    for i, snr in enumerate(snr_db):
        P = snr_db_to_power(snr, cfg.sigma2)
        a = alloc if cfg.power is not None else alloc.scaled(P / alloc.trace)
        rho = P / cfg.sigma2
        opt = optimal_weights(mats, P, cfg.sigma2, a.trace, a)
        weights.append(opt.weights)
        xi = rzf_optimal_regularization(cov, cfg.M, cfg.K, cfg.tau, rho) if "rzf" in schemes \
            else float("nan")
        xis.append(xi)
        for s, scheme in enumerate(schemes):
            if scheme == "tpe":
                de[s, i] = opt.gamma_k
            elif scheme == "mrt":
                de[s, i] = optimal_weights(mats1, P, cfg.sigma2, a.trace, a).gamma_k
            elif scheme == "rzf":
                p = a.as_array()
                de[s, i] = [rzf_asymptotic_sinr(cov, cfg.M, cfg.K, xi, cfg.tau, rho,
                                                pk, a.trace) for pk in p]
    return de, weights, tuple(xis)


def monte_carlo_sweep(cfg: SystemConfig, schemes: Sequence[str], snr_db: Sequence[float],
                      trials: int = 500, seed: int = 0, workers: int = 1,
                      tpe_weights: TpeWeights | None = None) -> SweepResult:
    """Monte Carlo SINRs for several schemes over an SNR grid.

    Every trial draws one ``(H, Hhat)`` pair from ``(seed, trial)`` and
    evaluates all schemes and SNR points on it.  TPE weights come from the
    large-system matrices once per SNR point (or ``tpe_weights`` if pinned);
    TPEopt weights are recomputed per trial.  ``workers > 1`` spreads trials
    over threads; results are stored by trial index, so the output does not
    depend on ``workers``.
    """
    schemes = tuple(schemes)
    for s in schemes:
        if s not in SCHEMES:
            raise ConfigError(f"unknown scheme {s!r}; choose from {SCHEMES}")
    if int(trials) != trials or trials < 1:
        raise ConfigError(f"trials must be a positive integer, got {trials!r}")
    cfg, alloc = validate_config(cfg)
    snr_db = tuple(float(x) for x in snr_db)
    de, weights, xis = deterministic_rates(cfg, schemes, snr_db)
    if tpe_weights is not None:
        if tpe_weights.J > cfg.J:
            raise ConfigError(f"pinned weights have J={tpe_weights.J} > config J={cfg.J}")
        weights = [tpe_weights] * len(snr_db)
    powers = tuple(snr_db_to_power(x, cfg.sigma2) for x in snr_db)
    # SINRs are invariant to a common scaling of the allocation, so the
    # config's allocation serves every SNR point
    ctx = _Context(cfg=cfg, alloc=alloc, cov=build_covariance(cfg.covariance, cfg.M),
                   schemes=schemes, powers=powers, J=cfg.J,
                   tpe_w=tuple(w.as_array() for w in weights), xi=xis, seed=int(seed))
    sinr = np.empty((len(schemes), len(snr_db), trials, cfg.K))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for t, res in enumerate(pool.map(lambda t: _run_trial(ctx, t), range(trials))):
                sinr[:, :, t] = res
    else:
        for t in range(trials):
            sinr[:, :, t] = _run_trial(ctx, t)
    return SweepResult(cfg=cfg, schemes=schemes, snr_db=snr_db, seed=int(seed), sinr=sinr,
                       de_sinr=de, weights=dict(zip(snr_db, weights)), xi=xis)


def monte_carlo_rate(cfg: SystemConfig, scheme: str, trials: int = 500, seed: int = 0,
                     workers: int = 1) -> PointStats:
    """Average rate (bits/s/Hz) of one scheme at ``cfg``'s own SNR."""
    res = monte_carlo_sweep(cfg, (scheme,), (cfg.snr_db,), trials, seed, workers)
    return res.stats(scheme, 0)


def asymptotic_vs_empirical(cfg: SystemConfig, trials: int = 500, seed: int = 0,
                            snr_db: Sequence[float] | None = None,
                            schemes: Sequence[str] = ("tpe",), workers: int = 1) -> list[dict]:
    """Per-class large-system vs Monte Carlo rates.

    One dict per ``(scheme, snr_db, class)`` with keys ``de_rate_bits``,
    ``mean_rate_bits``, ``stderr``, ``gap_abs`` and ``gap_rel``
    (``(MC - DE) / DE``).  Without a class allocation a single class ``all``
    is reported.
    """
    if snr_db is None:
        snr_db = (cfg.snr_db,)
    res = monte_carlo_sweep(cfg, schemes, snr_db, trials, seed, workers)
    rows = []
    classes = cfg.allocation().classes
    for scheme in schemes:
        for i, snr in enumerate(res.snr_db):
            st = res.stats(scheme, i)
            if classes is None:
                entries = [("all", st.mean_rate_bits, st.stderr, res.de_rate_bits(scheme, i))]
            else:
                entries = [(c + 1, st.class_means[c], st.class_stderr[c],
                            res.de_rate_bits(scheme, i, c)) for c in range(len(st.class_means))]
            for cls, mc, se, de in entries:
                rows.append({"scheme": scheme, "snr_db": snr, "class": cls,
                             "de_rate_bits": de, "mean_rate_bits": mc, "stderr": se,
                             "gap_abs": mc - de, "gap_rel": (mc - de) / de})
    return rows
