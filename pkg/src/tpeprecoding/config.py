"""System model parameters: dimensions, power budget, CSI quality, allocation.

Everything here is an immutable value object.  Validation is explicit
(:func:`validate_config`) so that partially specified configurations can be
built up before they are checked, e.g. by the JSON loader.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import ConfigError

__all__ = [
    "CovarianceSpec",
    "PowerAllocation",
    "SystemConfig",
    "validate_config",
    "uniform_power",
    "class_power",
    "explicit_power",
    "snr_db_to_power",
    "config_from_dict",
    "config_to_dict",
    "load_config",
    "config_hash",
    "DEFAULT_SCALE_GUARD",
]

#: Bound on K * p_k (relative to max(1, P)) used to catch allocations that
#: are not O(1/K).  Deliberately loose.
DEFAULT_SCALE_GUARD = 100.0


@dataclass(frozen=True, eq=False)
class CovarianceSpec:
    """Description of the common channel covariance matrix.

    ``kind`` is one of ``"exponential"`` (parameter ``a``, ``|a| < 1``),
    ``"identity"`` or ``"explicit"`` (``matrix`` given).
    """

    kind: str = "identity"
    a: complex = 0.0
    matrix: np.ndarray | None = None

    def __eq__(self, other):
        if not isinstance(other, CovarianceSpec):
            return NotImplemented
        if self.kind != other.kind or self.a != other.a:
            return False
        if self.matrix is None or other.matrix is None:
            return self.matrix is other.matrix
        return np.array_equal(self.matrix, other.matrix)

    def to_dict(self) -> dict:
        if self.kind == "exponential":
            a = complex(self.a)
            return {"kind": "exponential", "a": a.real if a.imag == 0 else [a.real, a.imag]}
        if self.kind == "explicit":
            m = np.asarray(self.matrix)
            return {"kind": "explicit", "matrix_re": m.real.tolist(), "matrix_im": m.imag.tolist()}
        return {"kind": self.kind}


@dataclass(frozen=True)
class PowerAllocation:
    """Per-user power weights, i.e. the diagonal of the allocation matrix.

    ``classes`` optionally labels each user with a class index (0-based) and
    ``class_weights`` holds the weight of each class; both are only set by
    :func:`class_power`.
    """

    p: tuple[float, ...]
    classes: tuple[int, ...] | None = None
    class_weights: tuple[float, ...] | None = None

    @property
    def K(self) -> int:
        return len(self.p)

    @property
    def trace(self) -> float:
        return math.fsum(self.p)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.p, dtype=float)

    def scaled(self, factor: float) -> "PowerAllocation":
        return replace(self, p=tuple(factor * x for x in self.p))

    def to_dict(self) -> dict:
        if self.classes is not None:
            return {"kind": "classes", "weights": list(self.class_weights)}
        if len(set(self.p)) == 1:
            return {"kind": "uniform"}
        return {"kind": "explicit", "p": list(self.p)}


@dataclass(frozen=True)
class SystemConfig:
    """Single-cell downlink parameters.

    Parameters
    ----------
    M, K : int
        Antennas at the base station and single-antenna users.
    P : float
        Total transmit power (linear scale).
    sigma2 : float
        Receiver noise variance.
    tau : float
        CSI error parameter; 0 is perfect CSI, 1 is statistics only.
    J : int
        TPE order (number of polynomial terms).
    covariance : CovarianceSpec
        Common channel covariance.
    power : PowerAllocation or None
        Per-user weights.  ``None`` means uniform ``P/K``.
    """

    M: int
    K: int
    P: float = 1.0
    sigma2: float = 1.0
    tau: float = 0.0
    J: int = 1
    covariance: CovarianceSpec = field(default_factory=CovarianceSpec)
    power: PowerAllocation | None = None

    @property
    def rho(self) -> float:
        return self.P / self.sigma2

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.rho)

    def allocation(self) -> PowerAllocation:
        """The explicit allocation, uniform ``P/K`` when none was given."""
        if self.power is None:
            return uniform_power(self.P, self.K)
        return self.power

    def with_snr_db(self, snr_db: float) -> "SystemConfig":
        """Copy with ``P = 10^(snr_db/10) * sigma2``; a uniform allocation follows P."""
        return replace(self, P=snr_db_to_power(snr_db, self.sigma2))

    def replace(self, **changes) -> "SystemConfig":
        return replace(self, **changes)


def snr_db_to_power(snr_db: float, sigma2: float = 1.0) -> float:
    return float(10.0 ** (snr_db / 10.0) * sigma2)


def validate_config(cfg: SystemConfig, alloc: PowerAllocation | None = None,
                    scale_guard: float = DEFAULT_SCALE_GUARD):
    """Check the model assumptions and return ``(cfg, alloc)`` unchanged.

    ``alloc`` defaults to ``cfg.allocation()``.

    Raises
    ------
    ConfigError
        On any violated invariant.
    """
    if alloc is None:
        alloc = cfg.allocation()
    if int(cfg.M) != cfg.M or cfg.M < 1:
        raise ConfigError(f"antenna count M must be a positive integer, got {cfg.M!r}")
    if int(cfg.K) != cfg.K or cfg.K < 1:
        raise ConfigError(f"user count K must be a positive integer, got {cfg.K!r}")
    if int(cfg.J) != cfg.J or cfg.J < 1:
        raise ConfigError(f"TPE order J must be an integer >= 1, got {cfg.J!r}")
    if not (math.isfinite(cfg.tau) and 0.0 <= cfg.tau <= 1.0):
        raise ConfigError(f"invalid CSI parameter tau={cfg.tau!r}: must lie in [0, 1]")
    if not (math.isfinite(cfg.P) and cfg.P > 0):
        raise ConfigError(f"total power P must be positive, got {cfg.P!r}")
    if not (math.isfinite(cfg.sigma2) and cfg.sigma2 > 0):
        raise ConfigError(f"noise variance sigma2 must be positive, got {cfg.sigma2!r}")
    if alloc.K != cfg.K:
        raise ConfigError(f"power allocation has {alloc.K} weights for K={cfg.K} users")
    p = np.asarray(alloc.p, dtype=float)
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        bad = int(np.flatnonzero(~(p > 0))[0]) if np.any(~(p > 0)) else -1
        raise ConfigError(f"nonpositive power weight p[{bad}]")
    if cfg.K * p.max() > scale_guard * max(1.0, cfg.P):
        raise ConfigError(
            f"power weights are not O(1/K): K*max(p)={cfg.K * p.max():.4g} exceeds "
            f"{scale_guard:g}*max(1, P)")
    _validate_covariance_spec(cfg.covariance, cfg.M)
    return cfg, alloc


def _validate_covariance_spec(spec: CovarianceSpec, M: int) -> None:
    if spec.kind == "exponential":
        if not abs(spec.a) < 1:
            raise ConfigError(f"exponential correlation needs |a| < 1, got a={spec.a!r}")
    elif spec.kind == "explicit":
        if spec.matrix is None or np.shape(spec.matrix) != (M, M):
            raise ConfigError(f"explicit covariance must be an {M}x{M} matrix")
    elif spec.kind != "identity":
        raise ConfigError(f"unknown covariance kind {spec.kind!r}")


def uniform_power(P: float, K: int) -> PowerAllocation:
    """Equal weights ``P/K`` for all ``K`` users."""
    if not P > 0:
        raise ConfigError(f"P must be positive, got {P!r}")
    if int(K) != K or K < 1:
        raise ConfigError(f"K must be a positive integer, got {K!r}")
    return PowerAllocation(p=(P / K,) * int(K))


def class_power(class_weights: Sequence[float], K: int) -> PowerAllocation:
    """Split users into equal contiguous classes with ``p_k = c_class(k) / K``.

    >>> class_power((1, 2), 4).p
    (0.25, 0.25, 0.5, 0.5)
    """
    weights = tuple(float(c) for c in class_weights)
    if not weights:
        raise ConfigError("at least one class weight is required")
    if any(not (c > 0) for c in weights):
        raise ConfigError(f"class weights must be positive, got {weights}")
    n = len(weights)
    if K % n:
        raise ConfigError(f"K={K} is not divisible by the number of classes ({n})")
    size = K // n
    classes = tuple(k // size for k in range(K))
    return PowerAllocation(p=tuple(weights[c] / K for c in classes), classes=classes,
                           class_weights=weights)


def explicit_power(p: Sequence[float]) -> PowerAllocation:
    return PowerAllocation(p=tuple(float(x) for x in p))


# -- JSON configuration ------------------------------------------------------

def _parse_covariance(d: Mapping[str, Any] | None, M: int) -> CovarianceSpec:
    if d is None:
        return CovarianceSpec()
    kind = d.get("kind", "identity")
    if kind == "exponential":
        a = d.get("a", 0.0)
        if isinstance(a, (list, tuple)):
            a = complex(a[0], a[1])
        return CovarianceSpec(kind="exponential", a=a)
    if kind == "explicit":
        re = np.asarray(d["matrix_re"] if "matrix_re" in d else d["matrix"], dtype=float)
        im = np.asarray(d.get("matrix_im", np.zeros_like(re)), dtype=float)
        return CovarianceSpec(kind="explicit", matrix=re + 1j * im)
    return CovarianceSpec(kind=kind)


def _parse_power(d: Mapping[str, Any] | None, K: int) -> PowerAllocation | None:
    if d is None or d.get("kind", "uniform") == "uniform":
        return None
    kind = d["kind"]
    if kind == "classes":
        return class_power(d["weights"], K)
    if kind == "explicit":
        return explicit_power(d["p"])
    raise ConfigError(f"unknown power allocation kind {kind!r}")


def config_from_dict(d: Mapping[str, Any], validate: bool = True) -> SystemConfig:
    """Build a :class:`SystemConfig` from the JSON document layout.

    Recognised keys: ``M``, ``K``, ``snr_db`` or ``P``, ``sigma2``, ``tau``,
    ``J``, ``covariance{kind,a}``, ``power{kind,weights}``.  A list-valued
    ``snr_db`` uses its first entry here; sweeps read the full list.
    """
    try:
        M = int(d["M"])
        K = int(d["K"])
    except KeyError as exc:
        raise ConfigError(f"missing required key {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    sigma2 = float(d.get("sigma2", 1.0))
    if "P" in d:
        P = float(d["P"])
    elif "snr_db" in d:
        snr = d["snr_db"]
        if isinstance(snr, (list, tuple)):
            snr = snr[0]
        P = snr_db_to_power(float(snr), sigma2)
    else:
        P = 1.0
    cfg = SystemConfig(
        M=M, K=K, P=P, sigma2=sigma2,
        tau=float(d.get("tau", 0.0)), J=int(d.get("J", 1)),
        covariance=_parse_covariance(d.get("covariance"), M),
        power=_parse_power(d.get("power"), K),
    )
    if validate:
        validate_config(cfg)
    return cfg


def config_to_dict(cfg: SystemConfig) -> dict:
    alloc = cfg.power
    return {
        "M": cfg.M, "K": cfg.K, "P": cfg.P, "sigma2": cfg.sigma2,
        "tau": cfg.tau, "J": cfg.J,
        "covariance": cfg.covariance.to_dict(),
        "power": {"kind": "uniform"} if alloc is None else alloc.to_dict(),
    }


def load_config(path) -> dict:
    """Read a JSON configuration document (returned as a plain dict)."""
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None


def config_hash(document: Mapping[str, Any]) -> str:
    """Short content hash of a JSON-serialisable document (key order ignored)."""
    blob = json.dumps(document, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]
