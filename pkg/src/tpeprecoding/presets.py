"""Named experiment presets and their parameter sheets.

A preset is a plain JSON-serialisable dict so that it can be written into a
run manifest and read back verbatim.  ``kind`` selects the runner:

``complexity``
    operation counts over a coherence-time grid.
``rates``
    Monte Carlo and large-system rates over ``tau`` x ``J`` x SNR.
``rate_loss``
    RZF minus TPE per-user rate over a user-count grid with ``M = ratio * K``.
``de_vs_mc``
    per-class large-system vs Monte Carlo rates.
"""

from __future__ import annotations

import copy
import math

from .errors import ConfigError

__all__ = ["PRESET_NAMES", "get_preset", "resolve_custom", "describe", "parse_grid"]

_EXP = {"kind": "exponential", "a": 0.1}
_UNIFORM = {"kind": "uniform"}

_PRESETS: dict[str, dict] = {
    "fig2": {
        "name": "fig2", "kind": "complexity",
        "title": "operation counts per coherence period",
        "M": 500, "K": 100, "J": [1, 2, 3, 4, 5],
        "T_coherence": [402] + list(range(410, 911, 20)),
        "eta_dl": 0.5, "mu": 2,
    },
    "fig3": {
        "name": "fig3", "kind": "rates",
        "title": "average rate vs SNR for several CSI qualities",
        "M": 128, "K": 32, "J": [3], "tau": [0.1, 0.4, 0.7],
        "snr_db": [0, 4, 8, 12, 16, 20], "sigma2": 1.0,
        "covariance": _EXP, "power": _UNIFORM, "schemes": ["rzf", "tpe"],
    },
    "fig4": {
        "name": "fig4", "kind": "rates",
        "title": "average rate vs SNR for several TPE orders",
        "M": 512, "K": 128, "J": [2, 3, 4], "tau": [0.1],
        "snr_db": [0, 4, 8, 12, 16, 20], "sigma2": 1.0,
        "covariance": _EXP, "power": _UNIFORM, "schemes": ["rzf", "tpe"],
    },
    "fig5": {
        "name": "fig5", "kind": "rate_loss",
        "title": "per-user rate loss of TPE vs RZF over the number of users",
        "K": [8, 16, 24, 32, 40, 48, 56, 64], "M_over_K": 4, "tau": [0.1],
        "series": [{"J": 3, "snr_db": 10}, {"J": 4, "snr_db": 10},
                   {"J": 5, "snr_db": 10}, {"J": 4, "snr_db": 12}],
        "sigma2": 1.0, "covariance": _EXP, "power": _UNIFORM,
    },
    "fig6": {
        "name": "fig6", "kind": "rates",
        "title": "average rate vs SNR with realization-optimized TPE weights",
        "M": 128, "K": 32, "J": [3], "tau": [0.4],
        "snr_db": [0, 4, 8, 12, 16, 20], "sigma2": 1.0,
        "covariance": _EXP, "power": _UNIFORM, "schemes": ["rzf", "tpeopt", "tpe"],
    },
    "fig7": {
        "name": "fig7", "kind": "de_vs_mc",
        "title": "per-class rate, large-system prediction vs Monte Carlo",
        "M": 256, "K": 64, "J": [3], "tau": [0.1],
        "snr_db": list(range(0, 21, 2)), "sigma2": 1.0,
        "covariance": _EXP, "power": {"kind": "classes", "weights": [1, 2, 3, 4]},
        "schemes": ["tpe"],
    },
}

PRESET_NAMES = tuple(_PRESETS) + ("custom",)

_DEFAULTS = {"trials": 500, "seed": 0}


def get_preset(name: str) -> dict:
    """A fresh copy of preset ``name`` with default ``trials`` and ``seed``."""
    if name == "custom":
        raise ConfigError("the custom preset needs a configuration file (--config)")
    if name not in _PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESET_NAMES)}")
    out = dict(_DEFAULTS)
    out.update(copy.deepcopy(_PRESETS[name]))
    return out


def _as_list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


def resolve_custom(doc: dict) -> dict:
    """Turn a configuration document into a ``rates``-style preset.

    Manifests written by ``run`` carry the resolved preset under
    ``"parameters"`` and are returned as is.
    """
    if "parameters" in doc:
        return copy.deepcopy(doc["parameters"])
    if "kind" in doc and "name" in doc:
        return copy.deepcopy(doc)
    for key in ("M", "K"):
        if key not in doc:
            raise ConfigError(f"configuration is missing required key {key!r}")
    out = dict(_DEFAULTS)
    out.update({
        "name": "custom", "kind": "rates", "title": "custom configuration",
        "M": int(doc["M"]), "K": int(doc["K"]),
        "J": [int(j) for j in _as_list(doc.get("J", 1))],
        "tau": [float(t) for t in _as_list(doc.get("tau", 0.0))],
        "sigma2": float(doc.get("sigma2", 1.0)),
        "covariance": doc.get("covariance", {"kind": "identity"}),
        "power": doc.get("power", _UNIFORM),
        "schemes": list(doc.get("schemes", ["rzf", "tpe"])),
    })
    if "snr_db" in doc:
        out["snr_db"] = [float(s) for s in _as_list(doc["snr_db"])]
    elif "P" in doc:
        out["snr_db"] = [10 * math.log10(float(doc["P"]) / out["sigma2"])]
    else:
        out["snr_db"] = [0.0]
    for key in ("trials", "seed"):
        if key in doc:
            out[key] = int(doc[key])
    return out


def parse_grid(text: str) -> list[float]:
    """Parse ``"0:4:20"`` (inclusive start:step:stop) or ``"0.1,0.4"``."""
    text = text.strip()
    try:
        if ":" in text:
            start, step, stop = (float(x) for x in text.split(":"))
            if step <= 0:
                raise ValueError("step must be positive")
            n = int(round((stop - start) / step))
            return [start + i * step for i in range(n + 1)]
        return [float(x) for x in text.split(",") if x]
    except ValueError as exc:
        raise ConfigError(f"cannot parse grid {text!r}: {exc}") from None


def _fmt(v) -> str:
    if isinstance(v, dict):
        return ", ".join(f"{k}={_fmt(x)}" for k, x in v.items())
    if isinstance(v, list):
        if v and all(isinstance(x, dict) for x in v):
            return "; ".join(_fmt(x) for x in v)
        return "{" + ", ".join(_fmt(x) for x in v) + "}"
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return str(v)


_ORDER = ("name", "kind", "title", "M", "M_over_K", "K", "J", "tau", "snr_db", "series",
          "sigma2", "covariance", "power", "schemes", "T_coherence", "eta_dl", "mu",
          "trials", "seed")


def describe(preset: dict) -> str:
    """Human-readable parameter sheet, one ``key: value`` per line."""
    keys = [k for k in _ORDER if k in preset] + sorted(k for k in preset if k not in _ORDER)
    width = max(len(k) for k in keys)
    return "\n".join(f"{k.ljust(width)} : {_fmt(preset[k])}" for k in keys) + "\n"
