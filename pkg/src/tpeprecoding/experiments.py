"""Run resolved presets and write CSV/JSON results plus a manifest."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from fractions import Fraction
from typing import Callable

from . import __version__
from .complexity import complexity_sweep
from .config import config_from_dict, config_hash
from .errors import ConfigError
from .evaluation import LOG2E, monte_carlo_sweep
from .precoders import TpeWeights

__all__ = ["RESULT_COLUMNS", "COMPLEXITY_COLUMNS", "RATE_LOSS_COLUMNS", "run_experiment",
           "format_value", "render_rows"]

RESULT_COLUMNS = ("scheme", "snr_db", "tau", "J", "class", "mean_rate_bits", "stderr",
                  "de_rate_bits", "gap_rel", "trials", "seed")
COMPLEXITY_COLUMNS = ("scheme", "J", "T_coherence", "T_data", "ops")
RATE_LOSS_COLUMNS = ("K", "M", "J", "snr_db", "tau", "rate_loss_nats", "stderr_nats",
                     "rate_loss_bits", "trials", "seed")


def format_value(v) -> str:
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return format(v, ".12g")
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else format(float(v), ".12g")
    return str(v)


def render_rows(rows: list[dict], columns, fmt: str, header: dict) -> str:
    """CSV with ``#`` provenance comments, or a JSON document."""
    if fmt == "json":
        clean = [{c: _jsonable(r.get(c, "")) for c in columns} for r in rows]
        return json.dumps({"provenance": header, "rows": clean}, indent=1) + "\n"
    buf = io.StringIO()
    for k, v in header.items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([format_value(r.get(c, "")) for c in columns])
    return buf.getvalue()


def _jsonable(v):
    if isinstance(v, Fraction):
        return int(v) if v.denominator == 1 else float(v)
    if isinstance(v, float) and math.isnan(v):
        return None
    return v


def _system_doc(params: dict, M: int, K: int, J: int, tau: float, snr_db: float) -> dict:
    return {"M": M, "K": K, "J": J, "tau": tau, "snr_db": snr_db,
            "sigma2": params.get("sigma2", 1.0),
            "covariance": params.get("covariance", {"kind": "identity"}),
            "power": params.get("power", {"kind": "uniform"})}


def _rates_rows(params, workers, tpe_weights, progress, per_class: bool):
    rows, weights_log = [], []
    trials, seed = int(params["trials"]), int(params["seed"])
    schemes = list(params["schemes"])
    for tau in params["tau"]:
        for jdx, J in enumerate(params["J"]):
            run_schemes = [s for s in schemes if s != "rzf" or jdx == 0]
            cfg = config_from_dict(_system_doc(params, params["M"], params["K"], J, tau,
                                               params["snr_db"][0]))
            if progress:
                progress(f"tau={tau:g} J={J}: {len(run_schemes)} scheme(s), "
                         f"{len(params['snr_db'])} SNR point(s), {trials} trials")
            res = monte_carlo_sweep(cfg, run_schemes, params["snr_db"], trials, seed, workers,
                                    tpe_weights=tpe_weights)
            for snr, w in res.weights.items():
                weights_log.append({"tau": tau, "J": J, "snr_db": snr, "w": list(w.w),
                                    "provenance": w.provenance})
            classes = cfg.allocation().classes
            for scheme in run_schemes:
                for i, snr in enumerate(res.snr_db):
                    st = res.stats(scheme, i)
                    base = {"scheme": scheme, "snr_db": snr, "tau": tau,
                            "J": "" if scheme == "rzf" else J, "trials": trials, "seed": seed}
                    de = res.de_rate_bits(scheme, i)
                    rows.append(dict(base, **{"class": "all", "mean_rate_bits": st.mean_rate_bits,
                                              "stderr": st.stderr, "de_rate_bits": de,
                                              "gap_rel": (st.mean_rate_bits - de) / de}))
                    if per_class and classes is not None:
                        for c, (m, se) in enumerate(zip(st.class_means, st.class_stderr)):
                            dc = res.de_rate_bits(scheme, i, c)
                            rows.append(dict(base, **{"class": c + 1, "mean_rate_bits": m,
                                                      "stderr": se, "de_rate_bits": dc,
                                                      "gap_rel": (m - dc) / dc}))
    return rows, weights_log


def _rate_loss_rows(params, workers, progress):
    rows = []
    trials, seed = int(params["trials"]), int(params["seed"])
    ratio = int(params["M_over_K"])
    for tau in params["tau"]:
        for series in params["series"]:
            J, snr = int(series["J"]), float(series["snr_db"])
            for K in params["K"]:
                M = ratio * K
                if progress:
                    progress(f"tau={tau:g} J={J} {snr:g} dB K={K}")
                cfg = config_from_dict(_system_doc(params, M, K, J, tau, snr))
                res = monte_carlo_sweep(cfg, ("rzf", "tpe"), (snr,), trials, seed, workers)
                loss, se = res.paired_difference("rzf", "tpe", 0)
                rows.append({"K": K, "M": M, "J": J, "snr_db": snr, "tau": tau,
                             "rate_loss_nats": loss / LOG2E, "stderr_nats": se / LOG2E,
                             "rate_loss_bits": loss, "trials": trials, "seed": seed})
    return rows


def run_experiment(params: dict, out_dir, fmt: str = "csv", workers: int = 1,
                   tpe_weights: TpeWeights | None = None,
                   progress: Callable[[str], None] | None = None) -> list[str]:
    """Execute a resolved preset and write its outputs to ``out_dir``.

    Returns the written paths.  Result files depend only on ``params`` (and
    pinned weights), never on ``workers`` or timing; wall time goes to the
    manifest only.
    """
    os.makedirs(out_dir, exist_ok=True)
    start = time.perf_counter()
    kind = params["kind"]
    digest = config_hash({"parameters": params,
                          "weights": None if tpe_weights is None else list(tpe_weights.w)})
    header = {"preset": params["name"], "config_hash": digest}
    extra = {}
    if kind == "complexity":
        rows = complexity_sweep(params["M"], params["K"], params["J"], params["T_coherence"],
                                Fraction(params["eta_dl"]).limit_denominator(10**6),
                                params["mu"])
        # reference variant of the RZF count, see complexity.ops_per_coherence
        rows += [dict(r, scheme="rzf_offset") for r in complexity_sweep(
            params["M"], params["K"], [], params["T_coherence"],
            Fraction(params["eta_dl"]).limit_denominator(10**6), params["mu"],
            figure_offset=True) if r["scheme"] == "rzf"]
        name, columns = "complexity", COMPLEXITY_COLUMNS
    else:
        header["seed"] = params["seed"]
        header["trials"] = params["trials"]
        if kind == "rate_loss":
            rows = _rate_loss_rows(params, workers, progress)
            name, columns = "rate_loss", RATE_LOSS_COLUMNS
        elif kind in ("rates", "de_vs_mc"):
            rows, wlog = _rates_rows(params, workers, tpe_weights, progress,
                                     per_class=True)
            extra["tpe_weights"] = wlog
            name, columns = "results", RESULT_COLUMNS
        else:
            raise ConfigError(f"unknown experiment kind {kind!r}")
    ext = "json" if fmt == "json" else "csv"
    path = os.path.join(out_dir, f"{name}.{ext}")
    with open(path, "w", newline="") as fh:
        fh.write(render_rows(rows, columns, fmt, header))
    manifest = {
        "tool": "tpeprecoding", "version": __version__, "config_hash": digest,
        "parameters": params, "format": fmt, "outputs": [os.path.basename(path)],
        "pinned_weights": None if tpe_weights is None else json.loads(tpe_weights.to_json()),
        "workers": workers, "wall_time_s": round(time.perf_counter() - start, 3),
    }
    manifest.update(extra)
    mpath = os.path.join(out_dir, "manifest.json")
    with open(mpath, "w") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    return [path, mpath]
