"""Run reports, their file sinks, and method-versus-method comparisons.

CSV files hold plot-ready tables with floats in shortest round-trip form. A
report is written twice: a flat ``key = value`` text block and a JSON sidecar.
"""
from __future__ import annotations

import csv
import json
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import curve_fit

from .config import ExperimentConfig, render
from .piston import oscillation_period

__all__ = ["Metric", "RunReport", "GridMismatchWarning", "metric", "fit_sinusoid",
           "zero_crossing_period", "deviation", "write_csv", "read_csv", "report_dict",
           "report_text", "write_outputs", "load_report", "compare", "format_comparison"]

_RELATIONS = {
    "<=": lambda v, t: v <= t,
    "<": lambda v, t: v < t,
    ">=": lambda v, t: v >= t,
    ">": lambda v, t: v > t,
    "is": lambda v, t: bool(v) == bool(t),
    "info": lambda v, t: True,
}


class GridMismatchWarning(UserWarning):
    """Two series were sampled on different time grids and one was resampled."""


@dataclass(frozen=True)
class Metric:
    """One checked quantity: ``value relation tolerance`` between named methods."""

    name: str
    value: float
    relation: str
    tolerance: float | None
    methods: tuple
    passed: bool
    note: str = ""


def metric(name, value, relation, tolerance, methods, note="") -> Metric:
    if relation not in _RELATIONS:
        raise ValueError(f"unknown relation {relation!r}")
    v = bool(value) if relation == "is" else float(value)
    ok = bool(_RELATIONS[relation](v, tolerance))
    return Metric(name, v, relation, tolerance, tuple(methods), ok, note)


@dataclass
class RunReport:
    """Outcome of one experiment run.

    ``tables`` maps a table name to an ordered ``{column: 1-D array}`` dict.
    """

    config: ExperimentConfig
    tables: dict
    metrics: list
    wall_clock: float = 0.0
    flags: tuple = ()
    files: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(m.passed for m in self.metrics)


# --------------------------------------------------------------------------
# fits and deviations


def fit_sinusoid(t, y, omega_guess: float | None = None) -> dict:
    """Least-squares fit of ``c + a exp(-g t) cos(w t + phi)``.

    The starting frequency is the dominant FFT peak of the mean-removed data
    unless ``omega_guess`` is given.
    """
    t, y = np.asarray(t, float), np.asarray(y, float)
    if omega_guess is None:
        dt = np.mean(np.diff(t))
        spec = np.abs(np.fft.rfft(y - y.mean()))
        freqs = 2 * np.pi * np.fft.rfftfreq(y.size, dt)
        omega_guess = float(freqs[1:][np.argmax(spec[1:])])

    def f(tt, a, w, ph, c, g):
        return c + a * np.exp(-g * (tt - t[0])) * np.cos(w * tt + ph)

    p0 = [0.5 * (y.max() - y.min()), omega_guess, 0.0, float(y[-y.size // 5:].mean()), 0.0]
    best = None
    for ph in (0.0, np.pi / 2, np.pi, 3 * np.pi / 2):
        p0[2] = ph
        try:
            par, _ = curve_fit(f, t, y, p0=p0, maxfev=20000)
        except RuntimeError:
            continue
        r = float(np.sqrt(np.mean((f(t, *par) - y) ** 2)))
        if best is None or r < best[1]:
            best = (par, r)
    if best is None:
        raise RuntimeError("sinusoid fit did not converge")
    (a, w, ph, c, g), r = best
    return {"omega": abs(float(w)), "amplitude": abs(float(a)), "offset": float(c),
            "decay": float(g), "residual_rms": r}


def zero_crossing_period(t, y) -> float:
    """Mean spacing of upward crossings through the series mean."""
    return oscillation_period(t, y)[0]


def deviation(t_ref, y_ref, t, y, window=None) -> tuple[float, float]:
    """L-infinity and RMS difference of ``y`` from ``y_ref`` on the reference grid.

    ``y`` is linearly resampled (with a warning) when the grids differ.
    """
    t_ref, y_ref = np.asarray(t_ref, float), np.asarray(y_ref, float)
    t, y = np.asarray(t, float), np.asarray(y, float)
    if t.shape != t_ref.shape or not np.allclose(t, t_ref, rtol=0, atol=1e-12 * max(1.0, abs(t_ref).max())):
        warnings.warn("time grids differ; resampling by linear interpolation", GridMismatchWarning,
                      stacklevel=2)
        y = np.interp(t_ref, t, y)
    mk = np.ones(t_ref.shape, bool)
    if window is not None:
        mk = (t_ref >= window[0]) & (t_ref <= window[1])
    d = y[mk] - y_ref[mk]
    return float(np.max(np.abs(d))), float(np.sqrt(np.mean(d**2)))


# --------------------------------------------------------------------------
# sinks


def write_csv(path, table: dict):
    cols = list(table)
    arrays = [np.asarray(table[c]) for c in cols]
    n = {a.shape[0] for a in arrays}
    if len(n) != 1:
        raise ValueError(f"columns of unequal length in {path}")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in zip(*arrays):
            w.writerow([repr(float(v)) for v in row])


def read_csv(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    cols = rows[0]
    data = np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, len(cols))
    return {c: data[:, i] for i, c in enumerate(cols)}


def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, float) and not np.isfinite(v):
        return repr(v)
    return v


def report_dict(report: RunReport) -> dict:
    cfg = report.config
    return {
        "kind": cfg.kind,
        "seed": cfg.seed,
        "passed": report.passed,
        "wall_clock_s": report.wall_clock,
        "config": {k: _jsonable(v) for k, v in cfg.values.items() if v is not None},
        "defaulted": list(cfg.defaulted),
        "metrics": [
            {"name": m.name, "value": _jsonable(m.value), "relation": m.relation,
             "tolerance": _jsonable(m.tolerance), "methods": list(m.methods),
             "passed": m.passed, "note": m.note}
            for m in report.metrics
        ],
        "flags": list(report.flags),
        "tables": dict(report.files),
    }


def report_text(report: RunReport) -> str:
    d = report_dict(report)
    lines = [f"kind = {d['kind']}", f"seed = {d['seed']}",
             f"passed = {str(d['passed']).lower()}", f"wall_clock_s = {d['wall_clock_s']:.3f}"]
    for m in d["metrics"]:
        pre = f"metric.{m['name']}"
        lines += [f"{pre}.value = {m['value']!r}", f"{pre}.relation = {m['relation']}",
                  f"{pre}.tolerance = {m['tolerance']!r}", f"{pre}.methods = {','.join(m['methods'])}",
                  f"{pre}.passed = {str(m['passed']).lower()}"]
        if m["note"]:
            lines.append(f"{pre}.note = {m['note']}")
    for f in d["flags"]:
        lines.append(f"flag = {f}")
    for name, path in d["tables"].items():
        lines.append(f"table.{name} = {path}")
    lines.append("")
    lines += ["# configuration (defaults filled)"] + render(report.config, docs=False).splitlines()
    return "\n".join(lines) + "\n"


def write_outputs(report: RunReport, out_dir=None) -> dict:
    """Write every table, the text report and the JSON sidecar; returns their paths."""
    cfg = report.config
    out_dir = out_dir if out_dir is not None else cfg.values.get("output.dir", ".")
    os.makedirs(out_dir, exist_ok=True)
    prefix = cfg.values.get("output.prefix") or cfg.kind
    paths = {}
    for name, table in report.tables.items():
        fname = f"{prefix}_{name}.csv"
        write_csv(os.path.join(out_dir, fname), table)
        report.files[name] = fname
        paths[name] = os.path.join(out_dir, fname)
    paths["report"] = os.path.join(out_dir, f"{prefix}_report.txt")
    with open(paths["report"], "w") as fh:
        fh.write(report_text(report))
    paths["json"] = os.path.join(out_dir, f"{prefix}_report.json")
    with open(paths["json"], "w") as fh:
        json.dump(report_dict(report), fh, indent=2)
        fh.write("\n")
    return paths


def load_report(path) -> dict:
    """Read a JSON sidecar (or a bare CSV) and attach its tables."""
    if str(path).endswith(".csv"):
        return {"kind": None, "config": {}, "tables": {"series": read_csv(path)}, "path": str(path)}
    with open(path) as fh:
        d = json.load(fh)
    base = os.path.dirname(os.path.abspath(path))
    d["tables"] = {name: read_csv(os.path.join(base, f)) for name, f in d["tables"].items()}
    d["path"] = str(path)
    return d


# --------------------------------------------------------------------------
# comparison


def _time_column(table):
    for c in ("t", "N", "phi"):
        if c in table:
            return c
    return None


def compare(paths, window=None) -> list[dict]:
    """Comparison rows for one or more reports.

    Within a report every ``<base>_<method>`` column is compared with
    ``<base>_exact``. Interference reports get a sinusoid fit of ``q_exact``
    and piston oscillation reports a zero-crossing period. With several
    reports, each shared column is compared against the first report.
    """
    reps = [load_report(p) for p in paths]
    rows = []
    for r in reps:
        for tname, table in r["tables"].items():
            tc = _time_column(table)
            if tc is None:
                continue
            for col in table:
                if not col.endswith("_exact"):
                    continue
                base = col[: -len("_exact")]
                for other in table:
                    if (other != col and other.startswith(base + "_")
                            and not other.endswith(("_exact", "_stderr"))):
                        linf, rms = deviation(table[tc], table[col], table[tc], table[other], window)
                        rows.append({"report": r["path"], "table": tname, "metric": "deviation",
                                     "methods": f"{other} vs {col}", "linf": linf, "rms": rms})
        series = r["tables"].get("series", {})
        if r.get("kind") == "spin_interference" and "q_exact" in series:
            fit = fit_sinusoid(series["t"], series["q_exact"])
            cfg = r["config"]
            gap = _interference_gap(cfg)
            rows.append({"report": r["path"], "table": "series", "metric": "frequency",
                         "methods": "fit(q_exact) vs gap(p0)", "value": fit["omega"], "reference": gap,
                         "ratio": fit["omega"] / gap})
        if r.get("kind") == "piston_oscillation" and "x" in series:
            T = zero_crossing_period(series["t"], series["x"])
            cfg = r["config"]
            M = cfg.get("model.M") or cfg["model.m"] * cfg["model.N"] / 3 / cfg["model.kappa_ratio"]
            kappa = cfg["model.m"] * cfg["model.N"] / 3
            t_bo = np.pi * np.sqrt(M / cfg["model.k"])
            rows.append({"report": r["path"], "table": "series", "metric": "period",
                         "methods": "zero-crossing(x) vs T_BO", "value": T / t_bo,
                         "reference": float(np.sqrt(1 + kappa / M)),
                         "ratio": T / t_bo / np.sqrt(1 + kappa / M)})
    if len(reps) > 1:
        ref = reps[0]
        for r in reps[1:]:
            for tname, table in r["tables"].items():
                rt = ref["tables"].get(tname)
                tc = _time_column(table)
                if rt is None or tc is None or tc not in rt:
                    continue
                for col in table:
                    if col == tc or col not in rt:
                        continue
                    linf, rms = deviation(rt[tc], rt[col], table[tc], table[col], window)
                    rows.append({"report": r["path"], "table": tname, "metric": "deviation",
                                 "methods": f"{col} vs {ref['path']}", "linf": linf, "rms": rms})
    return rows


def _interference_gap(cfg) -> float:
    dth, M, mu, p0 = cfg["model.dtheta"], cfg["model.M"], cfg["model.mu"], cfg["packet.p0"]
    B = cfg.get("model.B")
    if B is None:
        B = dth * p0 / (2 * M * mu * cfg["model.tan_phi"])
    return 2 * float(np.hypot(mu * B, dth * p0 / (2 * M)))


def format_comparison(rows) -> str:
    out = []
    for r in rows:
        if r["metric"] == "deviation":
            out.append(f"{r['table']:<10} {r['methods']:<40} linf={r['linf']:.6g} rms={r['rms']:.6g}")
        else:
            out.append(f"{r['table']:<10} {r['methods']:<40} value={r['value']:.6g} "
                       f"reference={r['reference']:.6g} ratio={r['ratio']:.6g}")
    return "\n".join(out)
