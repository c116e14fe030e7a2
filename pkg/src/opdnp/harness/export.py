"""Tidy long-format plot data: one CSV per series plus a JSON sidecar."""

import csv
import json
from pathlib import Path

import numpy as np

from .runner import format_number

SIGN_NOTE = ("values are raw eps_B = P_n / P_n^eq; figures that show -eps_B for clarity "
             "should negate at plotting time")


def _require(result, names):
    missing = [n for n in names if n not in result.columns]
    if missing:
        raise ValueError(f"result lacks column(s) {missing}; has {result.columns}")


def _unit(result, name):
    return result.units[result.columns.index(name)]


def _write_series(path, x_name, x_unit, y_name, y_unit, series, xs, ys):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series", f"{x_name} [{x_unit}]", f"{y_name} [{y_unit}]"])
        for x, y in zip(xs, ys):
            w.writerow([series, format_number(x), format_number(y)])


def export_plot_data(result, kind, out_dir):
    """Write plot files for ``kind`` in {profile, sweep, trace}; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if kind == "profile":
        x = "B0"
        _require(result, [x])
        ys = [c for c in result.columns if c.startswith("eps_B_")]
        if not ys:
            raise ValueError("profile result lacks eps_B_<mode> columns")
        prefix = "profile"
    elif kind == "sweep":
        x = "P_target"
        _require(result, [x])
        ys = [c for c in result.columns if c.startswith("eps_B_")]
        if not ys:
            raise ValueError("sweep result lacks eps_B_<series> columns")
        prefix = "sweep"
    elif kind == "trace":
        x = "t"
        _require(result, [x, "normalized_esp"])
        ys = ["normalized_esp"]
        prefix = "trace"
        t = result.column(x)
        if np.any(np.diff(t) < 0):
            raise ValueError("trace times are not ascending")
    else:
        raise ValueError(f"unknown plot kind {kind!r}; expected profile, sweep or trace")
    xs = result.column(x)
    paths = []
    series_meta = {}
    for col in ys:
        name = col[len("eps_B_"):] if col.startswith("eps_B_") else col
        p = out / f"{prefix}_{name}.csv"
        y_name = "eps_B" if col.startswith("eps_B_") else col
        _write_series(p, x, _unit(result, x), y_name, _unit(result, col), name, xs,
                      result.column(col))
        paths.append(p)
        series_meta[name] = p.name
    side = out / f"{prefix}.json"
    side.write_text(json.dumps({
        "kind": kind,
        "x": {"name": x, "unit": _unit(result, x)},
        "y": {"name": "eps_B" if kind != "trace" else "normalized_esp", "unit": "1"},
        "series": series_meta,
        "sign_convention": SIGN_NOTE,
    }, indent=2, sort_keys=True) + "\n")
    return paths + [side]
