"""Plot-ready CSV grids from a cohort report (box plots and correlation heat map)."""

from __future__ import annotations

import csv
import json
import os

import numpy as np

BOX_COLUMNS = ("task", "channel", "n", "min", "q1", "median", "q3", "max", "mean")
RP_BOX_COLUMNS = ("task", "channel", "band") + BOX_COLUMNS[2:]
RP_BANDS = ("alpha_rel", "theta_rel")


def box_summary(values) -> list:
    """n, min, Q1, median, Q3, max, mean with linearly interpolated quartiles."""
    v = np.asarray(values, dtype=float)
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    return [len(v), float(v.min()), float(q1), float(med), float(q3), float(v.max()), float(v.mean())]


def _write(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(x) if isinstance(x, float) else x for x in row])


def emit_plots(report, out_dir) -> dict:
    """Write box-plot and heat-map CSVs for ``report`` (a dict or a JSON path).

    Returns the paths written. A report without rows yields header-only files.
    """
    if not isinstance(report, dict):
        with open(report, encoding="utf-8") as fh:
            report = json.load(fh)
    os.makedirs(out_dir, exist_ok=True)
    rows = report.get("rows", [])
    channels = report.get("channels", [])
    tasks = sorted({r["task"] for r in rows if r.get("task") is not None})

    def values(task, ch, key):
        return [r["channels"][ch][key] for r in rows if r.get("task") == task]

    inter, rp = [], []
    for task in tasks:
        for ch in channels:
            v = values(task, ch, "inter_brpd")
            if v:
                inter.append([task, ch, *box_summary(v)])
            for band in RP_BANDS:
                v = values(task, ch, band)
                if v:
                    rp.append([task, ch, band, *box_summary(v)])

    paths = {
        "inter_brpd": os.path.join(out_dir, "inter_brpd_boxplot.csv"),
        "relative_power": os.path.join(out_dir, "relative_power_boxplot.csv"),
        "heatmap": os.path.join(out_dir, "correlation_heatmap.csv"),
    }
    _write(paths["inter_brpd"], BOX_COLUMNS, inter)
    _write(paths["relative_power"], RP_BOX_COLUMNS, rp)
    pooled = report.get("pooled_correlation") or {}
    labels = pooled.get("labels", []) if "r" in pooled else []
    grid = [[lab, *row] for lab, row in zip(labels, pooled.get("r", []))]
    _write(paths["heatmap"], ["variable", *labels], grid)
    return paths
