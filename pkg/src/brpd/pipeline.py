"""Batch analysis: per-recording cleaning and features, then cohort statistics."""

from __future__ import annotations

import csv
import json
import logging
import os
import platform
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy

from . import __version__
from .config import PipelineConfig
from .errors import BrpdError, DesignError
from .ingest import load_markers, read_edf, segment, select_channels
from .metrics import cognitive_index_table, relative_powers, write_metrics_csv
from .preprocess import (
    annotate_amplitude,
    design_bandpass,
    filter_recording,
    fit_fastica,
    flag_muscle,
    remove_components,
    suggest_eog_components,
)
from .spectral import BandPowerTable, band_power_table
from .stats import (
    CohortMatrix,
    bonferroni_pairwise,
    describe,
    fisher_pool,
    mixed_anova,
    normality_report,
    pearson_matrix,
)

log = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_ALL_FAILED = 0, 1, 2
STEM_PATTERN = re.compile(r"^(?P<subject>.+?)[_-](?P<task>T\d+)$")
RP_FIELDS = ("delta_rel", "theta_rel", "alpha_rel", "beta_rel")
REPORT_NAME = "cohort_report.json"
MANIFEST_NAME = "manifest.json"


class UsageError(BrpdError):
    pass


@dataclass(frozen=True)
class InputPair:
    source_id: str
    edf: str
    markers: str | None


def discover_inputs(directory) -> list[InputPair]:
    """EDF files in ``directory`` (sorted by name) with their same-stem JSON sidecars."""
    if not os.path.isdir(directory):
        raise UsageError(f"input directory {directory} does not exist")
    pairs = []
    for name in sorted(os.listdir(directory)):
        stem, ext = os.path.splitext(name)
        if ext.lower() != ".edf":
            continue
        sidecar = os.path.join(directory, stem + ".json")
        pairs.append(InputPair(stem, os.path.join(directory, name), sidecar if os.path.isfile(sidecar) else None))
    return pairs


def _identity(pair: InputPair) -> tuple[str | None, str | None]:
    subject = task = None
    if pair.markers:
        with open(pair.markers, encoding="utf-8") as fh:
            payload = json.load(fh)
        subject, task = payload.get("subject"), payload.get("task")
    match = STEM_PATTERN.match(pair.source_id)
    if match:
        subject = subject or match["subject"]
        task = task or match["task"]
    return subject, task


@dataclass
class RecordingResult:
    source_id: str
    subject: str | None
    task: str | None
    band_rows: list = field(default_factory=list)
    relative: list = field(default_factory=list)
    indices: list = field(default_factory=list)
    ica: dict | None = None
    annotations: dict | None = None


def process_recording(pair: InputPair, cfg: PipelineConfig) -> RecordingResult:
    """Filter, annotate, ICA-clean, segment and extract features from one recording."""
    if pair.markers is None:
        raise BrpdError(f"{pair.source_id}: no marker sidecar {pair.source_id}.json")
    markers = load_markers(pair.markers)
    subject, task = _identity(pair)
    rec = read_edf(pair.edf)
    fs = rec.sampling_rate
    if abs(fs - cfg.expected_sampling_rate) > 1e-9:
        raise BrpdError(f"{pair.source_id}: sampling rate {fs} Hz, expected {cfg.expected_sampling_rate} Hz")

    channels = cfg.ica_channels if cfg.ica_enabled else cfg.analysis_channels
    rec = select_channels(rec, channels)
    rec = filter_recording(rec, design_bandpass(fs, cfg.filter))

    ann = annotate_amplitude(rec, cfg.amplitude_threshold, cfg.amplitude_pad)
    if cfg.muscle_enabled:
        ann = ann.union(flag_muscle(rec, cfg.muscle_band, cfg.muscle_z, cfg.muscle_window))

    ica_info = None
    if cfg.ica_enabled:
        model = fit_fastica(rec, ann, cfg.ica_n_components, cfg.ica_max_iter, cfg.ica_tol, cfg.ica_seed)
        reject = list(cfg.ica_reject)
        suggested = []
        if cfg.eog_heuristic:
            suggested = suggest_eog_components(rec, model, threshold=cfg.eog_threshold)
            reject = sorted(set(reject) | set(suggested))
        bad = [i for i in reject if i >= model.n_components]
        if bad:
            raise BrpdError(f"{pair.source_id}: reject indices {bad} exceed {model.n_components} components")
        rec = remove_components(rec, model, reject)
        ica_info = {
            "converged": model.converged,
            "iterations_used": model.iterations_used,
            "n_components": model.n_components,
            "rejected": reject,
            "suggested": suggested,
            "model": model.to_dict(),
        }

    rec = select_channels(rec, cfg.analysis_channels)
    seg = segment(rec, markers, pair.source_id)
    table = band_power_table(seg, cfg.nw, cfg.bands, cfg.fmax, cfg.n_tapers)
    rels = relative_powers(table)
    ix = cognitive_index_table(table, cfg.index_definitions)
    return RecordingResult(pair.source_id, subject, task, list(table.rows), rels, ix, ica_info, ann.to_dict())


def _dump_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True, allow_nan=True)
        fh.write("\n")


def write_recording_outputs(res: RecordingResult, cfg: PipelineConfig, out_dir) -> None:
    rec_dir = os.path.join(out_dir, "recordings")
    os.makedirs(rec_dir, exist_ok=True)
    stem = os.path.join(rec_dir, res.source_id)
    BandPowerTable(res.source_id, tuple(res.band_rows)).to_csv(stem + "_bandpower.csv")
    write_metrics_csv(stem + "_metrics.csv", res.relative, res.indices, tuple(cfg.index_definitions))
    _dump_json(res.annotations, stem + "_annotations.json")
    if res.ica is not None:
        _dump_json(res.ica, stem + "_ica.json")


# ------------------------------------------------------------------ cohort level

def _task_records(results):
    """(result, channel) -> (relative record, index record) for the task segment."""
    out = {}
    for res in results:
        for rel, ix in zip(res.relative, res.indices):
            if rel.segment == "task":
                out[(res.source_id, rel.channel)] = (rel, ix)
    return out


def cohort_rows(results, cfg: PipelineConfig) -> list[dict]:
    """One row per recording with per-channel relative powers, inter-BRPD and indices."""
    recs = _task_records(results)
    rows = []
    for res in sorted(results, key=lambda r: r.source_id):
        channels = {}
        for ch in cfg.analysis_channels:
            rel, ix = recs[(res.source_id, ch)]
            entry = {f: getattr(rel, f) for f in RP_FIELDS}
            entry["inter_brpd"] = rel.inter_brpd
            entry.update(ix.values)
            channels[ch] = entry
        rows.append({"source_id": res.source_id, "subject": res.subject, "task": res.task, "channels": channels})
    return rows


def _cells(rows, channels):
    tasks = sorted({r["task"] for r in rows if r["task"] is not None})
    return [(t, c) for t in tasks for c in channels]


def _values(rows, task, channel, key):
    return np.array([r["channels"][channel][key] for r in rows if r["task"] == task])


def _guard(fn, *args, **kw):
    try:
        return fn(*args, **kw), None
    except (BrpdError, ValueError) as exc:
        return None, str(exc)


def cohort_statistics(rows, cfg: PipelineConfig) -> dict:
    """Descriptives, normality, mixed ANOVA, post-hoc tests and correlation matrices."""
    channels = list(cfg.analysis_channels)
    cells = _cells(rows, channels)
    report = {"descriptives": [], "relative_power_descriptives": [], "normality": []}
    for task, ch in cells:
        v = _values(rows, task, ch, "inter_brpd")
        d, err = _guard(describe, v)
        report["descriptives"].append({"task": task, "channel": ch, **(d.to_dict() if d else {"error": err})})
        for band in ("alpha_rel", "theta_rel"):
            d, err = _guard(describe, _values(rows, task, ch, band))
            report["relative_power_descriptives"].append(
                {"task": task, "channel": ch, "band": band, **(d.to_dict() if d else {"error": err})})
        nr, err = _guard(normality_report, v)
        report["normality"].append({"task": task, "channel": ch, **(nr.to_dict() if nr else {"error": err})})

    records = [(r["subject"], r["task"], ch, r["channels"][ch]["inter_brpd"])
               for r in rows if r["subject"] is not None for ch in channels]
    tasks = sorted({t for t, _ in cells})
    matrix, err = _guard(_complete_matrix, records, tasks, channels)
    if matrix is None:
        report["anova"] = {"error": err}
        report["posthoc"] = {"error": err}
    else:
        report["design"] = {"subjects": list(matrix.subject_ids), "tasks": tasks, "channels": channels,
                            "units": len(matrix.subject_ids) * len(tasks)}
        table, err = _guard(mixed_anova, matrix)
        report["anova"] = table.to_dict() if table else {"error": err}
        comps, err = _guard(bonferroni_pairwise, matrix)
        report["posthoc"] = [c.to_dict() for c in comps] if comps else {"error": err}

    variables = ["alpha_rel", "theta_rel", *cfg.index_definitions, "inter_brpd"]
    mats, report["correlations"] = [], []
    for task, ch in cells:
        cols = {k: _values(rows, task, ch, k) for k in variables}
        m, err = _guard(pearson_matrix, cols)
        if m is not None:
            mats.append(m)
        report["correlations"].append({"task": task, "channel": ch, **(m.to_dict() if m else {"error": err})})
    pooled, err = _guard(fisher_pool, mats, cfg.pool_weighting) if mats else (None, "no correlation matrices")
    report["pooled_correlation"] = pooled.to_dict() if pooled else {"error": err}
    return report


def _complete_matrix(records, tasks, channels) -> CohortMatrix:
    """Grid over subjects that have every task x channel cell; others are dropped."""
    have = {}
    for subject, task, ch, _ in records:
        have.setdefault(subject, set()).add((task, ch))
    need = {(t, c) for t in tasks for c in channels}
    keep = {s for s, got in have.items() if need <= got}
    if len(tasks) < 2:
        raise DesignError("need at least two tasks for the between-subjects factor")
    if len(keep) < 2:
        raise DesignError(f"only {len(keep)} subject(s) have every task x channel cell")
    return CohortMatrix.from_records([r for r in records if r[0] in keep], tasks, channels)


def _fmt(v, digits=3):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        return f"{v:.{digits}f}"
    return str(v)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_stat_tables(report: dict, out_dir) -> None:
    """Display-precision CSV copies of the cohort tables."""
    sdir = os.path.join(out_dir, "stats")
    os.makedirs(sdir, exist_ok=True)
    cols = ("n", "mean", "ci_low", "ci_high", "median", "se", "sd", "minimum", "maximum")
    _write_csv(os.path.join(sdir, "descriptives.csv"), ("task", "channel") + cols,
               [[d["task"], d["channel"], *(_fmt(d.get(c), 2) for c in cols)] for d in report["descriptives"]])
    ncols = ("n", "W", "p_sw", "D", "p_ks_lilliefors", "p_ks_censored")
    _write_csv(os.path.join(sdir, "normality.csv"), ("task", "channel") + ncols,
               [[d["task"], d["channel"], *(_fmt(d.get(c)) for c in ncols)] for d in report["normality"]])
    anova = report.get("anova", {})
    if "between" in anova:
        _write_csv(os.path.join(sdir, "anova.csv"), ("source", "ss", "df", "ms", "F", "p"),
                   [[r["source"], _fmt(r["ss"]), r["df"], _fmt(r["ms"]), _fmt(r["F"]), _fmt(r["p"])]
                    for r in anova["between"] + anova["within"]])
    if isinstance(report.get("posthoc"), list):
        pcols = ("mean_difference", "se", "p_adjusted", "ci_low", "ci_high")
        _write_csv(os.path.join(sdir, "posthoc.csv"), ("group_i", "group_j") + pcols,
                   [[c["group_i"], c["group_j"], *(_fmt(c[k]) for k in pcols)] for c in report["posthoc"]])
    pooled = report.get("pooled_correlation", {})
    if "r" in pooled:
        _write_csv(os.path.join(sdir, "correlation_pooled.csv"), ["variable", *pooled["labels"]],
                   [[lab, *(_fmt(v) for v in row)] for lab, row in zip(pooled["labels"], pooled["r"])])


def _versions() -> dict:
    return {"brpd": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _process_safely(args):
    pair, cfg = args
    try:
        return pair, process_recording(pair, cfg), None
    except (BrpdError, ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        return pair, None, f"{type(exc).__name__}: {exc}"


def run_pipeline(cfg: PipelineConfig, input_dir, out_dir=None, jobs: int = 1) -> int:
    """Analyze every EDF + marker pair in ``input_dir``; returns an exit code.

    Writes ``recordings/*`` per recording, ``cohort_report.json`` and
    ``stats/*.csv`` when statistics are enabled, and ``manifest.json``.
    Recordings that fail are skipped and listed under ``excluded``.
    """
    out_dir = out_dir or cfg.output_dir
    pairs = discover_inputs(input_dir)
    if not pairs:
        raise UsageError(f"no EDF recordings found in {input_dir}")
    os.makedirs(out_dir, exist_ok=True)

    work = [(p, cfg) for p in pairs]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_process_safely, work))
    else:
        outcomes = [_process_safely(w) for w in work]

    results, files, excluded = [], [], []
    for pair, res, err in outcomes:
        if res is None:
            log.warning("excluded %s: %s", pair.source_id, err)
            excluded.append({"source_id": pair.source_id, "reason": err})
            files.append({"source_id": pair.source_id, "status": "excluded", "reason": err})
            continue
        write_recording_outputs(res, cfg, out_dir)
        results.append(res)
        files.append({"source_id": pair.source_id, "status": "ok"})

    manifest = {
        "config_hash": cfg.hash,
        "config": cfg.to_dict(),
        "versions": _versions(),
        "files": files,
        "excluded": excluded,
        "n_processed": len(results),
    }
    if results and cfg.stats_enabled:
        rows = cohort_rows(results, cfg)
        report = {"config_hash": cfg.hash, "index_set": cfg.index_set,
                  "index_definitions": cfg.index_definitions, "channels": list(cfg.analysis_channels),
                  "rows": rows, "excluded": excluded}
        report.update(cohort_statistics(rows, cfg))
        _dump_json(report, os.path.join(out_dir, REPORT_NAME))
        write_stat_tables(report, out_dir)
        manifest["report"] = REPORT_NAME
    _dump_json(manifest, os.path.join(out_dir, MANIFEST_NAME))

    if not results:
        log.error("all %d recordings failed", len(pairs))
        return EXIT_ALL_FAILED
    return EXIT_OK
