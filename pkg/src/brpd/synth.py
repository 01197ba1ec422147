"""Synthetic EEG with known relative band powers, single recordings and cohorts.

Signals are sums of in-band sinusoids (or band-limited Gaussian noise) plus a
low white-noise floor. Component amplitudes follow from the target band
powers directly, so the expected spectrum is known without running the
spectral estimator.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import SynthSpecError
from .ingest import Recording, SegmentMarkers, save_markers, write_edf
from .preprocess.ica import FRONTAL_CHANNELS
from .spectral import BAND_NAMES, BANDS

MODELS = ("sinusoid", "bandlimited")
BAND_MARGIN = 0.5  # Hz kept clear of each band edge
MIN_DURATION = 8.0
MIN_REL = 1.0  # smallest theta/alpha/delta/beta percentage a cohort draw may use

# Brain-band power (V^2) of a typical task and baseline segment.
TASK_POWER = 1.43e-10
BASELINE_POWER = 1.29e-10
BASELINE_TARGETS = (35.0, 13.3, 26.0, 25.7)


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic recording.

    ``targets`` are delta, theta, alpha, beta percentages of the summed
    1-30 Hz power. ``noise_fraction`` is the share of that power carried by
    the white-noise floor, spread across the bands by width.
    ``analysis_window`` is the length (s) of the span the spectrum will be
    estimated over; it defaults to ``duration``.
    """

    sampling_rate: float = 256.0
    duration: float = 60.0
    targets: tuple = (25.0, 25.0, 25.0, 25.0)
    model: str = "sinusoid"
    seed: int = 0
    components_per_band: int = 2
    total_power: float = TASK_POWER
    noise_fraction: float = 0.01
    analysis_window: float | None = None

    def __post_init__(self):
        targets = tuple(float(t) for t in self.targets)
        object.__setattr__(self, "targets", targets)
        if len(targets) != len(BAND_NAMES):
            raise SynthSpecError(f"need {len(BAND_NAMES)} band targets, got {len(targets)}")
        if any(t < 0 or not math.isfinite(t) for t in targets):
            raise SynthSpecError(f"targets must be finite and >= 0: {targets}")
        if abs(sum(targets) - 100.0) > 1e-6:
            raise SynthSpecError(f"targets must sum to 100, got {sum(targets)}")
        if self.duration < MIN_DURATION:
            raise SynthSpecError(f"duration must be >= {MIN_DURATION} s, got {self.duration}")
        if self.model not in MODELS:
            raise SynthSpecError(f"unknown model {self.model!r}; expected one of {MODELS}")
        if self.model == "sinusoid" and self.components_per_band < 1:
            raise SynthSpecError("sinusoid model needs at least one component per band")
        if not 0 <= self.noise_fraction < 1:
            raise SynthSpecError("noise_fraction must be in [0, 1)")
        if not self.total_power > 0:
            raise SynthSpecError("total_power must be positive")
        if self.analysis_window is not None and not self.analysis_window > 0:
            raise SynthSpecError("analysis_window must be positive")
        if BANDS["beta"][1] + BAND_MARGIN >= self.sampling_rate / 2:
            raise SynthSpecError("sampling rate too low for the beta band")

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.sampling_rate))


def _brain_span() -> float:
    return BANDS[BAND_NAMES[-1]][1] - BANDS[BAND_NAMES[0]][0]


def _sinusoid_frequencies(band, k: int, window: float, rng: np.random.Generator) -> np.ndarray:
    """``k`` frequencies inside ``band`` minus margins, one per equal sub-interval.

    Frequencies sit half-way between the ``1 / window`` analysis grid points,
    where Simpson integration of a tapered line has no odd/even bias.
    """
    lo, hi = band[0] + BAND_MARGIN, band[1] - BAND_MARGIN
    edges = np.linspace(lo, hi, k + 1)
    width = edges[1] - edges[0]
    # central half of each sub-interval keeps neighbours at least width/2 apart
    raw = edges[:-1] + width * (0.25 + 0.5 * rng.random(k))
    snapped = (np.floor(raw * window) + 0.5) / window
    return np.clip(snapped, lo, hi)


def _bandlimited(n: int, fs: float, band, power: float, rng: np.random.Generator) -> np.ndarray:
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, 1.0 / fs)
    spec[(f < band[0] + BAND_MARGIN) | (f > band[1] - BAND_MARGIN)] = 0
    x = np.fft.irfft(spec, n)
    x -= x.mean()
    return x * math.sqrt(power / np.mean(x * x))


def synthesize_channel(spec: SynthSpec, rng: np.random.Generator, targets=None, total_power=None) -> np.ndarray:
    """One channel of ``spec.n_samples`` volts realizing the band targets."""
    targets = spec.targets if targets is None else targets
    total = spec.total_power if total_power is None else total_power
    fs, n = spec.sampling_rate, spec.n_samples
    t = np.arange(n) / fs
    noise_var = spec.noise_fraction * total * (fs / 2) / _brain_span()
    x = np.zeros(n)
    for name, pct in zip(BAND_NAMES, targets):
        band = BANDS[name]
        # white noise already contributes to this band
        power = max(0.0, pct / 100.0 * total - noise_var * (band[1] - band[0]) / (fs / 2))
        if spec.model == "sinusoid":
            k = spec.components_per_band
            window = spec.analysis_window or spec.duration
            freqs = _sinusoid_frequencies(band, k, window, rng)
            phases = rng.uniform(0, 2 * np.pi, k)
            amp = math.sqrt(2 * power / k)
            for f0, ph in zip(freqs, phases):
                x += amp * np.sin(2 * np.pi * f0 * t + ph)
        elif power > 0:
            x += _bandlimited(n, fs, band, power, rng)
    if noise_var > 0:
        x += rng.standard_normal(n) * math.sqrt(noise_var)
    return x


def default_labels(n_channels: int) -> tuple:
    if n_channels <= len(FRONTAL_CHANNELS):
        return FRONTAL_CHANNELS[:n_channels]
    return tuple(f"CH{i + 1}" for i in range(n_channels))


def generate_recording(spec: SynthSpec, n_channels: int = 1, labels=None, channel_targets=None) -> Recording:
    """Deterministic recording from ``spec``.

    Every channel realizes ``spec.targets`` unless ``channel_targets`` maps a
    label to its own target tuple. Channels use independent phases and noise.
    """
    labels = default_labels(n_channels) if labels is None else tuple(labels)
    channel_targets = channel_targets or {}
    children = np.random.SeedSequence(spec.seed).spawn(len(labels))
    rows = []
    for lab, ss in zip(labels, children):
        targets = channel_targets.get(lab, spec.targets)
        ch_spec = replace(spec, targets=targets)
        rows.append(synthesize_channel(ch_spec, np.random.default_rng(ss)))
    return Recording(labels, spec.sampling_rate, np.array(rows))


# ------------------------------------------------------------------------ cohort

# Per channel and task: (inter-BRPD mean, inter-BRPD SD, theta mean, theta SD), percentage points.
DEFAULT_COHORT_TARGETS = {
    ("T1", "AF3"): (3.85, 7.78, 17.06, 3.86),
    ("T2", "AF3"): (-2.63, 4.61, 16.66, 3.93),
    ("T3", "AF3"): (-1.67, 4.85, 17.36, 5.58),
    ("T1", "AF4"): (2.65, 7.56, 16.59, 3.83),
    ("T2", "AF4"): (-2.34, 4.95, 16.46, 3.99),
    ("T3", "AF4"): (-1.39, 4.78, 16.94, 4.89),
}


@dataclass(frozen=True)
class CohortLayout:
    """Timing and channel layout shared by every cohort recording."""

    sampling_rate: float = 256.0
    baseline: float = 30.0
    gap: float = 2.0
    task: float = 60.0
    channels: tuple = FRONTAL_CHANNELS
    target_channels: tuple = ("AF3", "AF4")
    channel_correlation: float = 0.95
    delta_share: tuple = (0.45, 0.6)
    # one tone per band keeps channels clearly sub-Gaussian so FastICA converges quickly
    components_per_band: int = 1

    @property
    def markers(self) -> SegmentMarkers:
        start = self.baseline + self.gap
        return SegmentMarkers(0.0, self.baseline, start, start + self.task)

    @property
    def duration(self) -> float:
        return self.baseline + self.gap + self.task


@dataclass(frozen=True)
class CohortMember:
    subject: str
    task: str
    seed: int
    targets: dict = field(repr=False)  # channel -> (delta, theta, alpha, beta)

    @property
    def source_id(self) -> str:
        return f"{self.subject}_{self.task}"

    def inter_brpd(self, channel: str) -> float:
        _, theta, alpha, _ = self.targets[channel]
        return alpha - theta


def _standardized(z: np.ndarray) -> np.ndarray:
    """Columns rescaled to sample mean 0 and SD 1 (ddof=1); constant columns become 0."""
    z = z - z.mean(axis=0)
    sd = z.std(axis=0, ddof=1)
    return np.divide(z, sd, out=np.zeros_like(z), where=sd > 0)


def _draw_cell(rng, n, channels, params, rho, layout, max_attempts=100):
    """Per-subject (delta, theta, alpha, beta) for each channel of one task.

    inter-BRPD and theta are drawn from channel-correlated normals and then
    moment-matched so each channel's sample mean and SD equal the targets.
    """
    k = len(channels)
    cov = np.full((k, k), rho) + (1 - rho) * np.eye(k)
    chol = np.linalg.cholesky(cov)
    for _ in range(max_attempts):
        zd = _standardized(rng.standard_normal((n, k)) @ chol.T)
        zt = _standardized(rng.standard_normal((n, k)) @ chol.T)
        share = rng.uniform(*layout.delta_share, size=(n, k))
        out = np.empty((n, k, 4))
        for j, ch in enumerate(channels):
            d_mean, d_sd, t_mean, t_sd = params[ch]
            theta = t_mean + t_sd * zt[:, j]
            alpha = theta + d_mean + d_sd * zd[:, j]
            rest = 100.0 - theta - alpha
            out[:, j] = np.column_stack([rest * share[:, j], theta, alpha, rest * (1 - share[:, j])])
        if np.all(out >= MIN_REL):
            return out
    raise SynthSpecError(
        f"could not draw realizable relative powers in {max_attempts} attempts; "
        "targets force a band outside [0, 100] %"
    )


def plan_cohort(targets=None, n_subjects: int = 27, seed: int = 0, layout: CohortLayout = CohortLayout()):
    """Draw per-subject band targets for every subject x task."""
    targets = DEFAULT_COHORT_TARGETS if targets is None else targets
    if n_subjects < 3:
        raise SynthSpecError(f"n_subjects must be >= 3, got {n_subjects}")
    tasks = sorted({t for t, _ in targets})
    channels = layout.target_channels
    missing = [(t, c) for t in tasks for c in channels if (t, c) not in targets]
    if missing:
        raise SynthSpecError(f"cohort targets missing cells {missing}")
    root = np.random.SeedSequence(seed)
    draw_seq, *subject_seqs = root.spawn(1 + n_subjects)
    rng = np.random.default_rng(draw_seq)
    cells = {}
    for task in tasks:
        params = {c: targets[(task, c)] for c in channels}
        cells[task] = _draw_cell(rng, n_subjects, channels, params, layout.channel_correlation, layout)
    members = []
    width = max(2, len(str(n_subjects)))
    for i in range(n_subjects):
        subject = f"S{i + 1:0{width}d}"
        task_seeds = subject_seqs[i].generate_state(len(tasks))
        for ti, task in enumerate(tasks):
            tg = {c: tuple(float(v) for v in cells[task][i, j]) for j, c in enumerate(channels)}
            members.append(CohortMember(subject, task, int(task_seeds[ti]), tg))
    return members


def render_member(member: CohortMember, layout: CohortLayout = CohortLayout(), model: str = "sinusoid") -> Recording:
    """Baseline, a raised-cosine cross-fade over the gap, then the task signal."""
    fs = layout.sampling_rate
    n = int(round(layout.duration * fs))
    i0 = int(round(layout.baseline * fs))
    i1 = int(round((layout.baseline + layout.gap) * fs))
    ramp = np.zeros(n)
    ramp[i1:] = 1.0
    ramp[i0:i1] = 0.5 - 0.5 * np.cos(np.pi * np.arange(i1 - i0) / (i1 - i0))
    base = generate_recording(SynthSpec(fs, layout.duration, BASELINE_TARGETS, model,
                                        seed=member.seed, total_power=BASELINE_POWER,
                                        components_per_band=layout.components_per_band,
                                        analysis_window=layout.baseline),
                              labels=layout.channels)
    task = generate_recording(SynthSpec(fs, layout.duration, BASELINE_TARGETS, model,
                                        seed=member.seed + 1, total_power=TASK_POWER,
                                        components_per_band=layout.components_per_band,
                                        analysis_window=layout.task),
                              labels=layout.channels, channel_targets=member.targets)
    samples = base.samples * (1 - ramp) + task.samples * ramp
    return Recording(layout.channels, fs, samples)


def _write_member(args):
    member, layout, model, out_dir = args
    rec = render_member(member, layout, model)
    stem = os.path.join(out_dir, member.source_id)
    write_edf(rec, stem + ".edf", patient=member.subject, recording_id=member.task)
    save_markers(layout.markers, stem + ".json", subject=member.subject, task=member.task)
    return member.source_id


def cohort_summary(members, channels=("AF3", "AF4")) -> dict:
    """Per task x channel sample mean and SD (ddof=1) of the drawn inter-BRPD targets."""
    out = {}
    for task in sorted({m.task for m in members}):
        for ch in channels:
            v = np.array([m.inter_brpd(ch) for m in members if m.task == task])
            out[f"{task}/{ch}"] = {
                "n": int(len(v)),
                "mean": float(v.mean()),
                "sd": float(v.std(ddof=1)) if len(v) > 1 else 0.0,
            }
    return out


def generate_cohort(
    out_dir,
    targets=None,
    n_subjects: int = 27,
    seed: int = 0,
    layout: CohortLayout = CohortLayout(),
    model: str = "sinusoid",
    jobs: int = 1,
) -> dict:
    """Write one EDF plus marker JSON per subject x task and a ``fixture.json`` manifest.

    Returns the manifest. Output is identical for any ``jobs`` value.
    """
    targets = DEFAULT_COHORT_TARGETS if targets is None else targets
    members = plan_cohort(targets, n_subjects, seed, layout)
    os.makedirs(out_dir, exist_ok=True)
    work = [(m, layout, model, str(out_dir)) for m in members]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(_write_member, work))
    else:
        for item in work:
            _write_member(item)
    manifest = {
        "seed": seed,
        "n_subjects": n_subjects,
        "model": model,
        "sampling_rate": layout.sampling_rate,
        "markers": layout.markers.to_dict(),
        "channels": list(layout.channels),
        "targets": {f"{t}/{c}": {"mean": v[0], "sd": v[1], "theta_mean": v[2], "theta_sd": v[3]}
                    for (t, c), v in sorted(targets.items())},
        "expected": cohort_summary(members, layout.target_channels),
        "recordings": [
            {"source_id": m.source_id, "subject": m.subject, "task": m.task, "seed": m.seed,
             "targets": {c: list(v) for c, v in m.targets.items()}}
            for m in members
        ],
    }
    with open(os.path.join(out_dir, "fixture.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return manifest
