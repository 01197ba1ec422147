"""Artifact spans: large-amplitude excursions and muscle (high-beta) bursts."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from ..errors import SignalLengthError, SpectralRangeError
from ..ingest import Recording

KINDS = ("amplitude", "muscle", "manual")


@dataclass(frozen=True)
class Span:
    """Closed sample interval ``[start, end]``."""

    start: int
    end: int
    kind: str

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown artifact kind {self.kind!r}; expected one of {KINDS}")
        if self.end < self.start or self.start < 0:
            raise ValueError(f"invalid span [{self.start}, {self.end}]")


def merge_spans(spans) -> tuple:
    """Sort and merge overlapping or touching spans.

    A merged span keeps the kind of its earliest member.
    """
    spans = sorted(spans, key=lambda s: (s.start, s.end))
    merged = []
    for sp in spans:
        if merged and sp.start <= merged[-1].end + 1:
            last = merged[-1]
            if sp.end > last.end:
                merged[-1] = Span(last.start, sp.end, last.kind)
        else:
            merged.append(sp)
    return tuple(merged)


@dataclass(frozen=True)
class ArtifactAnnotations:
    spans: tuple = ()
    threshold_volts: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "spans", merge_spans(self.spans))

    def __len__(self):
        return len(self.spans)

    def mask(self, n_samples: int) -> np.ndarray:
        """Boolean array, True inside any span."""
        bad = np.zeros(n_samples, dtype=bool)
        for sp in self.spans:
            if sp.end >= n_samples:
                raise ValueError(f"span [{sp.start}, {sp.end}] exceeds {n_samples} samples")
            bad[sp.start:sp.end + 1] = True
        return bad

    def union(self, other: "ArtifactAnnotations") -> "ArtifactAnnotations":
        thr = self.threshold_volts if self.threshold_volts is not None else other.threshold_volts
        return ArtifactAnnotations(self.spans + other.spans, thr)

    def to_dict(self) -> dict:
        return {
            "threshold_volts": self.threshold_volts,
            "spans": [{"start": s.start, "end": s.end, "kind": s.kind} for s in self.spans],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ArtifactAnnotations":
        spans = [Span(int(s["start"]), int(s["end"]), s["kind"]) for s in payload.get("spans", [])]
        return cls(tuple(spans), payload.get("threshold_volts"))

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "ArtifactAnnotations":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _runs(flags: np.ndarray):
    """(start, end) of each run of True values, ends inclusive."""
    if not flags.any():
        return []
    edges = np.diff(np.concatenate([[0], flags.astype(np.int8), [0]]))
    starts = np.flatnonzero(edges == 1)
    ends = np.flatnonzero(edges == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))


def annotate_amplitude(rec: Recording, threshold: float = 200e-6, pad: float = 0.25) -> ArtifactAnnotations:
    """Mark every sample where any channel exceeds ``threshold`` volts in magnitude.

    Each offending run is widened by ``pad`` seconds on both sides (clipped to
    the recording) and overlapping spans are merged.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    n = rec.n_samples
    width = int(round(pad * rec.sampling_rate))
    hot = np.any(np.abs(rec.samples) > threshold, axis=0)
    spans = [
        Span(max(0, s - width), min(n - 1, e + width), "amplitude") for s, e in _runs(hot)
    ]
    return ArtifactAnnotations(tuple(spans), threshold)


def flag_muscle(
    rec: Recording,
    band=(25.0, 40.0),
    z_threshold: float = 4.0,
    window: float = 1.0,
) -> ArtifactAnnotations:
    """Flag windows whose ``band`` power is an outlier across the recording.

    Windows of ``window`` seconds advance by half a window. For each, the
    Hann-tapered periodogram power inside ``band`` is summed over channels.
    Window powers are z-scored and windows with ``z > z_threshold`` become
    muscle spans.
    """
    fs = rec.sampling_rate
    low, high = band
    if not 0 <= low < high <= fs / 2:
        raise SpectralRangeError(f"band {band} must lie within [0, {fs / 2}] Hz")
    w = int(round(window * fs))
    n = rec.n_samples
    if w < 2 or w > n:
        raise SignalLengthError(
            f"window of {window} s ({w} samples) does not fit a {n}-sample recording"
        )
    if math.isinf(z_threshold) and z_threshold > 0:
        return ArtifactAnnotations()

    hop = max(1, w // 2)
    starts = np.arange(0, n - w + 1, hop)
    idx = starts[:, None] + np.arange(w)[None, :]
    seg = rec.samples[:, idx]  # channels x windows x w
    seg = seg - seg.mean(axis=-1, keepdims=True)
    spec = np.abs(np.fft.rfft(seg * np.hanning(w), axis=-1)) ** 2
    freqs = np.fft.rfftfreq(w, 1.0 / fs)
    in_band = (freqs >= low) & (freqs <= high)
    power = spec[..., in_band].sum(axis=(0, 2))
    total = spec.sum(axis=(0, 2))

    sd = power.std()
    # flat band power (e.g. pure in-band-free signals) carries no outliers
    if len(power) < 2 or sd <= 1e-9 * max(total.mean(), np.finfo(float).tiny):
        return ArtifactAnnotations()
    z = (power - power.mean()) / sd
    spans = [Span(int(s), int(s) + w - 1, "muscle") for s in starts[z > z_threshold]]
    return ArtifactAnnotations(tuple(spans))
