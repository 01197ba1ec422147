"""Reading recordings, choosing channels and cutting baseline/task segments.

EDF files are parsed directly (classic EDF, 16-bit little-endian samples).
EDF+ annotation signals are recognised by label and skipped.
"""

from __future__ import annotations

import calendar
import json
import logging
import math
import os
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ChannelError,
    EdfCalibrationError,
    EdfError,
    EdfHeaderError,
    EdfTruncationError,
    SegmentError,
)

log = logging.getLogger(__name__)

ANNOTATION_LABEL = "EDF Annotations"

# physical dimension label -> factor to volts
_UNIT_SCALE = {
    "v": 1.0,
    "mv": 1e-3,
    "uv": 1e-6,
    "µv": 1e-6,
    "μv": 1e-6,
    "nv": 1e-9,
}


@dataclass(frozen=True)
class Recording:
    """Multichannel EEG time series.

    Parameters
    ----------
    channel_labels : tuple of str
        Unique 10-20 names, one per row of ``samples``.
    sampling_rate : float
        Samples per second.
    samples : ndarray, shape (n_channels, n_samples)
        Voltages in volts. Stored read-only.
    start_time : float, optional
        Seconds since the epoch of the first sample.
    """

    channel_labels: tuple
    sampling_rate: float
    samples: np.ndarray = field(repr=False)
    start_time: float | None = None

    def __post_init__(self):
        labels = tuple(str(c) for c in self.channel_labels)
        object.__setattr__(self, "channel_labels", labels)
        data = np.array(self.samples, dtype=float, copy=True)
        if data.ndim == 1:
            data = data[np.newaxis, :]
        if data.ndim != 2:
            raise ValueError("samples must be a 2-D array (channels x samples)")
        if data.shape[0] != len(labels):
            raise ValueError(
                f"{len(labels)} labels given for {data.shape[0]} channels"
            )
        if len(set(labels)) != len(labels):
            raise ValueError(f"channel labels must be unique: {labels}")
        if not self.sampling_rate > 0:
            raise ValueError("sampling_rate must be positive")
        data.setflags(write=False)
        object.__setattr__(self, "samples", data)
        object.__setattr__(self, "sampling_rate", float(self.sampling_rate))

    @property
    def n_channels(self) -> int:
        return self.samples.shape[0]

    @property
    def n_samples(self) -> int:
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        return self.n_samples / self.sampling_rate

    def with_samples(self, samples) -> "Recording":
        """Same metadata, new sample matrix."""
        return Recording(self.channel_labels, self.sampling_rate, samples, self.start_time)


@dataclass(frozen=True)
class SegmentMarkers:
    """Times (seconds from recording start) delimiting baseline and task."""

    t_start: float
    t_bl: float
    t_sketch_start: float
    t_sketch_end: float

    def __post_init__(self):
        for name in ("t_start", "t_bl", "t_sketch_start", "t_sketch_end"):
            value = float(getattr(self, name))
            if not math.isfinite(value) or value < 0:
                raise SegmentError(f"marker {name}={value} must be a finite time >= 0")
            object.__setattr__(self, name, value)
        if not self.t_start <= self.t_bl <= self.t_sketch_start:
            raise SegmentError(
                f"markers out of order: t_start={self.t_start}, t_bl={self.t_bl}, "
                f"t_sketch_start={self.t_sketch_start}"
            )
        if not self.t_sketch_start < self.t_sketch_end:
            raise SegmentError(
                f"empty task span: t_sketch_start={self.t_sketch_start} "
                f">= t_sketch_end={self.t_sketch_end}"
            )

    def to_dict(self) -> dict:
        return {
            "t_start": self.t_start,
            "t_bl": self.t_bl,
            "t_sketch_start": self.t_sketch_start,
            "t_sketch_end": self.t_sketch_end,
        }


@dataclass(frozen=True)
class SegmentedRecording:
    baseline: Recording
    task: Recording
    source_id: str

    def __post_init__(self):
        if self.baseline.n_samples == 0 or self.task.n_samples == 0:
            raise SegmentError(f"{self.source_id}: baseline and task must be nonempty")


def load_markers(path) -> SegmentMarkers:
    """Read a marker sidecar JSON file (keys t_start, t_bl, t_sketch_start, t_sketch_end)."""
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    try:
        return SegmentMarkers(
            payload["t_start"], payload["t_bl"], payload["t_sketch_start"], payload["t_sketch_end"]
        )
    except KeyError as exc:
        raise SegmentError(f"{path}: marker file is missing key {exc.args[0]!r}") from None


def save_markers(markers: SegmentMarkers, path, **extra) -> None:
    payload = markers.to_dict()
    payload.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def select_channels(rec: Recording, labels) -> Recording:
    """Restrict ``rec`` to ``labels``, in the requested order."""
    labels = list(labels)
    missing = [lab for lab in labels if lab not in rec.channel_labels]
    if missing:
        raise ChannelError(
            f"unknown channel(s) {missing}; available: {list(rec.channel_labels)}"
        )
    idx = [rec.channel_labels.index(lab) for lab in labels]
    return Recording(tuple(labels), rec.sampling_rate, rec.samples[idx], rec.start_time)


def time_to_index(t: float, sampling_rate: float) -> int:
    # Python's round() is round-half-to-even
    return int(round(t * sampling_rate))


def segment(rec: Recording, markers: SegmentMarkers, source_id: str = "") -> SegmentedRecording:
    """Cut ``rec`` into baseline ``[t_start, t_bl)`` and task ``[t_sketch_start, t_sketch_end)``."""
    duration = rec.duration
    for name, value in markers.to_dict().items():
        if value > duration + 0.5 / rec.sampling_rate:
            raise SegmentError(
                f"marker {name}={value} s lies outside the recording ({duration:.3f} s)"
            )
    fs = rec.sampling_rate
    b0, b1 = time_to_index(markers.t_start, fs), time_to_index(markers.t_bl, fs)
    s0, s1 = time_to_index(markers.t_sketch_start, fs), time_to_index(markers.t_sketch_end, fs)
    b1, s1 = min(b1, rec.n_samples), min(s1, rec.n_samples)
    if b1 <= b0:
        raise SegmentError(f"empty baseline span [{markers.t_start}, {markers.t_bl}]")
    if s1 <= s0:
        raise SegmentError(
            f"empty task span [{markers.t_sketch_start}, {markers.t_sketch_end}]"
        )
    start = rec.start_time
    base = Recording(rec.channel_labels, fs, rec.samples[:, b0:b1],
                     None if start is None else start + b0 / fs)
    task = Recording(rec.channel_labels, fs, rec.samples[:, s0:s1],
                     None if start is None else start + s0 / fs)
    return SegmentedRecording(base, task, source_id)


# --------------------------------------------------------------------------- EDF

_FIXED_FIELDS = (
    ("version", 8),
    ("patient", 80),
    ("recording", 80),
    ("startdate", 8),
    ("starttime", 8),
    ("header_bytes", 8),
    ("reserved", 44),
    ("n_records", 8),
    ("record_duration", 8),
    ("n_signals", 4),
)

_SIGNAL_FIELDS = (
    ("label", 16),
    ("transducer", 80),
    ("physical_dimension", 8),
    ("physical_min", 8),
    ("physical_max", 8),
    ("digital_min", 8),
    ("digital_max", 8),
    ("prefiltering", 80),
    ("samples_per_record", 8),
    ("reserved", 32),
)


def _parse_number(raw: bytes, offset: int, name: str, kind=float):
    text = raw.decode("latin-1").strip()
    try:
        value = float(text) if kind is float else int(text)
    except ValueError:
        raise EdfHeaderError(f"field {name!r} is not a number: {text!r}", offset) from None
    if kind is float and not math.isfinite(value):
        raise EdfHeaderError(f"field {name!r} is not finite: {text!r}", offset)
    return value


def _parse_start_time(date: str, time_: str):
    try:
        dd, mm, yy = (int(p) for p in date.strip().split("."))
        hh, mi, ss = (int(p) for p in time_.strip().split("."))
    except ValueError:
        return None
    year = 1900 + yy if yy >= 85 else 2000 + yy
    try:
        return float(calendar.timegm((year, mm, dd, hh, mi, ss, 0, 0, 0)))
    except (ValueError, OverflowError):
        return None


def read_edf_header(fh) -> dict:
    """Parse the fixed and per-signal header blocks from an open binary file."""
    fixed = fh.read(256)
    if len(fixed) < 256:
        raise EdfHeaderError(f"file too short for an EDF header ({len(fixed)} bytes)", len(fixed))
    header = {}
    pos = 0
    for name, width in _FIXED_FIELDS:
        header[name] = fixed[pos:pos + width]
        header[f"_{name}_offset"] = pos
        pos += width
    version = header["version"].decode("latin-1").strip()
    if version != "0":
        raise EdfHeaderError(f"unsupported EDF version field {version!r}", 0)
    out = {
        "patient": header["patient"].decode("latin-1").strip(),
        "recording": header["recording"].decode("latin-1").strip(),
        "start_time": _parse_start_time(
            header["startdate"].decode("latin-1"), header["starttime"].decode("latin-1")
        ),
        "header_bytes": _parse_number(header["header_bytes"], 184, "header_bytes", int),
        "n_records": _parse_number(header["n_records"], 236, "n_records", int),
        "record_duration": _parse_number(header["record_duration"], 244, "record_duration"),
        "n_signals": _parse_number(header["n_signals"], 252, "n_signals", int),
    }
    ns = out["n_signals"]
    if ns < 1:
        raise EdfHeaderError(f"number of signals must be >= 1, got {ns}", 252)
    if out["header_bytes"] != 256 * (ns + 1):
        raise EdfHeaderError(
            f"header size {out['header_bytes']} does not match {ns} signals "
            f"(expected {256 * (ns + 1)})",
            184,
        )
    if out["record_duration"] <= 0:
        raise EdfHeaderError("data record duration must be positive", 244)

    block = fh.read(256 * ns)
    if len(block) < 256 * ns:
        raise EdfHeaderError("signal header block is truncated", 256 + len(block))
    pos = 0
    signals = {}
    for name, width in _SIGNAL_FIELDS:
        values = []
        for i in range(ns):
            raw = block[pos:pos + width]
            offset = 256 + pos
            if name in ("physical_min", "physical_max"):
                values.append(_parse_number(raw, offset, name))
            elif name in ("digital_min", "digital_max", "samples_per_record"):
                values.append(_parse_number(raw, offset, name, int))
            else:
                values.append(raw.decode("latin-1").strip())
            pos += width
        signals[name] = values
    for i, spr in enumerate(signals["samples_per_record"]):
        if spr < 1:
            raise EdfHeaderError(
                f"signal {i} declares {spr} samples per record",
                256 + ns * (16 + 80 + 8 * 6 + 80) + 8 * i,
            )
    out["signals"] = signals
    return out


def read_edf(path) -> Recording:
    """Read every non-annotation signal of an EDF file, in volts.

    Digital values ``d`` map to physical values through
    ``(d - digital_min) * (physical_max - physical_min) / (digital_max - digital_min) + physical_min``,
    then through the physical dimension label (uV, mV, V) to volts.

    Raises
    ------
    EdfHeaderError
        Malformed header field; the message carries the byte offset.
    EdfTruncationError
        Fewer complete data records than declared.
    EdfCalibrationError
        Degenerate physical or digital range.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        hdr = read_edf_header(fh)
        payload = fh.read()

    sig = hdr["signals"]
    ns = hdr["n_signals"]
    spr = np.asarray(sig["samples_per_record"], dtype=np.int64)
    record_bytes = int(spr.sum()) * 2
    found = len(payload) // record_bytes
    n_records = hdr["n_records"]
    if n_records == -1:
        n_records = found
    elif n_records < 0:
        raise EdfHeaderError(f"invalid number of data records {n_records}", 236)
    elif found < n_records:
        raise EdfTruncationError(n_records, found)
    if n_records == 0:
        raise EdfTruncationError(hdr["n_records"], 0)

    keep = [i for i in range(ns) if sig["label"][i] != ANNOTATION_LABEL]
    if not keep:
        raise EdfError(f"{path}: no signal channels besides annotations")
    rates = {spr[i] / hdr["record_duration"] for i in keep}
    if len(rates) != 1:
        raise EdfError(f"{path}: mixed sampling rates {sorted(rates)} are not supported")
    fs = rates.pop()

    raw = np.frombuffer(payload[: n_records * record_bytes], dtype="<i2")
    raw = raw.reshape(n_records, -1)
    starts = np.concatenate([[0], np.cumsum(spr)])
    data = np.empty((len(keep), n_records * int(spr[keep[0]])))
    for row, i in enumerate(keep):
        pmin, pmax = sig["physical_min"][i], sig["physical_max"][i]
        dmin, dmax = sig["digital_min"][i], sig["digital_max"][i]
        if pmin == pmax:
            raise EdfCalibrationError(
                f"{path}: channel {sig['label'][i]!r} has physical_min == physical_max ({pmin})"
            )
        if dmin == dmax:
            raise EdfCalibrationError(
                f"{path}: channel {sig['label'][i]!r} has digital_min == digital_max ({dmin})"
            )
        unit = sig["physical_dimension"][i].lower()
        if unit not in _UNIT_SCALE:
            warnings.warn(
                f"{path}: unknown physical dimension {sig['physical_dimension'][i]!r} "
                f"for {sig['label'][i]!r}; values left unscaled",
                stacklevel=2,
            )
        to_volts = _UNIT_SCALE.get(unit, 1.0)
        digital = raw[:, starts[i]:starts[i + 1]].reshape(-1).astype(float)
        scale = (pmax - pmin) / (dmax - dmin)
        data[row] = ((digital - dmin) * scale + pmin) * to_volts

    labels = tuple(sig["label"][i] for i in keep)
    return Recording(labels, fs, data, hdr["start_time"])


def _fit(value: str, width: int) -> bytes:
    encoded = value.encode("latin-1")
    if len(encoded) > width:
        raise ValueError(f"EDF field value {value!r} exceeds {width} characters")
    return encoded.ljust(width, b" ")


def _physical_bounds(x_uv: np.ndarray):
    lo = math.floor(float(np.min(x_uv))) if x_uv.size else -1
    hi = math.ceil(float(np.max(x_uv))) if x_uv.size else 1
    lo, hi = min(lo, -1), max(hi, 1)
    return lo, hi


def write_edf(rec: Recording, path, patient: str = "X", recording_id: str = "X") -> None:
    """Write ``rec`` as a classic EDF file with signals stored in microvolts.

    Each channel gets integer physical bounds enclosing its data and the full
    16-bit digital range, so re-reading reproduces the samples to within one
    quantization step ``(pmax - pmin) / 65535`` microvolts.
    """
    fs = rec.sampling_rate
    n = rec.n_samples
    if n == 0:
        raise ValueError("cannot write an empty recording")
    if float(fs).is_integer() and n % int(fs) == 0:
        spr, n_records, record_duration = int(fs), n // int(fs), 1.0
    else:
        spr, n_records, record_duration = n, 1, n / fs
    dur_text = f"{record_duration:.8g}"
    if len(dur_text) > 8:
        dur_text = f"{record_duration:.6f}"[:8]

    start = rec.start_time
    if start is None:
        date, time_ = "01.01.85", "00.00.00"
    else:
        tm = time.gmtime(start)
        date = f"{tm.tm_mday:02d}.{tm.tm_mon:02d}.{tm.tm_year % 100:02d}"
        time_ = f"{tm.tm_hour:02d}.{tm.tm_min:02d}.{tm.tm_sec:02d}"

    ns = rec.n_channels
    dmin, dmax = -32768, 32767
    x_uv = rec.samples * 1e6
    bounds = [_physical_bounds(row) for row in x_uv]

    head = b"".join([
        _fit("0", 8),
        _fit(patient[:80], 80),
        _fit(recording_id[:80], 80),
        _fit(date, 8),
        _fit(time_, 8),
        _fit(str(256 * (ns + 1)), 8),
        _fit("", 44),
        _fit(str(n_records), 8),
        _fit(dur_text, 8),
        _fit(str(ns), 4),
    ])
    per_signal = [
        [_fit(lab[:16], 16) for lab in rec.channel_labels],
        [_fit("", 80)] * ns,
        [_fit("uV", 8)] * ns,
        [_fit(str(lo), 8) for lo, _ in bounds],
        [_fit(str(hi), 8) for _, hi in bounds],
        [_fit(str(dmin), 8)] * ns,
        [_fit(str(dmax), 8)] * ns,
        [_fit("", 80)] * ns,
        [_fit(str(spr), 8)] * ns,
        [_fit("", 32)] * ns,
    ]
    head += b"".join(b"".join(group) for group in per_signal)

    digital = np.empty((ns, n), dtype="<i2")
    for i, (lo, hi) in enumerate(bounds):
        scale = (hi - lo) / (dmax - dmin)
        d = np.round((x_uv[i] - lo) / scale + dmin)
        digital[i] = np.clip(d, dmin, dmax).astype("<i2")
    body = digital.reshape(ns, n_records, spr).transpose(1, 0, 2).tobytes()

    tmp = Path(str(path) + ".part")
    with open(tmp, "wb") as fh:
        fh.write(head)
        fh.write(body)
    os.replace(tmp, path)
