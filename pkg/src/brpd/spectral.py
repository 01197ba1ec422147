"""Multitaper power spectra and band-power integration."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .errors import DpssParameterError, ResolutionError, SpectralRangeError
from .ingest import Recording, SegmentedRecording

BANDS = {
    "delta": (1.0, 4.0),
    "theta": (4.0, 8.0),
    "alpha": (8.0, 13.0),
    "beta": (13.0, 30.0),
}
BAND_NAMES = ("delta", "theta", "alpha", "beta")
SEGMENTS = ("baseline", "task")
MIN_SEGMENT_SECONDS = 4.0


@dataclass(frozen=True)
class DpssSet:
    n: int
    nw: float
    tapers: np.ndarray = field(repr=False)
    eigenvalues: np.ndarray = field(repr=False)

    @property
    def k(self) -> int:
        return self.tapers.shape[0]


def concentration(taper, half_bandwidth: float) -> float:
    """Fraction of a window's energy inside ``[-W, W]`` cycles/sample.

    Evaluates ``v^T A v`` with the sinc kernel
    ``A[i, j] = sin(2 pi W (i - j)) / (pi (i - j))`` through the taper's
    autocorrelation.
    """
    v = np.asarray(taper, dtype=float)
    v = v / np.linalg.norm(v)
    n = len(v)
    nfft = 1 << (2 * n - 1).bit_length()
    spec = np.fft.rfft(v, nfft)
    acf = np.fft.irfft(np.abs(spec) ** 2, nfft)[:n]
    lags = np.arange(1, n)
    kernel = np.sin(2 * np.pi * half_bandwidth * lags) / (np.pi * lags)
    return float(2 * half_bandwidth * acf[0] + 2 * np.dot(acf[1:], kernel))


def default_n_tapers(nw: float) -> int:
    return max(1, int(math.floor(2 * nw)) - 1)


def compute_dpss(n: int, nw: float = 4.0, k: int | None = None) -> DpssSet:
    """Discrete prolate spheroidal sequences of length ``n``.

    Tapers are the leading eigenvectors of the symmetric tridiagonal matrix
    that commutes with the time-frequency concentration operator; eigenvalues
    are the concentration ratios on ``[-nw/n, nw/n]``. Symmetric tapers have a
    positive sum, antisymmetric ones a positive first significant sample.
    """
    if k is None:
        k = default_n_tapers(nw)
    if n < 2 or not 0 < nw < n / 2 or not 1 <= k <= 2 * nw or k > n:
        raise DpssParameterError(f"invalid DPSS parameters n={n}, nw={nw}, k={k}")
    w = nw / n
    i = np.arange(n)
    diag = ((n - 1 - 2 * i) / 2.0) ** 2 * np.cos(2 * np.pi * w)
    off = i[1:] * (n - i[1:]) / 2.0
    _, vecs = eigh_tridiagonal(diag, off, select="i", select_range=(n - k, n - 1))
    tapers = vecs[:, ::-1].T.copy()
    thresh = max(1e-7, 1.0 / n)
    for order, taper in enumerate(tapers):
        if order % 2 == 0:
            flip = taper.sum() < 0
        else:
            flip = taper[taper * taper > thresh][0] < 0
        if flip:
            tapers[order] = -taper
    tapers /= np.linalg.norm(tapers, axis=1, keepdims=True)
    eig = np.array([concentration(t, w) for t in tapers])
    return DpssSet(n, float(nw), tapers, eig)


@dataclass(frozen=True)
class PowerSpectrum:
    """One-sided power spectral density per channel, in V^2/Hz."""

    freqs: np.ndarray = field(repr=False)
    psd: np.ndarray = field(repr=False)
    channel_labels: tuple = ()
    sampling_rate: float = 0.0
    n_fft: int = 0

    @property
    def fmax(self) -> float:
        return float(self.freqs[-1])

    @property
    def df(self) -> float:
        return self.sampling_rate / self.n_fft


def multitaper_psd(rec: Recording, nw: float = 4.0, fmax: float | None = None, k: int | None = None) -> PowerSpectrum:
    """Eigenvalue-weighted multitaper PSD of each channel.

    The mean is removed, each DPSS-tapered copy is transformed on an
    ``n``-point grid, and the tapered periodograms are averaged with the
    concentration ratios as weights. Densities are one-sided, so summing
    ``psd * df`` from 0 to Nyquist recovers the signal variance.
    """
    fs = rec.sampling_rate
    nyq = fs / 2
    if fmax is None:
        fmax = nyq
    if fmax > nyq:
        raise SpectralRangeError(f"fmax={fmax} Hz exceeds Nyquist ({nyq} Hz)")
    n = rec.n_samples
    if n < 2:
        raise ResolutionError("need at least 2 samples for a spectrum")
    x = rec.samples - rec.samples.mean(axis=1, keepdims=True)
    dp = compute_dpss(n, nw, k)
    weights = dp.eigenvalues / dp.eigenvalues.sum()
    psd = np.zeros((rec.n_channels, n // 2 + 1))
    for taper, wk in zip(dp.tapers, weights):
        psd += wk * np.abs(np.fft.rfft(x * taper, n, axis=-1)) ** 2
    psd /= fs
    if n % 2 == 0:
        psd[:, 1:-1] *= 2
    else:
        psd[:, 1:] *= 2
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    keep = freqs <= fmax + 1e-9 * fs
    return PowerSpectrum(freqs[keep], psd[:, keep], rec.channel_labels, fs, n)


def simpson(y, dx: float) -> np.ndarray:
    """Composite Simpson's rule on equally spaced samples along the last axis.

    With an odd number of intervals the final interval uses the trapezoid rule.
    """
    y = np.asarray(y, dtype=float)
    m = y.shape[-1] - 1
    if m < 1:
        raise ValueError("need at least two samples to integrate")
    if m == 1:
        return dx * (y[..., 0] + y[..., 1]) / 2.0
    even = m if m % 2 == 0 else m - 1
    s = y[..., 0] + y[..., even] + 4 * y[..., 1:even:2].sum(axis=-1) + 2 * y[..., 2:even:2].sum(axis=-1)
    total = dx * s / 3.0
    if even != m:
        total = total + dx * (y[..., -2] + y[..., -1]) / 2.0
    return total


def band_power(spec: PowerSpectrum, band) -> np.ndarray:
    """Integrate ``spec`` over ``band = (low, high)`` Hz, one value per channel.

    Band edges snap to the nearest grid frequency.
    """
    low, high = float(band[0]), float(band[1])
    f = spec.freqs
    df = f[1] - f[0] if len(f) > 1 else spec.df
    if not low < high:
        raise SpectralRangeError(f"band {band} must have low < high")
    if low < f[0] - df / 2 or high > f[-1] + df / 2:
        raise SpectralRangeError(f"band {band} Hz outside spectrum grid [{f[0]}, {f[-1]}] Hz")
    i0 = int(round((low - f[0]) / df))
    i1 = int(round((high - f[0]) / df))
    if i1 <= i0:
        raise ResolutionError(f"band {band} is narrower than the {df:.4g} Hz grid spacing")
    return simpson(spec.psd[..., i0:i1 + 1], df)


@dataclass(frozen=True)
class BandPowerRow:
    channel: str
    segment: str
    delta: float
    theta: float
    alpha: float
    beta: float

    @property
    def brain(self) -> float:
        return self.delta + self.theta + self.alpha + self.beta

    def band(self, name: str) -> float:
        if name == "brain":
            return self.brain
        return getattr(self, name)


@dataclass(frozen=True)
class BandPowerTable:
    """Absolute band powers (V^2) per channel and segment of one recording."""

    source_id: str
    rows: tuple

    def row(self, channel: str, segment: str) -> BandPowerRow:
        for r in self.rows:
            if r.channel == channel and r.segment == segment:
                return r
        raise KeyError((channel, segment))

    CSV_COLUMNS = ("source_id", "channel", "segment", "delta", "theta", "alpha", "beta", "brain")

    def csv_rows(self):
        for r in self.rows:
            yield [self.source_id, r.channel, r.segment,
                   repr(r.delta), repr(r.theta), repr(r.alpha), repr(r.beta), repr(r.brain)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.CSV_COLUMNS)
            writer.writerows(self.csv_rows())


def band_power_table(
    seg: SegmentedRecording,
    nw: float = 4.0,
    bands: dict | None = None,
    fmax: float | None = 128.0,
    k: int | None = None,
) -> BandPowerTable:
    """Delta/theta/alpha/beta powers for both segments of ``seg``."""
    bands = dict(BANDS if bands is None else bands)
    rows = []
    for name, rec in (("baseline", seg.baseline), ("task", seg.task)):
        if rec.duration < MIN_SEGMENT_SECONDS:
            raise ResolutionError(
                f"{seg.source_id}: {name} segment is {rec.duration:.2f} s; "
                f"at least {MIN_SEGMENT_SECONDS:g} s is needed to resolve the theta band"
            )
        top = min(fmax, rec.sampling_rate / 2) if fmax is not None else None
        spec = multitaper_psd(rec, nw=nw, fmax=top, k=k)
        powers = {b: band_power(spec, bands[b]) for b in BAND_NAMES}
        for ci, ch in enumerate(rec.channel_labels):
            rows.append(BandPowerRow(ch, name, *(float(powers[b][ci]) for b in BAND_NAMES)))
    return BandPowerTable(seg.source_id, tuple(rows))
