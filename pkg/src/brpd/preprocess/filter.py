"""Linear-phase FIR bandpass design (windowed sinc) and zero-phase application."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from ..errors import FilterDesignError, SignalLengthError
from ..ingest import Recording

# transition width (in units of fs / N) spanned by the main lobe of each window
LENGTH_FACTORS = {"hamming": 3.3}


def filter_length(trans_bandwidth: float, sampling_rate: float, window: str = "hamming") -> int:
    """Smallest odd length giving ``trans_bandwidth`` Hz for ``window``."""
    if trans_bandwidth <= 0:
        raise FilterDesignError(f"transition bandwidth must be positive, got {trans_bandwidth}")
    n = math.ceil(LENGTH_FACTORS[window] * sampling_rate / trans_bandwidth - 1e-9)
    return n + 1 - n % 2


@dataclass(frozen=True)
class FilterSpec:
    """Bandpass edges and transition widths, all in Hz.

    ``length`` is the combined filter length in samples; left as ``None`` it
    is derived from the narrower transition band when the filter is designed.
    """

    l_freq: float = 1.0
    h_freq: float = 40.0
    l_trans_bandwidth: float = 1.0
    h_trans_bandwidth: float = 10.0
    window: str = "hamming"
    length: int | None = None

    @property
    def l_cutoff(self) -> float:
        """-6 dB frequency of the highpass edge."""
        return self.l_freq - self.l_trans_bandwidth / 2.0

    @property
    def h_cutoff(self) -> float:
        return self.h_freq + self.h_trans_bandwidth / 2.0

    def validate(self, sampling_rate: float) -> None:
        nyq = sampling_rate / 2.0
        if self.window not in LENGTH_FACTORS:
            raise FilterDesignError(f"unsupported window {self.window!r}")
        if not 0 < self.l_freq < self.h_freq < nyq:
            raise FilterDesignError(
                f"need 0 < l_freq < h_freq < {nyq} Hz, got {self.l_freq}, {self.h_freq}"
            )
        if self.l_trans_bandwidth <= 0 or self.h_trans_bandwidth <= 0:
            raise FilterDesignError("transition bandwidths must be positive")
        if self.l_freq - self.l_trans_bandwidth < 0:
            raise FilterDesignError(
                f"lower transition band ({self.l_trans_bandwidth} Hz) extends below 0 Hz"
            )
        if self.h_freq + self.h_trans_bandwidth > nyq:
            raise FilterDesignError(
                f"upper transition band ({self.h_trans_bandwidth} Hz) extends past Nyquist ({nyq} Hz)"
            )
        if self.length is not None and self.length % 2 == 0:
            raise FilterDesignError(f"filter length must be odd, got {self.length}")

    def section_lengths(self, sampling_rate: float) -> tuple[int, int]:
        """(highpass length, lowpass length) in samples."""
        return (
            filter_length(self.l_trans_bandwidth, sampling_rate, self.window),
            filter_length(self.h_trans_bandwidth, sampling_rate, self.window),
        )


def lowpass_taps(numtaps: int, cutoff: float, sampling_rate: float, window: str = "hamming") -> np.ndarray:
    """Windowed-sinc lowpass with unit DC gain; ``cutoff`` is the -6 dB point in Hz."""
    fc = cutoff / sampling_rate
    m = np.arange(numtaps) - (numtaps - 1) / 2.0
    h = 2 * fc * np.sinc(2 * fc * m)
    if window == "hamming":
        h = h * np.hamming(numtaps)
    else:
        raise FilterDesignError(f"unsupported window {window!r}")
    return h / h.sum()


def design_bandpass(sampling_rate: float, spec: FilterSpec = FilterSpec()) -> np.ndarray:
    """Design the combined bandpass taps.

    The highpass and lowpass edges are designed as two windowed-sinc lowpass
    sections of their own length. The bandpass is the centred difference
    ``lowpass(h_cutoff) - lowpass(l_cutoff)``, so its length equals the longer
    section (845 samples for the default 1-40 Hz design at 256 Hz).
    """
    spec.validate(sampling_rate)
    n_hp, n_lp = spec.section_lengths(sampling_rate)
    n = spec.length if spec.length is not None else max(n_hp, n_lp)
    if n < max(n_hp, n_lp):
        raise FilterDesignError(
            f"filter length {n} is shorter than the {max(n_hp, n_lp)} samples "
            "needed for the requested transition bands"
        )
    taps = np.zeros(n)
    lp = lowpass_taps(n_lp, spec.h_cutoff, sampling_rate, spec.window)
    off = (n - n_lp) // 2
    taps[off:off + n_lp] += lp
    hp = lowpass_taps(n_hp, spec.l_cutoff, sampling_rate, spec.window)
    off = (n - n_hp) // 2
    taps[off:off + n_hp] -= hp
    return taps


def frequency_response(taps, freqs, sampling_rate: float) -> np.ndarray:
    """Magnitude of the DTFT of ``taps`` at ``freqs`` (Hz), delay removed."""
    taps = np.asarray(taps, dtype=float)
    freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
    n = np.arange(len(taps))
    phase = np.exp(-2j * np.pi * np.outer(freqs / sampling_rate, n))
    return np.abs(phase @ taps)


def describe_filter(sampling_rate: float, spec: FilterSpec = FilterSpec(), n_grid: int = 1 << 16) -> dict:
    """Summary figures for a designed filter, lengths, cutoff gains, ripple and stopband."""
    taps = design_bandpass(sampling_rate, spec)
    n_hp, n_lp = spec.section_lengths(sampling_rate)
    grid = np.linspace(0, sampling_rate / 2, n_grid)
    mag = np.abs(np.fft.rfft(taps, 2 * (n_grid - 1)))
    passband = (grid >= spec.l_freq) & (grid <= spec.h_freq)
    stop = (grid <= spec.l_freq - spec.l_trans_bandwidth) | (grid >= spec.h_freq + spec.h_trans_bandwidth)
    cut = frequency_response(taps, [spec.l_cutoff, spec.h_cutoff], sampling_rate)
    return {
        "window": spec.window,
        "length": len(taps),
        "highpass_length": n_hp,
        "highpass_seconds": n_hp / sampling_rate,
        "lowpass_length": n_lp,
        "lowpass_seconds": n_lp / sampling_rate,
        "l_cutoff_hz": spec.l_cutoff,
        "h_cutoff_hz": spec.h_cutoff,
        "l_cutoff_db": float(20 * np.log10(cut[0])),
        "h_cutoff_db": float(20 * np.log10(cut[1])),
        "passband_ripple": float(np.max(np.abs(mag[passband] - 1.0))),
        "stopband_attenuation_db": float(-20 * np.log10(np.max(mag[stop]))),
    }


def _zero_phase(x: np.ndarray, taps: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    pad = min(len(taps) - 1, n - 1)
    padded = np.pad(x, [(0, 0)] * (x.ndim - 1) + [(pad, pad)], mode="reflect")
    full = fftconvolve(padded, taps[np.newaxis, :] if x.ndim == 2 else taps, mode="full", axes=-1)
    delay = (len(taps) - 1) // 2
    return full[..., pad + delay: pad + delay + n]


def filter_recording(rec: Recording, taps) -> Recording:
    """Apply linear-phase ``taps`` without phase shift.

    The signal is reflection-padded by one filter length at both ends,
    convolved once, and shifted back by the group delay. Output length equals
    input length.
    """
    taps = np.asarray(taps, dtype=float)
    if len(taps) % 2 == 0:
        raise FilterDesignError("zero-phase application needs an odd number of taps")
    if rec.n_samples <= len(taps):
        raise SignalLengthError(
            f"recording has {rec.n_samples} samples, shorter than the {len(taps)}-tap filter"
        )
    return rec.with_samples(_zero_phase(rec.samples, taps))
