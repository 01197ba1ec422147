"""FastICA (log-cosh contrast, symmetric decorrelation) and component removal."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from ..errors import ChannelError, WhiteningError
from ..ingest import Recording
from .artifacts import ArtifactAnnotations

log = logging.getLogger(__name__)

FRONTAL_CHANNELS = ("AF3", "F7", "F3", "FC5", "FC6", "F4", "F8", "AF4")


@dataclass(frozen=True)
class IcaModel:
    """Fitted decomposition ``sources = unmixing @ (x - mean)``.

    ``unmixing = rotation @ whitener`` where ``whitener`` maps centred channel
    data to unit-variance, uncorrelated signals and ``rotation`` is orthonormal.
    ``mixing`` is the right inverse of ``unmixing``.
    """

    channel_labels: tuple
    mean: np.ndarray = field(repr=False)
    whitener: np.ndarray = field(repr=False)
    rotation: np.ndarray = field(repr=False)
    converged: bool = False
    iterations_used: int = 0

    @property
    def n_components(self) -> int:
        return self.rotation.shape[0]

    @property
    def unmixing(self) -> np.ndarray:
        return self.rotation @ self.whitener

    @property
    def mixing(self) -> np.ndarray:
        return np.linalg.pinv(self.whitener) @ self.rotation.T

    def sources(self, rec: Recording) -> np.ndarray:
        x = _model_rows(rec, self)
        return self.unmixing @ (x - self.mean[:, None])

    def to_dict(self) -> dict:
        return {
            "channel_labels": list(self.channel_labels),
            "n_components": self.n_components,
            "mean": self.mean.tolist(),
            "whitener": self.whitener.tolist(),
            "rotation": self.rotation.tolist(),
            "unmixing": self.unmixing.tolist(),
            "mixing": self.mixing.tolist(),
            "converged": self.converged,
            "iterations_used": self.iterations_used,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "IcaModel":
        return cls(
            tuple(payload["channel_labels"]),
            np.asarray(payload["mean"], dtype=float),
            np.asarray(payload["whitener"], dtype=float),
            np.asarray(payload["rotation"], dtype=float),
            bool(payload["converged"]),
            int(payload["iterations_used"]),
        )

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def from_json(cls, path) -> "IcaModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _model_rows(rec: Recording, model: IcaModel) -> np.ndarray:
    missing = [c for c in model.channel_labels if c not in rec.channel_labels]
    if missing:
        raise ChannelError(f"recording lacks ICA channels {missing}")
    idx = [rec.channel_labels.index(c) for c in model.channel_labels]
    return rec.samples[idx]


def _sym_decorrelate(w: np.ndarray) -> np.ndarray:
    """``(W W^T)^(-1/2) W``: the nearest matrix with orthonormal rows."""
    s, u = np.linalg.eigh(w @ w.T)
    s = np.clip(s, np.finfo(float).tiny, None)
    return (u * (1.0 / np.sqrt(s))) @ u.T @ w


def whiten(x: np.ndarray, n_components: int):
    """Eigen-decomposition whitening of centred data ``x`` (channels x samples).

    Returns the whitening matrix (components x channels). Eigenvectors are
    ordered by decreasing variance and sign-fixed so their largest-magnitude
    loading is positive.
    """
    cov = x @ x.T / x.shape[1]
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    top = evals[0]
    if not top > 0:
        raise WhiteningError("channel covariance is zero")
    kept = evals[:n_components]
    if kept[-1] <= top * 1e-12:
        raise WhiteningError(
            f"covariance is rank deficient: component {n_components} has variance "
            f"{kept[-1]:.3g} vs {top:.3g}; reduce n_components"
        )
    vecs = evecs[:, :n_components]
    flip = np.sign(vecs[np.argmax(np.abs(vecs), axis=0), np.arange(n_components)])
    vecs = vecs * flip
    return vecs.T / np.sqrt(kept)[:, None]


def fit_fastica(
    rec: Recording,
    annotations: ArtifactAnnotations | None = None,
    n_components: int | None = None,
    max_iter: int = 15000,
    tol: float = 1e-4,
    seed: int = 0,
    alpha: float = 1.0,
) -> IcaModel:
    """Fit FastICA on all channels of ``rec``, ignoring annotated samples.

    The contrast is ``G(u) = log cosh(alpha u) / alpha``. Iteration stops when
    the largest change ``max |1 - |diag(W_new W_old^T)||`` drops below ``tol``;
    if ``max_iter`` is reached first the model is returned with
    ``converged=False``.
    """
    n_ch = rec.n_channels
    if n_components is None:
        n_components = n_ch
    if not 1 <= n_components <= n_ch:
        raise ValueError(f"n_components must be in [1, {n_ch}], got {n_components}")
    x = rec.samples
    if annotations is not None and len(annotations):
        x = x[:, ~annotations.mask(rec.n_samples)]
    if x.shape[1] <= n_ch:
        raise WhiteningError(
            f"only {x.shape[1]} clean samples left for {n_ch} channels after annotation"
        )
    mean = x.mean(axis=1)
    xc = x - mean[:, None]
    k = whiten(xc, n_components)
    z = k @ xc
    m = z.shape[1]

    rng = np.random.default_rng(seed)
    w = _sym_decorrelate(rng.standard_normal((n_components, n_components)))
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = np.tanh(alpha * (w @ z))
        g_prime = alpha * (1.0 - g ** 2).mean(axis=1)
        w_new = _sym_decorrelate(g @ z.T / m - g_prime[:, None] * w)
        change = np.max(np.abs(np.abs(np.einsum("ij,ij->i", w_new, w)) - 1.0))
        w = w_new
        if change < tol:
            converged = True
            break
    if not converged:
        log.warning("FastICA did not converge in %d iterations (last change %.3g)", max_iter, change)
    return IcaModel(rec.channel_labels, mean, k, w, converged, it)


def remove_components(rec: Recording, model: IcaModel, reject) -> Recording:
    """Subtract the back-projection of the ``reject`` components.

    Channels of ``rec`` outside the model pass through unchanged. With an
    empty ``reject`` list the input is returned unaltered; rejecting every
    component of a full-rank model leaves the channel means.
    """
    reject = sorted({int(i) for i in reject})
    bad = [i for i in reject if not 0 <= i < model.n_components]
    if bad:
        raise IndexError(f"component indices {bad} out of range for {model.n_components} components")
    if not reject:
        return rec.with_samples(rec.samples)
    idx = [rec.channel_labels.index(c) for c in model.channel_labels if c in rec.channel_labels]
    if len(idx) != len(model.channel_labels):
        _model_rows(rec, model)  # raises with the missing labels
    x = rec.samples[idx]
    src = model.unmixing[reject] @ (x - model.mean[:, None])
    out = np.array(rec.samples, copy=True)
    out[idx] = x - model.mixing[:, reject] @ src
    return rec.with_samples(out)


def _fft_bandpass(x: np.ndarray, fs: float, band) -> np.ndarray:
    spec = np.fft.rfft(x, axis=-1)
    f = np.fft.rfftfreq(x.shape[-1], 1.0 / fs)
    spec[..., (f < band[0]) | (f > band[1])] = 0
    return np.fft.irfft(spec, n=x.shape[-1], axis=-1)


def suggest_eog_components(
    rec: Recording,
    model: IcaModel,
    reference=("AF3", "AF4"),
    band=(1.0, 3.0),
    threshold: float = 0.7,
) -> list[int]:
    """Candidate ocular components.

    A component is suggested when its ``band``-limited time course correlates
    with the ``band``-limited mean of the ``reference`` channels above
    ``threshold`` in absolute value. Results are ordered by decreasing |r|.
    """
    ref_idx = [rec.channel_labels.index(c) for c in reference if c in rec.channel_labels]
    if not ref_idx:
        raise ChannelError(f"none of the reference channels {list(reference)} present")
    fs = rec.sampling_rate
    ref = _fft_bandpass(rec.samples[ref_idx].mean(axis=0), fs, band)
    src = _fft_bandpass(model.sources(rec), fs, band)
    ref = ref - ref.mean()
    src = src - src.mean(axis=1, keepdims=True)
    denom = np.linalg.norm(src, axis=1) * np.linalg.norm(ref)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(denom > 0, src @ ref / denom, 0.0)
    hits = [int(i) for i in np.argsort(-np.abs(r)) if abs(r[i]) > threshold]
    return hits
