"""Pearson correlation matrices and Fisher-z pooling."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from ..errors import DegenerateInputError, DesignError

CLIP = 1.0 - 1e-7


@dataclass(frozen=True)
class CorrelationMatrix:
    labels: tuple
    r: np.ndarray = field(repr=False)
    n: int = 0

    def __post_init__(self):
        r = np.array(self.r, dtype=float)
        r.setflags(write=False)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "labels", tuple(self.labels))
        k = len(self.labels)
        if r.shape != (k, k):
            raise ValueError(f"r has shape {r.shape}, expected ({k}, {k})")

    def get(self, a: str, b: str) -> float:
        return float(self.r[self.labels.index(a), self.labels.index(b)])

    def to_dict(self) -> dict:
        return {"labels": list(self.labels), "n": self.n, "r": self.r.tolist()}


def pearson_matrix(columns: dict) -> CorrelationMatrix:
    """Pairwise Pearson r of equally long named columns."""
    labels = tuple(columns)
    data = [np.asarray(columns[k], dtype=float) for k in labels]
    lengths = {len(d) for d in data}
    if len(lengths) != 1:
        raise ValueError(f"columns differ in length: {sorted(lengths)}")
    n = lengths.pop()
    if n < 3:
        raise ValueError(f"need at least 3 observations, got {n}")
    x = np.vstack(data)
    xc = x - x.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.sum(xc * xc, axis=1))
    for label, d, nm in zip(labels, x, norms):
        if nm == 0 or np.all(d == d[0]):
            raise DegenerateInputError(f"column {label!r} is constant; correlation undefined")
    z = xc / norms[:, None]
    r = np.clip(z @ z.T, -1.0, 1.0)
    np.fill_diagonal(r, 1.0)
    r = (r + r.T) / 2.0
    return CorrelationMatrix(labels, r, n)


def fisher_pool(mats, weighting: str = "auto") -> CorrelationMatrix:
    """Average correlation matrices in Fisher-z space.

    ``weighting`` is ``"auto"`` (default), ``"equal"`` or ``"n-3"``; auto uses ``n - 3`` weights
    only when the sample sizes differ. Off-diagonal entries at +-1 are
    clipped to ``+-(1 - 1e-7)`` with a warning.
    """
    mats = list(mats)
    if not mats:
        raise ValueError("nothing to pool")
    labels = mats[0].labels
    for m in mats[1:]:
        if m.labels != labels:
            raise DesignError(f"label mismatch: {m.labels} vs {labels}")
    sizes = np.array([m.n for m in mats], dtype=float)
    if weighting == "auto":
        weighting = "n-3" if len(set(sizes.tolist())) > 1 else "equal"
    if weighting == "equal":
        w = np.ones(len(mats))
    elif weighting == "n-3":
        w = sizes - 3.0
        if np.any(w <= 0):
            raise ValueError("n - 3 weighting needs every matrix to have n > 3")
    else:
        raise ValueError(f"unknown weighting {weighting!r}")

    stack = np.array([m.r for m in mats])
    off = ~np.eye(len(labels), dtype=bool)
    if np.any(np.abs(stack[:, off]) > CLIP):
        warnings.warn("correlations at +-1 clipped before the z-transform", RuntimeWarning, stacklevel=2)
    z = np.arctanh(np.clip(stack, -CLIP, CLIP))
    zbar = np.tensordot(w / w.sum(), z, axes=1)
    r = np.tanh(zbar)
    np.fill_diagonal(r, 1.0)
    return CorrelationMatrix(labels, r, int(sizes.sum()))
