"""Per-cell descriptive statistics and box-plot summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class Descriptives:
    n: int
    mean: float
    ci_low: float
    ci_high: float
    median: float
    se: float
    sd: float
    minimum: float
    maximum: float
    q1: float
    q3: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def describe(x, confidence: float = 0.95) -> Descriptives:
    """Mean with a t-based confidence interval, median, SE, SD (ddof=1), range and quartiles.

    Quartiles use linear interpolation between order statistics.
    """
    x = np.asarray(x, dtype=float).ravel()
    n = len(x)
    if n < 2:
        raise ValueError(f"need at least 2 values, got {n}")
    mean = float(x.mean())
    sd = float(x.std(ddof=1))
    se = sd / math.sqrt(n)
    half = float(stats.t.ppf(0.5 + confidence / 2, n - 1)) * se
    q1, med, q3 = (float(v) for v in np.percentile(x, [25, 50, 75]))
    return Descriptives(n, mean, mean - half, mean + half, med, se, sd, float(x.min()), float(x.max()), q1, q3)
