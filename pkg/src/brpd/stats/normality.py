"""Shapiro-Wilk (Royston 1995 algorithm) and Lilliefors-corrected KS normality tests."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from ..errors import DegenerateInputError

# Royston's polynomial approximations, ascending powers
_C1 = (0.0, 0.221157, -0.147981, -2.071190, 4.434685, -2.706056)
_C2 = (0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633)
_C3 = (0.5440, -0.39978, 0.025054, -6.714e-4)
_C4 = (1.3822, -0.77857, 0.062767, -0.0020322)
_C5 = (-1.5861, -0.31082, -0.083751, 0.0038915)
_C6 = (-0.4803, -0.082676, 0.0030302)
_G = (-2.273, 0.459)
_SMALL = 1e-19

LILLIEFORS_CENSOR = 0.200


def _poly(coefs, x):
    out = 0.0
    for c in reversed(coefs):
        out = out * x + c
    return out


def _swilk_coefficients(n: int) -> np.ndarray:
    """Positive half of the antisymmetric Shapiro-Wilk weights, largest first."""
    half = n // 2
    if n == 3:
        return np.array([math.sqrt(0.5)])
    m = norm.ppf((np.arange(1, half + 1) - 0.375) / (n + 0.25))
    summ2 = 2.0 * np.sum(m ** 2)
    ssumm2 = math.sqrt(summ2)
    rsn = 1.0 / math.sqrt(n)
    a = -m.copy()
    a1 = _poly(_C1, rsn) - m[0] / ssumm2
    if n > 5:
        a2 = -m[1] / ssumm2 + _poly(_C2, rsn)
        fac = math.sqrt((summ2 - 2 * m[0] ** 2 - 2 * m[1] ** 2) / (1 - 2 * a1 ** 2 - 2 * a2 ** 2))
        a[2:] = -m[2:] / fac
        a[1] = a2
    else:
        fac = math.sqrt((summ2 - 2 * m[0] ** 2) / (1 - 2 * a1 ** 2))
        a[1:] = -m[1:] / fac
    a[0] = a1
    return a


@dataclass(frozen=True)
class NormalityReport:
    n: int
    W: float | None = None
    p_sw: float | None = None
    D: float | None = None
    p_ks_lilliefors: float | None = None
    p_ks_censored: bool = False

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "W": self.W,
            "p_sw": self.p_sw,
            "D": self.D,
            "p_ks_lilliefors": self.p_ks_lilliefors,
            "p_ks_censored": self.p_ks_censored,
        }


def _clean(x) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    return x


def shapiro_wilk(x) -> NormalityReport:
    """Shapiro-Wilk W and its p-value from Royston's normalising transformation."""
    x = np.sort(_clean(x))
    n = len(x)
    if not 3 <= n <= 5000:
        raise ValueError(f"Shapiro-Wilk needs 3 <= n <= 5000, got n={n}")
    span = x[-1] - x[0]
    if span == 0:
        raise DegenerateInputError("Shapiro-Wilk is undefined for a constant sample")

    half = _swilk_coefficients(n)
    weights = np.zeros(n)
    weights[: len(half)] = -half
    weights[n - len(half):] = half[::-1]
    xs = x / span
    xc = xs - xs.mean()
    ac = weights - weights.mean()
    ssa, ssx, sax = np.dot(ac, ac), np.dot(xc, xc), np.dot(ac, xc)
    root = math.sqrt(ssa * ssx)
    w1 = (root - sax) * (root + sax) / (ssa * ssx)
    w = 1.0 - w1

    if n == 3:
        p = (6 / math.pi) * (math.asin(math.sqrt(min(w, 1.0))) - math.pi / 3)
        return NormalityReport(n, W=w, p_sw=min(max(p, 0.0), 1.0))
    y = math.log(w1) if w1 > 0 else -math.inf
    if n <= 11:
        gamma = _poly(_G, n)
        if y >= gamma:
            return NormalityReport(n, W=w, p_sw=_SMALL)
        y = -math.log(gamma - y)
        mu = _poly(_C3, n)
        sigma = math.exp(_poly(_C4, n))
    else:
        ln = math.log(n)
        mu = _poly(_C5, ln)
        sigma = math.exp(_poly(_C6, ln))
    p = float(norm.sf((y - mu) / sigma))
    return NormalityReport(n, W=w, p_sw=p)


def ks_normal_distance(x) -> float:
    """Kolmogorov-Smirnov distance to the normal with the sample's mean and SD (ddof=1)."""
    x = np.sort(_clean(x))
    n = len(x)
    sd = x.std(ddof=1)
    if sd == 0:
        raise DegenerateInputError("KS distance is undefined for a constant sample")
    cdf = norm.cdf((x - x.mean()) / sd)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - cdf), np.max(cdf - (i - 1) / n)))


def dallal_wilkinson_pvalue(d: float, n: int) -> float:
    """Dallal & Wilkinson (1986) approximation of the Lilliefors upper tail."""
    if n > 100:
        d = d * (n / 100.0) ** 0.49
        n = 100
    p = math.exp(
        -7.01256 * d * d * (n + 2.78019)
        + 2.99587 * d * math.sqrt(n + 2.78019)
        - 0.122119
        + 0.974598 / math.sqrt(n)
        + 1.67997 / n
    )
    return min(p, 1.0)


def lilliefors_ks(x) -> NormalityReport:
    """KS normality test with estimated parameters.

    The p-value is censored at 0.200: larger values are reported as 0.200
    with ``p_ks_censored=True`` (read: p >= .200).
    """
    x = _clean(x)
    n = len(x)
    if n < 4:
        raise ValueError(f"Lilliefors test needs n >= 4, got n={n}")
    d = ks_normal_distance(x)
    p = dallal_wilkinson_pvalue(d, n)
    if p > LILLIEFORS_CENSOR:
        return NormalityReport(n, D=d, p_ks_lilliefors=LILLIEFORS_CENSOR, p_ks_censored=True)
    return NormalityReport(n, D=d, p_ks_lilliefors=p)


def normality_report(x) -> NormalityReport:
    sw = shapiro_wilk(x)
    ks = lilliefors_ks(x)
    return NormalityReport(sw.n, sw.W, sw.p_sw, ks.D, ks.p_ks_lilliefors, ks.p_ks_censored)
