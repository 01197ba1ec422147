"""Mixed within/between ANOVA on a cohort grid and Bonferroni post-hoc comparisons."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import permutations

import numpy as np
from scipy import stats

from ..errors import DesignError

TASKS = ("T1", "T2", "T3")
CHANNELS = ("AF3", "AF4")


@dataclass(frozen=True)
class CohortMatrix:
    """Subjects x (task, channel) grid of one metric.

    ``values[i, j]`` belongs to ``subject_ids[i]`` under ``conditions[j]``.
    """

    subject_ids: tuple
    conditions: tuple
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "subject_ids", tuple(self.subject_ids))
        object.__setattr__(self, "conditions", tuple(tuple(c) for c in self.conditions))
        if len(set(self.conditions)) != len(self.conditions):
            raise DesignError("condition labels must be unique")
        if vals.shape != (len(self.subject_ids), len(self.conditions)):
            raise DesignError(
                f"values shape {vals.shape} does not match "
                f"{len(self.subject_ids)} subjects x {len(self.conditions)} conditions"
            )
        missing = [
            (s, c) for i, s in enumerate(self.subject_ids)
            for j, c in enumerate(self.conditions) if not np.isfinite(vals[i, j])
        ]
        if missing:
            raise DesignError(f"incomplete design; missing cells: {missing}")

    @classmethod
    def from_records(cls, records, tasks=TASKS, channels=CHANNELS) -> "CohortMatrix":
        """Build from ``(subject, task, channel, value)`` tuples.

        Raises ``DesignError`` listing every missing or duplicated cell.
        """
        conditions = [(t, c) for t in tasks for c in channels]
        col = {cond: j for j, cond in enumerate(conditions)}
        cells = {}
        dupes = []
        for subject, task, channel, value in records:
            key = (subject, (task, channel))
            if key[1] not in col:
                continue
            if key in cells:
                dupes.append(key)
            cells[key] = float(value)
        if dupes:
            raise DesignError(f"duplicated cells: {dupes}")
        subjects = sorted({s for s, _ in cells})
        missing = [(s, c) for s in subjects for c in conditions if (s, c) not in cells]
        if missing or not subjects:
            raise DesignError(f"incomplete design; missing cells: {missing}")
        values = np.array([[cells[(s, c)] for c in conditions] for s in subjects])
        return cls(tuple(subjects), tuple(conditions), values)

    @property
    def tasks(self) -> tuple:
        return tuple(dict.fromkeys(t for t, _ in self.conditions))

    @property
    def channels(self) -> tuple:
        return tuple(dict.fromkeys(c for _, c in self.conditions))

    def cell(self, task, channel) -> np.ndarray:
        return self.values[:, self.conditions.index((task, channel))]

    def units(self):
        """Split-plot layout: one unit per (subject, task), one column per channel.

        Returns ``(y, groups)`` with ``y`` of shape ``(subjects * tasks, channels)``
        and ``groups`` the task label of each row.
        """
        tasks, channels = self.tasks, self.channels
        for t in tasks:
            for c in channels:
                if (t, c) not in self.conditions:
                    raise DesignError(f"condition {(t, c)} missing from the grid")
        blocks = [np.column_stack([self.cell(t, c) for c in channels]) for t in tasks]
        groups = np.repeat(np.array(tasks), len(self.subject_ids))
        return np.vstack(blocks), groups


@dataclass(frozen=True)
class AnovaRow:
    source: str
    ss: float
    df: int
    ms: float
    F: float | None = None
    p: float | None = None

    def to_dict(self) -> dict:
        return {"source": self.source, "ss": self.ss, "df": self.df, "ms": self.ms, "F": self.F, "p": self.p}


@dataclass(frozen=True)
class AnovaTable:
    """Between-subjects rows (Intercept, Task, Error) then within-subjects rows."""

    between: tuple
    within: tuple

    @property
    def rows(self) -> tuple:
        return self.between + self.within

    def __getitem__(self, source: str) -> AnovaRow:
        for r in self.rows:
            if r.source == source:
                return r
        raise KeyError(source)

    def to_dict(self) -> dict:
        return {
            "between": [r.to_dict() for r in self.between],
            "within": [r.to_dict() for r in self.within],
        }


def _helmert(levels: int) -> np.ndarray:
    """Orthonormal contrasts (levels - 1 rows) orthogonal to the constant vector."""
    rows = []
    for k in range(1, levels):
        c = np.zeros(levels)
        c[:k] = 1.0
        c[k] = -k
        rows.append(c / np.linalg.norm(c))
    return np.array(rows)


def _one_way_parts(v: np.ndarray, codes: np.ndarray, n_groups: int):
    """Type-III intercept SS, group SS and error SS of a one-way layout."""
    counts = np.bincount(codes, minlength=n_groups).astype(float)
    means = np.bincount(codes, weights=v, minlength=n_groups) / counts
    grand = v.mean()
    ss_group = float(np.sum(counts * (means - grand) ** 2))
    ss_error = float(np.sum((v - means[codes]) ** 2))
    # intercept hypothesis: unweighted mean of group means is zero
    mu = means.mean()
    ss_intercept = float(mu ** 2 / (np.sum(1.0 / counts) / n_groups ** 2))
    return ss_intercept, ss_group, ss_error


def _row(source, ss, df, error_ms=None, error_df=None) -> AnovaRow:
    ms = ss / df
    if error_ms is None:
        return AnovaRow(source, ss, df, ms)
    if error_ms > 0:
        F = ms / error_ms
        p = float(stats.f.sf(F, df, error_df))
    else:
        F, p = (math.nan, math.nan) if ms == 0 else (math.inf, 0.0)
    return AnovaRow(source, ss, df, ms, F, p)


def split_plot_anova(y, groups, between_name: str = "Task", within_name: str = "Electrode") -> AnovaTable:
    """Mixed ANOVA with one within factor (columns of ``y``) and one between factor.

    Parameters
    ----------
    y : array, shape (units, levels)
        Repeated measurements of each unit.
    groups : sequence, length units
        Between-group label of each unit.

    Notes
    -----
    Between effects are tested on ``sum(y) / sqrt(levels)``; within effects on
    orthonormal contrasts of the levels, pooled across contrasts. Sums of
    squares are type III, so unbalanced groups are handled.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim != 2 or y.shape[1] < 2:
        raise DesignError("y must be units x levels with at least two levels")
    labels, codes = np.unique(np.asarray(groups), return_inverse=True)
    g = len(labels)
    n, levels = y.shape
    if len(codes) != n:
        raise DesignError("groups must label every unit")
    if g < 2:
        raise DesignError("need at least two between-subject groups")
    if np.any(np.bincount(codes) < 1) or n - g < 1:
        raise DesignError("no residual degrees of freedom")

    total = y.sum(axis=1) / math.sqrt(levels)
    ss_i, ss_t, ss_e = _one_way_parts(total, codes, g)
    df_e = n - g
    ms_e = ss_e / df_e
    between = (
        _row("Intercept", ss_i, 1, ms_e, df_e),
        _row(between_name, ss_t, g - 1, ms_e, df_e),
        _row("Error", ss_e, df_e),
    )

    w_i = w_t = w_e = 0.0
    for contrast in _helmert(levels):
        a, b, c = _one_way_parts(y @ contrast, codes, g)
        w_i, w_t, w_e = w_i + a, w_t + b, w_e + c
    k = levels - 1
    dfw_e = k * df_e
    msw_e = w_e / dfw_e
    within = (
        _row(within_name, w_i, k, msw_e, dfw_e),
        _row(f"{within_name} * {between_name}", w_t, k * (g - 1), msw_e, dfw_e),
        _row(f"Error({within_name})", w_e, dfw_e),
    )
    return AnovaTable(between, within)


def mixed_anova(m: CohortMatrix) -> AnovaTable:
    """Electrode (within) x task (between) ANOVA over ``subjects * tasks`` units."""
    y, groups = m.units()
    return split_plot_anova(y, groups)


@dataclass(frozen=True)
class PairwiseComparison:
    group_i: str
    group_j: str
    mean_difference: float
    se: float
    t: float
    df: int
    p_adjusted: float
    ci_low: float
    ci_high: float
    unequal_sizes: bool = False

    @property
    def significant(self) -> bool:
        return self.p_adjusted < 0.05

    def to_dict(self) -> dict:
        return {
            "group_i": self.group_i,
            "group_j": self.group_j,
            "mean_difference": self.mean_difference,
            "se": self.se,
            "t": self.t,
            "df": self.df,
            "p_adjusted": self.p_adjusted,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "unequal_sizes": self.unequal_sizes,
        }


def bonferroni_from_summary(diff: float, mse: float, n_i: int, n_j: int, df: int, n_pairs: int, alpha: float = 0.05):
    """SE, t, adjusted p and CI of one pairwise difference from summary numbers."""
    se = math.sqrt(mse * (1.0 / n_i + 1.0 / n_j))
    t = diff / se if se > 0 else (0.0 if diff == 0 else math.copysign(math.inf, diff))
    p = min(1.0, n_pairs * 2.0 * float(stats.t.sf(abs(t), df)))
    half = float(stats.t.ppf(1.0 - alpha / (2 * n_pairs), df)) * se
    return se, t, p, (diff - half, diff + half)


def bonferroni_pairwise(m: CohortMatrix, alpha: float = 0.05) -> list[PairwiseComparison]:
    """Bonferroni-adjusted comparisons of task means on electrode-averaged values.

    Every ordered pair is listed, as in a post-hoc table. With unequal group
    sizes the pooled SE ``sqrt(MSE (1/n_i + 1/n_j))`` is used and the result
    carries ``unequal_sizes=True``.
    """
    y, groups = m.units()
    return bonferroni_groups(y.mean(axis=1), groups, alpha)


def bonferroni_groups(v, groups, alpha: float = 0.05) -> list[PairwiseComparison]:
    v = np.asarray(v, dtype=float)
    labels, codes = np.unique(np.asarray(groups), return_inverse=True)
    g = len(labels)
    if g < 2:
        raise DesignError("need at least two groups for pairwise comparisons")
    counts = np.bincount(codes, minlength=g)
    means = np.bincount(codes, weights=v, minlength=g) / counts
    df = len(v) - g
    if df < 1:
        raise DesignError("no residual degrees of freedom")
    mse = float(np.sum((v - means[codes]) ** 2)) / df
    n_pairs = g * (g - 1) // 2
    unequal = bool(np.any(counts != counts[0]))
    out = []
    for i, j in permutations(range(g), 2):
        diff = float(means[i] - means[j])
        se, t, p, (lo, hi) = bonferroni_from_summary(diff, mse, counts[i], counts[j], df, n_pairs, alpha)
        out.append(PairwiseComparison(str(labels[i]), str(labels[j]), diff, se, t, df, p, lo, hi, unequal))
    return out
