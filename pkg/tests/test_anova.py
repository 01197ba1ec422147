import math

import numpy as np
import pandas as pd
import pytest
import statsmodels.formula.api as smf
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from statsmodels.stats.anova import anova_lm

from brpd.errors import DesignError
from brpd.stats import (
    CohortMatrix,
    bonferroni_from_summary,
    bonferroni_groups,
    bonferroni_pairwise,
    mixed_anova,
    split_plot_anova,
)
from brpd.stats.anova import _row


def _textbook_split_plot(y, groups):
    """Balanced split-plot sums of squares from cell, marginal and unit means."""
    y = np.asarray(y, float)
    labels = sorted(set(groups))
    groups = np.asarray(groups)
    n_units, L = y.shape
    grand = y.mean()
    unit_mean = y.mean(axis=1)
    level_mean = y.mean(axis=0)
    out = {"Intercept": n_units * L * grand ** 2, "Task": 0.0, "Error": 0.0,
           "Electrode": n_units * np.sum((level_mean - grand) ** 2), "Electrode * Task": 0.0}
    for g in labels:
        sel = groups == g
        gm = y[sel].mean()
        out["Task"] += L * sel.sum() * (gm - grand) ** 2
        out["Error"] += L * np.sum((unit_mean[sel] - gm) ** 2)
        cell = y[sel].mean(axis=0)
        out["Electrode * Task"] += sel.sum() * np.sum((cell - gm - level_mean + grand) ** 2)
    total = np.sum((y - grand) ** 2) + out["Intercept"]
    out["Error(Electrode)"] = total - sum(out.values())
    return out


HAND_Y = np.array([[1.0, 3.0], [2.0, 2.0], [4.0, 7.0], [6.0, 5.0], [0.0, 3.0], [2.0, 6.0]])
HAND_G = ["a", "a", "b", "b", "c", "c"]


def test_hand_dataset_against_textbook_formulas():
    table = split_plot_anova(HAND_Y, HAND_G)
    ref = _textbook_split_plot(HAND_Y, HAND_G)
    for source, ss in ref.items():
        assert table[source].ss == pytest.approx(ss, abs=1e-9), source
    assert [r.df for r in table.rows] == [1, 2, 3, 1, 2, 3]
    assert table["Task"].F == pytest.approx(table["Task"].ms / table["Error"].ms, rel=1e-12)


def test_hand_dataset_frozen_values():
    table = split_plot_anova(HAND_Y, HAND_G)
    # 12 cells summing to 41; electrode means 15/6 and 26/6
    assert table["Intercept"].ss == pytest.approx(41 ** 2 / 12, abs=1e-9)
    assert table["Electrode"].ss == pytest.approx(6 * ((15 / 6 - 41 / 12) ** 2 + (26 / 6 - 41 / 12) ** 2), abs=1e-9)


def _long(y, groups):
    rows = []
    for u, (vals, g) in enumerate(zip(y, groups)):
        rows.append({"unit": u, "g": g, "total": vals.sum() / math.sqrt(2), "diff": (vals[0] - vals[1]) / math.sqrt(2)})
    return pd.DataFrame(rows)


@pytest.mark.parametrize("sizes", [(5, 5, 5), (4, 7, 3)])
def test_matches_regression_type_three_with_sum_coding(sizes):
    rng = np.random.default_rng(sum(sizes))
    groups = np.repeat(["T1", "T2", "T3"], sizes)
    y = rng.normal(size=(len(groups), 2)) + np.where(groups == "T2", 1.5, 0.0)[:, None]
    table = split_plot_anova(y, groups)
    df = _long(y, groups)
    between = anova_lm(smf.ols("total ~ C(g, Sum)", df).fit(), typ=3)
    within = anova_lm(smf.ols("diff ~ C(g, Sum)", df).fit(), typ=3)
    assert table["Intercept"].ss == pytest.approx(between.loc["Intercept", "sum_sq"], rel=1e-9)
    assert table["Task"].ss == pytest.approx(between.loc["C(g, Sum)", "sum_sq"], rel=1e-9)
    assert table["Error"].ss == pytest.approx(between.loc["Residual", "sum_sq"], rel=1e-9)
    assert table["Task"].p == pytest.approx(between.loc["C(g, Sum)", "PR(>F)"], abs=1e-6)
    assert table["Electrode"].ss == pytest.approx(within.loc["Intercept", "sum_sq"], rel=1e-9)
    assert table["Electrode * Task"].ss == pytest.approx(within.loc["C(g, Sum)", "sum_sq"], rel=1e-9)
    assert table["Error(Electrode)"].p is None
    assert table["Electrode * Task"].p == pytest.approx(within.loc["C(g, Sum)", "PR(>F)"], abs=1e-6)


def _f_density(x, d1, d2):
    log = (0.5 * d1 * math.log(d1) + 0.5 * d2 * math.log(d2) + (0.5 * d1 - 1) * math.log(x)
           - 0.5 * (d1 + d2) * math.log(d2 + d1 * x)
           - (math.lgamma(d1 / 2) + math.lgamma(d2 / 2) - math.lgamma((d1 + d2) / 2)))
    return math.exp(log)


@pytest.mark.parametrize("F, d1, d2", [(7.603, 2, 78), (0.583, 1, 78), (3.361, 2, 78), (0.157, 1, 78)])
def test_f_tail_matches_density_quadrature(F, d1, d2):
    tail, _ = integrate.quad(_f_density, F, math.inf, args=(d1, d2), epsabs=1e-12)
    row = _row("x", F * d1, d1, 1.0, d2)
    assert row.p == pytest.approx(tail, abs=1e-6)


def test_effect_rows_from_summary_sums_of_squares():
    # F = MS / MS_error and the matching significance levels
    assert _row("Task", 1018.559, 2, 66.986, 78).F == pytest.approx(7.603, abs=5e-4)
    assert _row("Task", 1018.559, 2, 66.986, 78).p < 0.001
    assert _row("Intercept", 10.508, 1, 66.986, 78).p == pytest.approx(0.693, abs=5e-4)
    assert _row("E", 1.731, 1, 2.969, 78).p == pytest.approx(0.447, abs=5e-4)
    assert _row("ExT", 19.958, 2, 2.969, 78).p == pytest.approx(0.040, abs=5e-4)


def test_identical_within_levels_give_zero_within_effects():
    rng = np.random.default_rng(0)
    v = rng.normal(size=12)
    table = split_plot_anova(np.column_stack([v, v]), np.repeat(["x", "y", "z"], 4))
    scale = table["Error"].ss
    for source in ("Electrode", "Electrode * Task", "Error(Electrode)"):
        assert table[source].ss <= 1e-24 * scale


def _matrix(rng, n=6, shift=(0.0, 2.0, 1.0)):
    conditions = [(t, c) for t in ("T1", "T2", "T3") for c in ("AF3", "AF4")]
    vals = rng.normal(size=(n, 6)) + np.repeat(shift, 2)
    return CohortMatrix(tuple(f"S{i}" for i in range(n)), tuple(conditions), vals)


def test_matrix_units_layout():
    m = _matrix(np.random.default_rng(1))
    y, groups = m.units()
    assert y.shape == (18, 2)
    np.testing.assert_array_equal(y[6:12, 1], m.cell("T2", "AF4"))
    assert list(groups[:6]) == ["T1"] * 6


def test_missing_and_duplicate_cells_listed():
    recs = [(s, t, c, 1.0) for s in ("S1", "S2") for t in ("T1", "T2", "T3") for c in ("AF3", "AF4")]
    with pytest.raises(DesignError, match="S2"):
        CohortMatrix.from_records(recs[:-1])
    with pytest.raises(DesignError, match="duplicated"):
        CohortMatrix.from_records(recs + recs[:1])
    with pytest.raises(DesignError):
        CohortMatrix(("S1",), (("T1", "AF3"),), [[math.nan]])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-50, 50), st.floats(0.1, 20))
def test_f_and_p_invariant_under_affine_maps(seed, a, b):
    m = _matrix(np.random.default_rng(seed))
    t1 = mixed_anova(m)
    t2 = mixed_anova(CohortMatrix(m.subject_ids, m.conditions, a + b * m.values))
    for source in ("Task", "Electrode", "Electrode * Task"):
        assert t2[source].F == pytest.approx(t1[source].F, rel=1e-7, abs=1e-9)
    p1 = bonferroni_pairwise(m)
    p2 = bonferroni_pairwise(CohortMatrix(m.subject_ids, m.conditions, a + b * m.values))
    assert [c.significant for c in p1] == [c.significant for c in p2]
    for c1, c2 in zip(p1, p2):
        assert c2.mean_difference == pytest.approx(b * c1.mean_difference, rel=1e-9, abs=1e-9)


def test_pairwise_comparison_from_summary_numbers():
    se, t, p, (lo, hi) = bonferroni_from_summary(5.733, 33.493, 27, 27, 78, 3)
    assert se == pytest.approx(math.sqrt(2 * 33.493 / 27), rel=1e-12)
    assert round(se, 3) == 1.575
    assert round(t, 2) == 3.64
    assert round(p, 3) == 0.001
    assert (round(lo, 3), round(hi, 2)) == (1.879, 9.59)
    _, _, p2, _ = bonferroni_from_summary(4.774, 33.493, 27, 27, 78, 3)
    assert round(p2, 3) == 0.010
    _, _, p3, _ = bonferroni_from_summary(-0.958, 33.493, 27, 27, 78, 3)
    assert p3 == 1.0


def test_task_sum_of_squares_follows_from_mean_differences():
    means = np.array([0.0, -5.733, -4.774])
    # between effects use unit scores scaled by sqrt(2), so SS doubles
    ss = 2 * 27 * np.sum((means - means.mean()) ** 2)
    assert ss == pytest.approx(1018.559, abs=0.5)
    assert 2 * 33.493 == pytest.approx(66.986, abs=1e-9)


def test_identical_groups_give_unit_p():
    v = np.tile(np.arange(5.0), 3)
    for c in bonferroni_groups(v, np.repeat(["a", "b", "c"], 5)):
        assert c.mean_difference == 0 and c.p_adjusted == 1.0


def test_pairwise_lists_all_ordered_pairs_and_flags_unequal_sizes():
    rng = np.random.default_rng(3)
    out = bonferroni_groups(rng.normal(size=9), ["a"] * 2 + ["b"] * 3 + ["c"] * 4)
    assert [(c.group_i, c.group_j) for c in out] == [
        ("a", "b"), ("a", "c"), ("b", "a"), ("b", "c"), ("c", "a"), ("c", "b")]
    assert all(c.unequal_sizes for c in out)
    assert out[0].mean_difference == -out[2].mean_difference


def test_posthoc_uses_electrode_average_and_within_mse():
    m = _matrix(np.random.default_rng(4))
    y, groups = m.units()
    avg = y.mean(axis=1)
    comps = bonferroni_pairwise(m)
    table = mixed_anova(m)
    # MSE of electrode-averaged scores is half the between error MS
    se_expected = math.sqrt(table["Error"].ms / 2 * (2 / 6))
    assert comps[0].se == pytest.approx(se_expected, rel=1e-12)
    assert comps[0].mean_difference == pytest.approx(avg[:6].mean() - avg[6:12].mean(), rel=1e-12)
