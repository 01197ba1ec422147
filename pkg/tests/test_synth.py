import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brpd.errors import SynthSpecError
from brpd.ingest import read_edf
from brpd.metrics import relative_power
from brpd.spectral import BANDS, BAND_NAMES, BandPowerRow, band_power, multitaper_psd
from brpd.synth import (
    DEFAULT_COHORT_TARGETS,
    CohortLayout,
    SynthSpec,
    generate_cohort,
    generate_recording,
    plan_cohort,
    render_member,
)


def _measured_rel(rec, channel=0):
    spec = multitaper_psd(rec, fmax=128.0)
    powers = [float(band_power(spec, BANDS[b])[channel]) for b in BAND_NAMES]
    return relative_power(BandPowerRow("x", "task", *powers))


def test_equal_targets_recovered():
    r = _measured_rel(generate_recording(SynthSpec(seed=3)))
    for v in (r.delta_rel, r.theta_rel, r.alpha_rel, r.beta_rel):
        assert v == pytest.approx(25.0, abs=2.0)


def test_negative_difference_target_recovered():
    # delta, theta, alpha, beta percentages
    targets = (34.86, 21.18, 14.69, 29.27)
    r = _measured_rel(generate_recording(SynthSpec(targets=targets, seed=1)))
    assert r.inter_brpd == pytest.approx(-6.49, abs=0.5)


def test_bandlimited_model_recovers_targets():
    targets = (40.0, 20.0, 15.0, 25.0)
    r = _measured_rel(generate_recording(SynthSpec(targets=targets, model="bandlimited", seed=2)))
    for got, want in zip((r.delta_rel, r.theta_rel, r.alpha_rel, r.beta_rel), targets):
        assert got == pytest.approx(want, abs=2.0)


def test_total_power_matches_spec():
    spec = SynthSpec(seed=4, noise_fraction=0.0)
    x = generate_recording(spec).samples[0]
    assert np.var(x) == pytest.approx(spec.total_power, rel=0.02)


def test_longer_recordings_are_more_accurate():
    targets = (30.0, 20.0, 20.0, 30.0)

    def worst_error(duration):
        errs = []
        for seed in range(6):
            r = _measured_rel(generate_recording(SynthSpec(duration=duration, targets=targets, model="bandlimited",
                                                           seed=seed)))
            errs.append(abs(r.theta_rel - 20.0))
        return np.mean(errs)

    assert worst_error(30.0) < worst_error(8.0)


def test_same_seed_gives_identical_edf_bytes(tmp_path):
    from brpd.ingest import write_edf

    spec = SynthSpec(seed=11, duration=10)
    write_edf(generate_recording(spec, 2), tmp_path / "a.edf")
    write_edf(generate_recording(spec, 2), tmp_path / "b.edf")
    assert (tmp_path / "a.edf").read_bytes() == (tmp_path / "b.edf").read_bytes()
    assert not np.array_equal(generate_recording(spec).samples, generate_recording(SynthSpec(seed=12, duration=10)).samples)


@pytest.mark.parametrize("kwargs", [
    {"targets": (50, 50, 50, 50)},
    {"targets": (-10, 40, 40, 30)},
    {"duration": 4.0},
    {"model": "pink"},
    {"components_per_band": 0},
    {"noise_fraction": 1.0},
])
def test_invalid_spec_rejected(kwargs):
    with pytest.raises(SynthSpecError):
        SynthSpec(**kwargs)


def test_cohort_needs_three_subjects():
    with pytest.raises(SynthSpecError):
        plan_cohort(n_subjects=2)


def test_zero_spread_targets_give_identical_subjects():
    targets = {(t, c): (2.0, 0.0, 18.0, 0.0) for t in ("T1", "T2") for c in ("AF3", "AF4")}
    members = plan_cohort(targets, n_subjects=3, seed=5)
    for m in members:
        for ch in ("AF3", "AF4"):
            assert m.inter_brpd(ch) == pytest.approx(2.0, abs=1e-12)
            assert m.targets[ch][1] == pytest.approx(18.0, abs=1e-12)


def test_unrealizable_targets_rejected():
    targets = {(t, c): (90.0, 1.0, 30.0, 1.0) for t in ("T1",) for c in ("AF3", "AF4")}
    with pytest.raises(SynthSpecError):
        plan_cohort(targets, n_subjects=5)


def test_planned_cells_match_targets_exactly():
    members = plan_cohort(n_subjects=27, seed=0)
    assert len(members) == 81
    for (task, ch), (mean, sd, t_mean, t_sd) in DEFAULT_COHORT_TARGETS.items():
        v = np.array([m.inter_brpd(ch) for m in members if m.task == task])
        th = np.array([m.targets[ch][1] for m in members if m.task == task])
        assert v.mean() == pytest.approx(mean, abs=1e-9) and v.std(ddof=1) == pytest.approx(sd, abs=1e-9)
        assert th.mean() == pytest.approx(t_mean, abs=1e-9) and th.std(ddof=1) == pytest.approx(t_sd, abs=1e-9)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_drawn_relative_powers_valid(seed):
    for m in plan_cohort(n_subjects=5, seed=seed):
        for rels in m.targets.values():
            assert sum(rels) == pytest.approx(100.0, abs=1e-9)
            assert min(rels) >= 1.0


def test_rendered_member_task_segment_recovers_targets():
    layout = CohortLayout()
    member = plan_cohort(n_subjects=3, seed=9, layout=layout)[0]
    rec = render_member(member, layout)
    i0 = int(layout.markers.t_sketch_start * layout.sampling_rate)
    task = rec.with_samples(rec.samples[:, i0:])
    af3 = rec.channel_labels.index("AF3")
    r = _measured_rel(task, af3)
    assert r.inter_brpd == pytest.approx(member.inter_brpd("AF3"), abs=0.5)


def test_small_cohort_files_and_manifest(tmp_path):
    manifest = generate_cohort(tmp_path, n_subjects=3, seed=2)
    assert len(list(tmp_path.glob("*.edf"))) == 9
    assert len(list(tmp_path.glob("S*_T*.json"))) == 9
    on_disk = json.loads((tmp_path / "fixture.json").read_text())
    assert on_disk["expected"] == manifest["expected"]
    assert read_edf(tmp_path / "S01_T2.edf").duration == pytest.approx(92.0)
