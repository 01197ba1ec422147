import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from brpd.errors import (
    ChannelError,
    EdfCalibrationError,
    EdfHeaderError,
    EdfTruncationError,
    SegmentError,
)
from brpd.ingest import (
    Recording,
    SegmentMarkers,
    load_markers,
    read_edf,
    save_markers,
    segment,
    select_channels,
    write_edf,
)

from conftest import build_edf

EMOTIV_14 = ("AF3", "F7", "F3", "FC5", "T7", "P7", "O1", "O2", "P8", "T8", "FC6", "F4", "F8", "AF4")


def _rec(n_ch=2, seconds=300, fs=256, labels=None):
    labels = labels or EMOTIV_14[:n_ch]
    rng = np.random.default_rng(0)
    return Recording(labels, fs, rng.standard_normal((len(labels), int(seconds * fs))) * 1e-5)


def test_zero_digital_values_map_through_linear_calibration(tmp_path):
    path = tmp_path / "zero.edf"
    path.write_bytes(build_edf({"AF3": np.zeros(256, dtype=np.int16)}, 1))
    rec = read_edf(path)
    # (0 - dmin) * (pmax - pmin) / (dmax - dmin) + pmin, in uV
    expected_uv = (0 + 32768) * 200 / 65535 - 100
    assert rec.sampling_rate == 256
    assert rec.samples.shape == (1, 256)
    np.testing.assert_allclose(rec.samples, expected_uv * 1e-6, rtol=1e-12)


def test_declared_labels_are_preserved(tmp_path):
    path = tmp_path / "three.edf"
    sig = {k: np.arange(512, dtype=np.int16) for k in ("AF3", "AF4", "F3")}
    path.write_bytes(build_edf(sig, 2))
    rec = read_edf(path)
    assert rec.channel_labels == ("AF3", "AF4", "F3")
    assert rec.samples.shape == (3, 512)


def test_truncated_file_reports_expected_and_found_records(tmp_path):
    path = tmp_path / "trunc.edf"
    path.write_bytes(build_edf({"AF3": np.zeros(256 * 6, dtype=np.int16)}, 6, declared_records=10))
    with pytest.raises(EdfTruncationError) as info:
        read_edf(path)
    assert info.value.expected == 10 and info.value.found == 6
    assert "10" in str(info.value) and "6" in str(info.value)


def test_malformed_header_reports_byte_offset(tmp_path):
    data = bytearray(build_edf({"AF3": np.zeros(256, dtype=np.int16)}, 1))
    data[236:244] = b"ten     "
    path = tmp_path / "bad.edf"
    path.write_bytes(bytes(data))
    with pytest.raises(EdfHeaderError) as info:
        read_edf(path)
    assert info.value.offset == 236


def test_equal_physical_bounds_is_calibration_error(tmp_path):
    path = tmp_path / "cal.edf"
    path.write_bytes(build_edf({"AF3": np.zeros(256, dtype=np.int16)}, 1, phys=[(5, 5)]))
    with pytest.raises(EdfCalibrationError):
        read_edf(path)


def test_annotation_channel_is_skipped(tmp_path):
    sig = {"AF3": np.ones(256, dtype=np.int16), "EDF Annotations": np.zeros(256, dtype=np.int16)}
    path = tmp_path / "ann.edf"
    path.write_bytes(build_edf(sig, 1, units=["uV", ""]))
    assert read_edf(path).channel_labels == ("AF3",)


def test_millivolt_unit_is_scaled(tmp_path):
    path = tmp_path / "mv.edf"
    path.write_bytes(build_edf({"AF3": np.full(256, 32767, dtype=np.int16)}, 1, units=["mV"], phys=[(-1, 1)]))
    np.testing.assert_allclose(read_edf(path).samples, 1e-3)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 5))
def test_write_read_round_trip_within_one_quantization_step(tmp_path_factory, seed, n_ch, seconds):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n_ch, 256 * seconds)) * rng.uniform(1e-6, 1e-4)
    rec = Recording(EMOTIV_14[:n_ch], 256, x)
    path = tmp_path_factory.mktemp("rt") / "r.edf"
    write_edf(rec, path)
    back = read_edf(path)
    assert back.channel_labels == rec.channel_labels
    for row_in, row_out in zip(rec.samples, back.samples):
        lo = np.floor(row_in.min() * 1e6 - 1e-9)
        hi = np.ceil(row_in.max() * 1e6 + 1e-9)
        step = (max(hi, 1) - min(lo, -1)) / 65535 * 1e-6
        assert np.max(np.abs(row_in - row_out)) <= step


def test_select_two_of_fourteen_channels():
    rec = _rec(14, seconds=2)
    out = select_channels(rec, ["AF3", "AF4"])
    assert out.channel_labels == ("AF3", "AF4")
    np.testing.assert_array_equal(out.samples[1], rec.samples[13])


def test_select_all_is_identity():
    rec = _rec(14, seconds=2)
    out = select_channels(rec, rec.channel_labels)
    np.testing.assert_array_equal(out.samples, rec.samples)


def test_select_unknown_label_lists_available():
    with pytest.raises(ChannelError, match="AF3"):
        select_channels(_rec(2, seconds=1), ["XX"])


def test_segment_lengths_for_standard_markers():
    seg = segment(_rec(1), SegmentMarkers(0, 30, 30, 300))
    assert seg.baseline.n_samples == 7680
    assert seg.task.n_samples == 69120


def test_empty_task_span_is_rejected():
    with pytest.raises(SegmentError):
        SegmentMarkers(0, 30, 30, 30)


def test_fractional_baseline_end_uses_rounded_index():
    seg = segment(_rec(1, seconds=60), SegmentMarkers(0, 10.5, 20, 50))
    assert seg.baseline.n_samples == round(10.5 * 256) == 2688


def test_marker_past_end_is_range_error():
    with pytest.raises(SegmentError, match="outside"):
        segment(_rec(1, seconds=10), SegmentMarkers(0, 5, 5, 20))


def test_marker_sidecar_round_trip(tmp_path):
    m = SegmentMarkers(0, 30, 32, 92)
    save_markers(m, tmp_path / "m.json", subject="S01", task="T1")
    assert load_markers(tmp_path / "m.json") == m
    assert json.loads((tmp_path / "m.json").read_text())["task"] == "T1"


def test_recording_rejects_duplicate_labels():
    with pytest.raises(ValueError):
        Recording(("AF3", "AF3"), 256, np.zeros((2, 10)))


@settings(max_examples=50, deadline=None)
@given(
    st.floats(0, 20), st.floats(0, 20), st.floats(0, 5), st.floats(0.1, 30),
)
def test_segment_spans_fit_inside_recording(t0, bl_len, gap, task_len):
    rec = _rec(1, seconds=80, fs=64)
    m = SegmentMarkers(t0, t0 + bl_len, t0 + bl_len + gap, t0 + bl_len + gap + task_len)
    try:
        seg = segment(rec, m)
    except SegmentError:
        return
    gap_samples = round(m.t_sketch_start * 64) - round(m.t_bl * 64)
    assert seg.baseline.n_samples + gap_samples + seg.task.n_samples <= rec.n_samples


@settings(max_examples=25, deadline=None)
@given(st.permutations(EMOTIV_14[:4]), st.floats(1, 10))
def test_selection_commutes_with_segmentation(labels, t_bl):
    rec = _rec(4, seconds=30)
    m = SegmentMarkers(0, t_bl, t_bl + 1, 25)
    a = segment(select_channels(rec, labels[:2]), m)
    b = segment(rec, m)
    b_task = select_channels(b.task, labels[:2])
    np.testing.assert_array_equal(a.task.samples, b_task.samples)
    np.testing.assert_array_equal(a.baseline.samples, select_channels(b.baseline, labels[:2]).samples)
