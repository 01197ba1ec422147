import json
import os

import numpy as np
import pytest

from brpd.pipeline import run_pipeline
from brpd.config import PipelineConfig
from brpd.synth import generate_cohort


def _field(value, width):
    return str(value).encode("latin-1").ljust(width, b" ")


def build_edf(signals, n_records, record_duration=1.0, declared_records=None, units=None,
              phys=None, digi=None):
    """Assemble EDF bytes field by field, independently of the package writer.

    ``signals`` maps label -> int16 array of length ``n_records * spr``.
    """
    labels = list(signals)
    ns = len(labels)
    spr = [len(signals[k]) // n_records for k in labels]
    units = units or ["uV"] * ns
    phys = phys or [(-100, 100)] * ns
    digi = digi or [(-32768, 32767)] * ns
    head = b"".join([
        _field("0", 8), _field("X", 80), _field("X", 80), _field("01.01.20", 8), _field("00.00.00", 8),
        _field(256 * (ns + 1), 8), _field("", 44),
        _field(n_records if declared_records is None else declared_records, 8),
        _field(record_duration, 8), _field(ns, 4),
    ])
    head += b"".join(_field(k, 16) for k in labels)
    head += b"".join(_field("", 80) for _ in labels)
    head += b"".join(_field(u, 8) for u in units)
    head += b"".join(_field(p[0], 8) for p in phys)
    head += b"".join(_field(p[1], 8) for p in phys)
    head += b"".join(_field(d[0], 8) for d in digi)
    head += b"".join(_field(d[1], 8) for d in digi)
    head += b"".join(_field("", 80) for _ in labels)
    head += b"".join(_field(s, 8) for s in spr)
    head += b"".join(_field("", 32) for _ in labels)
    assert len(head) == 256 * (ns + 1)
    body = b""
    for r in range(n_records):
        for k, s in zip(labels, spr):
            body += np.asarray(signals[k][r * s:(r + 1) * s], dtype="<i2").tobytes()
    return head + body


@pytest.fixture(scope="session")
def cohort_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("fixture")
    generate_cohort(out)
    return out


@pytest.fixture(scope="session")
def analyzed(cohort_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("analysis")
    code = run_pipeline(PipelineConfig().validate(), cohort_dir, out)
    with open(os.path.join(out, "cohort_report.json"), encoding="utf-8") as fh:
        report = json.load(fh)
    with open(os.path.join(cohort_dir, "fixture.json"), encoding="utf-8") as fh:
        fixture = json.load(fh)
    return {"code": code, "out": out, "report": report, "fixture": fixture}
