import dataclasses
import json

import pytest

from brpd.config import PipelineConfig, load_config, parse_config
from brpd.errors import ConfigError
from brpd.preprocess import FilterSpec


def test_empty_config_is_default():
    assert parse_config("") == PipelineConfig()
    assert parse_config("").hash == PipelineConfig().hash


def test_hash_is_stable_and_canonical():
    cfg = PipelineConfig()
    assert cfg.hash == PipelineConfig().hash
    assert len(cfg.hash) == 64
    assert json.loads(cfg.canonical_json())["analysis_channels"] == ["AF3", "AF4"]


@pytest.mark.parametrize("change", [
    {"amplitude_threshold": 150e-6},
    {"ica_reject": (0,)},
    {"nw": 3.0},
    {"filter": FilterSpec(h_freq=35.0)},
    {"bands": {"delta": (1.0, 4.0), "theta": (4.0, 7.5), "alpha": (8.0, 13.0), "beta": (13.0, 30.0)}},
])
def test_hash_changes_when_any_field_changes(change):
    assert dataclasses.replace(PipelineConfig(), **change).hash != PipelineConfig().hash


def test_parse_every_section():
    cfg = parse_config("""
[channels]
analysis = AF3
ica = AF3, AF4, F3
expected_sampling_rate = 128

[filter]
h_freq = 35

[artifacts]
amplitude_threshold_uv = 150
muscle = no

[ica]
reject = 0, 2
n_components = none
seed = 7

[spectral]
nw = 3
fmax = 64
theta = 4, 7.5

[stats]
pool_weighting = equal

[output]
dir = results

[indices]
set = default-v1
theta_beta = theta / beta
""")
    assert cfg.analysis_channels == ("AF3",)
    assert cfg.ica_channels == ("AF3", "AF4", "F3")
    assert cfg.expected_sampling_rate == 128.0
    assert cfg.filter.h_freq == 35.0 and cfg.filter.l_freq == FilterSpec().l_freq
    assert cfg.amplitude_threshold == pytest.approx(150e-6)
    assert cfg.muscle_enabled is False
    assert cfg.ica_reject == (0, 2) and cfg.ica_n_components is None and cfg.ica_seed == 7
    assert cfg.nw == 3.0 and cfg.bands["theta"] == (4.0, 7.5)
    assert cfg.pool_weighting == "equal" and cfg.output_dir == "results"
    assert cfg.index_definitions["theta_beta"] == "theta / beta"
    assert "cognitive_load" in cfg.index_definitions


@pytest.mark.parametrize("text", [
    "[bogus]\nx = 1\n",
    "[ica]\nrejected = 1\n",
    "[spectral]\ntheta = 8, 4\n",
    "[spectral]\nalpha = 8\n",
    "[spectral]\nfmax = 200\n",
    "[channels]\nanalysis = AF3, O1\n",
    "[artifacts]\namplitude_threshold_uv = -5\n",
    "[ica]\nenabled = perhaps\n",
    "[ica]\nmax_iter = many\n",
    "[stats]\npool_weighting = median\n",
    "[indices]\nbad = alpha ** 2\n",
    "[indices]\nset = v9\n",
    "[filter]\nh_freq = 127\n",
    "no section header\n",
])
def test_invalid_configs_rejected(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_load_config_from_file(tmp_path):
    path = tmp_path / "c.ini"
    path.write_text("[spectral]\nnw = 2.5\n")
    assert load_config(path).nw == 2.5
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.ini")
