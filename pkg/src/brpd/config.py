"""Pipeline configuration read from an INI file.

Every key is optional; missing keys take the defaults below. Example::

    [channels]
    analysis = AF3, AF4

    [ica]
    reject = 0, 3

    [indices]
    set = default-v1
    theta_beta = theta / beta
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field

from .errors import ConfigError
from .metrics import DEFAULT_INDEX_DEFINITIONS, DEFAULT_INDEX_SET, parse_index_expression
from .preprocess.filter import FilterSpec
from .preprocess.ica import FRONTAL_CHANNELS
from .spectral import BAND_NAMES, BANDS

INDEX_SETS = {DEFAULT_INDEX_SET: DEFAULT_INDEX_DEFINITIONS}
POOL_WEIGHTINGS = ("auto", "equal", "n-3")


@dataclass(frozen=True)
class PipelineConfig:
    analysis_channels: tuple = ("AF3", "AF4")
    ica_channels: tuple = FRONTAL_CHANNELS
    expected_sampling_rate: float = 256.0

    filter: FilterSpec = FilterSpec()

    amplitude_threshold: float = 200e-6  # volts
    amplitude_pad: float = 0.25
    muscle_enabled: bool = True
    muscle_band: tuple = (25.0, 40.0)
    muscle_z: float = 4.0
    muscle_window: float = 1.0

    ica_enabled: bool = True
    ica_n_components: int | None = None
    ica_max_iter: int = 15000
    ica_tol: float = 1e-4
    ica_seed: int = 0
    ica_reject: tuple = ()
    eog_heuristic: bool = False
    eog_threshold: float = 0.7

    nw: float = 4.0
    n_tapers: int | None = None
    fmax: float = 128.0
    bands: dict = field(default_factory=lambda: dict(BANDS))

    index_set: str = DEFAULT_INDEX_SET
    index_definitions: dict = field(default_factory=lambda: dict(DEFAULT_INDEX_DEFINITIONS))

    stats_enabled: bool = True
    pool_weighting: str = "auto"

    output_dir: str = "brpd-out"

    def validate(self) -> "PipelineConfig":
        fs = self.expected_sampling_rate
        if not fs > 0:
            raise ConfigError("expected_sampling_rate must be positive")
        if not self.analysis_channels:
            raise ConfigError("no analysis channels selected")
        if self.ica_enabled:
            missing = [c for c in self.analysis_channels if c not in self.ica_channels]
            if missing:
                raise ConfigError(f"analysis channels {missing} are not among the ICA channels")
        try:
            self.filter.validate(fs)
        except ValueError as exc:
            raise ConfigError(f"[filter] {exc}") from None
        for name in BAND_NAMES:
            if name not in self.bands:
                raise ConfigError(f"[spectral] band {name!r} is missing")
        for name, (lo, hi) in self.bands.items():
            if not 0 <= lo < hi <= fs / 2:
                raise ConfigError(f"[spectral] band {name}=({lo}, {hi}) must satisfy 0 <= low < high <= {fs / 2}")
        lo, hi = self.muscle_band
        if not 0 <= lo < hi <= fs / 2:
            raise ConfigError(f"[artifacts] muscle_band ({lo}, {hi}) must lie within [0, {fs / 2}] Hz")
        if not 0 < self.fmax <= fs / 2:
            raise ConfigError(f"[spectral] fmax={self.fmax} must be in (0, {fs / 2}]")
        if max(hi for _, hi in self.bands.values()) > self.fmax:
            raise ConfigError("[spectral] a band extends above fmax")
        if not self.nw > 0:
            raise ConfigError("[spectral] nw must be positive")
        if not self.amplitude_threshold > 0 or self.amplitude_pad < 0:
            raise ConfigError("[artifacts] amplitude threshold must be > 0 and pad >= 0")
        if self.ica_max_iter < 1 or not self.ica_tol > 0:
            raise ConfigError("[ica] max_iter must be >= 1 and tol > 0")
        if any(i < 0 for i in self.ica_reject):
            raise ConfigError("[ica] reject indices must be >= 0")
        if self.pool_weighting not in POOL_WEIGHTINGS:
            raise ConfigError(f"[stats] pool_weighting must be one of {POOL_WEIGHTINGS}")
        for name, expr in self.index_definitions.items():
            try:
                parse_index_expression(expr)
            except ValueError as exc:
                raise ConfigError(f"[indices] {name}: {exc}") from None
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["filter"] = asdict(self.filter)
        return d

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @property
    def hash(self) -> str:
        """SHA-256 of the canonical JSON form; changes iff any field changes."""
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


def _floats(text: str, n: int | None = None, key: str = "") -> tuple:
    parts = [p.strip() for p in text.split(",") if p.strip()]
    try:
        values = tuple(float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"{key}: expected numbers, got {text!r}") from None
    if n is not None and len(values) != n:
        raise ConfigError(f"{key}: expected {n} numbers, got {text!r}")
    if not all(math.isfinite(v) for v in values):
        raise ConfigError(f"{key}: values must be finite")
    return values


def _names(text: str) -> tuple:
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _optional_int(text: str, key: str):
    text = text.strip()
    if text.lower() in ("", "none", "all"):
        return None
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


_KNOWN = {
    "channels": {"analysis", "ica", "expected_sampling_rate"},
    "filter": {"l_freq", "h_freq", "l_trans_bandwidth", "h_trans_bandwidth", "window"},
    "artifacts": {"amplitude_threshold_uv", "amplitude_pad", "muscle", "muscle_band", "muscle_z", "muscle_window"},
    "ica": {"enabled", "n_components", "max_iter", "tol", "seed", "reject", "eog_heuristic", "eog_threshold"},
    "spectral": {"nw", "n_tapers", "fmax"} | set(BAND_NAMES),
    "stats": {"enabled", "pool_weighting"},
    "output": {"dir"},
}


def parse_config(text: str) -> PipelineConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    for section in cp.sections():
        if section == "indices":
            continue
        if section not in _KNOWN:
            raise ConfigError(f"unknown section [{section}]")
        unknown = set(cp[section]) - _KNOWN[section]
        if unknown:
            raise ConfigError(f"unknown key(s) in [{section}]: {sorted(unknown)}")

    d = PipelineConfig()
    kw = {}

    def get(section, key, conv):
        if cp.has_option(section, key):
            raw = cp.get(section, key)
            try:
                return conv(raw)
            except ValueError:
                raise ConfigError(f"[{section}] {key}: cannot parse {raw!r}") from None
        return None

    def boolean(section, key):
        if cp.has_option(section, key):
            try:
                return cp.getboolean(section, key)
            except ValueError:
                raise ConfigError(f"[{section}] {key}: expected a boolean") from None
        return None

    for key, value in (
        ("analysis_channels", get("channels", "analysis", _names)),
        ("ica_channels", get("channels", "ica", _names)),
        ("expected_sampling_rate", get("channels", "expected_sampling_rate", float)),
        ("amplitude_threshold", get("artifacts", "amplitude_threshold_uv", lambda s: float(s) * 1e-6)),
        ("amplitude_pad", get("artifacts", "amplitude_pad", float)),
        ("muscle_enabled", boolean("artifacts", "muscle")),
        ("muscle_band", get("artifacts", "muscle_band", lambda s: _floats(s, 2, "[artifacts] muscle_band"))),
        ("muscle_z", get("artifacts", "muscle_z", float)),
        ("muscle_window", get("artifacts", "muscle_window", float)),
        ("ica_enabled", boolean("ica", "enabled")),
        ("ica_max_iter", get("ica", "max_iter", int)),
        ("ica_tol", get("ica", "tol", float)),
        ("ica_seed", get("ica", "seed", int)),
        ("ica_reject", get("ica", "reject", lambda s: tuple(int(p) for p in _names(s)))),
        ("eog_heuristic", boolean("ica", "eog_heuristic")),
        ("eog_threshold", get("ica", "eog_threshold", float)),
        ("nw", get("spectral", "nw", float)),
        ("fmax", get("spectral", "fmax", float)),
        ("stats_enabled", boolean("stats", "enabled")),
        ("pool_weighting", get("stats", "pool_weighting", str.strip)),
        ("output_dir", get("output", "dir", str.strip)),
    ):
        if value is not None:
            kw[key] = value
    if cp.has_option("ica", "n_components"):
        kw["ica_n_components"] = _optional_int(cp.get("ica", "n_components"), "[ica] n_components")
    if cp.has_option("spectral", "n_tapers"):
        kw["n_tapers"] = _optional_int(cp.get("spectral", "n_tapers"), "[spectral] n_tapers")

    fkw = {}
    for key in ("l_freq", "h_freq", "l_trans_bandwidth", "h_trans_bandwidth"):
        value = get("filter", key, float)
        if value is not None:
            fkw[key] = value
    window = get("filter", "window", lambda s: s.strip().lower())
    if window is not None:
        fkw["window"] = window
    if fkw:
        kw["filter"] = FilterSpec(**{**asdict(d.filter), **fkw})

    bands = dict(d.bands)
    for name in BAND_NAMES:
        value = get("spectral", name, lambda s, n=name: _floats(s, 2, f"[spectral] {n}"))
        if value is not None:
            bands[name] = value
    kw["bands"] = bands

    if cp.has_section("indices"):
        sec = dict(cp["indices"])
        set_name = sec.pop("set", DEFAULT_INDEX_SET).strip()
        if set_name not in INDEX_SETS:
            raise ConfigError(f"[indices] unknown index set {set_name!r}; known: {sorted(INDEX_SETS)}")
        defs = dict(INDEX_SETS[set_name])
        defs.update({k: v.strip() for k, v in sec.items()})
        kw["index_set"] = set_name
        kw["index_definitions"] = defs

    return PipelineConfig(**{**asdict(d), "filter": d.filter, **kw}).validate()


def load_config(path) -> PipelineConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)
