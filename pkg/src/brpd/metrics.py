"""Relative band powers, inter-BRPD and ratio-based cognitive indices."""

from __future__ import annotations

import ast
import csv
import math
import operator
from dataclasses import dataclass, field

from .errors import DegenerateInputError
from .spectral import BAND_NAMES, BandPowerRow, BandPowerTable


@dataclass(frozen=True)
class RelativePowerRecord:
    """Band powers as percentages of the summed delta..beta power.

    ``inter_brpd`` is alpha minus theta relative power, in percentage points.
    Lower values point to higher mental effort.
    """

    channel: str
    segment: str
    delta_rel: float
    theta_rel: float
    alpha_rel: float
    beta_rel: float
    source_id: str = ""
    inter_brpd: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "inter_brpd", self.alpha_rel - self.theta_rel)


def relative_power(row: BandPowerRow, source_id: str = "") -> RelativePowerRecord:
    brain = row.brain
    if not brain > 0:
        raise DegenerateInputError(
            f"brain band power is {brain} for {source_id}/{row.channel}/{row.segment}; "
            "relative powers are undefined"
        )
    rels = [row.band(b) / brain * 100.0 for b in BAND_NAMES]
    return RelativePowerRecord(row.channel, row.segment, *rels, source_id=source_id)


def relative_powers(table: BandPowerTable) -> list[RelativePowerRecord]:
    return [relative_power(r, table.source_id) for r in table.rows]


def inter_brpd(r: RelativePowerRecord) -> float:
    return r.alpha_rel - r.theta_rel


@dataclass(frozen=True)
class IndexCoefficients:
    """Weights of ``k0 + k1*alpha_rel + k2*theta_rel + k3*delta_rel + k4*beta_rel``."""

    k0: float = 0.0
    k1: float = 0.0
    k2: float = 0.0
    k3: float = 0.0
    k4: float = 0.0

    def __post_init__(self):
        for name in ("k0", "k1", "k2", "k3", "k4"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"coefficient {name} must be finite")


INTER_BRPD_COEFFICIENTS = IndexCoefficients(0.0, 1.0, -1.0, 0.0, 0.0)


def general_index(r: RelativePowerRecord, k: IndexCoefficients) -> float:
    return k.k0 + k.k1 * r.alpha_rel + k.k2 * r.theta_rel + k.k3 * r.delta_rel + k.k4 * r.beta_rel


# --------------------------------------------------------------- cognitive indices

DEFAULT_INDEX_SET = "default-v1"
DEFAULT_INDEX_DEFINITIONS = {
    "cognitive_load": "theta / alpha",
    "engagement": "beta / (alpha + theta)",
    "excitement": "beta / alpha",
    "relaxation": "alpha / beta",
    "mental_fatigue": "alpha / theta",
}
INDEX_NAMES = tuple(DEFAULT_INDEX_DEFINITIONS)

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
}
_VARIABLES = BAND_NAMES + ("brain",)


def parse_index_expression(expr: str) -> ast.Expression:
    """Parse and vet a band-power ratio expression such as ``beta / (alpha + theta)``."""
    try:
        tree = ast.parse(expr, mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"invalid index expression {expr!r}: {exc.msg}") from None
    for node in ast.walk(tree):
        if isinstance(node, (ast.Expression, ast.BinOp, ast.UnaryOp, ast.USub, ast.UAdd,
                             ast.Load, *_BINOPS)):
            continue
        if isinstance(node, ast.Name) and node.id in _VARIABLES:
            continue
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            continue
        raise ValueError(f"unsupported element {ast.dump(node)} in index expression {expr!r}")
    return tree


def _evaluate(node, env):
    if isinstance(node, ast.Expression):
        return _evaluate(node.body, env)
    if isinstance(node, ast.Constant):
        return float(node.value)
    if isinstance(node, ast.Name):
        return env[node.id]
    if isinstance(node, ast.UnaryOp):
        value = _evaluate(node.operand, env)
        return -value if isinstance(node.op, ast.USub) else value
    left = _evaluate(node.left, env)
    right = _evaluate(node.right, env)
    if isinstance(node.op, ast.Div) and right == 0:
        raise DegenerateInputError(f"zero denominator: {ast.unparse(node.right)} = 0")
    return _BINOPS[type(node.op)](left, right)


@dataclass(frozen=True)
class CognitiveIndexRecord:
    channel: str
    segment: str
    values: dict
    source_id: str = ""

    def __getitem__(self, name):
        return self.values[name]

    def __getattr__(self, name):
        values = self.__dict__.get("values", {})
        if name in values:
            return values[name]
        raise AttributeError(name)


def cognitive_indices(row: BandPowerRow, definitions: dict | None = None, source_id: str = "") -> CognitiveIndexRecord:
    """Evaluate each named ratio expression over the band powers of ``row``."""
    definitions = DEFAULT_INDEX_DEFINITIONS if definitions is None else definitions
    env = {b: row.band(b) for b in _VARIABLES}
    values = {}
    for name, expr in definitions.items():
        try:
            values[name] = _evaluate(parse_index_expression(expr), env)
        except DegenerateInputError as exc:
            raise DegenerateInputError(
                f"{name} ({expr}) for {source_id}/{row.channel}/{row.segment}: {exc}"
            ) from None
    return CognitiveIndexRecord(row.channel, row.segment, values, source_id)


def cognitive_index_table(table: BandPowerTable, definitions: dict | None = None) -> list[CognitiveIndexRecord]:
    return [cognitive_indices(r, definitions, table.source_id) for r in table.rows]


METRIC_CSV_COLUMNS = (
    "source_id", "channel", "segment", "alpha_rel", "theta_rel", "delta_rel", "beta_rel", "inter_brpd",
)


def write_metrics_csv(path, rels, indices, index_names=INDEX_NAMES) -> None:
    """One row per channel and segment: relative powers, inter-BRPD, then indices."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRIC_CSV_COLUMNS + tuple(index_names))
        for r, ix in zip(rels, indices):
            writer.writerow(
                [r.source_id, r.channel, r.segment]
                + [repr(v) for v in (r.alpha_rel, r.theta_rel, r.delta_rel, r.beta_rel, r.inter_brpd)]
                + [repr(ix[name]) for name in index_names]
            )
