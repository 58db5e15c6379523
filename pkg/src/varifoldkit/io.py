"""Run configuration, report serialisation and provenance.

Reports are written byte-stably: JSON with sorted keys and shortest
round-trip float repr, CSV with ``%.17g`` floats, LF line endings, no
timestamps.
"""
from __future__ import annotations

import csv
import hashlib
import io as _io
import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import jsonschema
import numpy as np

from .exceptions import ConfigurationError

__all__ = [
    "CONFIG_SCHEMA",
    "REPORT_SCHEMA",
    "SCALING_CSV_HEADER",
    "Report",
    "load_config",
    "parse_config",
    "config_hash",
    "thread_count",
    "to_jsonable",
    "render_report",
    "write_report",
]

SCALING_CSV_HEADER = ("i", "radius", "lower", "upper", "log2_lower", "log2_upper")
THREADS_ENV = "VARIFOLDKIT_THREADS"

_number = {"anyOf": [{"type": "number"}, {"type": "string", "pattern": r"^-?\d+(/\d+)?$|^-?\d*\.\d+$"}]}
_nullable_number = {"anyOf": [_number, {"type": "null"}]}
_point = {"type": "array", "items": {"type": "number"}, "minItems": 2}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "varifoldkit run configuration",
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "example": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 2},
                "p": _number,
                "alpha1": _number,
                "alpha2": _number,
                "q1": _number,
                "q2": _number,
                "max_level": {"type": "integer", "minimum": 0},
                "window_half_width": _number,
                "s": _nullable_number,
                "r": _nullable_number,
            },
        },
        "quadrature_order": {"type": "integer", "minimum": 2, "maximum": 4096},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "i_min": {"type": "integer", "minimum": 0},
        "i_max": {"type": "integer", "minimum": 0},
        "kind": {"enum": ["mass", "height", "tilt", "curvature", "weighted", "weighted_power",
                          "mass_minus_plane", "curvature_mass", "weighted_mass",
                          "weighted_power_mass"]},
        "quantity": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"q": _nullable_number, "p": _nullable_number,
                           "norm": {"enum": ["frobenius", "operator"]},
                           "s": _nullable_number, "r": _nullable_number},
        },
        "geometry": {"enum": ["cube", "ball"]},
        "tolerance": {"type": "number", "exclusiveMinimum": 0},
        "tail_threshold": {"type": "number", "exclusiveMinimum": 0},
        "iso": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "dims": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "sphere_radii": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "tau_grid": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0,
                                                        "maximum": 1}, "minItems": 1},
                "n": {"type": "integer", "minimum": 2},
                "mc_count": {"type": "integer", "minimum": 0},
                "mc_tau": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            },
        },
        "scan": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "probes": {"type": "array", "items": _point},
                "i_values": {"type": "array", "items": {"type": "integer", "minimum": 1},
                             "minItems": 1},
                "epsilon": {"type": "number", "exclusiveMinimum": 0},
                "gamma": {"type": "number", "exclusiveMinimum": 0},
                "k_max": {"type": "integer", "minimum": 0},
                "include_plane": {"type": "boolean"},
                "control_plane": {"type": "boolean"},
            },
        },
        "dichotomy": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "q": {"type": "number", "minimum": 1},
                "nu": {"enum": ["complement_of_T", "weighted"]},
                "a": _point,
                "s": _nullable_number,
                "r": _nullable_number,
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"path": {"type": "string"}, "format": {"enum": ["csv", "json"]}},
        },
    },
}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "varifoldkit report",
    "type": "object",
    "required": ["command", "verdict", "provenance", "result"],
    "additionalProperties": False,
    "properties": {
        "command": {"type": "string"},
        "verdict": {"enum": ["pass", "fail", "info"]},
        "provenance": {
            "type": "object",
            "required": ["config_sha256", "seed", "quadrature_order", "version"],
            "properties": {"config_sha256": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
                           "seed": {"type": "integer"},
                           "quadrature_order": {"type": "integer"},
                           "version": {"type": "string"}},
        },
        "result": {"type": "object"},
    },
}


def _format_error(err: jsonschema.ValidationError) -> str:
    where = "/".join(str(p) for p in err.absolute_path) or "<root>"
    return f"{where}: {err.message}"


def parse_config(data) -> dict:
    """Validate a decoded configuration against :data:`CONFIG_SCHEMA`."""
    if data is None:
        data = {}
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        raise ConfigurationError("invalid configuration: " + "; ".join(_format_error(e) for e in errors))
    if "i_min" in data and "i_max" in data and data["i_min"] > data["i_max"]:
        raise ConfigurationError("invalid configuration: i_min exceeds i_max")
    return data


def load_config(path) -> dict:
    """Read and validate a JSON configuration file.

    Raises
    ------
    ConfigurationError
        With line and column for malformed JSON, the offending path for
        schema violations, or the file path for I/O failures.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"{path}: cannot read configuration ({exc.strerror})") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(
            f"{path}: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_config(data)


def to_jsonable(obj):
    """Convert numpy scalars/arrays, fractions and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def config_hash(config: dict) -> str:
    """SHA-256 of the canonical JSON encoding of ``config``."""
    text = json.dumps(to_jsonable(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def thread_count() -> int:
    """Worker threads from ``VARIFOLDKIT_THREADS`` (default 1)."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw == "":
        return 1
    try:
        k = int(raw)
    except ValueError:
        raise ConfigurationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if k < 1:
        raise ConfigurationError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return k


@dataclass(frozen=True)
class Report:
    """A command's output: JSON payload plus an optional CSV table."""

    command: str
    verdict: str
    provenance: dict
    result: dict
    header: tuple = ()
    rows: tuple = field(default=(), repr=False)

    def to_dict(self) -> dict:
        return to_jsonable({"command": self.command, "verdict": self.verdict,
                            "provenance": self.provenance, "result": self.result})


def _csv_cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        x = float(v)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return "%.17g" % x
    return str(v)


def render_report(report: Report, fmt: str = "json") -> str:
    """Text of ``report`` in ``csv`` or ``json``; ends with a single LF."""
    if fmt == "json":
        return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"
    if fmt == "csv":
        if not report.header:
            raise ConfigurationError(f"{report.command} has no tabular output; use --format json")
        buf = _io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(report.header)
        for row in report.rows:
            w.writerow([_csv_cell(v) for v in row])
        return buf.getvalue()
    raise ConfigurationError(f"unknown format {fmt!r}")


def write_report(report: Report, fmt: str = "json", path=None) -> str:
    """Render and write ``report``; ``path=None`` returns the text only.

    Raises
    ------
    OSError
        Re-raised with the path in the message if writing fails.
    """
    text = render_report(report, fmt)
    if path is not None:
        path = Path(path)
        try:
            with open(path, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            raise OSError(exc.errno, f"cannot write report to {path}: {exc.strerror}") from exc
    return text
