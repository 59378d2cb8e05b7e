"""Deterministic report assembly: CSV and JSON emitters shared by the CLI.

Reports carry no timestamps or environment echoes beyond the resolved
configuration, so identical runs produce identical bytes.  Floats print with
17 significant digits, enough to round-trip IEEE doubles.
"""

from __future__ import annotations

import io
import json
import math

from .calibration import constants_dict

TOOL_VERSION = "0.1.0"


def format_value(x) -> str:
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return "%.17g" % x
    return str(x)


def render_csv(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(format_value(v) for v in row) + "\n")
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, float):
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if hasattr(x, "item") and not isinstance(x, (str, bytes)):
        try:
            return _jsonable(x.item())
        except (AttributeError, ValueError):
            return x
    return x


def render_json(payload: dict) -> str:
    return json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"


def report_envelope(kind: str, config: dict, results: dict) -> dict:
    """Common wrapper: tool version, frozen calibration constants, resolved
    configuration, then the payload."""
    return {
        "tool_version": TOOL_VERSION,
        "kind": kind,
        "calibration": constants_dict(),
        "config": config,
        "results": results,
    }
