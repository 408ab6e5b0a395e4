"""CSV/JSON report emission with stable formatting.

Floats are serialized with 9 significant digits so reruns diff clean;
JSON documents carry a schema_version field.
"""

from __future__ import annotations

import json
from pathlib import Path

SCHEMA_VERSION = "1"


def format_float(x) -> str:
    return "%.9g" % float(x)


def _cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return format_float(value)
    return str(value)


def write_csv(path, header, rows) -> None:
    """Write rows (sequences aligned with header) as CSV; floats get %.9g."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _round_floats(obj):
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, float):
        return float(format_float(obj))
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def write_json_report(path, payload: dict) -> None:
    """Write a JSON report; injects schema_version and rounds floats to %.9g."""
    doc = {"schema_version": SCHEMA_VERSION}
    doc.update(_round_floats(payload))
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_json_report(path) -> dict:
    return json.loads(Path(path).read_text())
