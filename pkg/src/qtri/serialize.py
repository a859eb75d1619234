"""Canonical JSON and stable float formatting.

All machine-readable output (wire frames, transcripts, exports, CLI JSON)
goes through ``canonical_json``: keys sorted, no insignificant whitespace,
floats printed with 17 significant digits so equal values always produce
equal bytes and round-trip exactly.
"""

from __future__ import annotations

import json
import math
from typing import Any


def format_float(value: float) -> str:
    """17-significant-digit decimal form; round-trips any finite float64."""
    if not math.isfinite(value):
        raise ValueError(f"non-finite value not serializable: {value!r}")
    return format(value, ".17g")


def canonical_json(obj: Any) -> str:
    """Serialize nested dicts/lists/scalars deterministically."""
    parts: list[str] = []
    _write(obj, parts)
    return "".join(parts)


def _write(obj: Any, parts: list[str]) -> None:
    if obj is None:
        parts.append("null")
    elif obj is True:
        parts.append("true")
    elif obj is False:
        parts.append("false")
    elif isinstance(obj, int):
        parts.append(str(obj))
    elif isinstance(obj, float):
        parts.append(format_float(obj))
    elif isinstance(obj, str):
        parts.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        parts.append("{")
        for i, key in enumerate(sorted(obj)):
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be str, got {type(key).__name__}")
            if i:
                parts.append(",")
            parts.append(json.dumps(key, ensure_ascii=False))
            parts.append(":")
            _write(obj[key], parts)
        parts.append("}")
    elif isinstance(obj, (list, tuple)):
        parts.append("[")
        for i, item in enumerate(obj):
            if i:
                parts.append(",")
            _write(item, parts)
        parts.append("]")
    else:
        raise TypeError(f"not JSON-serializable: {type(obj).__name__}")
