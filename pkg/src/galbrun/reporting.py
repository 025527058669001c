"""Byte-stable report serialization.

Reports are plain dicts rendered to canonical JSON: sorted keys, two-space
indent, trailing newline, numpy types coerced to plain Python, complex
numbers as [re, im] pairs.  Repeated runs on identical inputs must produce
identical bytes, so anything time- or machine-dependent (wall times, host
names) belongs in the run manifest sidecar instead of the report itself.
"""

from __future__ import annotations

import hashlib
import json

import numpy as np


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        c = complex(obj)
        if c.imag == 0.0:
            return c.real
        return [c.real, c.imag]
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def canonical_json(obj):
    """Render ``obj`` to canonical JSON text (deterministic bytes)."""
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj):
    text = canonical_json(obj)
    with open(path, "w") as fh:
        fh.write(text)
    return text


def config_hash(obj):
    """Short stable hash of a report-able object (config dicts, mostly)."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]


def write_csv(path, header, rows):
    """Plain deterministic CSV with repr-formatted floats."""
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for v in row:
            v = _plain(v)
            cells.append(repr(v) if isinstance(v, float) else str(v))
        lines.append(",".join(cells))
    text = "\n".join(lines) + "\n"
    with open(path, "w") as fh:
        fh.write(text)
    return text
