"""Canonical JSON serialization for reproducible artifacts.

Keys are sorted, floats are rounded to 12 significant digits before
serialization (then printed with Python's shortest round-trip repr), and
non-finite numbers are rejected. Identical data structures therefore
always produce identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import math

import numpy as np

from .errors import DataError


def _normalize(obj):
    if isinstance(obj, dict):
        out = {}
        for k, v in obj.items():
            if not isinstance(k, str):
                raise DataError(f"canonical JSON requires string keys, got {type(k).__name__}")
            out[k] = _normalize(v)
        return out
    if isinstance(obj, (list, tuple)):
        return [_normalize(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_normalize(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        if not math.isfinite(obj):
            raise DataError("canonical JSON cannot hold NaN or infinity")
        return float(f"{obj:.12g}")
    raise DataError(f"cannot serialize {type(obj).__name__} canonically")


def canonical_json(obj) -> str:
    """Serialize to a canonical JSON string (with trailing newline)."""
    return json.dumps(_normalize(obj), sort_keys=True, indent=1,
                      ensure_ascii=False) + "\n"


def write_canonical_json(obj, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(canonical_json(obj))


def load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON: {exc}") from exc


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
