from __future__ import annotations

import hashlib
import json
import re
from typing import Any

_DIGITS = re.compile(r"(\d+)")


def natural_key(value: Any) -> tuple:
    """Sort key that orders ``"v2"`` before ``"v10"`` and ints before strings."""
    if isinstance(value, int):
        return (0, value)
    parts = _DIGITS.split(str(value))
    return (1, tuple((0, int(p)) if p.isdigit() else (1, p) for p in parts if p))


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def digest(obj: Any) -> str:
    return hashlib.sha256(canonical_json(obj).encode("ascii")).hexdigest()[:16]


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)
