"""Canonical JSON serialization and stable state hashing."""

from __future__ import annotations

import hashlib
import json
from typing import Any


def canonical_json(obj: Any) -> str:
    """Serialize to canonical JSON: sorted keys, no whitespace, no NaN.

    Floats round-trip exactly (shortest repr), so identical state always
    produces identical bytes.
    """
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def stable_hash(obj: Any) -> str:
    """64-bit hex digest over the canonical serialization."""
    data = canonical_json(obj).encode("utf-8")
    return hashlib.blake2b(data, digest_size=8).hexdigest()
