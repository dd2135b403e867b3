"""Canonical JSON serialization and content digests.

Everything that is hashed (configs, evaluator versions, runs, audit records)
goes through :func:`canonical_json` so the same value always produces the
same bytes: UTF-8, sorted keys, no insignificant whitespace, integers without
leading zeros, floats in Python's shortest round-trip form.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

ZERO_DIGEST = "0" * 64


def canonical_json(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def digest_of(value: Any) -> str:
    """256-bit hex digest of the canonical JSON form of ``value``."""
    return sha256_hex(canonical_json(value))
