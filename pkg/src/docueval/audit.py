"""Append-only, hash-chained audit log.

Every oversight action and system event appends one record. Records chain
through ``prev_digest`` (the previous record's digest; an all-zero sentinel
for the genesis record), so flipping any byte anywhere is detectable at the
exact sequence number. Appends are globally serialized.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import json

from .canonical import ZERO_DIGEST, canonical_json, digest_of, sha256_hex
from .errors import ChainCorruption

ACTORS = ("user", "system")

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class AuditRecord:
    seq: int
    timestamp: str
    actor: str
    action: str
    payload_digest: str
    prev_digest: str
    schema_version: int = SCHEMA_VERSION

    def digest(self) -> str:
        return sha256_hex(canonical_json({
            "schema_version": self.schema_version,
            "seq": self.seq,
            "timestamp": self.timestamp,
            "actor": self.actor,
            "action": self.action,
            "payload_digest": self.payload_digest,
            "prev_digest": self.prev_digest,
        }))

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "seq": self.seq,
            "timestamp": self.timestamp,
            "actor": self.actor,
            "action": self.action,
            "payload_digest": self.payload_digest,
            "prev_digest": self.prev_digest,
            "digest": self.digest(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AuditRecord":
        return cls(seq=d["seq"], timestamp=d["timestamp"], actor=d["actor"],
                   action=d["action"], payload_digest=d["payload_digest"],
                   prev_digest=d["prev_digest"],
                   schema_version=d["schema_version"])


def verify_chain(lines: list[str]) -> list[tuple[int, str]]:
    """Violations as (seq, message) for a JSONL chain; empty means intact.

    The reported seq is the 1-based position in the file, which is what the
    record's own seq must equal.
    """
    violations: list[tuple[int, str]] = []
    prev = ZERO_DIGEST
    for position, line in enumerate(lines, start=1):
        try:
            data = json.loads(line)
            record = AuditRecord.from_dict(data)
        except (ValueError, KeyError, TypeError) as exc:
            violations.append((position, f"unreadable audit record: {exc}"))
            prev = None
            continue
        if canonical_json(record.to_dict()) != line.strip():
            # A stored line must be exactly the canonical serialization;
            # anything else (extra keys, reordered keys) is tampering.
            violations.append((position, "record is not in canonical form"))
        if record.seq != position:
            violations.append((position, f"seq {record.seq} at position {position}"))
        if data.get("digest") != record.digest():
            violations.append((position, "stored digest does not match record contents"))
        elif prev is not None and record.prev_digest != prev:
            violations.append((position, "prev_digest does not match preceding record"))
        prev = record.digest()
    return violations


class AuditLog:
    """JSONL-backed audit log with serialized appends."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def _read_lines(self) -> list[str]:
        if not self.path.exists():
            return []
        text = self.path.read_text(encoding="utf-8")
        return [line for line in text.splitlines() if line.strip()]

    def records(self) -> list[AuditRecord]:
        return [AuditRecord.from_dict(json.loads(line)) for line in self._read_lines()]

    def append(self, action: str, payload: Any, actor: str = "system") -> AuditRecord:
        """Append with the next seq and the tail's digest; verifies the tail first."""
        if actor not in ACTORS:
            raise ValueError(f"unknown actor {actor!r}")
        with self._lock:
            lines = self._read_lines()
            prev = ZERO_DIGEST
            if lines:
                try:
                    tail_data = json.loads(lines[-1])
                    tail = AuditRecord.from_dict(tail_data)
                except (ValueError, KeyError, TypeError) as exc:
                    raise ChainCorruption(f"audit tail is unreadable: {exc}") from exc
                if tail_data.get("digest") != tail.digest() or tail.seq != len(lines):
                    raise ChainCorruption(
                        f"audit tail at seq {len(lines)} fails verification")
                prev = tail.digest()
            record = AuditRecord(
                seq=len(lines) + 1,
                timestamp=datetime.now(timezone.utc).isoformat(),
                actor=actor,
                action=action,
                payload_digest=digest_of(payload),
                prev_digest=prev,
            )
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(canonical_json(record.to_dict()) + "\n")
            return record

    def verify(self) -> list[tuple[int, str]]:
        return verify_chain(self._read_lines())
