"""Append-only, hash-chained audit ledger.

One global chain totally orders every state-changing event in the system.
Each event binds a digest of its canonical JSON payload, so events stay
fixed-size while payload tampering is still detectable.  The chain hash is

    sha256(seq | at | actor | entity_kind | entity_id | action | payload_digest | prev_hash)

over the ``|``-joined UTF-8 string, with event 1 chaining from an all-zero
sentinel.  The algorithm identifier is recorded in the ledger header so
verification is reproducible.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass
from datetime import datetime
from typing import Any, Iterable

from .clock import parse_rfc3339, rfc3339
from .errors import InvalidRangeError

HASH_ALGORITHM = "sha256"
GENESIS_HASH = "0" * 64


def canonical_json(payload: dict[str, Any]) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def payload_digest(payload: dict[str, Any]) -> str:
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()


def event_hash(
    seq: int,
    at: str,
    actor: str,
    entity_kind: str,
    entity_id: str,
    action: str,
    digest: str,
    prev_hash: str,
) -> str:
    material = "|".join([str(seq), at, actor, entity_kind, entity_id, action, digest, prev_hash])
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class AuditEvent:
    seq: int
    at: datetime
    actor: str
    entity_kind: str
    entity_id: str
    action: str
    payload_digest: str
    prev_hash: str
    hash: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "at": rfc3339(self.at),
            "actor": self.actor,
            "entity": {"kind": self.entity_kind, "id": self.entity_id},
            "action": self.action,
            "payload_digest": self.payload_digest,
            "prev_hash": self.prev_hash,
            "hash": self.hash,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "AuditEvent":
        return cls(
            seq=d["seq"],
            at=parse_rfc3339(d["at"]),
            actor=d["actor"],
            entity_kind=d["entity"]["kind"],
            entity_id=str(d["entity"]["id"]),
            action=d["action"],
            payload_digest=d["payload_digest"],
            prev_hash=d["prev_hash"],
            hash=d["hash"],
        )


@dataclass(frozen=True)
class AuditDraft:
    """An event before the chain writer assigns seq and hashes."""

    actor: str
    entity_kind: str
    entity_id: str
    action: str
    payload: dict[str, Any]


def extend_chain(prev_hash: str, seq: int, at: datetime, draft: AuditDraft) -> AuditEvent:
    """Materialize a draft as the next chain element (pure)."""
    at_str = rfc3339(at)
    digest = payload_digest(draft.payload)
    h = event_hash(
        seq, at_str, draft.actor, draft.entity_kind, draft.entity_id, draft.action, digest, prev_hash
    )
    return AuditEvent(
        seq=seq,
        at=at,
        actor=draft.actor,
        entity_kind=draft.entity_kind,
        entity_id=draft.entity_id,
        action=draft.action,
        payload_digest=digest,
        prev_hash=prev_hash,
        hash=h,
    )


def verify_events(rows: Iterable[tuple[AuditEvent, dict[str, Any]]], *, start_prev: str | None = None,
                  start_seq: int | None = None) -> int | None:
    """Recompute every hash; return None if valid, else the first bad seq.

    ``rows`` must be (event, stored payload) in ascending seq order.  When
    verifying a sub-range, pass the expected predecessor hash/seq.
    """
    expected_prev = start_prev
    expected_seq = start_seq
    for event, payload in rows:
        if expected_seq is None:
            expected_seq = event.seq  # full-ledger verify starts at 1 below
            if start_prev is None and event.seq == 1:
                expected_prev = GENESIS_HASH
        if expected_seq != event.seq:
            return min(expected_seq, event.seq)
        if expected_prev is not None and event.prev_hash != expected_prev:
            return event.seq
        if payload_digest(payload) != event.payload_digest:
            return event.seq
        recomputed = event_hash(
            event.seq,
            rfc3339(event.at),
            event.actor,
            event.entity_kind,
            event.entity_id,
            event.action,
            event.payload_digest,
            event.prev_hash,
        )
        if recomputed != event.hash:
            return event.seq
        expected_prev = event.hash
        expected_seq = event.seq + 1
    return None


class AuditLedger:
    """Query/verify/export facade over a storage backend.

    Appends flow through ``storage.apply`` (the single serialized writer);
    this class only reads.
    """

    def __init__(self, storage):
        self._storage = storage

    def header(self) -> dict[str, Any]:
        return {"hash_algorithm": HASH_ALGORITHM, "genesis_prev_hash": GENESIS_HASH}

    def verify_chain(self, start_seq: int | None = None, end_seq: int | None = None) -> int | None:
        rows = self._storage.audit_rows(start_seq=start_seq, end_seq=end_seq)
        start_prev = None
        first = start_seq or 1
        if first == 1:
            start_prev = GENESIS_HASH
        else:
            before = self._storage.audit_rows(start_seq=first - 1, end_seq=first - 1)
            if before:
                start_prev = before[0][0].hash
        return verify_events(rows, start_prev=start_prev, start_seq=first if rows else None)

    def query(
        self,
        *,
        entity_kind: str | None = None,
        entity_id: str | int | None = None,
        actor: str | None = None,
        action: str | None = None,
        time_from: datetime | None = None,
        time_to: datetime | None = None,
        after_seq: int = 0,
        limit: int = 1000,
    ) -> list[AuditEvent]:
        """Filtered ascending-seq scan with cursor pagination.

        The (after_seq, limit) cursor is stable under concurrent appends:
        pages never skip or duplicate events because seq is immutable.
        """
        if limit <= 0:
            raise InvalidRangeError("limit must be positive")
        out: list[AuditEvent] = []
        for event, _payload in self._storage.audit_rows(start_seq=after_seq + 1):
            if entity_kind is not None and event.entity_kind != entity_kind:
                continue
            if entity_id is not None and event.entity_id != str(entity_id):
                continue
            if actor is not None and event.actor != actor:
                continue
            if action is not None and event.action != action:
                continue
            if time_from is not None and event.at < time_from:
                continue
            if time_to is not None and event.at >= time_to:
                continue
            out.append(event)
            if len(out) >= limit:
                break
        return out

    def events_with_payloads(
        self, *, entity_kind: str | None = None
    ) -> list[tuple[AuditEvent, dict[str, Any]]]:
        rows = self._storage.audit_rows()
        if entity_kind is None:
            return rows
        return [(e, p) for e, p in rows if e.entity_kind == entity_kind]

    def export_compliance_report(
        self, time_from: datetime, time_to: datetime, fmt: str = "jsonl"
    ) -> str:
        """Deterministic per-permit summary for a half-open time range.

        JSONL: one header object (range, hash algorithm, chain status),
        then one object per permit ascending by id.  CSV: header line, one
        summary row, then the permit rows (RFC-4180 via csv module).
        """
        if time_from >= time_to:
            raise InvalidRangeError("time_from must precede time_to")
        if fmt not in ("jsonl", "csv"):
            raise InvalidRangeError(f"unsupported format: {fmt}")

        chain_status = "valid" if self.verify_chain() is None else "broken"
        per_permit: dict[int, dict[str, Any]] = {}
        for event, payload in self._storage.audit_rows():
            if event.entity_kind != "permit" or not (time_from <= event.at < time_to):
                continue
            pid = int(event.entity_id)
            row = per_permit.setdefault(
                pid,
                {"permit_id": pid, "event_count": 0, "submitted_at": None, "approved_at": None},
            )
            row["event_count"] += 1
            if event.action == "submit" and row["submitted_at"] is None:
                row["submitted_at"] = rfc3339(event.at)
            if payload.get("to_status") == "Approved" and row["approved_at"] is None:
                row["approved_at"] = rfc3339(event.at)

        rows = [per_permit[pid] for pid in sorted(per_permit)]
        for row in rows:
            if row["submitted_at"] and row["approved_at"]:
                delta = parse_rfc3339(row["approved_at"]) - parse_rfc3339(row["submitted_at"])
                row["approval_seconds"] = delta.total_seconds()
            else:
                row["approval_seconds"] = None

        header = {
            "range_from": rfc3339(time_from),
            "range_to": rfc3339(time_to),
            "hash_algorithm": HASH_ALGORITHM,
            "chain_status": chain_status,
            "permit_count": len(rows),
        }
        if fmt == "jsonl":
            lines = [canonical_json({"record_type": "header", **header})]
            lines += [canonical_json({"record_type": "permit", **row}) for row in rows]
            return "\n".join(lines) + "\n"

        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        columns = [
            "record_type",
            "permit_id",
            "event_count",
            "submitted_at",
            "approved_at",
            "approval_seconds",
            "chain_status",
        ]
        writer.writerow(columns)
        writer.writerow(["summary", "", sum(r["event_count"] for r in rows), "", "", "", chain_status])
        for row in rows:
            writer.writerow(
                [
                    "permit",
                    row["permit_id"],
                    row["event_count"],
                    row["submitted_at"] or "",
                    row["approved_at"] or "",
                    row["approval_seconds"] if row["approval_seconds"] is not None else "",
                    "",
                ]
            )
        return buf.getvalue()
