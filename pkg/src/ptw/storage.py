"""Persistence: one interface, two interchangeable backends.

``InMemoryStorage`` backs tests and the load simulator; ``SqliteStorage``
is the durable relational store.  Observable behavior is identical (the
test suite runs against both).

All multi-record mutations go through ``apply(WriteBatch)``, which is
atomic: optimistic version checks (compare-and-swap on ``Permit.version``),
audit chain extension and notification dedup-inserts happen together or
not at all.  Audit seq assignment is funneled through the backend's single
serialized writer, so the chain has no gaps and a total order.
"""

from __future__ import annotations

import json
import sqlite3
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path
from typing import Any

from .clock import parse_rfc3339, rfc3339
from .errors import ConcurrencyConflictError, StorageFailureError
from .ledger import GENESIS_HASH, AuditDraft, AuditEvent, extend_chain
from .model import Permit, PermitCategory, PermitStatus
from .notifications import DeliveryStatus, Notification, Trigger
from .rbac import User, UserAccount
from .registries import ContractorRecord, IncidentRecord, MachineRecord


@dataclass(frozen=True)
class NotificationDraft:
    recipient: str
    trigger: Trigger
    permit_id: int
    permit_revision: int
    channel: str = "file"


@dataclass
class WriteBatch:
    """One atomic unit of work."""

    now: datetime
    permit_inserts: list[Permit] = field(default_factory=list)
    permit_saves: list[tuple[Permit, int]] = field(default_factory=list)  # (state, expected_version)
    audit_drafts: list[AuditDraft] = field(default_factory=list)
    notification_drafts: list[NotificationDraft] = field(default_factory=list)
    incident_puts: list[IncidentRecord] = field(default_factory=list)


@dataclass
class ApplyResult:
    permits: list[Permit] = field(default_factory=list)
    events: list[AuditEvent] = field(default_factory=list)
    notifications: list[Notification] = field(default_factory=list)  # newly inserted only


@dataclass(frozen=True)
class PermitFilter:
    statuses: frozenset[PermitStatus] | None = None
    zone_id: str | None = None
    category: PermitCategory | None = None
    issuer_id: str | None = None
    valid_to_before: datetime | None = None

    def matches(self, p: Permit) -> bool:
        if self.statuses is not None and p.status not in self.statuses:
            return False
        if self.zone_id is not None and p.zone_id != self.zone_id:
            return False
        if self.category is not None and p.category != self.category:
            return False
        if self.issuer_id is not None and p.issuer_id != self.issuer_id:
            return False
        if self.valid_to_before is not None and p.window.valid_to > self.valid_to_before:
            return False
        return True


class InMemoryStorage:
    """Dict-backed storage; a single RLock serializes writers."""

    def __init__(self):
        self._lock = threading.RLock()
        self._permits: dict[int, Permit] = {}
        self._qr_index: dict[str, int] = {}
        self._zone_index: dict[str, list[int]] = {}
        self._audit: list[tuple[AuditEvent, dict[str, Any]]] = []
        self._notifications: dict[int, Notification] = {}
        self._notif_keys: dict[tuple, int] = {}
        self._accounts: dict[str, UserAccount] = {}
        self._machines: dict[str, MachineRecord] = {}
        self._contractors: dict[str, ContractorRecord] = {}
        self._incidents: dict[int, IncidentRecord] = {}
        self._counters: dict[str, int] = {}

    # --- id allocation ---

    def next_permit_id(self) -> int:
        return self._next("permit")

    def next_incident_id(self) -> int:
        return self._next("incident")

    def _next(self, name: str) -> int:
        with self._lock:
            value = self._counters.get(name, 0) + 1
            self._counters[name] = value
            return value

    # --- atomic batch ---

    def apply(self, batch: WriteBatch) -> ApplyResult:
        with self._lock:
            # validate everything before touching state
            for permit in batch.permit_inserts:
                if permit.id in self._permits:
                    raise StorageFailureError(f"permit {permit.id} already exists")
            for state, expected in batch.permit_saves:
                current = self._permits.get(state.id)
                if current is None:
                    raise StorageFailureError(f"permit {state.id} does not exist")
                if current.version != expected:
                    raise ConcurrencyConflictError(
                        f"permit {state.id}: expected version {expected}, found {current.version}"
                    )

            result = ApplyResult()
            for permit in batch.permit_inserts:
                stored = replace(permit, version=1)
                self._permits[stored.id] = stored
                self._qr_index[stored.qr_token] = stored.id
                self._zone_index.setdefault(stored.zone_id, []).append(stored.id)
                result.permits.append(stored)
            for state, expected in batch.permit_saves:
                old = self._permits[state.id]
                stored = replace(state, version=expected + 1)
                if old.qr_token != stored.qr_token:
                    self._qr_index.pop(old.qr_token, None)
                    self._qr_index[stored.qr_token] = stored.id
                self._permits[stored.id] = stored
                result.permits.append(stored)
            for rec in batch.incident_puts:
                self._incidents[rec.incident_id] = rec

            seq = len(self._audit)
            prev = self._audit[-1][0].hash if self._audit else GENESIS_HASH
            for draft in batch.audit_drafts:
                seq += 1
                event = extend_chain(prev, seq, batch.now, draft)
                self._audit.append((event, draft.payload))
                prev = event.hash
                result.events.append(event)

            for nd in batch.notification_drafts:
                key = (nd.permit_id, nd.trigger.value, nd.recipient, nd.permit_revision)
                if key in self._notif_keys:
                    continue
                nid = self._next("notification")
                notif = Notification(
                    id=nid,
                    created_at=batch.now,
                    recipient=nd.recipient,
                    trigger=nd.trigger,
                    permit_id=nd.permit_id,
                    permit_revision=nd.permit_revision,
                    channel=nd.channel,
                )
                self._notifications[nid] = notif
                self._notif_keys[key] = nid
                result.notifications.append(notif)
            return result

    # --- permits ---

    def get_permit(self, permit_id: int) -> Permit | None:
        with self._lock:
            return self._permits.get(permit_id)

    def get_permit_by_qr(self, token: str) -> Permit | None:
        with self._lock:
            pid = self._qr_index.get(token)
            return self._permits.get(pid) if pid is not None else None

    def list_permits(
        self, flt: PermitFilter = PermitFilter(), *, page: int | None = None, page_size: int = 50
    ) -> tuple[list[Permit], int]:
        with self._lock:
            if flt.zone_id is not None:
                candidates = [
                    self._permits[pid] for pid in self._zone_index.get(flt.zone_id, ())
                ]
            else:
                candidates = list(self._permits.values())
            items = [p for p in candidates if flt.matches(p)]
        items.sort(key=lambda p: p.id)
        total = len(items)
        if page is not None:
            start = (page - 1) * page_size
            items = items[start : start + page_size]
        return items, total

    # --- audit ---

    def audit_rows(
        self, start_seq: int | None = None, end_seq: int | None = None
    ) -> list[tuple[AuditEvent, dict[str, Any]]]:
        with self._lock:
            rows = list(self._audit)
        lo = (start_seq - 1) if start_seq else 0
        hi = end_seq if end_seq is not None else len(rows)
        return rows[max(lo, 0) : hi]

    def last_audit_seq(self) -> int:
        with self._lock:
            return len(self._audit)

    def _corrupt_audit(self, seq: int, **overrides) -> None:
        """Test hook: mutate a stored event/payload in place (tamper)."""
        with self._lock:
            event, payload = self._audit[seq - 1]
            payload = overrides.pop("payload", payload)
            event = replace(event, **overrides) if overrides else event
            self._audit[seq - 1] = (event, payload)

    # --- notifications ---

    def set_notification_status(self, notification_id: int, status: DeliveryStatus) -> None:
        with self._lock:
            n = self._notifications[notification_id]
            self._notifications[notification_id] = replace(n, delivery_status=status)

    def list_notifications(
        self, *, permit_id: int | None = None, trigger: Trigger | None = None,
        recipient: str | None = None,
    ) -> list[Notification]:
        with self._lock:
            out = list(self._notifications.values())
        if permit_id is not None:
            out = [n for n in out if n.permit_id == permit_id]
        if trigger is not None:
            out = [n for n in out if n.trigger == trigger]
        if recipient is not None:
            out = [n for n in out if n.recipient == recipient]
        return sorted(out, key=lambda n: n.id)

    # --- accounts ---

    def get_account(self, user_id: str) -> UserAccount | None:
        with self._lock:
            return self._accounts.get(user_id)

    def put_account(self, account: UserAccount, audit: AuditDraft | None = None,
                    now: datetime | None = None) -> None:
        with self._lock:
            self._accounts[account.user.user_id] = account
            if audit is not None:
                self.apply(WriteBatch(now=now or datetime.now().astimezone(), audit_drafts=[audit]))

    def list_accounts(self) -> list[UserAccount]:
        with self._lock:
            return sorted(self._accounts.values(), key=lambda a: a.user.user_id)

    # --- registries ---

    def put_machine(self, rec: MachineRecord) -> None:
        with self._lock:
            self._machines[rec.machine_id] = rec

    def get_machine(self, machine_id: str) -> MachineRecord | None:
        with self._lock:
            return self._machines.get(machine_id)

    def list_machines(self) -> list[MachineRecord]:
        with self._lock:
            return sorted(self._machines.values(), key=lambda m: m.machine_id)

    def put_contractor(self, rec: ContractorRecord) -> None:
        with self._lock:
            self._contractors[rec.contractor_id] = rec

    def get_contractor(self, contractor_id: str) -> ContractorRecord | None:
        with self._lock:
            return self._contractors.get(contractor_id)

    def list_contractors(self) -> list[ContractorRecord]:
        with self._lock:
            return sorted(self._contractors.values(), key=lambda c: c.contractor_id)

    def put_incident(self, rec: IncidentRecord) -> None:
        with self._lock:
            self._incidents[rec.incident_id] = rec

    def get_incident(self, incident_id: int) -> IncidentRecord | None:
        with self._lock:
            return self._incidents.get(incident_id)

    def list_incidents(
        self, *, zone_id: str | None = None, status: str | None = None
    ) -> list[IncidentRecord]:
        with self._lock:
            out = list(self._incidents.values())
        if zone_id is not None:
            out = [i for i in out if i.zone_id == zone_id]
        if status is not None:
            out = [i for i in out if i.status == status]
        return sorted(out, key=lambda i: i.incident_id)

    def close(self) -> None:
        pass


_SCHEMA = """
CREATE TABLE IF NOT EXISTS counters (name TEXT PRIMARY KEY, value INTEGER NOT NULL);
CREATE TABLE IF NOT EXISTS permits (
    id INTEGER PRIMARY KEY, qr_token TEXT NOT NULL, status TEXT NOT NULL,
    zone_id TEXT NOT NULL, category TEXT NOT NULL, issuer_id TEXT NOT NULL,
    valid_to TEXT NOT NULL, version INTEGER NOT NULL, doc TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_permits_qr ON permits (qr_token);
CREATE INDEX IF NOT EXISTS idx_permits_status ON permits (status);
CREATE INDEX IF NOT EXISTS idx_permits_zone ON permits (zone_id);
CREATE INDEX IF NOT EXISTS idx_permits_valid_to ON permits (valid_to);
CREATE TABLE IF NOT EXISTS audit_events (
    seq INTEGER PRIMARY KEY, at TEXT NOT NULL, actor TEXT NOT NULL,
    entity_kind TEXT NOT NULL, entity_id TEXT NOT NULL, action TEXT NOT NULL,
    payload_digest TEXT NOT NULL, prev_hash TEXT NOT NULL, hash TEXT NOT NULL,
    payload TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS notifications (
    id INTEGER PRIMARY KEY, created_at TEXT NOT NULL, recipient TEXT NOT NULL,
    trigger_kind TEXT NOT NULL, permit_id INTEGER NOT NULL, permit_revision INTEGER NOT NULL,
    delivery_status TEXT NOT NULL, channel TEXT NOT NULL,
    UNIQUE (permit_id, trigger_kind, recipient, permit_revision)
);
CREATE TABLE IF NOT EXISTS accounts (
    user_id TEXT PRIMARY KEY, salt BLOB NOT NULL, password_hash BLOB NOT NULL, doc TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS machines (machine_id TEXT PRIMARY KEY, doc TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS contractors (contractor_id TEXT PRIMARY KEY, doc TEXT NOT NULL);
CREATE TABLE IF NOT EXISTS incidents (incident_id INTEGER PRIMARY KEY, doc TEXT NOT NULL);
"""


class SqliteStorage:
    """Durable relational backend.

    One shared connection; a process-level RLock plus BEGIN IMMEDIATE keep
    writers serialized.  WAL mode so readers proceed during writes.
    """

    def __init__(self, path: str | Path):
        self._path = str(path)
        self._lock = threading.RLock()
        self._conn = sqlite3.connect(
            self._path, check_same_thread=False, timeout=30, isolation_level=None
        )
        self._conn.execute("PRAGMA journal_mode=WAL")
        self._conn.execute("PRAGMA synchronous=NORMAL")
        with self._lock, self._conn:
            self._conn.executescript(_SCHEMA)

    # --- id allocation ---

    def next_permit_id(self) -> int:
        return self._next("permit")

    def next_incident_id(self) -> int:
        return self._next("incident")

    def _next(self, name: str) -> int:
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT INTO counters (name, value) VALUES (?, 1) "
                "ON CONFLICT(name) DO UPDATE SET value = value + 1",
                (name,),
            )
            row = self._conn.execute("SELECT value FROM counters WHERE name = ?", (name,)).fetchone()
            return int(row[0])

    # --- atomic batch ---

    def apply(self, batch: WriteBatch) -> ApplyResult:
        with self._lock:
            cur = self._conn.cursor()
            try:
                cur.execute("BEGIN IMMEDIATE")
                result = ApplyResult()
                for permit in batch.permit_inserts:
                    stored = replace(permit, version=1)
                    self._insert_permit_row(cur, stored)
                    result.permits.append(stored)
                for state, expected in batch.permit_saves:
                    stored = replace(state, version=expected + 1)
                    updated = cur.execute(
                        "UPDATE permits SET qr_token=?, status=?, zone_id=?, category=?, "
                        "issuer_id=?, valid_to=?, version=?, doc=? WHERE id=? AND version=?",
                        (
                            stored.qr_token,
                            stored.status.value,
                            stored.zone_id,
                            stored.category.value,
                            stored.issuer_id,
                            rfc3339(stored.window.valid_to),
                            stored.version,
                            json.dumps(stored.to_dict()),
                            stored.id,
                            expected,
                        ),
                    ).rowcount
                    if updated != 1:
                        raise ConcurrencyConflictError(
                            f"permit {state.id}: version {expected} is stale"
                        )
                    result.permits.append(stored)
                for rec in batch.incident_puts:
                    cur.execute(
                        "INSERT INTO incidents (incident_id, doc) VALUES (?, ?) "
                        "ON CONFLICT(incident_id) DO UPDATE SET doc = excluded.doc",
                        (rec.incident_id, json.dumps(rec.to_dict())),
                    )

                row = cur.execute("SELECT seq, hash FROM audit_events ORDER BY seq DESC LIMIT 1").fetchone()
                seq, prev = (row[0], row[1]) if row else (0, GENESIS_HASH)
                for draft in batch.audit_drafts:
                    seq += 1
                    event = extend_chain(prev, seq, batch.now, draft)
                    cur.execute(
                        "INSERT INTO audit_events (seq, at, actor, entity_kind, entity_id, action, "
                        "payload_digest, prev_hash, hash, payload) VALUES (?,?,?,?,?,?,?,?,?,?)",
                        (
                            event.seq,
                            rfc3339(event.at),
                            event.actor,
                            event.entity_kind,
                            event.entity_id,
                            event.action,
                            event.payload_digest,
                            event.prev_hash,
                            event.hash,
                            json.dumps(draft.payload, sort_keys=True),
                        ),
                    )
                    prev = event.hash
                    result.events.append(event)

                for nd in batch.notification_drafts:
                    inserted = cur.execute(
                        "INSERT OR IGNORE INTO notifications (created_at, recipient, trigger_kind, "
                        "permit_id, permit_revision, delivery_status, channel) VALUES (?,?,?,?,?,?,?)",
                        (
                            rfc3339(batch.now),
                            nd.recipient,
                            nd.trigger.value,
                            nd.permit_id,
                            nd.permit_revision,
                            DeliveryStatus.PENDING.value,
                            nd.channel,
                        ),
                    ).rowcount
                    if inserted:
                        nid = cur.lastrowid
                        result.notifications.append(
                            Notification(
                                id=nid,
                                created_at=batch.now,
                                recipient=nd.recipient,
                                trigger=nd.trigger,
                                permit_id=nd.permit_id,
                                permit_revision=nd.permit_revision,
                                channel=nd.channel,
                            )
                        )
                self._conn.commit()
                return result
            except BaseException as exc:
                self._conn.rollback()
                if isinstance(exc, sqlite3.IntegrityError):
                    raise StorageFailureError(str(exc)) from exc
                raise

    def _insert_permit_row(self, cur, permit: Permit) -> None:
        cur.execute(
            "INSERT INTO permits (id, qr_token, status, zone_id, category, issuer_id, valid_to, "
            "version, doc) VALUES (?,?,?,?,?,?,?,?,?)",
            (
                permit.id,
                permit.qr_token,
                permit.status.value,
                permit.zone_id,
                permit.category.value,
                permit.issuer_id,
                rfc3339(permit.window.valid_to),
                permit.version,
                json.dumps(permit.to_dict()),
            ),
        )

    # --- permits ---

    def get_permit(self, permit_id: int) -> Permit | None:
        with self._lock:
            row = self._conn.execute("SELECT doc FROM permits WHERE id = ?", (permit_id,)).fetchone()
        return Permit.from_dict(json.loads(row[0])) if row else None

    def get_permit_by_qr(self, token: str) -> Permit | None:
        with self._lock:
            row = self._conn.execute("SELECT doc FROM permits WHERE qr_token = ?", (token,)).fetchone()
        return Permit.from_dict(json.loads(row[0])) if row else None

    def list_permits(
        self, flt: PermitFilter = PermitFilter(), *, page: int | None = None, page_size: int = 50
    ) -> tuple[list[Permit], int]:
        clauses, params = [], []
        if flt.statuses is not None:
            marks = ",".join("?" for _ in flt.statuses)
            clauses.append(f"status IN ({marks})")
            params += [s.value for s in sorted(flt.statuses, key=lambda s: s.value)]
        if flt.zone_id is not None:
            clauses.append("zone_id = ?")
            params.append(flt.zone_id)
        if flt.category is not None:
            clauses.append("category = ?")
            params.append(flt.category.value)
        if flt.issuer_id is not None:
            clauses.append("issuer_id = ?")
            params.append(flt.issuer_id)
        if flt.valid_to_before is not None:
            # stored valid_to is second-resolution; floor the bound so the
            # lexicographic comparison matches datetime semantics
            clauses.append("valid_to <= ?")
            params.append(rfc3339(flt.valid_to_before.replace(microsecond=0)))
        where = (" WHERE " + " AND ".join(clauses)) if clauses else ""
        sql = f"SELECT doc FROM permits{where} ORDER BY id"
        count_sql = f"SELECT COUNT(*) FROM permits{where}"
        with self._lock:
            total = self._conn.execute(count_sql, params).fetchone()[0]
            if page is not None:
                sql += " LIMIT ? OFFSET ?"
                params = params + [page_size, (page - 1) * page_size]
            rows = self._conn.execute(sql, params).fetchall()
        return [Permit.from_dict(json.loads(r[0])) for r in rows], total

    # --- audit ---

    def audit_rows(
        self, start_seq: int | None = None, end_seq: int | None = None
    ) -> list[tuple[AuditEvent, dict[str, Any]]]:
        clauses, params = [], []
        if start_seq is not None:
            clauses.append("seq >= ?")
            params.append(start_seq)
        if end_seq is not None:
            clauses.append("seq <= ?")
            params.append(end_seq)
        where = (" WHERE " + " AND ".join(clauses)) if clauses else ""
        with self._lock:
            rows = self._conn.execute(
                f"SELECT seq, at, actor, entity_kind, entity_id, action, payload_digest, "
                f"prev_hash, hash, payload FROM audit_events{where} ORDER BY seq",
                params,
            ).fetchall()
        out = []
        for r in rows:
            event = AuditEvent(
                seq=r[0],
                at=parse_rfc3339(r[1]),
                actor=r[2],
                entity_kind=r[3],
                entity_id=r[4],
                action=r[5],
                payload_digest=r[6],
                prev_hash=r[7],
                hash=r[8],
            )
            out.append((event, json.loads(r[9])))
        return out

    def last_audit_seq(self) -> int:
        with self._lock:
            row = self._conn.execute("SELECT MAX(seq) FROM audit_events").fetchone()
        return int(row[0] or 0)

    def _corrupt_audit(self, seq: int, **overrides) -> None:
        """Test hook: tamper with a stored row, bypassing the chain writer."""
        payload = overrides.pop("payload", None)
        with self._lock, self._conn:
            if payload is not None:
                self._conn.execute(
                    "UPDATE audit_events SET payload = ? WHERE seq = ?",
                    (json.dumps(payload, sort_keys=True), seq),
                )
            for column, value in overrides.items():
                if column == "at":
                    value = rfc3339(value)
                self._conn.execute(
                    f"UPDATE audit_events SET {column} = ? WHERE seq = ?", (value, seq)
                )

    # --- notifications ---

    def set_notification_status(self, notification_id: int, status: DeliveryStatus) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "UPDATE notifications SET delivery_status = ? WHERE id = ?",
                (status.value, notification_id),
            )

    def list_notifications(
        self, *, permit_id: int | None = None, trigger: Trigger | None = None,
        recipient: str | None = None,
    ) -> list[Notification]:
        clauses, params = [], []
        if permit_id is not None:
            clauses.append("permit_id = ?")
            params.append(permit_id)
        if trigger is not None:
            clauses.append("trigger_kind = ?")
            params.append(trigger.value)
        if recipient is not None:
            clauses.append("recipient = ?")
            params.append(recipient)
        where = (" WHERE " + " AND ".join(clauses)) if clauses else ""
        with self._lock:
            rows = self._conn.execute(
                f"SELECT id, created_at, recipient, trigger_kind, permit_id, permit_revision, "
                f"delivery_status, channel FROM notifications{where} ORDER BY id",
                params,
            ).fetchall()
        return [
            Notification(
                id=r[0],
                created_at=parse_rfc3339(r[1]),
                recipient=r[2],
                trigger=Trigger(r[3]),
                permit_id=r[4],
                permit_revision=r[5],
                delivery_status=DeliveryStatus(r[6]),
                channel=r[7],
            )
            for r in rows
        ]

    # --- accounts ---

    def get_account(self, user_id: str) -> UserAccount | None:
        with self._lock:
            row = self._conn.execute(
                "SELECT salt, password_hash, doc FROM accounts WHERE user_id = ?", (user_id,)
            ).fetchone()
        if not row:
            return None
        doc = json.loads(row[2])
        return UserAccount(user=_user_from_dict(doc), salt=row[0], password_hash=row[1])

    def put_account(self, account: UserAccount, audit: AuditDraft | None = None,
                    now: datetime | None = None) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                "INSERT INTO accounts (user_id, salt, password_hash, doc) VALUES (?,?,?,?) "
                "ON CONFLICT(user_id) DO UPDATE SET salt=excluded.salt, "
                "password_hash=excluded.password_hash, doc=excluded.doc",
                (
                    account.user.user_id,
                    account.salt,
                    account.password_hash,
                    json.dumps(account.user.to_dict()),
                ),
            )
        if audit is not None:
            self.apply(WriteBatch(now=now or datetime.now().astimezone(), audit_drafts=[audit]))

    def list_accounts(self) -> list[UserAccount]:
        with self._lock:
            rows = self._conn.execute(
                "SELECT salt, password_hash, doc FROM accounts ORDER BY user_id"
            ).fetchall()
        return [
            UserAccount(user=_user_from_dict(json.loads(r[2])), salt=r[0], password_hash=r[1])
            for r in rows
        ]

    # --- registries ---

    def put_machine(self, rec: MachineRecord) -> None:
        self._put_doc("machines", "machine_id", rec.machine_id, rec.to_dict())

    def get_machine(self, machine_id: str) -> MachineRecord | None:
        doc = self._get_doc("machines", "machine_id", machine_id)
        return MachineRecord.from_dict(doc) if doc else None

    def list_machines(self) -> list[MachineRecord]:
        return [MachineRecord.from_dict(d) for d in self._list_docs("machines", "machine_id")]

    def put_contractor(self, rec: ContractorRecord) -> None:
        self._put_doc("contractors", "contractor_id", rec.contractor_id, rec.to_dict())

    def get_contractor(self, contractor_id: str) -> ContractorRecord | None:
        doc = self._get_doc("contractors", "contractor_id", contractor_id)
        return ContractorRecord.from_dict(doc) if doc else None

    def list_contractors(self) -> list[ContractorRecord]:
        return [ContractorRecord.from_dict(d) for d in self._list_docs("contractors", "contractor_id")]

    def put_incident(self, rec: IncidentRecord) -> None:
        self._put_doc("incidents", "incident_id", rec.incident_id, rec.to_dict())

    def get_incident(self, incident_id: int) -> IncidentRecord | None:
        doc = self._get_doc("incidents", "incident_id", incident_id)
        return IncidentRecord.from_dict(doc) if doc else None

    def list_incidents(
        self, *, zone_id: str | None = None, status: str | None = None
    ) -> list[IncidentRecord]:
        out = [IncidentRecord.from_dict(d) for d in self._list_docs("incidents", "incident_id")]
        if zone_id is not None:
            out = [i for i in out if i.zone_id == zone_id]
        if status is not None:
            out = [i for i in out if i.status == status]
        return out

    def _put_doc(self, table: str, key_col: str, key, doc: dict) -> None:
        with self._lock, self._conn:
            self._conn.execute(
                f"INSERT INTO {table} ({key_col}, doc) VALUES (?, ?) "
                f"ON CONFLICT({key_col}) DO UPDATE SET doc = excluded.doc",
                (key, json.dumps(doc)),
            )

    def _get_doc(self, table: str, key_col: str, key) -> dict | None:
        with self._lock:
            row = self._conn.execute(
                f"SELECT doc FROM {table} WHERE {key_col} = ?", (key,)
            ).fetchone()
        return json.loads(row[0]) if row else None

    def _list_docs(self, table: str, key_col: str) -> list[dict]:
        with self._lock:
            rows = self._conn.execute(f"SELECT doc FROM {table} ORDER BY {key_col}").fetchall()
        return [json.loads(r[0]) for r in rows]

    def close(self) -> None:
        with self._lock:
            self._conn.close()


def _user_from_dict(d: dict[str, Any]) -> User:
    from .model import Role

    return User(
        user_id=d["user_id"],
        display_name=d["display_name"],
        roles=frozenset(Role(r) for r in d["roles"]),
        active=d["active"],
    )


def open_storage(mode: str):
    """``memory`` or ``sqlite:<path>``."""
    if mode == "memory":
        return InMemoryStorage()
    if mode.startswith("sqlite:"):
        return SqliteStorage(mode.split(":", 1)[1])
    raise StorageFailureError(f"unknown storage mode: {mode!r}")
