"""Domain facade: lifecycle, validation, registries, sweep and audit wiring.

Concurrency model: mutating operations on one permit are serialized by a
per-permit lock (single writer per aggregate); the storage layer's
compare-and-swap versioning backs this up.  Every state change and its
audit event(s) go through one atomic ``WriteBatch``; notifications are
enqueued in the same batch (deduplicated at the persistence layer) and
dispatched after commit.
"""

from __future__ import annotations

import threading
from collections import defaultdict
from dataclasses import dataclass
from datetime import datetime, timedelta
from pathlib import Path
from typing import Any, Iterable

from .clock import Clock, SystemClock, as_utc, rfc3339
from .config import ServiceConfig
from .engine import (
    ActionContext,
    append_monitor_entry,
    initiate as engine_initiate,
    perform,
    record_gas_reading as engine_record_gas,
    was_renewed,
)
from .errors import (
    ConcurrencyConflictError,
    InvalidIntervalError,
    NotFoundError,
    UnauthorizedRoleError,
    UnknownContractorError,
    UnknownPermitLinkError,
    UnknownRecipientError,
)
from .ledger import AuditDraft, AuditLedger
from .model import (
    ACTIVE_STATUSES,
    MonitorKind,
    Permit,
    PermitCategory,
    PermitDraft,
    PermitStatus,
    PermitUpdates,
    Role,
)
from .notifications import (
    Dispatcher,
    FileSink,
    MemorySink,
    Notification,
    NotificationSink,
    SweepScheduler,
    Trigger,
)
from .rbac import SYSTEM, Authenticator, Identity, User
from .registries import (
    ContractorRecord,
    IncidentRecord,
    MachineRecord,
    OperationalStatus,
    RESTRICTING_SEVERITIES,
    Severity,
    read_contractors_csv,
    read_incidents_csv,
    read_machines_csv,
    restricting_incidents,
)
from .storage import NotificationDraft, PermitFilter, WriteBatch, open_storage
from .transitions import Action, check_privilege
from .validation import (
    RULE_ZONE_RESTRICTION,
    RuleVerdict,
    ValidationReport,
    validate as run_rules,
)

MAX_CAS_RETRIES = 3


class _PerKeyLocks:
    def __init__(self):
        self._guard = threading.Lock()
        self._locks: dict[Any, threading.Lock] = defaultdict(threading.Lock)

    def get(self, key) -> threading.Lock:
        with self._guard:
            return self._locks[key]


class PermitService:
    """Single entry point for all domain operations."""

    def __init__(
        self,
        config: ServiceConfig | None = None,
        *,
        storage=None,
        clock: Clock | None = None,
        sink: NotificationSink | None = None,
    ):
        self.config = config or ServiceConfig()
        self.clock = clock or SystemClock()
        self.storage = storage if storage is not None else open_storage(self.config.storage)
        self.ledger = AuditLedger(self.storage)
        if sink is None:
            sink = self._sink_from_config(self.config.notification_sink)
        self.sink = sink
        self.dispatcher = Dispatcher(
            self.storage, sink, backoff_base=self.config.notification_backoff_base
        )
        secret = self.config.secret_bytes() or b"ptw-dev-secret"
        self.auth = Authenticator(
            self.storage, secret, self.config.session_lifetime, self.clock
        )
        self._permit_locks = _PerKeyLocks()
        self._sweep_mutex = threading.Lock()
        self.sweeper = SweepScheduler(self.run_expiry_sweep, self.config.sweep.sweep_interval)

    @staticmethod
    def _sink_from_config(spec: str) -> NotificationSink:
        if spec == "memory":
            return MemorySink()
        return FileSink(spec.split(":", 1)[1])

    def now(self) -> datetime:
        return self.clock.now()

    def close(self) -> None:
        self.sweeper.stop()
        self.storage.close()

    # ------------------------------------------------------------------
    # bootstrap / users / auth
    # ------------------------------------------------------------------

    def bootstrap(self) -> None:
        """Seed the initial admin account if no users exist yet."""
        if self.storage.get_account(self.config.bootstrap_admin_id) is None:
            user = User(
                self.config.bootstrap_admin_id, "Bootstrap Admin", frozenset({Role.ADMIN})
            )
            from .rbac import make_account

            self.storage.put_account(
                make_account(user, self.config.bootstrap_admin_password),
                audit=AuditDraft(
                    actor="system",
                    entity_kind="user",
                    entity_id=user.user_id,
                    action="bootstrap_admin",
                    payload={"user_id": user.user_id},
                ),
                now=self.now(),
            )

    def login(self, user_id: str, password: str):
        session = self.auth.login(user_id, password)
        self.storage.apply(
            WriteBatch(
                now=self.now(),
                audit_drafts=[
                    AuditDraft(
                        actor=user_id,
                        entity_kind="user",
                        entity_id=user_id,
                        action="login",
                        payload={"user_id": user_id},
                    )
                ],
            )
        )
        return session

    def create_user(
        self, actor: Identity, user_id: str, display_name: str, roles: frozenset[Role],
        password: str,
    ) -> User:
        user = self.auth.create_user(actor, user_id, display_name, roles, password)
        self._audit_user_event(actor, user_id, "create_user", user)
        return user

    def update_user(self, actor: Identity, user_id: str, **kwargs) -> User:
        user = self.auth.update_user(actor, user_id, **kwargs)
        self._audit_user_event(actor, user_id, "update_user", user)
        return user

    def _audit_user_event(self, actor: Identity, user_id: str, action: str, user: User) -> None:
        self.storage.apply(
            WriteBatch(
                now=self.now(),
                audit_drafts=[
                    AuditDraft(
                        actor=actor.user_id,
                        entity_kind="user",
                        entity_id=user_id,
                        action=action,
                        payload=user.to_dict(),
                    )
                ],
            )
        )

    # ------------------------------------------------------------------
    # permit lifecycle
    # ------------------------------------------------------------------

    def initiate(self, actor: Identity, draft: PermitDraft) -> Permit:
        now = self.now()
        permit_id = self.storage.next_permit_id()
        permit = engine_initiate(
            actor, draft, permit_id, now, max_duration=self.config.max_permit_duration
        )
        result = self.storage.apply(
            WriteBatch(
                now=now,
                permit_inserts=[permit],
                audit_drafts=[
                    AuditDraft(
                        actor=actor.user_id,
                        entity_kind="permit",
                        entity_id=str(permit.id),
                        action=Action.INITIATE.value,
                        payload={
                            "from_status": PermitStatus.DRAFT.value,
                            "to_status": PermitStatus.DRAFT.value,
                            "revision": permit.revision,
                            "category": permit.category.value,
                            "zone_id": permit.zone_id,
                            "qr_token": permit.qr_token,
                        },
                    )
                ],
            )
        )
        return result.permits[0]

    def submit(self, permit_id: int, actor: Identity) -> Permit:
        def after(permit: Permit) -> list[NotificationDraft]:
            if was_renewed(permit):
                return self._notification_drafts(permit, Trigger.RENEWED)
            return []

        return self._transition(permit_id, Action.SUBMIT, actor, notifications=after)

    def validate_permit(self, permit_id: int, actor: Identity) -> tuple[Permit, ValidationReport]:
        """Stage 2: run the rules; pass moves to Validated, fail auto-rejects
        (system actor), attaching the report to the audit payload either way."""
        check_privilege(Action.VALIDATE, actor.user_id, actor.roles)
        report_holder: dict[str, ValidationReport] = {}

        def act(permit: Permit, now: datetime) -> _Acted:
            report = self._run_validation(permit, now)
            report_holder["report"] = report
            extra = {"validation_report": report.to_dict()}
            if report.overall:
                ctx = ActionContext(validation_report=report)
                return _Acted(perform(permit, Action.VALIDATE, actor, now, ctx), actor, extra)
            return _Acted(perform(permit, Action.REJECT, SYSTEM, now), SYSTEM, extra)

        permit = self._locked_apply(permit_id, act)
        return permit, report_holder["report"]

    def sign(self, permit_id: int, actor: Identity) -> Permit:
        def after(permit: Permit) -> list[NotificationDraft]:
            if permit.status == PermitStatus.APPROVED:
                return self._notification_drafts(permit, Trigger.APPROVED)
            return []

        return self._transition(permit_id, Action.SIGN, actor, notifications=after)

    def accept(self, permit_id: int, actor: Identity) -> Permit:
        contractor_valid = None
        record = self.storage.get_contractor(actor.user_id)
        if record is not None:
            contractor_valid = record.compliance_valid(self.now().date())
        ctx = ActionContext(
            contractor_valid=contractor_valid, gas_validity=self.config.gas_validity
        )
        return self._transition(permit_id, Action.ACCEPT, actor, ctx=ctx)

    def suspend(self, permit_id: int, actor: Identity) -> Permit:
        return self._transition(
            permit_id,
            Action.SUSPEND,
            actor,
            notifications=lambda p: self._notification_drafts(p, Trigger.SUSPENDED),
        )

    def resume(self, permit_id: int, actor: Identity) -> Permit:
        ctx = ActionContext(gas_validity=self.config.gas_validity)
        return self._transition(permit_id, Action.RESUME, actor, ctx=ctx)

    def revoke(self, permit_id: int, actor: Identity) -> Permit:
        return self._transition(permit_id, Action.REVOKE, actor)

    def request_close(
        self, permit_id: int, actor: Identity, summary: str, feedback: str = ""
    ) -> Permit:
        ctx = ActionContext(closure_summary=summary, closure_feedback=feedback)
        return self._transition(permit_id, Action.REQUEST_CLOSE, actor, ctx=ctx)

    def confirm_close(self, permit_id: int, actor: Identity) -> Permit:
        return self._transition(
            permit_id,
            Action.CONFIRM_CLOSE,
            actor,
            notifications=lambda p: self._notification_drafts(p, Trigger.CLOSED),
        )

    def revise(self, permit_id: int, actor: Identity, updates: PermitUpdates) -> Permit:
        ctx = ActionContext(updates=updates, max_duration=self.config.max_permit_duration)
        return self._transition(permit_id, Action.REVISE, actor, ctx=ctx)

    def record_gas_reading(
        self,
        permit_id: int,
        actor: Identity,
        oxygen_pct: float,
        lel_pct: float,
        co_ppm: float,
        taken_at: datetime | None = None,
    ) -> Permit:
        def act(permit: Permit, now: datetime) -> _Acted:
            permit, reading = engine_record_gas(
                permit, actor, oxygen_pct, lel_pct, co_ppm, now, self.config.gas, taken_at
            )
            result = _NonTransition(permit, Action.RECORD_GAS)
            return _Acted(result, actor, {"reading": reading.to_dict()})

        return self._locked_apply(permit_id, act)

    def append_monitor(
        self, permit_id: int, actor: Identity, kind: MonitorKind, payload: str,
        at: datetime | None = None,
    ) -> Permit:
        def act(permit: Permit, now: datetime) -> _Acted:
            permit, entry = append_monitor_entry(permit, actor, kind, payload, now, at)
            return _Acted(_NonTransition(permit, Action.MONITOR), actor, {"entry": entry.to_dict()})

        return self._locked_apply(permit_id, act)

    # ------------------------------------------------------------------
    # reads
    # ------------------------------------------------------------------

    def get_permit(self, permit_id: int) -> Permit:
        permit = self.storage.get_permit(permit_id)
        if permit is None:
            raise NotFoundError(f"no permit with id {permit_id}")
        return permit

    def get_permit_by_qr(self, token: str) -> Permit:
        permit = self.storage.get_permit_by_qr(token)
        if permit is None:
            raise NotFoundError(f"no permit for token {token}")
        return permit

    def list_permits(
        self,
        *,
        statuses: frozenset[PermitStatus] | None = None,
        zone_id: str | None = None,
        category: PermitCategory | None = None,
        issuer_id: str | None = None,
        page: int | None = None,
        page_size: int = 50,
    ) -> tuple[list[Permit], int]:
        flt = PermitFilter(
            statuses=statuses, zone_id=zone_id, category=category, issuer_id=issuer_id
        )
        return self.storage.list_permits(flt, page=page, page_size=page_size)

    def permit_audit_trail(self, permit_id: int):
        self.get_permit(permit_id)
        return self.ledger.query(entity_kind="permit", entity_id=permit_id, limit=100000)

    # ------------------------------------------------------------------
    # validation wiring
    # ------------------------------------------------------------------

    def _run_validation(self, candidate: Permit, now: datetime) -> ValidationReport:
        active, _ = self.storage.list_permits(
            PermitFilter(statuses=ACTIVE_STATUSES, zone_id=candidate.zone_id)
        )
        restricted, incident_ids = self.zone_restriction_check(candidate.zone_id)
        if restricted:
            zone_verdict = RuleVerdict(
                RULE_ZONE_RESTRICTION,
                False,
                "zone restricted by open incident(s): "
                + ", ".join(str(i) for i in incident_ids),
            )
        else:
            zone_verdict = RuleVerdict(RULE_ZONE_RESTRICTION, True)
        return run_rules(
            candidate,
            active,
            now,
            self.config.conflict_matrix,
            max_duration=self.config.max_permit_duration,
            extra_verdicts=(zone_verdict,),
        )

    # ------------------------------------------------------------------
    # registries
    # ------------------------------------------------------------------

    def report_incident(
        self,
        actor: Identity,
        zone_id: str,
        severity: Severity,
        root_cause: str,
        linked_permit_id: int | None = None,
        reported_at: datetime | None = None,
    ) -> IncidentRecord:
        now = self.now()
        record = IncidentRecord(
            incident_id=self.storage.next_incident_id(),
            reported_at=as_utc(reported_at) if reported_at else now,
            zone_id=zone_id,
            severity=severity,
            root_cause=root_cause,
            linked_permit_id=linked_permit_id,
            status="open",
        )
        drafts = [
            AuditDraft(
                actor=actor.user_id,
                entity_kind="incident",
                entity_id=str(record.incident_id),
                action="report_incident",
                payload=record.to_dict(),
            )
        ]

        if linked_permit_id is None:
            self.storage.apply(WriteBatch(now=now, incident_puts=[record], audit_drafts=drafts))
            return record

        # incident + auto-suspension form one atomic unit with their audits
        with self._permit_locks.get(linked_permit_id):
            permit = self.storage.get_permit(linked_permit_id)
            if permit is None:
                raise UnknownPermitLinkError(f"no permit with id {linked_permit_id}")
            batch = WriteBatch(now=now, incident_puts=[record], audit_drafts=drafts)
            if (
                severity in RESTRICTING_SEVERITIES
                and permit.status == PermitStatus.IN_PROGRESS
            ):
                result = perform(permit, Action.SUSPEND, SYSTEM, now)
                batch.permit_saves.append((result.permit, permit.version))
                batch.audit_drafts.append(
                    self._transition_audit(
                        result, SYSTEM, {"cause_incident_id": record.incident_id}
                    )
                )
                batch.notification_drafts.extend(
                    self._notification_drafts(result.permit, Trigger.SUSPENDED)
                )
            applied = self.storage.apply(batch)
            self.dispatcher.dispatch_all(applied.notifications)
        return record

    def close_incident(self, actor: Identity, incident_id: int) -> IncidentRecord:
        record = self.storage.get_incident(incident_id)
        if record is None:
            raise NotFoundError(f"no incident with id {incident_id}")
        from dataclasses import replace as dc_replace

        updated = dc_replace(record, status="closed")
        self.storage.apply(
            WriteBatch(
                now=self.now(),
                incident_puts=[updated],
                audit_drafts=[
                    AuditDraft(
                        actor=actor.user_id,
                        entity_kind="incident",
                        entity_id=str(incident_id),
                        action="close_incident",
                        payload=updated.to_dict(),
                    )
                ],
            )
        )
        return updated

    def list_incidents(self, *, zone_id: str | None = None, status: str | None = None):
        return self.storage.list_incidents(zone_id=zone_id, status=status)

    def zone_restriction_check(self, zone_id: str, now: datetime | None = None) -> tuple[bool, list[int]]:
        ids = restricting_incidents(self.storage.list_incidents(zone_id=zone_id), zone_id)
        return bool(ids), ids

    def contractor_compliance_gate(self, acceptor_user_id: str, now: datetime | None = None) -> bool:
        record = self.storage.get_contractor(acceptor_user_id)
        if record is None:
            raise UnknownContractorError(f"no contractor record for {acceptor_user_id}")
        today = (as_utc(now) if now else self.now()).date()
        return record.compliance_valid(today)

    def put_machine(self, actor: Identity, record: MachineRecord) -> MachineRecord:
        self._require_registry_writer(actor)
        if record.inspection_interval_days <= 0:
            raise InvalidIntervalError("inspection interval must be positive")
        self.storage.put_machine(record)
        self._audit_registry(actor, "machine", record.machine_id, "put_machine", record.to_dict())
        return record

    def list_machines(self, *, overdue_only: bool = False) -> list[MachineRecord]:
        machines = self.storage.list_machines()
        if overdue_only:
            today = self.now().date()
            machines = [m for m in machines if m.inspection_overdue(today)]
        return machines

    def put_contractor(self, actor: Identity, record: ContractorRecord) -> ContractorRecord:
        self._require_registry_writer(actor)
        self.storage.put_contractor(record)
        self._audit_registry(
            actor, "contractor", record.contractor_id, "put_contractor", record.to_dict()
        )
        return record

    def list_contractors(self) -> list[ContractorRecord]:
        return self.storage.list_contractors()

    def _require_registry_writer(self, actor: Identity) -> None:
        if actor.is_system:
            return
        if not (actor.roles & {Role.ADMIN, Role.PERMIT_ISSUER}):
            raise UnauthorizedRoleError("registry writes require Admin or PermitIssuer")

    def _audit_registry(
        self, actor: Identity, kind: str, entity_id: str, action: str, payload: dict
    ) -> None:
        self.storage.apply(
            WriteBatch(
                now=self.now(),
                audit_drafts=[
                    AuditDraft(
                        actor=actor.user_id,
                        entity_kind=kind,
                        entity_id=entity_id,
                        action=action,
                        payload=payload,
                    )
                ],
            )
        )

    def bulk_load(self, actor: Identity, kind: str, path: str | Path) -> int:
        """CSV ingestion matching the simulator's generated files."""
        self._require_registry_writer(actor)
        if kind == "machines":
            records = read_machines_csv(path)
            for r in records:
                self.storage.put_machine(r)
        elif kind == "contractors":
            records = read_contractors_csv(path)
            for r in records:
                self.storage.put_contractor(r)
        elif kind == "incidents":
            records = read_incidents_csv(path)
            for r in records:
                self.storage.put_incident(r)
        else:
            raise NotFoundError(f"unknown bulk-load kind: {kind}")
        self._audit_registry(
            actor, "registry", kind, "bulk_load", {"kind": kind, "count": len(records)}
        )
        return len(records)

    # ------------------------------------------------------------------
    # sweep & notifications
    # ------------------------------------------------------------------

    def run_expiry_sweep(self, now: datetime | None = None) -> list[int]:
        """Expire overdue active permits and enqueue expiry/pre-expiry alerts.

        Idempotent: a second sweep at the same instant transitions nothing.
        """
        with self._sweep_mutex:
            now = as_utc(now) if now else self.now()
            due, _ = self.storage.list_permits(
                PermitFilter(statuses=ACTIVE_STATUSES, valid_to_before=now)
            )
            expired_ids: list[int] = []
            for permit in due:
                with self._permit_locks.get(permit.id):
                    current = self.storage.get_permit(permit.id)
                    if (
                        current is None
                        or current.status not in ACTIVE_STATUSES
                        or current.window.valid_to > now
                    ):
                        continue
                    result = perform(current, Action.EXPIRE, SYSTEM, now)
                    batch = WriteBatch(
                        now=now,
                        permit_saves=[(result.permit, current.version)],
                        audit_drafts=[self._transition_audit(result, SYSTEM, {})],
                        notification_drafts=self._notification_drafts(
                            result.permit, Trigger.EXPIRED
                        ),
                    )
                    applied = self.storage.apply(batch)
                    self.dispatcher.dispatch_all(applied.notifications)
                    expired_ids.append(permit.id)

            # pre-expiry warnings (dedup makes re-enqueueing a no-op)
            warning_horizon = now + self.config.sweep.pre_expiry_lead
            nearing, _ = self.storage.list_permits(
                PermitFilter(statuses=ACTIVE_STATUSES, valid_to_before=warning_horizon)
            )
            for permit in nearing:
                if permit.window.valid_to <= now:
                    continue
                drafts = self._notification_drafts(permit, Trigger.PRE_EXPIRY_WARNING)
                if drafts:
                    applied = self.storage.apply(
                        WriteBatch(now=now, notification_drafts=drafts)
                    )
                    self.dispatcher.dispatch_all(applied.notifications)
            return expired_ids

    def enqueue_notification(
        self, recipient: str, trigger: Trigger, permit_id: int
    ) -> Notification | None:
        """Direct outbox access; internal flows use the batched path."""
        if self.storage.get_account(recipient) is None:
            raise UnknownRecipientError(f"no such user: {recipient}")
        permit = self.get_permit(permit_id)
        applied = self.storage.apply(
            WriteBatch(
                now=self.now(),
                notification_drafts=[
                    NotificationDraft(
                        recipient=recipient,
                        trigger=trigger,
                        permit_id=permit_id,
                        permit_revision=permit.revision,
                        channel=self.sink.name,
                    )
                ],
            )
        )
        if not applied.notifications:
            return None  # deduplicated
        self.dispatcher.dispatch_all(applied.notifications)
        return self.storage.list_notifications(
            permit_id=permit_id, trigger=trigger, recipient=recipient
        )[0]

    def _notification_drafts(self, permit: Permit, trigger: Trigger) -> list[NotificationDraft]:
        drafts = []
        for recipient in permit.stakeholders():
            if self.storage.get_account(recipient) is None:
                continue  # permits may name outside parties; alerts need accounts
            drafts.append(
                NotificationDraft(
                    recipient=recipient,
                    trigger=trigger,
                    permit_id=permit.id,
                    permit_revision=permit.revision,
                    channel=self.sink.name,
                )
            )
        return drafts

    # ------------------------------------------------------------------
    # transition plumbing
    # ------------------------------------------------------------------

    def _transition(
        self,
        permit_id: int,
        action: Action,
        actor: Identity,
        *,
        ctx: ActionContext | None = None,
        notifications=None,
    ) -> Permit:
        def act(permit: Permit, now: datetime) -> _Acted:
            return _Acted(perform(permit, action, actor, now, ctx or ActionContext()), actor, {})

        return self._locked_apply(permit_id, act, notifications=notifications)

    def _locked_apply(self, permit_id: int, act, *, notifications=None) -> Permit:
        """Load-act-save under the permit's lock; retry on CAS conflicts."""
        with self._permit_locks.get(permit_id):
            for attempt in range(MAX_CAS_RETRIES):
                permit = self.storage.get_permit(permit_id)
                if permit is None:
                    raise NotFoundError(f"no permit with id {permit_id}")
                now = self.now()
                acted = act(permit, now)
                batch = WriteBatch(
                    now=now,
                    permit_saves=[(acted.result.permit, permit.version)],
                    audit_drafts=[
                        self._transition_audit(acted.result, acted.actor, acted.extra)
                    ],
                )
                if notifications is not None:
                    batch.notification_drafts.extend(notifications(acted.result.permit))
                try:
                    applied = self.storage.apply(batch)
                except ConcurrencyConflictError:
                    if attempt == MAX_CAS_RETRIES - 1:
                        raise
                    continue
                self.dispatcher.dispatch_all(applied.notifications)
                return applied.permits[0]
        raise AssertionError("unreachable")

    def _transition_audit(self, result, actor: Identity, extra: dict) -> AuditDraft:
        payload = {
            "from_status": result.from_status.value,
            "to_status": result.to_status.value,
            "revision": result.permit.revision,
            **extra,
        }
        return AuditDraft(
            actor=actor.user_id,
            entity_kind="permit",
            entity_id=str(result.permit.id),
            action=result.action.value,
            payload=payload,
        )


@dataclass
class _Acted:
    """What an act closure produced: the engine result, the audit actor and
    extra audit payload fields."""

    result: Any
    actor: Identity
    extra: dict


class _NonTransition:
    """Adapter so field-only operations flow through the same plumbing."""

    def __init__(self, permit: Permit, action: Action):
        self.permit = permit
        self.action = action
        self.from_status = permit.status
        self.to_status = permit.status
