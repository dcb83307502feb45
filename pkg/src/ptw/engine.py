"""Pure lifecycle operations over immutable permits.

Every function takes a permit snapshot and returns a new one; persistence,
audit and notifications are layered on by ``ptw.service``.  Checks run in
a fixed order: transition-table lookup (illegal-transition), privilege
(unauthorized-role), then guards (guard-failed).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime, timedelta

from .clock import as_utc
from .errors import (
    DuplicateSignatureError,
    GuardFailedError,
    MissingReportError,
    OutOfOrderEntryError,
    PtwError,
    SelfConfirmationError,
    UnauthorizedRoleError,
    WrongStatusError,
)
from .model import (
    GAS_GATED_CATEGORIES,
    SIGNING_ROLES,
    ClosureReport,
    GasReading,
    GasThresholds,
    MonitorEntry,
    MonitorKind,
    Permit,
    PermitDraft,
    PermitStatus,
    PermitUpdates,
    Signature,
    StatusChange,
    check_window_duration,
)
from .qr import mint_qr_token
from .rbac import Identity
from .transitions import (
    GUARD_CONTRACTOR,
    GUARD_GAS,
    GUARD_STAGE2,
    Action,
    check_privilege,
    resolve_entry,
)
from .validation import DEFAULT_MAX_DURATION, ValidationReport

GAS_VALIDITY_DEFAULT = timedelta(minutes=60)

#: Statuses in which gas readings may be recorded.  Suspended is included
#: so a gas-gated permit can take the fresh reading its resume gate needs.
GAS_RECORDING_STATUSES = frozenset(
    {
        PermitStatus.VALIDATED,
        PermitStatus.APPROVED,
        PermitStatus.IN_PROGRESS,
        PermitStatus.SUSPENDED,
    }
)

#: Statuses in which the monitor log is open.
MONITORING_STATUSES = frozenset({PermitStatus.IN_PROGRESS, PermitStatus.SUSPENDED})


@dataclass(frozen=True)
class ActionContext:
    """Inputs a transition's guards and mutators may need."""

    validation_report: ValidationReport | None = None
    contractor_valid: bool | None = None  # None: no contractor record linked
    gas_validity: timedelta = GAS_VALIDITY_DEFAULT
    closure_summary: str | None = None
    closure_feedback: str = ""
    updates: PermitUpdates | None = None
    max_duration: timedelta = DEFAULT_MAX_DURATION


@dataclass(frozen=True)
class PerformResult:
    permit: Permit
    action: Action
    from_status: PermitStatus
    to_status: PermitStatus

    @property
    def status_changed(self) -> bool:
        return self.from_status != self.to_status


def initiate(
    actor: Identity,
    draft: PermitDraft,
    permit_id: int,
    now: datetime,
    *,
    max_duration: timedelta = DEFAULT_MAX_DURATION,
) -> Permit:
    """Stage 1: create a Draft permit with a freshly minted QR token."""
    check_privilege(Action.INITIATE, actor.user_id, actor.roles)
    if not draft.zone_id or not draft.zone_id.strip():
        raise PtwError("zone_id must be non-empty", code="invalid-zone")
    check_window_duration(draft.window, max_duration)
    now = as_utc(now)
    token = mint_qr_token(permit_id, draft.category, draft.window.valid_from.date())
    created = StatusChange(
        at=now,
        actor=actor.user_id,
        action=Action.INITIATE.value,
        from_status=PermitStatus.DRAFT,
        to_status=PermitStatus.DRAFT,
    )
    return Permit(
        id=permit_id,
        qr_token=token,
        category=draft.category,
        zone_id=draft.zone_id,
        description=draft.description,
        hazards=draft.hazards,
        control_measures=draft.control_measures,
        ppe_checklist=draft.ppe_checklist,
        window=draft.window,
        status=PermitStatus.DRAFT,
        issuer_id=actor.user_id,
        acceptor_id=draft.acceptor_id,
        created_at=now,
        updated_at=now,
        status_history=(created,),
    )


def perform(
    permit: Permit,
    action: Action,
    actor: Identity,
    now: datetime,
    ctx: ActionContext = ActionContext(),
) -> PerformResult:
    """Apply a transition-table action.  Not idempotent by design: repeating
    an action finds the permit in the new status and raises
    illegal-transition."""
    now = as_utc(now)
    entry = resolve_entry(permit.status, action)
    check_privilege(action, actor.user_id, actor.roles)

    from_status = permit.status
    to_status = entry.to_status

    if action == Action.VALIDATE:
        _guard_stage2(ctx)
    elif action == Action.SIGN:
        permit, completed = _apply_signature(permit, actor, now)
        if not completed:
            to_status = from_status  # partial signing leaves the status alone
    elif action == Action.ACCEPT:
        _guard_signatures(permit)
        _guard_contractor(ctx)
        _guard_gas(permit, now, ctx.gas_validity)
        permit = replace(permit, acceptor_id=actor.user_id)
    elif action == Action.RESUME:
        _guard_gas(permit, now, ctx.gas_validity)
    elif action == Action.REQUEST_CLOSE:
        permit = _attach_closure_request(permit, actor, now, ctx)
    elif action == Action.CONFIRM_CLOSE:
        permit = _confirm_closure(permit, actor, now)
    elif action == Action.REVISE:
        permit = _apply_revision(permit, ctx, now)

    if to_status != from_status:
        permit = permit.with_status(
            StatusChange(
                at=now,
                actor=actor.user_id,
                action=action.value,
                from_status=from_status,
                to_status=to_status,
            )
        )
    else:
        permit = replace(permit, updated_at=now)
    return PerformResult(permit=permit, action=action, from_status=from_status, to_status=to_status)


# --- guards ------------------------------------------------------------------


def _guard_stage2(ctx: ActionContext) -> None:
    report = ctx.validation_report
    if report is None:
        raise GuardFailedError(GUARD_STAGE2, "no validation report supplied")
    if not report.overall:
        failing = ", ".join(v.rule_name for v in report.verdicts if not v.passed)
        raise GuardFailedError(GUARD_STAGE2, f"rules failed: {failing}")


def _guard_signatures(permit: Permit) -> None:
    for role in SIGNING_ROLES:
        if permit.signature_for(role) is None:
            raise GuardFailedError(
                f"missing-signature:{role.value}", f"approval signature of {role.value} is absent"
            )


def _guard_contractor(ctx: ActionContext) -> None:
    if ctx.contractor_valid is False:
        raise GuardFailedError(
            GUARD_CONTRACTOR, "acceptor's compliance certificate has expired"
        )


def _guard_gas(permit: Permit, now: datetime, validity: timedelta) -> None:
    if permit.category not in GAS_GATED_CATEGORIES:
        return
    cutoff = now - validity
    for reading in permit.gas_readings:
        if reading.verdict and cutoff <= reading.taken_at <= now:
            return
    raise GuardFailedError(
        GUARD_GAS,
        f"{permit.category.value} requires a passing gas reading within "
        f"{int(validity.total_seconds() // 60)} minutes of activation",
    )


# --- per-action mutators -----------------------------------------------------


def _apply_signature(permit: Permit, actor: Identity, now: datetime) -> tuple[Permit, bool]:
    held = [r for r in SIGNING_ROLES if r in actor.roles]
    if not held:
        raise UnauthorizedRoleError("signing requires SafetyOfficer or AreaInCharge")
    unsigned = [r for r in held if permit.signature_for(r) is None]
    if not unsigned:
        raise DuplicateSignatureError(
            f"{actor.user_id} already signed for {', '.join(r.value for r in held)}"
        )
    signature = Signature(role=unsigned[0], user_id=actor.user_id, signed_at=now)
    permit = replace(permit, signatures=permit.signatures + (signature,))
    completed = all(permit.signature_for(r) is not None for r in SIGNING_ROLES)
    return permit, completed


def _attach_closure_request(
    permit: Permit, actor: Identity, now: datetime, ctx: ActionContext
) -> Permit:
    summary = (ctx.closure_summary or "").strip()
    if not summary:
        raise MissingReportError("closure requires a non-empty summary")
    closure = ClosureReport(
        summary=summary,
        feedback=ctx.closure_feedback,
        requested_by=actor.user_id,
        requested_at=now,
    )
    return replace(permit, closure=closure)


def _confirm_closure(permit: Permit, actor: Identity, now: datetime) -> Permit:
    if permit.closure is None:
        raise MissingReportError("no closure report on record")
    if permit.closure.requested_by == actor.user_id:
        raise SelfConfirmationError(
            f"{actor.user_id} requested this closure and cannot confirm it"
        )
    closure = replace(permit.closure, confirmed_by=actor.user_id, confirmed_at=now)
    return replace(permit, closure=closure)


def _apply_revision(permit: Permit, ctx: ActionContext, now: datetime) -> Permit:
    updates = ctx.updates or PermitUpdates()

    def pick(new, old):
        return new if new is not None else old

    window = pick(updates.window, permit.window)
    check_window_duration(window, ctx.max_duration)
    token = mint_qr_token(permit.id, permit.category, window.valid_from.date())
    return replace(
        permit,
        window=window,
        qr_token=token,
        description=pick(updates.description, permit.description),
        hazards=pick(updates.hazards, permit.hazards),
        control_measures=pick(updates.control_measures, permit.control_measures),
        ppe_checklist=pick(updates.ppe_checklist, permit.ppe_checklist),
        acceptor_id=pick(updates.acceptor_id, permit.acceptor_id),
        revision=permit.revision + 1,
        signatures=(),
        closure=None,
    )


# --- non-table operations ----------------------------------------------------


def record_gas_reading(
    permit: Permit,
    actor: Identity,
    oxygen_pct: float,
    lel_pct: float,
    co_ppm: float,
    now: datetime,
    thresholds: GasThresholds,
    taken_at: datetime | None = None,
) -> tuple[Permit, GasReading]:
    check_privilege(Action.RECORD_GAS, actor.user_id, actor.roles)
    if permit.status not in GAS_RECORDING_STATUSES:
        raise WrongStatusError(
            f"gas readings are recorded in {sorted(s.value for s in GAS_RECORDING_STATUSES)}, "
            f"not {permit.status.value}"
        )
    reading = GasReading.evaluate(
        actor.user_id, taken_at or now, oxygen_pct, lel_pct, co_ppm, thresholds
    )
    return replace(
        permit, gas_readings=permit.gas_readings + (reading,), updated_at=as_utc(now)
    ), reading


def append_monitor_entry(
    permit: Permit,
    actor: Identity,
    kind: MonitorKind,
    payload: str,
    now: datetime,
    at: datetime | None = None,
) -> tuple[Permit, MonitorEntry]:
    check_privilege(Action.MONITOR, actor.user_id, actor.roles)
    if permit.status not in MONITORING_STATUSES:
        raise WrongStatusError(
            f"monitoring applies to {sorted(s.value for s in MONITORING_STATUSES)}, "
            f"not {permit.status.value}"
        )
    entry_at = as_utc(at or now)
    if permit.monitor_log and entry_at < permit.monitor_log[-1].at:
        raise OutOfOrderEntryError("monitor entries must be timestamp-ordered")
    entry = MonitorEntry(at=entry_at, author=actor.user_id, kind=kind, payload=payload)
    return replace(
        permit, monitor_log=permit.monitor_log + (entry,), updated_at=as_utc(now)
    ), entry


def was_renewed(permit: Permit) -> bool:
    """True when the current Draft/Submitted revision came out of Expired."""
    for change in reversed(permit.status_history):
        if change.action == Action.REVISE.value:
            return change.from_status == PermitStatus.EXPIRED
    return False
