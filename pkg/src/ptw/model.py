"""Domain types for the permit lifecycle.

Everything here is an immutable snapshot: mutating operations return new
instances (see ``ptw.engine``), so values are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from datetime import datetime, timedelta
from enum import Enum
from typing import Any

from .clock import as_utc, parse_rfc3339, rfc3339
from .errors import InvalidWindowError, UnknownCategoryError


class PermitCategory(str, Enum):
    """The six supported work categories."""

    HOT_WORK = "HotWork"
    COLD_WORK = "ColdWork"
    ELECTRICAL = "Electrical"
    EXCAVATION = "Excavation"
    HEIGHT_WORK = "HeightWork"
    CONFINED_SPACE_ENTRY = "ConfinedSpaceEntry"

    @classmethod
    def parse(cls, text: str) -> "PermitCategory":
        try:
            return cls(text)
        except ValueError:
            raise UnknownCategoryError(f"unknown permit category: {text!r}") from None


#: Short codes embedded in QR tokens.
CATEGORY_CODES = {
    PermitCategory.HOT_WORK: "HW",
    PermitCategory.COLD_WORK: "CW",
    PermitCategory.ELECTRICAL: "EL",
    PermitCategory.EXCAVATION: "EX",
    PermitCategory.HEIGHT_WORK: "HT",
    PermitCategory.CONFINED_SPACE_ENTRY: "CS",
}

#: Categories whose activation is gated on a fresh passing gas reading.
GAS_GATED_CATEGORIES = frozenset(
    {PermitCategory.HOT_WORK, PermitCategory.CONFINED_SPACE_ENTRY}
)


class PermitStatus(str, Enum):
    DRAFT = "Draft"
    SUBMITTED = "Submitted"
    REJECTED = "Rejected"
    VALIDATED = "Validated"
    APPROVED = "Approved"
    IN_PROGRESS = "InProgress"
    SUSPENDED = "Suspended"
    CLOSE_REQUESTED = "CloseRequested"
    CLOSED = "Closed"
    REVOKED = "Revoked"
    EXPIRED = "Expired"


#: Statuses the expiry sweep acts on.
ACTIVE_STATUSES = frozenset(
    {
        PermitStatus.SUBMITTED,
        PermitStatus.VALIDATED,
        PermitStatus.APPROVED,
        PermitStatus.IN_PROGRESS,
        PermitStatus.SUSPENDED,
        PermitStatus.CLOSE_REQUESTED,
    }
)

#: No outgoing transitions at all.  Rejected and Expired are recoverable
#: via the revise action and are deliberately not listed here.
TERMINAL_STATUSES = frozenset({PermitStatus.CLOSED, PermitStatus.REVOKED})


class Role(str, Enum):
    ADMIN = "Admin"
    SAFETY_OFFICER = "SafetyOfficer"
    AREA_IN_CHARGE = "AreaInCharge"
    PERMIT_ISSUER = "PermitIssuer"
    ACCEPTOR = "Acceptor"
    GAS_TESTER = "GasTester"


#: Roles whose signature an approval requires, in canonical order.
SIGNING_ROLES = (Role.SAFETY_OFFICER, Role.AREA_IN_CHARGE)

#: Operational titles used in rosters map onto the role enum.
OPERATIONAL_TITLE_ROLES = {
    "Admin": Role.ADMIN,
    "SafetyOfficer": Role.SAFETY_OFFICER,
    "SSE-Maintenance": Role.PERMIT_ISSUER,
    "SSE-Shop": Role.PERMIT_ISSUER,
    "Contractor": Role.ACCEPTOR,
}


@dataclass(frozen=True)
class TimeWindow:
    """Half-open validity interval [valid_from, valid_to), second resolution."""

    valid_from: datetime
    valid_to: datetime

    def __post_init__(self):
        object.__setattr__(self, "valid_from", as_utc(self.valid_from).replace(microsecond=0))
        object.__setattr__(self, "valid_to", as_utc(self.valid_to).replace(microsecond=0))
        if self.valid_from >= self.valid_to:
            raise InvalidWindowError(
                f"valid_from {rfc3339(self.valid_from)} must precede valid_to {rfc3339(self.valid_to)}"
            )

    @property
    def duration(self) -> timedelta:
        return self.valid_to - self.valid_from

    def contains(self, at: datetime) -> bool:
        at = as_utc(at)
        return self.valid_from <= at < self.valid_to

    def to_dict(self) -> dict[str, str]:
        return {"valid_from": rfc3339(self.valid_from), "valid_to": rfc3339(self.valid_to)}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TimeWindow":
        return cls(parse_rfc3339(d["valid_from"]), parse_rfc3339(d["valid_to"]))


@dataclass(frozen=True)
class Signature:
    role: Role
    user_id: str
    signed_at: datetime

    def to_dict(self) -> dict[str, Any]:
        return {"role": self.role.value, "user_id": self.user_id, "signed_at": rfc3339(self.signed_at)}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Signature":
        return cls(Role(d["role"]), d["user_id"], parse_rfc3339(d["signed_at"]))


@dataclass(frozen=True)
class GasThresholds:
    """Pass bands for atmospheric readings; defaults follow common industrial
    practice and are configuration-overridable."""

    o2_min: float = 19.5
    o2_max: float = 23.5
    lel_max: float = 10.0
    co_max: float = 35.0


@dataclass(frozen=True)
class GasReading:
    taken_by: str
    taken_at: datetime
    oxygen_pct: float
    lel_pct: float
    co_ppm: float
    verdict: bool  # True = pass

    @classmethod
    def evaluate(
        cls,
        taken_by: str,
        taken_at: datetime,
        oxygen_pct: float,
        lel_pct: float,
        co_ppm: float,
        thresholds: GasThresholds,
    ) -> "GasReading":
        verdict = (
            thresholds.o2_min <= oxygen_pct <= thresholds.o2_max
            and lel_pct < thresholds.lel_max
            and co_ppm < thresholds.co_max
        )
        return cls(taken_by, as_utc(taken_at), oxygen_pct, lel_pct, co_ppm, verdict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "taken_by": self.taken_by,
            "taken_at": rfc3339(self.taken_at),
            "oxygen_pct": self.oxygen_pct,
            "lel_pct": self.lel_pct,
            "co_ppm": self.co_ppm,
            "verdict": "pass" if self.verdict else "fail",
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "GasReading":
        return cls(
            d["taken_by"],
            parse_rfc3339(d["taken_at"]),
            d["oxygen_pct"],
            d["lel_pct"],
            d["co_ppm"],
            d["verdict"] == "pass",
        )


class MonitorKind(str, Enum):
    ENVIRONMENT_READING = "environment_reading"
    SUPERVISION_NOTE = "supervision_note"
    SAFETY_CONDITION = "safety_condition"


@dataclass(frozen=True)
class MonitorEntry:
    at: datetime
    author: str
    kind: MonitorKind
    payload: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "at": rfc3339(self.at),
            "author": self.author,
            "kind": self.kind.value,
            "payload": self.payload,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "MonitorEntry":
        return cls(parse_rfc3339(d["at"]), d["author"], MonitorKind(d["kind"]), d["payload"])


@dataclass(frozen=True)
class ClosureReport:
    summary: str
    feedback: str
    requested_by: str
    requested_at: datetime
    confirmed_by: str | None = None
    confirmed_at: datetime | None = None

    def to_dict(self) -> dict[str, Any]:
        return {
            "summary": self.summary,
            "feedback": self.feedback,
            "requested_by": self.requested_by,
            "requested_at": rfc3339(self.requested_at),
            "confirmed_by": self.confirmed_by,
            "confirmed_at": rfc3339(self.confirmed_at) if self.confirmed_at else None,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ClosureReport":
        return cls(
            d["summary"],
            d["feedback"],
            d["requested_by"],
            parse_rfc3339(d["requested_at"]),
            d.get("confirmed_by"),
            parse_rfc3339(d["confirmed_at"]) if d.get("confirmed_at") else None,
        )


@dataclass(frozen=True)
class PpeItem:
    item: str
    checked: bool

    def to_dict(self) -> dict[str, Any]:
        return {"item": self.item, "checked": self.checked}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "PpeItem":
        return cls(d["item"], bool(d["checked"]))


@dataclass(frozen=True)
class StatusChange:
    """One entry of a permit's status history."""

    at: datetime
    actor: str
    action: str
    from_status: PermitStatus
    to_status: PermitStatus

    def to_dict(self) -> dict[str, Any]:
        return {
            "at": rfc3339(self.at),
            "actor": self.actor,
            "action": self.action,
            "from_status": self.from_status.value,
            "to_status": self.to_status.value,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "StatusChange":
        return cls(
            parse_rfc3339(d["at"]),
            d["actor"],
            d["action"],
            PermitStatus(d["from_status"]),
            PermitStatus(d["to_status"]),
        )


@dataclass(frozen=True)
class Permit:
    """The central aggregate.

    ``version`` is the storage-level optimistic concurrency counter and is
    bumped on every save; ``revision`` counts issuer revisions (revise after
    rejection or expiry).
    """

    id: int
    qr_token: str
    category: PermitCategory
    zone_id: str
    description: str
    hazards: tuple[str, ...]
    control_measures: tuple[str, ...]
    ppe_checklist: tuple[PpeItem, ...]
    window: TimeWindow
    status: PermitStatus
    issuer_id: str
    acceptor_id: str | None
    created_at: datetime
    updated_at: datetime
    signatures: tuple[Signature, ...] = ()
    gas_readings: tuple[GasReading, ...] = ()
    monitor_log: tuple[MonitorEntry, ...] = ()
    closure: ClosureReport | None = None
    revision: int = 1
    status_history: tuple[StatusChange, ...] = ()
    version: int = 0

    def signature_for(self, role: Role) -> Signature | None:
        for sig in self.signatures:
            if sig.role == role:
                return sig
        return None

    def signed_roles(self) -> frozenset[Role]:
        return frozenset(sig.role for sig in self.signatures)

    def stakeholders(self) -> tuple[str, ...]:
        """Issuer, acceptor (when designated) and signers, deduplicated."""
        seen: list[str] = [self.issuer_id]
        if self.acceptor_id and self.acceptor_id not in seen:
            seen.append(self.acceptor_id)
        for sig in self.signatures:
            if sig.user_id not in seen:
                seen.append(sig.user_id)
        return tuple(seen)

    def with_status(self, change: StatusChange) -> "Permit":
        return replace(
            self,
            status=change.to_status,
            updated_at=change.at,
            status_history=self.status_history + (change,),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "qr_token": self.qr_token,
            "category": self.category.value,
            "zone_id": self.zone_id,
            "description": self.description,
            "hazards": list(self.hazards),
            "control_measures": list(self.control_measures),
            "ppe_checklist": [p.to_dict() for p in self.ppe_checklist],
            "window": self.window.to_dict(),
            "status": self.status.value,
            "issuer_id": self.issuer_id,
            "acceptor_id": self.acceptor_id,
            "signatures": [s.to_dict() for s in self.signatures],
            "gas_readings": [g.to_dict() for g in self.gas_readings],
            "monitor_log": [m.to_dict() for m in self.monitor_log],
            "closure": self.closure.to_dict() if self.closure else None,
            "revision": self.revision,
            "created_at": rfc3339(self.created_at),
            "updated_at": rfc3339(self.updated_at),
            "status_history": [c.to_dict() for c in self.status_history],
            "version": self.version,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "Permit":
        return cls(
            id=d["id"],
            qr_token=d["qr_token"],
            category=PermitCategory(d["category"]),
            zone_id=d["zone_id"],
            description=d["description"],
            hazards=tuple(d["hazards"]),
            control_measures=tuple(d["control_measures"]),
            ppe_checklist=tuple(PpeItem.from_dict(p) for p in d["ppe_checklist"]),
            window=TimeWindow.from_dict(d["window"]),
            status=PermitStatus(d["status"]),
            issuer_id=d["issuer_id"],
            acceptor_id=d.get("acceptor_id"),
            signatures=tuple(Signature.from_dict(s) for s in d["signatures"]),
            gas_readings=tuple(GasReading.from_dict(g) for g in d["gas_readings"]),
            monitor_log=tuple(MonitorEntry.from_dict(m) for m in d["monitor_log"]),
            closure=ClosureReport.from_dict(d["closure"]) if d.get("closure") else None,
            revision=d["revision"],
            created_at=parse_rfc3339(d["created_at"]),
            updated_at=parse_rfc3339(d["updated_at"]),
            status_history=tuple(StatusChange.from_dict(c) for c in d["status_history"]),
            version=d.get("version", 0),
        )


@dataclass(frozen=True)
class PermitDraft:
    """Stage-1 initiation fields."""

    category: PermitCategory
    zone_id: str
    window: TimeWindow
    description: str = ""
    hazards: tuple[str, ...] = ()
    control_measures: tuple[str, ...] = ()
    ppe_checklist: tuple[PpeItem, ...] = ()
    acceptor_id: str | None = None


@dataclass(frozen=True)
class PermitUpdates:
    """Partial field updates accepted by revise; None keeps the old value.

    The category is fixed for the permit's lifetime (it is baked into the
    QR token's code), so it cannot be revised.
    """

    window: TimeWindow | None = None
    description: str | None = None
    hazards: tuple[str, ...] | None = None
    control_measures: tuple[str, ...] | None = None
    ppe_checklist: tuple[PpeItem, ...] | None = None
    acceptor_id: str | None = None


def check_window_duration(window: TimeWindow, max_duration: timedelta) -> None:
    """Initiation/revision invariant: duration must not exceed the cap."""
    if window.duration > max_duration:
        raise InvalidWindowError(
            f"window duration {window.duration} exceeds maximum {max_duration}"
        )
