"""Linked registries: machines, contractors, incidents.

Types only, plus the pure rules (inspection overdue, certificate validity,
zone restriction).  Mutations and their permit side effects live in
``ptw.service`` so the incident -> suspension unit stays atomic with its
audit events.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from datetime import date, datetime, timedelta
from enum import Enum
from pathlib import Path
from typing import Any, Iterable

from .clock import parse_rfc3339, rfc3339
from .errors import InvalidIntervalError, InvalidSeverityError


class OperationalStatus(str, Enum):
    OPERATIONAL = "operational"
    UNDER_MAINTENANCE = "under_maintenance"
    OUT_OF_SERVICE = "out_of_service"


class Severity(str, Enum):
    MINOR = "minor"
    MODERATE = "moderate"
    MAJOR = "major"
    CRITICAL = "critical"

    @classmethod
    def parse(cls, text: str) -> "Severity":
        try:
            return cls(text)
        except ValueError:
            raise InvalidSeverityError(f"unknown severity: {text!r}") from None


#: Severities that auto-restrict a zone / auto-suspend a linked permit.
RESTRICTING_SEVERITIES = frozenset({Severity.MAJOR, Severity.CRITICAL})


@dataclass(frozen=True)
class MachineRecord:
    machine_id: str
    name: str
    zone_id: str
    operational_status: OperationalStatus
    last_inspection: date
    inspection_interval_days: int

    def __post_init__(self):
        if self.inspection_interval_days <= 0:
            raise InvalidIntervalError(
                f"inspection interval must be positive, got {self.inspection_interval_days}"
            )

    @property
    def next_inspection_due(self) -> date:
        return self.last_inspection + timedelta(days=self.inspection_interval_days)

    def inspection_overdue(self, today: date) -> bool:
        return today > self.next_inspection_due

    def to_dict(self) -> dict[str, Any]:
        return {
            "machine_id": self.machine_id,
            "name": self.name,
            "zone_id": self.zone_id,
            "operational_status": self.operational_status.value,
            "last_inspection": self.last_inspection.isoformat(),
            "inspection_interval_days": self.inspection_interval_days,
            "next_inspection_due": self.next_inspection_due.isoformat(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "MachineRecord":
        return cls(
            d["machine_id"],
            d["name"],
            d["zone_id"],
            OperationalStatus(d["operational_status"]),
            date.fromisoformat(d["last_inspection"]),
            int(d["inspection_interval_days"]),
        )


@dataclass(frozen=True)
class ContractorRecord:
    contractor_id: str
    name: str
    compliance_certificate_id: str
    certificate_valid_until: date

    def compliance_valid(self, today: date) -> bool:
        # boundary inclusive: still valid on the expiry date itself
        return today <= self.certificate_valid_until

    def to_dict(self) -> dict[str, Any]:
        return {
            "contractor_id": self.contractor_id,
            "name": self.name,
            "compliance_certificate_id": self.compliance_certificate_id,
            "certificate_valid_until": self.certificate_valid_until.isoformat(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ContractorRecord":
        return cls(
            d["contractor_id"],
            d["name"],
            d["compliance_certificate_id"],
            date.fromisoformat(d["certificate_valid_until"]),
        )


@dataclass(frozen=True)
class IncidentRecord:
    incident_id: int
    reported_at: datetime
    zone_id: str
    severity: Severity
    root_cause: str
    linked_permit_id: int | None = None
    status: str = "open"  # open | closed

    def to_dict(self) -> dict[str, Any]:
        return {
            "incident_id": self.incident_id,
            "reported_at": rfc3339(self.reported_at),
            "zone_id": self.zone_id,
            "severity": self.severity.value,
            "root_cause": self.root_cause,
            "linked_permit_id": self.linked_permit_id,
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "IncidentRecord":
        return cls(
            int(d["incident_id"]),
            parse_rfc3339(d["reported_at"]),
            d["zone_id"],
            Severity(d["severity"]),
            d["root_cause"],
            d.get("linked_permit_id"),
            d.get("status", "open"),
        )


def restricting_incidents(incidents: Iterable[IncidentRecord], zone_id: str) -> list[int]:
    """Ids of open major/critical incidents in the zone, ascending."""
    return sorted(
        i.incident_id
        for i in incidents
        if i.zone_id == zone_id and i.status == "open" and i.severity in RESTRICTING_SEVERITIES
    )


# --- CSV bulk load (column order matches the simulator's generated files) ---

MACHINE_COLUMNS = [
    "machine_id", "name", "zone_id", "operational_status", "last_inspection",
    "inspection_interval_days",
]
CONTRACTOR_COLUMNS = [
    "contractor_id", "name", "compliance_certificate_id", "certificate_valid_until",
]
INCIDENT_COLUMNS = [
    "incident_id", "reported_at", "zone_id", "severity", "root_cause",
    "linked_permit_id", "status",
]


def read_machines_csv(path: str | Path) -> list[MachineRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                MachineRecord(
                    row["machine_id"],
                    row["name"],
                    row["zone_id"],
                    OperationalStatus(row["operational_status"]),
                    date.fromisoformat(row["last_inspection"]),
                    int(row["inspection_interval_days"]),
                )
            )
    return out


def read_contractors_csv(path: str | Path) -> list[ContractorRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                ContractorRecord(
                    row["contractor_id"],
                    row["name"],
                    row["compliance_certificate_id"],
                    date.fromisoformat(row["certificate_valid_until"]),
                )
            )
    return out


def read_incidents_csv(path: str | Path) -> list[IncidentRecord]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append(
                IncidentRecord(
                    int(row["incident_id"]),
                    parse_rfc3339(row["reported_at"]),
                    row["zone_id"],
                    Severity.parse(row["severity"]),
                    row["root_cause"],
                    int(row["linked_permit_id"]) if row.get("linked_permit_id") else None,
                    row.get("status", "open"),
                )
            )
    return out
