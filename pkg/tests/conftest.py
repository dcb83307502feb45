"""Shared fixtures: both storage backends, a manual clock, a seeded service."""

from __future__ import annotations

from datetime import date, datetime, timedelta, timezone

import pytest

from ptw.clock import ManualClock
from ptw.config import ServiceConfig
from ptw.model import (
    MonitorKind,
    PermitCategory,
    PermitDraft,
    PermitStatus,
    Role,
    TimeWindow,
)
from ptw.notifications import MemorySink
from ptw.rbac import Identity
from ptw.registries import ContractorRecord
from ptw.service import PermitService
from ptw.storage import InMemoryStorage, SqliteStorage

T0 = datetime(2026, 3, 2, 8, 0, tzinfo=timezone.utc)

ADMIN = Identity("admin", frozenset({Role.ADMIN}))
ISSUER = Identity("sse-mw", frozenset({Role.PERMIT_ISSUER}))
ISSUER2 = Identity("sse-shop", frozenset({Role.PERMIT_ISSUER}))
OFFICER = Identity("so-1", frozenset({Role.SAFETY_OFFICER}))
OFFICER2 = Identity("so-2", frozenset({Role.SAFETY_OFFICER}))
AIC = Identity("aic-1", frozenset({Role.AREA_IN_CHARGE}))
ACCEPTOR = Identity("con-1", frozenset({Role.ACCEPTOR}))
TESTER = Identity("gt-1", frozenset({Role.GAS_TESTER}))

ROSTER = [
    (ISSUER, "SSE Maintenance"),
    (ISSUER2, "SSE Shop"),
    (OFFICER, "Safety Officer 1"),
    (OFFICER2, "Safety Officer 2"),
    (AIC, "Area In-Charge"),
    (ACCEPTOR, "Contractor One"),
    (TESTER, "Gas Tester"),
]


@pytest.fixture(params=["memory", "sqlite"])
def storage(request, tmp_path):
    if request.param == "memory":
        backend = InMemoryStorage()
    else:
        backend = SqliteStorage(tmp_path / "ptw.db")
    yield backend
    backend.close()


@pytest.fixture
def clock():
    return ManualClock(T0)


@pytest.fixture
def config():
    return ServiceConfig(notification_backoff_base=0.0)


@pytest.fixture
def service(storage, clock, config):
    svc = PermitService(config, storage=storage, clock=clock, sink=MemorySink())
    svc.bootstrap()
    for identity, name in ROSTER:
        svc.create_user(ADMIN, identity.user_id, name, identity.roles, "pw")
    svc.put_contractor(
        ADMIN,
        ContractorRecord("con-1", "Contractor One", "CERT-1", date(2030, 12, 31)),
    )
    yield svc
    svc.close()


def window(clock, start_min: int = 60, duration_min: int = 240) -> TimeWindow:
    now = clock.now()
    return TimeWindow(
        now + timedelta(minutes=start_min), now + timedelta(minutes=start_min + duration_min)
    )


def make_draft(clock, *, category=PermitCategory.COLD_WORK, zone="shop-1", start_min=60,
               duration_min=240, acceptor="con-1") -> PermitDraft:
    return PermitDraft(
        category=category,
        zone_id=zone,
        window=window(clock, start_min, duration_min),
        description="test job",
        hazards=("noise",),
        control_measures=("barricade",),
        acceptor_id=acceptor,
    )


def drive(service, clock, draft=None, *, to: PermitStatus, issuer=ISSUER,
          officer=OFFICER, aic=AIC, acceptor=ACCEPTOR, tester=TESTER):
    """Walk a permit along the canonical path up to ``to``."""
    draft = draft or make_draft(clock)
    permit = service.initiate(issuer, draft)
    if to == PermitStatus.DRAFT:
        return permit
    permit = service.submit(permit.id, issuer)
    if to == PermitStatus.SUBMITTED:
        return permit
    permit, report = service.validate_permit(permit.id, issuer)
    assert report.overall, f"validation unexpectedly failed: {report.to_dict()}"
    if to == PermitStatus.VALIDATED:
        return permit
    permit = service.sign(permit.id, officer)
    permit = service.sign(permit.id, aic)
    assert permit.status == PermitStatus.APPROVED
    if to == PermitStatus.APPROVED:
        return permit
    if permit.category in (PermitCategory.HOT_WORK, PermitCategory.CONFINED_SPACE_ENTRY):
        permit = service.record_gas_reading(permit.id, tester, 20.9, 0.0, 1.0)
    permit = service.accept(permit.id, acceptor)
    if to == PermitStatus.IN_PROGRESS:
        return permit
    if to == PermitStatus.SUSPENDED:
        return service.suspend(permit.id, officer)
    permit = service.request_close(permit.id, acceptor, "work complete", "ok")
    if to == PermitStatus.CLOSE_REQUESTED:
        return permit
    permit = service.confirm_close(permit.id, officer)
    assert permit.status == PermitStatus.CLOSED
    return permit
