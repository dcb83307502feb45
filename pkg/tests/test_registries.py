"""Machines, contractors, incidents and their permit side effects."""

from __future__ import annotations

import random
from datetime import date, timedelta

import pytest

from conftest import ACCEPTOR, ADMIN, ISSUER, OFFICER, drive, make_draft
from ptw.errors import (
    GuardFailedError,
    InvalidIntervalError,
    UnauthorizedRoleError,
    UnknownContractorError,
    UnknownPermitLinkError,
)
from ptw.model import PermitStatus, Role
from ptw.rbac import Identity
from ptw.registries import (
    ContractorRecord,
    MachineRecord,
    OperationalStatus,
    Severity,
    restricting_incidents,
)


class TestIncidents:
    def test_critical_linked_incident_suspends_permit(self, service, clock):
        permit = drive(service, clock, to=PermitStatus.IN_PROGRESS)
        service.report_incident(
            OFFICER, permit.zone_id, Severity.CRITICAL, "gas leak", linked_permit_id=permit.id
        )
        permit = service.get_permit(permit.id)
        assert permit.status == PermitStatus.SUSPENDED
        last = service.permit_audit_trail(permit.id)[-1]
        assert last.action == "suspend" and last.actor == "system"

    def test_minor_incident_no_side_effects(self, service, clock):
        permit = drive(service, clock, to=PermitStatus.IN_PROGRESS)
        service.report_incident(OFFICER, permit.zone_id, Severity.MINOR, "scratch")
        assert service.get_permit(permit.id).status == PermitStatus.IN_PROGRESS
        restricted, _ = service.zone_restriction_check(permit.zone_id)
        assert restricted is False

    def test_unknown_permit_link(self, service):
        with pytest.raises(UnknownPermitLinkError):
            service.report_incident(
                OFFICER, "shop-1", Severity.MAJOR, "x", linked_permit_id=4242
            )

    def test_major_incident_on_submitted_permit_restricts_zone_only(self, service, clock):
        permit = drive(service, clock, to=PermitStatus.SUBMITTED)
        service.report_incident(
            OFFICER, permit.zone_id, Severity.MAJOR, "spill", linked_permit_id=permit.id
        )
        assert service.get_permit(permit.id).status == PermitStatus.SUBMITTED
        restricted, _ = service.zone_restriction_check(permit.zone_id)
        assert restricted is True

    def test_incident_and_suspension_are_atomic_in_audit(self, service, clock):
        permit = drive(service, clock, to=PermitStatus.IN_PROGRESS)
        before = service.storage.last_audit_seq()
        service.report_incident(
            OFFICER, permit.zone_id, Severity.CRITICAL, "fire", linked_permit_id=permit.id
        )
        events = service.storage.audit_rows(start_seq=before + 1)
        assert [e.action for e, _ in events] == ["report_incident", "suspend"]


class TestZoneRestriction:
    def test_open_critical_restricts(self, service):
        record = service.report_incident(OFFICER, "zone-r", Severity.CRITICAL, "boom")
        restricted, ids = service.zone_restriction_check("zone-r")
        assert restricted and ids == [record.incident_id]

    def test_closing_incident_lifts_restriction(self, service):
        record = service.report_incident(OFFICER, "zone-s", Severity.MAJOR, "leak")
        service.close_incident(OFFICER, record.incident_id)
        restricted, ids = service.zone_restriction_check("zone-s")
        assert not restricted and ids == []

    def test_restriction_blocks_stage2_validation(self, service, clock):
        service.report_incident(OFFICER, "zone-t", Severity.CRITICAL, "collapse")
        permit = service.initiate(ISSUER, make_draft(clock, zone="zone-t"))
        service.submit(permit.id, ISSUER)
        permit, report = service.validate_permit(permit.id, ISSUER)
        assert permit.status == PermitStatus.REJECTED
        zone_verdict = report.verdict_for("zone_restriction")
        assert zone_verdict is not None and not zone_verdict.passed
        assert "1" in zone_verdict.detail

    def test_random_populations_match_linear_scan_oracle(self, service):
        rng = random.Random(31)
        zones = [f"z-{i}" for i in range(8)]
        for _ in range(120):
            zone = rng.choice(zones)
            severity = rng.choice(list(Severity))
            record = service.report_incident(OFFICER, zone, severity, "event")
            if rng.random() < 0.5:
                service.close_incident(OFFICER, record.incident_id)
        for zone in zones:
            restricted, ids = service.zone_restriction_check(zone)
            expected = restricting_incidents(service.storage.list_incidents(), zone)
            assert ids == expected
            assert restricted == bool(expected)


class TestAutoSuspensionExactness:
    def test_brute_force_replay_of_suspension_rule(self, service, clock):
        """After a random incident stream, system-suspended permits must
        equal an independent replay of the rule."""
        rng = random.Random(77)
        permits = []
        for i in range(12):
            status = rng.choice(
                [PermitStatus.SUBMITTED, PermitStatus.APPROVED, PermitStatus.IN_PROGRESS]
            )
            permits.append(
                drive(service, clock, make_draft(clock, zone=f"auto-{i}"), to=status)
            )
        expected_suspended = set()
        for _ in range(30):
            permit = rng.choice(permits)
            severity = rng.choice(list(Severity))
            current = service.get_permit(permit.id)
            service.report_incident(
                OFFICER, current.zone_id, severity, "evt", linked_permit_id=permit.id
            )
            if (
                severity in (Severity.MAJOR, Severity.CRITICAL)
                and current.status == PermitStatus.IN_PROGRESS
            ):
                expected_suspended.add(permit.id)
        actual = {
            p.id
            for p in service.list_permits(statuses=frozenset({PermitStatus.SUSPENDED}))[0]
            if service.permit_audit_trail(p.id)[-1].actor == "system"
        }
        assert actual == expected_suspended


class TestContractorGate:
    def test_valid_certificate_passes(self, service):
        assert service.contractor_compliance_gate("con-1") is True

    def test_expired_certificate_blocks_accept(self, service, clock):
        service.put_contractor(
            ADMIN,
            ContractorRecord("con-exp", "Lapsed Co", "CERT-9", clock.now().date() - timedelta(days=1)),
        )
        service.create_user(
            ADMIN, "con-exp", "Lapsed", frozenset({Role.ACCEPTOR}), "pw"
        )
        permit = drive(service, clock, to=PermitStatus.APPROVED)
        expired_acceptor = Identity("con-exp", frozenset({Role.ACCEPTOR}))
        with pytest.raises(GuardFailedError) as err:
            service.accept(permit.id, expired_acceptor)
        assert err.value.code == "guard-failed:contractor-certificate-expired"

    def test_boundary_valid_until_today_passes(self, service, clock):
        service.put_contractor(
            ADMIN, ContractorRecord("con-edge", "Edge Co", "CERT-8", clock.now().date())
        )
        assert service.contractor_compliance_gate("con-edge") is True

    def test_unknown_contractor(self, service):
        with pytest.raises(UnknownContractorError):
            service.contractor_compliance_gate("nobody")

    def test_acceptor_without_record_passes_gate_at_accept(self, service, clock):
        service.create_user(ADMIN, "staff-1", "Staff", frozenset({Role.ACCEPTOR}), "pw")
        permit = drive(service, clock, to=PermitStatus.APPROVED)
        staff = Identity("staff-1", frozenset({Role.ACCEPTOR}))
        assert service.accept(permit.id, staff).status == PermitStatus.IN_PROGRESS


class TestMachines:
    def test_overdue_flag_arithmetic(self, service, clock):
        today = clock.now().date()
        record = MachineRecord(
            "m-1", "Lathe", "shop-1", OperationalStatus.OPERATIONAL,
            today - timedelta(days=40), 30,
        )
        service.put_machine(ADMIN, record)
        assert record.inspection_overdue(today) is True
        assert service.list_machines(overdue_only=True)[0].machine_id == "m-1"

    def test_not_overdue_within_interval(self, clock):
        today = clock.now().date()
        record = MachineRecord(
            "m-2", "Press", "shop-1", OperationalStatus.OPERATIONAL,
            today - timedelta(days=10), 30,
        )
        assert record.inspection_overdue(today) is False

    def test_zero_interval_invalid(self, service, clock):
        with pytest.raises(InvalidIntervalError):
            MachineRecord(
                "m-3", "Crane", "shop-2", OperationalStatus.OPERATIONAL,
                clock.now().date(), 0,
            )

    def test_unauthorized_writer(self, service, clock):
        record = MachineRecord(
            "m-4", "Hoist", "shop-2", OperationalStatus.OPERATIONAL,
            clock.now().date(), 30,
        )
        with pytest.raises(UnauthorizedRoleError):
            service.put_machine(ACCEPTOR, record)

    def test_250_generated_machines_round_trip(self, service, clock, tmp_path):
        from ptw.sim.generate import generate_dataset
        from ptw.sim.spec import WorkloadSpec

        spec = WorkloadSpec(machines=250, permits=1, contractors=5, incidents=1, cases=1)
        paths = generate_dataset(spec, tmp_path)
        count = service.bulk_load(ADMIN, "machines", paths["machines"])
        assert count == 250
        machines = service.list_machines()
        assert len(machines) == 250
        reloaded = {m.machine_id for m in machines}
        assert len(reloaded) == 250


class TestBulkLoad:
    def test_contractors_and_incidents_csv(self, service, tmp_path):
        from ptw.sim.generate import generate_dataset
        from ptw.sim.spec import WorkloadSpec

        spec = WorkloadSpec(machines=1, permits=1, contractors=50, incidents=75, cases=1)
        paths = generate_dataset(spec, tmp_path)
        assert service.bulk_load(ADMIN, "contractors", paths["contractors"]) == 50
        assert service.bulk_load(ADMIN, "incidents", paths["incidents"]) == 75
        assert len(service.list_contractors()) >= 50
        assert len(service.list_incidents()) == 75
