"""Transition table structure: determinism, terminality, reachability."""

from __future__ import annotations

import pytest

from ptw.model import TERMINAL_STATUSES, PermitStatus, Role
from ptw.transitions import (
    PRIVILEGE_MATRIX,
    TRANSITION_TABLE,
    Action,
    check_table_invariants,
    outgoing_actions,
    projection,
    resolve_entry,
)
from ptw.errors import IllegalTransitionError


def test_structural_invariants():
    check_table_invariants()


def test_terminal_statuses_have_no_outgoing():
    for status in TERMINAL_STATUSES:
        assert outgoing_actions(status) == []


def test_recoverable_terminals_expose_only_revise():
    for status in (PermitStatus.REJECTED, PermitStatus.EXPIRED):
        assert outgoing_actions(status) == [Action.REVISE]


def test_every_non_terminal_status_has_an_exit():
    for status in PermitStatus:
        if status in TERMINAL_STATUSES:
            continue
        assert outgoing_actions(status), status


def test_every_table_action_in_privilege_matrix():
    for (_, action) in TRANSITION_TABLE:
        assert action in PRIVILEGE_MATRIX


def test_admin_holds_user_management_only():
    for action, roles in PRIVILEGE_MATRIX.items():
        if action in (Action.MANAGE_USER, Action.LOGIN):
            continue
        assert Role.ADMIN not in roles, f"Admin must not hold {action}"


def test_documented_transitions():
    assert resolve_entry(PermitStatus.APPROVED, Action.ACCEPT).to_status == PermitStatus.IN_PROGRESS
    with pytest.raises(IllegalTransitionError):
        resolve_entry(PermitStatus.CLOSED, Action.SUSPEND)


def test_closed_reachable_only_via_canonical_path():
    """Enumerate all simple paths Draft -> Closed through the table."""
    edges: dict[PermitStatus, list[PermitStatus]] = {}
    for (status, _action), entry in TRANSITION_TABLE.items():
        edges.setdefault(status, []).append(entry.to_status)

    paths: list[tuple[PermitStatus, ...]] = []

    def walk(node: PermitStatus, seen: tuple[PermitStatus, ...]):
        if node == PermitStatus.CLOSED:
            paths.append(seen)
            return
        for nxt in edges.get(node, []):
            if nxt in seen:
                continue
            walk(nxt, seen + (nxt,))

    walk(PermitStatus.DRAFT, (PermitStatus.DRAFT,))
    canonical = (
        PermitStatus.DRAFT,
        PermitStatus.SUBMITTED,
        PermitStatus.VALIDATED,
        PermitStatus.APPROVED,
        PermitStatus.IN_PROGRESS,
        PermitStatus.CLOSE_REQUESTED,
        PermitStatus.CLOSED,
    )
    assert paths == [canonical]


def test_projection_is_serializable_and_complete():
    proj = projection()
    assert len(proj["transition_table"]) == len(TRANSITION_TABLE)
    assert set(proj["privilege_matrix"]) == {a.value for a in PRIVILEGE_MATRIX}
