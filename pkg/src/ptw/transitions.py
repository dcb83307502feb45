"""The authoritative (status, action) -> transition table and privilege map.

The table is the single source of truth for the lifecycle: every status
change anywhere in the system resolves through ``resolve_entry``.  The
``expire`` action is reserved for the system actor (empty role set); the
sweep applies it.  Rejected and Expired each expose exactly one recovery
edge (``revise``); Closed and Revoked have none.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import IllegalTransitionError, UnauthorizedRoleError
from .model import PermitStatus as S
from .model import Role


class Action(str, Enum):
    INITIATE = "initiate"
    SUBMIT = "submit"
    VALIDATE = "validate"
    REJECT = "reject"
    SIGN = "sign"
    ACCEPT = "accept"
    RECORD_GAS = "record_gas"
    MONITOR = "monitor"
    SUSPEND = "suspend"
    RESUME = "resume"
    REVOKE = "revoke"
    REQUEST_CLOSE = "request_close"
    CONFIRM_CLOSE = "confirm_close"
    REVISE = "revise"
    EXPIRE = "expire"
    MANAGE_USER = "manage_user"
    LOGIN = "login"


# Guard predicate names, referenced by the table and by error codes.
GUARD_STAGE2 = "stage2-validation"
GUARD_SIGNATURES = "signatures-complete"
GUARD_GAS = "missing-gas-reading"
GUARD_CONTRACTOR = "contractor-certificate-expired"
GUARD_REPORT = "missing-report"
GUARD_FOUR_EYES = "self-confirmation-forbidden"
GUARD_DUAL_SIGN = "dual-signatures"


@dataclass(frozen=True)
class TransitionEntry:
    to_status: S
    required_roles: frozenset[Role]
    guards: tuple[str, ...] = ()


_ISSUER = frozenset({Role.PERMIT_ISSUER})
_OFFICER = frozenset({Role.SAFETY_OFFICER})
_SIGNERS = frozenset({Role.SAFETY_OFFICER, Role.AREA_IN_CHARGE})
_ACCEPTOR = frozenset({Role.ACCEPTOR})
_SYSTEM_ONLY: frozenset[Role] = frozenset()

TRANSITION_TABLE: dict[tuple[S, Action], TransitionEntry] = {
    (S.DRAFT, Action.SUBMIT): TransitionEntry(S.SUBMITTED, _ISSUER),
    (S.SUBMITTED, Action.VALIDATE): TransitionEntry(S.VALIDATED, _ISSUER, (GUARD_STAGE2,)),
    (S.SUBMITTED, Action.REJECT): TransitionEntry(S.REJECTED, _OFFICER),
    # sign only changes status once both signing roles are present
    (S.VALIDATED, Action.SIGN): TransitionEntry(S.APPROVED, _SIGNERS, (GUARD_DUAL_SIGN,)),
    (S.APPROVED, Action.ACCEPT): TransitionEntry(
        S.IN_PROGRESS, _ACCEPTOR, (GUARD_SIGNATURES, GUARD_CONTRACTOR, GUARD_GAS)
    ),
    (S.IN_PROGRESS, Action.SUSPEND): TransitionEntry(S.SUSPENDED, _OFFICER),
    # resume re-enters execution, so the gas gate is re-checked for freshness
    (S.SUSPENDED, Action.RESUME): TransitionEntry(S.IN_PROGRESS, _OFFICER, (GUARD_GAS,)),
    (S.APPROVED, Action.REVOKE): TransitionEntry(S.REVOKED, _OFFICER),
    (S.IN_PROGRESS, Action.REVOKE): TransitionEntry(S.REVOKED, _OFFICER),
    (S.SUSPENDED, Action.REVOKE): TransitionEntry(S.REVOKED, _OFFICER),
    (S.IN_PROGRESS, Action.REQUEST_CLOSE): TransitionEntry(
        S.CLOSE_REQUESTED, _ACCEPTOR, (GUARD_REPORT,)
    ),
    (S.CLOSE_REQUESTED, Action.CONFIRM_CLOSE): TransitionEntry(
        S.CLOSED, frozenset({Role.SAFETY_OFFICER, Role.PERMIT_ISSUER}), (GUARD_FOUR_EYES,)
    ),
    (S.REJECTED, Action.REVISE): TransitionEntry(S.DRAFT, _ISSUER),
    # renewal: an expired permit is revised (revision+1, new window) and resubmitted
    (S.EXPIRED, Action.REVISE): TransitionEntry(S.DRAFT, _ISSUER),
    (S.SUBMITTED, Action.EXPIRE): TransitionEntry(S.EXPIRED, _SYSTEM_ONLY),
    (S.VALIDATED, Action.EXPIRE): TransitionEntry(S.EXPIRED, _SYSTEM_ONLY),
    (S.APPROVED, Action.EXPIRE): TransitionEntry(S.EXPIRED, _SYSTEM_ONLY),
    (S.IN_PROGRESS, Action.EXPIRE): TransitionEntry(S.EXPIRED, _SYSTEM_ONLY),
    (S.SUSPENDED, Action.EXPIRE): TransitionEntry(S.EXPIRED, _SYSTEM_ONLY),
    (S.CLOSE_REQUESTED, Action.EXPIRE): TransitionEntry(S.EXPIRED, _SYSTEM_ONLY),
}


#: Action -> roles permitted.  Admin manages users and nothing on permits;
#: the empty set marks system-only actions.
PRIVILEGE_MATRIX: dict[Action, frozenset[Role]] = {
    Action.INITIATE: _ISSUER,
    Action.SUBMIT: _ISSUER,
    Action.VALIDATE: _ISSUER,
    Action.REJECT: _OFFICER,
    Action.SIGN: _SIGNERS,
    Action.ACCEPT: _ACCEPTOR,
    Action.RECORD_GAS: frozenset({Role.GAS_TESTER}),
    Action.MONITOR: frozenset(
        {Role.ACCEPTOR, Role.PERMIT_ISSUER, Role.SAFETY_OFFICER, Role.AREA_IN_CHARGE}
    ),
    Action.SUSPEND: _OFFICER,
    Action.RESUME: _OFFICER,
    Action.REVOKE: _OFFICER,
    Action.REQUEST_CLOSE: _ACCEPTOR,
    Action.CONFIRM_CLOSE: frozenset({Role.SAFETY_OFFICER, Role.PERMIT_ISSUER}),
    Action.REVISE: _ISSUER,
    Action.EXPIRE: _SYSTEM_ONLY,
    Action.MANAGE_USER: frozenset({Role.ADMIN}),
    Action.LOGIN: frozenset(set(Role)),
}

SYSTEM_ACTOR = "system"


def resolve_entry(status: S, action: Action) -> TransitionEntry:
    entry = TRANSITION_TABLE.get((status, action))
    if entry is None:
        raise IllegalTransitionError(f"no transition from {status.value} via {action.value}")
    return entry


def check_privilege(action: Action, actor_id: str, roles: frozenset[Role]) -> None:
    """Raise unless the actor may perform ``action``; the system actor may
    perform anything."""
    if actor_id == SYSTEM_ACTOR:
        return
    allowed = PRIVILEGE_MATRIX.get(action, _SYSTEM_ONLY)
    if not (allowed & roles):
        raise UnauthorizedRoleError(
            f"action {action.value} requires one of "
            f"{sorted(r.value for r in allowed) or ['<system>']}, actor {actor_id} has "
            f"{sorted(r.value for r in roles)}"
        )


def outgoing_actions(status: S) -> list[Action]:
    return [a for (s, a) in TRANSITION_TABLE if s == status]


def check_table_invariants() -> None:
    """Structural sanity used by tests and startup: determinism is given by
    the dict; check coverage and terminality."""
    from .model import TERMINAL_STATUSES

    for status in S:
        outgoing = outgoing_actions(status)
        if status in TERMINAL_STATUSES:
            if outgoing:
                raise AssertionError(f"terminal status {status} has outgoing transitions")
        elif not outgoing:
            raise AssertionError(f"non-terminal status {status} has no outgoing transitions")
    for (_, action) in TRANSITION_TABLE:
        if action not in PRIVILEGE_MATRIX:
            raise AssertionError(f"table action {action} missing from privilege matrix")


def projection() -> dict[str, dict]:
    """Serializable view of table + privileges (consumed by the dashboard)."""
    return {
        "privilege_matrix": {
            a.value: sorted(r.value for r in roles) for a, roles in PRIVILEGE_MATRIX.items()
        },
        "transition_table": [
            {
                "from_status": s.value,
                "action": a.value,
                "to_status": e.to_status.value,
                "required_roles": sorted(r.value for r in e.required_roles),
                "guards": list(e.guards),
            }
            for (s, a), e in sorted(
                TRANSITION_TABLE.items(), key=lambda kv: (kv[0][0].value, kv[0][1].value)
            )
        ],
    }
