"""Authentication, token integrity, privilege enforcement."""

from __future__ import annotations

import json
import random
from datetime import timedelta

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import ADMIN, ISSUER, OFFICER, ROSTER
from ptw.errors import (
    BadCredentialError,
    DuplicateUserIdError,
    ExpiredTokenError,
    InactiveUserError,
    InvalidTokenError,
    UnauthorizedRoleError,
    UnknownUserError,
)
from ptw.model import Role
from ptw.rbac import Identity, User, sign_claims, verify_token
from ptw.transitions import PRIVILEGE_MATRIX, Action


class TestLogin:
    def test_valid_login_snapshots_roles(self, service):
        session = service.login("so-1", "pw")
        assert Role.SAFETY_OFFICER in session.roles
        assert session.expires_at > session.issued_at

    def test_wrong_password(self, service):
        with pytest.raises(BadCredentialError):
            service.login("so-1", "nope")

    def test_unknown_user(self, service):
        with pytest.raises(UnknownUserError):
            service.login("ghost", "pw")

    def test_deactivated_user_cannot_login(self, service):
        service.update_user(ADMIN, "so-1", active=False)
        with pytest.raises(InactiveUserError):
            service.login("so-1", "pw")

    def test_login_emits_audit_event(self, service):
        before = service.storage.last_audit_seq()
        service.login("so-1", "pw")
        events = service.ledger.query(action="login", after_seq=before)
        assert len(events) == 1 and events[0].actor == "so-1"


class TestTokens:
    def test_authorize_suspend_officer_allowed(self, service):
        token = service.login("so-1", "pw").token
        identity = service.auth.authorize(token, Action.SUSPEND)
        assert identity.user_id == "so-1"

    def test_authorize_suspend_acceptor_rejected(self, service):
        token = service.login("con-1", "pw").token
        with pytest.raises(UnauthorizedRoleError):
            service.auth.authorize(token, Action.SUSPEND)

    def test_expired_token_rejected(self, service, clock):
        token = service.login("so-1", "pw").token
        clock.advance(seconds=9 * 3600)
        with pytest.raises(ExpiredTokenError):
            service.auth.authorize(token, Action.SUSPEND)

    def test_session_snapshot_isolation(self, service):
        token = service.login("so-1", "pw").token
        service.update_user(ADMIN, "so-1", roles=frozenset({Role.ACCEPTOR}))
        # the live session keeps its original snapshot until re-login
        identity = service.auth.authorize(token, Action.SUSPEND)
        assert Role.SAFETY_OFFICER in identity.roles
        fresh = service.login("so-1", "pw")
        assert fresh.roles == frozenset({Role.ACCEPTOR})

    @settings(max_examples=300, deadline=None)
    @given(data=st.data())
    def test_tampered_tokens_rejected(self, data):
        secret = b"test-secret"
        from datetime import datetime, timezone

        now = datetime(2026, 3, 2, 8, 0, tzinfo=timezone.utc)
        token = sign_claims(
            {
                "user_id": "so-1",
                "roles": ["SafetyOfficer"],
                "issued_at": "2026-03-02T08:00:00Z",
                "expires_at": "2026-03-02T16:00:00Z",
            },
            secret,
        )
        pos = data.draw(st.integers(0, len(token) - 1))
        replacement = data.draw(st.sampled_from("0123456789abcdefABCDEFxyz._-"))
        mutated = token[:pos] + replacement + token[pos + 1 :]
        if mutated == token:
            return
        with pytest.raises((InvalidTokenError, ExpiredTokenError)):
            verify_token(mutated, secret, now)

    def test_token_verifiable_without_storage(self, service):
        session = service.login("so-1", "pw")
        # direct verification against the secret, no storage involved
        restored = verify_token(session.token, service.auth._secret, service.now())
        assert restored.user_id == "so-1"


class TestPrivilegeMatrix:
    def test_no_privilege_escalation_exhaustive(self, service):
        """Every (action, role) pair outside the matrix must be rejected."""
        tokens = {}
        for identity, _name in ROSTER:
            (role,) = identity.roles
            tokens[role] = service.login(identity.user_id, "pw").token
        tokens[Role.ADMIN] = service.login("admin", "admin").token

        checked = 0
        for action in Action:
            if action == Action.LOGIN:
                continue
            allowed = PRIVILEGE_MATRIX[action]
            for role, token in tokens.items():
                if role in allowed:
                    service.auth.authorize(token, action)
                else:
                    with pytest.raises(UnauthorizedRoleError):
                        service.auth.authorize(token, action)
                checked += 1
        assert checked == (len(list(Action)) - 1) * len(Role)

    def test_system_only_actions_reject_every_role(self, service):
        for identity, _name in ROSTER:
            token = service.login(identity.user_id, "pw").token
            with pytest.raises(UnauthorizedRoleError):
                service.auth.authorize(token, Action.EXPIRE)


class TestUserManagement:
    def test_admin_creates_contractor_user(self, service):
        user = service.create_user(
            ADMIN, "con-9", "New Contractor", frozenset({Role.ACCEPTOR}), "secret"
        )
        assert user.roles == frozenset({Role.ACCEPTOR})
        assert service.login("con-9", "secret").user_id == "con-9"

    def test_non_admin_cannot_create(self, service):
        with pytest.raises(UnauthorizedRoleError):
            service.create_user(OFFICER, "x", "X", frozenset({Role.ACCEPTOR}), "pw")

    def test_duplicate_user_id(self, service):
        with pytest.raises(DuplicateUserIdError):
            service.create_user(ADMIN, "so-1", "Dup", frozenset({Role.ACCEPTOR}), "pw")

    def test_user_requires_a_role(self):
        with pytest.raises(ValueError):
            User("u", "U", frozenset())


class TestCredentialConfinement:
    def test_hashes_never_serialized(self, service, clock):
        """Grep-level check over every serialized surface."""
        from conftest import make_draft

        accounts = service.storage.list_accounts()
        secrets = [a.password_hash.hex() for a in accounts] + [a.salt.hex() for a in accounts]

        surfaces = []
        surfaces.append(json.dumps([u.to_dict() for u in service.auth.list_users()]))
        permit = service.initiate(ISSUER, make_draft(clock))
        surfaces.append(json.dumps(permit.to_dict()))
        surfaces.append(json.dumps([e.to_dict() for e in service.ledger.query(limit=10000)]))
        surfaces.append(
            json.dumps([p for _e, p in service.storage.audit_rows()])
        )
        session = service.login("so-1", "pw")
        surfaces.append(json.dumps(session.to_dict()))

        blob = "\n".join(surfaces)
        for secret in secrets:
            assert secret not in blob
