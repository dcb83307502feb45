"""Users, credentials and self-contained signed session tokens.

Tokens are a base64url claims document plus an HMAC-SHA256 signature over
it, verifiable without a storage lookup.  Roles are snapshotted into the
token at login: changing a user's roles does not affect existing sessions.
Credential hashes never leave this module.
"""

from __future__ import annotations

import base64
import hashlib
import hmac
import json
import os
from dataclasses import dataclass, replace
from datetime import datetime, timedelta
from typing import Any

from .clock import Clock, SystemClock, parse_rfc3339, rfc3339
from .errors import (
    BadCredentialError,
    DuplicateUserIdError,
    ExpiredTokenError,
    InactiveUserError,
    InvalidTokenError,
    UnauthorizedRoleError,
    UnknownUserError,
)
from .model import Role
from .transitions import PRIVILEGE_MATRIX, SYSTEM_ACTOR, Action, check_privilege

PBKDF2_ITERATIONS = 20_000


@dataclass(frozen=True)
class User:
    user_id: str
    display_name: str
    roles: frozenset[Role]
    active: bool = True

    def __post_init__(self):
        if not self.roles:
            raise ValueError("a user needs at least one role")

    def to_dict(self) -> dict[str, Any]:
        return {
            "user_id": self.user_id,
            "display_name": self.display_name,
            "roles": sorted(r.value for r in self.roles),
            "active": self.active,
        }


@dataclass(frozen=True)
class UserAccount:
    """Storage-side record; the salted hash stays out of every interface."""

    user: User
    salt: bytes
    password_hash: bytes


@dataclass(frozen=True)
class Identity:
    """Authenticated caller handed to service operations."""

    user_id: str
    roles: frozenset[Role]

    @property
    def is_system(self) -> bool:
        return self.user_id == SYSTEM_ACTOR


SYSTEM = Identity(SYSTEM_ACTOR, frozenset())


@dataclass(frozen=True)
class Session:
    token: str
    user_id: str
    roles: frozenset[Role]
    issued_at: datetime
    expires_at: datetime

    def to_dict(self) -> dict[str, Any]:
        return {
            "token": self.token,
            "user_id": self.user_id,
            "roles": sorted(r.value for r in self.roles),
            "issued_at": rfc3339(self.issued_at),
            "expires_at": rfc3339(self.expires_at),
        }


def hash_password(password: str, salt: bytes) -> bytes:
    return hashlib.pbkdf2_hmac("sha256", password.encode("utf-8"), salt, PBKDF2_ITERATIONS)


def make_account(user: User, password: str) -> UserAccount:
    salt = os.urandom(16)
    return UserAccount(user=user, salt=salt, password_hash=hash_password(password, salt))


def _b64(data: bytes) -> str:
    return base64.urlsafe_b64encode(data).decode("ascii").rstrip("=")


def _unb64(text: str) -> bytes:
    pad = "=" * (-len(text) % 4)
    return base64.urlsafe_b64decode(text + pad)


def sign_claims(claims: dict[str, Any], secret: bytes) -> str:
    body = _b64(json.dumps(claims, sort_keys=True, separators=(",", ":")).encode("utf-8"))
    sig = hmac.new(secret, body.encode("ascii"), hashlib.sha256).hexdigest()
    return f"{body}.{sig}"


def verify_token(token: str, secret: bytes, now: datetime) -> Session:
    try:
        body, sig = token.split(".", 1)
    except ValueError:
        raise InvalidTokenError("malformed token") from None
    expected = hmac.new(secret, body.encode("ascii"), hashlib.sha256).hexdigest()
    if not hmac.compare_digest(sig, expected):
        raise InvalidTokenError("bad token signature")
    try:
        claims = json.loads(_unb64(body))
        user_id = claims["user_id"]
        roles = frozenset(Role(r) for r in claims["roles"])
        issued_at = parse_rfc3339(claims["issued_at"])
        expires_at = parse_rfc3339(claims["expires_at"])
    except Exception:
        raise InvalidTokenError("undecodable claims") from None
    if now >= expires_at:
        raise ExpiredTokenError("session token expired")
    return Session(token, user_id, roles, issued_at, expires_at)


class Authenticator:
    """Login/authorize/user-management over a storage backend."""

    def __init__(
        self,
        storage,
        secret: bytes,
        session_lifetime: timedelta = timedelta(hours=8),
        clock: Clock | None = None,
    ):
        self._storage = storage
        self._secret = secret
        self._lifetime = session_lifetime
        self._clock = clock or SystemClock()

    def login(self, user_id: str, password: str) -> Session:
        account = self._storage.get_account(user_id)
        if account is None:
            raise UnknownUserError(f"no such user: {user_id}")
        if not account.user.active:
            raise InactiveUserError(f"user {user_id} is deactivated")
        if not hmac.compare_digest(
            hash_password(password, account.salt), account.password_hash
        ):
            raise BadCredentialError("credential verification failed")
        now = self._clock.now()
        expires = now + self._lifetime
        claims = {
            "user_id": user_id,
            "roles": sorted(r.value for r in account.user.roles),
            "issued_at": rfc3339(now),
            "expires_at": rfc3339(expires),
        }
        token = sign_claims(claims, self._secret)
        return Session(token, user_id, account.user.roles, now, expires)

    def authorize(self, token: str, action: Action) -> Identity:
        """Verify the bearer token and check the privilege matrix."""
        session = verify_token(token, self._secret, self._clock.now())
        check_privilege(action, session.user_id, session.roles)
        return Identity(session.user_id, session.roles)

    def identify(self, token: str) -> Identity:
        """Token verification only (for read routes open to any role)."""
        session = verify_token(token, self._secret, self._clock.now())
        return Identity(session.user_id, session.roles)

    # --- user management (Admin) ---

    def create_user(
        self, actor: Identity, user_id: str, display_name: str, roles: frozenset[Role], password: str
    ) -> User:
        self._require_admin(actor)
        if self._storage.get_account(user_id) is not None:
            raise DuplicateUserIdError(f"user {user_id} already exists")
        user = User(user_id, display_name, roles)
        self._storage.put_account(make_account(user, password))
        return user

    def update_user(
        self,
        actor: Identity,
        user_id: str,
        *,
        display_name: str | None = None,
        roles: frozenset[Role] | None = None,
        active: bool | None = None,
    ) -> User:
        self._require_admin(actor)
        account = self._storage.get_account(user_id)
        if account is None:
            raise UnknownUserError(f"no such user: {user_id}")
        user = account.user
        if display_name is not None:
            user = replace(user, display_name=display_name)
        if roles is not None:
            user = replace(user, roles=roles)
        if active is not None:
            user = replace(user, active=active)
        self._storage.put_account(replace(account, user=user))
        return user

    def get_user(self, user_id: str) -> User | None:
        account = self._storage.get_account(user_id)
        return account.user if account else None

    def list_users(self) -> list[User]:
        return [a.user for a in self._storage.list_accounts()]

    def _require_admin(self, actor: Identity) -> None:
        if actor.is_system:
            return
        if Role.ADMIN not in actor.roles:
            raise UnauthorizedRoleError("user management requires the Admin role")


def privilege_pairs() -> list[tuple[Action, Role, bool]]:
    """Every (action, role, permitted) triple — used by exhaustive tests."""
    out = []
    for action in Action:
        allowed = PRIVILEGE_MATRIX.get(action, frozenset())
        for role in Role:
            out.append((action, role, role in allowed))
    return out
