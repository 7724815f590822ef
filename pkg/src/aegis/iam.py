"""Accounts, roles, sessions, and the permission checks gating every module.

Four fixed roles: clinicians submit and confirm prediction jobs and enter
ground truth; researchers run academic-mode jobs and review sessions;
auditors read the trail and the monitoring surface but never treat; admins
own registry, IAM, and compliance writes. Credentials are scrypt-hashed
with a per-user salt and never serialized outward.
"""

from __future__ import annotations

import hashlib
import hmac
import os
import secrets
import threading
import uuid
from dataclasses import dataclass
from datetime import timedelta
from enum import Enum

from .audit import AuditAction, AuditTrail
from .clock import Clock, parse_ts, utc_ms
from .errors import ConflictError, PermissionDeniedError

_SALT_BYTES = 16  # 128-bit salt, comfortably above the 64-bit contract


class Role(str, Enum):
    CLINICIAN = "clinician"
    RESEARCHER = "researcher"
    AUDITOR = "auditor"
    ADMIN = "admin"


class Action(str, Enum):
    READ_CATALOG = "read_catalog"
    SUBMIT_PREDICTION = "submit_prediction"
    ENTER_GROUND_TRUTH = "enter_ground_truth"
    CREATE_REVIEW_SESSION = "create_review_session"
    ACKNOWLEDGE_DISCLAIMER = "acknowledge_disclaimer"
    SUBMIT_USABILITY_RESPONSE = "submit_usability_response"
    READ_PERFORMANCE = "read_performance"
    READ_AUDIT = "read_audit"
    REGISTER_SERVICE = "register_service"
    MANAGE_USERS = "manage_users"
    MANAGE_CERTIFICATIONS = "manage_certifications"
    DECLARE_BIAS = "declare_bias"
    RUN_BIAS_TEST = "run_bias_test"
    COMPUTE_SNAPSHOT = "compute_snapshot"
    INGEST_CASE = "ingest_case"


def _allowed(*actions: Action) -> frozenset[Action]:
    return frozenset(actions)


# Static matrix; total by construction (checked below and property-tested).
PERMISSION_MATRIX: dict[Role, frozenset[Action]] = {
    Role.CLINICIAN: _allowed(
        Action.READ_CATALOG,
        Action.SUBMIT_PREDICTION,
        Action.ENTER_GROUND_TRUTH,
        Action.CREATE_REVIEW_SESSION,
        Action.ACKNOWLEDGE_DISCLAIMER,
        Action.SUBMIT_USABILITY_RESPONSE,
        Action.READ_PERFORMANCE,
        Action.INGEST_CASE,
    ),
    Role.RESEARCHER: _allowed(
        Action.READ_CATALOG,
        Action.SUBMIT_PREDICTION,
        Action.CREATE_REVIEW_SESSION,
        Action.ACKNOWLEDGE_DISCLAIMER,
        Action.SUBMIT_USABILITY_RESPONSE,
        Action.READ_PERFORMANCE,
        Action.RUN_BIAS_TEST,
        Action.INGEST_CASE,
    ),
    Role.AUDITOR: _allowed(
        Action.READ_CATALOG,
        Action.READ_AUDIT,
        Action.READ_PERFORMANCE,
    ),
    Role.ADMIN: _allowed(
        Action.READ_CATALOG,
        Action.REGISTER_SERVICE,
        Action.MANAGE_USERS,
        Action.MANAGE_CERTIFICATIONS,
        Action.DECLARE_BIAS,
        Action.RUN_BIAS_TEST,
        Action.COMPUTE_SNAPSHOT,
        Action.READ_AUDIT,
        Action.READ_PERFORMANCE,
    ),
}

assert set(PERMISSION_MATRIX) == set(Role)


def decide(role: Role, action: Action) -> bool:
    return action in PERMISSION_MATRIX[role]


@dataclass
class UserAccount:
    user_id: str
    display_name: str
    organisation: str
    role: Role
    credential_hash: bytes
    credential_salt: bytes
    active: bool = True

    def to_public_document(self) -> dict:
        # The credential never leaves this process; no field carries it.
        return {
            "user_id": self.user_id,
            "display_name": self.display_name,
            "organisation": self.organisation,
            "role": self.role.value,
            "active": self.active,
        }


@dataclass(frozen=True)
class Session:
    token: str
    user_id: str
    created_at: str
    expires_at: str


@dataclass(frozen=True)
class Decision:
    allow: bool
    reason: str | None = None


class IamService:
    def __init__(
        self,
        audit: AuditTrail,
        clock: Clock,
        *,
        session_lifetime_hours: float = 8.0,
        scrypt_cost: int = 2**14,
    ):
        self._audit = audit
        self._clock = clock
        self._lifetime = timedelta(hours=session_lifetime_hours)
        self._cost = scrypt_cost
        self._accounts: dict[str, UserAccount] = {}
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        # Fixed dummy salt keeps failed lookups doing the same hashing work
        # as real ones, so there is no user-existence oracle.
        self._dummy_salt = os.urandom(_SALT_BYTES)

    def _hash_secret(self, secret: str, salt: bytes) -> bytes:
        return hashlib.scrypt(
            secret.encode("utf-8"), salt=salt, n=self._cost, r=8, p=1, dklen=32
        )

    # -- accounts ----------------------------------------------------------

    def bootstrap_admin(self, user_id: str, secret: str, *, organisation: str = "platform") -> UserAccount:
        """First admin, created outside any session (initial provisioning)."""
        return self._store_account(user_id, user_id, organisation, Role.ADMIN, secret, actor="system")

    def create_user(
        self,
        admin_token: str,
        *,
        user_id: str,
        display_name: str,
        organisation: str,
        role: Role | str,
        secret: str,
    ) -> UserAccount:
        admin = self.require(admin_token, Action.MANAGE_USERS)
        return self._store_account(
            user_id, display_name, organisation, Role(role), secret, actor=admin.user_id
        )

    def _store_account(self, user_id, display_name, organisation, role, secret, *, actor) -> UserAccount:
        with self._lock:
            if user_id in self._accounts:
                raise ConflictError(f"user {user_id!r} already exists")
            salt = os.urandom(_SALT_BYTES)
            account = UserAccount(
                user_id=user_id,
                display_name=display_name,
                organisation=organisation,
                role=role,
                credential_hash=self._hash_secret(secret, salt),
                credential_salt=salt,
            )
            self._accounts[user_id] = account
        self._audit.append(
            AuditAction.USER_CREATED,
            user_id=actor,
            detail={"created_user": user_id, "role": role.value},
        )
        return account

    def deactivate(self, admin_token: str, user_id: str) -> None:
        self.require(admin_token, Action.MANAGE_USERS)
        account = self._accounts.get(user_id)
        if account is None:
            raise PermissionDeniedError("unknown user")
        account.active = False

    def get_account(self, user_id: str) -> UserAccount | None:
        return self._accounts.get(user_id)

    # -- sessions ----------------------------------------------------------

    def authenticate(self, user_id: str, secret: str) -> Session:
        account = self._accounts.get(user_id)
        salt = account.credential_salt if account else self._dummy_salt
        candidate = self._hash_secret(secret, salt)
        ok = account is not None and hmac.compare_digest(candidate, account.credential_hash)
        if not ok or not account.active:
            self._audit.append(
                AuditAction.LOGIN_FAILED, user_id=user_id, detail={"reason": "denied"}
            )
            # Uniform failure: same message whether the user exists, the
            # secret is wrong, or the account is inactive.
            raise PermissionDeniedError("invalid credentials")
        now = self._clock.now()
        session = Session(
            token=secrets.token_urlsafe(32),
            user_id=user_id,
            created_at=utc_ms(now),
            expires_at=utc_ms(now + self._lifetime),
        )
        with self._lock:
            self._sessions[session.token] = session
        self._audit.append(AuditAction.LOGIN_SUCCEEDED, user_id=user_id)
        return session

    def logout(self, token: str) -> None:
        session = self._sessions.pop(token, None)
        if session is not None:
            self._audit.append(AuditAction.LOGOUT, user_id=session.user_id)

    def session_user(self, token: str) -> UserAccount | None:
        """Account behind a live session, or None when invalid/expired."""
        session = self._sessions.get(token)
        if session is None:
            return None
        if utc_ms(self._clock.now()) >= session.expires_at:
            return None
        account = self._accounts.get(session.user_id)
        if account is None or not account.active:
            return None
        return account

    # -- authorization -----------------------------------------------------

    def authorize(self, token: str, action: Action | str, resource: str | None = None) -> Decision:
        action = Action(action)
        account = self.session_user(token)
        if account is None:
            decision = Decision(False, "invalid_session")
            self._audit.append(
                AuditAction.ACCESS_DENIED,
                user_id="unknown",
                detail={"action": action.value, "resource": resource, "reason": "invalid_session"},
            )
            return decision
        if decide(account.role, action):
            return Decision(True)
        decision = Decision(False, f"role {account.role.value} may not {action.value}")
        self._audit.append(
            AuditAction.ACCESS_DENIED,
            user_id=account.user_id,
            detail={"action": action.value, "resource": resource, "reason": decision.reason},
        )
        return decision

    def require(self, token: str, action: Action | str, resource: str | None = None) -> UserAccount:
        decision = self.authorize(token, action, resource)
        if not decision.allow:
            raise PermissionDeniedError(decision.reason or "denied")
        account = self.session_user(token)
        assert account is not None
        return account
